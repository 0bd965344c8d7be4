//! Policy kinds compared in the experiments: the solved threshold policy,
//! zero-wait, periodic, and arbitrary explicit tables.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Action, State};
use crate::solver::{Policy, ThresholdPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PolicyKind {
    Optimal(ThresholdPolicy),
    /// Transmit in every slot.
    ZeroWait,
    /// Transmit on slots `t ≡ 0 (mod period)`. With `skip_on_empty` the
    /// scheduled slot is skipped when the battery is empty.
    Periodic { period: u32, skip_on_empty: bool },
    Explicit(Policy),
}

impl PolicyKind {
    pub fn periodic(period: u32) -> Self {
        assert!(period >= 1, "period must be at least 1");
        PolicyKind::Periodic {
            period,
            skip_on_empty: false,
        }
    }

    pub fn decide(&self, s: State, t: u64) -> Action {
        match self {
            PolicyKind::Optimal(tp) => tp.decide(s),
            PolicyKind::ZeroWait => Action::Transmit,
            PolicyKind::Periodic {
                period,
                skip_on_empty,
            } => {
                let due = t.is_multiple_of(u64::from(*period));
                Action::from(due && !(*skip_on_empty && s.battery == 0))
            }
            PolicyKind::Explicit(p) => p.action(s),
        }
    }

    /// Periodic is the only kind whose decisions depend on the slot index.
    pub fn is_stationary(&self) -> bool {
        !matches!(self, PolicyKind::Periodic { .. })
    }

    pub fn name(&self) -> String {
        match self {
            PolicyKind::Optimal(_) => "optimal".to_string(),
            PolicyKind::ZeroWait => "zero-wait".to_string(),
            PolicyKind::Periodic { period, .. } => format!("periodic-{period}"),
            PolicyKind::Explicit(_) => "explicit".to_string(),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    #[test]
    fn zero_wait_always_transmits() {
        for s in [State::new(1, 0), State::new(9, 4), State::new(500, 20)] {
            for t in [0, 1, 17] {
                assert_eq!(PolicyKind::ZeroWait.decide(s, t), Action::Transmit);
            }
        }
    }

    #[test]
    fn periodic_anchors_at_slot_zero() {
        let k = PolicyKind::periodic(5);
        let s = State::new(3, 2);
        for t in [0, 5, 10] {
            assert_eq!(k.decide(s, t), Action::Transmit);
        }
        for t in 1..5 {
            assert_eq!(k.decide(s, t), Action::Idle);
        }
        // pays for backup energy by default
        assert_eq!(k.decide(State::new(3, 0), 10), Action::Transmit);
        let skipping = PolicyKind::Periodic {
            period: 5,
            skip_on_empty: true,
        };
        assert_eq!(skipping.decide(State::new(3, 0), 10), Action::Idle);
        assert_eq!(skipping.decide(State::new(3, 1), 10), Action::Transmit);
    }

    #[test]
    fn optimal_uses_row_threshold() {
        let m = ModelParams::new(0.5, 0.2, 4, 2.0, 10.0, 20).unwrap();
        let mut tp = ThresholdPolicy::uniform(&m, 2);
        tp.thresholds[3] = 7;
        let k = PolicyKind::Optimal(tp);
        assert_eq!(k.decide(State::new(6, 3), 0), Action::Idle);
        assert_eq!(k.decide(State::new(7, 3), 0), Action::Transmit);
        assert_eq!(k.decide(State::new(300, 3), 0), Action::Transmit);
    }

    #[test]
    fn explicit_reads_table_and_saturates() {
        let m = ModelParams::new(0.5, 0.2, 2, 2.0, 10.0, 5).unwrap();
        let p = Policy::from_fn(&m, |s| Action::from(s.aoi == 5));
        let k = PolicyKind::Explicit(p);
        assert_eq!(k.decide(State::new(4, 1), 3), Action::Idle);
        assert_eq!(k.decide(State::new(5, 1), 3), Action::Transmit);
        assert_eq!(k.decide(State::new(80, 1), 3), Action::Transmit);
        assert!(k.is_stationary());
        assert!(!PolicyKind::periodic(5).is_stationary());
    }
}
