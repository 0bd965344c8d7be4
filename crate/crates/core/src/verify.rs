//! Numerical checks of the structural properties of converged value tables:
//! monotonicity in AoI and battery, the unit AoI increment bound, the mixed
//! increment bound, and sub-modularity of Q in (AoI, action).
//!
//! Checks report violations instead of failing. States at `aoi = delta_max`
//! are left out of the increment and sub-modularity checks because the
//! saturated boundary flattens the values there.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Action, ModelParams, State};
use crate::solver::{q_value, ValueTable};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub check: &'static str,
    pub passed: bool,
    /// Largest amount by which the inequality fails (0 when it never does).
    pub worst_violation: f64,
    /// States compared at the worst violation.
    pub witness: Option<(State, State)>,
    pub tolerance: f64,
    pub comparisons: usize,
}

impl fmt::Display for StructureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "pass" } else { "FAIL" };
        write!(
            f,
            "{:<20} {verdict} worst_violation={:.3e} comparisons={}",
            self.check, self.worst_violation, self.comparisons
        )?;
        if let Some((a, b)) = self.witness {
            write!(f, " witness={a}->{b}")?;
        }
        Ok(())
    }
}

struct Tracker {
    check: &'static str,
    tolerance: f64,
    worst: f64,
    witness: Option<(State, State)>,
    comparisons: usize,
}

impl Tracker {
    fn new(check: &'static str, tolerance: f64) -> Self {
        Self {
            check,
            tolerance,
            worst: 0.0,
            witness: None,
            comparisons: 0,
        }
    }

    /// Records the inequality `lhs <= rhs`.
    fn le(&mut self, lhs: f64, rhs: f64, a: State, b: State) {
        self.comparisons += 1;
        let excess = lhs - rhs;
        if excess > self.worst || excess.is_nan() {
            self.worst = if excess.is_nan() { f64::INFINITY } else { excess };
            self.witness = Some((a, b));
        }
    }

    fn finish(self) -> StructureReport {
        StructureReport {
            check: self.check,
            passed: self.worst <= self.tolerance,
            worst_violation: self.worst,
            witness: if self.worst > 0.0 { self.witness } else { None },
            tolerance: self.tolerance,
            comparisons: self.comparisons,
        }
    }
}

/// V(Δ, q) ≤ V(Δ+1, q) for every Δ < delta_max.
pub fn check_monotone_aoi(v: &ValueTable, m: &ModelParams) -> StructureReport {
    check_monotone_aoi_with(v, m, DEFAULT_TOLERANCE)
}

pub fn check_monotone_aoi_with(v: &ValueTable, m: &ModelParams, tol: f64) -> StructureReport {
    let mut t = Tracker::new("monotone_aoi", tol);
    for q in 0..=m.battery_cap {
        for d in 1..m.delta_max {
            let (a, b) = (State::new(d, q), State::new(d + 1, q));
            t.le(v.get(a), v.get(b), a, b);
        }
    }
    t.finish()
}

/// V(Δ, q) ≥ V(Δ, q+1) for every q < battery_cap.
pub fn check_monotone_battery(v: &ValueTable, m: &ModelParams) -> StructureReport {
    check_monotone_battery_with(v, m, DEFAULT_TOLERANCE)
}

pub fn check_monotone_battery_with(v: &ValueTable, m: &ModelParams, tol: f64) -> StructureReport {
    let mut t = Tracker::new("monotone_battery", tol);
    for q in 0..m.battery_cap {
        for d in 1..=m.delta_max {
            let (a, b) = (State::new(d, q), State::new(d, q + 1));
            t.le(v.get(b), v.get(a), a, b);
        }
    }
    t.finish()
}

/// V(Δ+1, q) − V(Δ, q) ≥ 1 for Δ+1 < delta_max.
pub fn check_increment_aoi(v: &ValueTable, m: &ModelParams) -> StructureReport {
    check_increment_aoi_with(v, m, DEFAULT_TOLERANCE)
}

pub fn check_increment_aoi_with(v: &ValueTable, m: &ModelParams, tol: f64) -> StructureReport {
    let mut t = Tracker::new("increment_aoi", tol);
    for q in 0..=m.battery_cap {
        for d in 1..m.delta_max - 1 {
            let (a, b) = (State::new(d, q), State::new(d + 1, q));
            t.le(1.0, v.get(b) - v.get(a), a, b);
        }
    }
    t.finish()
}

/// V(Δ+1, q+1) − V(Δ, q+1) ≥ p·[V(Δ+1, q) − V(Δ, q)] for Δ+1 < delta_max.
pub fn check_increment_mixed(v: &ValueTable, m: &ModelParams) -> StructureReport {
    check_increment_mixed_with(v, m, DEFAULT_TOLERANCE)
}

pub fn check_increment_mixed_with(v: &ValueTable, m: &ModelParams, tol: f64) -> StructureReport {
    let mut t = Tracker::new("increment_mixed", tol);
    let p = m.p_block;
    for q in 0..m.battery_cap {
        for d in 1..m.delta_max - 1 {
            let upper = v.get(State::new(d + 1, q + 1)) - v.get(State::new(d, q + 1));
            let lower = v.get(State::new(d + 1, q)) - v.get(State::new(d, q));
            t.le(p * lower, upper, State::new(d, q), State::new(d, q + 1));
        }
    }
    t.finish()
}

/// Q(Δ, q, 0) − Q(Δ, q, 1) ≤ Q(Δ+1, q, 0) − Q(Δ+1, q, 1) for Δ+1 < delta_max
/// and every battery level.
pub fn check_submodular(v: &ValueTable, m: &ModelParams) -> StructureReport {
    check_submodular_with(v, m, DEFAULT_TOLERANCE)
}

pub fn check_submodular_with(v: &ValueTable, m: &ModelParams, tol: f64) -> StructureReport {
    let mut t = Tracker::new("submodular", tol);
    let advantage = |s: State| q_value(v, s, Action::Idle, m) - q_value(v, s, Action::Transmit, m);
    for q in 0..=m.battery_cap {
        let mut prev = advantage(State::new(1, q));
        for d in 1..m.delta_max - 1 {
            let next = advantage(State::new(d + 1, q));
            t.le(prev, next, State::new(d, q), State::new(d + 1, q));
            prev = next;
        }
    }
    t.finish()
}

/// Runs all five checks at the default tolerance.
pub fn run_all(v: &ValueTable, m: &ModelParams) -> Vec<StructureReport> {
    vec![
        check_monotone_aoi(v, m),
        check_monotone_battery(v, m),
        check_increment_aoi(v, m),
        check_increment_mixed(v, m),
        check_submodular(v, m),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(0.5, 0.2, 4, 2.0, 10.0, 12).unwrap()
    }

    #[test]
    fn constant_table_is_monotone_but_not_incremental() {
        let m = params();
        let v = ValueTable::from_fn(&m, |_| 3.5);
        let aoi = check_monotone_aoi(&v, &m);
        assert!(aoi.passed);
        assert_eq!(aoi.worst_violation, 0.0);
        assert!(check_monotone_battery(&v, &m).passed);
        let inc = check_increment_aoi(&v, &m);
        assert!(!inc.passed);
        assert_eq!(inc.worst_violation, 1.0);
    }

    #[test]
    fn injected_dip_is_located() {
        let m = params();
        let mut v = ValueTable::from_fn(&m, |s| s.aoi as f64);
        v.set(State::new(5, 2), 4.0 - 1.0);
        let r = check_monotone_aoi(&v, &m);
        assert!(!r.passed);
        assert_eq!(r.witness, Some((State::new(4, 2), State::new(5, 2))));
        assert!((r.worst_violation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn injected_bump_breaks_battery_monotonicity() {
        let m = params();
        let mut v = ValueTable::from_fn(&m, |s| -(s.battery as f64));
        v.set(State::new(7, 3), 0.5);
        let r = check_monotone_battery(&v, &m);
        assert!(!r.passed);
        assert_eq!(r.witness, Some((State::new(7, 2), State::new(7, 3))));
    }

    #[test]
    fn linear_aoi_table_meets_increment_bounds_exactly() {
        let m = params();
        let v = ValueTable::from_fn(&m, |s| s.aoi as f64);
        let inc = check_increment_aoi(&v, &m);
        assert!(inc.passed);
        assert_eq!(inc.worst_violation, 0.0);
        assert!(check_increment_mixed(&v, &m).passed);
    }

    #[test]
    fn zero_table_is_submodular_at_equality_for_charged_rows() {
        let m = params();
        let r = check_submodular(&ValueTable::zeros(&m), &m);
        assert!(r.passed);
        assert_eq!(r.worst_violation, 0.0);
    }

    #[test]
    fn reports_are_deterministic() {
        let m = params();
        let v = ValueTable::from_fn(&m, |s| ((s.aoi * 31 + s.battery * 17) % 7) as f64);
        assert_eq!(run_all(&v, &m), run_all(&v, &m));
    }
}
