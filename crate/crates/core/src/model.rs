//! System model: parameters, states, the one-slot transition kernel and the
//! per-slot cost.
//!
//! The AoI coordinate is truncated at `delta_max` with saturating dynamics:
//! any successor that would age past `delta_max` stays at `delta_max`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities below this are dropped from a kernel row after coalescing.
pub const PROB_FLOOR: f64 = 1e-15;

/// Scalar parameters of the status-update system plus the AoI truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Per-slot probability that one energy packet is harvested.
    pub lambda_e: f64,
    /// Per-slot probability that the channel is blocked.
    pub p_block: f64,
    /// Battery capacity in energy packets.
    pub battery_cap: u32,
    /// Price of one update powered by the reliable backup.
    pub cost_reliable: f64,
    /// Weight of the reliable-energy price against AoI.
    pub weight: f64,
    /// Largest AoI kept in the truncated chain.
    pub delta_max: u32,
}

impl ModelParams {
    pub const DEFAULT_DELTA_MAX: u32 = 200;

    pub fn new(
        lambda_e: f64,
        p_block: f64,
        battery_cap: u32,
        cost_reliable: f64,
        weight: f64,
        delta_max: u32,
    ) -> Result<Self> {
        let m = Self {
            lambda_e,
            p_block,
            battery_cap,
            cost_reliable,
            weight,
            delta_max,
        };
        m.validate()?;
        Ok(m)
    }

    /// Operating point used throughout the numerical section: p=0.2, λ=0.5,
    /// ω=10, C_r=2, B=20, truncated at AoI 200.
    pub fn reference() -> Self {
        Self {
            lambda_e: 0.5,
            p_block: 0.2,
            battery_cap: 20,
            cost_reliable: 2.0,
            weight: 10.0,
            delta_max: Self::DEFAULT_DELTA_MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, value: f64, reason: &'static str) -> Result<()> {
            Err(Error::InvalidParameter {
                name,
                value,
                reason,
            })
        }
        if !(self.lambda_e > 0.0 && self.lambda_e <= 1.0) {
            return bad("lambda_e", self.lambda_e, "must lie in (0, 1]");
        }
        if !(self.p_block > 0.0 && self.p_block < 1.0) {
            return bad("p_block", self.p_block, "must lie in (0, 1)");
        }
        if self.battery_cap < 2 {
            return bad("battery_cap", self.battery_cap as f64, "must be at least 2");
        }
        if !(self.cost_reliable >= 0.0 && self.cost_reliable.is_finite()) {
            return bad("cost_reliable", self.cost_reliable, "must be finite and non-negative");
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return bad("weight", self.weight, "must be finite and positive");
        }
        if self.delta_max < 2 {
            return bad("delta_max", self.delta_max as f64, "must be at least 2");
        }
        Ok(())
    }

    /// Number of states in the truncated chain.
    pub fn num_states(&self) -> usize {
        self.delta_max as usize * (self.battery_cap as usize + 1)
    }

    /// Battery-major position of a state; the inverse of [`ModelParams::state_at`].
    #[inline]
    pub fn index(&self, s: State) -> usize {
        s.battery as usize * self.delta_max as usize + (s.aoi as usize - 1)
    }

    #[inline]
    pub fn state_at(&self, idx: usize) -> State {
        let dm = self.delta_max as usize;
        State {
            aoi: (idx % dm) as u32 + 1,
            battery: (idx / dm) as u32,
        }
    }

    pub fn contains(&self, s: State) -> bool {
        s.aoi >= 1 && s.aoi <= self.delta_max && s.battery <= self.battery_cap
    }

    pub fn check_state(&self, s: State) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(Error::InvalidState(s))
        }
    }

    /// Price charged for one slot in objective units: ω·C_r.
    #[inline]
    pub fn reliable_penalty(&self) -> f64 {
        self.weight * self.cost_reliable
    }
}

/// Destination AoI and stored energy packets at the start of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub aoi: u32,
    pub battery: u32,
}

impl State {
    pub const fn new(aoi: u32, battery: u32) -> Self {
        Self { aoi, battery }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.aoi, self.battery)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Action {
    #[default]
    Idle,
    Transmit,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Idle, Action::Transmit];

    pub fn as_u8(self) -> u8 {
        match self {
            Action::Idle => 0,
            Action::Transmit => 1,
        }
    }

    pub fn is_transmit(self) -> bool {
        self == Action::Transmit
    }
}

impl From<bool> for Action {
    fn from(transmit: bool) -> Self {
        if transmit {
            Action::Transmit
        } else {
            Action::Idle
        }
    }
}

/// Support of the one-step kernel from a fixed state-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDist {
    entries: Vec<(State, f64)>,
}

impl TransitionDist {
    fn from_raw(raw: &[(State, f64)]) -> Self {
        let mut entries: Vec<(State, f64)> = Vec::with_capacity(raw.len());
        for &(s, p) in raw {
            match entries.iter_mut().find(|(t, _)| *t == s) {
                Some((_, acc)) => *acc += p,
                None => entries.push((s, p)),
            }
        }
        entries.retain(|&(_, p)| p >= PROB_FLOOR);
        Self { entries }
    }

    pub fn entries(&self) -> &[(State, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prob(&self, s: State) -> f64 {
        self.entries
            .iter()
            .find(|(t, _)| *t == s)
            .map_or(0.0, |&(_, p)| p)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(State, f64)> {
        self.entries.iter()
    }
}

/// Exact one-slot kernel Pr(· | s, a) on the truncated chain.
pub fn transition(s: State, a: Action, m: &ModelParams) -> Result<TransitionDist> {
    m.check_state(s)?;
    Ok(transition_unchecked(s, a, m))
}

pub(crate) fn transition_unchecked(s: State, a: Action, m: &ModelParams) -> TransitionDist {
    let lam = m.lambda_e;
    let p = m.p_block;
    let aged = s.aoi.saturating_add(1).min(m.delta_max);
    let q = s.battery;
    let b = m.battery_cap;
    match a {
        Action::Idle if q < b => TransitionDist::from_raw(&[
            (State::new(aged, q + 1), lam),
            (State::new(aged, q), 1.0 - lam),
        ]),
        Action::Idle => TransitionDist::from_raw(&[(State::new(aged, b), 1.0)]),
        Action::Transmit => {
            // Empty battery: the backup powers the update and any harvested
            // packet is stored. Otherwise one stored packet is spent.
            let (with_arrival, without_arrival) = if q == 0 { (1, 0) } else { (q, q - 1) };
            TransitionDist::from_raw(&[
                (State::new(aged, with_arrival), p * lam),
                (State::new(1, with_arrival), (1.0 - p) * lam),
                (State::new(aged, without_arrival), p * (1.0 - lam)),
                (State::new(1, without_arrival), (1.0 - p) * (1.0 - lam)),
            ])
        }
    }
}

/// Per-slot cost Δ + ω·C_r·a·1(q = 0).
pub fn one_step_cost(s: State, a: Action, m: &ModelParams) -> Result<f64> {
    m.check_state(s)?;
    Ok(cost_unchecked(s, a, m))
}

#[inline]
pub(crate) fn cost_unchecked(s: State, a: Action, m: &ModelParams) -> f64 {
    let paid = a.is_transmit() && s.battery == 0;
    s.aoi as f64 + if paid { m.reliable_penalty() } else { 0.0 }
}

/// All states, battery-major then AoI ascending. Position `i` holds `m.state_at(i)`.
pub fn enumerate_states(m: &ModelParams) -> Vec<State> {
    (0..=m.battery_cap)
        .flat_map(|q| (1..=m.delta_max).map(move |d| State::new(d, q)))
        .collect()
}

/// Precomputed kernel for every state and action, indexed by state position.
///
/// Each row stores up to four `(successor index, probability)` pairs.
#[derive(Debug, Clone)]
pub struct KernelTable {
    rows: Vec<[Vec<(usize, f64)>; 2]>,
}

impl KernelTable {
    pub fn build(m: &ModelParams) -> Self {
        let rows = enumerate_states(m)
            .into_iter()
            .map(|s| {
                Action::ALL.map(|a| {
                    transition_unchecked(s, a, m)
                        .iter()
                        .map(|&(t, p)| (m.index(t), p))
                        .collect()
                })
            })
            .collect();
        Self { rows }
    }

    #[inline]
    pub fn row(&self, idx: usize, a: Action) -> &[(usize, f64)] {
        &self.rows[idx][a.as_u8() as usize]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}
