//! Relative value iteration for the average-cost Bellman equation, greedy
//! policy extraction and the threshold-exploiting extraction scan.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cost_unchecked, transition_unchecked, Action, KernelTable, ModelParams, State};

/// Dense per-state table of relative values, in `enumerate_states` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    values: Vec<f64>,
    delta_max: u32,
    battery_cap: u32,
}

impl ValueTable {
    pub fn zeros(m: &ModelParams) -> Self {
        Self::from_fn(m, |_| 0.0)
    }

    pub fn from_fn(m: &ModelParams, mut f: impl FnMut(State) -> f64) -> Self {
        let values = (0..m.num_states()).map(|i| f(m.state_at(i))).collect();
        Self {
            values,
            delta_max: m.delta_max,
            battery_cap: m.battery_cap,
        }
    }

    pub fn from_vec(m: &ModelParams, values: Vec<f64>) -> Result<Self> {
        if values.len() != m.num_states() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch);
        }
        Ok(Self {
            values,
            delta_max: m.delta_max,
            battery_cap: m.battery_cap,
        })
    }

    #[inline]
    pub fn get(&self, s: State) -> f64 {
        self.values[self.position(s)]
    }

    pub fn set(&mut self, s: State, value: f64) {
        let i = self.position(s);
        self.values[i] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn matches(&self, m: &ModelParams) -> bool {
        self.delta_max == m.delta_max && self.battery_cap == m.battery_cap
    }

    #[inline]
    fn position(&self, s: State) -> usize {
        assert!(
            s.aoi >= 1 && s.aoi <= self.delta_max && s.battery <= self.battery_cap,
            "state {s} outside value table"
        );
        s.battery as usize * self.delta_max as usize + (s.aoi as usize - 1)
    }
}

/// Deterministic stationary policy stored densely over the truncated states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    actions: Vec<Action>,
    delta_max: u32,
    battery_cap: u32,
}

impl Policy {
    pub fn from_fn(m: &ModelParams, mut f: impl FnMut(State) -> Action) -> Self {
        let actions = (0..m.num_states()).map(|i| f(m.state_at(i))).collect();
        Self {
            actions,
            delta_max: m.delta_max,
            battery_cap: m.battery_cap,
        }
    }

    pub fn constant(m: &ModelParams, a: Action) -> Self {
        Self::from_fn(m, |_| a)
    }

    /// Action at `s`. AoI beyond the truncation reads the saturated row entry.
    #[inline]
    pub fn action(&self, s: State) -> Action {
        let aoi = s.aoi.clamp(1, self.delta_max);
        assert!(s.battery <= self.battery_cap, "battery {} above capacity", s.battery);
        self.actions[s.battery as usize * self.delta_max as usize + (aoi as usize - 1)]
    }

    pub fn as_slice(&self) -> &[Action] {
        &self.actions
    }

    pub fn delta_max(&self) -> u32 {
        self.delta_max
    }

    pub fn battery_cap(&self) -> u32 {
        self.battery_cap
    }

    pub fn matches(&self, m: &ModelParams) -> bool {
        self.delta_max == m.delta_max && self.battery_cap == m.battery_cap
    }
}

/// Per-battery-level AoI thresholds: transmit iff `aoi >= thresholds[q]`.
///
/// `delta_max + 1` means the row never transmits inside the truncation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub thresholds: Vec<u32>,
    pub delta_max: u32,
}

impl ThresholdPolicy {
    pub fn uniform(m: &ModelParams, threshold: u32) -> Self {
        Self {
            thresholds: vec![threshold; m.battery_cap as usize + 1],
            delta_max: m.delta_max,
        }
    }

    pub fn never(&self) -> u32 {
        self.delta_max + 1
    }

    #[inline]
    pub fn decide(&self, s: State) -> Action {
        Action::from(s.aoi >= self.thresholds[s.battery as usize])
    }

    pub fn expand(&self, m: &ModelParams) -> Policy {
        Policy::from_fn(m, |s| self.decide(s))
    }

    /// Warning text when some threshold lies above half the truncation bound,
    /// where saturation may be distorting the solution.
    pub fn truncation_warning(&self) -> Option<String> {
        let limit = self.delta_max / 2;
        let offending: Vec<String> = self
            .thresholds
            .iter()
            .enumerate()
            .filter(|&(_, &t)| t > limit)
            .map(|(q, &t)| {
                if t == self.never() {
                    format!("q={q}: never")
                } else {
                    format!("q={q}: {t}")
                }
            })
            .collect();
        if offending.is_empty() {
            None
        } else {
            Some(format!(
                "thresholds exceed delta_max/2 = {limit} ({}); increase delta_max",
                offending.join(", ")
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stopping tolerance on the span of successive value differences.
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps: 1e-9,
            max_iter: 100_000,
        }
    }
}

impl SolverOptions {
    pub fn new(eps: f64, max_iter: usize) -> Self {
        Self { eps, max_iter }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "eps",
                value: self.eps,
                reason: "must be finite and positive",
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Optimal long-run average cost per slot.
    pub gain: f64,
    /// Relative values, pinned to zero at (1, battery_cap).
    pub values: ValueTable,
    pub policy: Policy,
    pub iterations: usize,
    pub span_residual: f64,
    /// Span residual after every sweep.
    pub residual_history: Vec<f64>,
    /// Number of per-state argmin comparisons made while extracting `policy`.
    pub argmin_evaluations: usize,
    pub warnings: Vec<String>,
}

/// Q(s, a) = C(s, a) + Σ Pr(s' | s, a) v(s').
pub fn q_value(v: &ValueTable, s: State, a: Action, m: &ModelParams) -> f64 {
    let continuation: f64 = transition_unchecked(s, a, m)
        .iter()
        .map(|&(t, p)| p * v.get(t))
        .sum();
    cost_unchecked(s, a, m) + continuation
}

#[inline]
fn greedy(v: &ValueTable, s: State, m: &ModelParams) -> Action {
    let idle = q_value(v, s, Action::Idle, m);
    let transmit = q_value(v, s, Action::Transmit, m);
    // Ties go to idling.
    Action::from(transmit < idle)
}

/// Greedy policy with respect to `v`; ties resolve to idle.
pub fn extract_policy(v: &ValueTable, m: &ModelParams) -> Policy {
    Policy::from_fn(m, |s| greedy(v, s, m))
}

/// Compresses a policy into per-row thresholds, failing on the first row
/// that transmits at some AoI but idles at a larger one.
pub fn extract_thresholds(p: &Policy, m: &ModelParams) -> Result<ThresholdPolicy> {
    if !p.matches(m) {
        return Err(Error::ShapeMismatch);
    }
    let never = m.delta_max + 1;
    let mut thresholds = Vec::with_capacity(m.battery_cap as usize + 1);
    for q in 0..=m.battery_cap {
        let first = (1..=m.delta_max).find(|&d| p.action(State::new(d, q)).is_transmit());
        if let Some(start) = first {
            if let Some(idle_at) =
                (start + 1..=m.delta_max).find(|&d| !p.action(State::new(d, q)).is_transmit())
            {
                return Err(Error::NotThreshold {
                    battery: q,
                    transmit_at: start,
                    idle_at,
                });
            }
        }
        thresholds.push(first.unwrap_or(never));
    }
    Ok(ThresholdPolicy {
        thresholds,
        delta_max: m.delta_max,
    })
}

struct Converged {
    values: ValueTable,
    gain: f64,
    iterations: usize,
    span_residual: f64,
    residual_history: Vec<f64>,
}

/// Span-normalized value iteration from V₀ ≡ 0, relative to state (1, B).
fn iterate(m: &ModelParams, opts: &SolverOptions) -> Result<Converged> {
    m.validate()?;
    opts.validate()?;
    let kernel = KernelTable::build(m);
    let n = m.num_states();
    let costs: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let s = m.state_at(i);
            Action::ALL.map(|a| cost_unchecked(s, a, m))
        })
        .collect();
    let reference = m.index(State::new(1, m.battery_cap));

    let mut v = vec![0.0_f64; n];
    let mut backup = vec![0.0_f64; n];
    let mut history = Vec::new();
    let mut span = f64::INFINITY;

    for k in 1..=opts.max_iter {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut best = f64::INFINITY;
            for a in Action::ALL {
                let q = costs[i][a.as_u8() as usize]
                    + kernel.row(i, a).iter().map(|&(j, p)| p * v[j]).sum::<f64>();
                best = best.min(q);
            }
            backup[i] = best;
            let diff = best - v[i];
            lo = lo.min(diff);
            hi = hi.max(diff);
        }
        span = hi - lo;
        history.push(span);
        let offset = backup[reference];
        for (vi, &bi) in v.iter_mut().zip(&backup) {
            *vi = bi - offset;
        }
        if span <= opts.eps {
            return Ok(Converged {
                values: ValueTable::from_vec(m, v)?,
                gain: 0.5 * (hi + lo),
                iterations: k,
                span_residual: span,
                residual_history: history,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        residual: span,
    })
}

/// Solves the average-cost Bellman equation and returns the greedy policy
/// obtained by a full argmin over every state.
pub fn relative_value_iteration(m: &ModelParams, opts: &SolverOptions) -> Result<SolveResult> {
    let c = iterate(m, opts)?;
    let policy = extract_policy(&c.values, m);
    let warnings = extract_thresholds(&policy, m)
        .ok()
        .and_then(|tp| tp.truncation_warning())
        .into_iter()
        .collect();
    Ok(SolveResult {
        gain: c.gain,
        values: c.values,
        policy,
        iterations: c.iterations,
        span_residual: c.span_residual,
        residual_history: c.residual_history,
        argmin_evaluations: m.num_states(),
        warnings,
    })
}

/// Same iteration, then a per-row ascending AoI scan that stops evaluating
/// the argmin once a row first transmits and copies that action forward.
pub fn modified_via(m: &ModelParams, opts: &SolverOptions) -> Result<(SolveResult, ThresholdPolicy)> {
    let c = iterate(m, opts)?;
    let mut thresholds = vec![m.delta_max + 1; m.battery_cap as usize + 1];
    let mut evaluations = 0usize;
    for q in 0..=m.battery_cap {
        // Scan starts fresh per row: the predecessor of aoi=1 counts as idle.
        for d in 1..=m.delta_max {
            evaluations += 1;
            if greedy(&c.values, State::new(d, q), m).is_transmit() {
                thresholds[q as usize] = d;
                break;
            }
        }
    }
    let tp = ThresholdPolicy {
        thresholds,
        delta_max: m.delta_max,
    };
    let warnings = tp.truncation_warning().into_iter().collect();
    let result = SolveResult {
        gain: c.gain,
        policy: tp.expand(m),
        values: c.values,
        iterations: c.iterations,
        span_residual: c.span_residual,
        residual_history: c.residual_history,
        argmin_evaluations: evaluations,
        warnings,
    };
    Ok((result, tp))
}

/// One undiscounted Bellman backup of `v`, renormalized at (1, B).
pub fn bellman_backup(v: &ValueTable, m: &ModelParams) -> ValueTable {
    let raw = ValueTable::from_fn(m, |s| {
        Action::ALL
            .into_iter()
            .map(|a| q_value(v, s, a, m))
            .fold(f64::INFINITY, f64::min)
    });
    let offset = raw.get(State::new(1, m.battery_cap));
    ValueTable::from_fn(m, |s| raw.get(s) - offset)
}
