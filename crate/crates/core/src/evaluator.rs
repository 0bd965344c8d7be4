//! Long-run average cost of a policy, two ways: exactly from the stationary
//! distribution of the policy-induced chain on the truncated state space,
//! and by seeded simulation of the untruncated system.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cost_unchecked, Action, KernelTable, ModelParams, State};
use crate::policies::PolicyKind;

/// Initial state of every trajectory: fresh AoI, empty battery.
pub const INITIAL_STATE: State = State::new(1, 0);

/// Chains up to this many reachable states are solved by dense LU.
pub const DIRECT_SOLVE_LIMIT: usize = 1024;
/// L1 change between sweeps at which power iteration stops.
pub const POWER_TOLERANCE: f64 = 1e-13;
pub const POWER_MAX_SWEEPS: usize = 5_000_000;

pub const GENERATOR: &str = "ChaCha8Rng(seed_from_u64; stream 0 energy, stream 1 channel)";
pub const BATCHES: usize = 20;
/// Two-sided 95% Student-t quantile with BATCHES - 1 = 19 degrees of freedom.
const T_QUANTILE_95_DF19: f64 = 2.093_024_054_408_263;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Exact,
    Simulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: String,
    pub method: Method,
    pub average_cost: f64,
    pub average_aoi: f64,
    /// Transmissions powered by the reliable backup, per slot.
    pub reliable_energy_rate: f64,
    pub horizon: Option<u64>,
    pub seed: Option<u64>,
    pub ci_halfwidth: Option<f64>,
    pub generator: Option<String>,
}

/// One simulated slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    /// AoI here is untruncated.
    pub state: State,
    pub action: Action,
    pub energy_arrival: bool,
    pub channel_blocked: bool,
    pub cost: f64,
    pub next_state: State,
}

/// Stationary distribution over an explicit sparse chain.
struct SparseChain {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseChain {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn closed_classes(&self) -> usize {
        let mut g = DiGraph::<(), ()>::with_capacity(self.len(), self.len() * 4);
        let nodes: Vec<_> = (0..self.len()).map(|_| g.add_node(())).collect();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
        let sccs = tarjan_scc(&g);
        let mut comp = vec![0usize; self.len()];
        for (c, members) in sccs.iter().enumerate() {
            for n in members {
                comp[n.index()] = c;
            }
        }
        let mut leaks = vec![false; sccs.len()];
        for (i, row) in self.rows.iter().enumerate() {
            if row.iter().any(|&(j, _)| comp[j] != comp[i]) {
                leaks[comp[i]] = true;
            }
        }
        leaks.iter().filter(|l| !**l).count()
    }

    fn step(&self, mu: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let mass = mu[i];
            if mass != 0.0 {
                for &(j, p) in row {
                    out[j] += mass * p;
                }
            }
        }
    }

    fn stationary(&self) -> Result<Vec<f64>> {
        if self.len() <= DIRECT_SOLVE_LIMIT {
            self.stationary_direct()
        } else {
            self.stationary_power()
        }
    }

    /// Solves μ(P − I) = 0 with the last balance equation replaced by Σμ = 1.
    fn stationary_direct(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            a[(i, i)] -= 1.0;
            for &(j, p) in row {
                a[(j, i)] += p;
            }
        }
        for i in 0..n {
            a[(n - 1, i)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(n);
        b[n - 1] = 1.0;
        let x = a.lu().solve(&b).ok_or(Error::ReducibleChain(0))?;
        Ok(x.iter().map(|&v| v.max(0.0)).collect())
    }

    fn stationary_power(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut mu = vec![1.0 / n as f64; n];
        let mut next = vec![0.0; n];
        let mut residual = f64::INFINITY;
        for _ in 0..POWER_MAX_SWEEPS {
            self.step(&mu, &mut next);
            residual = mu.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut mu, &mut next);
            if residual <= POWER_TOLERANCE {
                return Ok(mu);
            }
        }
        Err(Error::StationaryNotConverged {
            iterations: POWER_MAX_SWEEPS,
            residual,
        })
    }
}

/// Breadth-first set of states reachable from `start` under `actions`.
fn reachable(kernel: &KernelTable, actions: &[Action], start: usize) -> Vec<usize> {
    let mut seen = vec![false; actions.len()];
    let mut order = Vec::new();
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &(j, _) in kernel.row(i, actions[i]) {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.sort_unstable();
    order
}

fn stationary_actions(kind: &PolicyKind, m: &ModelParams) -> Result<Vec<Action>> {
    match kind {
        PolicyKind::Periodic { .. } => Err(Error::NonStationaryPolicy(kind.name())),
        PolicyKind::Explicit(p) if !p.matches(m) => Err(Error::ShapeMismatch),
        PolicyKind::Optimal(tp)
            if tp.thresholds.len() != m.battery_cap as usize + 1 || tp.delta_max != m.delta_max =>
        {
            Err(Error::ShapeMismatch)
        }
        _ => Ok((0..m.num_states()).map(|i| kind.decide(m.state_at(i), 0)).collect()),
    }
}

/// Exact long-run average cost of a stationary policy started from (1, 0).
///
/// The stationary distribution is taken over the states reachable from the
/// initial state; more than one closed class there is reported as an error.
pub fn evaluate_exact(kind: &PolicyKind, m: &ModelParams) -> Result<EvalReport> {
    m.validate()?;
    let actions = stationary_actions(kind, m)?;
    let kernel = KernelTable::build(m);
    let support = reachable(&kernel, &actions, m.index(INITIAL_STATE));

    let mut local = vec![usize::MAX; m.num_states()];
    for (k, &i) in support.iter().enumerate() {
        local[i] = k;
    }
    let chain = SparseChain {
        rows: support
            .iter()
            .map(|&i| kernel.row(i, actions[i]).iter().map(|&(j, p)| (local[j], p)).collect())
            .collect(),
    };
    let closed = chain.closed_classes();
    if closed != 1 {
        return Err(Error::ReducibleChain(closed));
    }
    let mu = chain.stationary()?;

    let mut acc = Accumulator::default();
    for (k, &i) in support.iter().enumerate() {
        acc.add(mu[k], m.state_at(i), actions[i], m);
    }
    Ok(acc.report(kind.name()))
}

/// Exact long-run average cost of `Periodic { period, skip_on_empty }`
/// started from (1, 0) at slot 0.
///
/// Runs the period-`T` cycle map to its fixed point and averages the
/// per-phase expected costs over one cycle.
pub fn evaluate_periodic_exact(period: u32, skip_on_empty: bool, m: &ModelParams) -> Result<EvalReport> {
    m.validate()?;
    if period == 0 {
        return Err(Error::InvalidParameter {
            name: "period",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let kind = PolicyKind::Periodic {
        period,
        skip_on_empty,
    };
    let kernel = KernelTable::build(m);
    let n = m.num_states();
    let phase_actions: Vec<Vec<Action>> = (0..period.min(2))
        .map(|phase| (0..n).map(|i| kind.decide(m.state_at(i), phase as u64)).collect())
        .collect();
    let actions_at = |phase: u32| &phase_actions[usize::from(phase != 0)];
    let chain_for = |phase: u32| SparseChain {
        rows: (0..n).map(|i| kernel.row(i, actions_at(phase)[i]).to_vec()).collect(),
    };
    let phases: Vec<SparseChain> = (0..period.min(2)).map(chain_for).collect();
    let chain_at = |phase: u32| &phases[usize::from(phase != 0)];

    let mut mu = vec![0.0; n];
    mu[m.index(INITIAL_STATE)] = 1.0;
    let mut next = vec![0.0; n];
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut cycles = 0;
    while cycles < POWER_MAX_SWEEPS {
        let start = mu.clone();
        for phase in 0..period {
            chain_at(phase).step(&mu, &mut next);
            std::mem::swap(&mut mu, &mut next);
        }
        cycles += 1;
        residual = start.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
        if residual <= POWER_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::StationaryNotConverged {
            iterations: cycles,
            residual,
        });
    }

    let mut acc = Accumulator::default();
    for phase in 0..period {
        let actions = actions_at(phase);
        for (i, &w) in mu.iter().enumerate() {
            acc.add(w / period as f64, m.state_at(i), actions[i], m);
        }
        chain_at(phase).step(&mu, &mut next);
        std::mem::swap(&mut mu, &mut next);
    }
    Ok(acc.report(kind.name()))
}

#[derive(Default)]
struct Accumulator {
    cost: f64,
    aoi: f64,
    paid: f64,
}

impl Accumulator {
    fn add(&mut self, weight: f64, s: State, a: Action, m: &ModelParams) {
        if weight == 0.0 {
            return;
        }
        self.cost += weight * cost_unchecked(s, a, m);
        self.aoi += weight * s.aoi as f64;
        if a.is_transmit() && s.battery == 0 {
            self.paid += weight;
        }
    }

    fn report(self, policy: String) -> EvalReport {
        EvalReport {
            policy,
            method: Method::Exact,
            average_cost: self.cost,
            average_aoi: self.aoi,
            reliable_energy_rate: self.paid,
            horizon: None,
            seed: None,
            ci_halfwidth: None,
            generator: None,
        }
    }
}

/// Slot-by-slot simulator of the physical system (AoI not truncated).
#[derive(Debug, Clone)]
pub struct Simulator {
    params: ModelParams,
    energy: ChaCha8Rng,
    channel: ChaCha8Rng,
    t: u64,
    state: State,
}

impl Simulator {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        let mut energy = ChaCha8Rng::seed_from_u64(seed);
        energy.set_stream(0);
        let mut channel = ChaCha8Rng::seed_from_u64(seed);
        channel.set_stream(1);
        Self {
            params,
            energy,
            channel,
            t: 0,
            state: INITIAL_STATE,
        }
    }

    pub fn state(&self) -> State {
        self.state
    }

    pub fn slot(&self) -> u64 {
        self.t
    }

    /// Overrides the current state; the slot counter is left alone.
    pub fn set_state(&mut self, s: State) {
        self.state = s;
    }

    pub fn step(&mut self, action: Action) -> StepRecord {
        let m = &self.params;
        let s = self.state;
        let energy_arrival = self.energy.random_bool(m.lambda_e);
        let channel_blocked = self.channel.random_bool(m.p_block);

        let aoi = if action.is_transmit() && !channel_blocked {
            1
        } else {
            s.aoi.saturating_add(1)
        };
        let spent = u32::from(action.is_transmit() && s.battery > 0);
        let battery = (s.battery + u32::from(energy_arrival) - spent).min(m.battery_cap);
        let next_state = State::new(aoi, battery);

        let record = StepRecord {
            t: self.t,
            state: s,
            action,
            energy_arrival,
            channel_blocked,
            cost: cost_unchecked(s, action, m),
            next_state,
        };
        self.state = next_state;
        self.t += 1;
        record
    }
}

/// Monte Carlo time averages over `horizon` slots from (1, 0), with a 95%
/// batch-means half-width over [`BATCHES`] equal batches.
pub fn simulate(kind: &PolicyKind, m: &ModelParams, horizon: u64, seed: u64) -> Result<EvalReport> {
    m.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let penalty = m.reliable_penalty();
    let batch_len = horizon / BATCHES as u64;
    let mut sim = Simulator::new(*m, seed);

    let mut aoi_sum: u64 = 0;
    let mut paid: u64 = 0;
    let mut batch_means = Vec::with_capacity(BATCHES);
    let (mut batch_aoi, mut batch_paid) = (0u64, 0u64);

    for t in 0..horizon {
        let action = kind.decide(sim.state(), t);
        let rec = sim.step(action);
        let is_paid = u64::from(action.is_transmit() && rec.state.battery == 0);
        aoi_sum += u64::from(rec.state.aoi);
        paid += is_paid;
        if batch_len > 0 && batch_means.len() < BATCHES {
            batch_aoi += u64::from(rec.state.aoi);
            batch_paid += is_paid;
            if (t + 1) % batch_len == 0 {
                batch_means.push((batch_aoi as f64 + penalty * batch_paid as f64) / batch_len as f64);
                batch_aoi = 0;
                batch_paid = 0;
            }
        }
    }

    let average_aoi = aoi_sum as f64 / horizon as f64;
    let reliable_energy_rate = paid as f64 / horizon as f64;
    let ci_halfwidth = if batch_means.len() == BATCHES {
        let k = BATCHES as f64;
        let mean = batch_means.iter().sum::<f64>() / k;
        let var = batch_means.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (k - 1.0);
        T_QUANTILE_95_DF19 * (var / k).sqrt()
    } else {
        f64::INFINITY
    };

    Ok(EvalReport {
        policy: kind.name(),
        method: Method::Simulation,
        average_cost: average_aoi + penalty * reliable_energy_rate,
        average_aoi,
        reliable_energy_rate,
        horizon: Some(horizon),
        seed: Some(seed),
        ci_halfwidth: Some(ci_halfwidth),
        generator: Some(GENERATOR.to_string()),
    })
}
