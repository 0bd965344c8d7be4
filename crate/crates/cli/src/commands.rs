//! Subcommand implementations. Each writes its CSV files under `cfg.out`
//! and returns the text destined for stdout plus any warnings for stderr.

use std::path::PathBuf;

use ehaoi::evaluator::{evaluate_periodic_exact, Method};
use ehaoi::{
    evaluate_exact, extract_thresholds, modified_via, simulate, verify, EvalReport, ModelParams,
    PolicyKind, SolveResult, ThresholdPolicy,
};
use rayon::prelude::*;

use crate::config::{PolicyChoice, RunConfig, Sweep};
use crate::csv::{field, real, Table};
use crate::error::{CliError, Result};

#[derive(Debug, Default)]
pub struct Outcome {
    pub summary: String,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

pub const THRESHOLDS_CSV: &str = "thresholds.csv";
pub const POLICY_GRID_CSV: &str = "policy_grid.csv";
pub const SIMULATE_CSV: &str = "simulate.csv";
pub const COMPARE_CSV: &str = "compare.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const VERIFY_CSV: &str = "verify.csv";

fn solve(params: &ModelParams, cfg: &RunConfig) -> Result<(SolveResult, ThresholdPolicy)> {
    Ok(modified_via(params, &cfg.solver)?)
}

/// Exact evaluation for any policy kind, routing periodic policies through
/// the cycle evaluator.
pub fn exact_report(kind: &PolicyKind, m: &ModelParams) -> ehaoi::Result<EvalReport> {
    match kind {
        PolicyKind::Periodic {
            period,
            skip_on_empty,
        } => evaluate_periodic_exact(*period, *skip_on_empty, m),
        _ => evaluate_exact(kind, m),
    }
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<Outcome> {
    let m = &cfg.params;
    let (result, tp) = solve(m, cfg)?;

    let mut thresholds = Table::new(&["q", "threshold"]);
    for (q, t) in tp.thresholds.iter().enumerate() {
        thresholds.row([q.to_string(), t.to_string()]);
    }
    let mut grid = Table::new(&["delta", "q", "action"]);
    for q in 0..=m.battery_cap {
        for d in 1..=m.delta_max {
            let a = result.policy.action(ehaoi::State::new(d, q));
            grid.row([d.to_string(), q.to_string(), a.as_u8().to_string()]);
        }
    }
    let files = vec![
        thresholds.write(&cfg.out, THRESHOLDS_CSV)?,
        grid.write(&cfg.out, POLICY_GRID_CSV)?,
    ];
    Ok(Outcome {
        summary: format!(
            "gain={} iterations={} span_residual={:e} argmin_evaluations={}",
            real(result.gain),
            result.iterations,
            result.span_residual,
            result.argmin_evaluations
        ),
        warnings: result.warnings,
        files,
    })
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let m = &cfg.params;
    let mut warnings = Vec::new();
    let optimal = if cfg.policy == PolicyChoice::Optimal {
        let (r, tp) = solve(m, cfg)?;
        warnings.extend(r.warnings);
        Some(tp)
    } else {
        None
    };
    let kind = cfg.kind_for(cfg.policy, optimal.as_ref());
    let reports: Vec<EvalReport> = cfg
        .seeds
        .par_iter()
        .map(|&seed| simulate(&kind, m, cfg.horizon, seed))
        .collect::<ehaoi::Result<_>>()?;
    let exact = exact_report(&kind, m)?;

    let mut t = Table::new(&[
        "policy",
        "seed",
        "horizon",
        "average_cost",
        "average_aoi",
        "reliable_rate",
        "ci_halfwidth",
        "generator",
    ]);
    for r in &reports {
        t.row([
            r.policy.clone(),
            r.seed.unwrap_or_default().to_string(),
            r.horizon.unwrap_or_default().to_string(),
            real(r.average_cost),
            real(r.average_aoi),
            real(r.reliable_energy_rate),
            real(r.ci_halfwidth.unwrap_or(f64::NAN)),
            field(r.generator.as_deref().unwrap_or("")),
        ]);
    }
    let mean = reports.iter().map(|r| r.average_cost).sum::<f64>() / reports.len() as f64;
    Ok(Outcome {
        summary: format!(
            "policy={} seeds={} mean_simulated_cost={} exact_cost={}",
            kind.name(),
            reports.len(),
            real(mean),
            real(exact.average_cost)
        ),
        warnings,
        files: vec![t.write(&cfg.out, SIMULATE_CSV)?],
    })
}

fn require_sweep(cfg: &RunConfig) -> Result<&Sweep> {
    cfg.sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs --axis and --grid".into()))
}

struct CompareRow {
    policy: String,
    report: std::result::Result<EvalReport, String>,
}

fn compare_point(cfg: &RunConfig, m: &ModelParams) -> (Vec<CompareRow>, Vec<String>) {
    let baselines = [PolicyChoice::Optimal, PolicyChoice::ZeroWait, PolicyChoice::Periodic];
    let names = |tp: Option<&ThresholdPolicy>| -> Vec<String> {
        baselines
            .iter()
            .map(|&c| match (c, tp) {
                (PolicyChoice::Optimal, None) => "optimal".to_string(),
                _ => cfg.kind_for(c, tp).name(),
            })
            .collect()
    };
    let (solved, warnings) = match solve(m, cfg) {
        Ok((r, tp)) => (Ok(tp), r.warnings),
        Err(e) => (Err(e.to_string()), Vec::new()),
    };
    let tp = match solved {
        Ok(tp) => tp,
        Err(msg) => {
            let rows = names(None)
                .into_iter()
                .map(|policy| CompareRow {
                    policy,
                    report: Err(msg.clone()),
                })
                .collect();
            return (rows, warnings);
        }
    };

    let mut rows = Vec::new();
    for &choice in &baselines {
        let kind = cfg.kind_for(choice, Some(&tp));
        rows.push(CompareRow {
            policy: kind.name(),
            report: exact_report(&kind, m).map_err(|e| e.to_string()),
        });
        if cfg.with_simulation {
            for &seed in &cfg.seeds {
                rows.push(CompareRow {
                    policy: kind.name(),
                    report: simulate(&kind, m, cfg.horizon, seed).map_err(|e| e.to_string()),
                });
            }
        }
    }
    (rows, warnings)
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<Outcome> {
    let sweep = require_sweep(cfg)?;
    let points: Vec<(f64, Vec<CompareRow>, Vec<String>)> = sweep
        .grid
        .par_iter()
        .map(|&value| {
            let (rows, warnings) = match sweep.axis.apply(&cfg.params, value) {
                Ok(m) => compare_point(cfg, &m),
                Err(e) => (
                    vec![CompareRow {
                        policy: "all".into(),
                        report: Err(e.to_string()),
                    }],
                    Vec::new(),
                ),
            };
            (value, rows, warnings)
        })
        .collect();

    let mut t = Table::new(&[
        "axis_value",
        "policy",
        "average_cost",
        "average_aoi",
        "reliable_rate",
        "method",
        "ci_halfwidth",
        "status",
    ]);
    let mut failures = 0;
    let mut warnings = Vec::new();
    for (value, rows, w) in &points {
        warnings.extend(w.iter().map(|w| format!("{}={}: {w}", sweep.axis.name(), real(*value))));
        for row in rows {
            match &row.report {
                Ok(r) => {
                    let method = match (r.method, r.seed) {
                        (Method::Exact, _) => "exact".to_string(),
                        (Method::Simulation, Some(seed)) => format!("sim-{seed}"),
                        (Method::Simulation, None) => "sim".to_string(),
                    };
                    t.row([
                        real(*value),
                        row.policy.clone(),
                        real(r.average_cost),
                        real(r.average_aoi),
                        real(r.reliable_energy_rate),
                        method,
                        r.ci_halfwidth.map(real).unwrap_or_default(),
                        "ok".to_string(),
                    ]);
                }
                Err(msg) => {
                    failures += 1;
                    t.row([
                        real(*value),
                        row.policy.clone(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        field(&format!("error: {msg}")),
                    ]);
                }
            }
        }
    }
    let path = t.write(&cfg.out, COMPARE_CSV)?;
    if failures > 0 {
        return Err(CliError::PartialFailure(failures));
    }
    Ok(Outcome {
        summary: format!(
            "compare axis={} points={} rows={}",
            sweep.axis.name(),
            sweep.grid.len(),
            points.iter().map(|p| p.1.len()).sum::<usize>()
        ),
        warnings,
        files: vec![path],
    })
}

type PointSolve = std::result::Result<(SolveResult, ThresholdPolicy), String>;

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let sweep = require_sweep(cfg)?;
    let solved: Vec<(f64, PointSolve)> = sweep
        .grid
        .par_iter()
        .map(|&value| {
            let r = sweep
                .axis
                .apply(&cfg.params, value)
                .and_then(|m| modified_via(&m, &cfg.solver))
                .map_err(|e| e.to_string());
            (value, r)
        })
        .collect();

    let mut t = Table::new(&[
        "axis_value",
        "gain",
        "iterations",
        "span_residual",
        "thresholds",
        "status",
    ]);
    let mut failures = 0;
    let mut warnings = Vec::new();
    for (value, r) in &solved {
        match r {
            Ok((res, tp)) => {
                warnings.extend(res.warnings.iter().map(|w| format!("{}={}: {w}", sweep.axis.name(), real(*value))));
                let thresholds: Vec<String> = tp.thresholds.iter().map(u32::to_string).collect();
                t.row([
                    real(*value),
                    real(res.gain),
                    res.iterations.to_string(),
                    real(res.span_residual),
                    thresholds.join(";"),
                    "ok".to_string(),
                ]);
            }
            Err(msg) => {
                failures += 1;
                t.row([
                    real(*value),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    field(&format!("error: {msg}")),
                ]);
            }
        }
    }
    let path = t.write(&cfg.out, SWEEP_CSV)?;
    if failures > 0 {
        return Err(CliError::PartialFailure(failures));
    }
    Ok(Outcome {
        summary: format!("sweep axis={} points={}", sweep.axis.name(), sweep.grid.len()),
        warnings,
        files: vec![path],
    })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let m = &cfg.params;
    let (result, _) = solve(m, cfg)?;
    let mut reports = verify::run_all(&result.values, m);
    let full = ehaoi::extract_policy(&result.values, m);
    let threshold_form = extract_thresholds(&full, m);

    let mut t = Table::new(&[
        "check",
        "passed",
        "worst_violation",
        "witness",
        "tolerance",
        "comparisons",
    ]);
    for r in &reports {
        t.row([
            r.check.to_string(),
            r.passed.to_string(),
            real(r.worst_violation),
            r.witness.map(|(a, b)| field(&format!("{a}->{b}"))).unwrap_or_default(),
            real(r.tolerance),
            r.comparisons.to_string(),
        ]);
    }
    let threshold_ok = threshold_form.is_ok();
    t.row([
        "threshold_form".to_string(),
        threshold_ok.to_string(),
        String::new(),
        threshold_form
            .as_ref()
            .err()
            .map(|e| field(&e.to_string()))
            .unwrap_or_default(),
        String::new(),
        m.num_states().to_string(),
    ]);
    let path = t.write(&cfg.out, VERIFY_CSV)?;

    let mut summary: Vec<String> = reports.iter().map(ToString::to_string).collect();
    summary.push(format!(
        "{:<20} {}",
        "threshold_form",
        match &threshold_form {
            Ok(_) => "pass".to_string(),
            Err(e) => format!("FAIL {e}"),
        }
    ));
    reports.retain(|r| !r.passed);
    let failed = reports.len() + usize::from(!threshold_ok);
    if failed > 0 {
        for line in &summary {
            eprintln!("{line}");
        }
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(Outcome {
        summary: summary.join("\n"),
        warnings: result.warnings,
        files: vec![path],
    })
}
