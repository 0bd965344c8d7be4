//! Run configuration: a TOML file merged with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ehaoi::{ModelParams, PolicyKind, SolverOptions, ThresholdPolicy};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyChoice {
    Optimal,
    ZeroWait,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    #[value(name = "weight")]
    Weight,
    #[value(name = "lambda_e")]
    LambdaE,
    #[value(name = "p_block")]
    PBlock,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Weight => "weight",
            Axis::LambdaE => "lambda_e",
            Axis::PBlock => "p_block",
        }
    }

    /// Copy of `base` with this axis set to `value`, validated.
    pub fn apply(self, base: &ModelParams, value: f64) -> ehaoi::Result<ModelParams> {
        let mut m = *base;
        match self {
            Axis::Weight => m.weight = value,
            Axis::LambdaE => m.lambda_e = value,
            Axis::PBlock => m.p_block = value,
        }
        m.validate()?;
        Ok(m)
    }
}

/// Keys accepted in a config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub lambda_e: Option<f64>,
    pub p_block: Option<f64>,
    pub battery_cap: Option<u32>,
    pub cost_reliable: Option<f64>,
    pub weight: Option<f64>,
    pub delta_max: Option<u32>,
    pub eps: Option<f64>,
    pub max_iter: Option<usize>,
    pub policy: Option<PolicyChoice>,
    pub period: Option<u32>,
    pub periodic_skip_on_empty: Option<bool>,
    pub horizon: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub axis: Option<Axis>,
    pub grid: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub with_simulation: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Flags shared by every subcommand; any flag given wins over the file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lambda_e: Option<f64>,
    #[arg(long)]
    pub p_block: Option<f64>,
    #[arg(long)]
    pub battery_cap: Option<u32>,
    #[arg(long)]
    pub cost_reliable: Option<f64>,
    #[arg(long)]
    pub weight: Option<f64>,
    #[arg(long)]
    pub delta_max: Option<u32>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyChoice>,
    #[arg(long)]
    pub period: Option<u32>,
    /// Periodic baseline idles instead of paying when the battery is empty
    #[arg(long)]
    pub periodic_skip_on_empty: Option<bool>,
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Simulation seed; repeat for several replications
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum)]
    pub axis: Option<Axis>,
    /// Comma-separated sweep values
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Output directory for CSV files
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also simulate each policy in `compare`
    #[arg(long)]
    pub with_simulation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: Axis,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub solver: SolverOptions,
    pub policy: PolicyChoice,
    pub period: u32,
    pub periodic_skip_on_empty: bool,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub sweep: Option<Sweep>,
    pub out: PathBuf,
    pub with_simulation: bool,
}

pub const DEFAULT_HORIZON: u64 = 1_000_000;
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const DEFAULT_PERIOD: u32 = 5;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::reference(),
            solver: SolverOptions::default(),
            policy: PolicyChoice::Optimal,
            period: DEFAULT_PERIOD,
            periodic_skip_on_empty: false,
            horizon: DEFAULT_HORIZON,
            seeds: DEFAULT_SEEDS.to_vec(),
            sweep: None,
            out: PathBuf::from("out"),
            with_simulation: false,
        }
    }
}

impl RunConfig {
    pub fn from_overrides(o: &Overrides) -> Result<Self> {
        let file = match &o.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Self::resolve(&file, o)
    }

    pub fn resolve(file: &FileConfig, o: &Overrides) -> Result<Self> {
        let d = RunConfig::default();
        let pick = |flag: Option<f64>, key: Option<f64>, default: f64| flag.or(key).unwrap_or(default);
        let params = ModelParams::new(
            pick(o.lambda_e, file.lambda_e, d.params.lambda_e),
            pick(o.p_block, file.p_block, d.params.p_block),
            o.battery_cap.or(file.battery_cap).unwrap_or(d.params.battery_cap),
            pick(o.cost_reliable, file.cost_reliable, d.params.cost_reliable),
            pick(o.weight, file.weight, d.params.weight),
            o.delta_max.or(file.delta_max).unwrap_or(d.params.delta_max),
        )?;
        let solver = SolverOptions::new(
            pick(o.eps, file.eps, d.solver.eps),
            o.max_iter.or(file.max_iter).unwrap_or(d.solver.max_iter),
        );
        if !(solver.eps > 0.0) || solver.max_iter == 0 {
            return Err(CliError::Config("eps must be positive and max_iter at least 1".into()));
        }
        let period = o.period.or(file.period).unwrap_or(d.period);
        if period == 0 {
            return Err(CliError::Config("period must be at least 1".into()));
        }
        let horizon = o.horizon.or(file.horizon).unwrap_or(d.horizon);
        if horizon == 0 {
            return Err(CliError::Config("horizon must be at least 1".into()));
        }
        let seeds = if !o.seeds.is_empty() {
            o.seeds.clone()
        } else {
            file.seeds.clone().unwrap_or(d.seeds)
        };
        if seeds.is_empty() {
            return Err(CliError::Config("at least one seed is required".into()));
        }

        let axis = o.axis.or(file.axis);
        let grid = o.grid.clone().or_else(|| file.grid.clone());
        let sweep = match (axis, grid) {
            (Some(axis), Some(grid)) => {
                if grid.is_empty() {
                    return Err(CliError::Config("sweep grid is empty".into()));
                }
                for &g in &grid {
                    axis.apply(&params, g)?;
                }
                Some(Sweep { axis, grid })
            }
            (None, None) => None,
            _ => return Err(CliError::Config("axis and grid must be given together".into())),
        };

        Ok(Self {
            params,
            solver,
            policy: o.policy.or(file.policy).unwrap_or(d.policy),
            period,
            periodic_skip_on_empty: o
                .periodic_skip_on_empty
                .or(file.periodic_skip_on_empty)
                .unwrap_or(d.periodic_skip_on_empty),
            horizon,
            seeds,
            sweep,
            out: o.out.clone().or_else(|| file.out.clone()).unwrap_or(d.out),
            with_simulation: o.with_simulation || file.with_simulation.unwrap_or(false),
        })
    }

    pub fn periodic_kind(&self) -> PolicyKind {
        PolicyKind::Periodic {
            period: self.period,
            skip_on_empty: self.periodic_skip_on_empty,
        }
    }

    pub fn kind_for(&self, choice: PolicyChoice, optimal: Option<&ThresholdPolicy>) -> PolicyKind {
        match choice {
            PolicyChoice::Optimal => {
                PolicyKind::Optimal(optimal.expect("optimal policy requires a solve").clone())
            }
            PolicyChoice::ZeroWait => PolicyKind::ZeroWait,
            PolicyChoice::Periodic => self.periodic_kind(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str(
            "lambda_e = 0.3\nweight = 2.0\naxis = \"p_block\"\ngrid = [0.2, 0.4]\nseeds = [9]\n",
        )
        .unwrap();
        let o = Overrides {
            weight: Some(5.0),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&file, &o).unwrap();
        assert_eq!(cfg.params.lambda_e, 0.3);
        assert_eq!(cfg.params.weight, 5.0);
        assert_eq!(cfg.seeds, vec![9]);
        assert_eq!(
            cfg.sweep,
            Some(Sweep {
                axis: Axis::PBlock,
                grid: vec![0.2, 0.4]
            })
        );
    }

    #[test]
    fn defaults_are_reference_point() {
        let cfg = RunConfig::resolve(&FileConfig::default(), &Overrides::default()).unwrap();
        assert_eq!(cfg.params, ModelParams::reference());
        assert_eq!(cfg.seeds.len(), 5);
        assert_eq!(cfg.period, 5);
        assert!(!cfg.periodic_skip_on_empty);
    }

    #[test]
    fn invalid_values_rejected() {
        let o = Overrides {
            p_block: Some(1.0),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&FileConfig::default(), &o).is_err());
        let o = Overrides {
            axis: Some(Axis::LambdaE),
            grid: Some(vec![0.5, 1.5]),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&FileConfig::default(), &o).is_err());
        let o = Overrides {
            axis: Some(Axis::LambdaE),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&FileConfig::default(), &o).is_err());
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }
}
