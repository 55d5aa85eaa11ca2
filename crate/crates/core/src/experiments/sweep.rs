//! Phase-diagram sweep over a grid of signal strengths.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{run_estimator, EstimatorKind, Init, LocalSearchConfig};
use crate::experiments::theory::theory_classify;
use crate::model::{sample_instance, ModelParams};
use crate::rng::derive_seed;

/// How a grid coordinate maps to a correlation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    /// `ρ² = x·log n / n` and `η² = y·log n / d`; cells with a squared
    /// correlation `≥ 1` are skipped.
    #[default]
    Raw,
    /// `ρ²/(1-ρ²) = x·log n / n` and `η²/(1-η²) = y·log n / d`; every cell is
    /// feasible. Matches the raw axes as the correlations go to zero.
    Snr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: usize,
    pub d: usize,
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub trials: usize,
    pub estimator: EstimatorKind,
    pub base_seed: u64,
    #[serde(default)]
    pub epsilon_lines: Vec<f64>,
    #[serde(default)]
    pub parametrization: Parametrization,
    /// Ball radius for the `ball` estimator.
    #[serde(default)]
    pub r: f64,
    /// Settings for the `local` estimator; the seed is re-derived per trial.
    #[serde(default)]
    pub local: Option<LocalSearchConfig>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.d < 1 {
            return Err(Error::Configuration("n and d must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Configuration("trials must be positive".into()));
        }
        if let Some(cap) = self.estimator.max_n() {
            if self.n > cap {
                return Err(Error::Configuration(format!(
                    "estimator {} requires n ≤ {cap} (enumeration cap n ≤ {cap}), got n = {}",
                    self.estimator.name(),
                    self.n
                )));
            }
        }
        for (axis, grid) in [("x_grid", &self.x_grid), ("y_grid", &self.y_grid)] {
            if grid.is_empty() {
                return Err(Error::Configuration(format!("{axis} is empty")));
            }
            if let Some(v) = grid.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(Error::Configuration(format!("{axis} contains {v}")));
            }
        }
        Ok(())
    }

    /// Correlation for a grid value on an axis of dimension `dim`, or `None`
    /// when the cell is infeasible.
    fn correlation(&self, value: f64, dim: usize) -> Option<f64> {
        let log_n = (self.n as f64).ln();
        let s = value * log_n / dim as f64;
        let sq = match self.parametrization {
            Parametrization::Raw => s,
            Parametrization::Snr => s / (1.0 + s),
        };
        (sq < 1.0).then(|| sq.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub x: f64,
    pub y: f64,
    pub rho: Option<f64>,
    pub eta: Option<f64>,
    pub exact_rate: f64,
    pub mean_overlap_fraction: f64,
    pub se_exact: f64,
    pub trials_run: usize,
    pub region: String,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// Row-major over `(x index, y index)`.
    pub cells: Vec<CellResult>,
}

pub const CSV_HEADER: &str =
    "x,y,rho,eta,n,d,trials,estimator,exact_rate,se_exact,mean_overlap,base_seed,region";

/// Runs every feasible cell; trials are independent and reduced in
/// `(x index, y index, trial)` order.
pub fn run_phase_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let local_default = config.local.clone().unwrap_or(LocalSearchConfig {
        init: Init::Feature,
        ..LocalSearchConfig::default()
    });

    struct Job {
        cell: usize,
        params: ModelParams,
        seed: u64,
    }
    let mut jobs = Vec::new();
    let mut cells = Vec::new();
    for (xi, &x) in config.x_grid.iter().enumerate() {
        for (yi, &y) in config.y_grid.iter().enumerate() {
            let rho = config.correlation(x, config.n);
            let eta = config.correlation(y, config.d);
            let region = theory_classify(x, y)?.region.label().to_string();
            let skipped = rho.is_none() || eta.is_none();
            if let (Some(rho), Some(eta)) = (rho, eta) {
                let params = ModelParams::new(config.n, config.d, rho, eta)?;
                for t in 0..config.trials {
                    jobs.push(Job {
                        cell: cells.len(),
                        params,
                        seed: derive_seed(config.base_seed, &[xi as u64, yi as u64, t as u64]),
                    });
                }
            }
            cells.push(CellResult {
                x,
                y,
                rho,
                eta,
                exact_rate: 0.0,
                mean_overlap_fraction: 0.0,
                se_exact: 0.0,
                trials_run: 0,
                region: if skipped { "infeasible".into() } else { region },
                skipped,
            });
        }
    }

    let outcomes: Vec<(usize, bool, f64)> = jobs
        .par_iter()
        .map(|job| -> Result<(usize, bool, f64)> {
            let inst = sample_instance(job.params, job.seed)?;
            let local = LocalSearchConfig {
                seed: derive_seed(job.seed, &[1]),
                ..local_default.clone()
            };
            let res = run_estimator(&inst, config.estimator, config.r, &local)?;
            Ok((job.cell, res.exact, res.overlap_fraction()))
        })
        .collect::<Result<_>>()?;

    let mut sums = vec![(0usize, 0usize, 0.0f64); cells.len()];
    for (cell, exact, frac) in outcomes {
        let s = &mut sums[cell];
        s.0 += 1;
        s.1 += usize::from(exact);
        s.2 += frac;
    }
    for (cell, (runs, exact, frac)) in cells.iter_mut().zip(sums) {
        if runs == 0 {
            continue;
        }
        let m = runs as f64;
        let rate = exact as f64 / m;
        cell.trials_run = runs;
        cell.exact_rate = rate;
        cell.mean_overlap_fraction = frac / m;
        cell.se_exact = (rate * (1.0 - rate) / m).sqrt();
    }
    Ok(SweepResult {
        config: config.clone(),
        cells,
    })
}

impl SweepResult {
    pub fn cell(&self, x: f64, y: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.x == x && c.y == y)
    }

    /// CSV with LF line endings; skipped cells have empty metric fields and
    /// region `infeasible`.
    pub fn to_csv(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for cell in &self.cells {
            let (rate, se, ov) = if cell.skipped {
                (String::new(), String::new(), String::new())
            } else {
                (
                    cell.exact_rate.to_string(),
                    cell.se_exact.to_string(),
                    cell.mean_overlap_fraction.to_string(),
                )
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                cell.x,
                cell.y,
                opt(cell.rho),
                opt(cell.eta),
                c.n,
                c.d,
                cell.trials_run,
                c.estimator.name(),
                rate,
                se,
                ov,
                c.base_seed,
                cell.region
            )
            .unwrap();
        }
        out
    }

    /// Threshold lines at each configured slack, as `(name, x-intercept,
    /// y-intercept)`, for plot overlays.
    pub fn overlay_lines(&self) -> Vec<(String, f64, f64)> {
        let mut eps = vec![0.0];
        eps.extend(self.config.epsilon_lines.iter().copied());
        let mut out = Vec::new();
        for e in eps {
            out.push((format!("exact(eps={e})"), 4.0 * (1.0 + e), 4.0 * (1.0 + e)));
            out.push((
                format!("almost_exact(eps={e})"),
                4.0 * (1.0 + e),
                2.0 * (1.0 + e),
            ));
            out.push((
                format!("impossible_half(eps={e})"),
                2.0 * (1.0 - e),
                1.0 - e,
            ));
        }
        out
    }

    /// Provenance record written next to the CSV.
    pub fn meta_json(&self) -> serde_json::Value {
        serde_json::json!({
            "tool_version": crate::TOOL_VERSION,
            "base_seed": self.config.base_seed,
            "config": self.config,
            "overlay_lines": self.overlay_lines(),
        })
    }
}
