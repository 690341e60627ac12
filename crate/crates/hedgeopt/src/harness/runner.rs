//! Parallel experiment execution.
//!
//! Per path: simulate, build the ellipsoid schedule (always — it supplies
//! the matched date count even when the stochastic strategy itself is not
//! reported), build the deterministic baselines with that same date count,
//! measure every requested strategy, and collect one row. Paths run on a
//! worker pool; results are collected in path order so the output does not
//! depend on scheduling.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::MarketModel;
use crate::simulator::{
    admissibility_stats, hedge_report, lower_bound_integral, simulate_path, AdmissibilityStats,
};
use crate::strategies::{
    ellipsoid_schedule, fractional_schedule, generic_hitting_schedule, uniform_schedule,
};
use crate::symmat::SymMatrix;

use super::config::{ExperimentConfig, StrategyKind};

/// Per-strategy measurements within a row.
#[derive(Debug, Clone, Copy)]
pub struct StrategyMetrics {
    pub qv: f64,
    pub beta: f64,
    pub z_terminal: f64,
    pub n_dates: usize,
}

/// One successfully measured path.
#[derive(Debug, Clone)]
pub struct ExperimentRow {
    pub path_id: u64,
    /// Date count of the stochastic schedule (the matched-N reference).
    pub n_dates: usize,
    pub lower_bound: f64,
    pub stats: AdmissibilityStats,
    /// Metrics per requested strategy, in canonical order.
    pub metrics: Vec<(StrategyKind, StrategyMetrics)>,
    /// Empty when clean; protocol warnings otherwise (e.g. a snapped
    /// baseline lost dates to deduplication).
    pub status: String,
}

/// Result of one path: a row, or the error that aborted it.
#[derive(Debug, Clone)]
pub enum PathOutcome {
    Row(ExperimentRow),
    Failed { path_id: u64, message: String },
}

impl PathOutcome {
    pub fn path_id(&self) -> u64 {
        match self {
            PathOutcome::Row(r) => r.path_id,
            PathOutcome::Failed { path_id, .. } => *path_id,
        }
    }

    pub fn row(&self) -> Option<&ExperimentRow> {
        match self {
            PathOutcome::Row(r) => Some(r),
            PathOutcome::Failed { .. } => None,
        }
    }
}

/// Distribution summary for one strategy's beta across paths.
#[derive(Debug, Clone, Copy)]
pub struct BetaStats {
    pub mean: f64,
    pub q10: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q90: f64,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub n_paths: usize,
    pub n_failed: usize,
    pub beta: Vec<(StrategyKind, BetaStats)>,
    /// Fraction of paths with `beta_uniform >= beta_stochastic`.
    pub frac_uniform_ge_stochastic: Option<f64>,
    /// Fraction of paths with `beta_fractional >= beta_stochastic`.
    pub frac_fractional_ge_stochastic: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub outcomes: Vec<PathOutcome>,
    pub summary: Summary,
}

/// Linear-interpolation quantile of a sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

fn beta_stats(values: &mut Vec<f64>) -> BetaStats {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite betas"));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    BetaStats {
        mean,
        q10: quantile(values, 0.10),
        q25: quantile(values, 0.25),
        median: quantile(values, 0.50),
        q75: quantile(values, 0.75),
        q90: quantile(values, 0.90),
    }
}

fn run_path(
    config: &ExperimentConfig,
    model: &MarketModel,
    strategies: &[StrategyKind],
    path_id: u64,
) -> Result<ExperimentRow> {
    let path = simulate_path(model, config.n_bar, config.seed, path_id)?;
    let stochastic = ellipsoid_schedule(&path, model, config.epsilon, config.mu)?;
    let n_dates = stochastic.n_intervals();
    let lower_bound = lower_bound_integral(&path, model)?;
    let stats = admissibility_stats(&path, &stochastic, model, config.epsilon)?;

    let mut status = String::new();
    let mut metrics = Vec::with_capacity(strategies.len());
    for &kind in strategies {
        let schedule = match kind {
            StrategyKind::Stochastic => stochastic.clone(),
            StrategyKind::Uniform => {
                let s = uniform_schedule(n_dates, config.n_bar)?;
                if s.n_intervals() < n_dates {
                    status.push_str(&format!(
                        "uniform dedup {} < {}; ",
                        s.n_intervals(),
                        n_dates
                    ));
                }
                s
            }
            StrategyKind::Fractional => {
                let s = fractional_schedule(n_dates, config.n_bar)?;
                if s.n_intervals() < n_dates {
                    status.push_str(&format!(
                        "fractional dedup {} < {}; ",
                        s.n_intervals(),
                        n_dates
                    ));
                }
                s
            }
            StrategyKind::Karandikar => {
                let dim = model.dim();
                generic_hitting_schedule(
                    &path,
                    move |_, _| Ok(SymMatrix::identity(dim)),
                    config.epsilon,
                )?
            }
        };
        let report = hedge_report(&path, &schedule, model, lower_bound, config.epsilon)?;
        metrics.push((
            kind,
            StrategyMetrics {
                qv: report.qv,
                beta: report.beta,
                z_terminal: report.z_terminal,
                n_dates: report.n_dates,
            },
        ));
    }

    Ok(ExperimentRow {
        path_id,
        n_dates,
        lower_bound,
        stats,
        metrics,
        status: status.trim_end_matches("; ").to_string(),
    })
}

fn summarize(
    outcomes: &[PathOutcome],
    strategies: &[StrategyKind],
    n_paths: usize,
) -> Summary {
    let rows: Vec<&ExperimentRow> = outcomes.iter().filter_map(|o| o.row()).collect();
    let mut beta = Vec::new();
    for &kind in strategies {
        let mut values: Vec<f64> = rows
            .iter()
            .filter_map(|r| {
                r.metrics.iter().find(|(k, _)| *k == kind).map(|(_, m)| m.beta)
            })
            .collect();
        if !values.is_empty() {
            beta.push((kind, beta_stats(&mut values)));
        }
    }

    let frac_ge = |kind: StrategyKind| -> Option<f64> {
        let mut total = 0usize;
        let mut ge = 0usize;
        for r in &rows {
            let stoch = r.metrics.iter().find(|(k, _)| *k == StrategyKind::Stochastic);
            let other = r.metrics.iter().find(|(k, _)| *k == kind);
            if let (Some((_, s)), Some((_, o))) = (stoch, other) {
                total += 1;
                if o.beta >= s.beta {
                    ge += 1;
                }
            }
        }
        (total > 0).then(|| ge as f64 / total as f64)
    };

    Summary {
        n_paths,
        n_failed: n_paths - rows.len(),
        beta,
        frac_uniform_ge_stochastic: frac_ge(StrategyKind::Uniform),
        frac_fractional_ge_stochastic: frac_ge(StrategyKind::Fractional),
    }
}

/// Run the experiment on `workers` threads (0 = library default).
///
/// A failing path aborts only itself and is recorded in its row; the run
/// fails if more than 1% of paths fail.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<RunOutcome> {
    config.validate()?;
    let model = config.to_model()?;
    let strategies = config.strategy_set();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        builder = builder.num_threads(workers);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::input(format!("worker pool construction failed: {e}")))?;

    let outcomes: Vec<PathOutcome> = pool.install(|| {
        (0..config.n_paths as u64)
            .into_par_iter()
            .map(|path_id| match run_path(config, &model, &strategies, path_id) {
                Ok(row) => PathOutcome::Row(row),
                Err(e) => PathOutcome::Failed {
                    path_id,
                    // Semicolons keep the message single-cell in the CSV.
                    message: e.to_string().replace([',', '\n'], ";"),
                },
            })
            .collect()
    });

    let n_failed = outcomes.iter().filter(|o| o.row().is_none()).count();
    if n_failed * 100 > config.n_paths {
        return Err(Error::input(format!(
            "{n_failed} of {} paths failed (over the 1% cap)",
            config.n_paths
        )));
    }

    let summary = summarize(&outcomes, &strategies, config.n_paths);
    Ok(RunOutcome { outcomes, summary })
}

impl Summary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "paths: {} ({} failed)\n",
            self.n_paths, self.n_failed
        ));
        for (kind, stats) in &self.beta {
            out.push_str(&format!(
                "beta_{:<11} mean {:.4}  q10 {:.4}  q25 {:.4}  median {:.4}  q75 {:.4}  q90 {:.4}\n",
                kind.label(),
                stats.mean,
                stats.q10,
                stats.q25,
                stats.median,
                stats.q75,
                stats.q90
            ));
        }
        if let Some(f) = self.frac_uniform_ge_stochastic {
            out.push_str(&format!("frac(beta_uniform >= beta_stochastic): {f:.4}\n"));
        }
        if let Some(f) = self.frac_fractional_ge_stochastic {
            out.push_str(&format!("frac(beta_fractional >= beta_stochastic): {f:.4}\n"));
        }
        out
    }
}
