//! Rebalancing schedules on the thin simulation mesh.
//!
//! Four schedule families: the ellipsoid hitting times driven by the matrix
//! equation solution (the optimal strategy), a generic hitting family with a
//! caller-supplied matrix process (covers the constant-matrix Karandikar
//! scheme), and the uniform / fractional deterministic baselines.
//!
//! Crossing detection is a pure grid scan: a rebalancing date is the first
//! thin-mesh point whose increment from the previous date leaves the
//! ellipsoid `{v : v^T M v < eps^2}`. No sub-grid (Brownian bridge)
//! correction is applied; the scan is exactly the estimator used by the
//! measurement pipeline.

use crate::error::{Error, Result};
use crate::gamma::{lambda_mu_of, lambda_of, solve_gamma_matrix};
use crate::market::{gamma_to_c, greeks, sigma_matrix, MarketModel};
use crate::simulator::PathGrid;
use crate::symmat::{eigh_sym, quad_form, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Uniform,
    Fractional,
    Ellipsoid,
    GenericHitting,
}

/// Ordered rebalancing dates as indices into the thin mesh.
///
/// Indices are strictly increasing, start at 0 and end at `n_bar` (the first
/// date is time 0, the last is maturity). Hitting-time schedules also record
/// the ellipsoid matrix used on each interval, evaluated at the interval's
/// left endpoint.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub mesh_indices: Vec<usize>,
    pub ellipsoids: Option<Vec<SymMatrix>>,
}

impl Schedule {
    fn validate(&self, n_bar: usize) -> Result<()> {
        let idx = &self.mesh_indices;
        if idx.len() < 2 || idx[0] != 0 || *idx.last().expect("nonempty") != n_bar {
            return Err(Error::input(format!(
                "schedule must run from 0 to {n_bar}, got {:?}...",
                &idx[..idx.len().min(4)]
            )));
        }
        if idx.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("schedule indices must be strictly increasing"));
        }
        if let Some(e) = &self.ellipsoids {
            if e.len() != idx.len() - 1 {
                return Err(Error::input(format!(
                    "expected {} ellipsoids for {} intervals, got {}",
                    idx.len() - 1,
                    idx.len() - 1,
                    e.len()
                )));
            }
        }
        Ok(())
    }

    /// Number of rebalancing intervals (the date count `N_T`).
    pub fn n_intervals(&self) -> usize {
        self.mesh_indices.len() - 1
    }

    /// Index of the last schedule date at or before mesh index `k`.
    pub fn last_date_at_or_before(&self, k: usize) -> usize {
        match self.mesh_indices.binary_search(&k) {
            Ok(pos) => self.mesh_indices[pos],
            Err(pos) => self.mesh_indices[pos - 1],
        }
    }
}

/// Snap raw mesh indices to a valid schedule: sort order is assumed, adjacent
/// duplicates collapse to the earlier occurrence, endpoints stay.
fn dedup_indices(raw: Vec<usize>) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(raw.len());
    for idx in raw {
        if out.last() != Some(&idx) {
            out.push(idx);
        }
    }
    out
}

/// Uniform mesh with `n_dates` intervals, snapped to the thin mesh.
pub fn uniform_schedule(n_dates: usize, n_bar: usize) -> Result<Schedule> {
    if n_dates == 0 || n_dates > n_bar {
        return Err(Error::input(format!(
            "n_dates must be in 1..={n_bar}, got {n_dates}"
        )));
    }
    let raw: Vec<usize> = (0..=n_dates)
        .map(|i| (i as f64 * n_bar as f64 / n_dates as f64).round() as usize)
        .collect();
    let schedule = Schedule {
        kind: ScheduleKind::Uniform,
        mesh_indices: dedup_indices(raw),
        ellipsoids: None,
    };
    schedule.validate(n_bar)?;
    Ok(schedule)
}

/// Fractional mesh `T (1 - (1 - i/N)^2)`, concentrating dates near maturity,
/// snapped to the nearest thin-mesh index.
pub fn fractional_schedule(n_dates: usize, n_bar: usize) -> Result<Schedule> {
    if n_dates == 0 || n_dates > n_bar {
        return Err(Error::input(format!(
            "n_dates must be in 1..={n_bar}, got {n_dates}"
        )));
    }
    let raw: Vec<usize> = (0..=n_dates)
        .map(|i| {
            let frac = 1.0 - (1.0 - i as f64 / n_dates as f64).powi(2);
            (frac * n_bar as f64).round() as usize
        })
        .collect();
    let schedule = Schedule {
        kind: ScheduleKind::Fractional,
        mesh_indices: dedup_indices(raw),
        ellipsoids: None,
    };
    schedule.validate(n_bar)?;
    Ok(schedule)
}

/// First mesh index after `from` whose increment leaves the ellipsoid, or
/// `n_bar` when the form never reaches `eps^2`.
fn first_crossing(path: &PathGrid, from: usize, matrix: &SymMatrix, eps_sq: f64) -> Result<usize> {
    let anchor = path.state(from);
    let dim = path.dim;
    let mut diff = vec![0.0; dim];
    for k in (from + 1)..=path.n_bar {
        let s = path.state(k);
        for (d, (a, b)) in diff.iter_mut().zip(s.iter().zip(anchor.iter())) {
            *d = a - b;
        }
        if quad_form(matrix, &diff)? >= eps_sq {
            return Ok(k);
        }
    }
    Ok(path.n_bar)
}

/// Hitting times of the optimal ellipsoids (the stochastic strategy).
///
/// At each date the pipeline runs: greeks at the current state, rescaled
/// gamma `c = sigma^T Gamma sigma`, matrix-equation solution `X`, ellipsoid
/// `Lambda = (sigma^-1)^T X sigma^-1`, regularization `Lambda^mu`; the next
/// date is the first mesh point whose increment satisfies
/// `(S_t - S_tau)^T Lambda^mu (S_t - S_tau) >= eps^2`, or maturity.
pub fn ellipsoid_schedule(
    path: &PathGrid,
    model: &MarketModel,
    epsilon: f64,
    mu: f64,
) -> Result<Schedule> {
    if !(epsilon > 0.0) {
        return Err(Error::input(format!("epsilon must be positive, got {epsilon}")));
    }
    let eps_sq = epsilon * epsilon;
    let mut indices = vec![0usize];
    let mut ellipsoids = Vec::new();
    let mut anchor = 0usize;
    while anchor < path.n_bar {
        let t = path.time(anchor);
        let s = path.state(anchor);
        let bundle = greeks(model, t, s)?;
        let c = gamma_to_c(model, s, &bundle)?;
        let x = solve_gamma_matrix(&c)?.x;
        let sigma = sigma_matrix(model, s)?;
        let lambda = lambda_of(&sigma, &x)?;
        let spec = lambda_mu_of(&lambda, mu)?;
        let next = first_crossing(path, anchor, &spec.lambda_mu, eps_sq)?;
        ellipsoids.push(spec.lambda_mu);
        indices.push(next);
        anchor = next;
    }
    let schedule =
        Schedule { kind: ScheduleKind::Ellipsoid, mesh_indices: indices, ellipsoids: Some(ellipsoids) };
    schedule.validate(path.n_bar)?;
    Ok(schedule)
}

/// Hitting times for a caller-supplied matrix process `H(t, s)`.
///
/// Each returned matrix must be positive-definite with smallest eigenvalue
/// above 1e-12; a violation is reported with the offending date.
pub fn generic_hitting_schedule(
    path: &PathGrid,
    mut h_provider: impl FnMut(f64, &[f64]) -> Result<SymMatrix>,
    epsilon: f64,
) -> Result<Schedule> {
    if !(epsilon > 0.0) {
        return Err(Error::input(format!("epsilon must be positive, got {epsilon}")));
    }
    let eps_sq = epsilon * epsilon;
    let mut indices = vec![0usize];
    let mut ellipsoids = Vec::new();
    let mut anchor = 0usize;
    while anchor < path.n_bar {
        let t = path.time(anchor);
        let h = h_provider(t, path.state(anchor))?;
        let lmin = eigh_sym(&h)?.min_eigenvalue();
        if lmin < 1e-12 {
            return Err(Error::NotPsd {
                min_eigenvalue: lmin,
                context: format!(" (H at mesh index {anchor}, t = {t})"),
            });
        }
        let next = first_crossing(path, anchor, &h, eps_sq)?;
        ellipsoids.push(h);
        indices.push(next);
        anchor = next;
    }
    let schedule = Schedule {
        kind: ScheduleKind::GenericHitting,
        mesh_indices: indices,
        ellipsoids: Some(ellipsoids),
    };
    schedule.validate(path.n_bar)?;
    Ok(schedule)
}
