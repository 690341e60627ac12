//! Thin-mesh path simulation and the hedging-error measurement pipeline.
//!
//! Paths are sampled by exact log-normal stepping on the uniform thin mesh:
//! log-increments are Gaussian with covariance `Sigma dt` and drift
//! `-diag(Sigma)/2 dt`, so simulated prices are martingales in distribution
//! with no discretization bias. Noise comes from the counter-based generator
//! in [`crate::rng`], keyed by `(seed, path_id, step)`.
//!
//! For a path and a schedule the pipeline measures:
//! - the hedging error `Z_t = u(t, S_t) - u(0, S_0) - sum_i Delta_i dS` with
//!   the terminal value priced by the payoff itself;
//! - the realized quadratic variation of `Z` as the squared-increment sum of
//!   the delta-gap integrand `(D_x u_t - D_x u_{phi(t)}) . dS_t`;
//! - the lower-bound integral `int_0^T tr(X_t) dt` where `X_t` solves the
//!   ellipsoid matrix equation for `c_t = sigma^T Gamma sigma`;
//! - the beta ratio `N_T <Z>_T / (int tr X dt)^2`;
//! - admissibility diagnostics (`eps^2 N_T`, its target integral, maximum
//!   increment size, largest interval).
//!
//! Time integrals are left Riemann sums excluding maturity, where greeks are
//! not defined; the final sliver contributes its left value.

use crate::error::{Error, Result};
use crate::gamma::trace_root;
use crate::market::{gamma_to_c, greeks, sigma_matrix, MarketModel, VolParams};
use crate::rng::PathNoise;
use crate::strategies::Schedule;
use crate::symmat::{eigh_sym, SymMatrix};

/// Asset path sampled on the uniform thin mesh `(k T / n_bar)`.
#[derive(Debug, Clone)]
pub struct PathGrid {
    pub n_bar: usize,
    /// Horizon T in years.
    pub horizon: f64,
    pub dim: usize,
    /// Row-major states, `(n_bar + 1) * dim` entries, all positive.
    states: Vec<f64>,
    pub seed: u64,
    pub path_id: u64,
}

impl PathGrid {
    /// Wrap raw states (used by tests to build flat or scripted paths).
    pub fn from_states(
        n_bar: usize,
        horizon: f64,
        dim: usize,
        states: Vec<f64>,
        seed: u64,
        path_id: u64,
    ) -> Result<Self> {
        if n_bar < 1 {
            return Err(Error::input("path grid needs at least one step"));
        }
        if states.len() != (n_bar + 1) * dim {
            return Err(Error::input(format!(
                "expected {} states, got {}",
                (n_bar + 1) * dim,
                states.len()
            )));
        }
        if states.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::input("path states must be positive and finite"));
        }
        Ok(PathGrid { n_bar, horizon, dim, states, seed, path_id })
    }

    #[inline]
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.n_bar as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_bar as f64
    }

    /// View of the same trajectory on a mesh coarsened by `factor`
    /// (subsampling every `factor`-th state). Requires `factor | n_bar`.
    pub fn subsample(&self, factor: usize) -> Result<PathGrid> {
        if factor == 0 || self.n_bar % factor != 0 {
            return Err(Error::input(format!(
                "subsample factor {factor} must divide n_bar {}",
                self.n_bar
            )));
        }
        let n = self.n_bar / factor;
        let mut states = Vec::with_capacity((n + 1) * self.dim);
        for k in 0..=n {
            states.extend_from_slice(self.state(k * factor));
        }
        PathGrid::from_states(n, self.horizon, self.dim, states, self.seed, self.path_id)
    }
}

/// Simulate one path by exact log-normal stepping.
pub fn simulate_path(
    model: &MarketModel,
    n_bar: usize,
    seed: u64,
    path_id: u64,
) -> Result<PathGrid> {
    if n_bar < 2 {
        return Err(Error::input(format!("n_bar must be at least 2, got {n_bar}")));
    }
    let dim = model.dim();
    let dt = model.maturity / n_bar as f64;
    let sqrt_dt = dt.sqrt();
    let mut noise = PathNoise::new(seed, path_id);

    let mut states = Vec::with_capacity((n_bar + 1) * dim);
    states.extend_from_slice(&model.spot);
    let mut log_s: Vec<f64> = model.spot.iter().map(|s| s.ln()).collect();

    match model.vol {
        VolParams::One { sigma } => {
            let drift = -0.5 * sigma * sigma * dt;
            for step in 0..n_bar {
                let (z, _) = noise.normal_pair(step as u64);
                log_s[0] += drift + sigma * sqrt_dt * z;
                states.push(log_s[0].exp());
            }
        }
        VolParams::Two { sigma1, sigma2, rho } => {
            let drift1 = -0.5 * sigma1 * sigma1 * dt;
            let drift2 = -0.5 * sigma2 * sigma2 * dt;
            let rho_c = (1.0 - rho * rho).sqrt();
            for step in 0..n_bar {
                let (z1, z2) = noise.normal_pair(step as u64);
                log_s[0] += drift1 + sigma1 * sqrt_dt * z1;
                log_s[1] += drift2 + sigma2 * sqrt_dt * (rho * z1 + rho_c * z2);
                states.push(log_s[0].exp());
                states.push(log_s[1].exp());
            }
        }
    }
    PathGrid::from_states(n_bar, model.maturity, dim, states, seed, path_id)
}

/// Hedging error along the thin mesh.
#[derive(Debug, Clone)]
pub struct HedgePath {
    /// `Z_T`, with the terminal option value priced by the payoff.
    pub z_terminal: f64,
    /// `Z` at every mesh point (`z_path[0] = 0`, `z_path[n_bar] = z_terminal`).
    pub z_path: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hedging error of the discretely rebalanced delta hedge.
///
/// The portfolio leg is the exact telescoping sum over schedule dates: the
/// delta held on `[tau_{i-1}, tau_i)` multiplies the realized increment. The
/// option leg uses closed-form prices strictly before maturity and the raw
/// payoff at maturity.
pub fn hedge_error(path: &PathGrid, schedule: &Schedule, model: &MarketModel) -> Result<HedgePath> {
    let n = path.n_bar;
    let u0 = greeks(model, 0.0, path.state(0))?.price;
    let mut delta = greeks(model, 0.0, path.state(0))?.delta;
    let mut portfolio = 0.0;
    let mut z_path = Vec::with_capacity(n + 1);
    z_path.push(0.0);

    let mut next_date_pos = 1usize;
    let mut diff = vec![0.0; path.dim];
    for k in 0..n {
        let s_now = path.state(k);
        let s_next = path.state(k + 1);
        for (d, (a, b)) in diff.iter_mut().zip(s_next.iter().zip(s_now.iter())) {
            *d = a - b;
        }
        portfolio += dot(&delta, &diff);
        let k1 = k + 1;
        let value = if k1 == n {
            model.payoff_value(path.state(n))
        } else {
            greeks(model, path.time(k1), path.state(k1))?.price
        };
        z_path.push(value - u0 - portfolio);

        if next_date_pos < schedule.mesh_indices.len() && schedule.mesh_indices[next_date_pos] == k1
        {
            // Maturity is a schedule date but nothing is rebalanced there.
            if k1 < n {
                delta = greeks(model, path.time(k1), path.state(k1))?.delta;
            }
            next_date_pos += 1;
        }
    }
    Ok(HedgePath { z_terminal: *z_path.last().expect("nonempty"), z_path })
}

/// Realized quadratic variation of the hedging error: the squared-increment
/// sum of the delta-gap integrand over the thin mesh. The gap refreshes to
/// zero at every rebalancing date.
pub fn realized_qv(path: &PathGrid, schedule: &Schedule, model: &MarketModel) -> Result<f64> {
    let n = path.n_bar;
    let mut anchor_delta = greeks(model, 0.0, path.state(0))?.delta;
    let mut next_date_pos = 1usize;
    let mut qv = 0.0;
    let mut gap = vec![0.0; path.dim];
    let mut diff = vec![0.0; path.dim];
    for k in 0..n {
        let is_date = next_date_pos < schedule.mesh_indices.len()
            && schedule.mesh_indices[next_date_pos] == k;
        if is_date {
            anchor_delta = greeks(model, path.time(k), path.state(k))?.delta;
            next_date_pos += 1;
        }
        let delta_now = if k == 0 || is_date {
            anchor_delta.clone()
        } else {
            greeks(model, path.time(k), path.state(k))?.delta
        };
        for ((g, d), a) in gap.iter_mut().zip(delta_now.iter()).zip(anchor_delta.iter()) {
            *g = d - a;
        }
        let s_now = path.state(k);
        let s_next = path.state(k + 1);
        for (d, (a, b)) in diff.iter_mut().zip(s_next.iter().zip(s_now.iter())) {
            *d = a - b;
        }
        let inc = dot(&gap, &diff);
        qv += inc * inc;
    }
    Ok(qv)
}

/// Left Riemann estimate of the lower-bound integral `int_0^T tr(X_t) dt`.
///
/// `tr(X)` is exactly the trace root of the spectrum of
/// `c = sigma^T Gamma sigma`, so no matrix assembly is needed.
pub fn lower_bound_integral(path: &PathGrid, model: &MarketModel) -> Result<f64> {
    let dt = path.dt();
    let mut acc = 0.0;
    for k in 0..path.n_bar {
        let t = path.time(k);
        let s = path.state(k);
        let bundle = greeks(model, t, s)?;
        let c = gamma_to_c(model, s, &bundle)?;
        let spectrum = eigh_sym(&c)?;
        acc += trace_root(&spectrum.eigenvalues)? * dt;
    }
    Ok(acc)
}

/// `beta = N_T <Z>_T / (int tr X dt)^2`, the renormalized quadratic
/// variation relative to its asymptotic floor.
pub fn beta_ratio(n_dates: usize, qv: f64, lower_bound: f64) -> Result<f64> {
    if lower_bound <= 1e-14 {
        return Err(Error::DegenerateBound { lower_bound });
    }
    Ok(n_dates as f64 * qv / (lower_bound * lower_bound))
}

/// Empirical diagnostics for the admissibility of a hitting-time schedule.
#[derive(Debug, Clone, Copy)]
pub struct AdmissibilityStats {
    /// `eps^2 N_T`.
    pub eps2n: f64,
    /// `sup_i sup_t |S_t - S_{tau_{i-1}}|^2 / eps^2` over interval interiors.
    pub max_increment_ratio: f64,
    /// Largest interval length, in time units.
    pub max_dtau: f64,
    /// Left Riemann sum of `tr(Lambda^mu_{phi(t)} sigma_t sigma_t^T) dt`,
    /// the limit of `eps^2 N_T`.
    pub target_integral: f64,
}

/// `tr(a b)` for symmetric `a`, `b`.
fn trace_product(a: &SymMatrix, b: &SymMatrix) -> f64 {
    let d = a.dim();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += a.get(i, j) * b.get(i, j);
        }
    }
    acc
}

/// Diagnostics for a schedule that recorded its per-interval ellipsoids.
pub fn admissibility_stats(
    path: &PathGrid,
    schedule: &Schedule,
    model: &MarketModel,
    epsilon: f64,
) -> Result<AdmissibilityStats> {
    let Some(ellipsoids) = &schedule.ellipsoids else {
        return Err(Error::input(
            "admissibility stats require a hitting-time schedule with recorded ellipsoids",
        ));
    };
    let eps_sq = epsilon * epsilon;
    let dt = path.dt();

    let mut max_ratio = 0.0f64;
    let mut max_dtau = 0usize;
    let mut target = 0.0;
    for (i, w) in schedule.mesh_indices.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        max_dtau = max_dtau.max(b - a);
        let anchor = path.state(a);
        for k in (a + 1)..=b {
            let s = path.state(k);
            let norm_sq: f64 =
                s.iter().zip(anchor.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            max_ratio = max_ratio.max(norm_sq / eps_sq);
        }
        // Integrand left-evaluated on [a, b), excluding maturity.
        for k in a..b.min(path.n_bar) {
            let sigma = sigma_matrix(model, path.state(k))?;
            let ssq = SymMatrix::symmetrize(&sigma.matmul(&sigma.transpose()));
            target += trace_product(&ellipsoids[i], &ssq) * dt;
        }
    }
    Ok(AdmissibilityStats {
        eps2n: eps_sq * schedule.n_intervals() as f64,
        max_increment_ratio: max_ratio,
        max_dtau: max_dtau as f64 * dt,
        target_integral: target,
    })
}

/// Per-path, per-strategy measurement record.
#[derive(Debug, Clone)]
pub struct HedgeReport {
    /// Interval count `N_T`.
    pub n_dates: usize,
    /// Realized quadratic variation `<Z>_T`.
    pub qv: f64,
    /// Terminal hedging error `Z_T`.
    pub z_terminal: f64,
    /// `int_0^T tr(X_t) dt` (path property, shared across strategies).
    pub lower_bound: f64,
    /// `N_T <Z>_T / lower_bound^2`.
    pub beta: f64,
    /// Present for hitting-time schedules only.
    pub admissibility: Option<AdmissibilityStats>,
}

/// Run the full measurement pipeline for one (path, schedule) pair.
///
/// `lower_bound` is computed once per path by the caller and passed in so
/// strategies sharing a path also share it.
pub fn hedge_report(
    path: &PathGrid,
    schedule: &Schedule,
    model: &MarketModel,
    lower_bound: f64,
    epsilon: f64,
) -> Result<HedgeReport> {
    let hedge = hedge_error(path, schedule, model)?;
    let qv = realized_qv(path, schedule, model)?;
    let n_dates = schedule.n_intervals();
    let beta = beta_ratio(n_dates, qv, lower_bound)?;
    let admissibility = if schedule.ellipsoids.is_some() {
        Some(admissibility_stats(path, schedule, model, epsilon)?)
    } else {
        None
    };
    Ok(HedgeReport {
        n_dates,
        qv,
        z_terminal: hedge.z_terminal,
        lower_bound,
        beta,
        admissibility,
    })
}
