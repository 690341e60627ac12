//! Solver for the ellipsoid matrix equation `2 tr(x) x + 4 x^2 = c^2` and
//! the construction of the rebalancing ellipsoid matrices.
//!
//! The unique PSD solution is assembled spectrally: diagonalize
//! `c = P Diag(lambda_j) P^T`, find the nonnegative root `y` of
//! `(4+d) y - sum_j sqrt(y^2 + 4 lambda_j^2)`, then
//! `X = P Diag((-y + sqrt(y^2 + 4 lambda_j^2)) / 4) P^T`. The root equals
//! `tr(X)` and lies in `[0, d |lambda| / sqrt(4 + 2d)]`; the function is
//! strictly increasing in `y` with slope at least 4, so bisection plus a few
//! Newton polish steps pin it to machine precision.
//!
//! From `X` the ellipsoid matrices follow: `Lambda = (sigma^-1)^T X sigma^-1`
//! and `Lambda^mu = Lambda + mu * chi(lmin(Lambda) / mu) * I`, where `chi` is
//! a smoothstep mollifier equal to 1 below 1/2 and 0 above 1.

use crate::error::{Error, Result};
use crate::symmat::{clamp_psd_eigenvalue, eigh_sym, mat_inverse, SquareMatrix, SymMatrix};

/// Solution record for `2 tr(x) x + 4 x^2 = c^2`.
#[derive(Debug, Clone)]
pub struct GammaSolution {
    /// The unique PSD solution `X`.
    pub x: SymMatrix,
    /// The trace root `y`; equals `tr(x)` up to roundoff.
    pub trace_y: f64,
    /// Frobenius norm of `2 tr(X) X + 4 X^2 - c^2`.
    pub residual: f64,
}

/// Ellipsoid matrix pair for one rebalancing date.
#[derive(Debug, Clone)]
pub struct EllipsoidSpec {
    pub lambda: SymMatrix,
    pub lambda_mu: SymMatrix,
    /// Mollifier value `chi(lmin(lambda) / mu)`, in `[0, 1]`; 0 when `mu == 0`.
    pub bump_weight: f64,
}

/// `h(lambda, y) = (4 + d) y - sum_j sqrt(y^2 + 4 lambda_j^2)`.
fn h(lambda: &[f64], y: f64) -> f64 {
    let d = lambda.len() as f64;
    (4.0 + d) * y - lambda.iter().map(|l| (y * y + 4.0 * l * l).sqrt()).sum::<f64>()
}

fn h_slope(lambda: &[f64], y: f64) -> f64 {
    let d = lambda.len() as f64;
    (4.0 + d) - lambda.iter().map(|l| y / (y * y + 4.0 * l * l).sqrt()).sum::<f64>()
}

/// Unique nonnegative root of `y -> (4 + d) y - sum_j sqrt(y^2 + 4 lambda_j^2)`.
///
/// Bisection on the bracket `[0, d |lambda| / sqrt(4 + 2d)]` down to width
/// `1e-14 * (1 + |lambda|)`, then three Newton steps (the slope is at least
/// 4, so Newton stays inside the bracket and converges quadratically).
pub fn trace_root(lambda_c: &[f64]) -> Result<f64> {
    if lambda_c.is_empty() {
        return Err(Error::input("trace_root requires at least one eigenvalue"));
    }
    if lambda_c.iter().any(|l| !l.is_finite()) {
        return Err(Error::input("trace_root requires finite eigenvalues"));
    }
    let d = lambda_c.len() as f64;
    let norm = lambda_c.iter().map(|l| l * l).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }

    let mut lo = 0.0;
    let mut hi = d * norm / (4.0 + 2.0 * d).sqrt();
    let width_tol = 1e-14 * (1.0 + norm);
    // h(lo) <= 0 and h(hi) >= 0 by construction of the bracket.
    while hi - lo > width_tol {
        let mid = 0.5 * (lo + hi);
        if h(lambda_c, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..3 {
        let step = h(lambda_c, y) / h_slope(lambda_c, y);
        y -= step;
    }
    Ok(y.max(0.0))
}

/// Solve `2 tr(x) x + 4 x^2 = c^2` for the unique PSD `x`.
pub fn solve_gamma_matrix(c: &SymMatrix) -> Result<GammaSolution> {
    let spectrum = eigh_sym(c)?;
    let y = trace_root(&spectrum.eigenvalues)?;
    let x = spectrum.assemble(|l| {
        clamp_psd_eigenvalue((-y + (y * y + 4.0 * l * l).sqrt()) / 4.0).max(0.0)
    });

    // Residual of the defining equation, as a diagnostic.
    let xs = x.as_square();
    let x2 = xs.matmul(&xs);
    let cs = c.as_square();
    let c2 = cs.matmul(&cs);
    let tr_x = x.trace();
    let mut residual = 0.0;
    for i in 0..c.dim() {
        for j in 0..c.dim() {
            let r = 2.0 * tr_x * xs.get(i, j) + 4.0 * x2.get(i, j) - c2.get(i, j);
            residual += r * r;
        }
    }
    Ok(GammaSolution { x, trace_y: y, residual: residual.sqrt() })
}

/// Ellipsoid matrix `Lambda = (sigma^-1)^T X sigma^-1`, symmetrized by
/// transpose-averaging to kill inversion roundoff.
pub fn lambda_of(sigma: &SquareMatrix, x: &SymMatrix) -> Result<SymMatrix> {
    if sigma.dim() != x.dim() {
        return Err(Error::input(format!(
            "lambda_of dimension mismatch: sigma {} vs x {}",
            sigma.dim(),
            x.dim()
        )));
    }
    let sigma_inv = mat_inverse(sigma)?;
    let lambda = sigma_inv.transpose().matmul(&x.as_square()).matmul(&sigma_inv);
    Ok(SymMatrix::symmetrize(&lambda))
}

/// Mollifier `chi`: 1 below 1/2, 0 above 1, cubic smoothstep in between.
fn chi(x: f64) -> f64 {
    if x <= 0.5 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        let t = 2.0 * x - 1.0;
        1.0 - (3.0 * t * t - 2.0 * t * t * t)
    }
}

/// Regularized ellipsoid `Lambda^mu = Lambda + mu * chi(lmin(Lambda)/mu) * I`.
///
/// With `mu = 0` the bump term is dropped entirely and `Lambda^0 = Lambda`
/// exactly (`bump_weight` reported as 0 by convention).
pub fn lambda_mu_of(lambda: &SymMatrix, mu: f64) -> Result<EllipsoidSpec> {
    if !(mu >= 0.0) {
        return Err(Error::input(format!("mu must be nonnegative, got {mu}")));
    }
    if mu == 0.0 {
        return Ok(EllipsoidSpec { lambda: lambda.clone(), lambda_mu: lambda.clone(), bump_weight: 0.0 });
    }
    let lmin = eigh_sym(lambda)?.min_eigenvalue();
    let bump_weight = chi(lmin / mu);
    let lambda_mu = lambda.add_scaled_identity(mu * bump_weight);
    Ok(EllipsoidSpec { lambda: lambda.clone(), lambda_mu, bump_weight })
}
