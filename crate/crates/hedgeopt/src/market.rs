//! Market models with closed-form prices, deltas and gammas.
//!
//! Two model families are supported, both driftless (prices are expressed in
//! the money-market numeraire under the martingale measure):
//!
//! - a two-asset correlated log-normal model
//!   `dS1 = sigma1 S1 dB1`, `dS2 = rho sigma2 S2 dB1 + sqrt(1-rho^2) sigma2 S2 dB2`
//!   carrying the exchange binary payoff `1_{S1_T >= S2_T}`;
//! - a one-asset log-normal model `dS = sigma S dB` carrying call and
//!   digital call payoffs.
//!
//! The exchange-binary value follows from the Gaussian law of
//! `log(S1_T / S2_T)`: with `vbar^2 = sigma1^2 - 2 rho sigma1 sigma2 + sigma2^2`
//! the log-ratio at maturity is normal with mean
//! `log(s1/s2) + (sigma2^2 - sigma1^2)(T-t)/2` and variance `vbar^2 (T-t)`,
//! so the price is `N(d)` with
//! `d = (log(s1/s2) + (sigma2^2 - sigma1^2)(T-t)/2) / (vbar sqrt(T-t))`.
//! Deltas and gammas are the exact partial derivatives of that expression;
//! they are validated against Monte Carlo and finite differences in tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmat::{SquareMatrix, SymMatrix};

const INV_SQRT_2PI: f64 = 0.3989422804014327;

/// Standard normal cdf via the complementary error function. Arguments are
/// clamped to [-39, 39]; beyond that the cdf is 0 or 1 to working precision
/// and the unclamped tail would only feed denormals into Gamma ratios.
pub fn norm_cdf(x: f64) -> f64 {
    let x = x.clamp(-39.0, 39.0);
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density with the same clamping as [`norm_cdf`].
pub fn norm_pdf(x: f64) -> f64 {
    let x = x.clamp(-39.0, 39.0);
    (-0.5 * x * x).exp() * INV_SQRT_2PI
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payoff {
    /// `1_{S1_T >= S2_T}` on the two-asset model.
    ExchangeBinary,
    /// `(S_T - K)^+` on the one-asset model.
    Call { strike: f64 },
    /// `1_{S_T >= K}` on the one-asset model.
    DigitalCall { strike: f64 },
}

/// Volatility parameters, per year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolParams {
    One { sigma: f64 },
    Two { sigma1: f64, sigma2: f64, rho: f64 },
}

/// Diffusion specification: initial prices, volatility structure, payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    pub spot: Vec<f64>,
    pub vol: VolParams,
    /// Maturity T in years.
    pub maturity: f64,
    pub payoff: Payoff,
}

impl MarketModel {
    pub fn new(spot: Vec<f64>, vol: VolParams, maturity: f64, payoff: Payoff) -> Result<Self> {
        if spot.is_empty() || spot.len() > 2 {
            return Err(Error::input(format!("expected 1 or 2 spot prices, got {}", spot.len())));
        }
        if spot.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::input("spot prices must be positive and finite"));
        }
        if !(maturity > 0.0) || !maturity.is_finite() {
            return Err(Error::input(format!("maturity must be positive, got {maturity}")));
        }
        let dim = spot.len();
        match vol {
            VolParams::One { sigma } => {
                if dim != 1 {
                    return Err(Error::input("one-asset volatility requires one spot price"));
                }
                if !(sigma > 0.0) {
                    return Err(Error::input(format!("sigma must be positive, got {sigma}")));
                }
            }
            VolParams::Two { sigma1, sigma2, rho } => {
                if dim != 2 {
                    return Err(Error::input("two-asset volatility requires two spot prices"));
                }
                if !(sigma1 > 0.0) || !(sigma2 > 0.0) {
                    return Err(Error::input("sigma1 and sigma2 must be positive"));
                }
                if !(rho.abs() < 1.0) {
                    return Err(Error::input(format!("|rho| must be < 1, got {rho}")));
                }
            }
        }
        match payoff {
            Payoff::ExchangeBinary => {
                if dim != 2 {
                    return Err(Error::input("exchange binary payoff requires two assets"));
                }
            }
            Payoff::Call { strike } | Payoff::DigitalCall { strike } => {
                if dim != 1 {
                    return Err(Error::input("call/digital payoffs require one asset"));
                }
                if !(strike > 0.0) {
                    return Err(Error::input(format!("strike must be positive, got {strike}")));
                }
            }
        }
        Ok(MarketModel { spot, vol, maturity, payoff })
    }

    pub fn dim(&self) -> usize {
        self.spot.len()
    }

    /// Terminal payoff `g(S_T)`.
    pub fn payoff_value(&self, terminal: &[f64]) -> f64 {
        match self.payoff {
            Payoff::ExchangeBinary => {
                if terminal[0] >= terminal[1] {
                    1.0
                } else {
                    0.0
                }
            }
            Payoff::Call { strike } => (terminal[0] - strike).max(0.0),
            Payoff::DigitalCall { strike } => {
                if terminal[0] >= strike {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        if !(t < self.maturity) {
            return Err(Error::Maturity { t, maturity: self.maturity });
        }
        if !(t >= 0.0) {
            return Err(Error::input(format!("negative time {t}")));
        }
        Ok(self.maturity - t)
    }
}

/// Price, delta vector and gamma matrix of the option value at `(t, s)`.
#[derive(Debug, Clone)]
pub struct GreekBundle {
    pub price: f64,
    pub delta: Vec<f64>,
    pub gamma: SymMatrix,
    pub valid_at: f64,
}

/// Absolute volatility matrix `sigma(s)`: state-dependent, time-independent.
///
/// Two assets: `[[sigma1 s1, 0], [rho sigma2 s2, sqrt(1-rho^2) sigma2 s2]]`;
/// one asset: `[sigma s]`.
pub fn sigma_matrix(model: &MarketModel, s: &[f64]) -> Result<SquareMatrix> {
    if s.len() != model.dim() {
        return Err(Error::input(format!(
            "price vector length {} does not match model dimension {}",
            s.len(),
            model.dim()
        )));
    }
    if s.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::input("prices must be positive"));
    }
    match model.vol {
        VolParams::One { sigma } => SquareMatrix::new(1, vec![sigma * s[0]]),
        VolParams::Two { sigma1, sigma2, rho } => SquareMatrix::new(
            2,
            vec![
                sigma1 * s[0],
                0.0,
                rho * sigma2 * s[1],
                (1.0 - rho * rho).sqrt() * sigma2 * s[1],
            ],
        ),
    }
}

/// Closed-form greeks for the exchange binary `1_{S1_T >= S2_T}`.
pub fn greeks_exchange_binary(model: &MarketModel, t: f64, s: &[f64]) -> Result<GreekBundle> {
    let tau = model.check_time(t)?;
    let VolParams::Two { sigma1, sigma2, rho } = model.vol else {
        return Err(Error::input("exchange binary greeks require the two-asset model"));
    };
    if s.len() != 2 || s.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::input("exchange binary greeks require two positive prices"));
    }
    let vbar_sq = sigma1 * sigma1 - 2.0 * rho * sigma1 * sigma2 + sigma2 * sigma2;
    if !(vbar_sq > 0.0) {
        return Err(Error::input(format!(
            "degenerate spread volatility: sigma1^2 - 2 rho sigma1 sigma2 + sigma2^2 = {vbar_sq}"
        )));
    }
    let v = (vbar_sq * tau).sqrt();
    let (s1, s2) = (s[0], s[1]);
    let d = ((s1 / s2).ln() + 0.5 * (sigma2 * sigma2 - sigma1 * sigma1) * tau) / v;

    let price = norm_cdf(d);
    let pdf = norm_pdf(d);
    let delta = vec![pdf / (s1 * v), -pdf / (s2 * v)];
    let g11 = -pdf * (d + v) / (v * v * s1 * s1);
    let g22 = pdf * (v - d) / (v * v * s2 * s2);
    let g12 = d * pdf / (v * v * s1 * s2);
    let gamma = SymMatrix::new(2, vec![g11, g12, g12, g22])?;
    Ok(GreekBundle { price, delta, gamma, valid_at: t })
}

/// Closed-form greeks for one-asset call and digital call payoffs.
pub fn greeks_vanilla(model: &MarketModel, t: f64, x: f64) -> Result<GreekBundle> {
    let tau = model.check_time(t)?;
    let VolParams::One { sigma } = model.vol else {
        return Err(Error::input("vanilla greeks require the one-asset model"));
    };
    if !(x > 0.0) {
        return Err(Error::input(format!("price must be positive, got {x}")));
    }
    let sq = sigma * tau.sqrt();
    let (price, delta, gamma) = match model.payoff {
        Payoff::Call { strike } => {
            let d_plus = (x / strike).ln() / sq + 0.5 * sq;
            let d_minus = d_plus - sq;
            let price = x * norm_cdf(d_plus) - strike * norm_cdf(d_minus);
            let delta = norm_cdf(d_plus);
            let gamma = norm_pdf(d_plus) / (x * sq);
            (price, delta, gamma)
        }
        Payoff::DigitalCall { strike } => {
            let d_plus = (x / strike).ln() / sq + 0.5 * sq;
            let d_minus = d_plus - sq;
            let price = norm_cdf(d_minus);
            let delta = norm_pdf(d_minus) / (x * sq);
            let gamma = -norm_pdf(d_minus) * d_plus / (x * x * sq * sq);
            (price, delta, gamma)
        }
        Payoff::ExchangeBinary => {
            return Err(Error::input("exchange binary payoff on a one-asset model"))
        }
    };
    Ok(GreekBundle {
        price,
        delta: vec![delta],
        gamma: SymMatrix::new(1, vec![gamma])?,
        valid_at: t,
    })
}

/// Greeks for the model's payoff at `(t, s)`.
pub fn greeks(model: &MarketModel, t: f64, s: &[f64]) -> Result<GreekBundle> {
    match model.payoff {
        Payoff::ExchangeBinary => greeks_exchange_binary(model, t, s),
        Payoff::Call { .. } | Payoff::DigitalCall { .. } => greeks_vanilla(model, t, s[0]),
    }
}

/// The rescaled gamma `c = sigma(s)^T Gamma sigma(s)`, symmetrized.
pub fn gamma_to_c(model: &MarketModel, s: &[f64], bundle: &GreekBundle) -> Result<SymMatrix> {
    let sigma = sigma_matrix(model, s)?;
    let c = sigma.transpose().matmul(&bundle.gamma.as_square()).matmul(&sigma);
    Ok(SymMatrix::symmetrize(&c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    pub fn paper_two_asset() -> MarketModel {
        MarketModel::new(
            vec![100.0, 100.0],
            VolParams::Two { sigma1: 0.3, sigma2: 0.4, rho: 0.5 },
            1.0,
            Payoff::ExchangeBinary,
        )
        .unwrap()
    }

    fn call_model(strike: f64, sigma: f64) -> MarketModel {
        MarketModel::new(vec![100.0], VolParams::One { sigma }, 1.0, Payoff::Call { strike })
            .unwrap()
    }

    #[test]
    fn norm_cdf_reference_values() {
        // Abramowitz-Stegun style reference points.
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.0) - 0.8413447460685429).abs() < 1e-15);
        assert!((norm_cdf(-1.959963984540054) - 0.025).abs() < 1e-15);
        assert!((norm_cdf(3.0) - 0.9986501019683699).abs() < 1e-15);
        assert_eq!(norm_cdf(50.0), 1.0);
        assert_eq!(norm_cdf(-50.0), norm_cdf(-39.0));
    }

    #[test]
    fn sigma_matrix_values() {
        let m1 = MarketModel::new(
            vec![100.0],
            VolParams::One { sigma: 0.3 },
            1.0,
            Payoff::Call { strike: 100.0 },
        )
        .unwrap();
        let sig = sigma_matrix(&m1, &[100.0]).unwrap();
        assert_eq!(sig.get(0, 0), 30.0);

        let m2 = paper_two_asset();
        let sig = sigma_matrix(&m2, &[100.0, 100.0]).unwrap();
        assert_eq!(sig.get(0, 0), 30.0);
        assert_eq!(sig.get(0, 1), 0.0);
        assert_eq!(sig.get(1, 0), 20.0);
        assert!((sig.get(1, 1) - 34.64101615137754).abs() < 1e-12);

        // Triangular determinant is positive whenever |rho| < 1 and s > 0.
        let det = sig.get(0, 0) * sig.get(1, 1) - sig.get(0, 1) * sig.get(1, 0);
        assert!(det > 0.0);
        assert!(sigma_matrix(&m2, &[100.0, -1.0]).is_err());
    }

    #[test]
    fn exchange_binary_price_at_the_money() {
        let m = paper_two_asset();
        let b = greeks_exchange_binary(&m, 0.0, &[100.0, 100.0]).unwrap();
        // d = 0.035 / sqrt(0.13); N(d) computed independently.
        let d = 0.035 / 0.13f64.sqrt();
        assert!((b.price - norm_cdf(d)).abs() < 1e-15);
        assert!((b.price - 0.538668).abs() < 5e-7);
        assert!(b.price >= 0.0 && b.price <= 1.0);
    }

    #[test]
    fn exchange_binary_deep_in_the_money() {
        let m = paper_two_asset();
        let b = greeks_exchange_binary(&m, 0.0, &[200.0, 100.0]).unwrap();
        let d = (2.0f64.ln() + 0.035) / 0.13f64.sqrt();
        assert!((b.price - norm_cdf(d)).abs() < 1e-15);
        assert!((b.price - 0.978).abs() < 5e-4);
    }

    #[test]
    fn exchange_binary_indicator_limit_near_maturity() {
        let m = paper_two_asset();
        let b = greeks_exchange_binary(&m, 1.0 - 1e-9, &[110.0, 100.0]).unwrap();
        assert!((b.price - 1.0).abs() < 1e-12);
        assert!(b.gamma.frobenius_norm() < 1e-12);

        let b = greeks_exchange_binary(&m, 1.0 - 1e-9, &[100.0, 110.0]).unwrap();
        assert!(b.price < 1e-12);
        assert!(b.gamma.frobenius_norm() < 1e-12);
    }

    #[test]
    fn exchange_binary_rejects_maturity_and_bad_prices() {
        let m = paper_two_asset();
        assert!(matches!(
            greeks_exchange_binary(&m, 1.0, &[100.0, 100.0]),
            Err(Error::Maturity { .. })
        ));
        assert!(greeks_exchange_binary(&m, 0.5, &[0.0, 100.0]).is_err());
    }

    #[test]
    fn exchange_binary_price_matches_monte_carlo() {
        let m = paper_two_asset();
        let bundle = greeks_exchange_binary(&m, 0.0, &[100.0, 100.0]).unwrap();

        // Independent terminal-law oracle: exact log-normal draws at T.
        let mut rng = StdRng::seed_from_u64(20130405);
        let n = 200_000;
        let mut hits = 0u64;
        for _ in 0..n {
            let z1: f64 = rng.sample(rand_distr::StandardNormal);
            let z2: f64 = rng.sample(rand_distr::StandardNormal);
            let s1 = 100.0 * (-0.5 * 0.09 + 0.3 * z1).exp();
            let s2 = 100.0 * (-0.5 * 0.16 + 0.4 * (0.5 * z1 + 0.75f64.sqrt() * z2)).exp();
            if s1 >= s2 {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / n as f64;
        let se = (p_hat * (1.0 - p_hat) / n as f64).sqrt();
        assert!(
            (bundle.price - p_hat).abs() <= 3.0 * se,
            "closed form {} vs MC {} (se {})",
            bundle.price,
            p_hat,
            se
        );
    }

    #[test]
    fn exchange_binary_symmetry() {
        // Complementary indicator events: swapping the assets (and their
        // volatilities) negates the log-ratio law.
        let m = paper_two_asset();
        let swapped = MarketModel::new(
            vec![100.0, 100.0],
            VolParams::Two { sigma1: 0.4, sigma2: 0.3, rho: 0.5 },
            1.0,
            Payoff::ExchangeBinary,
        )
        .unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let a = rng.gen_range(50.0..150.0);
            let b = rng.gen_range(50.0..150.0);
            let t = rng.gen_range(0.0..0.99);
            let p1 = greeks_exchange_binary(&m, t, &[a, b]).unwrap().price;
            let p2 = greeks_exchange_binary(&swapped, t, &[b, a]).unwrap().price;
            assert!((p1 + p2 - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn exchange_binary_gamma_not_psd_on_the_diagonal() {
        let m = paper_two_asset();
        for k in 0..=10 {
            let t = 0.05 * k as f64;
            let b = greeks_exchange_binary(&m, t, &[100.0, 100.0]).unwrap();
            let spec = crate::symmat::eigh_sym(&b.gamma).unwrap();
            assert!(
                spec.min_eigenvalue() < -1e-12,
                "gamma unexpectedly PSD at t = {t}: {:?}",
                spec.eigenvalues
            );
        }
    }

    fn fd_check(model: &MarketModel, t: f64, s: &[f64]) {
        let dim = s.len();
        let bundle = greeks(model, t, s).unwrap();
        for i in 0..dim {
            let h = 1e-4 * s[i];
            let mut up = s.to_vec();
            let mut dn = s.to_vec();
            up[i] += h;
            dn[i] -= h;
            let pu = greeks(model, t, &up).unwrap().price;
            let pd = greeks(model, t, &dn).unwrap().price;
            let fd_delta = (pu - pd) / (2.0 * h);
            let scale = bundle.delta[i].abs().max(1e-12);
            assert!(
                (bundle.delta[i] - fd_delta).abs() / scale <= 1e-5,
                "delta[{i}] {} vs fd {}",
                bundle.delta[i],
                fd_delta
            );
            for j in 0..dim {
                let du = greeks(model, t, &up).unwrap().delta[j];
                let dd = greeks(model, t, &dn).unwrap().delta[j];
                let fd_gamma = (du - dd) / (2.0 * h);
                let scale = bundle.gamma.get(i, j).abs().max(1e-9);
                assert!(
                    (bundle.gamma.get(j, i) - fd_gamma).abs() / scale <= 1e-5,
                    "gamma[{j}][{i}] {} vs fd {}",
                    bundle.gamma.get(j, i),
                    fd_gamma
                );
            }
        }
    }

    #[test]
    fn greeks_match_finite_differences() {
        let m2 = paper_two_asset();
        fd_check(&m2, 0.0, &[100.0, 100.0]);
        fd_check(&m2, 0.5, &[120.0, 90.0]);
        fd_check(&m2, 0.9, &[95.0, 100.0]);

        let call = call_model(100.0, 0.2);
        fd_check(&call, 0.0, &[100.0]);
        fd_check(&call, 0.7, &[130.0]);

        let digital = MarketModel::new(
            vec![100.0],
            VolParams::One { sigma: 0.25 },
            1.0,
            Payoff::DigitalCall { strike: 105.0 },
        )
        .unwrap();
        fd_check(&digital, 0.0, &[100.0]);
        fd_check(&digital, 0.5, &[110.0]);
    }

    #[test]
    fn call_delta_reference_value() {
        // At x = K, sigma = 0.2, tau = 1: delta = N(0.1).
        let m = call_model(100.0, 0.2);
        let b = greeks_vanilla(&m, 0.0, 100.0).unwrap();
        assert!((b.delta[0] - norm_cdf(0.1)).abs() < 1e-15);
        assert!((b.delta[0] - 0.539828).abs() < 5e-7);
    }

    #[test]
    fn call_limits_deep_in_the_money() {
        let m = call_model(100.0, 0.2);
        let b = greeks_vanilla(&m, 0.0, 1.0e6).unwrap();
        assert!((b.delta[0] - 1.0).abs() < 1e-12);
        assert!(b.gamma.get(0, 0) < 1e-12);
    }

    #[test]
    fn martingale_pricing_one_asset() {
        // Monte Carlo terminal draws reprice the closed forms within 3 SE.
        let call = call_model(100.0, 0.2);
        let digital = MarketModel::new(
            vec![100.0],
            VolParams::One { sigma: 0.2 },
            1.0,
            Payoff::DigitalCall { strike: 100.0 },
        )
        .unwrap();
        let mut rng = StdRng::seed_from_u64(99);
        let n = 100_000;
        let mut sums = [0.0f64; 2];
        let mut sq = [0.0f64; 2];
        for _ in 0..n {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let st = 100.0 * (-0.5 * 0.04 + 0.2 * z).exp();
            for (k, m) in [&call, &digital].iter().enumerate() {
                let v = m.payoff_value(&[st]);
                sums[k] += v;
                sq[k] += v * v;
            }
        }
        for (k, m) in [&call, &digital].iter().enumerate() {
            let mean = sums[k] / n as f64;
            let var = (sq[k] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            let price = greeks(m, 0.0, &[100.0]).unwrap().price;
            assert!((price - mean).abs() <= 3.0 * se, "price {} vs MC {} (se {})", price, mean, se);
        }
    }

    #[test]
    fn gamma_to_c_values() {
        let m = paper_two_asset();
        let zero = GreekBundle {
            price: 0.5,
            delta: vec![0.0, 0.0],
            gamma: SymMatrix::zero(2),
            valid_at: 0.0,
        };
        let c = gamma_to_c(&m, &[100.0, 100.0], &zero).unwrap();
        assert_eq!(c.frobenius_norm(), 0.0);

        // 1D: c = sigma^2 s^2 Gamma.
        let m1 = call_model(100.0, 0.3);
        let b = greeks_vanilla(&m1, 0.0, 100.0).unwrap();
        let c = gamma_to_c(&m1, &[100.0], &b).unwrap();
        assert!((c.get(0, 0) - 900.0 * b.gamma.get(0, 0)).abs() < 1e-12 * 900.0);

        // Congruence preserves PSD.
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let a = rng.gen_range(-1.0..1.0);
            let b2 = rng.gen_range(-1.0..1.0);
            let c2 = rng.gen_range(-1.0..1.0);
            let g = SymMatrix::new(
                2,
                vec![a * a + 0.1, a * b2, a * b2, b2 * b2 + c2 * c2 + 0.1],
            )
            .unwrap();
            let bundle =
                GreekBundle { price: 0.5, delta: vec![0.0, 0.0], gamma: g, valid_at: 0.0 };
            let c = gamma_to_c(&m, &[80.0, 120.0], &bundle).unwrap();
            let lmin = crate::symmat::eigh_sym(&c).unwrap().min_eigenvalue();
            assert!(lmin >= -1e-9 * (1.0 + c.frobenius_norm()));
        }
    }

    #[test]
    fn model_validation() {
        assert!(MarketModel::new(
            vec![100.0, 100.0],
            VolParams::Two { sigma1: 0.3, sigma2: 0.4, rho: 1.0 },
            1.0,
            Payoff::ExchangeBinary
        )
        .is_err());
        assert!(MarketModel::new(
            vec![100.0],
            VolParams::One { sigma: 0.3 },
            1.0,
            Payoff::ExchangeBinary
        )
        .is_err());
        assert!(MarketModel::new(
            vec![-1.0],
            VolParams::One { sigma: 0.3 },
            1.0,
            Payoff::Call { strike: 100.0 }
        )
        .is_err());
    }
}
