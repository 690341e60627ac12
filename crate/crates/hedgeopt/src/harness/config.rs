//! Experiment configuration: a single strict JSON document.
//!
//! Unknown keys are rejected so typos in reruns fail loudly instead of
//! silently falling back to defaults. Defaults mirror the reference
//! two-asset exchange-binary experiment; the `paper` and `desk` presets pin
//! the two standard resolutions.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{MarketModel, Payoff, VolParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    ExchangeBinary,
    Call,
    DigitalCall,
}

/// Strategy selector. The declaration order here is the canonical column
/// order of the results CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Stochastic,
    Uniform,
    Fractional,
    Karandikar,
}

impl StrategyKind {
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::Stochastic => "stochastic",
            StrategyKind::Uniform => "uniform",
            StrategyKind::Fractional => "fractional",
            StrategyKind::Karandikar => "karandikar",
        }
    }
}

/// Named resolution presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// 50,000 mesh points, 1000 paths.
    Paper,
    /// 20,000 mesh points, 200 paths.
    Desk,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Initial prices; one entry per asset (1 or 2).
    pub spot: Vec<f64>,
    /// Two-asset volatilities and correlation.
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub rho: Option<f64>,
    /// One-asset volatility.
    pub sigma: Option<f64>,
    /// Maturity in years.
    pub maturity: f64,
    pub payoff: PayoffKind,
    pub strike: Option<f64>,
    /// Ellipsoid threshold.
    pub epsilon: f64,
    /// Ellipsoid regularization weight.
    pub mu: f64,
    /// Thin-mesh resolution.
    pub n_bar: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub strategies: Vec<StrategyKind>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            spot: vec![100.0, 100.0],
            sigma1: Some(0.3),
            sigma2: Some(0.4),
            rho: Some(0.5),
            sigma: None,
            maturity: 1.0,
            payoff: PayoffKind::ExchangeBinary,
            strike: None,
            epsilon: 0.05,
            mu: 0.0,
            n_bar: 50_000,
            n_paths: 1_000,
            seed: 1,
            strategies: vec![
                StrategyKind::Stochastic,
                StrategyKind::Uniform,
                StrategyKind::Fractional,
            ],
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        match preset {
            Preset::Paper => {
                self.n_bar = 50_000;
                self.n_paths = 1_000;
            }
            Preset::Desk => {
                self.n_bar = 20_000;
                self.n_paths = 200;
            }
        }
    }

    /// Requested strategies in canonical order, deduplicated.
    pub fn strategy_set(&self) -> Vec<StrategyKind> {
        let mut set = self.strategies.clone();
        set.sort();
        set.dedup();
        set
    }

    pub fn validate(&self) -> Result<()> {
        self.to_model()?;
        if !(self.epsilon > 0.0) {
            return Err(Error::input(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::input(format!("mu must be nonnegative, got {}", self.mu)));
        }
        if self.n_bar < 2 {
            return Err(Error::input(format!("n_bar must be at least 2, got {}", self.n_bar)));
        }
        if self.n_paths == 0 {
            return Err(Error::input("n_paths must be at least 1"));
        }
        if self.strategies.is_empty() {
            return Err(Error::input("at least one strategy must be requested"));
        }
        Ok(())
    }

    /// Build the validated market model described by this configuration.
    pub fn to_model(&self) -> Result<MarketModel> {
        let payoff = match self.payoff {
            PayoffKind::ExchangeBinary => {
                if self.strike.is_some() {
                    return Err(Error::input("exchange binary payoff takes no strike"));
                }
                Payoff::ExchangeBinary
            }
            PayoffKind::Call => Payoff::Call {
                strike: self
                    .strike
                    .ok_or_else(|| Error::input("call payoff requires a strike"))?,
            },
            PayoffKind::DigitalCall => Payoff::DigitalCall {
                strike: self
                    .strike
                    .ok_or_else(|| Error::input("digital call payoff requires a strike"))?,
            },
        };
        let vol = match self.spot.len() {
            1 => {
                let sigma =
                    self.sigma.ok_or_else(|| Error::input("one-asset model requires sigma"))?;
                if self.sigma1.is_some() || self.sigma2.is_some() || self.rho.is_some() {
                    return Err(Error::input(
                        "one-asset model takes sigma only (sigma1/sigma2/rho are two-asset)",
                    ));
                }
                VolParams::One { sigma }
            }
            2 => {
                let (Some(sigma1), Some(sigma2), Some(rho)) = (self.sigma1, self.sigma2, self.rho)
                else {
                    return Err(Error::input("two-asset model requires sigma1, sigma2 and rho"));
                };
                if self.sigma.is_some() {
                    return Err(Error::input("two-asset model takes sigma1/sigma2/rho, not sigma"));
                }
                VolParams::Two { sigma1, sigma2, rho }
            }
            n => return Err(Error::input(format!("expected 1 or 2 spot prices, got {n}"))),
        };
        MarketModel::new(self.spot.clone(), vol, self.maturity, payoff)
    }
}
