//! Closed-form pair-level objects of the two-sided bargaining model.
//!
//! Everything here is a pure function of a bilateral share pair and a
//! validated [`ModelParams`]. Parameter admissibility is checked once, when
//! the parameter vector is built, so the evaluation functions themselves are
//! infallible.
//!
//! Two of the closed forms are `0/0` at a zero share (the oligopsony markdown
//! at `x = 0` and the leverage scalar at `s = 0`). Below [`SERIES_THRESHOLD`]
//! they are evaluated through a three-term expansion of `(1 - t)^a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Share value below which the series branches are used.
pub const SERIES_THRESHOLD: f64 = 1e-6;

/// Structural parameters `(rho, eta, theta, phi, gamma, nu)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    rho: f64,
    eta: f64,
    theta: f64,
    phi: f64,
    gamma: f64,
    nu: f64,
}

/// Serialized form; `eta` may be omitted and is then derived from `gamma` and `nu`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct RawParams {
    rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    theta: f64,
    phi: f64,
    gamma: f64,
    nu: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        match raw.eta {
            Some(eta) => ModelParams::new(raw.rho, eta, raw.theta, raw.phi, raw.gamma, raw.nu),
            None => ModelParams::from_primitives(raw.rho, raw.theta, raw.phi, raw.gamma, raw.nu),
        }
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            rho: p.rho,
            eta: Some(p.eta),
            theta: p.theta,
            phi: p.phi,
            gamma: p.gamma,
            nu: p.nu,
        }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::calibrated()
    }
}

impl ModelParams {
    /// Builds a parameter vector with `eta` supplied directly.
    pub fn new(rho: f64, eta: f64, theta: f64, phi: f64, gamma: f64, nu: f64) -> Result<Self> {
        let p = ModelParams {
            rho,
            eta,
            theta,
            phi,
            gamma,
            nu,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds a parameter vector with `eta = 1 - gamma + nu * gamma`.
    pub fn from_primitives(rho: f64, theta: f64, phi: f64, gamma: f64, nu: f64) -> Result<Self> {
        Self::new(rho, 1.0 - gamma + nu * gamma, theta, phi, gamma, nu)
    }

    /// Baseline calibration: `rho = 7`, `eta = 2.5`, `theta = 0.75`, `phi = 0.5`.
    ///
    /// `gamma = 1` and `nu = 2.5` are the primitives consistent with `eta = 2.5`.
    pub fn calibrated() -> Self {
        ModelParams {
            rho: 7.0,
            eta: 2.5,
            theta: 0.75,
            phi: 0.5,
            gamma: 1.0,
            nu: 2.5,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |name, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, v, "must be finite"))
            }
        };
        finite("rho", self.rho)?;
        finite("eta", self.eta)?;
        finite("theta", self.theta)?;
        finite("phi", self.phi)?;
        finite("gamma", self.gamma)?;
        finite("nu", self.nu)?;
        if self.rho <= 1.0 {
            return Err(Error::param("rho", self.rho, "must exceed 1"));
        }
        if self.nu <= 1.0 {
            return Err(Error::param("nu", self.nu, "must exceed 1"));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::param("theta", self.theta, "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return Err(Error::param("phi", self.phi, "must lie in [0, 1]"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::param("gamma", self.gamma, "must lie in (0, 1]"));
        }
        if self.eta <= 1.0 {
            return Err(Error::param("eta", self.eta, "must exceed 1"));
        }
        if self.rho < self.eta {
            return Err(Error::param("eta", self.eta, "must not exceed rho"));
        }
        Ok(())
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Copy with a different importer bargaining weight.
    pub fn with_phi(&self, phi: f64) -> Result<Self> {
        let mut p = *self;
        p.phi = phi;
        p.validate()?;
        Ok(p)
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        let mut p = *self;
        p.theta = theta;
        p.validate()?;
        Ok(p)
    }
}

/// Bilateral shares of one importer-exporter match.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairShares {
    /// Exporter's share of the importer's expenditure.
    pub s: f64,
    /// Importer's share of the exporter's physical quantity.
    pub x: f64,
    /// Importer's share of the exporter's revenue.
    pub x_r: f64,
}

impl PairShares {
    pub fn new(s: f64, x: f64, x_r: f64) -> Result<Self> {
        for (name, v) in [("s", s), ("x", x), ("x_r", x_r)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidShare { name, value: v });
            }
        }
        Ok(PairShares { s, x, x_r })
    }
}

/// Every component of a bilateral markup evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MarkupRecord {
    pub mu: f64,
    pub mu_olig: f64,
    pub mu_oligopsony: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub omega: f64,
}

/// `rho (1 - s) + eta s`.
pub fn residual_demand_elasticity(s: f64, p: &ModelParams) -> f64 {
    debug_assert!((0.0..=1.0).contains(&s));
    p.rho * (1.0 - s) + p.eta * s
}

/// Oligopoly benchmark `eps / (eps - 1)`.
///
/// `eps > 1` for every admissible parameter vector since `eps >= eta > 1`.
pub fn oligopoly_markup(s: f64, p: &ModelParams) -> f64 {
    let eps = residual_demand_elasticity(s, p);
    eps / (eps - 1.0)
}

/// Oligopsony benchmark `theta (1 - (1 - x)^(1/theta)) / x`, with limit 1 at `x = 0`.
pub fn oligopsony_markdown(x: f64, p: &ModelParams) -> f64 {
    debug_assert!((0.0..=1.0).contains(&x));
    if x < SERIES_THRESHOLD {
        markdown_series(x, p.theta)
    } else {
        markdown_closed(x, p.theta)
    }
}

fn markdown_closed(x: f64, theta: f64) -> f64 {
    let a = 1.0 / theta;
    theta * -(a * (-x).ln_1p()).exp_m1() / x
}

fn markdown_series(x: f64, theta: f64) -> f64 {
    let a = 1.0 / theta;
    1.0 - (a - 1.0) / 2.0 * x + (a - 1.0) * (a - 2.0) / 6.0 * x * x
}

/// Leverage scalar `s / (1 - (1 - s)^b) * (eta - 1) / (eps - 1)` with
/// `b = (eta - 1) / (rho - 1)`. Equals 1 in both limits `s -> 0` and `s = 1`.
pub fn leverage_lambda(s: f64, p: &ModelParams) -> f64 {
    debug_assert!((0.0..=1.0).contains(&s));
    if s >= 1.0 {
        return 1.0;
    }
    let b = (p.eta - 1.0) / (p.rho - 1.0);
    let ratio = if s < SERIES_THRESHOLD {
        lambda_ratio_series(s, b)
    } else {
        lambda_ratio_closed(s, b)
    };
    ratio * (p.eta - 1.0) / (residual_demand_elasticity(s, p) - 1.0)
}

fn lambda_ratio_closed(s: f64, b: f64) -> f64 {
    s / -(b * (-s).ln_1p()).exp_m1()
}

fn lambda_ratio_series(s: f64, b: f64) -> f64 {
    1.0 / (b * (1.0 - (b - 1.0) / 2.0 * s + (b - 1.0) * (b - 2.0) / 6.0 * s * s))
}

/// Effective weight `omega` for a given leverage and baseline weight.
///
/// `phi = 0` and `phi = 1` are returned as exact limits.
pub fn weight_from_lambda(lambda: f64, phi: f64) -> f64 {
    if phi <= 0.0 {
        0.0
    } else if phi >= 1.0 {
        1.0
    } else {
        let r = phi / (1.0 - phi) * lambda;
        r / (1.0 + r)
    }
}

pub fn effective_weight(s: f64, p: &ModelParams) -> f64 {
    weight_from_lambda(leverage_lambda(s, p), p.phi)
}

pub fn bilateral_markup(shares: PairShares, p: &ModelParams) -> MarkupRecord {
    bilateral_markup_at(shares.s, shares.x, p, p.phi)
}

/// Bilateral markup with the bargaining weight overridden by `phi`.
///
/// Used by the estimator, which sweeps `phi` with every other parameter held
/// at its calibrated value.
pub fn bilateral_markup_at(s: f64, x: f64, p: &ModelParams, phi: f64) -> MarkupRecord {
    let epsilon = residual_demand_elasticity(s, p);
    let mu_olig = epsilon / (epsilon - 1.0);
    let mu_oligopsony = oligopsony_markdown(x, p);
    let lambda = leverage_lambda(s, p);
    let omega = weight_from_lambda(lambda, phi);
    MarkupRecord {
        mu: (1.0 - omega) * mu_olig + omega * mu_oligopsony,
        mu_olig,
        mu_oligopsony,
        epsilon,
        lambda,
        omega,
    }
}

/// Inverse residual supply elasticity `(1 - theta) / theta * x`.
pub fn inverse_supply_elasticity(x: f64, p: &ModelParams) -> f64 {
    (1.0 - p.theta) / p.theta * x
}
