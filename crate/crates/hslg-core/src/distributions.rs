//! Model parameters and the elementary laws: Gamma draws, log-inverse-gamma
//! weights, the symmetric increment density f_θ, and the boundary density g_α.

use crate::rng::Gen;
use crate::special::ln_gamma;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("theta must be positive, got {0}")]
    NonPositiveTheta(f64),
    #[error("alpha must exceed -theta, got alpha = {alpha}, theta = {theta}")]
    AlphaTooSmall { alpha: f64, theta: f64 },
    #[error("parameter must be finite")]
    NonFinite,
}

/// Bulk parameter θ > 0 and boundary parameter α > −θ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PolymerParams {
    theta: f64,
    alpha: f64,
}

impl PolymerParams {
    pub fn new(theta: f64, alpha: f64) -> Result<Self, ParamError> {
        if !theta.is_finite() || !alpha.is_finite() {
            return Err(ParamError::NonFinite);
        }
        if theta <= 0.0 {
            return Err(ParamError::NonPositiveTheta(theta));
        }
        if alpha <= -theta {
            return Err(ParamError::AlphaTooSmall { alpha, theta });
        }
        Ok(PolymerParams { theta, alpha })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Unbound phase: α > 0.
    pub fn unbound(&self) -> bool {
        self.alpha > 0.0
    }
}

impl<'de> Deserialize<'de> for PolymerParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            theta: f64,
            alpha: f64,
        }
        let raw = Raw::deserialize(d)?;
        PolymerParams::new(raw.theta, raw.alpha).map_err(serde::de::Error::custom)
    }
}

/// One Gamma(shape, 1) draw (Marsaglia–Tsang, with the uniform boost below
/// shape 1, via rand_distr).
pub fn sample_gamma(shape: f64, g: &mut Gen) -> f64 {
    assert!(shape > 0.0 && shape.is_finite(), "sample_gamma: non-positive shape {shape}");
    Gamma::new(shape, 1.0).unwrap().sample(g)
}

/// log W for an inverse-gamma weight W with density Γ(β)⁻¹ x^{−β−1} e^{−1/x}:
/// W = 1/G with G ~ Gamma(β, 1), so the draw is −log G.
pub fn sample_log_inv_gamma(beta: f64, g: &mut Gen) -> f64 {
    -sample_gamma(beta, g).ln()
}

/// Density of log A − log B for A, B iid Gamma(θ, 1):
/// f_θ(x) = Γ(2θ)/Γ(θ)² · (e^{−x/2} + e^{x/2})^{−2θ}. Symmetric in x.
pub fn density_f_theta(x: f64, theta: f64) -> f64 {
    assert!(theta > 0.0, "density_f_theta: non-positive theta");
    let ln_c = ln_gamma(2.0 * theta) - 2.0 * ln_gamma(theta);
    // ln(e^{-x/2} + e^{x/2}) = |x|/2 + ln(1 + e^{-|x|}), symmetric by construction
    let ln_cosh_like = 0.5 * x.abs() + (-x.abs()).exp().ln_1p();
    (ln_c - 2.0 * theta * ln_cosh_like).exp()
}

/// One f_θ increment: log A − log B, A, B iid Gamma(θ, 1).
pub fn sample_f_theta(theta: f64, g: &mut Gen) -> f64 {
    let a = sample_gamma(theta, g);
    let b = sample_gamma(theta, g);
    a.ln() - b.ln()
}

/// Density of log G for G ~ Gamma(α, 1): g_α(x) = Γ(α)⁻¹ e^{αx − e^x}.
pub fn density_g_alpha(x: f64, alpha: f64) -> f64 {
    assert!(alpha > 0.0, "density_g_alpha: non-positive alpha");
    (alpha * x - x.exp() - ln_gamma(alpha)).exp()
}

/// One g_α draw: log of a Gamma(α, 1) variable.
pub fn sample_g_alpha(alpha: f64, g: &mut Gen) -> f64 {
    assert!(alpha > 0.0, "sample_g_alpha: non-positive alpha");
    sample_gamma(alpha, g).ln()
}

/// Uniform in [0, 1).
pub fn sample_uniform(g: &mut Gen) -> f64 {
    g.gen::<f64>()
}
