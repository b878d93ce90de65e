use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Hausdorff dimension `log 3 / log 2` of the gasket.
pub fn hausdorff_dim() -> f64 {
    3f64.log2()
}

/// Walk dimension `log 5 / log 2` of the gasket.
pub fn walk_dim() -> f64 {
    5f64.log2()
}

/// Stability index `alpha` and the subordinator index `beta = alpha / d_w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StableParams {
    pub alpha: f64,
    pub beta: f64,
}

impl StableParams {
    /// Accepts `0 < alpha <= d_w`; `alpha = d_w` is the plain walk.
    pub fn new(alpha: f64) -> Result<Self> {
        let dw = walk_dim();
        if !(alpha > 0.0 && alpha <= dw) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} must lie in (0, {dw:.6}]"
            )));
        }
        let beta = if alpha == dw { 1.0 } else { (alpha / dw).min(1.0) };
        Ok(Self { alpha, beta })
    }

    /// Parameters for a boundary Harnack run, which needs `0 < alpha < 1`.
    pub fn for_bhi(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} is outside (0, 1), the range where the boundary Harnack \
                 inequality is asserted"
            )));
        }
        Self::new(alpha)
    }

    pub fn from_beta(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta} must lie in (0, 1]")));
        }
        Ok(Self {
            alpha: beta * walk_dim(),
            beta,
        })
    }

    pub fn in_bhi_range(&self) -> bool {
        self.alpha > 0.0 && self.alpha < 1.0
    }

    /// Tail constant `alpha / (2 Gamma(1 - alpha/d_w))` of the subordinator
    /// density as stated for the gasket process.
    pub fn a_alpha(&self) -> f64 {
        self.alpha / (2.0 * gamma(1.0 - self.beta))
    }

    /// Tail constant `beta / Gamma(1 - beta)` of the density of a one-sided
    /// stable law with Laplace transform `exp(-s^beta)`.
    pub fn tail_constant(&self) -> f64 {
        self.beta / gamma(1.0 - self.beta)
    }

    /// Continuum duration of one jump of the level-`k` chain, `2^(-k alpha)`.
    pub fn time_per_jump(&self, level: u32) -> f64 {
        (-(level as f64) * self.alpha).exp2()
    }
}
