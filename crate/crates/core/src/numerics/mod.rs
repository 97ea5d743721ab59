//! Numerical building blocks shared by every other module: special functions,
//! quadrature, root finding, 1-D minimization and reproducible random streams.

pub mod minimize;
pub mod quadrature;
pub mod rng;
pub mod roots;
pub mod special;

pub use minimize::minimize_1d;
pub use quadrature::integrate;
pub use rng::{RandomStream, StreamRng};
pub use roots::find_root;
pub use special::{
    erf, erfc, erfcx, ln_gamma, ln_normal_interval_prob, normal_interval_prob, reg_lower_inc_gamma,
    std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf, truncated_normal_mean,
};

use crate::error::{Error, Result};

/// Convergence controls for the iterative routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_iter: 200,
        }
    }
}

impl ToleranceConfig {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self> {
        let cfg = Self {
            abs_tol,
            rel_tol,
            max_iter,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Domain(format!(
                "tolerances must be positive and max_iter >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn with_abs_tol(self, abs_tol: f64) -> Self {
        Self { abs_tol, ..self }
    }

    pub fn with_max_iter(self, max_iter: usize) -> Self {
        Self { max_iter, ..self }
    }
}
