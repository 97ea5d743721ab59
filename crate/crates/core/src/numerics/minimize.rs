use crate::error::{Error, Result};

use super::ToleranceConfig;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the minimizer of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `abs_tol`.
pub fn minimize_1d<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: &ToleranceConfig,
) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::Domain(format!(
            "minimize_1d requires lo < hi, got [{lo}, {hi}]"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..tol.max_iter {
        if b - a <= tol.abs_tol {
            return Ok(if f1 <= f2 { x1 } else { x2 });
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    Err(Error::NonConvergence {
        what: "golden-section search",
        iterations: tol.max_iter,
    })
}
