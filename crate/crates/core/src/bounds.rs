//! Performance bounds and regime boundaries.
//!
//! All values are normalized mean-squared errors (MSE divided by `delta^2`) and
//! depend on the noise only through `r = sigma_z / delta`.

use std::fmt;

use crate::error::{Error, Result};
use crate::ggapprox::{beta_coefficient, fit_shape, nvar_ggml};
use crate::numerics::std_normal_cdf;
use crate::numerics::{
    find_root, integrate, minimize_1d, std_normal_pdf, truncated_normal_mean, ToleranceConfig,
};

/// Standard deviations of padding around the bin when integrating the Fisher information.
const FISHER_PAD: f64 = 8.0;

fn quad_tol() -> ToleranceConfig {
    ToleranceConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_iter: 2000,
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    Ok(())
}

/// `(r^2 + 1/12) / K`: the sample mean of dithered measurements.
pub fn nmse_mean(r: f64, k: usize) -> f64 {
    (r * r + 1.0 / 12.0) / k as f64
}

/// `1 / (2 (K+1) (K+2))`: the midrange under uniform noise.
pub fn nmse_mid(k: usize) -> f64 {
    let k = k as f64;
    1.0 / (2.0 * (k + 1.0) * (k + 2.0))
}

/// Fisher information of one dithered measurement about the location, in
/// units of `1 / delta^2`, times `r^2`.
fn scaled_fisher_information(r: f64) -> Result<f64> {
    let integrand = |u: f64| {
        let a = (u - 0.5) / r;
        let b = (u + 0.5) / r;
        let d = std_normal_pdf(a) - std_normal_pdf(b);
        if d == 0.0 {
            0.0
        } else {
            truncated_normal_mean(a, b) * d
        }
    };
    // even integrand; split at the bin edge where it peaks for small r
    let edge = 0.5;
    let outer = 0.5 + FISHER_PAD * r;
    let tol = quad_tol();
    Ok(2.0 * (integrate(integrand, 0.0, edge, &tol)? + integrate(integrand, edge, outer, &tol)?))
}

/// Normalized Cramér–Rao bound for `K` dithered measurements.
pub fn ncrb(r: f64, k: usize) -> Result<f64> {
    check_k(k)?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!(
            "the Cramér–Rao bound needs r > 0, got {r}"
        )));
    }
    Ok(r * r / scaled_fisher_information(r)? / k as f64)
}

/// Expected NMSE of the quantized-sample mean (no dither), averaged over a
/// location uniform on one bin.
///
/// With `Psi(m, x)` the probability that the quantizer outputs level `m` for
/// location `x`, the value is
/// `1/12 + (1/K) int sum m^2 Psi + ((K-1)/K) int (sum m Psi)^2 - 2 int x sum m Psi`
/// over `x` in `[-1/2, 1/2]`, with levels truncated at `|m| <= ceil(1 + 6 r)`.
pub fn nmse_q(r: f64, k: usize) -> Result<f64> {
    check_k(k)?;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!(
            "r must be finite and nonnegative, got {r}"
        )));
    }
    if r == 0.0 {
        return Ok(1.0 / 12.0);
    }
    let levels = (1.0 + 6.0 * r).ceil() as i64;
    let kf = k as f64;
    let integrand = |x: f64| {
        let (mut s1, mut s2) = (0.0, 0.0);
        for m in -levels..=levels {
            let m = m as f64;
            let psi = std_normal_cdf((m + 0.5 - x) / r) - std_normal_cdf((m - 0.5 - x) / r);
            s1 += m * psi;
            s2 += m * m * psi;
        }
        s2 / kf + (kf - 1.0) / kf * s1 * s1 - 2.0 * x * s1
    };
    // the integrand is even in x
    let half = integrate(integrand, 0.0, 0.5, &quad_tol())?;
    Ok(1.0 / 12.0 + 2.0 * half)
}

/// Uniform/mixed boundary: the ratio where the midrange NMSE meets the GGML
/// asymptotic variance with the kurtosis-matched shape.
pub fn xi1(k: usize) -> Result<f64> {
    if k < 3 {
        return Err(Error::Domain(format!("xi1 is defined for K >= 3, got {k}")));
    }
    let kf = k as f64;
    let target = 0.5 * kf / (kf * kf + 3.0 * kf + 2.0);
    let f = |r: f64| beta_coefficient(fit_shape(r).p_hat) * (r * r + 1.0 / 12.0) - target;
    let tol = ToleranceConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_iter: 200,
    };
    find_root(f, 1e-6, 1.0, &tol)
}

/// Log-log-cubic fit of [`xi1`].
pub fn xi1_fit_cubic(k: usize) -> f64 {
    let l = (k as f64).ln();
    (0.0104 * l.powi(3) - 0.1760 * l * l + 0.0274 * l - 1.8511).exp()
}

/// Power-law fit of [`xi1`], intended for `K > 20`.
pub fn xi1_fit_linear(k: usize) -> f64 {
    0.8217 * (k as f64).powf(-0.9301)
}

/// Mixed/Gaussian boundary: the ratio minimizing [`nmse_q`] on `[0.05, 1]`.
pub fn xi2(k: usize) -> Result<f64> {
    if k < 3 {
        return Err(Error::Domain(format!("xi2 is defined for K >= 3, got {k}")));
    }
    let mut failure = None;
    let f = |r: f64| match nmse_q(r, k) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::INFINITY
        }
    };
    let tol = ToleranceConfig {
        abs_tol: 1e-4,
        rel_tol: 0.0,
        max_iter: 100,
    };
    let r = minimize_1d(f, 0.05, 1.0, &tol)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

/// Square-root-of-log-quadratic fit of [`xi2`], as published. Its scale does
/// not match the exact boundary; it is reported alongside, never substituted.
pub fn xi2_fit(k: usize) -> Result<f64> {
    let l = (k as f64).ln();
    let radicand = -0.000756 * l * l + 0.328 * l;
    if !(radicand > 0.0) {
        return Err(Error::Domain(format!(
            "xi2 fit undefined at K = {k} (radicand {radicand})"
        )));
    }
    Ok(radicand.sqrt())
}

/// All bounds at one `(r, K)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCurve {
    pub r: f64,
    pub k: usize,
    pub nmse_mean: f64,
    pub nmse_mid: f64,
    pub nvar_ggml: f64,
    pub ncrb: f64,
    pub nmse_q: f64,
}

impl BoundCurve {
    pub fn compute(r: f64, k: usize) -> Result<Self> {
        Ok(Self {
            r,
            k,
            nmse_mean: nmse_mean(r, k),
            nmse_mid: nmse_mid(k),
            nvar_ggml: nvar_ggml(fit_shape(r).p_hat, r, k),
            ncrb: ncrb(r, k)?,
            nmse_q: nmse_q(r, k)?,
        })
    }

    pub const CSV_HEADER: &'static str = "r,K,nmse_mean,nmse_mid,nvar_ggml,ncrb,nmse_q";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            self.r, self.k, self.nmse_mean, self.nmse_mid, self.nvar_ggml, self.ncrb, self.nmse_q
        )
    }
}

/// The three noise regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Effectively uniform noise: midrange-like estimators win.
    I,
    /// Genuinely mixed noise.
    II,
    /// Effectively Gaussian noise: the mean is near optimal.
    III,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::I => "I",
            Regime::II => "II",
            Regime::III => "III",
        })
    }
}

/// Exact regime boundaries for one batch size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeBoundaries {
    pub k: usize,
    pub xi1: f64,
    pub xi2: f64,
}

impl RegimeBoundaries {
    pub fn compute(k: usize) -> Result<Self> {
        Ok(Self {
            k,
            xi1: xi1(k)?,
            xi2: xi2(k)?,
        })
    }

    pub fn regime(&self, r: f64) -> Regime {
        if r < self.xi1 {
            Regime::I
        } else if r < self.xi2 {
            Regime::II
        } else {
            Regime::III
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn closed_forms() {
        assert!(rel(nmse_mean(0.0, 125), 6.67e-4) < 1e-3);
        assert!(rel(nmse_mean(1.0, 125), 8.667e-3) < 1e-4);
        assert_eq!(nmse_mean(0.3, 50), 2.0 * nmse_mean(0.3, 100));
        assert!(rel(nmse_mid(125), 3.12e-5) < 2e-3);
        assert!((nmse_mid(1) - 1.0 / 12.0).abs() < 1e-16);
        assert!((nmse_mid(2) - 1.0 / 24.0).abs() < 1e-16);
    }

    #[test]
    fn ncrb_reference_values() {
        // scipy quad with breakpoints at the bin edges
        assert!(rel(ncrb(0.04, 1).unwrap(), 0.022_143_556_363) < 1e-8);
        assert!(rel(ncrb(0.4, 1).unwrap(), 0.242_300_876_7) < 1e-8);
        // large r: quantization adds the uniform variance on top of r^2
        assert!(rel(ncrb(2.0, 1).unwrap(), 4.083_333_16) < 1e-8);
        assert!(rel(ncrb(0.04, 125).unwrap(), ncrb(0.04, 1).unwrap() / 125.0) < 1e-14);
        assert!(ncrb(0.0, 5).is_err());
        assert!(ncrb(0.1, 0).is_err());
    }

    #[test]
    fn ncrb_below_mean() {
        for i in 0..=20 {
            let r = 0.01 * 200f64.powf(i as f64 / 20.0);
            assert!(ncrb(r, 10).unwrap() <= nmse_mean(r, 10), "r = {r}");
        }
    }

    #[test]
    fn nmse_q_limits() {
        assert_eq!(nmse_q(0.0, 25).unwrap(), 1.0 / 12.0);
        assert!((nmse_q(1e-4, 25).unwrap() - 1.0 / 12.0).abs() < 1e-6);
        assert!(rel(nmse_q(2.0, 25).unwrap(), 0.163_333_333_16) < 1e-8);
    }

    #[test]
    fn xi1_values() {
        for (k, expected) in [
            (5, 0.109_763_881),
            (25, 0.038_525_693),
            (125, 0.009_562_911),
        ] {
            let x = xi1(k).unwrap();
            assert!(rel(x, expected) < 1e-7, "K = {k}: {x}");
            let p = fit_shape(x).p_hat;
            assert!(rel(nvar_ggml(p, x, k), nmse_mid(k)) < 1e-8);
        }
        assert!(xi1(2).is_err());
    }

    #[test]
    fn xi2_values() {
        for (k, expected) in [(5, 0.229_613), (25, 0.313_144), (125, 0.373_707)] {
            let x = xi2(k).unwrap();
            assert!((x - expected).abs() < 2e-4, "K = {k}: {x}");
        }
    }

    #[test]
    fn fits() {
        for (k, cubic, quad) in [
            (5, 0.108_659_533_587_459, 0.725_215_40),
            (25, 0.039_179_023_209_861, 1.023_698_31),
            (125, 0.009_550_193_905_916, 1.251_424_22),
        ] {
            assert!(rel(xi1_fit_cubic(k), cubic) < 1e-7);
            assert!(rel(xi2_fit(k).unwrap(), quad) < 1e-7);
        }
        assert!(rel(xi1_fit_linear(125), 0.009_212_495) < 1e-7);
        assert!(rel(xi1_fit_linear(25), 0.041_161_319) < 1e-7);
        assert!(rel(xi1_fit_linear(40) / xi1_fit_linear(20), 2f64.powf(-0.9301)) < 1e-14);
        assert!(xi2_fit(1).is_err());
        let mut prev = f64::INFINITY;
        for k in 3..=10_000 {
            let v = xi1_fit_cubic(k);
            assert!(v < prev, "K = {k}");
            prev = v;
        }
    }

    #[test]
    fn regimes() {
        let b = RegimeBoundaries {
            k: 25,
            xi1: 0.0385,
            xi2: 0.3132,
        };
        assert_eq!(b.regime(0.001), Regime::I);
        assert_eq!(b.regime(0.0385), Regime::II);
        assert_eq!(b.regime(0.2), Regime::II);
        assert_eq!(b.regime(0.3132), Regime::III);
        assert_eq!(Regime::II.to_string(), "II");
    }

    #[test]
    fn bound_curve_row() {
        let c = BoundCurve::compute(0.04, 125).unwrap();
        assert!(c.nvar_ggml < c.nmse_mean);
        assert!(c.ncrb < c.nmse_mean);
        assert_eq!(
            c.csv_row().split(',').count(),
            BoundCurve::CSV_HEADER.split(',').count()
        );
    }
}
