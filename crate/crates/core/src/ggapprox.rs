//! Generalized Gaussian (GG) machinery and the kurtosis-matched GG
//! approximation of the Gaussian-plus-uniform total noise.
//!
//! The GG density with location `mu`, standard deviation `sigma` and shape `p`
//! is `exp(-(|v - mu| / A)^p) / (2 Gamma(1 + 1/p) A)` with
//! `A = sigma * sqrt(Gamma(1/p) / Gamma(3/p))`. Shape 2 is Gaussian, shape 1
//! Laplace, and the density tends to uniform as `p` grows.
//!
//! For the dithered total noise `V = Z + W` the shape is chosen so that the GG
//! excess kurtosis equals that of `V`, which depends only on the ratio
//! `r = sigma_z / delta`.

use std::collections::HashMap;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::numerics::special::{
    inc_gamma_series_ln, ln_gamma_pos, lower_inc_gamma_unchecked, upper_inc_gamma_unchecked,
};
use crate::numerics::{find_root, normal_interval_prob, ToleranceConfig};

/// Shape used in place of the (infinite) exact fit as `r -> 0`.
pub const P_MAX: f64 = 1e6;
/// Ratios below this map straight to [`P_MAX`].
pub const R_CLAMP: f64 = 1e-6;

/// Parameters of a generalized Gaussian distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GGParams {
    mu: f64,
    sigma: f64,
    p: f64,
    a_of_p: f64,
    ln_norm: f64,
}

impl GGParams {
    pub fn new(mu: f64, sigma: f64, p: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma > 0.0) || !sigma.is_finite() || !(p > 0.0) || !p.is_finite() {
            return Err(Error::Domain(format!(
                "GG parameters need finite mu, sigma > 0 and p > 0, got ({mu}, {sigma}, {p})"
            )));
        }
        let a_of_p = sigma * (0.5 * (ln_gamma_pos(1.0 / p) - ln_gamma_pos(3.0 / p))).exp();
        let ln_norm = std::f64::consts::LN_2 + ln_gamma_pos(1.0 + 1.0 / p) + a_of_p.ln();
        Ok(Self {
            mu,
            sigma,
            p,
            a_of_p,
            ln_norm,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Scale `A(p)`.
    pub fn a_of_p(&self) -> f64 {
        self.a_of_p
    }
}

pub fn gg_pdf(v: f64, params: &GGParams) -> f64 {
    let t = (v - params.mu).abs() / params.a_of_p;
    (-t.powf(params.p) - params.ln_norm).exp()
}

/// GG distribution function via the regularized incomplete gamma function.
pub fn gg_cdf(v: f64, params: &GGParams) -> f64 {
    let d = v - params.mu;
    let a = 1.0 / params.p;
    let ln_x = params.p * (d.abs() / params.a_of_p).ln();
    if ln_x < (a + 1.0).ln() {
        // near the centre, where x = (|d|/a)^p may underflow for large p
        let half_mass = 0.5 * inc_gamma_series_ln(a, ln_x);
        return if d >= 0.0 {
            0.5 + half_mass
        } else {
            0.5 - half_mass
        };
    }
    let x = ln_x.exp();
    if d >= 0.0 {
        0.5 + 0.5 * lower_inc_gamma_unchecked(a, x)
    } else {
        0.5 * upper_inc_gamma_unchecked(a, x)
    }
}

/// GG quantile function, by bracketed root finding on `[mu - 20 sigma, mu + 20 sigma]`.
pub fn gg_inv_cdf(q: f64, params: &GGParams) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "quantile level must lie in (0, 1), got {q}"
        )));
    }
    if q == 0.5 {
        return Ok(params.mu);
    }
    // solve on the lower half and mirror so that quantiles are exactly symmetric
    let lower = q.min(1.0 - q);
    let tol = ToleranceConfig {
        abs_tol: 1e-14 * params.sigma,
        rel_tol: 1e-15,
        max_iter: 400,
    };
    let span = 20.0 * params.sigma;
    let root = find_root(
        |v| gg_cdf(v, params) - lower,
        params.mu - span,
        params.mu,
        &tol,
    )?;
    let offset = params.mu - root;
    Ok(if q < 0.5 {
        params.mu - offset
    } else {
        params.mu + offset
    })
}

/// Excess kurtosis of `Z + W` for `Z ~ N(0, (r delta)^2)`, `W ~ U[-delta/2, delta/2]`.
pub fn sum_excess_kurtosis(r: f64) -> f64 {
    let s = 12.0 * r * r + 1.0;
    -1.2 / (s * s)
}

/// Excess kurtosis of a GG distribution with shape `p`.
pub fn gg_excess_kurtosis(p: f64) -> f64 {
    (ln_gamma_pos(1.0 / p) + ln_gamma_pos(5.0 / p) - 2.0 * ln_gamma_pos(3.0 / p)).exp() - 3.0
}

/// Kurtosis-matched shape for a noise-to-bin ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFit {
    pub sigma_over_delta: f64,
    pub p_hat: f64,
    pub target_excess_kurtosis: f64,
}

impl ShapeFit {
    /// GG approximation of the total noise for bin size `delta`, centred at 0.
    pub fn gg_params(&self, delta: f64) -> Result<GGParams> {
        let r = self.sigma_over_delta;
        GGParams::new(0.0, delta * (r * r + 1.0 / 12.0).sqrt(), self.p_hat)
    }

    /// Outer-mean fraction `2 / p_hat`.
    pub fn alpha(&self) -> f64 {
        (2.0 / self.p_hat).min(1.0)
    }
}

/// Solves for the GG shape whose excess kurtosis equals that of the total noise.
///
/// The solve runs in `ln p`. It starts from `p0 = max(2, 1/r)` and widens a
/// bracket geometrically inside `[2, P_MAX]`. Ratios below [`R_CLAMP`], or
/// targets beyond what `P_MAX` can reach, return `P_MAX`.
pub fn fit_shape(r: f64) -> ShapeFit {
    assert!(
        r >= 0.0 && r.is_finite(),
        "ratio must be finite and nonnegative, got {r}"
    );
    let target = sum_excess_kurtosis(r);
    let done = |p_hat| ShapeFit {
        sigma_over_delta: r,
        p_hat,
        target_excess_kurtosis: target,
    };
    if r < R_CLAMP {
        return done(P_MAX);
    }
    let resid = |t: f64| gg_excess_kurtosis(t.exp()) - target;
    let (t_min, t_max) = (2f64.ln(), P_MAX.ln());
    if resid(t_max) >= 0.0 {
        return done(P_MAX);
    }
    if target >= 0.0 {
        return done(2.0);
    }

    // residual is decreasing in ln p: positive below the root, negative above
    let t0 = (1.0 / r).clamp(2.0, P_MAX).ln();
    let step = std::f64::consts::LN_2;
    let (mut lo, mut hi) = (t0, t0);
    if resid(t0) > 0.0 {
        while resid(hi) > 0.0 {
            lo = hi;
            hi = (hi + step).min(t_max);
        }
    } else {
        while lo > t_min && resid(lo) <= 0.0 {
            hi = lo;
            lo = (lo - step).max(t_min);
        }
    }
    let tol = ToleranceConfig {
        abs_tol: 1e-15,
        rel_tol: 1e-15,
        max_iter: 200,
    };
    let t = find_root(resid, lo, hi, &tol).expect("kurtosis residual changes sign on the bracket");
    done(t.exp())
}

/// Memoized [`fit_shape`], keyed on the exact ratio.
#[derive(Debug, Default)]
pub struct ShapeCache {
    table: RwLock<HashMap<u64, ShapeFit>>,
}

impl ShapeCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fits every ratio in `ratios` up front.
    pub fn precomputed(ratios: &[f64]) -> Self {
        let cache = Self::new();
        for &r in ratios {
            cache.get(r);
        }
        cache
    }

    pub fn get(&self, r: f64) -> ShapeFit {
        let key = r.to_bits();
        if let Some(fit) = self.table.read().expect("shape cache poisoned").get(&key) {
            return *fit;
        }
        let fit = fit_shape(r);
        self.table
            .write()
            .expect("shape cache poisoned")
            .insert(key, fit);
        fit
    }

    pub fn len(&self) -> usize {
        self.table.read().expect("shape cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Asymptotic-variance coefficient of the GG maximum likelihood location
/// estimate relative to the sample mean; equals 1 at `p = 2`.
pub fn beta_coefficient(p: f64) -> f64 {
    (2.0 * ln_gamma_pos(1.0 / p)
        - 2.0 * p.ln()
        - ln_gamma_pos((2.0 * p - 1.0) / p)
        - ln_gamma_pos(3.0 / p))
    .exp()
}

/// Asymptotic variance of the GG maximum likelihood estimate, normalized by `delta^2`.
pub fn nvar_ggml(p: f64, r: f64, k: usize) -> f64 {
    beta_coefficient(p) * (r * r + 1.0 / 12.0) / k as f64
}

/// Exact density of the total noise `V = Z + W` (Gaussian convolved with uniform).
pub fn true_total_noise_pdf(v: f64, r: f64, delta: f64) -> f64 {
    let half = 0.5 * delta;
    if r == 0.0 {
        return match v.abs().partial_cmp(&half) {
            Some(std::cmp::Ordering::Less) => 1.0 / delta,
            Some(std::cmp::Ordering::Equal) => 0.5 / delta,
            _ => 0.0,
        };
    }
    let sigma = r * delta;
    normal_interval_prob((v - half) / sigma, (v + half) / sigma) / delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, std_normal_cdf};
    use std::f64::consts::PI;

    fn tol() -> ToleranceConfig {
        ToleranceConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_iter: 2000,
        }
    }

    #[test]
    fn pdf_special_cases() {
        let g = GGParams::new(0.3, 1.7, 2.0).unwrap();
        assert!((gg_pdf(0.3, &g) - 1.0 / (1.7 * (2.0 * PI).sqrt())).abs() < 1e-14);
        let l = GGParams::new(-1.0, 0.8, 1.0).unwrap();
        assert!((gg_pdf(-1.0, &l) - 1.0 / (0.8 * 2f64.sqrt())).abs() < 1e-14);
        assert!((l.a_of_p() - 0.8 / 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(gg_pdf(0.3 + 0.4, &g), gg_pdf(0.3 - 0.4, &g));
    }

    #[test]
    fn near_uniform_shape() {
        let g = GGParams::new(0.0, (1.0 / 12.0f64).sqrt(), 50.0).unwrap();
        let total = integrate(|v| gg_pdf(v, &g), -1.0, 1.0, &tol()).unwrap();
        assert!((total - 1.0).abs() < 1e-8);
        for i in 0..=80 {
            let v = -0.4 + 0.01 * i as f64;
            assert!((gg_pdf(v, &g) - 1.0).abs() < 2e-3, "v = {v}");
        }
    }

    #[test]
    fn normalization_and_variance() {
        for &p in &[1.0, 2.0, 2.16, 5.0, 14.3, 50.0] {
            let g = GGParams::new(0.2, 0.7, p).unwrap();
            let lim = 40.0 * 0.7;
            let mass = integrate(|v| gg_pdf(v, &g), 0.2 - lim, 0.2, &tol()).unwrap()
                + integrate(|v| gg_pdf(v, &g), 0.2, 0.2 + lim, &tol()).unwrap();
            let var = integrate(
                |v| (v - 0.2).powi(2) * gg_pdf(v, &g),
                0.2 - lim,
                0.2,
                &tol(),
            )
            .unwrap()
                + integrate(
                    |v| (v - 0.2).powi(2) * gg_pdf(v, &g),
                    0.2,
                    0.2 + lim,
                    &tol(),
                )
                .unwrap();
            assert!((mass - 1.0).abs() < 1e-8, "p = {p}: mass {mass}");
            assert!((var / 0.49 - 1.0).abs() < 1e-6, "p = {p}: var {var}");
        }
    }

    #[test]
    fn cdf_values() {
        let g = GGParams::new(1.0, 2.0, 2.0).unwrap();
        assert_eq!(gg_cdf(1.0, &g), 0.5);
        assert!((gg_cdf(3.0, &g) - std_normal_cdf(1.0)).abs() < 1e-14);
        assert!((gg_cdf(-1.5, &g) - std_normal_cdf(-1.25)).abs() < 1e-14);
        for &p in &[2.0, 5.0, 20.0] {
            let g = GGParams::new(0.0, 1.0, p).unwrap();
            assert!(gg_cdf(10.0, &g) > 1.0 - 1e-6);
            assert!(gg_cdf(-10.0, &g) < 1e-6);
        }
    }

    #[test]
    fn cdf_matches_quadrature() {
        let g = GGParams::new(0.0, 0.3, 14.3).unwrap();
        for &v in &[-0.5, -0.31, -0.1, 0.05, 0.28, 0.6] {
            let lo = -12.0;
            let by_quad = if v < 0.0 {
                integrate(|t| gg_pdf(t, &g), lo, v, &tol()).unwrap()
            } else {
                integrate(|t| gg_pdf(t, &g), lo, 0.0, &tol()).unwrap()
                    + integrate(|t| gg_pdf(t, &g), 0.0, v, &tol()).unwrap()
            };
            assert!((gg_cdf(v, &g) - by_quad).abs() < 1e-10, "v = {v}");
        }
    }

    #[test]
    fn inverse_cdf() {
        let g = GGParams::new(0.5, 2.0, 2.0).unwrap();
        assert_eq!(gg_inv_cdf(0.5, &g).unwrap(), 0.5);
        assert!(
            (gg_inv_cdf(0.975, &g).unwrap() - (0.5 + 2.0 * 1.959_963_984_540_054)).abs() < 1e-10
        );
        for &p in &[2.0, 5.0, 20.0, 100.0] {
            let g = GGParams::new(-0.2, 0.9, p).unwrap();
            for i in 1..=99 {
                let q = i as f64 / 100.0;
                let v = gg_inv_cdf(q, &g).unwrap();
                assert!((gg_cdf(v, &g) - q).abs() < 1e-9, "p = {p}, q = {q}");
            }
        }
        assert!(gg_inv_cdf(0.0, &g).is_err());
        assert!(gg_inv_cdf(1.0, &g).is_err());
    }

    #[test]
    fn kurtosis_formulas() {
        assert_eq!(sum_excess_kurtosis(0.0), -1.2);
        assert!(sum_excess_kurtosis(100.0).abs() < 1e-9);
        assert!((sum_excess_kurtosis(0.4) + 1.2 / (12.0 * 0.16 + 1.0f64).powi(2)).abs() < 1e-16);
        assert!((sum_excess_kurtosis(0.4) + 0.140_739_350_722_462).abs() < 1e-14);
        assert!(gg_excess_kurtosis(2.0).abs() < 1e-13);
        assert!((gg_excess_kurtosis(1.0) - 3.0).abs() < 1e-12);
        assert!((gg_excess_kurtosis(1e6) + 1.2).abs() < 1e-4);
    }

    #[test]
    fn shape_fit_anchors() {
        assert!((fit_shape(0.004).p_hat - 158.0).abs() < 3.0);
        assert!((fit_shape(0.04).p_hat - 14.3).abs() < 0.2);
        assert!((fit_shape(0.4).p_hat - 2.16).abs() < 0.02);
        // reference solve with scipy gammaln + brentq
        assert!((fit_shape(0.04).p_hat - 14.311_690_280_251).abs() < 1e-8);
        assert!((fit_shape(0.4).p_hat - 2.156_230_568_869_39).abs() < 1e-9);
    }

    #[test]
    fn shape_fit_limits() {
        assert_eq!(fit_shape(0.0).p_hat, P_MAX);
        assert_eq!(fit_shape(1e-7).p_hat, P_MAX);
        assert!(fit_shape(3.0).p_hat < 2.001);
        assert!(fit_shape(50.0).p_hat >= 2.0);
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let r = 1e-4 * 1.06f64.powi(i);
            let p = fit_shape(r).p_hat;
            assert!(p <= prev, "r = {r}");
            assert!(p >= 2.0);
            prev = p;
        }
    }

    #[test]
    fn alpha_from_shape() {
        assert!((fit_shape(0.04).alpha() - 2.0 / 14.311_690_280_251).abs() < 1e-10);
        assert_eq!(fit_shape(0.0).alpha(), 2e-6);
    }

    #[test]
    fn cache_matches_direct_fit() {
        let cache = ShapeCache::precomputed(&[0.004, 0.04, 0.4]);
        assert_eq!(cache.len(), 3);
        assert_eq!(cache.get(0.04), fit_shape(0.04));
        cache.get(0.1);
        assert_eq!(cache.len(), 4);
    }

    #[test]
    fn beta_values() {
        assert!((beta_coefficient(2.0) - 1.0).abs() < 1e-12);
        assert!((beta_coefficient(4.0) - 0.729_479_871_742_158_9).abs() < 1e-12);
        assert!(beta_coefficient(100.0) < beta_coefficient(10.0));
        assert!(beta_coefficient(10.0) < beta_coefficient(3.0));
        assert!(beta_coefficient(3.0) < 1.0);
    }

    #[test]
    fn ggml_variance() {
        assert!((nvar_ggml(2.0, 1.0, 125) - (1.0 + 1.0 / 12.0) / 125.0).abs() < 1e-15);
        let p = 14.3;
        let expected = beta_coefficient(p) * (0.0016 + 1.0 / 12.0) / 25.0;
        assert!((nvar_ggml(p, 0.04, 25) - expected).abs() < 1e-18);
        assert!((nvar_ggml(p, 0.3, 10) - 2.0 * nvar_ggml(p, 0.3, 20)).abs() < 1e-16);
    }

    #[test]
    fn true_pdf() {
        assert!((true_total_noise_pdf(0.0, 1e-9, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(true_total_noise_pdf(0.2, 0.0, 2.0), 0.5);
        assert_eq!(true_total_noise_pdf(1.2, 0.0, 2.0), 0.0);
        for &r in &[0.004, 0.04, 0.4] {
            let lim = 0.5 + 8.0 * r;
            let mass = integrate(|v| true_total_noise_pdf(v, r, 1.0), -lim, lim, &tol()).unwrap();
            assert!((mass - 1.0).abs() < 1e-8, "r = {r}");
        }
    }

    #[test]
    fn true_pdf_riemann_oracle() {
        let r = 0.04;
        let n = 2_000_000;
        let h = 12.0 / n as f64;
        let sum: f64 = (0..n)
            .map(|i| {
                let v = -6.0 + (i as f64 + 0.5) * h;
                (std_normal_cdf((v + 0.5) / r) - std_normal_cdf((v - 0.5) / r)) * h
            })
            .sum();
        assert!((sum - 1.0).abs() < 1e-8);
        let quad = integrate(|v| true_total_noise_pdf(v, r, 1.0), -6.0, 6.0, &tol()).unwrap();
        assert!((quad - sum).abs() < 1e-8);
    }

    /// Largest pointwise gap between the true and kurtosis-matched densities on
    /// `[-3 sigma_v, 3 sigma_v]`, relative to the true peak.
    fn max_relative_gap(r: f64) -> f64 {
        let fit = fit_shape(r);
        let g = fit.gg_params(1.0).unwrap();
        let sv = (r * r + 1.0 / 12.0f64).sqrt();
        let peak = true_total_noise_pdf(0.0, r, 1.0);
        (0..=60_000)
            .map(|i| -3.0 * sv + 6.0 * sv * i as f64 / 60_000.0)
            .map(|v| (gg_pdf(v, &g) - true_total_noise_pdf(v, r, 1.0)).abs())
            .fold(0.0, f64::max)
            / peak
    }

    #[test]
    fn gg_tracks_true_density() {
        assert!(max_relative_gap(0.04) < 0.05);
        assert!(max_relative_gap(0.4) < 0.05);
        // Near-uniform case: the gap concentrates on the steep bin edges and
        // reaches about 6.9% of the peak there.
        let gap = max_relative_gap(0.004);
        assert!((gap - 0.0688).abs() < 2e-3, "gap {gap}");
    }

    #[test]
    fn cdf_resolves_the_centre_for_large_shape() {
        // (|d|/a)^p underflows here, yet the distribution function must still
        // rise with slope equal to the density
        let g = GGParams::new(0.0, 0.1, 227.6).unwrap();
        let slope = (gg_cdf(1e-3, &g) - gg_cdf(-1e-3, &g)) / 2e-3;
        assert!((slope / gg_pdf(0.0, &g) - 1.0).abs() < 1e-12);
        let x = gg_inv_cdf(0.5068, &g).unwrap();
        assert!((gg_cdf(x, &g) - 0.5068).abs() < 1e-14);
    }
}
