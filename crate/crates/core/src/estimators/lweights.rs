//! Order-statistic (L-estimator) weight families.

use crate::error::{Error, Result};
use crate::ggapprox::{gg_inv_cdf, gg_pdf, GGParams};

/// Weights `a_1..a_K` applied to the ascending order statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    /// Wraps raw weights; they must be finite and sum to one within `1e-12`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain("weights must be finite".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            weights: vec![1.0 / k as f64; k],
        }
    }

    /// Half weight on each extreme.
    pub fn midrange(k: usize) -> Self {
        if k == 1 {
            return Self { weights: vec![1.0] };
        }
        let mut weights = vec![0.0; k];
        weights[0] = 0.5;
        weights[k - 1] = 0.5;
        Self { weights }
    }

    /// Builds a symmetric vector of length `k` from its first `ceil(k/2)` entries.
    fn mirrored(k: usize, head: &[f64]) -> Self {
        debug_assert_eq!(head.len(), k.div_ceil(2));
        let mut weights = vec![0.0; k];
        for (i, &a) in head.iter().enumerate() {
            weights[i] = a;
            weights[k - 1 - i] = a;
        }
        Self { weights }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Largest `|a_i - a_{K-i+1}|`.
    pub fn asymmetry(&self) -> f64 {
        let k = self.weights.len();
        (0..k / 2)
            .map(|i| (self.weights[i] - self.weights[k - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    /// Inner product with already-sorted samples.
    pub fn dot_sorted(&self, sorted: &[f64]) -> Result<f64> {
        if sorted.len() != self.weights.len() {
            return Err(Error::LengthMismatch {
                weights: self.weights.len(),
                samples: sorted.len(),
            });
        }
        Ok(self.weights.iter().zip(sorted).map(|(a, y)| a * y).sum())
    }
}

/// Nearly-best L-estimate weights for a GG noise model.
///
/// With `c_i = F^{-1}(i/(K+1))` and `f_i = f(c_i)`, the unnormalized weights
/// for `i = 1..N`, `N = ceil(K/2)`, are the pdf-weighted second differences
/// `b_i = f_i (f_{i-1} - 2 f_i + f_{i+1})` with `f_0 = 0`, and
/// `b_N = f_N (f_{N-1} - f_N)`. Even `K` normalizes by `2 sum b_i`; odd `K`
/// by `b_N + 2 sum_{i<=K/2} b_i`, so that the mirrored vector sums to one.
pub fn weights_nearly_best(k: usize, params: &GGParams) -> Result<WeightVector> {
    if k < 2 {
        return Err(Error::Domain(format!(
            "nearly-best weights need K >= 2, got {k}"
        )));
    }
    let n = k.div_ceil(2);
    let m = k / 2;
    let centred = GGParams::new(0.0, params.sigma(), params.p())?;
    // f_0 = 0 padding, then f_1..f_N
    let mut f = vec![0.0; n + 1];
    for (i, fi) in f.iter_mut().enumerate().skip(1) {
        let c = gg_inv_cdf(i as f64 / (k + 1) as f64, &centred)?;
        *fi = gg_pdf(c, &centred);
    }
    let mut b = vec![0.0; n];
    if n == 1 {
        b[0] = 1.0;
    } else {
        for i in 1..n {
            b[i - 1] = f[i] * (f[i - 1] - 2.0 * f[i] + f[i + 1]);
        }
        b[n - 1] = f[n] * (f[n - 1] - f[n]);
    }
    let norm = if k % 2 == 0 {
        2.0 * b.iter().sum::<f64>()
    } else {
        b[n - 1] + 2.0 * b[..m].iter().sum::<f64>()
    };
    if norm == 0.0 || !norm.is_finite() {
        // every quantile point sits where the density is flat or vanishes
        return Ok(WeightVector::midrange(k));
    }
    let head: Vec<f64> = b.iter().map(|bi| bi / norm).collect();
    Ok(WeightVector::mirrored(k, &head))
}

/// Outer trimmed-mean weights keeping a fraction `alpha` of the extremes.
///
/// The `floor(K alpha / 2)` outermost samples on each side get `1/(K alpha)`,
/// the next one the fractional remainder, and the rest zero. `alpha = 1` is the
/// sample mean and `alpha = 0` the midrange.
pub fn weights_alpha_outer(k: usize, alpha: f64) -> Result<WeightVector> {
    if k == 0 {
        return Err(Error::EmptyBatch);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if k == 1 {
        return Ok(WeightVector::uniform(1));
    }
    let ka = k as f64 * alpha;
    if ka == 0.0 {
        return Ok(WeightVector::midrange(k));
    }
    let full = (ka / 2.0).floor() as usize;
    let mut one_side = vec![0.0; k];
    for w in one_side.iter_mut().take(full) {
        *w = 1.0 / ka;
    }
    if full < k {
        one_side[full] = (ka / 2.0 - full as f64) / ka;
    }
    let weights = (0..k).map(|i| one_side[i] + one_side[k - 1 - i]).collect();
    Ok(WeightVector { weights })
}

/// Data-dependent pair weights: the pair `(Y_(i), Y_(K-i+1))` gets weight
/// proportional to its spread raised to `p - 2`; the median of an odd batch
/// gets none. Spreads are scaled by the largest one before exponentiation so
/// huge shapes neither overflow nor underflow, and `0^0 = 1`.
pub fn nonlinear_weights(sorted: &[f64], p: f64) -> Result<Option<WeightVector>> {
    let k = sorted.len();
    if k < 2 {
        return Err(Error::Domain(format!(
            "the nonlinear estimator needs K >= 2, got {k}"
        )));
    }
    if !(p >= 2.0) {
        return Err(Error::Domain(format!("shape must be at least 2, got {p}")));
    }
    let m = k / 2;
    let gaps: Vec<f64> = (0..m).map(|i| sorted[k - 1 - i] - sorted[i]).collect();
    let widest = gaps.iter().copied().fold(0.0, f64::max);
    if widest == 0.0 {
        return Ok(None);
    }
    let exponent = p - 2.0;
    let g: Vec<f64> = gaps
        .iter()
        .map(|&d| {
            if exponent == 0.0 {
                1.0
            } else {
                (d / widest).powf(exponent)
            }
        })
        .collect();
    let total: f64 = g.iter().sum();
    let mut head: Vec<f64> = g.iter().map(|gi| 0.5 * gi / total).collect();
    if k % 2 == 1 {
        head.push(0.0);
    }
    Ok(Some(WeightVector::mirrored(k, &head)))
}
