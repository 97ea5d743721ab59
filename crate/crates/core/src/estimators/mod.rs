//! Location estimators for dithered and quantized batches.
//!
//! Dithered batches (`Y = q(mu + Z + D) - D`) feed the mean, midrange, DML,
//! GGML and the three order-statistic families. Quantized batches
//! (`U = q(mu + Z)`) feed the quantized-sample mean and QML.

mod em;
mod lweights;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ggapprox::{fit_shape, GGParams};
use crate::quantize::{BatchKind, MeasurementBatch};

pub(crate) use em::run_em;
pub use em::{bin_log_likelihood, EmMethod, EmTrace, EM_MAX_ITER, EM_STEP_TOL};
pub use lweights::{nonlinear_weights, weights_alpha_outer, weights_nearly_best, WeightVector};

/// The nine estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Mean,
    Midrange,
    QMean,
    Qml,
    Dml,
    Ggml,
    NearlyBest,
    AlphaTrim,
    Nonlinear,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 9] = [
        EstimatorKind::Mean,
        EstimatorKind::Midrange,
        EstimatorKind::QMean,
        EstimatorKind::Qml,
        EstimatorKind::Dml,
        EstimatorKind::Ggml,
        EstimatorKind::NearlyBest,
        EstimatorKind::AlphaTrim,
        EstimatorKind::Nonlinear,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Mean => "mean",
            EstimatorKind::Midrange => "midrange",
            EstimatorKind::QMean => "q_mean",
            EstimatorKind::Qml => "qml",
            EstimatorKind::Dml => "dml",
            EstimatorKind::Ggml => "ggml",
            EstimatorKind::NearlyBest => "nearly_best",
            EstimatorKind::AlphaTrim => "alpha_trim",
            EstimatorKind::Nonlinear => "nonlinear",
        }
    }

    /// Batch kind this estimator consumes.
    pub fn batch_kind(&self) -> BatchKind {
        match self {
            EstimatorKind::QMean | EstimatorKind::Qml => BatchKind::Quantized,
            _ => BatchKind::Dithered,
        }
    }

    /// Whether the estimator needs the signal-noise standard deviation.
    pub fn needs_sigma(&self) -> bool {
        matches!(
            self,
            EstimatorKind::Qml | EstimatorKind::Dml | EstimatorKind::NearlyBest
        )
    }

    /// Whether the estimator needs a GG shape.
    pub fn needs_shape(&self) -> bool {
        matches!(
            self,
            EstimatorKind::Ggml
                | EstimatorKind::NearlyBest
                | EstimatorKind::AlphaTrim
                | EstimatorKind::Nonlinear
        )
    }

    /// Parses a comma-separated list such as `mid,mean,dml`.
    pub fn parse_list(list: &str) -> Result<Vec<EstimatorKind>> {
        let mut kinds = Vec::new();
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let kind: EstimatorKind = name.parse()?;
            if !kinds.contains(&kind) {
                kinds.push(kind);
            }
        }
        if kinds.is_empty() {
            return Err(Error::Domain("no estimators given".into()));
        }
        Ok(kinds)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "mean" => EstimatorKind::Mean,
            "mid" | "midrange" => EstimatorKind::Midrange,
            "q_mean" | "qmean" => EstimatorKind::QMean,
            "qml" => EstimatorKind::Qml,
            "dml" => EstimatorKind::Dml,
            "ggml" => EstimatorKind::Ggml,
            "nearly_best" | "nb" => EstimatorKind::NearlyBest,
            "alpha_trim" | "alpha" => EstimatorKind::AlphaTrim,
            "nonlinear" | "nl" => EstimatorKind::Nonlinear,
            other => return Err(Error::Domain(format!("unknown estimator `{other}`"))),
        })
    }
}

fn expect_kind(batch: &MeasurementBatch, estimator: EstimatorKind) -> Result<()> {
    let expected = estimator.batch_kind();
    if batch.kind != expected {
        return Err(Error::KindMismatch {
            estimator: estimator.as_str(),
            expected: expected.as_str(),
            actual: batch.kind.as_str(),
        });
    }
    Ok(())
}

fn check_sigma(sigma_z: f64) -> Result<()> {
    if sigma_z > 0.0 && sigma_z.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "sigma_z must be positive and finite, got {sigma_z}"
        )))
    }
}

fn mean_of(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

fn extremes(samples: &[f64]) -> (f64, f64) {
    samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        })
}

/// Sample mean of a dithered batch.
pub fn est_mean(batch: &MeasurementBatch) -> Result<f64> {
    expect_kind(batch, EstimatorKind::Mean)?;
    Ok(mean_of(&batch.samples))
}

/// `(Y_(1) + Y_(K)) / 2`.
pub fn est_midrange(batch: &MeasurementBatch) -> Result<f64> {
    expect_kind(batch, EstimatorKind::Midrange)?;
    let (lo, hi) = extremes(&batch.samples);
    Ok(0.5 * (lo + hi))
}

/// Mean of the quantized levels.
pub fn est_q_mean(batch: &MeasurementBatch) -> Result<f64> {
    expect_kind(batch, EstimatorKind::QMean)?;
    Ok(mean_of(&batch.samples))
}

/// Quantized-sample maximum likelihood by EM, started from the quantized mean.
///
/// Hitting the iteration cap is not an error: the last iterate is returned
/// with `converged` unset.
pub fn est_qml(batch: &MeasurementBatch, sigma_z: f64) -> Result<(f64, EmTrace)> {
    est_qml_with(batch, sigma_z, EmMethod::default())
}

pub fn est_qml_with(
    batch: &MeasurementBatch,
    sigma_z: f64,
    method: EmMethod,
) -> Result<(f64, EmTrace)> {
    expect_kind(batch, EstimatorKind::Qml)?;
    check_sigma(sigma_z)?;
    let trace = run_em(
        &batch.samples,
        batch.spec.delta,
        sigma_z,
        mean_of(&batch.samples),
        method,
        true,
    );
    Ok((trace.estimate(), trace))
}

/// Dithered-sample maximum likelihood by EM, started from the midrange.
pub fn est_dml(batch: &MeasurementBatch, sigma_z: f64) -> Result<(f64, EmTrace)> {
    est_dml_with(batch, sigma_z, EmMethod::default())
}

pub fn est_dml_with(
    batch: &MeasurementBatch,
    sigma_z: f64,
    method: EmMethod,
) -> Result<(f64, EmTrace)> {
    expect_kind(batch, EstimatorKind::Dml)?;
    check_sigma(sigma_z)?;
    let (lo, hi) = extremes(&batch.samples);
    let trace = run_em(
        &batch.samples,
        batch.spec.delta,
        sigma_z,
        0.5 * (lo + hi),
        method,
        true,
    );
    Ok((trace.estimate(), trace))
}

/// Generalized Gaussian maximum likelihood location for shape `p`.
///
/// Solves `sum sign(y - mu) |y - mu|^(p-1) = 0` by bisection on
/// `[Y_(1), Y_(K)]`; the left side is nonincreasing in `mu` for `p > 1`.
pub fn est_ggml(batch: &MeasurementBatch, p: f64) -> Result<f64> {
    expect_kind(batch, EstimatorKind::Ggml)?;
    ggml_location(&batch.samples, p)
}

pub(crate) fn ggml_location(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !(p > 1.0) || p.is_nan() {
        return Err(Error::Domain(format!("GGML needs shape p > 1, got {p}")));
    }
    if p == 2.0 {
        return Ok(mean_of(samples));
    }
    let (mut lo, mut hi) = extremes(samples);
    let range = hi - lo;
    if range == 0.0 {
        return Ok(lo);
    }
    let exponent = p - 1.0;
    let mut logs = vec![0.0; samples.len()];
    // sign of the score at mu; terms are rescaled by the largest one so that
    // shapes in the millions neither overflow nor vanish
    let mut score_sign = |mu: f64| -> f64 {
        let mut top = f64::NEG_INFINITY;
        for (l, &y) in logs.iter_mut().zip(samples) {
            *l = (y - mu).abs().ln();
            top = top.max(*l);
        }
        samples
            .iter()
            .zip(&logs)
            .map(|(&y, &l)| {
                let t = (exponent * (l - top)).exp();
                if y > mu {
                    t
                } else if y < mu {
                    -t
                } else {
                    0.0
                }
            })
            .sum()
    };
    let tol = 1e-10 * range;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let s = score_sign(mid);
        if s > 0.0 {
            lo = mid;
        } else if s < 0.0 {
            hi = mid;
        } else {
            return Ok(mid);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sorts the batch and takes the inner product with `w`.
pub fn apply_weights(batch: &MeasurementBatch, w: &WeightVector) -> Result<f64> {
    w.dot_sorted(&batch.sorted())
}

/// Nonlinear order-statistic estimate with data-dependent pair weights.
/// A batch with no spread returns its common value.
pub fn est_nonlinear(batch: &MeasurementBatch, p: f64) -> Result<f64> {
    expect_kind(batch, EstimatorKind::Nonlinear)?;
    nonlinear_location(&batch.sorted(), p)
}

pub(crate) fn nonlinear_location(sorted: &[f64], p: f64) -> Result<f64> {
    match nonlinear_weights(sorted, p)? {
        Some(w) => w.dot_sorted(sorted),
        None => Ok(sorted[0]),
    }
}

/// GG model of the total noise for a known signal-noise level.
pub fn total_noise_params(sigma_z: f64, delta: f64, p: f64) -> Result<GGParams> {
    GGParams::new(0.0, (sigma_z * sigma_z + delta * delta / 12.0).sqrt(), p)
}

/// Result of [`estimate`]: the value, EM iterations (0 for non-iterative
/// estimators) and convergence status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs any estimator on a batch.
///
/// `sigma_z` is required by qml, dml and nearly_best. The shape is taken from
/// `p` when given, otherwise fitted from `sigma_z / delta`.
pub fn estimate(
    kind: EstimatorKind,
    batch: &MeasurementBatch,
    sigma_z: Option<f64>,
    p: Option<f64>,
) -> Result<Estimate> {
    let delta = batch.spec.delta;
    let sigma = || {
        sigma_z.ok_or_else(|| {
            Error::Domain(format!(
                "estimator `{kind}` needs the signal-noise level sigma_z"
            ))
        })
    };
    let shape = || -> Result<f64> {
        match p {
            Some(p) => Ok(p),
            None => Ok(fit_shape(sigma()? / delta).p_hat),
        }
    };
    let plain = |value| Estimate {
        value,
        iterations: 0,
        converged: true,
    };
    Ok(match kind {
        EstimatorKind::Mean => plain(est_mean(batch)?),
        EstimatorKind::Midrange => plain(est_midrange(batch)?),
        EstimatorKind::QMean => plain(est_q_mean(batch)?),
        EstimatorKind::Qml | EstimatorKind::Dml => {
            let (value, trace) = if kind == EstimatorKind::Qml {
                est_qml(batch, sigma()?)?
            } else {
                est_dml(batch, sigma()?)?
            };
            Estimate {
                value,
                iterations: trace.iterations,
                converged: trace.converged,
            }
        }
        EstimatorKind::Ggml => plain(est_ggml(batch, shape()?)?),
        EstimatorKind::NearlyBest => {
            expect_kind(batch, kind)?;
            let w =
                weights_nearly_best(batch.len(), &total_noise_params(sigma()?, delta, shape()?)?)?;
            plain(apply_weights(batch, &w)?)
        }
        EstimatorKind::AlphaTrim => {
            expect_kind(batch, kind)?;
            let w = weights_alpha_outer(batch.len(), (2.0 / shape()?).min(1.0))?;
            plain(apply_weights(batch, &w)?)
        }
        EstimatorKind::Nonlinear => plain(est_nonlinear(batch, shape()?)?),
    })
}
