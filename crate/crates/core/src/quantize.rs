//! Midtread uniform quantizer and simulation of quantized and
//! subtractively-dithered measurement batches.
//!
//! A dithered measurement is `Y = q(mu_x + Z + D) - D` with `Z ~ N(0, sigma_z^2)`
//! and `D ~ U[-delta/2, delta/2]`; a quantized one is `U = q(mu_x + Z)`. The
//! quantizer never overloads: levels are unbounded multiples of `delta`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::RandomStream;

/// Rounding applied when an input lands exactly on a bin edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    #[default]
    HalfAwayFromZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    pub delta: f64,
    pub tie_rule: TieRule,
}

impl QuantizerSpec {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!(
                "bin size must be positive and finite, got {delta}"
            )));
        }
        Ok(Self {
            delta,
            tie_rule: TieRule::HalfAwayFromZero,
        })
    }

    /// Reproduction level index `j` such that `quantize(x) = j * delta`.
    #[inline]
    pub fn level(&self, x: f64) -> f64 {
        match self.tie_rule {
            TieRule::HalfAwayFromZero => (x / self.delta).round(),
        }
    }

    #[inline]
    pub fn quantize(&self, x: f64) -> f64 {
        self.delta * self.level(x)
    }
}

/// Free-function form of [`QuantizerSpec::quantize`].
pub fn quantize(x: f64, spec: &QuantizerSpec) -> f64 {
    spec.quantize(x)
}

/// The unknown location and the Gaussian noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalModel {
    pub mu_x: f64,
    pub sigma_z: f64,
}

impl SignalModel {
    pub fn new(mu_x: f64, sigma_z: f64) -> Result<Self> {
        if !(sigma_z >= 0.0) || !sigma_z.is_finite() || !mu_x.is_finite() {
            return Err(Error::Domain(format!(
                "signal model needs finite mu_x and sigma_z >= 0, got mu_x = {mu_x}, sigma_z = {sigma_z}"
            )));
        }
        Ok(Self { mu_x, sigma_z })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BatchKind {
    Dithered,
    Quantized,
}

impl BatchKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BatchKind::Dithered => "dithered",
            BatchKind::Quantized => "quantized",
        }
    }
}

impl fmt::Display for BatchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BatchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dithered" => Ok(BatchKind::Dithered),
            "quantized" => Ok(BatchKind::Quantized),
            other => Err(Error::Domain(format!("unknown batch kind `{other}`"))),
        }
    }
}

/// `K` measurements together with how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBatch {
    pub kind: BatchKind,
    pub samples: Vec<f64>,
    pub truth: Option<SignalModel>,
    pub spec: QuantizerSpec,
}

impl MeasurementBatch {
    /// Builds a batch, checking `K >= 1` and, for quantized batches, that every
    /// sample is a multiple of the bin size.
    pub fn new(
        kind: BatchKind,
        samples: Vec<f64>,
        truth: Option<SignalModel>,
        spec: QuantizerSpec,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample {bad}")));
        }
        if kind == BatchKind::Quantized {
            for &u in &samples {
                let j = u / spec.delta;
                if (j - j.round()).abs() > 1e-9 * j.abs().max(1.0) {
                    return Err(Error::Domain(format!(
                        "quantized sample {u} is not a multiple of delta = {}",
                        spec.delta
                    )));
                }
            }
        }
        Ok(Self {
            kind,
            samples,
            truth,
            spec,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples in ascending order.
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.samples.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Serializes as a `#`-header line followed by one sample per line.
    pub fn to_csv_string(&self) -> Result<String> {
        let truth = self
            .truth
            .ok_or_else(|| Error::Domain("batch serialization requires the signal model".into()))?;
        let mut out = format!(
            "# kind={} delta={} sigma_z={} mu_x={}\n",
            self.kind, self.spec.delta, truth.sigma_z, truth.mu_x
        );
        for v in &self.samples {
            out.push_str(&format!("{v}\n"));
        }
        Ok(out)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty input".into(),
        })?;
        let header = header.trim().strip_prefix('#').ok_or(Error::Parse {
            line: 1,
            message: "missing `#` header line".into(),
        })?;

        let (mut kind, mut delta, mut sigma_z, mut mu_x) = (None, None, None, None);
        for field in header.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("malformed header field `{field}`"),
            })?;
            let num = || {
                value.parse::<f64>().map_err(|e| Error::Parse {
                    line: 1,
                    message: format!("bad value for `{key}`: {e}"),
                })
            };
            match key {
                "kind" => kind = Some(value.parse::<BatchKind>()?),
                "delta" => delta = Some(num()?),
                "sigma_z" => sigma_z = Some(num()?),
                "mu_x" => mu_x = Some(num()?),
                _ => {
                    return Err(Error::Parse {
                        line: 1,
                        message: format!("unknown header key `{key}`"),
                    })
                }
            }
        }
        let missing = |k: &str| Error::Parse {
            line: 1,
            message: format!("header is missing `{k}`"),
        };
        let kind = kind.ok_or_else(|| missing("kind"))?;
        let spec = QuantizerSpec::new(delta.ok_or_else(|| missing("delta"))?)?;
        let truth = SignalModel::new(
            mu_x.ok_or_else(|| missing("mu_x"))?,
            sigma_z.ok_or_else(|| missing("sigma_z"))?,
        )?;

        let mut samples = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.starts_with('#') {
                continue;
            }
            let v = line.parse::<f64>().map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad sample `{line}`: {e}"),
            })?;
            samples.push(v);
        }
        MeasurementBatch::new(kind, samples, Some(truth), spec)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let text = self.to_csv_string()?;
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = fs::File::create(path).map_err(io)?;
        file.write_all(text.as_bytes()).map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_str(&text)
    }
}

/// One trial's raw draws and the two batches built from them.
///
/// Both batches share the same Gaussian noise realizations.
#[derive(Debug, Clone)]
pub struct PairedDraw {
    pub noise: Vec<f64>,
    pub dither: Vec<f64>,
    pub dithered: MeasurementBatch,
    pub quantized: MeasurementBatch,
}

fn draw_noise(model: &SignalModel, k: usize, stream: RandomStream) -> Vec<f64> {
    let mut g = stream
        .with_substream(RandomStream::SIGNAL_NOISE)
        .generator();
    (0..k)
        .map(|_| model.sigma_z * g.standard_normal())
        .collect()
}

fn draw_dither(spec: &QuantizerSpec, k: usize, stream: RandomStream) -> Vec<f64> {
    let mut g = stream.with_substream(RandomStream::DITHER).generator();
    let half = 0.5 * spec.delta;
    (0..k).map(|_| g.uniform(-half, half)).collect()
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::EmptyBatch)
    } else {
        Ok(())
    }
}

/// Draws the shared noise and dither of one trial and forms both batches.
///
/// Noise comes from substream 0 and dither from substream 1 of `stream`.
pub fn draw_paired(
    model: SignalModel,
    spec: QuantizerSpec,
    k: usize,
    stream: RandomStream,
) -> Result<PairedDraw> {
    check_k(k)?;
    let noise = draw_noise(&model, k, stream);
    let dither = draw_dither(&spec, k, stream);
    let dithered = noise
        .iter()
        .zip(&dither)
        .map(|(&z, &d)| spec.quantize(model.mu_x + z + d) - d)
        .collect();
    let quantized = noise
        .iter()
        .map(|&z| spec.quantize(model.mu_x + z))
        .collect();
    Ok(PairedDraw {
        dithered: MeasurementBatch {
            kind: BatchKind::Dithered,
            samples: dithered,
            truth: Some(model),
            spec,
        },
        quantized: MeasurementBatch {
            kind: BatchKind::Quantized,
            samples: quantized,
            truth: Some(model),
            spec,
        },
        noise,
        dither,
    })
}

pub fn draw_dithered_batch(
    model: SignalModel,
    spec: QuantizerSpec,
    k: usize,
    stream: RandomStream,
) -> Result<MeasurementBatch> {
    check_k(k)?;
    let noise = draw_noise(&model, k, stream);
    let dither = draw_dither(&spec, k, stream);
    let samples = noise
        .iter()
        .zip(&dither)
        .map(|(&z, &d)| spec.quantize(model.mu_x + z + d) - d)
        .collect();
    Ok(MeasurementBatch {
        kind: BatchKind::Dithered,
        samples,
        truth: Some(model),
        spec,
    })
}

pub fn draw_quantized_batch(
    model: SignalModel,
    spec: QuantizerSpec,
    k: usize,
    stream: RandomStream,
) -> Result<MeasurementBatch> {
    check_k(k)?;
    let samples = draw_noise(&model, k, stream)
        .into_iter()
        .map(|z| spec.quantize(model.mu_x + z))
        .collect();
    Ok(MeasurementBatch {
        kind: BatchKind::Quantized,
        samples,
        truth: Some(model),
        spec,
    })
}

/// Total noise `V_i = Y_i - mu_x` of a dithered batch.
pub fn quantization_error(batch: &MeasurementBatch) -> Result<Vec<f64>> {
    if batch.kind != BatchKind::Dithered {
        return Err(Error::KindMismatch {
            estimator: "quantization_error",
            expected: "dithered",
            actual: batch.kind.as_str(),
        });
    }
    let truth = batch
        .truth
        .ok_or_else(|| Error::Domain("quantization_error needs the true signal model".into()))?;
    Ok(batch.samples.iter().map(|y| y - truth.mu_x).collect())
}
