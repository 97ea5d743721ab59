//! Monte Carlo sweeps: per-trial simulation, NMSE aggregation and CSV I/O.
//!
//! Trials are independent and may run on any number of threads. Each trial
//! derives its own random streams from `(seed, configuration, trial index)`
//! and squared errors are summed in trial order, so results are bit-identical
//! for every thread count.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    ggml_location, nonlinear_location, run_em, total_noise_params, weights_alpha_outer,
    weights_nearly_best, EmMethod, EstimatorKind, WeightVector,
};
use crate::ggapprox::fit_shape;
use crate::numerics::rng::splitmix64;
use crate::numerics::RandomStream;
use crate::quantize::{draw_paired, QuantizerSpec, SignalModel};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "DITHERLAB_THREADS";

pub const CSV_HEADER: &str = "r,K,estimator,nmse,trials,seed";
const NON_CONVERGED_TAG: &str = "# non_converged_em_runs=";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub delta: f64,
    pub r_values: Vec<f64>,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub estimators: Vec<EstimatorKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            r_values: vec![0.004, 0.04, 0.4],
            k_values: vec![5, 25, 125],
            trials: 20_000,
            master_seed: 0,
            estimators: EstimatorKind::ALL.to_vec(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Domain(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.trials == 0 {
            return Err(Error::Domain("trials must be at least 1".into()));
        }
        if let Some(r) = self
            .r_values
            .iter()
            .find(|r| !(**r >= 0.0) || !r.is_finite())
        {
            return Err(Error::Domain(format!(
                "ratios must be finite and nonnegative, got {r}"
            )));
        }
        if self.k_values.contains(&0) {
            return Err(Error::Domain("K must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Domain("no estimators selected".into()));
        }
        Ok(())
    }
}

/// One `(r, K, estimator)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub r: f64,
    pub k: usize,
    pub estimator: EstimatorKind,
    pub nmse: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// EM runs that hit the iteration cap; they are still scored.
    pub non_converged: usize,
}

impl SweepResult {
    pub fn nmse(&self, r: f64, k: usize, estimator: EstimatorKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|row| row.r == r && row.k == k && row.estimator == estimator)
            .map(|row| row.nmse)
    }
}

/// Squared normalized errors of one trial, aligned with the requested estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub mu_x: f64,
    pub squared_errors: Vec<f64>,
    pub non_converged: usize,
}

enum Prepared {
    Mean,
    Midrange,
    QMean,
    Qml,
    Dml,
    Ggml(f64),
    Weights(WeightVector),
    Nonlinear(f64),
}

/// Everything about one `(r, K)` configuration that does not change between
/// trials: the fitted shape and the fixed weight vectors.
pub struct TrialPlan {
    r: f64,
    k: usize,
    spec: QuantizerSpec,
    kinds: Vec<EstimatorKind>,
    prepared: Vec<Prepared>,
}

impl TrialPlan {
    pub fn new(r: f64, k: usize, delta: f64, estimators: &[EstimatorKind]) -> Result<Self> {
        let spec = QuantizerSpec::new(delta)?;
        if k == 0 {
            return Err(Error::EmptyBatch);
        }
        let sigma_z = r * delta;
        let fit = fit_shape(r);
        let mut prepared = Vec::with_capacity(estimators.len());
        for &kind in estimators {
            if matches!(kind, EstimatorKind::Qml | EstimatorKind::Dml) && !(sigma_z > 0.0) {
                return Err(Error::Domain(format!("estimator `{kind}` needs r > 0")));
            }
            prepared.push(match kind {
                EstimatorKind::Mean => Prepared::Mean,
                EstimatorKind::Midrange => Prepared::Midrange,
                EstimatorKind::QMean => Prepared::QMean,
                EstimatorKind::Qml => Prepared::Qml,
                EstimatorKind::Dml => Prepared::Dml,
                EstimatorKind::Ggml => Prepared::Ggml(fit.p_hat),
                EstimatorKind::NearlyBest => Prepared::Weights(weights_nearly_best(
                    k,
                    &total_noise_params(sigma_z, delta, fit.p_hat)?,
                )?),
                EstimatorKind::AlphaTrim => Prepared::Weights(weights_alpha_outer(k, fit.alpha())?),
                EstimatorKind::Nonlinear => {
                    if k < 2 {
                        return Err(Error::Domain("the nonlinear estimator needs K >= 2".into()));
                    }
                    Prepared::Nonlinear(fit.p_hat)
                }
            });
        }
        Ok(Self {
            r,
            k,
            spec,
            kinds: estimators.to_vec(),
            prepared,
        })
    }

    pub fn estimators(&self) -> &[EstimatorKind] {
        &self.kinds
    }

    /// Draws one trial from `stream` and scores every estimator.
    pub fn run(&self, stream: RandomStream) -> Result<TrialOutcome> {
        let delta = self.spec.delta;
        let sigma_z = self.r * delta;
        let mu_x = stream
            .with_substream(RandomStream::LOCATION)
            .generator()
            .uniform(-0.5 * delta, 0.5 * delta);
        let draw = draw_paired(SignalModel::new(mu_x, sigma_z)?, self.spec, self.k, stream)?;
        let y = &draw.dithered.samples;
        let u = &draw.quantized.samples;
        let mut sorted = y.clone();
        sorted.sort_by(f64::total_cmp);
        let k = y.len() as f64;
        let mut non_converged = 0;
        let mut squared_errors = Vec::with_capacity(self.prepared.len());
        for prep in &self.prepared {
            let estimate = match prep {
                Prepared::Mean => y.iter().sum::<f64>() / k,
                Prepared::Midrange => 0.5 * (sorted[0] + sorted[sorted.len() - 1]),
                Prepared::QMean => u.iter().sum::<f64>() / k,
                Prepared::Qml | Prepared::Dml => {
                    let (samples, init) = if matches!(prep, Prepared::Qml) {
                        (u, u.iter().sum::<f64>() / k)
                    } else {
                        (y, 0.5 * (sorted[0] + sorted[sorted.len() - 1]))
                    };
                    let trace = run_em(samples, delta, sigma_z, init, EmMethod::default(), false);
                    if !trace.converged {
                        non_converged += 1;
                    }
                    trace.estimate()
                }
                Prepared::Ggml(p) => ggml_location(&sorted, *p)?,
                Prepared::Weights(w) => w.dot_sorted(&sorted)?,
                Prepared::Nonlinear(p) => nonlinear_location(&sorted, *p)?,
            };
            let e = (estimate - mu_x) / delta;
            squared_errors.push(e * e);
        }
        Ok(TrialOutcome {
            mu_x,
            squared_errors,
            non_converged,
        })
    }
}

/// Stream for trial `trial` of configuration `(r, k)`.
pub fn trial_stream(master_seed: u64, r: f64, k: usize, trial: u64) -> RandomStream {
    let tag = splitmix64(r.to_bits() ^ splitmix64(k as u64));
    RandomStream::new(master_seed, (tag << 32) ^ trial, RandomStream::SIGNAL_NOISE)
}

/// Runs a single trial; see [`TrialPlan`] for repeated trials.
pub fn run_trial(
    r: f64,
    k: usize,
    delta: f64,
    estimators: &[EstimatorKind],
    stream: RandomStream,
) -> Result<TrialOutcome> {
    TrialPlan::new(r, k, delta, estimators)?.run(stream)
}

fn worker_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Domain(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn sweep_cell(config: &SweepConfig, r: f64, k: usize, result: &mut SweepResult) -> Result<()> {
    let plan = TrialPlan::new(r, k, config.delta, &config.estimators)?;
    let outcomes: Vec<TrialOutcome> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| plan.run(trial_stream(config.master_seed, r, k, t)))
        .collect::<Result<_>>()?;
    let mut sums = vec![0.0; config.estimators.len()];
    for outcome in &outcomes {
        for (s, e) in sums.iter_mut().zip(&outcome.squared_errors) {
            *s += e;
        }
        result.non_converged += outcome.non_converged;
    }
    for (&estimator, s) in config.estimators.iter().zip(sums) {
        result.rows.push(SweepRow {
            r,
            k,
            estimator,
            nmse: s / config.trials as f64,
            trials: config.trials,
            seed: config.master_seed,
        });
    }
    Ok(())
}

/// NMSE of every requested estimator at every `(r, K)`, rows ordered by `r`,
/// then `K`, then estimator as listed in the config.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let body = || -> Result<SweepResult> {
        let mut result = SweepResult::default();
        for &r in &config.r_values {
            for &k in &config.k_values {
                sweep_cell(config, r, k, &mut result)?;
            }
        }
        Ok(result)
    };
    match worker_count()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Domain(format!("cannot start {n} workers: {e}")))?
            .install(body),
        None => body(),
    }
}

fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Serializes a sweep as CSV. The EM non-convergence count follows the rows
/// as a `#` comment; an empty result is the header alone.
pub fn write_csv<W: Write>(result: &SweepResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in &result.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            sig9(row.r),
            row.k,
            row.estimator,
            sig9(row.nmse),
            row.trials,
            row.seed
        )?;
    }
    if !result.rows.is_empty() {
        writeln!(out, "{NON_CONVERGED_TAG}{}", result.non_converged)?;
    }
    Ok(())
}

pub fn to_csv_string(result: &SweepResult) -> String {
    let mut buf = Vec::new();
    write_csv(result, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

/// Writes the CSV to `path`, or to standard output when `path` is `-`.
pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if path == Path::new("-") {
        let stdout = std::io::stdout();
        return write_csv(result, stdout.lock()).map_err(io_err);
    }
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut out = std::io::BufWriter::new(file);
    write_csv(result, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

/// Parses CSV produced by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<SweepResult> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut result = SweepResult::default();
    for (i, line) in lines {
        let line_no = i + 1;
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(count) = line.strip_prefix(NON_CONVERGED_TAG) {
            result.non_converged = count
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad count: {e}")))?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_err(format!(
                "expected 6 fields, found {}",
                fields.len()
            )));
        }
        let num = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|e| parse_err(format!("bad {what} `{s}`: {e}")))
        };
        let int = |s: &str, what: &str| {
            s.parse::<u64>()
                .map_err(|e| parse_err(format!("bad {what} `{s}`: {e}")))
        };
        result.rows.push(SweepRow {
            r: num(fields[0], "r")?,
            k: int(fields[1], "K")? as usize,
            estimator: fields[2]
                .parse()
                .map_err(|e: Error| parse_err(e.to_string()))?,
            nmse: num(fields[3], "nmse")?,
            trials: int(fields[4], "trials")? as usize,
            seed: int(fields[5], "seed")?,
        });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SweepConfig {
        SweepConfig {
            r_values: vec![0.04],
            k_values: vec![5],
            trials: 200,
            master_seed: 3,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SweepConfig::default().validate().is_ok());
        assert!(SweepConfig {
            trials: 0,
            ..small_config()
        }
        .validate()
        .is_err());
        assert!(SweepConfig {
            r_values: vec![-1.0],
            ..small_config()
        }
        .validate()
        .is_err());
        assert!(SweepConfig {
            k_values: vec![0],
            ..small_config()
        }
        .validate()
        .is_err());
        assert!(SweepConfig {
            estimators: vec![],
            ..small_config()
        }
        .validate()
        .is_err());
        assert!(SweepConfig {
            delta: 0.0,
            ..small_config()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn trial_is_deterministic() {
        let s = trial_stream(9, 0.04, 25, 17);
        let a = run_trial(0.04, 25, 1.0, &EstimatorKind::ALL, s).unwrap();
        let b = run_trial(0.04, 25, 1.0, &EstimatorKind::ALL, s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.squared_errors.len(), 9);
        assert!(a.mu_x.abs() <= 0.5);
    }

    #[test]
    fn streams_differ_across_cells() {
        assert_ne!(trial_stream(1, 0.04, 5, 0), trial_stream(1, 0.04, 25, 0));
        assert_ne!(trial_stream(1, 0.04, 5, 0), trial_stream(1, 0.4, 5, 0));
        assert_ne!(trial_stream(1, 0.04, 5, 0), trial_stream(1, 0.04, 5, 1));
    }

    #[test]
    fn midrange_error_bounded_without_noise() {
        let kinds = [EstimatorKind::Midrange, EstimatorKind::Mean];
        let plan = TrialPlan::new(0.0, 10, 1.0, &kinds).unwrap();
        for t in 0..500 {
            let o = plan.run(trial_stream(5, 0.0, 10, t)).unwrap();
            assert!(o.squared_errors[0] <= 0.25);
        }
        assert!(TrialPlan::new(0.0, 10, 1.0, &[EstimatorKind::Dml]).is_err());
    }

    #[test]
    fn single_trial_sweep() {
        let config = SweepConfig {
            trials: 1,
            ..small_config()
        };
        let result = run_sweep(&config).unwrap();
        let o = run_trial(
            0.04,
            5,
            1.0,
            &config.estimators,
            trial_stream(3, 0.04, 5, 0),
        )
        .unwrap();
        let nmse: Vec<f64> = result.rows.iter().map(|r| r.nmse).collect();
        assert_eq!(nmse, o.squared_errors);
    }

    #[test]
    fn csv_round_trip() {
        let result = run_sweep(&small_config()).unwrap();
        assert_eq!(result.rows.len(), 9);
        let text = to_csv_string(&result);
        assert!(text.starts_with(CSV_HEADER));
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.rows.len(), result.rows.len());
        assert_eq!(parsed.non_converged, result.non_converged);
        for (a, b) in parsed.rows.iter().zip(&result.rows) {
            assert_eq!(
                (a.k, a.estimator, a.trials, a.seed),
                (b.k, b.estimator, b.trials, b.seed)
            );
            assert!((a.nmse - b.nmse).abs() <= 1e-8 * b.nmse);
            assert_eq!(a.r, b.r);
        }
        assert_eq!(to_csv_string(&parsed), text);
    }

    #[test]
    fn empty_result_is_header_only() {
        assert_eq!(
            to_csv_string(&SweepResult::default()),
            format!("{CSV_HEADER}\n")
        );
        assert!(parse_csv("r,K\n").is_err());
        assert!(matches!(
            parse_csv(&format!("{CSV_HEADER}\n1,2,mean\n")),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,2,median,0.1,3,4\n")).is_err());
    }

    #[test]
    fn nine_digit_formatting() {
        assert_eq!(sig9(3.12e-5), "3.12000000e-5");
        assert_eq!(sig9(0.123456789123), "1.23456789e-1");
    }
}
