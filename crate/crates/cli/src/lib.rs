//! Command-line front end. [`run`] parses arguments, dispatches to the core
//! library and returns the process exit code: 0 on success, 1 on a usage or
//! input error, 2 when a numerical method fails to converge.

// `!(x >= 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ditherlab_core::bounds::{xi1, xi1_fit_cubic, xi1_fit_linear, xi2, xi2_fit, BoundCurve};
use ditherlab_core::estimators::{estimate, EstimatorKind};
use ditherlab_core::ggapprox::fit_shape;
use ditherlab_core::harness::{emit_csv, run_sweep, write_csv, SweepConfig};
use ditherlab_core::{Error, MeasurementBatch};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ditherlab",
    version,
    about = "Location estimation from dithered quantized measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo NMSE of the chosen estimators over an (r, K) grid.
    Simulate(Simulate),
    /// Analytic NMSE curves and the Cramer-Rao bound over a grid of r.
    Bounds(Bounds),
    /// Regime boundaries for a batch size.
    Regimes {
        #[arg(long = "k")]
        k: usize,
    },
    /// Kurtosis-matched generalized Gaussian shape for a noise ratio.
    Fitp {
        #[arg(long)]
        ratio: f64,
    },
    /// Runs one estimator on a serialized batch.
    Estimate(Estimate),
}

#[derive(Debug, Args)]
struct Simulate {
    /// Noise-to-bin ratios sigma_z / delta, comma separated.
    #[arg(long = "r", value_delimiter = ',', required = true)]
    r: Vec<f64>,
    /// Batch sizes, comma separated.
    #[arg(long = "k", value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long, default_value_t = 20_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Estimator names, comma separated (default: all).
    #[arg(long)]
    estimators: Option<String>,
    /// Output path, `-` for standard output.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Bounds {
    #[arg(long = "k")]
    k: usize,
    /// `lo:hi:n`, n evenly spaced points including both ends.
    #[arg(long = "r-grid")]
    r_grid: String,
    /// Space the grid geometrically instead of linearly.
    #[arg(long)]
    log: bool,
}

#[derive(Debug, Args)]
struct Estimate {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    estimator: EstimatorKind,
    /// Overrides the noise level recorded in the batch header.
    #[arg(long = "sigma-z")]
    sigma_z: Option<f64>,
    /// Generalized Gaussian shape for ggml, nearly_best and nonlinear.
    #[arg(long, conflicts_with = "auto_p")]
    p: Option<f64>,
    /// Fit the shape from the header's sigma_z / delta.
    #[arg(long = "auto-p")]
    auto_p: bool,
}

/// Parses `args` (program name first) and runs the subcommand, writing results
/// to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } | Error::NoSignChange { .. } => EXIT_NONCONVERGENCE,
        _ => EXIT_USAGE,
    }
}

fn io_err(source: std::io::Error) -> Error {
    Error::Io {
        path: "-".into(),
        source,
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    match command {
        Command::Simulate(s) => simulate(s, out, err),
        Command::Bounds(b) => {
            let grid = parse_grid(&b.r_grid, b.log)?;
            writeln!(out, "{}", BoundCurve::CSV_HEADER).map_err(io_err)?;
            for r in grid {
                writeln!(out, "{}", BoundCurve::compute(r, b.k)?.csv_row()).map_err(io_err)?;
            }
            Ok(EXIT_OK)
        }
        Command::Regimes { k } => {
            let fit2 = xi2_fit(k).unwrap_or(f64::NAN);
            writeln!(out, "K,xi1,xi1_fit_cubic,xi1_fit_linear,xi2,xi2_fit").map_err(io_err)?;
            writeln!(
                out,
                "{k},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
                xi1(k)?,
                xi1_fit_cubic(k),
                xi1_fit_linear(k),
                xi2(k)?,
                fit2
            )
            .map_err(io_err)?;
            Ok(EXIT_OK)
        }
        Command::Fitp { ratio } => {
            if !(ratio >= 0.0) || !ratio.is_finite() {
                return Err(Error::Domain(format!(
                    "ratio must be finite and non-negative, got {ratio}"
                )));
            }
            let fit = fit_shape(ratio);
            writeln!(out, "r,p_hat,excess_kurtosis").map_err(io_err)?;
            writeln!(
                out,
                "{:.8e},{:.8e},{:.8e}",
                fit.sigma_over_delta, fit.p_hat, fit.target_excess_kurtosis
            )
            .map_err(io_err)?;
            Ok(EXIT_OK)
        }
        Command::Estimate(e) => run_estimate(e, out, err),
    }
}

fn simulate(s: Simulate, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    let estimators = match &s.estimators {
        Some(list) => EstimatorKind::parse_list(list)?,
        None => EstimatorKind::ALL.to_vec(),
    };
    let result = run_sweep(&SweepConfig {
        r_values: s.r,
        k_values: s.k,
        trials: s.trials,
        master_seed: s.seed,
        estimators,
        ..Default::default()
    })?;
    if s.out.as_os_str() == "-" {
        write_csv(&result, &mut *out).map_err(io_err)?;
    } else {
        emit_csv(&result, &s.out)?;
    }
    if result.non_converged > 0 {
        let _ = writeln!(
            err,
            "note: {} EM runs hit the iteration cap; their last iterate was used",
            result.non_converged
        );
    }
    Ok(EXIT_OK)
}

fn run_estimate(e: Estimate, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    let batch = MeasurementBatch::read_csv(&e.input)?;
    let header_sigma = batch.truth.map(|t| t.sigma_z);
    let sigma = e.sigma_z.or(header_sigma);
    let p = if e.auto_p {
        let s = header_sigma
            .ok_or_else(|| Error::Domain("--auto-p needs sigma_z in the batch header".into()))?;
        Some(fit_shape(s / batch.spec.delta).p_hat)
    } else {
        e.p
    };
    let est = estimate(e.estimator, &batch, sigma, p)?;
    writeln!(out, "estimator,estimate,iterations").map_err(io_err)?;
    writeln!(out, "{},{:.15e},{}", e.estimator, est.value, est.iterations).map_err(io_err)?;
    if !est.converged {
        let _ = writeln!(
            err,
            "error: EM did not converge in {} iterations",
            est.iterations
        );
        return Ok(EXIT_NONCONVERGENCE);
    }
    Ok(EXIT_OK)
}

/// `lo:hi:n` into `n` points from `lo` to `hi` inclusive.
fn parse_grid(spec: &str, log: bool) -> Result<Vec<f64>, Error> {
    let bad = |msg: &str| Error::Domain(format!("--r-grid `{spec}`: {msg}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(bad("expected lo:hi:n"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad("lo is not a number"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad("hi is not a number"))?;
    let n: usize = n.trim().parse().map_err(|_| bad("n is not a count"))?;
    if n == 0 || !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(bad("need 0 < lo <= hi and n >= 1"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let step = |i: usize| i as f64 / (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            if log {
                lo * (hi / lo).powf(step(i))
            } else {
                lo + (hi - lo) * step(i)
            }
        })
        .collect())
}
