//! Expectation-maximization for the quantized-sample and dithered-sample
//! maximum likelihood estimates.
//!
//! Both likelihoods have the same form. Each measurement `y` confines
//! `mu + Z` to the bin `[y - delta/2, y + delta/2]`, and the log-likelihood is
//! `sum ln(Phi(b) - Phi(a))` with `a = (y - delta/2 - mu)/sigma` and
//! `b = (y + delta/2 - mu)/sigma`. The EM step replaces `mu` by the average
//! conditional mean of `mu + Z` given its bin.
//!
//! When the bins overlap heavily (small `sigma / delta`) the likelihood has a
//! nearly flat top and plain EM contracts toward the maximizer at a rate close
//! to one: it can stall hundreds of iterations short of the fixed point while
//! its steps are already below the stopping threshold. [`EmMethod::Extrapolated`]
//! therefore follows every two EM steps with an Aitken extrapolation of the
//! same map, kept only if it strictly raises the likelihood, so the iterates
//! stay monotone and the fixed point is unchanged.

use crate::numerics::{ln_normal_interval_prob, truncated_normal_mean};

/// Cap on EM map evaluations.
pub const EM_MAX_ITER: usize = 500;
/// Stopping threshold on an EM step, in units of the bin width.
pub const EM_STEP_TOL: f64 = 1e-9;

/// Beyond this many standard deviations on both sides a bin holds all the
/// mass and contributes nothing to the step.
const FULL_BIN: f64 = 40.0;

/// How the EM map is iterated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmMethod {
    /// Plain fixed-point iteration of the EM map.
    Plain,
    /// EM steps in pairs, each pair followed by a likelihood-guarded Aitken
    /// extrapolation.
    #[default]
    Extrapolated,
}

/// Iterates and log-likelihoods of one EM run.
///
/// `iterates[0]` is the starting point; `log_likelihoods` is aligned with
/// `iterates`. `iterations` counts EM map evaluations, so with extrapolation
/// there are more iterates than iterations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmTrace {
    pub iterates: Vec<f64>,
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl EmTrace {
    pub fn estimate(&self) -> f64 {
        *self
            .iterates
            .last()
            .expect("trace holds at least the starting point")
    }

    /// Largest decrease between consecutive log-likelihoods, 0 when monotone.
    pub fn worst_decrease(&self) -> f64 {
        self.log_likelihoods
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

/// Bin log-likelihood of `mu`.
pub fn bin_log_likelihood(samples: &[f64], delta: f64, sigma: f64, mu: f64) -> f64 {
    let half = 0.5 * delta;
    samples
        .iter()
        .map(|&y| ln_normal_interval_prob((y - half - mu) / sigma, (y + half - mu) / sigma))
        .sum()
}

fn em_step(samples: &[f64], delta: f64, sigma: f64, mu: f64) -> f64 {
    let half = 0.5 * delta;
    let shift: f64 = samples
        .iter()
        .map(|&y| {
            let a = (y - half - mu) / sigma;
            let b = (y + half - mu) / sigma;
            if a < -FULL_BIN && b > FULL_BIN {
                0.0
            } else {
                truncated_normal_mean(a, b)
            }
        })
        .sum();
    sigma * shift / samples.len() as f64
}

struct Run<'a> {
    samples: &'a [f64],
    delta: f64,
    sigma: f64,
    record: bool,
    trace: EmTrace,
}

impl Run<'_> {
    fn ll(&self, mu: f64) -> f64 {
        bin_log_likelihood(self.samples, self.delta, self.sigma, mu)
    }

    fn push(&mut self, mu: f64, ll: Option<f64>) {
        if self.record {
            self.trace.iterates.push(mu);
            let ll = ll.unwrap_or_else(|| self.ll(mu));
            self.trace.log_likelihoods.push(ll);
        } else {
            self.trace.iterates[0] = mu;
        }
    }

    /// One EM map evaluation; returns the new point and the step taken.
    fn step(&mut self, mu: f64) -> (f64, f64) {
        let s = em_step(self.samples, self.delta, self.sigma, mu);
        let next = mu + s;
        self.trace.iterations += 1;
        self.push(next, None);
        (next, s)
    }

    fn exhausted(&self) -> bool {
        self.trace.iterations >= EM_MAX_ITER
    }
}

/// Runs EM from `init`. With `record` unset only the final iterate is kept and
/// log-likelihoods are evaluated only where extrapolation needs them.
pub(crate) fn run_em(
    samples: &[f64],
    delta: f64,
    sigma: f64,
    init: f64,
    method: EmMethod,
    record: bool,
) -> EmTrace {
    let mut run = Run {
        samples,
        delta,
        sigma,
        record,
        trace: EmTrace {
            iterates: vec![init],
            ..EmTrace::default()
        },
    };
    if record {
        let ll = run.ll(init);
        run.trace.log_likelihoods.push(ll);
    }
    let tol = EM_STEP_TOL * delta;
    let mut start = init;
    while !run.exhausted() {
        let (mu1, s1) = run.step(start);
        if method == EmMethod::Plain {
            if s1.abs() < tol {
                run.trace.converged = true;
                break;
            }
            start = mu1;
            continue;
        }
        if run.exhausted() {
            run.trace.converged = s1.abs() < tol;
            break;
        }
        let (mu2, s2) = run.step(mu1);
        // Aitken's delta-squared, exact for a linear map. It is formed from the
        // steps themselves rather than from differences of iterates, which lose
        // their digits when the steps are tiny next to |mu|. The correction also
        // estimates the distance still to go, which a small step alone does not
        // bound when the map contracts slowly.
        let ahead = -s2 * s2 / (s2 - s1);
        let mut moved = false;
        if ahead.is_finite() && ahead.abs() >= tol {
            let mut ll_mu2 = None;
            let mut reach = ahead;
            // a rejected jump is retried shorter a few times before giving up
            for _ in 0..4 {
                let ll_base =
                    *ll_mu2.get_or_insert_with(|| match run.trace.log_likelihoods.last() {
                        Some(&ll) if record => ll,
                        _ => run.ll(mu2),
                    });
                let jump = mu2 + reach;
                let ll_jump = run.ll(jump);
                if ll_jump > ll_base {
                    run.push(jump, Some(ll_jump));
                    start = jump;
                    moved = true;
                    break;
                }
                reach *= 0.5;
                if reach.abs() < tol {
                    break;
                }
            }
        }
        if !moved {
            if s1.abs() < tol && s2.abs() < tol {
                run.trace.converged = true;
                break;
            }
            start = mu2;
        }
    }
    run.trace
}
