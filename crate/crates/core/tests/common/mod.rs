#![allow(dead_code)]

use ditherlab_core::estimators::bin_log_likelihood;
use ditherlab_core::numerics::{RandomStream, StreamRng};
use ditherlab_core::quantize::{draw_paired, PairedDraw, QuantizerSpec, SignalModel};

/// Maximizer of the bin log-likelihood over a uniform grid of step `step`
/// covering `[lo, hi]`.
pub fn grid_argmax(samples: &[f64], delta: f64, sigma: f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).ceil() as usize;
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..=n {
        let mu = lo + i as f64 * step;
        let ll = bin_log_likelihood(samples, delta, sigma, mu);
        if ll > best.0 {
            best = (ll, mu);
        }
    }
    best.1
}

/// Random small problem: `r` log-uniform on `[r_lo, r_hi]`, `K` in `2..=k_max`,
/// location uniform on `[-2, 2]`, unit bin width.
pub struct Instance {
    pub r: f64,
    pub k: usize,
    pub mu: f64,
    pub draw: PairedDraw,
}

pub fn random_instance(seed: u64, index: u64, r_lo: f64, r_hi: f64, k_max: usize) -> Instance {
    let mut g: StreamRng = RandomStream::new(seed, index, 7).generator();
    let r = (g.uniform(r_lo.ln(), r_hi.ln())).exp();
    let k = 2 + (g.next_u64() % (k_max as u64 - 1)) as usize;
    let mu = g.uniform(-2.0, 2.0);
    let spec = QuantizerSpec::new(1.0).unwrap();
    let draw = draw_paired(
        SignalModel::new(mu, r).unwrap(),
        spec,
        k,
        RandomStream::new(seed, index, 0),
    )
    .unwrap();
    Instance { r, k, mu, draw }
}
