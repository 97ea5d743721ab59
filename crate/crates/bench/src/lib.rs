//! Benchmark fixtures: reproducible batches at the operating points of interest.

use ditherlab_core::numerics::RandomStream;
use ditherlab_core::quantize::{draw_paired, PairedDraw, QuantizerSpec, SignalModel};

/// Noise ratios spanning the uniform-like, transition and Gaussian-like regimes.
pub const RATIOS: [f64; 3] = [0.004, 0.04, 0.4];

/// A paired dithered/quantized draw of `k` samples at ratio `r`, unit bin.
pub fn paired_batch(r: f64, k: usize, seed: u64) -> PairedDraw {
    draw_paired(
        SignalModel::new(0.37, r).expect("valid model"),
        QuantizerSpec::new(1.0).expect("valid bin"),
        k,
        RandomStream::new(seed, 0, 0),
    )
    .expect("k > 0")
}
