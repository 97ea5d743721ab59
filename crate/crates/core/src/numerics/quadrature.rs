//! Globally adaptive Gauss-Kronrod (7, 15) quadrature.

use crate::error::{Error, Result};

use super::ToleranceConfig;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[lo, hi]`.
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate drops below `abs_tol * (1 + |result|)`. At most `max_iter`
/// bisections are performed; exceeding that reports non-convergence.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: &ToleranceConfig) -> Result<f64> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain(format!(
            "integrate requires finite lo < hi, got [{lo}, {hi}]"
        )));
    }
    let first = gauss_kronrod(&f, lo, hi);
    if !first.value.is_finite() {
        return Err(Error::Domain(
            "integrand is not finite on the interval".into(),
        ));
    }
    let mut segments = vec![first];
    for _ in 0..tol.max_iter {
        let (value, error) = totals(&segments);
        if error <= tol.abs_tol * (1.0 + value.abs()) {
            return Ok(value);
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.lo + seg.hi);
        if mid <= seg.lo || mid >= seg.hi {
            // interval at machine resolution; keep its estimate as is
            segments.push(Segment { error: 0.0, ..seg });
            continue;
        }
        segments.push(gauss_kronrod(&f, seg.lo, mid));
        segments.push(gauss_kronrod(&f, mid, seg.hi));
    }
    let (value, error) = totals(&segments);
    if error <= tol.abs_tol * (1.0 + value.abs()) {
        Ok(value)
    } else {
        Err(Error::NonConvergence {
            what: "adaptive quadrature",
            iterations: tol.max_iter,
        })
    }
}

fn totals(segments: &[Segment]) -> (f64, f64) {
    segments
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
}
