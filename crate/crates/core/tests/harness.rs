use std::path::Path;

use ditherlab_core::error::Error;
use ditherlab_core::estimators::EstimatorKind::{self, *};
use ditherlab_core::harness::{
    emit_csv, parse_csv, run_sweep, to_csv_string, SweepConfig, SweepResult, THREADS_ENV,
};

fn sweep(r: &[f64], k: &[usize], trials: usize, seed: u64, kinds: &[EstimatorKind]) -> SweepResult {
    run_sweep(&SweepConfig {
        r_values: r.to_vec(),
        k_values: k.to_vec(),
        trials,
        master_seed: seed,
        estimators: kinds.to_vec(),
        ..Default::default()
    })
    .unwrap()
}

// All environment manipulation lives in this one test.
#[test]
fn output_does_not_depend_on_worker_count() {
    let run = || to_csv_string(&sweep(&[0.01, 0.3], &[4, 17], 600, 42, &EstimatorKind::ALL));
    let before = std::env::var(THREADS_ENV).ok();
    std::env::set_var(THREADS_ENV, "1");
    let one = run();
    std::env::set_var(THREADS_ENV, "4");
    let four = run();
    std::env::set_var(THREADS_ENV, "zero");
    let bad = run_sweep(&SweepConfig {
        trials: 1,
        ..Default::default()
    });
    match before {
        Some(v) => std::env::set_var(THREADS_ENV, v),
        None => std::env::remove_var(THREADS_ENV),
    }
    assert_eq!(one, four);
    assert!(bad.is_err());
    assert_eq!(one, run());
}

#[test]
fn nmse_is_stable_across_seeds() {
    for &r in &[0.004, 0.04, 0.4] {
        for kind in [Mean, Dml] {
            let v: Vec<f64> = [1, 2, 3]
                .iter()
                .map(|&s| {
                    sweep(&[r], &[25], 20_000, s, &[kind])
                        .nmse(r, 25, kind)
                        .unwrap()
                })
                .collect();
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(hi / lo - 1.0 < 0.05, "{kind} at r={r}: {v:?}");
        }
    }
}

#[test]
fn gg_family_improves_as_noise_shrinks() {
    let rs = [0.4, 0.04, 0.004];
    let kinds = [Dml, Ggml, NearlyBest, AlphaTrim];
    let res = sweep(&rs, &[125], 4000, 9, &kinds);
    for kind in kinds {
        let v: Vec<f64> = rs
            .iter()
            .map(|&r| res.nmse(r, 125, kind).unwrap())
            .collect();
        assert!(v.windows(2).all(|w| w[1] <= 1.02 * w[0]), "{kind}: {v:?}");
    }
}

#[test]
fn mean_matches_total_noise_variance() {
    let res = sweep(&[0.4], &[125], 20_000, 3, &[Mean]);
    let v = res.nmse(0.4, 125, Mean).unwrap();
    let want = (0.16 + 1.0 / 12.0) / 125.0;
    assert!((v / want - 1.0).abs() < 0.05, "{v} vs {want}");
}

#[test]
fn csv_file_round_trip_and_bad_path() {
    let res = sweep(&[0.04], &[5, 25], 200, 11, &[Mean, Midrange, Qml]);
    let path = std::env::temp_dir().join(format!("ditherlab-sweep-{}.csv", std::process::id()));
    emit_csv(&res, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 6 + 1);
    let back = parse_csv(&text).unwrap();
    assert_eq!(back.rows.len(), 6);
    assert_eq!(back.non_converged, res.non_converged);
    for (a, b) in back.rows.iter().zip(&res.rows) {
        assert_eq!(
            (a.k, a.estimator, a.trials, a.seed),
            (b.k, b.estimator, b.trials, b.seed)
        );
        assert!((a.nmse / b.nmse - 1.0).abs() < 1e-8);
    }

    let bad = Path::new("/nonexistent-dir/for/sure/out.csv");
    match emit_csv(&res, bad) {
        Err(Error::Io { path, .. }) => assert_eq!(path, bad),
        other => panic!("expected an I/O error, got {other:?}"),
    }
}
