mod common;

use common::*;
use nalgebra::DVector;
use selinf::cv::{cv_lambda, CvOptions};
use selinf::inference::{estimate_sigma_reid, universal_lambda, Method, TargetKind};
use selinf::simulation::*;

fn base(n: usize, p: usize) -> StudyConfig {
    StudyConfig {
        n,
        p,
        k_signals: 3,
        signal_level: SignalLevel::Low,
        design: DesignScheme::Independent,
        noise: NoiseScheme::normal(1.0),
        lambda_rule: LambdaRule::Universal,
        methods: vec![Method::Naive, Method::TzV, Method::TzM, Method::TzMs],
        target_kind: TargetKind::Partial,
        alpha: 0.1,
        replications: 12,
        seed: 99,
        sigma_mode: SigmaMode::Known,
        lambda_high: None,
        cutoff: None,
        delta_reps: 200,
        cv_reps: 10,
        failure_budget: 0.01,
    }
}

fn moments(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m, m2, m4 / (m2 * m2) - 3.0)
}

#[test]
fn t3_noise_is_heavy_tailed() {
    let mut r = rng(5);
    let e = NoiseScheme {
        kind: NoiseKind::StudentT { dof: 3.0 },
        sigma: 1.0,
    }
    .sample(100_000, &mut r)
    .unwrap();
    let (_, _, excess) = moments(e.as_slice());
    assert!(excess > 3.0, "excess kurtosis {excess}");
}

#[test]
fn normal_noise_variance_at_n_1000() {
    let x = gen_design(1000, 4, &DesignScheme::Independent, 1).unwrap();
    let beta = DVector::from_column_slice(&[1.0, 0.0, -1.0, 2.0]);
    let sigma = 1.7;
    let y = gen_response(&x, &beta, &NoiseScheme::normal(sigma), 2).unwrap();
    let e = y.values() - x.matrix() * &beta;
    let (_, var, _) = moments(e.as_slice());
    assert!((var / (sigma * sigma) - 1.0).abs() < 0.2, "{var}");
}

#[test]
fn generators_are_deterministic_in_the_seed() {
    let s = DesignScheme::Toeplitz { rho: 0.5 };
    assert_eq!(gen_design(20, 7, &s, 4).unwrap(), gen_design(20, 7, &s, 4).unwrap());
    assert_ne!(gen_design(20, 7, &s, 4).unwrap(), gen_design(20, 7, &s, 5).unwrap());
    let x = gen_design(20, 7, &s, 4).unwrap();
    let b = DVector::from_element(7, 0.3);
    let noise = NoiseScheme {
        kind: NoiseKind::SkewNormal { shape: 10.0 },
        sigma: 1.0,
    };
    assert_eq!(gen_response(&x, &b, &noise, 8).unwrap(), gen_response(&x, &b, &noise, 8).unwrap());
}

#[test]
fn rho_one_is_rejected() {
    assert!(gen_design(10, 4, &DesignScheme::Toeplitz { rho: 1.0 }, 1).is_err());
    assert!(gen_design(10, 4, &DesignScheme::BlockEquicorr { rho: 1.0, blocks: 2 }, 1).is_err());
    assert!(gen_design(10, 5, &DesignScheme::BlockEquicorr { rho: 0.5, blocks: 2 }, 1).is_err());
}

#[test]
fn delta_brackets_the_universal_threshold() {
    for p in [50, 250] {
        let (lo, hi) = calibrate_delta(100, p, &DesignScheme::Independent, 400, 3).unwrap();
        let u = universal_lambda(100, p);
        assert!(lo < hi);
        assert!((lo / u - 1.0).abs() < 0.2, "p={p}: δ_low {lo} vs √(2 log p/n) {u}");
    }
}

#[test]
fn universal_lambda_values() {
    for (p, want) in [(50, 0.28), (250, 0.33), (1250, 0.38)] {
        let got = universal_lambda(100, p);
        assert!((got - (2.0 * (p as f64).ln() / 100.0).sqrt()).abs() < 1e-15);
        assert!((got - want).abs() < 0.005, "p={p}: {got}");
    }
}

#[test]
fn cv_on_pure_noise_stays_on_the_grid() {
    let mut r = rng(8);
    let x = design(60, 30, &mut r);
    let y = normal_vector(60, &mut r);
    let cv = cv_lambda(x.matrix(), &y, &CvOptions::default()).unwrap();
    let top = x.matrix().tr_mul(&y).amax() / 60.0;
    assert!((cv.grid[0] - top).abs() < 1e-12 * top);
    assert!(cv.lambda <= cv.grid[0] && cv.grid.contains(&cv.lambda));
    assert_eq!(cv.grid.len(), 50);
    assert!((cv.grid[49] / top - 1e-3).abs() < 1e-12);
}

#[test]
fn cv_median_near_reported_value() {
    // n = 100, p = 50, five signals at δ_low
    let (signal, _) = calibrate_delta(100, 50, &DesignScheme::Independent, 1000, 20240601).unwrap();
    let lam = calibrate_lambda_cv(
        100,
        50,
        &DesignScheme::Independent,
        5,
        signal,
        &NoiseScheme::normal(1.0),
        100,
        20240601,
    )
    .unwrap();
    assert!((lam - 0.14).abs() < 0.02, "{lam}");
}

#[test]
fn reid_estimate_is_close_to_sigma() {
    let sigma = 1.5;
    let mut est: Vec<f64> = (0..100u64)
        .map(|r| {
            let x = gen_design(200, 10, &DesignScheme::Independent, 1000 + r).unwrap();
            let mut b = DVector::zeros(10);
            b[0] = 1.0;
            b[1] = -0.5;
            let y = gen_response(&x, &b, &NoiseScheme::normal(sigma), 2000 + r).unwrap();
            estimate_sigma_reid(&x, y.values(), r).unwrap()
        })
        .collect();
    est.sort_by(f64::total_cmp);
    let med = (est[49] + est[50]) / 2.0;
    assert!((med / sigma - 1.0).abs() < 0.15, "{med}");
}

#[test]
fn report_is_independent_of_thread_count() {
    let cfg = base(40, 12);
    let one = run_study_with_threads(&cfg, Some(1)).unwrap();
    let four = run_study_with_threads(&cfg, Some(4)).unwrap();
    assert_eq!(one, four);
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&four).unwrap());
    let again = run_study(&cfg).unwrap();
    assert_eq!(one, again);
}

#[test]
fn zero_selection_replication() {
    let cfg = StudyConfig {
        signal_level: SignalLevel::Null,
        lambda_rule: LambdaRule::Explicit(100.0),
        replications: 1,
        ..base(30, 8)
    };
    let rep = run_study(&cfg).unwrap();
    assert_eq!(rep.selected_total, 0);
    assert_eq!(rep.zero_selection_replications, 1);
    for m in &rep.methods {
        assert_eq!(m.intervals, 0);
        assert!(m.coverage.is_nan());
    }
}

#[test]
fn report_invariants_hold() {
    let cfg = StudyConfig {
        methods: vec![Method::Naive, Method::Bonferroni, Method::TzV, Method::TzM, Method::TzStabT, Method::TzStabL1],
        replications: 20,
        ..base(50, 20)
    };
    let rep = run_study(&cfg).unwrap();
    assert_eq!(rep.replications_run, 20);
    for m in &rep.methods {
        assert!((0.0..=1.0).contains(&m.coverage), "{m:?}");
        assert!(m.covered <= m.intervals && m.infinite_count <= m.intervals);
        assert!(m.median_length >= m.median_length_finite || m.median_length_finite.is_nan());
        let b = m.finite_length_box;
        assert!(b.min <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.max);
    }
    // naive and TZ_V build one interval per selected variable
    assert_eq!(rep.method(Method::Naive).unwrap().intervals, rep.selected_total);
    let csv = rep.to_csv().unwrap();
    assert_eq!(csv.lines().count(), 1 + cfg.methods.len());
    let back: StudyReport = serde_json::from_str(&serde_json::to_string(&rep).unwrap()).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&rep).unwrap());
}

#[test]
fn invalid_config_lists_fields() {
    let cfg = StudyConfig {
        k_signals: 40,
        alpha: 1.5,
        replications: 0,
        ..base(30, 8)
    };
    let probs = cfg.problems();
    assert_eq!(probs.len(), 3, "{probs:?}");
    assert!(run_study(&cfg).is_err());
}

#[test]
fn cv_median_high_signal_p250() {
    let (_, signal) = calibrate_delta(100, 250, &DesignScheme::Independent, 1000, 20240601).unwrap();
    let lam = calibrate_lambda_cv(
        100,
        250,
        &DesignScheme::Independent,
        5,
        signal,
        &NoiseScheme::normal(1.0),
        100,
        20240601,
    )
    .unwrap();
    assert!((lam - 0.14).abs() < 0.02, "{lam}");
}
