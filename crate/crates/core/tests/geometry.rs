mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use selinf::geometry::*;
use selinf::lasso::*;
use selinf::linalg::ols_contrast;

struct Instance {
    x: DesignMatrix,
    y: DVector<f64>,
    lambda: f64,
    fit: LassoFit,
}

/// Random problem with a non-empty active set at λ = frac·λ_max.
fn instance(seed: u64, n: usize, p: usize, frac: f64) -> Instance {
    let mut r = rng(seed);
    loop {
        let x = design(n, p, &mut r);
        let mut beta = DVector::zeros(p);
        beta[0] = 1.0;
        beta[p - 1] = -0.7;
        let y = x.matrix() * beta + normal_vector(n, &mut r);
        let lambda = frac * null_threshold(x.matrix(), &y);
        let fit = fit_lasso(&x, &ResponseVector::new(y.clone()).unwrap(), &LassoOptions::with_penalty(lambda)).unwrap();
        if !fit.active_set.is_empty() && fit.active_set.len() < n {
            return Instance { x, y, lambda, fit };
        }
    }
}

fn window(line: &LineDecomposition, half: f64) -> (f64, f64) {
    let s = line.eta_norm();
    (line.z_obs - half * s, line.z_obs + half * s)
}

fn clip(set: &TruncationSet, (lo, hi): (f64, f64)) -> TruncationSet {
    set.intersect(&TruncationSet::single(lo, hi))
}

/// Drop slivers the grid cannot resolve, then compare endpoints.
fn same_set(a: &TruncationSet, b: &TruncationSet, min_len: f64) -> f64 {
    let keep = |s: &TruncationSet| -> Vec<(f64, f64)> { pairs(s).into_iter().filter(|p| p.1 - p.0 >= min_len).collect() };
    endpoint_gap(&keep(a), &keep(b))
}

fn grid_for(line: &LineDecomposition, w: (f64, f64)) -> Vec<f64> {
    uniform_grid(w.0, w.1, 1e-3 * line.eta_norm())
}

#[test]
fn slab_formula_matches_vertex_scan_on_200_polyhedra() {
    let mut r = rng(21);
    for case in 0..200 {
        let n = 2 + case % 6;
        let m = 1 + (case * 7) % 12;
        let a = normal_matrix(m, n, &mut r);
        let y0 = normal_vector(n, &mut r);
        let slack = normal_vector(m, &mut r).map(|v| v.abs() + 0.05);
        let b = &a * &y0 + slack;
        let eta = normal_vector(n, &mut r);
        let poly = Polyhedron::new(a.clone(), b.clone()).unwrap();
        let line = LineDecomposition::new(eta, &y0).unwrap();
        let (lo, hi, _) = truncation_interval(&poly, &line).unwrap();
        let (olo, ohi) = vertex_scan(&a, &b, &line.nu, &line.c).expect("y0 is feasible");
        let close = |u: f64, v: f64| u == v || (u - v).abs() <= 1e-8 * (1.0 + u.abs());
        assert!(close(lo, olo) && close(hi, ohi), "case {case}: ({lo}, {hi}) vs ({olo}, {ohi})");
    }
}

#[test]
fn polyhedron_membership_agrees_with_refit() {
    for inst in 0..20u64 {
        let pb = instance(100 + inst, 15, 6, 0.4);
        let poly = polyhedron_for_model_signs(&pb.x, &pb.fit.active_set, &pb.fit.signs, pb.lambda).unwrap();
        let solver = LassoSolver::new(pb.x.matrix());
        let opts = LassoOptions::with_penalty(pb.lambda);
        let mut r = rng(900 + inst);
        let (mut inside, mut outside) = (0, 0);
        for _ in 0..1000 {
            let y = &pb.y + normal_vector(15, &mut r) * 0.3;
            let ay = &poly.a * &y;
            let margin = (0..poly.b.len()).map(|k| poly.b[k] - ay[k]).fold(f64::INFINITY, f64::min);
            if margin.abs() < 1e-7 {
                continue;
            }
            let f = solver.solve(&y, &opts, None).unwrap();
            let same = f.active_set == pb.fit.active_set && f.signs == pb.fit.signs;
            assert_eq!(margin > 0.0, same, "instance {inst}, margin {margin}");
            if same { inside += 1 } else { outside += 1 }
        }
        assert!(inside > 0, "instance {inst}: no draws inside ({outside} outside)");
    }
}

#[test]
fn empty_model_region_is_the_central_parallelogram() {
    let (rho, lambda) = (0.6f64, 1.0);
    let x = DesignMatrix::from_row_slice(2, 2, &[1.0, rho, 0.0, (1.0 - rho * rho).sqrt()]).unwrap();
    let poly = polyhedron_for_model_signs(&x, &[], &[], lambda).unwrap();
    let mut r = rng(22);
    for _ in 0..2000 {
        let y = normal_vector(2, &mut r) * 1.5;
        let s = x.matrix().tr_mul(&y);
        let want = s[0].abs() <= lambda && s[1].abs() <= lambda;
        assert_eq!(poly.contains(&y, 0.0), want, "{y:?}");
    }
}

#[test]
fn two_by_two_case_one_segments() {
    let lambda = 1.0;
    let x = DesignMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
    let y = DVector::from_vec(vec![-2.3, 0.4]);
    let line = LineDecomposition::new(DVector::from_vec(vec![1.0, 0.0]), &y).unwrap();
    let part = line_partition(&x, &line, lambda, (-10.0, 10.0)).unwrap();
    let summary: Vec<(Vec<usize>, Vec<i8>)> = part.segments.iter().map(|s| (s.active.clone(), s.signs.clone())).collect();
    assert_eq!(summary, vec![(vec![0], vec![-1]), (vec![], vec![]), (vec![0], vec![1])]);
    assert!((part.segments[0].z_hi + lambda).abs() < 1e-9);
    assert!((part.segments[2].z_lo - lambda).abs() < 1e-9);

    let ms = model_sign_truncation(&part, &[0], &[-1]).unwrap();
    assert_eq!(ms.len(), 1);
    assert_eq!(ms.inf(), f64::NEG_INFINITY);
    assert!((ms.sup() + lambda).abs() < 1e-9);
    for set in [model_truncation(&part, &[0]).unwrap(), variable_truncation(&part, 0).unwrap()] {
        assert!(endpoint_gap(&pairs(&set), &[(f64::NEG_INFINITY, -lambda), (lambda, f64::INFINITY)]) < 1e-9);
    }
}

#[test]
fn orthonormal_design_gives_plus_minus_lambda() {
    let mut r = rng(23);
    let q = normal_matrix(12, 4, &mut r).qr().q();
    let x = DesignMatrix::new(q, None).unwrap();
    let y = normal_vector(12, &mut r) * 3.0;
    for j in 0..4 {
        let set = full_target_truncation(&x, &ResponseVector::new(y.clone()).unwrap(), j, 0.7).unwrap();
        assert!(endpoint_gap(&pairs(&set), &[(f64::NEG_INFINITY, -0.7), (0.7, f64::INFINITY)]) < 1e-9);
    }
}

#[test]
fn partition_midpoints_refit_and_endpoints_match_polyhedra() {
    for inst in 0..15u64 {
        let pb = instance(200 + inst, 25, 10, 0.3);
        let eta = ols_contrast(pb.x.matrix(), &pb.fit.active_set, 0).unwrap();
        let line = LineDecomposition::new(eta, &pb.y).unwrap();
        let part = line_partition(&pb.x, &line, pb.lambda, window(&line, 20.0)).unwrap();
        let solver = LassoSolver::new(pb.x.matrix());
        let opts = LassoOptions::with_penalty(pb.lambda);
        for (k, s) in part.segments.iter().enumerate() {
            let f = solver.solve(&line.point(s.midpoint()), &opts, None).unwrap();
            assert_eq!((&f.active_set, &f.signs), (&s.active, &s.signs), "instance {inst} segment {k}");
            if s.active.len() >= pb.x.n() {
                continue;
            }
            let poly = polyhedron_for_model_signs(&pb.x, &s.active, &s.signs, pb.lambda).unwrap();
            let (lo, hi, _) = truncation_interval(&poly, &line).unwrap();
            if k > 0 {
                assert!((lo - s.z_lo).abs() < 1e-8 * (1.0 + lo.abs()), "instance {inst} segment {k}: {lo} vs {}", s.z_lo);
            }
            if k + 1 < part.segments.len() {
                assert!((hi - s.z_hi).abs() < 1e-8 * (1.0 + hi.abs()), "instance {inst} segment {k}: {hi} vs {}", s.z_hi);
            }
        }
        for w in part.segments.windows(2) {
            assert_eq!(w[0].z_hi, w[1].z_lo);
        }
    }
}

#[test]
fn closed_form_matches_partition_and_line_scan() {
    for inst in 0..50u64 {
        let pb = instance(300 + inst, 20, 5, 0.35);
        let j = pb.fit.active_set[0];
        let yv = ResponseVector::new(pb.y.clone()).unwrap();
        let (a, b) = full_target_truncation_with(&pb.x, &yv, j, pb.lambda, &LassoOptions::default()).unwrap();
        let all: Vec<usize> = (0..5).collect();
        let line = LineDecomposition::new(ols_contrast(pb.x.matrix(), &all, j).unwrap(), &pb.y).unwrap();
        let part = line_partition(&pb.x, &line, pb.lambda, window(&line, 20.0)).unwrap();
        let tv = variable_truncation(&part, j).unwrap();
        let gap = endpoint_gap(&pairs(&tv), &[(f64::NEG_INFINITY, a), (b, f64::INFINITY)]);
        assert!(gap < 1e-6, "instance {inst}: {:?} vs ({a}, {b})", pairs(&tv));

        // dense scan: 10⁴ fresh solves spanning both endpoints
        let s = line.eta_norm();
        let (lo, hi) = (a.min(line.z_obs) - 2.0 * s, b.max(line.z_obs) + 2.0 * s);
        let step = (hi - lo) / 9999.0;
        let solver = LassoSolver::new(pb.x.matrix());
        let opts = LassoOptions::with_penalty(pb.lambda);
        let sel: Vec<bool> = (0..10_000)
            .map(|k| solver.solve(&line.point(lo + step * k as f64), &opts, None).unwrap().is_active(j))
            .collect();
        let flips: Vec<f64> = (1..sel.len()).filter(|&k| sel[k] != sel[k - 1]).map(|k| lo + step * (k as f64 - 0.5)).collect();
        assert_eq!(flips.len(), 2, "instance {inst}");
        assert!((flips[0] - a).abs() <= step && (flips[1] - b).abs() <= step, "instance {inst}");
    }
}

#[test]
fn analytic_sets_match_grid_oracle() {
    for inst in 0..20u64 {
        let pb = instance(400 + inst, 30, 8, 0.3);
        let m = pb.fit.active_set.clone();
        let j = m[0];
        let eta = ols_contrast(pb.x.matrix(), &m, 0).unwrap();
        let line = LineDecomposition::new(eta, &pb.y).unwrap();
        let part = line_partition(&pb.x, &line, pb.lambda, window(&line, 20.0)).unwrap();
        let w = window(&line, 5.0);
        let grid = grid_for(&line, w);
        let spacing = grid[1] - grid[0];
        let solver = LassoSolver::new(pb.x.matrix());
        let opts = LassoOptions::with_penalty(pb.lambda);
        let lam_hi = 1.6 * pb.lambda;
        let opts_hi = LassoOptions::with_penalty(lam_hi);
        let sigma = 1.0;
        let cutoff = 1.5;
        let h = selinf::inference::select_high_value_t(&pb.x, &pb.y, &m, sigma, cutoff).unwrap();
        let h_l1 = solver.solve(&pb.y, &opts_hi, None).unwrap().active_set;

        let scan = |f: &dyn Fn(&DVector<f64>) -> bool| grid_truncation(|y| Ok(f(y)), &line, &grid, 1e-6).unwrap();
        let checks: Vec<(&str, TruncationSet, TruncationSet)> = vec![
            (
                "variable",
                variable_truncation(&part, j).unwrap(),
                scan(&|y| solver.solve(y, &opts, None).unwrap().is_active(j)),
            ),
            (
                "model",
                model_truncation(&part, &m).unwrap(),
                scan(&|y| solver.solve(y, &opts, None).unwrap().active_set == m),
            ),
            (
                "model-sign",
                model_sign_truncation(&part, &m, &pb.fit.signs).unwrap(),
                scan(&|y| {
                    let f = solver.solve(y, &opts, None).unwrap();
                    f.active_set == m && f.signs == pb.fit.signs
                }),
            ),
            (
                "stable-t",
                stable_t_truncation(&part, &pb.x, &line, j, &h, cutoff, sigma).unwrap(),
                scan(&|y| {
                    let f = solver.solve(y, &opts, None).unwrap();
                    f.is_active(j)
                        && selinf::inference::select_high_value_t(&pb.x, y, &f.active_set, sigma, cutoff).unwrap() == h
                }),
            ),
            (
                "stable-l1",
                stable_l1_truncation(&pb.x, &line, j, pb.lambda, lam_hi, &h_l1, window(&line, 20.0)).unwrap(),
                scan(&|y| {
                    solver.solve(y, &opts, None).unwrap().is_active(j) && solver.solve(y, &opts_hi, None).unwrap().active_set == h_l1
                }),
            ),
        ];
        for (name, analytic, oracle) in checks {
            let gap = same_set(&clip(&analytic, w), &oracle, 2.0 * spacing);
            assert!(gap < 1e-5, "instance {inst} {name}: {:?} vs {:?}", pairs(&clip(&analytic, w)), pairs(&oracle));
        }
    }
}

#[test]
fn nesting_and_observed_membership() {
    for inst in 0..100u64 {
        let pb = instance(500 + inst, 20, 6, 0.25 + 0.005 * inst as f64);
        let m = &pb.fit.active_set;
        let j = m[m.len() / 2];
        let k = m.len() / 2;
        let line = LineDecomposition::new(ols_contrast(pb.x.matrix(), m, k).unwrap(), &pb.y).unwrap();
        let part = line_partition(&pb.x, &line, pb.lambda, window(&line, 20.0)).unwrap();
        let ms = model_sign_truncation(&part, m, &pb.fit.signs).unwrap();
        let mo = model_truncation(&part, m).unwrap();
        let va = variable_truncation(&part, j).unwrap();
        let tol = 1e-9 * line.eta_norm();
        assert!(ms.is_subset_of(&mo, tol), "instance {inst}");
        assert!(mo.is_subset_of(&va, tol), "instance {inst}");
        for set in [&ms, &mo, &va] {
            assert!(set.contains(line.z_obs, 1e-8 * line.eta_norm()), "instance {inst}");
        }
    }
}

#[test]
fn grid_route_reports_selector_failure_location() {
    let line = LineDecomposition::new(DVector::from_vec(vec![1.0]), &DVector::from_vec(vec![0.0])).unwrap();
    let err = grid_truncation(
        |y| if y[0] > 0.5 { Err(selinf::Error::Input("boom".into())) } else { Ok(true) },
        &line,
        &uniform_grid(0.0, 1.0, 0.1),
        1e-6,
    )
    .unwrap_err();
    assert!(matches!(err, selinf::Error::Selector { z, .. } if z > 0.5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn set_algebra(a in prop::collection::vec((-5.0f64..5.0, 0.0f64..3.0), 1..5),
                   b in prop::collection::vec((-5.0f64..5.0, 0.0f64..3.0), 1..5),
                   z in -8.0f64..8.0) {
        let sa = TruncationSet::new(a.iter().map(|&(l, w)| Interval::new(l, l + w)), 0.0);
        let sb = TruncationSet::new(b.iter().map(|&(l, w)| Interval::new(l, l + w)), 0.0);
        let u = sa.union(&sb, 0.0);
        let i = sa.intersect(&sb);
        prop_assert_eq!(u.contains(z, 0.0), sa.contains(z, 0.0) || sb.contains(z, 0.0));
        prop_assert_eq!(i.contains(z, 0.0), sa.contains(z, 0.0) && sb.contains(z, 0.0));
        prop_assert!(i.is_subset_of(&sa, 1e-12) && sa.is_subset_of(&u, 1e-12));
        for w in u.intervals().windows(2) {
            prop_assert!(w[0].hi < w[1].lo);
        }
    }

    #[test]
    fn partition_covers_range_contiguously(seed in any::<u64>(), frac in 0.1f64..0.9) {
        let pb = instance(seed, 12, 5, frac);
        let line = LineDecomposition::new(ols_contrast(pb.x.matrix(), &pb.fit.active_set, 0).unwrap(), &pb.y).unwrap();
        let (lo, hi) = window(&line, 20.0);
        let part = line_partition(&pb.x, &line, pb.lambda, (lo, hi)).unwrap();
        prop_assert_eq!(part.segments.first().unwrap().z_lo, lo);
        prop_assert_eq!(part.segments.last().unwrap().z_hi, hi);
        for w in part.segments.windows(2) {
            prop_assert_eq!(w[0].z_hi, w[1].z_lo);
            prop_assert!((&w[0].active, &w[0].signs) != (&w[1].active, &w[1].signs));
        }
        let here = part.segment_at(line.z_obs).unwrap();
        prop_assert_eq!(&here.active, &pb.fit.active_set);
    }
}

#[test]
fn rejects_degenerate_inputs() {
    let x = DesignMatrix::new(DMatrix::from_element(3, 2, 1.0), None).unwrap();
    let line = LineDecomposition::new(DVector::from_element(3, 1.0), &DVector::zeros(3)).unwrap();
    assert!(line_partition(&x, &line, 1.0, (1.0, -1.0)).is_err());
    assert!(LineDecomposition::new(DVector::zeros(3), &DVector::zeros(3)).is_err());
    let y = ResponseVector::new(DVector::zeros(3)).unwrap();
    // identical columns: the full-model contrast does not exist
    assert!(full_target_truncation(&x, &y, 0, 1.0).is_err());
}
