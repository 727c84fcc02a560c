//! Matrix-free operators, QP and CCCP checked against dense references
//! assembled independently in test code.

mod common;

use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use vpsumm::cccp::{brute_force, cccp_solve, dc_split, CccpOptions, DEFAULT_BRUTE_FORCE_CAP};
use vpsumm::corpus::{ClipFeatures, Corpus, VideoEntry};
use vpsumm::qp::{lipschitz_estimate, solve_qp, QpOptions, QpProblem, StepRule};
use vpsumm::variance::{dense_build_count, dense_q, pair_weight, Coeffs, GramOperators, Hyperparams, SelectionState};

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn matrix_free_matches_dense_reference() {
    for seed in 0..40 {
        let mut r = rng(seed);
        let c = random_corpus(&mut r, 5, 3, 8, 6);
        let s = r.random_range(1..=c.min_clips());
        let ops = GramOperators::new(&c, s).unwrap();
        let p = dense_parts(&c, s);
        let z: Vec<f64> = (0..c.total_clips()).map(|_| r.random_range(-1.0..1.0)).collect();
        for (k, m) in [(Coeffs::F, &p.f), (Coeffs::D, &p.d), (Coeffs::C, &p.c), (Coeffs::A, &p.a)] {
            let got = ops.apply(k, &z);
            let want = matvec(m, &z);
            assert!(max_abs_diff(&got, &want) < 1e-10, "seed {seed} {k:?}");
        }
    }
}

#[test]
fn library_dense_q_matches_definition() {
    for seed in 0..20 {
        let mut r = rng(100 + seed);
        let c = random_corpus(&mut r, 4, 2, 6, 5);
        let s = r.random_range(1..=c.min_clips());
        let (l1, l2, l3) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0), r.random_range(0.0..1.0));
        let hp = Hyperparams::new(s).with_lambdas(l1, l2, l3);
        let lib = dense_q(&c, &hp, 64).unwrap();
        let want = dense_objective(&dense_parts(&c, s), l1, l2, l3);
        assert!((lib - want).amax() < 1e-12);
    }
}

#[test]
fn each_part_is_psd_and_symmetric() {
    for seed in 0..20 {
        let mut r = rng(200 + seed);
        let c = random_corpus(&mut r, 5, 3, 8, 6);
        let p = dense_parts(&c, r.random_range(1..=c.min_clips()));
        for m in [&p.f, &p.d, &p.c, &p.a] {
            assert!((m - m.transpose()).amax() < 1e-14);
            assert!(min_eigenvalue(m) >= -1e-10 * inf_norm(m).max(1.0));
        }
    }
}

#[test]
fn dc_parts_recombine_to_q() {
    for seed in 0..20 {
        let mut r = rng(300 + seed);
        let c = random_corpus(&mut r, 4, 2, 8, 6);
        let s = r.random_range(1..=c.min_clips());
        let hp = Hyperparams::new(s).with_lambdas(r.random_range(0.0..1.0), r.random_range(0.0..1.0), r.random_range(0.0..1.0));
        let ops = GramOperators::new(&c, s).unwrap();
        let (q1, q2) = dc_split(&hp);
        let z: Vec<f64> = (0..c.total_clips()).map(|_| r.random_range(0.0..1.0)).collect();
        let lhs: Vec<f64> = ops.apply(q1, &z).iter().zip(ops.apply(q2, &z)).map(|(a, b)| a - b).collect();
        let p = dense_parts(&c, s);
        let want = matvec(&dense_objective(&p, hp.lambda1, hp.lambda2, hp.lambda3), &z);
        assert!(max_abs_diff(&lhs, &want) < 1e-10);
    }
}

#[test]
fn scaling_features_scales_traces_quadratically() {
    let mut r = rng(400);
    let c = random_corpus(&mut r, 4, 2, 8, 5);
    let s = 1;
    let k = 2.5;
    let scaled = Corpus::new(
        c.videos()
            .iter()
            .enumerate()
            .map(|(i, v)| VideoEntry {
                features: ClipFeatures::new(v.video_id(), v.rows(), v.dim(), v.data().iter().map(|x| x * k).collect()).unwrap(),
                group: c.grouping().labels()[c.group_of_video(i)].clone(),
                clips: None,
            })
            .collect(),
    )
    .unwrap();
    let z = SelectionState::for_corpus(&c, random_fractional(&mut r, &c, s)).unwrap();
    let (a, b) = (GramOperators::new(&c, s).unwrap(), GramOperators::new(&scaled, s).unwrap());
    for (x, y) in [
        (a.trace_inner_summary(&z), b.trace_inner_summary(&z)),
        (a.trace_within_group(&z), b.trace_within_group(&z)),
        (a.trace_between_group(&z), b.trace_between_group(&z)),
    ] {
        assert!(rel_close(y, k * k * x, 1e-12));
    }
}

#[test]
fn pair_weight_regions() {
    let entry = |id: &str, g: &str| VideoEntry {
        features: ClipFeatures::from_rows(id, &[vec![1.0], vec![2.0]]).unwrap(),
        group: g.into(),
        clips: None,
    };
    let c = Corpus::new(vec![entry("a", "A"), entry("b", "A"), entry("c", "B")]).unwrap();
    let hp = Hyperparams::new(1).with_lambdas(0.1, 0.2, 0.3);
    // clips 0,1 in a; 2,3 in b; 4,5 in c
    assert!(pair_weight(0, 0, &c, &hp).abs() < 1e-15);
    assert!((pair_weight(0, 1, &c, &hp) - 0.1).abs() < 1e-15);
    assert!((pair_weight(0, 2, &c, &hp) + 0.2).abs() < 1e-15);
    assert!((pair_weight(0, 4, &c, &hp) - 0.3).abs() < 1e-15);
}

#[test]
fn qp_matches_active_set_oracle() {
    let mut checked = 0;
    for seed in 0..30 {
        let mut r = rng(500 + seed);
        let c = random_corpus(&mut r, 2, 2, 4, 3);
        if c.total_clips() > 7 {
            continue;
        }
        let s = r.random_range(1..=c.min_clips());
        let hp = Hyperparams::new(s).with_lambdas(r.random_range(0.0..1.0), r.random_range(0.0..1.0), r.random_range(0.0..1.0));
        let ops = GramOperators::new(&c, s).unwrap();
        let anchor = SelectionState::for_corpus(&c, random_fractional(&mut r, &c, s)).unwrap();
        let opts = QpOptions { max_iters: 20000, grad_map_tol: 1e-10, ..Default::default() };
        let out = solve_qp(&ops, &hp, &anchor, &opts).unwrap();

        let p = dense_parts(&c, s);
        let (k1, k2) = dc_split(&hp);
        let q1 = combine(&p, k1.f, k1.d, k1.c, k1.a);
        let q2 = combine(&p, k2.f, k2.d, k2.c, k2.a);
        let b = matvec(&q2, anchor.as_slice());
        let (best, _) = qp_active_set_oracle(&q1, &b, c.offsets(), s);
        assert!((out.objective - best).abs() < 1e-6, "seed {seed}: {} vs oracle {best}", out.objective);
        checked += 1;
    }
    assert!(checked >= 10);
}

#[test]
fn qp_vertex_example() {
    // minimize z·z − 2 z_1 over {Σz = 1, 0 ≤ z ≤ 1}: optimum (1, 0, 0)
    let q1 = DMatrix::<f64>::identity(3, 3);
    let problem = QpProblem {
        q1: &q1,
        linear: vec![1.0, 0.0, 0.0],
        offsets: &[0, 3],
        s: 1,
    };
    for accelerated in [true, false] {
        for step_rule in [StepRule::Lipschitz, StepRule::Backtracking] {
            let opts = QpOptions { accelerated, step_rule, ..Default::default() };
            let out = problem.solve(&[1.0 / 3.0; 3], &opts, None).unwrap();
            // plain steps stop on relative objective change, so z is only
            // as close as the objective criterion implies
            assert!((out.objective + 1.0).abs() < 1e-9, "{accelerated} {step_rule:?}: {out:?}");
            assert!(max_abs_diff(&out.z, &[1.0, 0.0, 0.0]) < 1e-4, "{accelerated} {step_rule:?}: {out:?}");
            assert!(out.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}

#[test]
fn qp_iterates_stay_feasible_and_descend() {
    let mut r = rng(600);
    let c = random_corpus(&mut r, 4, 2, 10, 6);
    let s = c.min_clips().min(2);
    let hp = Hyperparams::new(s);
    let ops = GramOperators::new(&c, s).unwrap();
    let anchor = SelectionState::for_corpus(&c, random_fractional(&mut r, &c, s)).unwrap();
    let out = solve_qp(&ops, &hp, &anchor, &QpOptions { accelerated: false, ..Default::default() }).unwrap();
    assert!(out.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let z = SelectionState::for_corpus(&c, out.z).unwrap();
    assert!(z.is_feasible(s, 1e-9));
}

#[test]
fn lipschitz_estimate_brackets_largest_eigenvalue() {
    for seed in 0..20 {
        let mut r = rng(700 + seed);
        let b = DMatrix::from_fn(8, 8, |_, _| r.random_range(-1.0..1.0));
        let m = &b * b.transpose();
        let top = max_eigenvalue(&m);
        let est = lipschitz_estimate(&m, 50, 1.1, seed);
        assert!(est >= top * (1.0 - 1e-9), "seed {seed}: {est} < {top}");
        assert!(est <= 1.1 * top + 1e-6);
    }
    assert!((lipschitz_estimate(&DMatrix::<f64>::identity(4, 4), 50, 1.1, 0) - 1.1).abs() < 1e-12);
    assert_eq!(lipschitz_estimate(&DMatrix::<f64>::zeros(4, 4), 50, 1.1, 0), 1e-12);
}

#[test]
fn brute_force_matches_enumeration_and_bounds_cccp() {
    for seed in 0..25 {
        let mut r = rng(800 + seed);
        let c = random_corpus(&mut r, 3, 2, 6, 4);
        let s = r.random_range(1..=c.min_clips());
        let hp = Hyperparams::new(s).with_lambdas(r.random_range(0.0..1.0), r.random_range(0.0..1.0), r.random_range(0.0..1.0));
        let exact = brute_force(&c, &hp, DEFAULT_BRUTE_FORCE_CAP).unwrap();
        let q = dense_objective(&dense_parts(&c, s), hp.lambda1, hp.lambda2, hp.lambda3);
        let want = exhaustive_min(&q, c.offsets(), s);
        assert!((exact.objective - want).abs() < 1e-10, "seed {seed}");
        assert!((quad(&q, exact.z.as_slice()) - want).abs() < 1e-10);

        let summary = cccp_solve(&c, &hp, &CccpOptions::default()).unwrap();
        assert!(exact.objective <= summary.rounded_objective.unwrap() + 1e-10);
    }
}

#[test]
fn cccp_majorization_step_by_step() {
    // L(z_{t+1}) <= L(z_t) + 1e-7 (1 + |L(z_t)|) on every recorded step
    for seed in 0..20 {
        let mut r = rng(900 + seed);
        let c = random_corpus(&mut r, 4, 2, 10, 6);
        let s = r.random_range(1..=c.min_clips());
        let summary = cccp_solve(&c, &Hyperparams::new(s), &CccpOptions { seed, ..Default::default() }).unwrap();
        for w in summary.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-7 * (1.0 + w[0].abs()));
        }
        for v in &summary.videos {
            assert_eq!(v.selected.len(), s);
            assert!(v.selected.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

#[test]
fn solve_path_never_builds_dense_operators() {
    let mut r = rng(1000);
    let c = random_corpus(&mut r, 4, 2, 10, 6);
    let before = dense_build_count();
    let opts = CccpOptions { polish: true, ..Default::default() };
    cccp_solve(&c, &Hyperparams::new(1), &opts).unwrap();
    assert_eq!(dense_build_count(), before);
}
