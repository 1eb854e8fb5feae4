mod common;

use std::f64::consts::PI;

use ggm_core::completion::{
    buhl_two_sample, clique_feasible, cycle_completable, cycle_min_slack, cycle_partial_matrix, maxdet_completion,
    pd3_angle_test, project, Completion, PartialMatrix,
};
use ggm_core::gaussian::{ci_minor_ratio, condition, marginal, partial_correlation, GaussianParams, MinorKind};
use ggm_core::graphs::Graph;
use ggm_core::linalg::{complement, invert_pd, is_positive_definite, SymMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    (0u32..1 << items.len())
        .map(|mask| items.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &v)| v).collect())
        .collect()
}

#[test]
fn sigma_and_precision_minor_criteria_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in 2..=5 {
        for round in 0..4 {
            // Half the matrices carry exact conditional independences.
            let sigma = if round % 2 == 0 {
                common::random_spd(p, &mut rng)
            } else {
                invert_pd(&common::precision_on(&Graph::path(p), &mut rng)).unwrap()
            };
            for i in 0..p {
                for j in (i + 1)..p {
                    for s in subsets(&complement(&[i, j], p)) {
                        let a = ci_minor_ratio(&sigma, i, j, &s, MinorKind::Sigma).unwrap();
                        let b = ci_minor_ratio(&sigma, i, j, &s, MinorKind::K).unwrap();
                        assert!((a - b).abs() < 1e-10, "p={p} ({i},{j}) | {s:?}: {a} vs {b}");
                    }
                }
            }
        }
    }
}

#[test]
fn partial_correlation_vanishes_with_precision_entry() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let p = rng.random_range(3..8);
        let g = common::random_graph(p, 0.5, &mut rng);
        let k = common::precision_on(&g, &mut rng);
        let sigma = invert_pd(&k).unwrap();
        for i in 0..p {
            for j in (i + 1)..p {
                let rho = partial_correlation(&sigma, i, j, &complement(&[i, j], p)).unwrap();
                if g.has_edge(i, j) {
                    assert!(rho.abs() > 1e-6);
                } else {
                    assert!(rho.abs() < 1e-12);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn conditioning_commutes_with_marginalizing(seed in any::<u64>(), p in 3usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cov = common::random_spd(p, &mut rng);
        let mean: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let params = GaussianParams::new(mean, cov).unwrap();
        let cut = rng.random_range(1..p - 1);
        let a: Vec<usize> = (0..=cut).collect();
        let b = complement(&a, p);
        let x_b: Vec<f64> = b.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
        let a_sub: Vec<usize> = (0..cut).collect();

        let left = marginal(&condition(&params, &a, &x_b).unwrap(), &a_sub).unwrap();
        let mut keep = a_sub.clone();
        keep.extend(&b);
        let right_marg = marginal(&params, &keep).unwrap();
        let right = condition(&right_marg, &(0..a_sub.len()).collect::<Vec<_>>(), &x_b).unwrap();
        prop_assert!(left.cov.max_abs_diff(&right.cov) < 1e-10);
        for (x, y) in left.mean.iter().zip(&right.mean) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn diagonal_scaling_preserves_completability(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..PI - 0.05)).collect();
        let pm = cycle_partial_matrix(&theta).unwrap();
        let scale: Vec<f64> = (0..5).map(|_| rng.random_range(0.2..3.0)).collect();
        let scaled = pm.congruence(&scale).unwrap();
        let slack = cycle_min_slack(&theta).unwrap();
        prop_assume!(slack.abs() > 1e-6);
        let a = maxdet_completion(&pm, 1e-9, 500).unwrap().is_completed();
        let b = maxdet_completion(&scaled, 1e-9, 500).unwrap().is_completed();
        prop_assert_eq!(a, b);
        prop_assert_eq!(a, slack > 0.0);
    }
}

#[test]
fn chordal_completability_is_clique_feasibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut feasible = 0;
    for _ in 0..200 {
        let p = rng.random_range(2..=8);
        let g = common::random_chordal(p, &mut rng);
        // Random unit-diagonal symmetric values; many of these are infeasible.
        let m = SymMatrix::from_fn(p, |i, j| if i == j { 1.0 } else { rng.random_range(-0.8..0.8) });
        let pm = project(&m, &g).unwrap();
        let cf = clique_feasible(&pm).unwrap();
        feasible += usize::from(cf);
        let completion = maxdet_completion(&pm, 1e-9, 500).unwrap();
        assert_eq!(cf, completion.is_completed(), "graph {:?}", g.edges());
        if let Completion::Completed(sigma) = completion {
            let k = invert_pd(&sigma).unwrap();
            for (i, j) in g.non_edges() {
                assert!(k.get(i, j).abs() < 1e-6);
            }
            assert!(pm.fiber_residual(&sigma) < 1e-6);
        }
    }
    assert!(feasible > 20 && feasible < 180, "both outcomes exercised: {feasible}");
}

#[test]
fn four_cycle_has_clique_feasible_non_completable_instance() {
    let a = 0.9_f64.acos();
    let b = (-0.9_f64).acos();
    let pm = cycle_partial_matrix(&[a, a, a, b]).unwrap();
    assert!(clique_feasible(&pm).unwrap());
    assert!(!maxdet_completion(&pm, 1e-9, 500).unwrap().is_completed());
}

fn brute_force_min_slack(theta: &[f64]) -> f64 {
    let p = theta.len();
    let total: f64 = theta.iter().sum();
    (1u32..1 << p)
        .filter(|m| m.count_ones() % 2 == 1)
        .map(|m| {
            let inside: f64 = (0..p).filter(|i| m >> i & 1 == 1).map(|i| theta[i]).sum();
            (m.count_ones() as f64 - 1.0) * PI + (total - inside) - inside
        })
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sorted_slack_matches_subset_enumeration(theta in proptest::collection::vec(0.01f64..PI - 0.01, 3..12)) {
        let fast = cycle_min_slack(&theta).unwrap();
        let slow = brute_force_min_slack(&theta);
        prop_assert!((fast - slow).abs() < 1e-9);
    }
}

#[test]
fn angle_test_matches_determinants_on_triangles() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..500 {
        let t: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..PI - 0.01)).collect();
        let m = SymMatrix::from_rows(&[
            vec![1.0, t[0].cos(), t[1].cos()],
            vec![t[0].cos(), 1.0, t[2].cos()],
            vec![t[1].cos(), t[2].cos(), 1.0],
        ])
        .unwrap();
        let margin = cycle_min_slack(&t).unwrap();
        if margin.abs() > 1e-8 {
            assert_eq!(pd3_angle_test(t[0], t[1], t[2]).unwrap(), is_positive_definite(&m, 0.0));
            assert_eq!(cycle_completable(&t).unwrap(), is_positive_definite(&m, 0.0));
        }
    }
}

#[test]
fn two_sample_route_matches_direct_completion() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut agree = 0;
    for _ in 0..200 {
        let v: Vec<[f64; 2]> = (0..5).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let s = SymMatrix::from_fn(5, |i, j| v[i][0] * v[j][0] + v[i][1] * v[j][1]);
        let pm: PartialMatrix = project(&s, &Graph::cycle(5)).unwrap();
        let direct = maxdet_completion(&pm, 1e-9, 500).unwrap();
        if let Ok(b) = buhl_two_sample(&v) {
            if b == direct.is_completed() {
                agree += 1;
            } else if let Completion::NonCompletable(nc) = direct {
                assert!(nc.boundary, "strict disagreement");
            }
        }
    }
    assert!(agree >= 195, "{agree}");
}
