mod common;

use ggm_core::graphs::{
    chordal_cover, clique_decomposition, is_chordal, mlt_bounds, perfect_elimination_ordering, Graph,
};
use ggm_core::linalg::{complement, invert_pd, is_positive_definite, log_det_pd, schur_complement, SymMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn min_eigenvalue(m: &SymMatrix) -> f64 {
    let p = m.dim();
    let dm = DMatrix::from_fn(p, p, |i, j| m.get(i, j));
    dm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

fn subset_strategy() -> impl Strategy<Value = (u64, usize, Vec<bool>)> {
    (any::<u64>(), 2usize..8).prop_flat_map(|(seed, p)| {
        (Just(seed), Just(p), proptest::collection::vec(any::<bool>(), p))
    })
}

fn split(mask: &[bool]) -> Option<Vec<usize>> {
    let a: Vec<usize> = mask.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect();
    (!a.is_empty() && a.len() < mask.len()).then_some(a)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn schur_complement_is_inverse_of_precision_block((seed, p, mask) in subset_strategy()) {
        let Some(a) = split(&mask) else { return Ok(()) };
        let m = common::random_spd(p, &mut ChaCha8Rng::seed_from_u64(seed));
        let schur = schur_complement(&m, &a).unwrap();
        let k = invert_pd(&m).unwrap();
        let dual = invert_pd(&k.submatrix(&a)).unwrap();
        prop_assert!(schur.max_abs_diff(&dual) < 1e-8);
    }

    #[test]
    fn log_det_factorizes((seed, p, mask) in subset_strategy()) {
        let Some(a) = split(&mask) else { return Ok(()) };
        let m = common::random_spd(p, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = complement(&a, p);
        let lhs = log_det_pd(&m).unwrap();
        let rhs = log_det_pd(&m.submatrix(&b)).unwrap() + log_det_pd(&schur_complement(&m, &a).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-8);
    }

    #[test]
    fn clique_sizes_telescope(seed in any::<u64>(), p in 1usize..12) {
        let g = common::random_chordal(p, &mut ChaCha8Rng::seed_from_u64(seed));
        let d = clique_decomposition(&g).unwrap();
        let total: usize = d.cliques.iter().map(Vec::len).sum::<usize>() - d.separators.iter().map(Vec::len).sum::<usize>();
        prop_assert_eq!(total, p);
    }

    #[test]
    fn cover_is_chordal_supergraph(seed in any::<u64>(), p in 1usize..14, density in 0.0f64..1.0) {
        let g = common::random_graph(p, density, &mut ChaCha8Rng::seed_from_u64(seed));
        let cover = chordal_cover(&g);
        prop_assert!(is_chordal(&cover));
        for (i, j) in g.edges() {
            prop_assert!(cover.has_edge(i, j));
        }
        let bounds = mlt_bounds(&g).unwrap();
        prop_assert!(bounds.lower <= bounds.upper);
    }
}

#[test]
fn definiteness_matches_eigenvalue_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut disagreements = 0;
    let mut definite = 0;
    for _ in 0..1000 {
        let p = rng.random_range(1..=10);
        let base = common::random_spd(p, &mut rng);
        let lambda = min_eigenvalue(&base);
        let shift = lambda * rng.random_range(0.0..2.0);
        let m = base.sub(&SymMatrix::identity(p).scaled(shift));
        let oracle = min_eigenvalue(&m) > 0.0;
        definite += usize::from(oracle);
        if is_positive_definite(&m, 0.0) != oracle {
            disagreements += 1;
        }
    }
    assert_eq!(disagreements, 0);
    assert!(definite > 300 && definite < 700, "both outcomes exercised: {definite}");
}

fn induced_cycle_exists(adj: &[u32], p: usize) -> bool {
    (0u32..1 << p).any(|sub| {
        if sub.count_ones() < 4 {
            return false;
        }
        let members = (0..p).filter(|v| sub >> v & 1 == 1);
        if members.clone().any(|v| (adj[v] & sub).count_ones() != 2) {
            return false;
        }
        // 2-regular: it is a single cycle iff connected.
        let start = sub.trailing_zeros() as usize;
        let mut seen = 1u32 << start;
        let mut frontier = seen;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let next = adj[v] & sub & !seen;
            seen |= next;
            frontier |= next;
        }
        seen == sub
    })
}

#[test]
fn chordality_matches_induced_cycle_search_exhaustively() {
    for p in 1..=7usize {
        let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect();
        let mismatches: usize = (0u32..1 << pairs.len())
            .into_par_iter()
            .filter(|&mask| {
                let edges: Vec<(usize, usize)> =
                    pairs.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, e)| *e).collect();
                let mut adj = vec![0u32; p];
                for &(i, j) in &edges {
                    adj[i] |= 1 << j;
                    adj[j] |= 1 << i;
                }
                let g = Graph::from_edges(p, &edges).unwrap();
                let chordal = is_chordal(&g);
                chordal == induced_cycle_exists(&adj, p) || chordal != perfect_elimination_ordering(&g).is_some()
            })
            .count();
        assert_eq!(mismatches, 0, "p = {p}");
    }
}
