#![allow(dead_code)]

use ggm_core::gaussian::{sample, sufficient_stats, GaussianParams};
use ggm_core::graphs::{chordal_cover, Graph};
use ggm_core::linalg::SymMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_spd(p: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let a: Vec<f64> = (0..p * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    SymMatrix::from_fn(p, |i, j| {
        let dot: f64 = (0..p).map(|k| a[i * p + k] * a[j * p + k]).sum();
        dot + if i == j { 0.5 } else { 0.0 }
    })
}

pub fn random_symmetric(p: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    SymMatrix::from_fn(p, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_graph(p: usize, density: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut g = Graph::new(p);
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random_bool(density) {
                g.add_edge(i, j).unwrap();
            }
        }
    }
    g
}

pub fn random_chordal(p: usize, rng: &mut ChaCha8Rng) -> Graph {
    let density = rng.random_range(0.15..0.5);
    chordal_cover(&random_graph(p, density, rng))
}

/// Sample covariance of `n` draws from a centered normal with covariance
/// `sigma`.
pub fn sample_cov(sigma: &SymMatrix, n: usize, seed: u64) -> SymMatrix {
    let params = GaussianParams::centered(sigma.clone()).unwrap();
    sufficient_stats(&sample(&params, n, seed).unwrap()).unwrap().cov
}

/// Precision matrix supported on `g`: diagonally dominant with random signs.
pub fn precision_on(g: &Graph, rng: &mut ChaCha8Rng) -> SymMatrix {
    let p = g.num_vertices();
    let mut k = SymMatrix::zeros(p);
    for (i, j) in g.edges() {
        k.set(i, j, rng.random_range(0.2..0.45) * if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    }
    for i in 0..p {
        let off: f64 = (0..p).filter(|&j| j != i).map(|j| k.get(i, j).abs()).sum();
        k.set(i, i, 1.0 + off);
    }
    k
}
