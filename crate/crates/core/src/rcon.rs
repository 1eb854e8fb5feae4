//! Colored graphical models: the precision matrix has one shared value per
//! vertex color class on the diagonal and one per edge color class off it.

use serde::{Deserialize, Serialize};

use crate::error::{GgmError, Result};
use crate::graphs::Graph;
use crate::linalg::SymMatrix;
use crate::mle::{FitStatus, MleResult};
use crate::subspace::{self, BasisElement, Divergence, LinearModel, NewtonOptions, NewtonStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct ColoredGraph {
    graph: Graph,
    vertex_classes: Vec<Vec<usize>>,
    edge_classes: Vec<Vec<(usize, usize)>>,
}

impl ColoredGraph {
    /// Validates that the vertex classes partition the vertices and the edge
    /// classes partition the edges. Edges may be given in either
    /// orientation and are stored with `i < j`. Empty classes are rejected.
    pub fn new(graph: Graph, vertex_classes: Vec<Vec<usize>>, edge_classes: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        let p = graph.num_vertices();
        let mut seen = vec![false; p];
        for class in &vertex_classes {
            if class.is_empty() {
                return Err(GgmError::InvalidGraph("empty vertex class".into()));
            }
            for &v in class {
                if v >= p {
                    return Err(GgmError::InvalidGraph(format!("vertex {v} out of range")));
                }
                if std::mem::replace(&mut seen[v], true) {
                    return Err(GgmError::InvalidGraph(format!("vertex {v} in two classes")));
                }
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(GgmError::InvalidGraph(format!("vertex {v} has no class")));
        }

        let edges = graph.edges();
        let mut covered = vec![false; edges.len()];
        let edge_classes: Vec<Vec<(usize, usize)>> = edge_classes
            .into_iter()
            .map(|class| class.into_iter().map(|(i, j)| (i.min(j), i.max(j))).collect())
            .collect();
        for class in &edge_classes {
            if class.is_empty() {
                return Err(GgmError::InvalidGraph("empty edge class".into()));
            }
            for e in class {
                let Ok(pos) = edges.binary_search(e) else {
                    return Err(GgmError::InvalidGraph(format!("({}, {}) is not an edge", e.0, e.1)));
                };
                if std::mem::replace(&mut covered[pos], true) {
                    return Err(GgmError::InvalidGraph(format!("edge ({}, {}) in two classes", e.0, e.1)));
                }
            }
        }
        if let Some(pos) = covered.iter().position(|c| !c) {
            let (i, j) = edges[pos];
            return Err(GgmError::InvalidGraph(format!("edge ({i}, {j}) has no class")));
        }
        Ok(Self {
            graph,
            vertex_classes,
            edge_classes,
        })
    }

    /// Every vertex and every edge in its own class.
    pub fn all_distinct(graph: Graph) -> Self {
        let vertex_classes = (0..graph.num_vertices()).map(|v| vec![v]).collect();
        let edge_classes = graph.edges().into_iter().map(|e| vec![e]).collect();
        Self {
            graph,
            vertex_classes,
            edge_classes,
        }
    }

    /// One class for all vertices and one for all edges.
    pub fn uniform(graph: Graph) -> Self {
        let vertex_classes = vec![(0..graph.num_vertices()).collect()];
        let edges = graph.edges();
        let edge_classes = if edges.is_empty() { vec![] } else { vec![edges] };
        Self {
            graph,
            vertex_classes,
            edge_classes,
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn vertex_classes(&self) -> &[Vec<usize>] {
        &self.vertex_classes
    }

    pub fn edge_classes(&self) -> &[Vec<(usize, usize)>] {
        &self.edge_classes
    }

    fn model(&self) -> LinearModel {
        let basis = self
            .vertex_classes
            .iter()
            .map(|c| BasisElement::new(c.iter().map(|&v| (v, v, 1.0)).collect()))
            .chain(
                self.edge_classes
                    .iter()
                    .map(|c| BasisElement::new(c.iter().map(|&(i, j)| (i, j, 1.0)).collect())),
            )
            .collect();
        LinearModel::new(self.graph.num_vertices(), basis).expect("classes were validated")
    }
}

/// Indicator matrices spanning the colored model: vertex classes first, then
/// edge classes.
pub fn rcon_basis(cg: &ColoredGraph) -> Vec<SymMatrix> {
    let p = cg.graph.num_vertices();
    cg.model().basis().iter().map(|b| b.to_dense(p)).collect()
}

/// Fits the colored model by Newton ascent in the class coordinates,
/// starting from `K = I`. `eps` bounds the class-sum mismatch at
/// convergence; `max_iter` caps Newton steps.
pub fn rcon_fit(cg: &ColoredGraph, s: &SymMatrix, eps: f64, max_iter: usize) -> Result<MleResult> {
    let p = cg.graph.num_vertices();
    if s.dim() != p {
        return Err(GgmError::DimensionMismatch { expected: p, found: s.dim() });
    }
    let model = cg.model();
    let mut start = vec![0.0; model.basis().len()];
    start[..cg.vertex_classes.len()].fill(1.0);
    let opts = NewtonOptions {
        tol: (eps * eps).min(1e-20),
        max_iter,
        divergence_bound: subspace::divergence_bound_for(s, 1e8),
    };
    let sol = subspace::maximize_likelihood(&model, s, &start, &opts)?;
    let status = match sol.status {
        NewtonStatus::Converged if sol.gradient_norm <= eps => FitStatus::Converged,
        NewtonStatus::Converged | NewtonStatus::IterationCap => FitStatus::IterationCap,
        NewtonStatus::Diverged(Divergence::Certificate | Divergence::NormBound) => FitStatus::NonExistent,
    };
    let zero = cg
        .graph
        .non_edges()
        .into_iter()
        .fold(0.0, |acc: f64, (i, j)| acc.max(sol.k.get(i, j).abs()));
    let fiber = class_residuals(cg, &sol.sigma, s);
    Ok(MleResult {
        status,
        max_fiber_residual: fiber.0.max(fiber.1),
        max_zero_residual: zero,
        loglik: sol.objective,
        iterations: sol.iterations,
        sigma_hat: sol.sigma,
        k_hat: sol.k,
        objective_trace: vec![sol.objective],
    })
}

fn class_residuals(cg: &ColoredGraph, sigma: &SymMatrix, s: &SymMatrix) -> (f64, f64) {
    let vertex = cg
        .vertex_classes
        .iter()
        .map(|c| c.iter().map(|&v| sigma.get(v, v) - s.get(v, v)).sum::<f64>().abs())
        .fold(0.0, f64::max);
    let edge = cg
        .edge_classes
        .iter()
        .map(|c| c.iter().map(|&(i, j)| sigma.get(i, j) - s.get(i, j)).sum::<f64>().abs())
        .fold(0.0, f64::max);
    (vertex, edge)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RconDualReport {
    /// Largest `|sum_{v in V_m} (Σ̂_vv - S_vv)|` over vertex classes.
    pub vertex_class_residual: f64,
    /// Largest `|sum_{(i,j) in E_m} (Σ̂_ij - S_ij)|` over edge classes.
    pub edge_class_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

pub fn rcon_dual_check(result: &MleResult, cg: &ColoredGraph, s: &SymMatrix, tol: f64) -> Result<RconDualReport> {
    if !result.converged() {
        return Err(GgmError::NotConverged);
    }
    let (vertex, edge) = class_residuals(cg, &result.sigma_hat, s);
    Ok(RconDualReport {
        vertex_class_residual: vertex,
        edge_class_residual: edge,
        tol,
        passed: vertex <= tol && edge <= tol,
    })
}

/// On-disk form of a colored graph, vertices 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColoredGraphDoc {
    pub p: usize,
    pub edges: Vec<[usize; 2]>,
    pub vertex_classes: Vec<Vec<usize>>,
    pub edge_classes: Vec<Vec<[usize; 2]>>,
}

fn zero_based(v: usize, p: usize) -> Result<usize> {
    if v == 0 || v > p {
        Err(GgmError::Parse(format!("vertex {v} outside 1..={p}")))
    } else {
        Ok(v - 1)
    }
}

impl ColoredGraphDoc {
    pub fn into_colored_graph(self) -> Result<ColoredGraph> {
        let p = self.p;
        let edges = self
            .edges
            .iter()
            .map(|&[i, j]| Ok((zero_based(i, p)?, zero_based(j, p)?)))
            .collect::<Result<Vec<_>>>()?;
        let graph = Graph::from_edges(p, &edges)?;
        let vertex_classes = self
            .vertex_classes
            .iter()
            .map(|c| c.iter().map(|&v| zero_based(v, p)).collect())
            .collect::<Result<Vec<_>>>()?;
        let edge_classes = self
            .edge_classes
            .iter()
            .map(|c| c.iter().map(|&[i, j]| Ok((zero_based(i, p)?, zero_based(j, p)?))).collect())
            .collect::<Result<Vec<_>>>()?;
        ColoredGraph::new(graph, vertex_classes, edge_classes)
    }

    pub fn from_colored_graph(cg: &ColoredGraph) -> Self {
        Self {
            p: cg.graph.num_vertices(),
            edges: cg.graph.edges().into_iter().map(|(i, j)| [i + 1, j + 1]).collect(),
            vertex_classes: cg.vertex_classes.iter().map(|c| c.iter().map(|v| v + 1).collect()).collect(),
            edge_classes: cg
                .edge_classes
                .iter()
                .map(|c| c.iter().map(|&(i, j)| [i + 1, j + 1]).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mle::{fit_coordinate_k, FitOptions};

    #[test]
    fn validation() {
        let g = Graph::cycle(4);
        assert!(ColoredGraph::new(g.clone(), vec![vec![0, 1], vec![2]], vec![g.edges()]).is_err());
        assert!(ColoredGraph::new(g.clone(), vec![vec![0, 1, 2, 3], vec![0]], vec![g.edges()]).is_err());
        assert!(ColoredGraph::new(g.clone(), vec![vec![0, 1, 2, 3]], vec![vec![(0, 2)]]).is_err());
        assert!(ColoredGraph::new(g.clone(), vec![vec![0, 1, 2, 3]], vec![vec![(0, 1)]]).is_err());
        assert!(ColoredGraph::new(g.clone(), vec![vec![0, 1, 2, 3]], vec![vec![(1, 0), (1, 2), (2, 3), (3, 0)]]).is_ok());
    }

    #[test]
    fn basis_shapes() {
        let g = Graph::cycle(4);
        assert_eq!(rcon_basis(&ColoredGraph::all_distinct(g.clone())).len(), 8);
        let b = rcon_basis(&ColoredGraph::uniform(g.clone()));
        assert_eq!(b.len(), 2);
        assert_eq!(b[0], SymMatrix::identity(4));
        assert_eq!(b[1].get(0, 1), 1.0);
        assert_eq!(b[1].get(0, 2), 0.0);
        assert_eq!(b[0].trace_product(&b[1]), 0.0);
    }

    #[test]
    fn identity_is_stationary() {
        let cg = ColoredGraph::uniform(Graph::cycle(5));
        let r = rcon_fit(&cg, &SymMatrix::identity(5), 1e-9, 100).unwrap();
        assert!(r.converged());
        assert_eq!(r.iterations, 0);
        assert!(r.k_hat.max_abs_diff(&SymMatrix::identity(5)) < 1e-15);
    }

    #[test]
    fn distinct_coloring_matches_plain_fit() {
        let g = Graph::cycle(5);
        let s = SymMatrix::from_fn(5, |i, j| if i == j { 1.5 } else { 0.2 / (1 + i + j) as f64 });
        let r = rcon_fit(&ColoredGraph::all_distinct(g.clone()), &s, 1e-9, 100).unwrap();
        let plain = fit_coordinate_k(&g, &s, &FitOptions::default()).unwrap();
        assert!(r.k_hat.max_abs_diff(&plain.k_hat) < 1e-6);
        let rep = rcon_dual_check(&r, &ColoredGraph::all_distinct(g), &s, 1e-8).unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn doc_round_trip() {
        let cg = ColoredGraph::uniform(Graph::cycle(4));
        let doc = ColoredGraphDoc::from_colored_graph(&cg);
        assert_eq!(doc.clone().into_colored_graph().unwrap(), cg);
        let mut bad = doc;
        bad.vertex_classes[0].push(9);
        assert!(bad.into_colored_graph().is_err());
    }
}
