//! Positive definite completion of partial symmetric matrices.
//!
//! A partial matrix carries values on the augmented edge set `E*` of a graph.
//! It is completable exactly when the Gaussian graphical model on that graph
//! has a maximum likelihood estimate for those sufficient statistics, and the
//! determinant-maximizing completion is then the estimated covariance.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GgmError, Result};
use crate::graphs::{clique_decomposition, is_chordal, maximal_cliques, CliqueDecomposition, Graph};
use crate::linalg::{default_pd_tolerance, invert_pd, is_positive_definite, SymMatrix};
use crate::subspace::{self, Divergence, LinearModel, NewtonOptions, NewtonStatus};

/// Margin by which the strict angle inequalities must hold.
pub const ANGLE_MARGIN: f64 = 1e-10;

/// Values on `E*`; entries off `E*` are unspecified.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialMatrix {
    graph: Graph,
    // Zero off E*; those zeros are never read as data.
    filled: SymMatrix,
}

impl PartialMatrix {
    /// Builds a partial matrix from `(i, j, value)` triples that must cover
    /// `E*` exactly once (either orientation).
    pub fn new(graph: Graph, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let p = graph.num_vertices();
        let mut filled = SymMatrix::zeros(p.max(1));
        let mut given = vec![false; p * p];
        for &(i, j, v) in entries {
            if i >= p || j >= p {
                return Err(GgmError::InvalidIndexSet(format!(
                    "entry ({i}, {j}) outside dimension {p}"
                )));
            }
            if !graph.in_augmented(i, j) {
                return Err(GgmError::InvalidIndexSet(format!(
                    "entry ({i}, {j}) is not on an edge or the diagonal"
                )));
            }
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            if given[a * p + b] {
                return Err(GgmError::InvalidIndexSet(format!("entry ({a}, {b}) given twice")));
            }
            if !v.is_finite() {
                return Err(GgmError::OutOfRange(format!("entry ({a}, {b}) is not finite")));
            }
            given[a * p + b] = true;
            filled.set(a, b, v);
        }
        if let Some((i, j)) = graph.augmented_edges().into_iter().find(|&(i, j)| !given[i * p + j]) {
            return Err(GgmError::InvalidIndexSet(format!("missing entry ({i}, {j})")));
        }
        Ok(Self { graph, filled })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.graph.in_augmented(i, j).then(|| self.filled.get(i, j))
    }

    /// The values as a full matrix with zeros in unspecified positions.
    /// Only the `E*` entries of the result carry information.
    pub fn zero_filled(&self) -> &SymMatrix {
        &self.filled
    }

    /// `(i, j, value)` over `E*`, `i <= j`, sorted.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        self.graph
            .augmented_edges()
            .into_iter()
            .map(|(i, j)| (i, j, self.filled.get(i, j)))
            .collect()
    }

    /// `D P D` for a diagonal `D = diag(scale)`.
    pub fn congruence(&self, scale: &[f64]) -> Result<Self> {
        if scale.len() != self.dim() {
            return Err(GgmError::DimensionMismatch {
                expected: self.dim(),
                found: scale.len(),
            });
        }
        let filled = SymMatrix::from_fn(self.dim(), |i, j| self.filled.get(i, j) * scale[i] * scale[j]);
        Ok(Self {
            graph: self.graph.clone(),
            filled,
        })
    }

    /// Rescales to unit diagonal. Fails unless every diagonal value is
    /// positive.
    pub fn to_correlation(&self) -> Result<Self> {
        let diag = self.filled.diag();
        if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
            return Err(GgmError::OutOfRange(format!(
                "diagonal entry {i} must be positive, got {}",
                diag[i]
            )));
        }
        let scale: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
        self.congruence(&scale)
    }

    /// `max |M_ij - P_ij|` over `E*`.
    pub fn fiber_residual(&self, m: &SymMatrix) -> f64 {
        self.graph
            .augmented_edges()
            .into_iter()
            .fold(0.0, |acc, (i, j)| acc.max((m.get(i, j) - self.filled.get(i, j)).abs()))
    }
}

/// Keeps the entries of `s` on `E*`.
pub fn project(s: &SymMatrix, g: &Graph) -> Result<PartialMatrix> {
    if s.dim() != g.num_vertices() {
        return Err(GgmError::DimensionMismatch {
            expected: g.num_vertices(),
            found: s.dim(),
        });
    }
    let filled = SymMatrix::from_fn(s.dim(), |i, j| if g.in_augmented(i, j) { s.get(i, j) } else { 0.0 });
    Ok(PartialMatrix {
        graph: g.clone(),
        filled,
    })
}

/// Maximal cliques of any graph: from the decomposition when chordal,
/// otherwise by exhaustive enumeration.
pub(crate) fn cliques_of(g: &Graph) -> Result<Vec<Vec<usize>>> {
    match clique_decomposition(g) {
        Ok(d) => Ok(d.cliques),
        Err(GgmError::NotChordal) => maximal_cliques(g),
        Err(e) => Err(e),
    }
}

fn block_is_pd(m: &SymMatrix, idx: &[usize]) -> bool {
    let sub = m.submatrix(idx);
    is_positive_definite(&sub, default_pd_tolerance(&sub))
}

/// True iff every fully specified principal submatrix (every clique block)
/// is positive definite.
pub fn clique_feasible(pm: &PartialMatrix) -> Result<bool> {
    let cliques = cliques_of(&pm.graph)?;
    Ok(cliques.iter().all(|c| block_is_pd(&pm.filled, c)))
}

/// `sum_C [(S_CC)^{-1}]^fill - sum_B [(S_BB)^{-1}]^fill` over cliques and
/// separators. Only `E*` entries of `s` are read. Fails if a clique block is
/// not positive definite.
pub fn clique_sum_precision(decomp: &CliqueDecomposition, s: &SymMatrix) -> Result<SymMatrix> {
    let mut k = SymMatrix::zeros(s.dim());
    let mut scatter_inverse = |idx: &[usize], sign: f64| -> Result<()> {
        if idx.is_empty() {
            return Ok(());
        }
        let sub = s.submatrix(idx);
        if !is_positive_definite(&sub, default_pd_tolerance(&sub)) {
            return Err(GgmError::NotPositiveDefinite);
        }
        let inv = invert_pd(&sub)?;
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate().skip(a) {
                k.add_to(i, j, sign * inv.get(a, b));
            }
        }
        Ok(())
    };
    for c in &decomp.cliques {
        scatter_inverse(c, 1.0)?;
    }
    for sep in &decomp.separators {
        scatter_inverse(sep, -1.0)?;
    }
    Ok(k)
}

/// Determinant-maximizing completion of a partial matrix on a chordal graph,
/// computed from the clique-sum form of its inverse.
pub fn chordal_completion(pm: &PartialMatrix) -> Result<SymMatrix> {
    let decomp = clique_decomposition(&pm.graph)?;
    let k = clique_sum_precision(&decomp, &pm.filled)
        .map_err(|_| GgmError::NotCompletable("a clique block is not positive definite".into()))?;
    invert_pd(&k).map_err(|_| GgmError::NotCompletable("clique-sum precision is singular".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonCompletable {
    pub reason: String,
    /// The instance sits on (or numerically at) the boundary of the cone of
    /// completable partial matrices rather than strictly outside it.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Completion {
    Completed(SymMatrix),
    NonCompletable(NonCompletable),
}

impl Completion {
    pub fn is_completed(&self) -> bool {
        matches!(self, Completion::Completed(_))
    }
}

/// Default options for [`maxdet_completion`].
pub const DEFAULT_COMPLETION_EPS: f64 = 1e-9;
pub const DEFAULT_COMPLETION_MAX_ITER: usize = 500;

/// Determinant-maximizing positive definite completion of an arbitrary
/// partial matrix, or a certified verdict that none exists.
///
/// Ascends the concave dual objective `log det K - <P, K>` over precision
/// matrices supported on `E*` with damped Newton steps from
/// `K = diag(1 / P_ii)`. Convergence yields the completion `K^{-1}`.
/// Non-completability is reported when an iterate certifies it
/// (`<P, K> <= 0` for a positive definite `K` in the model) or when `K`
/// grows past `1e8` times its natural scale. `eps` bounds the final Newton
/// decrement via `eps^2` and `max_iter` caps Newton steps.
pub fn maxdet_completion(pm: &PartialMatrix, eps: f64, max_iter: usize) -> Result<Completion> {
    let diag = pm.filled.diag();
    if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
        return Ok(Completion::NonCompletable(NonCompletable {
            reason: format!("diagonal entry {i} is not positive"),
            boundary: diag[i] == 0.0,
        }));
    }
    let model = LinearModel::graphical(&pm.graph);
    let mut start = vec![0.0; model.basis().len()];
    for (i, d) in diag.iter().enumerate() {
        start[i] = 1.0 / d;
    }
    let opts = NewtonOptions {
        tol: eps * eps,
        max_iter,
        divergence_bound: subspace::divergence_bound_for(&pm.filled, 1e8),
    };
    let sol = subspace::maximize_likelihood(&model, &pm.filled, &start, &opts)?;
    match sol.status {
        NewtonStatus::Converged => Ok(Completion::Completed(sol.sigma)),
        NewtonStatus::Diverged(Divergence::Certificate) => Ok(Completion::NonCompletable(NonCompletable {
            reason: "a positive definite precision supported on the graph pairs non-positively with the partial matrix".into(),
            boundary: false,
        })),
        NewtonStatus::Diverged(Divergence::NormBound) => Ok(Completion::NonCompletable(NonCompletable {
            reason: "precision iterates diverge".into(),
            boundary: true,
        })),
        NewtonStatus::IterationCap => Err(GgmError::IterationCap(max_iter)),
    }
}

fn check_angle(x: f64, name: &str) -> Result<()> {
    if x > 0.0 && x < PI {
        Ok(())
    } else {
        Err(GgmError::OutOfRange(format!("{name} = {x} must lie in (0, π)")))
    }
}

/// Positive definiteness of the unit-diagonal 3x3 matrix with off-diagonal
/// cosines `cos α, cos β, cos γ`, decided by the angle inequalities.
pub fn pd3_angle_test(alpha: f64, beta: f64, gamma: f64) -> Result<bool> {
    check_angle(alpha, "alpha")?;
    check_angle(beta, "beta")?;
    check_angle(gamma, "gamma")?;
    Ok(alpha < beta + gamma - ANGLE_MARGIN
        && beta < alpha + gamma - ANGLE_MARGIN
        && gamma < alpha + beta - ANGLE_MARGIN
        && alpha + beta + gamma < 2.0 * PI - ANGLE_MARGIN)
}

/// Smallest slack `(|S| - 1)π + sum_{j∉S} θ_j - sum_{i∈S} θ_i` over odd-size
/// subsets `S`. For each odd size the tightest subset takes the largest
/// angles, so a sort replaces the subset enumeration.
pub fn cycle_min_slack(theta: &[f64]) -> Result<f64> {
    if theta.len() < 3 {
        return Err(GgmError::OutOfRange(format!(
            "a cycle needs at least 3 angles, got {}",
            theta.len()
        )));
    }
    for (i, &t) in theta.iter().enumerate() {
        check_angle(t, &format!("theta[{i}]"))?;
    }
    let mut sorted = theta.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = theta.iter().sum();
    let mut best = f64::INFINITY;
    let mut top = 0.0;
    for (r, t) in sorted.iter().enumerate() {
        top += t;
        let size = r + 1;
        if size % 2 == 1 {
            best = best.min((size as f64 - 1.0) * PI + total - 2.0 * top);
        }
    }
    Ok(best)
}

/// Completability of the unit-diagonal cycle partial matrix whose consecutive
/// entries are `cos θ_1, ..., cos θ_p` (`θ_p` closes the cycle).
pub fn cycle_completable(theta: &[f64]) -> Result<bool> {
    Ok(cycle_min_slack(theta)? > ANGLE_MARGIN)
}

/// The partial matrix described by [`cycle_completable`].
pub fn cycle_partial_matrix(theta: &[f64]) -> Result<PartialMatrix> {
    let p = theta.len();
    if p < 3 {
        return Err(GgmError::OutOfRange("a cycle needs at least 3 angles".into()));
    }
    let mut entries: Vec<(usize, usize, f64)> = (0..p).map(|i| (i, i, 1.0)).collect();
    for (i, t) in theta.iter().enumerate() {
        entries.push((i, (i + 1) % p, t.cos()));
    }
    PartialMatrix::new(Graph::cycle(p), &entries)
}

/// Angles `θ_k` between consecutive cycle vertices of a unit-diagonal cycle
/// partial matrix, `order` giving the cycle.
pub(crate) fn cycle_angles(corr: &PartialMatrix, order: &[usize]) -> Result<Vec<f64>> {
    let p = order.len();
    (0..p)
        .map(|k| {
            let r = corr.filled.get(order[k], order[(k + 1) % p]);
            if r.abs() >= 1.0 {
                Err(GgmError::DegenerateConfiguration(format!(
                    "edge ({}, {}) has correlation {r}",
                    order[k],
                    order[(k + 1) % p]
                )))
            } else {
                Ok(r.acos())
            }
        })
        .collect()
}

/// Existence of the maximum likelihood estimate for the `p`-cycle from two
/// samples, given as the per-variable vectors `x_1, ..., x_p` in the plane.
///
/// Each vector is replaced by its line (direction modulo sign), the lines are
/// rotated so the first lies along the x-axis, and `θ_i` is the angle between
/// consecutive unit vectors on the upper half circle.
pub fn buhl_two_sample(vectors: &[[f64; 2]]) -> Result<bool> {
    let p = vectors.len();
    if p < 3 {
        return Err(GgmError::DegenerateConfiguration(format!(
            "need at least 3 vectors, got {p}"
        )));
    }
    let norms: Vec<f64> = vectors.iter().map(|v| v[0].hypot(v[1])).collect();
    if let Some(i) = norms.iter().position(|n| !(*n > 0.0) || !n.is_finite()) {
        return Err(GgmError::DegenerateConfiguration(format!("vector {i} is zero")));
    }
    for i in 0..p {
        for j in (i + 1)..p {
            let cross = vectors[i][0] * vectors[j][1] - vectors[i][1] * vectors[j][0];
            if cross.abs() <= 1e-12 * norms[i] * norms[j] {
                return Err(GgmError::DegenerateConfiguration(format!(
                    "vectors {i} and {j} are collinear"
                )));
            }
        }
    }
    let line = |v: &[f64; 2]| v[1].atan2(v[0]).rem_euclid(PI);
    let base = line(&vectors[0]);
    let phi: Vec<f64> = vectors.iter().map(|v| (line(v) - base).rem_euclid(PI)).collect();
    let theta: Vec<f64> = (0..p).map(|i| (phi[i] - phi[(i + 1) % p]).abs()).collect();
    cycle_completable(&theta)
}

/// Whether `g` admits the clique-only completability test.
pub fn clique_test_is_exact(g: &Graph) -> bool {
    is_chordal(g)
}

/// On-disk form of a partial matrix: 1-based edges and `"i,j"` value keys.
/// Every diagonal entry and every edge needs a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialMatrixDoc {
    pub p: usize,
    pub edges: Vec<[usize; 2]>,
    pub values: BTreeMap<String, f64>,
}

impl PartialMatrixDoc {
    pub fn into_partial_matrix(self) -> Result<PartialMatrix> {
        let p = self.p;
        let vertex = |v: usize| {
            if v == 0 || v > p {
                Err(GgmError::Parse(format!("vertex {v} outside 1..={p}")))
            } else {
                Ok(v - 1)
            }
        };
        let edges = self
            .edges
            .iter()
            .map(|&[i, j]| Ok((vertex(i)?, vertex(j)?)))
            .collect::<Result<Vec<_>>>()?;
        let graph = Graph::from_edges(p, &edges)?;
        let entries = self
            .values
            .iter()
            .map(|(key, &v)| {
                let (i, j) = key
                    .split_once(',')
                    .ok_or_else(|| GgmError::Parse(format!("value key '{key}' is not of the form \"i,j\"")))?;
                let parse = |t: &str| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| GgmError::Parse(format!("value key '{key}' has a bad index")))
                };
                Ok((vertex(parse(i)?)?, vertex(parse(j)?)?, v))
            })
            .collect::<Result<Vec<_>>>()?;
        PartialMatrix::new(graph, &entries)
    }

    pub fn from_partial_matrix(pm: &PartialMatrix) -> Self {
        Self {
            p: pm.dim(),
            edges: pm.graph.edges().into_iter().map(|(i, j)| [i + 1, j + 1]).collect(),
            values: pm
                .entries()
                .into_iter()
                .map(|(i, j, v)| (format!("{},{}", i + 1, j + 1), v))
                .collect(),
        }
    }
}
