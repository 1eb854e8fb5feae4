//! Gaussian models whose concentration matrix ranges over a linear subspace
//! spanned by sparse symmetric basis matrices, fitted by damped Newton ascent
//! on `log det K - tr(S K)` in the basis coordinates.
//!
//! The plain graphical model is the special case with one basis element per
//! vertex and per edge; colored models tie several entries to one coordinate.

use crate::error::{GgmError, Result};
use crate::graphs::Graph;
use crate::linalg::{Cholesky, SymMatrix};

/// Armijo fraction for the backtracking line search.
const ARMIJO: f64 = 0.25;
const MIN_STEP: f64 = 1e-14;
/// Below this Newton decrement a full step stays positive definite.
const FULL_STEP_DECREMENT: f64 = 0.0625;

/// A symmetric matrix given by its upper-triangle entries `(i, j, v)`,
/// `i <= j`; `(i, j)` with `i < j` stands for both `(i, j)` and `(j, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisElement {
    entries: Vec<(usize, usize, f64)>,
    full: Vec<(usize, usize, f64)>,
}

impl BasisElement {
    pub fn new(entries: Vec<(usize, usize, f64)>) -> Self {
        let entries: Vec<_> = entries
            .into_iter()
            .map(|(i, j, v)| if i <= j { (i, j, v) } else { (j, i, v) })
            .collect();
        let mut full = Vec::with_capacity(2 * entries.len());
        for &(i, j, v) in &entries {
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        Self { entries, full }
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// `tr(M B)`.
    pub fn pair(&self, m: &SymMatrix) -> f64 {
        self.full.iter().map(|&(i, j, v)| v * m.get(i, j)).sum()
    }

    pub fn to_dense(&self, p: usize) -> SymMatrix {
        let mut m = SymMatrix::zeros(p);
        for &(i, j, v) in &self.entries {
            m.add_to(i, j, v);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    p: usize,
    basis: Vec<BasisElement>,
}

impl LinearModel {
    pub fn new(p: usize, basis: Vec<BasisElement>) -> Result<Self> {
        for b in &basis {
            if let Some(&(i, j, _)) = b.entries.iter().find(|&&(i, j, _)| i >= p || j >= p) {
                return Err(GgmError::InvalidIndexSet(format!(
                    "basis entry ({i}, {j}) outside dimension {p}"
                )));
            }
        }
        Ok(Self { p, basis })
    }

    /// One indicator per vertex (diagonal) followed by one per edge, in
    /// lexicographic order.
    pub fn graphical(g: &Graph) -> Self {
        let p = g.num_vertices();
        let mut basis: Vec<BasisElement> = (0..p).map(|i| BasisElement::new(vec![(i, i, 1.0)])).collect();
        basis.extend(g.edges().into_iter().map(|(i, j)| BasisElement::new(vec![(i, j, 1.0)])));
        Self { p, basis }
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn basis(&self) -> &[BasisElement] {
        &self.basis
    }

    pub fn assemble(&self, coords: &[f64]) -> SymMatrix {
        let mut k = SymMatrix::zeros(self.p);
        for (b, &c) in self.basis.iter().zip(coords) {
            if c != 0.0 {
                for &(i, j, v) in &b.entries {
                    k.add_to(i, j, c * v);
                }
            }
        }
        k
    }

    /// `(tr(M B_1), ..., tr(M B_d))`.
    pub fn pairings(&self, m: &SymMatrix) -> Vec<f64> {
        self.basis.iter().map(|b| b.pair(m)).collect()
    }

    /// `H_ab = tr(Σ B_a Σ B_b)`, minus the Hessian of `log det K`.
    fn curvature(&self, sigma: &SymMatrix) -> SymMatrix {
        let d = self.basis.len();
        SymMatrix::from_fn(d, |a, b| {
            let mut acc = 0.0;
            for &(p, q, u) in &self.basis[a].full {
                for &(r, s, v) in &self.basis[b].full {
                    acc += u * v * sigma.get(q, r) * sigma.get(s, p);
                }
            }
            acc
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop once half the squared Newton decrement falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Declare divergence once `max |K_ij|` exceeds this.
    pub divergence_bound: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-20,
            max_iter: 500,
            divergence_bound: 1e8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divergence {
    /// A positive definite iterate `K` in the model had `tr(S K) <= 0`, which
    /// no completable statistic allows.
    Certificate,
    /// `max |K_ij|` passed the divergence bound.
    NormBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonStatus {
    Converged,
    Diverged(Divergence),
    IterationCap,
}

#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub coords: Vec<f64>,
    pub k: SymMatrix,
    pub sigma: SymMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub status: NewtonStatus,
    /// `max_a |tr(Σ B_a) - tr(S B_a)|` at the last iterate.
    pub gradient_norm: f64,
}

fn objective(k: &SymMatrix, s: &SymMatrix) -> Option<(f64, Cholesky)> {
    let chol = Cholesky::new(k).ok()?;
    let f = chol.log_det() - s.trace_product(k);
    f.is_finite().then_some((f, chol))
}

/// Scale-aware default divergence bound: at a maximizer `K_ii >= 1 / S_ii`,
/// so the bound is set `factor` times above the largest such floor.
pub fn divergence_bound_for(s: &SymMatrix, factor: f64) -> f64 {
    let floor = s
        .diag()
        .into_iter()
        .filter(|d| *d > 0.0)
        .map(|d| 1.0 / d)
        .fold(1.0_f64, f64::max);
    factor * floor
}

/// Maximizes `log det K - tr(S K)` over `K = sum_a c_a B_a` positive definite,
/// starting from `start` (which must assemble to a positive definite matrix).
pub fn maximize_likelihood(
    model: &LinearModel,
    s: &SymMatrix,
    start: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonSolution> {
    if s.dim() != model.p {
        return Err(GgmError::DimensionMismatch {
            expected: model.p,
            found: s.dim(),
        });
    }
    if start.len() != model.basis.len() {
        return Err(GgmError::DimensionMismatch {
            expected: model.basis.len(),
            found: start.len(),
        });
    }
    if Cholesky::new(&model.curvature(&SymMatrix::identity(model.p))).is_err() {
        return Err(GgmError::InvalidIndexSet(
            "basis matrices are linearly dependent".into(),
        ));
    }
    let s_pair = model.pairings(s);
    let mut coords = start.to_vec();
    let mut k = model.assemble(&coords);
    let (mut f, mut chol) = objective(&k, s).ok_or(GgmError::NotPositiveDefinite)?;

    let mut status = NewtonStatus::IterationCap;
    let mut iterations = 0;
    let mut sigma = chol.inverse();
    let mut grad_norm = f64::INFINITY;
    let mut prev_decrement = f64::INFINITY;
    while iterations < opts.max_iter {
        if s.trace_product(&k) <= 0.0 {
            status = NewtonStatus::Diverged(Divergence::Certificate);
            break;
        }
        let grad: Vec<f64> = model
            .pairings(&sigma)
            .iter()
            .zip(&s_pair)
            .map(|(a, b)| a - b)
            .collect();
        grad_norm = grad.iter().fold(0.0, |acc, g| acc.max(g.abs()));
        let hess = model.curvature(&sigma);
        let Ok(hchol) = Cholesky::new(&hess) else {
            // The basis is independent, so only a numerically singular Σ
            // can break the curvature.
            status = NewtonStatus::Diverged(Divergence::NormBound);
            break;
        };
        let dir = hchol.solve(&grad);
        let decrement: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if decrement / 2.0 <= opts.tol {
            status = NewtonStatus::Converged;
            break;
        }
        iterations += 1;

        // Inside the region of quadratic convergence the full step is
        // feasible and the objective gain is below rounding, so skip the
        // sufficient-increase test.
        let full = (decrement < FULL_STEP_DECREMENT)
            .then(|| {
                let trial: Vec<f64> = coords.iter().zip(&dir).map(|(c, d)| c + d).collect();
                let k_trial = model.assemble(&trial);
                objective(&k_trial, s).map(|(f_trial, chol_trial)| (trial, k_trial, f_trial, chol_trial))
            })
            .flatten();
        let mut step = 1.0;
        let accepted = full.or_else(|| loop {
            let trial: Vec<f64> = coords.iter().zip(&dir).map(|(c, d)| c + step * d).collect();
            let k_trial = model.assemble(&trial);
            if let Some((f_trial, chol_trial)) = objective(&k_trial, s) {
                if f_trial >= f + ARMIJO * step * decrement {
                    break Some((trial, k_trial, f_trial, chol_trial));
                }
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        });
        let Some((trial, k_trial, f_trial, chol_trial)) = accepted else {
            // No representable ascent left: the decrement is at rounding level.
            status = if decrement < 1e-10 {
                NewtonStatus::Converged
            } else {
                NewtonStatus::IterationCap
            };
            break;
        };
        coords = trial;
        k = k_trial;
        f = f_trial;
        chol = chol_trial;
        sigma = chol.inverse();
        if k.max_abs() > opts.divergence_bound {
            status = NewtonStatus::Diverged(Divergence::NormBound);
            break;
        }
        // Quadratic convergence stops only at the rounding floor.
        if decrement < 1e-10 && decrement > 0.25 * prev_decrement {
            status = NewtonStatus::Converged;
            break;
        }
        prev_decrement = decrement;
    }
    if status == NewtonStatus::Converged {
        grad_norm = model
            .pairings(&sigma)
            .iter()
            .zip(&s_pair)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()));
    }
    Ok(NewtonSolution {
        coords,
        k,
        sigma,
        objective: f,
        iterations,
        status,
        gradient_norm: grad_norm,
    })
}
