//! Structure learning: partial-correlation tests, penalized-likelihood
//! stepwise search, thresholding and the ℓ1-penalized estimator.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{GgmError, Result};
use crate::gaussian::partial_correlation;
use crate::graphs::{is_chordal, Graph};
use crate::linalg::{complement, invert_pd, Cholesky, SymMatrix};
use crate::mle::{fit_chordal_closed_form, fit_coordinate_sigma, FitOptions, FitStatus};

/// `atanh(rho)`.
pub fn fisher_z(rho: f64) -> Result<f64> {
    if rho > -1.0 && rho < 1.0 {
        Ok(rho.signum() * rho.abs().atanh())
    } else {
        Err(GgmError::OutOfRange(format!("correlation {rho} must lie in (-1, 1)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CiTestResult {
    pub reject: bool,
    pub stat: f64,
    pub p_value: f64,
    pub partial_correlation: f64,
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal is valid")
}

/// Two-sided test of `X_i ⟂ X_j | X_rest` from the Fisher transform of the
/// sample partial correlation: `stat = sqrt(n - p - 1) |z|`.
pub fn ci_test_full(s: &SymMatrix, n: usize, i: usize, j: usize, alpha: f64) -> Result<CiTestResult> {
    let p = s.dim();
    if n <= p + 1 {
        return Err(GgmError::InsufficientSamples { n, p });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GgmError::OutOfRange(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if i == j || i >= p || j >= p {
        return Err(GgmError::InvalidIndexSet(format!("bad pair ({i}, {j})")));
    }
    let rest = complement(&[i.min(j), i.max(j)], p);
    let rho = partial_correlation(s, i, j, &rest)?;
    let stat = ((n - p - 1) as f64).sqrt() * fisher_z(rho)?.abs();
    let normal = standard_normal();
    let critical = normal.inverse_cdf(1.0 - alpha / 2.0);
    Ok(CiTestResult {
        reject: stat > critical,
        stat,
        p_value: 2.0 * normal.sf(stat),
        partial_correlation: rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl std::str::FromStr for Direction {
    type Err = GgmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Self::Forward),
            "backward" => Ok(Self::Backward),
            other => Err(GgmError::Parse(format!("unknown direction '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepAction {
    Add,
    Remove,
    /// The candidate's fit did not converge; it was not scored.
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    pub edge: (usize, usize),
    pub action: StepAction,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub graph: Graph,
    pub lambda: f64,
    pub score: f64,
    pub trace: Vec<SelectionStep>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepwiseOptions {
    /// Apply the best single change per sweep instead of the first improving
    /// one.
    pub best_first: bool,
    pub fit: FitOptions,
}

impl Default for StepwiseOptions {
    fn default() -> Self {
        Self {
            best_first: false,
            fit: FitOptions::default(),
        }
    }
}

/// `-2 ℓ + λ |E|` with `ℓ = n/2 (log det K̂ - tr(S K̂))`, or `None` when the
/// fit on `g` does not converge.
pub fn penalized_score(g: &Graph, s: &SymMatrix, n: usize, lambda: f64, fit: &FitOptions) -> Result<Option<f64>> {
    let result = if is_chordal(g) {
        match fit_chordal_closed_form(g, s) {
            Ok(r) => r,
            Err(GgmError::NonExistent(_)) => return Ok(None),
            Err(e) => return Err(e),
        }
    } else {
        fit_coordinate_sigma(g, s, fit)?
    };
    Ok((result.status == FitStatus::Converged).then(|| -(n as f64) * result.loglik + lambda * g.num_edges() as f64))
}

fn improves(candidate: f64, current: f64) -> bool {
    candidate < current - 1e-10 * current.abs().max(1.0)
}

/// Greedy edge search from the empty graph (forward) or the complete graph
/// (backward). Each sweep visits vertex pairs in lexicographic order and
/// accepts any single change that strictly lowers the penalized score; the
/// search stops after a sweep without changes.
pub fn stepwise_select(
    s: &SymMatrix,
    n: usize,
    direction: Direction,
    lambda: f64,
    opts: &StepwiseOptions,
) -> Result<SelectionResult> {
    if n == 0 {
        return Err(GgmError::EmptyData);
    }
    if !(lambda >= 0.0) {
        return Err(GgmError::OutOfRange(format!("lambda = {lambda} must be non-negative")));
    }
    Cholesky::new(s)?;
    let p = s.dim();
    let mut graph = match direction {
        Direction::Forward => Graph::new(p),
        Direction::Backward => Graph::complete(p),
    };
    let mut score = penalized_score(&graph, s, n, lambda, &opts.fit)?.ok_or(GgmError::NotConverged)?;
    let mut trace = Vec::new();
    let action = match direction {
        Direction::Forward => StepAction::Add,
        Direction::Backward => StepAction::Remove,
    };
    let toggle = |g: &mut Graph, (i, j): (usize, usize)| match direction {
        Direction::Forward => {
            g.add_edge(i, j).expect("candidate pair is valid");
        }
        Direction::Backward => {
            g.remove_edge(i, j);
        }
    };

    loop {
        let candidates = match direction {
            Direction::Forward => graph.non_edges(),
            Direction::Backward => graph.edges(),
        };
        let mut changed = false;
        let mut best: Option<((usize, usize), f64)> = None;
        for e in candidates {
            let mut trial = graph.clone();
            toggle(&mut trial, e);
            let Some(trial_score) = penalized_score(&trial, s, n, lambda, &opts.fit)? else {
                trace.push(SelectionStep {
                    edge: e,
                    action: StepAction::Skip,
                    score: f64::INFINITY,
                });
                continue;
            };
            if opts.best_first {
                if improves(trial_score, best.map_or(score, |b| b.1)) {
                    best = Some((e, trial_score));
                }
            } else if improves(trial_score, score) {
                graph = trial;
                score = trial_score;
                trace.push(SelectionStep { edge: e, action, score });
                changed = true;
            }
        }
        if let Some((e, trial_score)) = best {
            toggle(&mut graph, e);
            score = trial_score;
            trace.push(SelectionStep { edge: e, action, score });
            changed = true;
        }
        if !changed {
            break;
        }
    }
    let score = penalized_score(&graph, s, n, lambda, &opts.fit)?.ok_or(GgmError::NotConverged)?;
    Ok(SelectionResult {
        graph,
        lambda,
        score,
        trace,
    })
}

/// Keeps edge `(i, j)` iff `|K_ij| / sqrt(K_ii K_jj) > tau` with `K = S^{-1}`.
pub fn threshold_select(s: &SymMatrix, tau: f64) -> Result<Graph> {
    if !(tau >= 0.0) {
        return Err(GgmError::OutOfRange(format!("tau = {tau} must be non-negative")));
    }
    let k = invert_pd(s)?;
    let p = s.dim();
    let mut g = Graph::new(p);
    for i in 0..p {
        for j in (i + 1)..p {
            if k.get(i, j).abs() / (k.get(i, i) * k.get(j, j)).sqrt() > tau {
                g.add_edge(i, j)?;
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlassoResult {
    pub k: SymMatrix,
    /// `log det K - tr(S K) - λ sum_{i != j} |K_ij|`.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after each accepted step, starting value first.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

/// Smallest penalty at which the diagonal estimate `diag(1 / S_ii)` is
/// optimal: `max_{i != j} |S_ij|`.
pub fn glasso_lambda_max(s: &SymMatrix) -> f64 {
    let p = s.dim();
    let mut m = 0.0_f64;
    for i in 0..p {
        for j in (i + 1)..p {
            m = m.max(s.get(i, j).abs());
        }
    }
    m
}

fn off_diag_l1(k: &SymMatrix) -> f64 {
    let p = k.dim();
    let mut acc = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            acc += 2.0 * k.get(i, j).abs();
        }
    }
    acc
}

fn soft_threshold_step(k: &SymMatrix, grad: &SymMatrix, t: f64, lambda: f64) -> SymMatrix {
    SymMatrix::from_fn(k.dim(), |i, j| {
        let v = k.get(i, j) + t * grad.get(i, j);
        if i == j {
            v
        } else {
            v.signum() * (v.abs() - t * lambda).max(0.0)
        }
    })
}

/// Maximizes `log det K - tr(S K) - λ sum_{i != j} |K_ij|` by proximal
/// gradient ascent with Barzilai-Borwein step sizes and backtracking, from
/// `K = diag(1 / S_ii)`. Stops when the relative objective change and the
/// scaled step are both below `eps`.
pub fn glasso_fit(s: &SymMatrix, lambda: f64, eps: f64, max_iter: usize) -> Result<GlassoResult> {
    if !(lambda >= 0.0) {
        return Err(GgmError::OutOfRange(format!("lambda = {lambda} must be non-negative")));
    }
    let diag = s.diag();
    if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
        return Err(GgmError::OutOfRange(format!("S[{i}][{i}] must be positive")));
    }
    let smooth = |k: &SymMatrix| -> Option<(f64, SymMatrix)> {
        let chol = Cholesky::new(k).ok()?;
        let g = chol.log_det() - s.trace_product(k);
        g.is_finite().then(|| (g, chol.inverse()))
    };
    let mut k = SymMatrix::from_diag(&diag.iter().map(|d| 1.0 / d).collect::<Vec<_>>());
    let (mut g, mut sigma) = smooth(&k).ok_or(GgmError::NotPositiveDefinite)?;
    let mut f = g - lambda * off_diag_l1(&k);
    let mut trace = vec![f];
    let mut t = diag.iter().fold(f64::INFINITY, |a, d| a.min(*d)).powi(2);

    for iterations in 1..=max_iter {
        let grad = sigma.sub(s);
        let accepted = loop {
            let cand = soft_threshold_step(&k, &grad, t, lambda);
            if let Some((g_new, sigma_new)) = smooth(&cand) {
                let step = cand.sub(&k);
                let lin = grad.trace_product(&step);
                let quad = step.trace_product(&step) / (2.0 * t);
                if g_new >= g + lin - quad {
                    break Some((cand, g_new, sigma_new, step));
                }
            }
            t *= 0.5;
            if t < 1e-300 {
                break None;
            }
        };
        let (k_new, g_new, sigma_new, step) = accepted.ok_or(GgmError::NotPositiveDefinite)?;
        let f_new = g_new - lambda * off_diag_l1(&k_new);
        let step_size = step.max_abs() / t.max(1e-300) * t.min(1.0);
        let done = (f_new - f).abs() <= eps * f.abs().max(1.0) && step_size <= eps.sqrt() * k_new.max_abs().max(1.0);

        let d_sigma = sigma_new.sub(&sigma);
        let curvature = -step.trace_product(&d_sigma);
        if curvature > 0.0 {
            t = step.trace_product(&step) / curvature;
        }
        k = k_new;
        g = g_new;
        sigma = sigma_new;
        f = f_new;
        trace.push(f);
        if done {
            return Ok(GlassoResult {
                k,
                objective: f,
                iterations,
                objective_trace: trace,
            });
        }
    }
    Err(GgmError::IterationCap(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd() -> SymMatrix {
        SymMatrix::from_rows(&[
            vec![2.0, 0.6, 0.2, 0.1],
            vec![0.6, 1.5, 0.4, 0.0],
            vec![0.2, 0.4, 1.2, 0.3],
            vec![0.1, 0.0, 0.3, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn fisher_values() {
        assert_eq!(fisher_z(0.0).unwrap(), 0.0);
        assert!((fisher_z(0.5).unwrap() - 0.5 * 3.0_f64.ln()).abs() < 1e-15);
        assert_eq!(fisher_z(-0.3).unwrap(), -fisher_z(0.3).unwrap());
        assert!(fisher_z(1.0).is_err());
    }

    #[test]
    fn ci_test_requires_samples() {
        assert!(matches!(
            ci_test_full(&spd(), 5, 0, 1, 0.05),
            Err(GgmError::InsufficientSamples { .. })
        ));
        assert!(ci_test_full(&spd(), 50, 0, 0, 0.05).is_err());
        assert!(ci_test_full(&spd(), 50, 0, 1, 1.5).is_err());
    }

    #[test]
    fn ci_test_zero_correlation() {
        let r = ci_test_full(&SymMatrix::identity(4), 100, 0, 1, 0.05).unwrap();
        assert_eq!(r.stat, 0.0);
        assert!(!r.reject);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thresholds() {
        let s = spd();
        assert_eq!(threshold_select(&s, 1.0).unwrap().num_edges(), 0);
        let k = invert_pd(&s).unwrap();
        let nonzero = (0..4)
            .flat_map(|i| ((i + 1)..4).map(move |j| (i, j)))
            .filter(|&(i, j)| k.get(i, j) != 0.0)
            .count();
        assert_eq!(threshold_select(&s, 0.0).unwrap().num_edges(), nonzero);
    }

    #[test]
    fn saturated_backward_search_keeps_everything() {
        let r = stepwise_select(&spd(), 100, Direction::Backward, 0.0, &StepwiseOptions::default()).unwrap();
        assert!(r.graph.is_complete());
        assert!(r.trace.is_empty());
    }

    #[test]
    fn glasso_limits() {
        let s = spd();
        let r = glasso_fit(&s, 0.0, 1e-12, 10_000).unwrap();
        assert!(r.k.max_abs_diff(&invert_pd(&s).unwrap()) < 1e-5);
        let big = glasso_fit(&s, glasso_lambda_max(&s), 1e-12, 10_000).unwrap();
        let expected = SymMatrix::from_diag(&s.diag().iter().map(|d| 1.0 / d).collect::<Vec<_>>());
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(big.k.get(i, j), 0.0);
                }
            }
        }
        assert!(big.k.max_abs_diff(&expected) < 1e-12);
        assert!(glasso_fit(&s, -1.0, 1e-9, 10).is_err());
    }
}
