//! Maximum likelihood estimation in Gaussian graphical models.
//!
//! Three estimators are provided: coordinate descent on the covariance
//! (fills non-edges one at a time), coordinate descent on the precision
//! (matches one diagonal entry or edge block at a time), and the closed form
//! for chordal graphs. [`mle_exists`] decides existence without fitting when a
//! certified criterion applies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::completion::{
    self, clique_sum_precision, cycle_angles, cycle_min_slack, maxdet_completion, project, Completion,
    ANGLE_MARGIN,
};
use crate::error::{GgmError, Result};
use crate::gaussian::{raw_second_moment, sufficient_stats};
use crate::graphs::{clique_decomposition, is_chordal, Graph};
use crate::linalg::{default_pd_tolerance, is_positive_definite, Cholesky, SymMatrix};
use crate::subspace::divergence_bound_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitStatus {
    Converged,
    NonExistent,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleResult {
    pub status: FitStatus,
    pub sigma_hat: SymMatrix,
    pub k_hat: SymMatrix,
    /// `log det K̂ - tr(S K̂)`.
    pub loglik: f64,
    pub iterations: usize,
    #[serde(rename = "fiber_residual")]
    pub max_fiber_residual: f64,
    #[serde(rename = "zero_residual")]
    pub max_zero_residual: f64,
    /// Objective after each sweep.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl MleResult {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Stop when the entrywise 1-norm change over a sweep drops below this.
    pub eps: f64,
    /// Maximum number of sweeps.
    pub max_iter: usize,
    /// Largest `max |K_ij|` tolerated before declaring non-existence;
    /// `None` picks a bound from the scale of `S`.
    pub divergence_bound: Option<f64>,
    /// Precision coordinate descent starts from `start_scale * I`.
    pub start_scale: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            eps: 1e-9,
            max_iter: 10_000,
            divergence_bound: None,
            start_scale: 1.0,
        }
    }
}

fn check_dims(g: &Graph, s: &SymMatrix) -> Result<()> {
    if g.num_vertices() != s.dim() {
        return Err(GgmError::DimensionMismatch {
            expected: g.num_vertices(),
            found: s.dim(),
        });
    }
    Ok(())
}

fn fiber_residual(g: &Graph, sigma: &SymMatrix, s: &SymMatrix) -> f64 {
    g.augmented_edges()
        .into_iter()
        .fold(0.0, |acc, (i, j)| acc.max((sigma.get(i, j) - s.get(i, j)).abs()))
}

fn off_support_max(g: &Graph, k: &SymMatrix) -> f64 {
    g.non_edges().into_iter().fold(0.0, |acc, (i, j)| acc.max(k.get(i, j).abs()))
}

/// Replaces `inv` by the inverse of `inv^{-1} + U Δ U^T`, where `U` selects
/// the coordinates `idx` (one or two of them).
fn low_rank_inverse_update(inv: &mut SymMatrix, idx: &[usize], delta: &[[f64; 2]; 2]) -> Result<()> {
    let p = inv.dim();
    let w: [[f64; 2]; 2] = match *idx {
        [a] => {
            let denom = 1.0 + inv.get(a, a) * delta[0][0];
            if !(denom.abs() > f64::EPSILON) {
                return Err(GgmError::NotPositiveDefinite);
            }
            [[delta[0][0] / denom, 0.0], [0.0, 0.0]]
        }
        [a, b] => {
            let s = [[inv.get(a, a), inv.get(a, b)], [inv.get(b, a), inv.get(b, b)]];
            let m = [
                [1.0 + s[0][0] * delta[0][0] + s[0][1] * delta[1][0], s[0][0] * delta[0][1] + s[0][1] * delta[1][1]],
                [s[1][0] * delta[0][0] + s[1][1] * delta[1][0], 1.0 + s[1][0] * delta[0][1] + s[1][1] * delta[1][1]],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if !(det.abs() > f64::EPSILON) {
                return Err(GgmError::NotPositiveDefinite);
            }
            let mi = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
            let w01 = delta[0][0] * mi[0][1] + delta[0][1] * mi[1][1];
            let w10 = delta[1][0] * mi[0][0] + delta[1][1] * mi[1][0];
            let sym = 0.5 * (w01 + w10);
            [
                [delta[0][0] * mi[0][0] + delta[0][1] * mi[1][0], sym],
                [sym, delta[1][0] * mi[0][1] + delta[1][1] * mi[1][1]],
            ]
        }
        _ => unreachable!("blocks have one or two coordinates"),
    };
    let cols: Vec<Vec<f64>> = idx.iter().map(|&a| inv.row(a).to_vec()).collect();
    for i in 0..p {
        for j in i..p {
            let mut acc = 0.0;
            for (x, ci) in cols.iter().enumerate() {
                for (y, cj) in cols.iter().enumerate() {
                    acc += ci[i] * w[x][y] * cj[j];
                }
            }
            inv.add_to(i, j, -acc);
        }
    }
    Ok(())
}

fn likelihood_with_chol(k: &SymMatrix, s: &SymMatrix) -> Option<(f64, SymMatrix)> {
    let chol = Cholesky::new(k).ok()?;
    let f = chol.log_det() - s.trace_product(k);
    f.is_finite().then(|| (f, chol.inverse()))
}

/// Coordinate descent on the covariance. Starting from `S`, each non-edge
/// entry is set to the value that makes the corresponding precision entry
/// vanish, `Σ_uv = Σ_uB Σ_BB^{-1} Σ_Bv` with `B` the remaining vertices.
/// Requires `S` positive definite.
pub fn fit_coordinate_sigma(g: &Graph, s: &SymMatrix, opts: &FitOptions) -> Result<MleResult> {
    check_dims(g, s)?;
    let mut sigma = s.clone();
    let mut k = Cholesky::with_tolerance(s, default_pd_tolerance(s))?.inverse();
    let mut f = crate::gaussian::log_likelihood(&k, s)?;
    let non_edges = g.non_edges();
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut status = FitStatus::IterationCap;
    if non_edges.is_empty() {
        status = FitStatus::Converged;
    }
    while status != FitStatus::Converged && iterations < opts.max_iter {
        iterations += 1;
        let before = sigma.clone();
        for &(u, v) in &non_edges {
            // Σ_uB Σ_BB^{-1} Σ_Bv = Σ_uv - ((K_AA)^{-1})_uv with A = {u, v}.
            let det = k.get(u, u) * k.get(v, v) - k.get(u, v) * k.get(u, v);
            if !(det > 0.0) {
                return Err(GgmError::NotPositiveDefinite);
            }
            let step = k.get(u, v) / det;
            if step == 0.0 {
                continue;
            }
            sigma.add_to(u, v, step);
            low_rank_inverse_update(&mut k, &[u, v], &[[0.0, step], [step, 0.0]])?;
        }
        k = Cholesky::new(&sigma)?.inverse();
        f = crate::gaussian::log_likelihood(&k, s)?;
        trace.push(f);
        if sigma.l1_diff(&before) < opts.eps {
            status = FitStatus::Converged;
        }
    }
    Ok(MleResult {
        status,
        max_fiber_residual: fiber_residual(g, &sigma, s),
        max_zero_residual: off_support_max(g, &k),
        sigma_hat: sigma,
        k_hat: k,
        loglik: f,
        iterations,
        objective_trace: trace,
    })
}

fn inv2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

/// Coordinate descent on the precision matrix from `K = start_scale * I`.
///
/// Blocks are the diagonal singletons `{i}` followed by the edges `{u, v}`,
/// both in lexicographic order. Each step sets
/// `K_AA = (S_AA)^{-1} + K_AB K_BB^{-1} K_BA`, which makes `Σ_AA = S_AA`.
/// Non-existence is reported when a block of `S` is not positive definite,
/// when `max |K_ij|` exceeds the divergence bound, or when an iterate
/// satisfies `tr(S K) <= 0`.
pub fn fit_coordinate_k(g: &Graph, s: &SymMatrix, opts: &FitOptions) -> Result<MleResult> {
    check_dims(g, s)?;
    let p = s.dim();
    if !(opts.start_scale > 0.0) {
        return Err(GgmError::OutOfRange(format!(
            "start scale must be positive, got {}",
            opts.start_scale
        )));
    }
    let bound = opts.divergence_bound.unwrap_or_else(|| divergence_bound_for(s, 1e8));
    let mut k = SymMatrix::identity(p).scaled(opts.start_scale);
    let mut sigma = SymMatrix::identity(p).scaled(1.0 / opts.start_scale);
    let mut f = crate::gaussian::log_likelihood(&k, s)?;
    let mut trace = vec![f];

    let blocks: Vec<Vec<usize>> = (0..p).map(|i| vec![i]).chain(g.edges().into_iter().map(|(u, v)| vec![u, v])).collect();
    let finish = |status, k: SymMatrix, sigma: SymMatrix, f, iterations, trace| MleResult {
        status,
        max_fiber_residual: fiber_residual(g, &sigma, s),
        max_zero_residual: off_support_max(g, &k),
        sigma_hat: sigma,
        k_hat: k,
        loglik: f,
        iterations,
        objective_trace: trace,
    };
    if blocks.iter().any(|a| !is_positive_definite(&s.submatrix(a), default_pd_tolerance(&s.submatrix(a)))) {
        return Ok(finish(FitStatus::NonExistent, k, sigma, f, 0, trace));
    }
    let s_inv: Vec<[[f64; 2]; 2]> = blocks
        .iter()
        .map(|a| match a[..] {
            [i] => [[1.0 / s.get(i, i), 0.0], [0.0, 0.0]],
            [u, v] => inv2([[s.get(u, u), s.get(u, v)], [s.get(v, u), s.get(v, v)]]),
            _ => unreachable!(),
        })
        .collect();

    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let before = k.clone();
        for (a, target) in blocks.iter().zip(&s_inv) {
            let delta = match a[..] {
                [i] => [[target[0][0] - 1.0 / sigma.get(i, i), 0.0], [0.0, 0.0]],
                [u, v] => {
                    let cur = inv2([[sigma.get(u, u), sigma.get(u, v)], [sigma.get(v, u), sigma.get(v, v)]]);
                    let d01 = target[0][1] - cur[0][1];
                    [[target[0][0] - cur[0][0], d01], [d01, target[1][1] - cur[1][1]]]
                }
                _ => unreachable!(),
            };
            for (x, &i) in a.iter().enumerate() {
                for (y, &j) in a.iter().enumerate().skip(x) {
                    k.add_to(i, j, delta[x][y]);
                }
            }
            if low_rank_inverse_update(&mut sigma, a, &delta).is_err() {
                return Ok(finish(FitStatus::NonExistent, k, sigma, f, iterations, trace));
            }
        }
        let Some((f_new, sigma_new)) = likelihood_with_chol(&k, s) else {
            return Ok(finish(FitStatus::NonExistent, k, sigma, f, iterations, trace));
        };
        debug_assert!(
            f_new >= f - 1e-8 * f.abs().max(1.0),
            "objective decreased from {f} to {f_new}"
        );
        f = f_new;
        sigma = sigma_new;
        trace.push(f);
        if k.max_abs() > bound || s.trace_product(&k) <= 0.0 {
            return Ok(finish(FitStatus::NonExistent, k, sigma, f, iterations, trace));
        }
        if k.l1_diff(&before) < opts.eps {
            return Ok(finish(FitStatus::Converged, k, sigma, f, iterations, trace));
        }
    }
    Ok(finish(FitStatus::IterationCap, k, sigma, f, iterations, trace))
}

/// Closed-form estimate on a chordal graph: the clique-sum of inverted clique
/// blocks minus the separator terms. Only the `E*` entries of `s` are read.
pub fn fit_chordal_closed_form(g: &Graph, s: &SymMatrix) -> Result<MleResult> {
    check_dims(g, s)?;
    let decomp = clique_decomposition(g)?;
    let k = clique_sum_precision(&decomp, s)
        .map_err(|_| GgmError::NonExistent("a clique block of S is not positive definite".into()))?;
    let chol = Cholesky::new(&k).map_err(|_| GgmError::NonExistent("clique-sum precision is singular".into()))?;
    let sigma = chol.inverse();
    let loglik = chol.log_det() - s.trace_product(&k);
    Ok(MleResult {
        status: FitStatus::Converged,
        max_fiber_residual: fiber_residual(g, &sigma, s),
        max_zero_residual: off_support_max(g, &k),
        sigma_hat: sigma,
        k_hat: k,
        loglik,
        iterations: 0,
        objective_trace: vec![loglik],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Existence {
    Yes,
    No,
    Unknown,
}

impl Serialize for Existence {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Existence::Yes => serializer.serialize_bool(true),
            Existence::No => serializer.serialize_bool(false),
            Existence::Unknown => serializer.serialize_str("unknown"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExistenceMethod {
    CliqueChordal,
    CycleAngles,
    Divergence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistenceVerdict {
    pub exists: Existence,
    pub method: ExistenceMethod,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExistenceStrategy {
    #[default]
    Auto,
    Chordal,
    Cycle,
    Divergence,
}

impl std::str::FromStr for ExistenceStrategy {
    type Err = GgmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "chordal" => Ok(Self::Chordal),
            "cycle" => Ok(Self::Cycle),
            "divergence" => Ok(Self::Divergence),
            other => Err(GgmError::Parse(format!("unknown strategy '{other}'"))),
        }
    }
}

fn verdict(exists: bool, method: ExistenceMethod, detail: String) -> ExistenceVerdict {
    ExistenceVerdict {
        exists: if exists { Existence::Yes } else { Existence::No },
        method,
        detail,
    }
}

fn chordal_verdict(g: &Graph, s: &SymMatrix) -> Result<ExistenceVerdict> {
    let decomp = clique_decomposition(g)?;
    let bad = decomp.cliques.iter().find(|c| {
        let sub = s.submatrix(c);
        !is_positive_definite(&sub, default_pd_tolerance(&sub))
    });
    Ok(match bad {
        None => verdict(
            true,
            ExistenceMethod::CliqueChordal,
            format!("all {} clique blocks positive definite", decomp.cliques.len()),
        ),
        Some(c) => verdict(
            false,
            ExistenceMethod::CliqueChordal,
            format!("clique block {c:?} is not positive definite"),
        ),
    })
}

fn cycle_verdict(g: &Graph, s: &SymMatrix) -> Result<ExistenceVerdict> {
    let order = g
        .cycle_order()
        .ok_or_else(|| GgmError::InvalidGraph("cycle strategy needs a single cycle graph".into()))?;
    let pm = project(s, g)?;
    if !completion::clique_feasible(&pm)? {
        return Ok(verdict(
            false,
            ExistenceMethod::CycleAngles,
            "an edge block is not positive definite".into(),
        ));
    }
    let theta = cycle_angles(&pm.to_correlation()?, &order)?;
    let slack = cycle_min_slack(&theta)?;
    Ok(verdict(
        slack > ANGLE_MARGIN,
        ExistenceMethod::CycleAngles,
        format!("minimum angle slack {slack:e}"),
    ))
}

fn divergence_verdict(g: &Graph, s: &SymMatrix) -> Result<ExistenceVerdict> {
    let pm = project(s, g)?;
    match maxdet_completion(&pm, completion::DEFAULT_COMPLETION_EPS, completion::DEFAULT_COMPLETION_MAX_ITER) {
        Ok(Completion::Completed(_)) => Ok(verdict(
            true,
            ExistenceMethod::Divergence,
            "likelihood maximizer found".into(),
        )),
        Ok(Completion::NonCompletable(nc)) => Ok(verdict(false, ExistenceMethod::Divergence, nc.reason)),
        Err(GgmError::IterationCap(n)) => Ok(ExistenceVerdict {
            exists: Existence::Unknown,
            method: ExistenceMethod::Divergence,
            detail: format!("no decision after {n} iterations"),
        }),
        Err(e) => Err(e),
    }
}

/// Decides whether the maximum likelihood estimate exists for statistic `s`.
///
/// `Auto` uses the clique test on chordal graphs, the angle criterion on
/// cycles and a likelihood ascent probe otherwise.
pub fn mle_exists(g: &Graph, s: &SymMatrix, strategy: ExistenceStrategy) -> Result<ExistenceVerdict> {
    check_dims(g, s)?;
    match strategy {
        ExistenceStrategy::Chordal => chordal_verdict(g, s),
        ExistenceStrategy::Cycle => cycle_verdict(g, s),
        ExistenceStrategy::Divergence => divergence_verdict(g, s),
        ExistenceStrategy::Auto => {
            if is_chordal(g) {
                chordal_verdict(g, s)
            } else if g.cycle_order().is_some() {
                cycle_verdict(g, s)
            } else {
                divergence_verdict(g, s)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub fiber_residual: f64,
    pub zero_residual: f64,
    pub inverse_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Checks that `Σ̂` matches `S` on `E*`, that `K̂` vanishes off `E*` and that
/// the two are inverse to each other.
pub fn check_duality(result: &MleResult, g: &Graph, s: &SymMatrix, tol: f64) -> Result<DualityReport> {
    if !result.converged() {
        return Err(GgmError::NotConverged);
    }
    check_dims(g, s)?;
    let fiber_residual = fiber_residual(g, &result.sigma_hat, s);
    let zero_residual = off_support_max(g, &result.k_hat);
    let inverse_residual = result.sigma_hat.inverse_residual(&result.k_hat);
    Ok(DualityReport {
        fiber_residual,
        zero_residual,
        inverse_residual,
        tol,
        passed: fiber_residual <= tol && zero_residual <= tol && inverse_residual <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MltReport {
    pub n: usize,
    pub trials: usize,
    pub exists_count: usize,
    pub unknown_count: usize,
    pub exists_fraction: f64,
}

/// Statistic for one Monte Carlo trial: `n` standard normal samples in
/// dimension `p`, raw second moment when `n <= p`, centered otherwise.
pub fn mlt_trial_statistic(p: usize, n: usize, seed: u64, trial: u64) -> Result<SymMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let data: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let stats = if n <= p {
        raw_second_moment(&data)?
    } else {
        sufficient_stats(&data)?
    };
    Ok(stats.cov)
}

/// Fraction of `trials` simulated data sets of size `n` for which the
/// estimate exists. Trial `t` uses its own stream of the generator seeded
/// with `seed`, so the result does not depend on scheduling.
pub fn mlt_monte_carlo(g: &Graph, n: usize, trials: usize, seed: u64) -> Result<MltReport> {
    if trials == 0 {
        return Err(GgmError::OutOfRange("trials must be at least 1".into()));
    }
    if n == 0 {
        return Err(GgmError::EmptyData);
    }
    let p = g.num_vertices();
    let verdicts: Vec<Existence> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = mlt_trial_statistic(p, n, seed, t)?;
            Ok(mle_exists(g, &s, ExistenceStrategy::Auto)?.exists)
        })
        .collect::<Result<_>>()?;
    let exists_count = verdicts.iter().filter(|v| **v == Existence::Yes).count();
    let unknown_count = verdicts.iter().filter(|v| **v == Existence::Unknown).count();
    Ok(MltReport {
        n,
        trials,
        exists_count,
        unknown_count,
        exists_fraction: exists_count as f64 / trials as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_s() -> SymMatrix {
        SymMatrix::from_rows(&[vec![1.0, 0.5, 0.0], vec![0.5, 1.0, 0.4], vec![0.0, 0.4, 1.0]]).unwrap()
    }

    fn witness_s() -> SymMatrix {
        SymMatrix::from_rows(&[
            vec![1.0, 0.9, 0.0, -0.9],
            vec![0.9, 1.0, 0.9, 0.0],
            vec![0.0, 0.9, 1.0, 0.9],
            vec![-0.9, 0.0, 0.9, 1.0],
        ])
        .unwrap()
    }

    fn spd(p: usize) -> SymMatrix {
        SymMatrix::from_fn(p, |i, j| if i == j { 2.0 + i as f64 * 0.1 } else { 0.3 / (1.0 + (i + j) as f64) })
    }

    #[test]
    fn diagonal_s_is_fixed_point_of_sigma_descent() {
        let s = SymMatrix::from_diag(&[1.0, 2.0, 3.0, 4.0]);
        let r = fit_coordinate_sigma(&Graph::cycle(4), &s, &FitOptions::default()).unwrap();
        assert!(r.converged());
        assert_eq!(r.iterations, 1);
        assert!(r.sigma_hat.max_abs_diff(&s) < 1e-15);
        assert!(r.k_hat.max_abs_diff(&SymMatrix::from_diag(&[1.0, 0.5, 1.0 / 3.0, 0.25])) < 1e-15);
    }

    #[test]
    fn complete_graph_needs_no_sweeps() {
        let s = spd(4);
        let r = fit_coordinate_sigma(&Graph::complete(4), &s, &FitOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.sigma_hat, s);
        assert!(r.k_hat.inverse_residual(&s) < 1e-12);

        let rk = fit_coordinate_k(&Graph::complete(4), &s, &FitOptions::default()).unwrap();
        assert!(rk.converged());
        assert!(rk.k_hat.max_abs_diff(&r.k_hat) < 1e-8);
    }

    #[test]
    fn path_fill_value() {
        let g = Graph::path(3);
        let r = fit_coordinate_sigma(&g, &path_s(), &FitOptions::default()).unwrap();
        assert!((r.sigma_hat.get(0, 2) - 0.2).abs() < 1e-12);
        let cf = fit_chordal_closed_form(&g, &path_s()).unwrap();
        assert_eq!(cf.k_hat.get(0, 2), 0.0);
        assert!((cf.sigma_hat.get(0, 2) - 0.2).abs() < 1e-12);
        let report = check_duality(&cf, &g, &path_s(), 1e-8).unwrap();
        assert!(report.passed);
        assert_eq!(report.zero_residual, 0.0);
    }

    #[test]
    fn singular_s_rejected_by_sigma_descent() {
        let s = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(
            fit_coordinate_sigma(&Graph::new(2), &s, &FitOptions::default()),
            Err(GgmError::NotPositiveDefinite)
        );
    }

    #[test]
    fn witness_is_nonexistent_for_k_descent() {
        let r = fit_coordinate_k(&Graph::cycle(4), &witness_s(), &FitOptions::default()).unwrap();
        assert_eq!(r.status, FitStatus::NonExistent);
        let v = mle_exists(&Graph::cycle(4), &witness_s(), ExistenceStrategy::Auto).unwrap();
        assert_eq!((v.exists, v.method), (Existence::No, ExistenceMethod::CycleAngles));
        let v = mle_exists(&Graph::cycle(4), &witness_s(), ExistenceStrategy::Divergence).unwrap();
        assert_eq!(v.exists, Existence::No);
    }

    #[test]
    fn identity_on_cycle_exists() {
        let v = mle_exists(&Graph::cycle(4), &SymMatrix::identity(4), ExistenceStrategy::Auto).unwrap();
        assert_eq!(v.exists, Existence::Yes);
        assert!(mle_exists(&Graph::path(4), &SymMatrix::identity(4), ExistenceStrategy::Cycle).is_err());
        assert!(mle_exists(&Graph::cycle(4), &SymMatrix::identity(4), ExistenceStrategy::Chordal).is_err());
    }

    #[test]
    fn k_descent_matches_sigma_descent_on_cycle() {
        let g = Graph::cycle(5);
        let s = spd(5);
        let a = fit_coordinate_k(&g, &s, &FitOptions::default()).unwrap();
        let b = fit_coordinate_sigma(&g, &s, &FitOptions::default()).unwrap();
        assert!(a.converged() && b.converged());
        assert!(a.k_hat.max_abs_diff(&b.k_hat) < 1e-6);
        assert!(a.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(check_duality(&a, &g, &s, 1e-6).unwrap().passed);
    }

    #[test]
    fn duality_requires_convergence() {
        let r = fit_coordinate_k(&Graph::cycle(4), &witness_s(), &FitOptions::default()).unwrap();
        assert_eq!(check_duality(&r, &Graph::cycle(4), &witness_s(), 1e-6), Err(GgmError::NotConverged));
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let g = Graph::cycle(5);
        let a = mlt_monte_carlo(&g, 2, 40, 7).unwrap();
        let b = mlt_monte_carlo(&g, 2, 40, 7).unwrap();
        assert_eq!(a, b);
        assert!(mlt_monte_carlo(&g, 2, 0, 7).is_err());
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("cycle".parse::<ExistenceStrategy>().unwrap(), ExistenceStrategy::Cycle);
        assert!("nope".parse::<ExistenceStrategy>().is_err());
    }
}
