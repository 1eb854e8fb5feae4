//! Multivariate Gaussian primitives: sufficient statistics, the profile
//! log-likelihood, marginals and conditionals, almost-principal-minor
//! conditional-independence checks, and seeded sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GgmError, Result};
use crate::linalg::{
    complement, conditional_block, determinant, invert_pd, log_det_pd, numerical_rank,
    validate_index_set, Cholesky, SymMatrix,
};

/// Default relative tolerance for [`ci_minor_test`].
pub const DEFAULT_CI_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
}

impl GaussianParams {
    pub fn new(mean: Vec<f64>, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(GgmError::DimensionMismatch {
                expected: cov.dim(),
                found: mean.len(),
            });
        }
        Cholesky::new(&cov)?;
        Ok(Self { mean, cov })
    }

    /// `N(0, cov)`.
    pub fn centered(cov: SymMatrix) -> Result<Self> {
        Self::new(vec![0.0; cov.dim()], cov)
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn precision(&self) -> SymMatrix {
        invert_pd(&self.cov).expect("covariance is positive definite by construction")
    }
}

/// Sample size, mean and the 1/n-normalized scatter matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
}

fn validate_rows(data: &[Vec<f64>]) -> Result<usize> {
    let first = data.first().ok_or(GgmError::EmptyData)?;
    let p = first.len();
    if p == 0 {
        return Err(GgmError::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    if let Some(bad) = data.iter().find(|r| r.len() != p) {
        return Err(GgmError::DimensionMismatch {
            expected: p,
            found: bad.len(),
        });
    }
    Ok(p)
}

fn scatter(data: &[Vec<f64>], center: &[f64]) -> SymMatrix {
    let p = center.len();
    let n = data.len() as f64;
    let mut s = SymMatrix::zeros(p);
    for row in data {
        for i in 0..p {
            let di = row[i] - center[i];
            for j in i..p {
                s.add_to(i, j, di * (row[j] - center[j]));
            }
        }
    }
    let s = s.scaled(1.0 / n);
    debug_assert!(numerical_rank(&s, 1e-10) <= data.len().min(p));
    s
}

/// Column means and `S = (1/n) sum (x_i - xbar)(x_i - xbar)^T`.
pub fn sufficient_stats(data: &[Vec<f64>]) -> Result<SampleStats> {
    let p = validate_rows(data)?;
    let n = data.len();
    let mut mean = vec![0.0; p];
    for row in data {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let cov = scatter(data, &mean);
    Ok(SampleStats { n, mean, cov })
}

/// `S = (1/n) sum x_i x_i^T` with no mean subtraction (mean known to be 0).
pub fn raw_second_moment(data: &[Vec<f64>]) -> Result<SampleStats> {
    let p = validate_rows(data)?;
    let mean = vec![0.0; p];
    let cov = scatter(data, &mean);
    Ok(SampleStats {
        n: data.len(),
        mean,
        cov,
    })
}

/// `log det K - tr(S K)`, the per-sample profile log-likelihood up to
/// constants.
pub fn log_likelihood(k: &SymMatrix, s: &SymMatrix) -> Result<f64> {
    if k.dim() != s.dim() {
        return Err(GgmError::DimensionMismatch {
            expected: k.dim(),
            found: s.dim(),
        });
    }
    Ok(log_det_pd(k)? - s.trace_product(k))
}

fn check_proper_subset(a: &[usize], p: usize) -> Result<()> {
    validate_index_set(a, p)?;
    if a.is_empty() || a.len() == p {
        return Err(GgmError::InvalidIndexSet(
            "expected a nonempty proper subset".into(),
        ));
    }
    Ok(())
}

/// Distribution of `X_A` given `X_B = x_b`, `B` the sorted complement of `A`.
pub fn condition(params: &GaussianParams, a: &[usize], x_b: &[f64]) -> Result<GaussianParams> {
    let p = params.dim();
    check_proper_subset(a, p)?;
    let b = complement(a, p);
    if x_b.len() != b.len() {
        return Err(GgmError::DimensionMismatch {
            expected: b.len(),
            found: x_b.len(),
        });
    }
    let chol = Cholesky::new(&params.cov.submatrix(&b))?;
    let resid: Vec<f64> = b.iter().zip(x_b).map(|(&k, x)| x - params.mean[k]).collect();
    let weights = chol.solve(&resid);
    let mean = a
        .iter()
        .map(|&i| {
            params.mean[i]
                + b.iter()
                    .zip(&weights)
                    .map(|(&k, w)| params.cov.get(i, k) * w)
                    .sum::<f64>()
        })
        .collect();
    let cov = conditional_block(&params.cov, a, &b, &chol);
    Ok(GaussianParams { mean, cov })
}

/// Distribution of `X_A`.
pub fn marginal(params: &GaussianParams, a: &[usize]) -> Result<GaussianParams> {
    validate_index_set(a, params.dim())?;
    if a.is_empty() {
        return Err(GgmError::InvalidIndexSet("empty marginal".into()));
    }
    Ok(GaussianParams {
        mean: a.iter().map(|&i| params.mean[i]).collect(),
        cov: params.cov.submatrix(a),
    })
}

/// Which almost-principal minor certifies a conditional independence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinorKind {
    /// `det(Σ_{iS, jS})`.
    Sigma,
    /// `det(K_{iR, jR})` with `R` the vertices outside `S ∪ {i, j}`.
    K,
}

fn normalized_minor(m: &SymMatrix, i: usize, j: usize, rest: &[usize]) -> f64 {
    let mut rows = vec![i];
    rows.extend_from_slice(rest);
    let mut cols = vec![j];
    cols.extend_from_slice(rest);
    let n = rows.len();
    let cross = determinant(&m.block(&rows, &cols), n);
    let di = determinant(&m.block(&rows, &rows), n);
    let dj = determinant(&m.block(&cols, &cols), n);
    cross.abs() / (di * dj).sqrt()
}

/// The almost-principal minor for `X_i ⫫ X_j | X_S`, divided by the geometric
/// mean of the two principal minors that bound it. For a positive definite
/// `Σ` this ratio is the absolute partial correlation, so it lies in `[0, 1]`.
pub fn ci_minor_ratio(sigma: &SymMatrix, i: usize, j: usize, s: &[usize], kind: MinorKind) -> Result<f64> {
    let p = sigma.dim();
    if i == j || i >= p || j >= p {
        return Err(GgmError::InvalidIndexSet(format!("bad pair ({i}, {j})")));
    }
    validate_index_set(s, p)?;
    if s.contains(&i) || s.contains(&j) {
        return Err(GgmError::InvalidIndexSet(
            "conditioning set must exclude i and j".into(),
        ));
    }
    match kind {
        MinorKind::Sigma => {
            Cholesky::new(sigma)?;
            Ok(normalized_minor(sigma, i, j, s))
        }
        MinorKind::K => {
            let k = invert_pd(sigma)?;
            let mut outside = s.to_vec();
            outside.extend([i, j]);
            let r = complement(&outside, p);
            Ok(normalized_minor(&k, i, j, &r))
        }
    }
}

/// True iff `X_i ⫫ X_j | X_S` holds numerically for covariance `sigma`.
pub fn ci_minor_test(
    sigma: &SymMatrix,
    i: usize,
    j: usize,
    s: &[usize],
    kind: MinorKind,
    tol: f64,
) -> Result<bool> {
    Ok(ci_minor_ratio(sigma, i, j, s, kind)? <= tol)
}

/// `n` i.i.d. rows from `N(mean, cov)` as `mean + L z`, `L` the Cholesky
/// factor and `z` standard normal from a ChaCha8 stream seeded by `seed`.
pub fn sample(params: &GaussianParams, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let chol = Cholesky::new(&params.cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw(&chol, &params.mean, n, &mut rng))
}

pub(crate) fn draw(chol: &Cholesky, mean: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let p = chol.dim();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
            chol.lower_mul(&z)
                .into_iter()
                .zip(mean)
                .map(|(x, m)| x + m)
                .collect()
        })
        .collect()
}

/// Sample partial correlation of `i` and `j` given `B`: the off-diagonal
/// entry of the conditional scatter on `{i, j}`, normalized by its diagonal.
pub fn partial_correlation(s: &SymMatrix, i: usize, j: usize, b: &[usize]) -> Result<f64> {
    let p = s.dim();
    if i == j || i >= p || j >= p {
        return Err(GgmError::InvalidIndexSet(format!("bad pair ({i}, {j})")));
    }
    validate_index_set(b, p)?;
    if b.contains(&i) || b.contains(&j) {
        return Err(GgmError::InvalidIndexSet(
            "conditioning set must exclude i and j".into(),
        ));
    }
    let pair = [i, j];
    let block = if b.is_empty() {
        s.submatrix(&pair)
    } else {
        let chol = Cholesky::new(&s.submatrix(b))?;
        conditional_block(s, &pair, b, &chol)
    };
    let (vi, vj) = (block.get(0, 0), block.get(1, 1));
    if !(vi > 0.0 && vj > 0.0) {
        return Err(GgmError::NotPositiveDefinite);
    }
    Ok(block.get(0, 1) / (vi * vj).sqrt())
}
