//! Dense symmetric-matrix kernel.
//!
//! Everything here works on small dense matrices (the regime is a few hundred
//! variables at most). Definiteness is decided by the pivots of a Cholesky
//! factorization, never by eigenvalues. Indices are 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{GgmError, Result};

/// Relative asymmetry accepted by [`SymMatrix::from_rows`] before rejecting.
const SYMMETRY_TOL: f64 = 1e-9;

/// A real symmetric `p x p` matrix stored densely in row-major order.
///
/// Symmetry is maintained on every write, so `get(i, j) == get(j, i)` always.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    p: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(p: usize) -> Self {
        assert!(p >= 1, "matrix dimension must be positive");
        Self {
            p,
            data: vec![0.0; p * p],
        }
    }

    pub fn identity(p: usize) -> Self {
        let mut m = Self::zeros(p);
        for i in 0..p {
            m.data[i * p + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle.
    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(p);
        for i in 0..p {
            for j in i..p {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a matrix from rows, rejecting non-square or visibly asymmetric
    /// input. Tiny asymmetries (rounding) are averaged away.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if p == 0 {
            return Err(GgmError::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        for row in rows {
            if row.len() != p {
                return Err(GgmError::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
        }
        let scale = rows
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
            .max(1.0);
        let mut worst = 0.0_f64;
        for i in 0..p {
            for j in (i + 1)..p {
                worst = worst.max((rows[i][j] - rows[j][i]).abs());
            }
        }
        if worst > SYMMETRY_TOL * scale {
            return Err(GgmError::NotSymmetric(worst));
        }
        Ok(Self::from_fn(p, |i, j| 0.5 * (rows[i][j] + rows[j][i])))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.p).map(|r| r.to_vec()).collect()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.p + j] = v;
        self.data[j * self.p + i] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    /// Row-major view of all `p * p` entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.p).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.p).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.p, other.p);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Entrywise 1-norm of the difference, `sum |a_ij - b_ij|`.
    pub fn l1_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.p, other.p);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        let mut out = SymMatrix::zeros(idx.len().max(1));
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate().skip(a) {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }

    /// Rows `rows`, columns `cols`, as a row-major block.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            p: self.p,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.p, other.p);
        SymMatrix {
            p: self.p,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        self.add(&other.scaled(-1.0))
    }

    /// `tr(self * other)`; for symmetric operands this is the Frobenius inner
    /// product.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.p, other.p);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// The (generally non-symmetric) product `self * other`, row-major.
    pub fn matmul(&self, other: &SymMatrix) -> Vec<f64> {
        let p = self.p;
        assert_eq!(p, other.p);
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for k in 0..p {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out[i * p..(i + 1) * p];
                for (d, &o) in dst.iter_mut().zip(orow) {
                    *d += a * o;
                }
            }
        }
        out
    }

    /// `max |(self * other - I)_ij|`, the inverse-pair residual.
    pub fn inverse_residual(&self, other: &SymMatrix) -> f64 {
        let p = self.p;
        self.matmul(other)
            .iter()
            .enumerate()
            .fold(0.0, |acc, (k, v)| {
                let target = if k / p == k % p { 1.0 } else { 0.0 };
                acc.max((v - target).abs())
            })
    }

    /// `x^T M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.p);
        (0..self.p)
            .map(|i| x[i] * self.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.p);
        (0..self.p)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = GgmError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMatrix::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// Default pivot tolerance: `1e-12 * p * max|entry|`.
pub fn default_pd_tolerance(m: &SymMatrix) -> f64 {
    1e-12 * m.dim() as f64 * m.max_abs()
}

/// Lower-triangular Cholesky factor `M = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    p: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `m`, requiring every pivot to be strictly positive.
    pub fn new(m: &SymMatrix) -> Result<Self> {
        Self::with_tolerance(m, 0.0)
    }

    /// Factors `m`, requiring every pivot (before the square root) to exceed
    /// `tol`.
    pub fn with_tolerance(m: &SymMatrix, tol: f64) -> Result<Self> {
        let p = m.dim();
        let mut l = vec![0.0; p * p];
        for j in 0..p {
            let mut pivot = m.get(j, j);
            for k in 0..j {
                pivot -= l[j * p + k] * l[j * p + k];
            }
            // NaN pivots fail here as well.
            if !(pivot > tol) || !pivot.is_finite() {
                return Err(GgmError::NotPositiveDefinite);
            }
            let d = pivot.sqrt();
            l[j * p + j] = d;
            for i in (j + 1)..p {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * p + k] * l[j * p + k];
                }
                l[i * p + j] = s / d;
            }
        }
        Ok(Self { p, l })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// Entry `L[i][j]` (zero above the diagonal).
    #[inline]
    pub fn factor(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.p + j]
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.p).map(|i| self.l[i * self.p + i].ln()).sum::<f64>()
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = self.p;
        assert_eq!(b.len(), p);
        let mut y = b.to_vec();
        for i in 0..p {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * p + k] * y[k];
            }
            y[i] = s / self.l[i * p + i];
        }
        for i in (0..p).rev() {
            let mut s = y[i];
            for k in (i + 1)..p {
                s -= self.l[k * p + i] * y[k];
            }
            y[i] = s / self.l[i * p + i];
        }
        y
    }

    /// `L z`, used to colour standard normal draws.
    pub fn lower_mul(&self, z: &[f64]) -> Vec<f64> {
        let p = self.p;
        (0..p)
            .map(|i| (0..=i).map(|k| self.l[i * p + k] * z[k]).sum())
            .collect()
    }

    pub fn inverse(&self) -> SymMatrix {
        let p = self.p;
        // Invert L, then form L^{-T} L^{-1}.
        let mut linv = vec![0.0; p * p];
        for j in 0..p {
            linv[j * p + j] = 1.0 / self.l[j * p + j];
            for i in (j + 1)..p {
                let mut s = 0.0;
                for k in j..i {
                    s -= self.l[i * p + k] * linv[k * p + j];
                }
                linv[i * p + j] = s / self.l[i * p + i];
            }
        }
        SymMatrix::from_fn(p, |i, j| {
            let start = i.max(j);
            (start..p).map(|k| linv[k * p + i] * linv[k * p + j]).sum()
        })
    }
}

/// True iff the Cholesky factorization succeeds with all pivots above `tol`.
pub fn is_positive_definite(m: &SymMatrix, tol: f64) -> bool {
    Cholesky::with_tolerance(m, tol.max(0.0)).is_ok()
}

pub fn log_det_pd(m: &SymMatrix) -> Result<f64> {
    Ok(Cholesky::new(m)?.log_det())
}

pub fn invert_pd(m: &SymMatrix) -> Result<SymMatrix> {
    Ok(Cholesky::new(m)?.inverse())
}

/// Checks that `idx` holds distinct in-range indices.
pub(crate) fn validate_index_set(idx: &[usize], p: usize) -> Result<()> {
    let mut seen = vec![false; p];
    for &i in idx {
        if i >= p {
            return Err(GgmError::InvalidIndexSet(format!(
                "index {i} out of range for dimension {p}"
            )));
        }
        if seen[i] {
            return Err(GgmError::InvalidIndexSet(format!("index {i} repeated")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Sorted complement of `idx` in `0..p`.
pub fn complement(idx: &[usize], p: usize) -> Vec<usize> {
    let mut inside = vec![false; p];
    for &i in idx {
        inside[i] = true;
    }
    (0..p).filter(|&i| !inside[i]).collect()
}

/// `M_{A,A} - M_{A,B} M_{B,B}^{-1} M_{B,A}` for `B` the complement of `A`.
pub fn schur_complement(m: &SymMatrix, a: &[usize]) -> Result<SymMatrix> {
    let p = m.dim();
    validate_index_set(a, p)?;
    if a.is_empty() || a.len() == p {
        return Err(GgmError::InvalidIndexSet(
            "schur complement needs a nonempty proper subset".into(),
        ));
    }
    let b = complement(a, p);
    let chol = Cholesky::new(&m.submatrix(&b))?;
    Ok(conditional_block(m, a, &b, &chol))
}

/// `M_{A,A} - M_{A,B} C^{-1} M_{B,A}` given the factor `C` of `M_{B,B}`.
pub(crate) fn conditional_block(m: &SymMatrix, a: &[usize], b: &[usize], chol: &Cholesky) -> SymMatrix {
    let solved: Vec<Vec<f64>> = a
        .iter()
        .map(|&i| chol.solve(&b.iter().map(|&k| m.get(k, i)).collect::<Vec<_>>()))
        .collect();
    SymMatrix::from_fn(a.len(), |x, y| {
        let corr: f64 = b
            .iter()
            .zip(&solved[y])
            .map(|(&k, s)| m.get(a[x], k) * s)
            .sum();
        m.get(a[x], a[y]) - corr
    })
}

/// Numerical rank via diagonally pivoted Cholesky: the number of pivots that
/// exceed `rel_tol * max diagonal`.
pub fn numerical_rank(m: &SymMatrix, rel_tol: f64) -> usize {
    let p = m.dim();
    let mut work = m.clone();
    let scale = (0..p).fold(0.0_f64, |acc, i| acc.max(m.get(i, i)));
    if scale <= 0.0 {
        return 0;
    }
    let mut active: Vec<usize> = (0..p).collect();
    let mut rank = 0;
    while !active.is_empty() {
        let (pos, &piv) = active
            .iter()
            .enumerate()
            .max_by(|x, y| work.get(*x.1, *x.1).total_cmp(&work.get(*y.1, *y.1)))
            .expect("nonempty");
        let d = work.get(piv, piv);
        if d <= rel_tol * scale {
            break;
        }
        rank += 1;
        active.swap_remove(pos);
        for (x, &i) in active.iter().enumerate() {
            for &j in &active[x..] {
                let v = work.get(i, j) - work.get(i, piv) * work.get(j, piv) / d;
                work.set(i, j, v);
            }
        }
    }
    rank
}

/// Determinant of a general square row-major matrix by LU with partial
/// pivoting.
pub fn determinant(a: &[f64], n: usize) -> f64 {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return 1.0;
    }
    let mut lu = a.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| lu[x * n + col].abs().total_cmp(&lu[y * n + col].abs()))
            .expect("nonempty range");
        if lu[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for k in 0..n {
                lu.swap(piv * n + k, col * n + k);
            }
            det = -det;
        }
        let d = lu[col * n + col];
        det *= d;
        for r in (col + 1)..n {
            let f = lu[r * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    lu[r * n + k] -= f * lu[col * n + k];
                }
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pair(r: f64) -> SymMatrix {
        SymMatrix::from_rows(&[vec![1.0, r], vec![r, 1.0]]).unwrap()
    }

    #[test]
    fn definiteness_of_small_cases() {
        assert!(is_positive_definite(&SymMatrix::identity(3), 0.0));
        assert!(!is_positive_definite(&pair(2.0), 0.0));
        assert!(!is_positive_definite(&SymMatrix::zeros(2), 0.0));
    }

    #[test]
    fn rank_two_example_is_not_pd() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = SymMatrix::from_rows(&[
            vec![1.0, h, 0.0, -h],
            vec![h, 1.0, h, 0.0],
            vec![0.0, h, 1.0, h],
            vec![-h, 0.0, h, 1.0],
        ])
        .unwrap();
        assert!(!is_positive_definite(&s, default_pd_tolerance(&s)));
        assert_eq!(numerical_rank(&s, 1e-10), 2);
    }

    #[test]
    fn log_det_values() {
        assert_eq!(log_det_pd(&SymMatrix::identity(4)).unwrap(), 0.0);
        assert_relative_eq!(
            log_det_pd(&SymMatrix::from_diag(&[2.0, 3.0])).unwrap(),
            6.0_f64.ln(),
            max_relative = 1e-14
        );
        assert_relative_eq!(log_det_pd(&pair(0.5)).unwrap(), 0.75_f64.ln(), max_relative = 1e-14);
        assert_eq!(log_det_pd(&pair(1.5)), Err(GgmError::NotPositiveDefinite));
    }

    #[test]
    fn inverses() {
        let inv = invert_pd(&SymMatrix::from_diag(&[2.0, 4.0])).unwrap();
        assert!(inv.max_abs_diff(&SymMatrix::from_diag(&[0.5, 0.25])) < 1e-15);
        let inv = invert_pd(&pair(0.5)).unwrap();
        let expected = pair(-0.5).scaled(1.0 / 0.75);
        assert!(inv.max_abs_diff(&expected) < 1e-14);
        assert!(pair(0.5).inverse_residual(&inv) < 1e-14);
    }

    #[test]
    fn schur_small_cases() {
        let s = schur_complement(&SymMatrix::identity(4), &[0, 1]).unwrap();
        assert_eq!(s, SymMatrix::identity(2));
        let s = schur_complement(&pair(0.5), &[0]).unwrap();
        assert_relative_eq!(s.get(0, 0), 0.75, max_relative = 1e-14);
    }

    #[test]
    fn schur_rejects_bad_sets() {
        let m = SymMatrix::identity(3);
        assert!(matches!(schur_complement(&m, &[]), Err(GgmError::InvalidIndexSet(_))));
        assert!(matches!(schur_complement(&m, &[0, 1, 2]), Err(GgmError::InvalidIndexSet(_))));
        assert!(matches!(schur_complement(&m, &[0, 0]), Err(GgmError::InvalidIndexSet(_))));
        assert!(matches!(schur_complement(&m, &[5]), Err(GgmError::InvalidIndexSet(_))));
    }

    #[test]
    fn asymmetric_rows_rejected() {
        let r = SymMatrix::from_rows(&[vec![1.0, 0.2], vec![0.3, 1.0]]);
        assert!(matches!(r, Err(GgmError::NotSymmetric(_))));
        let r = SymMatrix::from_rows(&[vec![1.0, 0.2]]);
        assert!(matches!(r, Err(GgmError::DimensionMismatch { .. })));
    }

    #[test]
    fn general_determinant() {
        assert_relative_eq!(determinant(&[0.0, 1.0, 1.0, 0.0], 2), -1.0);
        assert_relative_eq!(
            determinant(&[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0], 3),
            18.0,
            max_relative = 1e-14
        );
    }
}
