//! Dense symmetric and SPD matrix foundations.
//!
//! Matrices are small (tens of rows), dense and row-major. The validated
//! wrappers [`SymMatrix`], [`SpdMatrix`] and [`CorrelationMatrix`] carry their
//! invariants in the type so downstream code never re-checks them.
//!
//! The positive-definiteness floor is scale aware: a Cholesky pivot must exceed
//! `1e-10 * n * max|a_ij|` (see [`pd_floor`]).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated (and averaged away) at construction.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Diagonal tolerance for correlation matrices.
pub const UNIT_DIAGONAL_TOLERANCE: f64 = 1e-12;

const EIGEN_MAX_SWEEPS: usize = 60;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from row vectors; every row must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Matrix product. Panics if the inner dimensions disagree.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimension");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    /// `self * a + other * b`, elementwise. Panics on shape mismatch.
    pub fn lincomb(&self, a: f64, other: &Matrix, b: f64) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(libm::fabs(*x)))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (x, y)| m.max(libm::fabs(x - y)))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Symmetric reindexing: `out[i][j] = self[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Matrix {
        assert!(self.is_square() && perm.len() == self.rows);
        Matrix::from_fn(self.rows, self.cols, |i, j| self[(perm[i], perm[j])])
    }

    fn max_relative_asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max(libm::fabs(self[(i, j)] - self[(j, i)]));
            }
        }
        worst / scale
    }

    fn symmetrize_in_place(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Positive-definiteness pivot floor: `1e-10 * n * max|a_ij|`.
pub fn pd_floor(a: &Matrix) -> f64 {
    1e-10 * a.rows() as f64 * a.max_abs()
}

/// A square matrix with exactly symmetric storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Validates and symmetrises `m`.
    ///
    /// Asymmetry up to [`SYMMETRY_TOLERANCE`] (relative to the largest entry)
    /// is averaged away; anything larger is rejected.
    pub fn new(mut m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        let asymmetry = m.max_relative_asymmetry();
        if asymmetry > SYMMETRY_TOLERANCE {
            return Err(Error::Asymmetric { asymmetry });
        }
        m.symmetrize_in_place();
        Ok(SymMatrix(m))
    }

    /// Averages `m` with its transpose without checking the asymmetry size.
    /// For matrices that are symmetric up to rounding by construction.
    pub(crate) fn symmetrized(mut m: Matrix) -> Self {
        debug_assert!(m.is_square());
        m.symmetrize_in_place();
        SymMatrix(m)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Congruence `m * self * m^T`.
    pub fn congruence(&self, m: &Matrix) -> SymMatrix {
        SymMatrix::symmetrized(m.matmul(&self.0).matmul(&m.transpose()))
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// A symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(SymMatrix);

impl SpdMatrix {
    pub fn new(s: SymMatrix) -> Result<Self> {
        cholesky_raw(s.as_matrix(), pd_floor(s.as_matrix()))?;
        Ok(SpdMatrix(s))
    }

    pub fn from_matrix(m: Matrix) -> Result<Self> {
        SpdMatrix::new(SymMatrix::new(m)?)
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix(SymMatrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.0
    }

    pub fn as_matrix(&self) -> &Matrix {
        self.0.as_matrix()
    }

    pub fn into_matrix(self) -> Matrix {
        self.0.into_matrix()
    }

    /// Scales every entry by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        SpdMatrix::new(SymMatrix::symmetrized(self.as_matrix().scaled(c)))
    }
}

impl Index<(usize, usize)> for SpdMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// SPD matrix with unit diagonal and off-diagonal entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(SpdMatrix);

impl CorrelationMatrix {
    pub fn new(s: SpdMatrix) -> Result<Self> {
        let m = s.as_matrix();
        for i in 0..m.rows() {
            let d = m[(i, i)];
            if libm::fabs(d - 1.0) > UNIT_DIAGONAL_TOLERANCE {
                return Err(Error::NotCorrelation(format!(
                    "diagonal entry {i} is {d}, expected 1"
                )));
            }
            for j in 0..m.cols() {
                let v = m[(i, j)];
                if !(-1.0..=1.0).contains(&v) && i != j {
                    return Err(Error::NotCorrelation(format!(
                        "entry ({i}, {j}) = {v} is outside [-1, 1]"
                    )));
                }
            }
        }
        Ok(CorrelationMatrix(s))
    }

    pub fn from_matrix(m: Matrix) -> Result<Self> {
        CorrelationMatrix::new(SpdMatrix::from_matrix(m)?)
    }

    pub fn identity(n: usize) -> Self {
        CorrelationMatrix(SpdMatrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_spd(&self) -> &SpdMatrix {
        &self.0
    }

    pub fn as_matrix(&self) -> &Matrix {
        self.0.as_matrix()
    }

    pub fn into_spd(self) -> SpdMatrix {
        self.0
    }
}

impl Index<(usize, usize)> for CorrelationMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Lower-triangular Cholesky factor with a strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular(Matrix);

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    /// `L * L^T`.
    pub fn reconstruct(&self) -> Matrix {
        self.0.matmul(&self.0.transpose())
    }

    /// Solves `L X = B` for `X` by forward substitution.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.dim();
        assert_eq!(b.rows(), n);
        let l = &self.0;
        let mut x = b.clone();
        for i in 0..n {
            let (done, rest) = x.data.split_at_mut(i * b.cols);
            let row_i = &mut rest[..b.cols];
            for k in 0..i {
                let lik = l[(i, k)];
                if lik == 0.0 {
                    continue;
                }
                let row_k = &done[k * b.cols..(k + 1) * b.cols];
                for (xi, xk) in row_i.iter_mut().zip(row_k) {
                    *xi -= lik * xk;
                }
            }
            let inv = 1.0 / l[(i, i)];
            for xi in row_i.iter_mut() {
                *xi *= inv;
            }
        }
        x
    }

    pub fn inverse(&self) -> LowerTriangular {
        LowerTriangular(self.solve(&Matrix::identity(self.dim())))
    }
}

fn cholesky_raw(a: &Matrix, floor: f64) -> Result<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            let (li, lj) = (l.row(i), l.row(j));
            for k in 0..j {
                sum -= li[k] * lj[k];
            }
            if i == j {
                if !(sum > floor) {
                    return Err(Error::NotPositiveDefinite {
                        index: i,
                        pivot: sum,
                    });
                }
                l[(i, i)] = libm::sqrt(sum);
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Lower Cholesky factor `L` with `L L^T = a`.
pub fn cholesky(a: &SpdMatrix) -> Result<LowerTriangular> {
    cholesky_raw(a.as_matrix(), pd_floor(a.as_matrix())).map(LowerTriangular)
}

/// True iff Cholesky succeeds with every pivot above `tol`.
pub fn is_spd(a: &SymMatrix, tol: f64) -> bool {
    cholesky_raw(a.as_matrix(), tol).is_ok()
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn reconstruct(&self) -> Matrix {
        let q = &self.vectors;
        let scaled = Matrix::from_fn(q.rows(), q.cols(), |i, j| q[(i, j)] * self.values[j]);
        scaled.matmul(&q.transpose())
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of `a`.
pub fn sym_eigen(a: &SymMatrix) -> Result<SymEigen> {
    let (values, vectors) = tridiagonal_ql(a.as_matrix(), true)?;
    Ok(SymEigen { values, vectors })
}

/// Eigenvalues of `a` in ascending order, skipping eigenvector accumulation.
pub fn sym_eigenvalues(a: &SymMatrix) -> Result<Vec<f64>> {
    tridiagonal_ql(a.as_matrix(), false).map(|(values, _)| values)
}

// Householder reduction to tridiagonal form followed by the implicit QL
// algorithm (EISPACK tred2/tql2 lineage).
fn tridiagonal_ql(a: &Matrix, want_vectors: bool) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if n == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    let mut v = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += libm::fabs(*dk);
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in &mut e[..i] {
                *ej = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                v[(j, i)] = f;
                let mut g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if want_vectors {
        for i in 0..(n - 1) {
            v[(n - 1, i)] = v[(i, i)];
            v[(i, i)] = 1.0;
            let h = d[i + 1];
            if h != 0.0 {
                for k in 0..=i {
                    d[k] = v[(k, i + 1)] / h;
                }
                for j in 0..=i {
                    let mut g = 0.0;
                    for k in 0..=i {
                        g += v[(k, i + 1)] * v[(k, j)];
                    }
                    for k in 0..=i {
                        v[(k, j)] -= g * d[k];
                    }
                }
            }
            for k in 0..=i {
                v[(k, i + 1)] = 0.0;
            }
        }
        for j in 0..n {
            d[j] = v[(n - 1, j)];
            v[(n - 1, j)] = 0.0;
        }
        v[(n - 1, n - 1)] = 1.0;
    } else {
        // The accumulation pass only reads the diagonal before touching it.
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = v[(j, j)];
        }
    }
    e[0] = 0.0;

    // Implicit QL on the tridiagonal (d, e).
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(libm::fabs(d[l]) + libm::fabs(e[l]));
        let mut m = l;
        while m < n {
            if libm::fabs(e[m]) <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > EIGEN_MAX_SWEEPS {
                    return Err(Error::ConvergenceFailure {
                        iterations: EIGEN_MAX_SWEEPS,
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[(l + 2)..n] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            let h = v[(k, i + 1)];
                            v[(k, i + 1)] = s * v[(k, i)] + c * h;
                            v[(k, i)] = c * v[(k, i)] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if libm::fabs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Selection sort keeps eigenvector columns aligned with values.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            if want_vectors {
                for row in 0..n {
                    let t = v[(row, i)];
                    v[(row, i)] = v[(row, k)];
                    v[(row, k)] = t;
                }
            }
        }
    }
    Ok((d, v))
}

/// `L^{-1} b2 L^{-T}` with `L = cholesky(b1)`.
///
/// The result is similar to `b1^{-1/2} b2 b1^{-1/2}`, so the two share
/// eigenvalues; no matrix square root is formed.
pub fn whiten(b1: &SpdMatrix, b2: &SpdMatrix) -> Result<SymMatrix> {
    if b1.dim() != b2.dim() {
        return Err(Error::DimensionMismatch {
            expected: b1.dim(),
            found: b2.dim(),
        });
    }
    let l = cholesky(b1)?;
    Ok(whiten_with_factor(&l, b2.as_sym()))
}

/// [`whiten`] with a precomputed factor of the first argument.
pub fn whiten_with_factor(l: &LowerTriangular, b: &SymMatrix) -> SymMatrix {
    let x = l.solve(b.as_matrix());
    SymMatrix::symmetrized(l.solve(&x.transpose()))
}

/// `D^{-1/2} w D^{-1/2}` with `D = diag(w)`.
pub fn normalize_to_correlation(w: &SpdMatrix) -> Result<CorrelationMatrix> {
    let m = w.as_matrix();
    let floor = pd_floor(m);
    let mut inv_sd = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let d = m[(i, i)];
        if !(d > floor) {
            return Err(Error::DegenerateDiagonal { index: i, value: d });
        }
        inv_sd.push(1.0 / libm::sqrt(d));
    }
    let c = Matrix::from_fn(m.rows(), m.cols(), |i, j| {
        if i == j {
            1.0
        } else {
            (m[(i, j)] * inv_sd[i] * inv_sd[j]).clamp(-1.0, 1.0)
        }
    });
    CorrelationMatrix::new(SpdMatrix::new(SymMatrix::symmetrized(c))?)
}
