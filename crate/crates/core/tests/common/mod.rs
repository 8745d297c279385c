#![allow(dead_code)]

use gmdmr_core::{normalize_to_correlation, CorrelationMatrix, Matrix, SpdMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// G G' / n + 0.1 I with Gaussian G.
pub fn random_spd(rng: &mut impl Rng, n: usize) -> SpdMatrix {
    let g = gaussian(rng, n, n + 2);
    let mut a = g.matmul(&g.transpose()).scaled(1.0 / n as f64);
    for i in 0..n {
        a[(i, i)] += 0.1;
    }
    // Symmetrise exactly.
    let a = Matrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    SpdMatrix::from_matrix(a).unwrap()
}

pub fn random_correlation(rng: &mut impl Rng, n: usize) -> CorrelationMatrix {
    normalize_to_correlation(&random_spd(rng, n)).unwrap()
}

/// Gaussian matrix shifted to keep it comfortably invertible.
pub fn random_invertible(rng: &mut impl Rng, n: usize) -> Matrix {
    let mut m = gaussian(rng, n, n);
    for i in 0..n {
        m[(i, i)] += if m[(i, i)] >= 0.0 { 2.0 } else { -2.0 };
    }
    m
}

pub fn congruence(a: &SpdMatrix, m: &Matrix) -> SpdMatrix {
    let c = m.matmul(a.as_matrix()).matmul(&m.transpose());
    let n = c.rows();
    SpdMatrix::from_matrix(Matrix::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]))).unwrap()
}

pub fn to_nalgebra(m: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// Geodesic distance through the symmetric square root, computed with nalgebra.
pub fn oracle_geodesic(a: &SpdMatrix, b: &SpdMatrix) -> f64 {
    let ea = nalgebra::SymmetricEigen::new(to_nalgebra(a.as_matrix()));
    let inv_sqrt = ea.eigenvalues.map(|l| 1.0 / l.sqrt());
    let a_inv_sqrt = &ea.eigenvectors
        * nalgebra::DMatrix::from_diagonal(&inv_sqrt)
        * ea.eigenvectors.transpose();
    let s = &a_inv_sqrt * to_nalgebra(b.as_matrix()) * &a_inv_sqrt;
    let s = (&s + s.transpose()) * 0.5;
    let es = nalgebra::SymmetricEigen::new(s);
    es.eigenvalues
        .iter()
        .map(|l| l.ln().powi(2))
        .sum::<f64>()
        .sqrt()
}
