//! Dissimilarity measures and pairwise dissimilarity matrices.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, sym_eigenvalues, whiten_with_factor, CorrelationMatrix, LowerTriangular, Matrix,
    SpdMatrix,
};

/// Tolerance on `|u| = 1` for sphere points.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-8;

/// Formula turning a Pearson correlation `r` into a dissimilarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationDistance {
    /// `sqrt(2 (1 - r))`, a metric on standardised vectors.
    #[default]
    Sqrt2OneMinusR,
    /// `1 - r`.
    OneMinusR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMeasure {
    /// Affine-invariant geodesic distance on SPD matrices.
    GeodesicAffineInvariant,
    /// Euclidean distance between vectors (upper triangles of correlation matrices).
    EuclideanUpperTriangle,
    /// Correlation-based distance between vectors.
    CorrelationUpperTriangle(CorrelationDistance),
    /// Great-circle distance on the unit sphere in R^3.
    Sphere,
}

impl DistanceMeasure {
    pub fn name(&self) -> &'static str {
        match self {
            DistanceMeasure::GeodesicAffineInvariant => "geodesic",
            DistanceMeasure::EuclideanUpperTriangle => "euclidean",
            DistanceMeasure::CorrelationUpperTriangle(_) => "correlation",
            DistanceMeasure::Sphere => "sphere",
        }
    }
}

/// One subject's response.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Spd(SpdMatrix),
    Vector(Vec<f64>),
}

/// Symmetric, zero-diagonal, nonnegative N x N matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix(Matrix);

impl DissimilarityMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..m.rows() {
            if m[(i, i)] != 0.0 {
                return Err(Error::InvalidDissimilarity(format!(
                    "diagonal entry {i} is {}, expected 0",
                    m[(i, i)]
                )));
            }
            for j in 0..m.cols() {
                if m[(i, j)] < 0.0 {
                    return Err(Error::InvalidDissimilarity(format!(
                        "entry ({i}, {j}) is negative"
                    )));
                }
                if libm::fabs(m[(i, j)] - m[(j, i)]) > 1e-12 * scale {
                    return Err(Error::InvalidDissimilarity(format!(
                        "entries ({i}, {j}) and ({j}, {i}) differ"
                    )));
                }
            }
        }
        let mut m = m;
        for i in 0..m.rows() {
            for j in (i + 1)..m.cols() {
                let v = m[(i, j)];
                m[(j, i)] = v;
            }
        }
        Ok(DissimilarityMatrix(m))
    }

    /// Mirrors a strict upper triangle, given row by row.
    fn from_upper(n: usize, upper: &[f64]) -> Self {
        let mut m = Matrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                m[(i, j)] = upper[k];
                m[(j, i)] = upper[k];
                k += 1;
            }
        }
        DissimilarityMatrix(m)
    }

    pub fn n_subjects(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

/// Geodesic distance under the affine-invariant metric:
/// `sqrt(sum_i log(s_i)^2)` over the eigenvalues of `b1^{-1/2} b2 b1^{-1/2}`.
/// Identical inputs give exactly zero.
pub fn dist_affine_invariant(b1: &SpdMatrix, b2: &SpdMatrix) -> Result<f64> {
    if b1.dim() != b2.dim() {
        return Err(Error::DimensionMismatch {
            expected: b1.dim(),
            found: b2.dim(),
        });
    }
    let l = cholesky(b1)?;
    if b1 == b2 {
        return Ok(0.0);
    }
    geodesic_with_factor(&l, b2)
}

fn geodesic_with_factor(l: &LowerTriangular, b2: &SpdMatrix) -> Result<f64> {
    let w = whiten_with_factor(l, b2.as_sym());
    let mut sum = 0.0;
    for s in sym_eigenvalues(&w)? {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NonFiniteResult { eigenvalue: s });
        }
        let ln = libm::log(s);
        sum += ln * ln;
    }
    Ok(libm::sqrt(sum))
}

/// Strict upper triangle of `c`, row-major: (0,1), (0,2), ..., (1,2), ...
pub fn vectorize_upper(c: &CorrelationMatrix) -> Vec<f64> {
    let m = c.as_matrix();
    let n = m.rows();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        out.extend_from_slice(&m.row(i)[(i + 1)..]);
    }
    out
}

/// Inverse of [`vectorize_upper`]: rebuilds the unit-diagonal matrix.
pub fn correlation_from_upper(upper: &[f64]) -> Result<CorrelationMatrix> {
    // n(n-1)/2 = len
    let mut n = 1;
    while n * (n - 1) / 2 < upper.len() {
        n += 1;
    }
    if n * (n - 1) / 2 != upper.len() {
        return Err(Error::DimensionMismatch {
            expected: n * (n - 1) / 2,
            found: upper.len(),
        });
    }
    let mut m = Matrix::identity(n);
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            m[(i, j)] = upper[k];
            m[(j, i)] = upper[k];
            k += 1;
        }
    }
    CorrelationMatrix::from_matrix(m)
}

fn check_lengths(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(())
}

/// `||u - v||_2`.
pub fn dist_euclidean(u: &[f64], v: &[f64]) -> Result<f64> {
    check_lengths(u, v)?;
    let ss: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::sqrt(ss))
}

fn centered(u: &[f64]) -> Result<Vec<f64>> {
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    let c: Vec<f64> = u.iter().map(|x| x - mean).collect();
    let ss: f64 = c.iter().map(|x| x * x).sum();
    let raw: f64 = u.iter().map(|x| x * x).sum();
    if !(ss > 1e-24 * raw) || ss == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(c)
}

fn pearson(u: &[f64], v: &[f64]) -> Result<f64> {
    check_lengths(u, v)?;
    if u.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    let (cu, cv) = (centered(u)?, centered(v)?);
    let mut num = 0.0;
    let mut su = 0.0;
    let mut sv = 0.0;
    for (a, b) in cu.iter().zip(&cv) {
        num += a * b;
        su += a * a;
        sv += b * b;
    }
    Ok((num / libm::sqrt(su * sv)).clamp(-1.0, 1.0))
}

/// Correlation-based distance between two non-constant vectors.
pub fn dist_correlation(u: &[f64], v: &[f64], formula: CorrelationDistance) -> Result<f64> {
    let r = pearson(u, v)?;
    Ok(match formula {
        CorrelationDistance::Sqrt2OneMinusR => libm::sqrt(2.0 * (1.0 - r)),
        CorrelationDistance::OneMinusR => 1.0 - r,
    })
}

/// Great-circle distance `arccos(u . v)` between unit vectors in R^3.
pub fn dist_sphere(u: &[f64], v: &[f64]) -> Result<f64> {
    for w in [u, v] {
        if w.len() != 3 {
            return Err(Error::LengthMismatch {
                left: 3,
                right: w.len(),
            });
        }
        let norm = libm::sqrt(w.iter().map(|x| x * x).sum());
        if libm::fabs(norm - 1.0) > UNIT_NORM_TOLERANCE {
            return Err(Error::NotUnitVector { norm });
        }
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(libm::acos(dot.clamp(-1.0, 1.0)))
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((i, j));
        }
    }
    out
}

// Evaluates `f` over the strict upper triangle. Each pair writes its own slot
// so the result does not depend on the schedule.
fn fill_pairs<F>(n: usize, f: F) -> Result<DissimilarityMatrix>
where
    F: Fn(usize, usize) -> Result<f64> + Sync + Send,
{
    let pairs = pairs(n);
    let eval = |&(i, j): &(usize, usize)| f(i, j).map_err(|e| e.at_pair(i, j));
    #[cfg(feature = "parallel")]
    let upper: Result<Vec<f64>> = {
        use rayon::prelude::*;
        pairs.par_iter().with_min_len(64).map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let upper: Result<Vec<f64>> = pairs.iter().map(eval).collect();
    Ok(DissimilarityMatrix::from_upper(n, &upper?))
}

/// Pairwise affine-invariant geodesic distances, factoring each matrix once.
pub fn geodesic_dissimilarity(responses: &[SpdMatrix]) -> Result<DissimilarityMatrix> {
    check_count(responses.len())?;
    let dim = responses[0].dim();
    for r in responses {
        if r.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.dim(),
            });
        }
    }
    let factors = responses
        .iter()
        .enumerate()
        .map(|(i, r)| cholesky(r).map_err(|e| e.at_pair(i, i)))
        .collect::<Result<Vec<_>>>()?;
    fill_pairs(responses.len(), |i, j| {
        if responses[i] == responses[j] {
            return Ok(0.0);
        }
        geodesic_with_factor(&factors[i], &responses[j])
    })
}

/// Pairwise distances between vectors for any vector measure.
pub fn vector_dissimilarity<V: AsRef<[f64]> + Sync>(
    responses: &[V],
    measure: DistanceMeasure,
) -> Result<DissimilarityMatrix> {
    check_count(responses.len())?;
    let d = |u: &[f64], v: &[f64]| match measure {
        DistanceMeasure::EuclideanUpperTriangle => dist_euclidean(u, v),
        DistanceMeasure::CorrelationUpperTriangle(formula) => dist_correlation(u, v, formula),
        DistanceMeasure::Sphere => dist_sphere(u, v),
        DistanceMeasure::GeodesicAffineInvariant => Err(Error::ResponseMismatch),
    };
    fill_pairs(responses.len(), |i, j| {
        d(responses[i].as_ref(), responses[j].as_ref())
    })
}

fn check_count(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 responses, got {n}"
        )));
    }
    Ok(())
}

/// `D = [d(y_i, y_j)]` for a homogeneous list of responses.
pub fn dissimilarity_matrix(
    responses: &[Response],
    measure: DistanceMeasure,
) -> Result<DissimilarityMatrix> {
    check_count(responses.len())?;
    match measure {
        DistanceMeasure::GeodesicAffineInvariant => {
            let mats = responses
                .iter()
                .map(|r| match r {
                    Response::Spd(m) => Ok(m.clone()),
                    Response::Vector(_) => Err(Error::ResponseMismatch),
                })
                .collect::<Result<Vec<_>>>()?;
            geodesic_dissimilarity(&mats)
        }
        _ => {
            let vecs = responses
                .iter()
                .map(|r| match r {
                    Response::Vector(v) => Ok(v.as_slice()),
                    Response::Spd(_) => Err(Error::ResponseMismatch),
                })
                .collect::<Result<Vec<_>>>()?;
            vector_dissimilarity(&vecs, measure)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{E, PI, SQRT_2};

    fn spd(rows: &[&[f64]]) -> SpdMatrix {
        SpdMatrix::from_matrix(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn geodesic_closed_forms() {
        let id = SpdMatrix::identity(2);
        assert_eq!(dist_affine_invariant(&id, &id).unwrap(), 0.0);

        let e2 = spd(&[&[E * E, 0.0], &[0.0, E * E]]);
        let d = dist_affine_invariant(&id, &e2).unwrap();
        assert!((d - 2.0 * SQRT_2).abs() < 1e-14);

        let a = spd(&[&[2.0, 0.5, 0.1], &[0.5, 1.5, -0.3], &[0.1, -0.3, 1.0]]);
        let c = 3.7;
        let d = dist_affine_invariant(&a, &a.scaled(c).unwrap()).unwrap();
        assert!((d - libm::sqrt(3.0) * libm::log(c)).abs() < 1e-13);
    }

    #[test]
    fn vectorize_order() {
        let c =
            CorrelationMatrix::from_matrix(Matrix::from_rows(&[[1.0, 0.3], [0.3, 1.0]]).unwrap())
                .unwrap();
        assert_eq!(vectorize_upper(&c), vec![0.3]);

        let c = CorrelationMatrix::from_matrix(
            Matrix::from_rows(&[[1.0, 0.1, 0.2], [0.1, 1.0, 0.3], [0.2, 0.3, 1.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(vectorize_upper(&c), vec![0.1, 0.2, 0.3]);
        assert_eq!(correlation_from_upper(&[0.1, 0.2, 0.3]).unwrap(), c);
        assert_eq!(
            vectorize_upper(&CorrelationMatrix::identity(4)),
            vec![0.0; 6]
        );
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(dist_euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(dist_euclidean(&[1.5, 2.0], &[1.5, 2.0]).unwrap(), 0.0);
        let d = dist_euclidean(&[1.0, 1.0, 1.0], &[2.0, 2.0, 2.0]).unwrap();
        assert!((d - libm::sqrt(3.0)).abs() < 1e-15);
        assert!(matches!(
            dist_euclidean(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn correlation_examples() {
        let f = CorrelationDistance::Sqrt2OneMinusR;
        let u = [1.0, 2.0, 3.0];
        assert!(dist_correlation(&u, &u, f).unwrap() < 1e-15);
        let anti = [5.0 - 1.0, 5.0 - 2.0, 5.0 - 3.0];
        assert!((dist_correlation(&u, &anti, f).unwrap() - 2.0).abs() < 1e-15);
        // Pearson r of (1,2,3) and (1,3,2): centred (-1,0,1) and (-1,1,0) give 1/2.
        let d = dist_correlation(&u, &[1.0, 3.0, 2.0], f).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let d = dist_correlation(&u, &[1.0, 3.0, 2.0], CorrelationDistance::OneMinusR).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert_eq!(
            dist_correlation(&[0.1, 0.1, 0.1], &u, f),
            Err(Error::ZeroVariance)
        );
    }

    #[test]
    fn sphere_examples() {
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        assert_eq!(dist_sphere(&x, &x).unwrap(), 0.0);
        assert!((dist_sphere(&x, &y).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((dist_sphere(&x, &[-1.0, 0.0, 0.0]).unwrap() - PI).abs() < 1e-15);
        assert!(matches!(
            dist_sphere(&[2.0, 0.0, 0.0], &x),
            Err(Error::NotUnitVector { .. })
        ));
    }

    #[test]
    fn dissimilarity_examples() {
        let same = [
            Response::Vector(vec![1.0, 2.0]),
            Response::Vector(vec![1.0, 2.0]),
        ];
        let d = dissimilarity_matrix(&same, DistanceMeasure::EuclideanUpperTriangle).unwrap();
        assert_eq!(d.as_matrix(), &Matrix::zeros(2, 2));

        let pts: Vec<Response> = [0.0, 1.0, 3.0]
            .iter()
            .map(|&x| Response::Vector(vec![x]))
            .collect();
        let d = dissimilarity_matrix(&pts, DistanceMeasure::EuclideanUpperTriangle).unwrap();
        assert_eq!(d.get(0, 1), 1.0);
        assert_eq!(d.get(0, 2), 3.0);
        assert_eq!(d.get(1, 2), 2.0);
        assert_eq!(d.get(2, 0), 3.0);
    }

    #[test]
    fn dissimilarity_errors_carry_pair() {
        let pts = vec![
            Response::Vector(vec![1.0, 2.0, 3.0]),
            Response::Vector(vec![1.0, 1.0, 1.0]),
            Response::Vector(vec![0.0, 2.0, 1.0]),
        ];
        let err = dissimilarity_matrix(
            &pts,
            DistanceMeasure::CorrelationUpperTriangle(CorrelationDistance::default()),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Pair { i: 0, j: 1, .. }));

        let mixed = vec![
            Response::Vector(vec![1.0]),
            Response::Spd(SpdMatrix::identity(1)),
        ];
        assert_eq!(
            dissimilarity_matrix(&mixed, DistanceMeasure::EuclideanUpperTriangle),
            Err(Error::ResponseMismatch)
        );
        assert!(dissimilarity_matrix(&mixed[..1], DistanceMeasure::Sphere).is_err());
    }

    #[test]
    fn dissimilarity_validation() {
        let bad = Matrix::from_rows(&[[0.0, 1.0], [2.0, 0.0]]).unwrap();
        assert!(DissimilarityMatrix::new(bad).is_err());
        let diag = Matrix::from_rows(&[[1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(DissimilarityMatrix::new(diag).is_err());
        let neg = Matrix::from_rows(&[[0.0, -1.0], [-1.0, 0.0]]).unwrap();
        assert!(DissimilarityMatrix::new(neg).is_err());
    }
}
