//! Multivariate distance matrix regression.
//!
//! The dissimilarity matrix is turned into the Gower-centred matrix
//! `G = (I - 11'/N) A (I - 11'/N)` with `A = -D∘D/2`, and association with the
//! design `X` is measured by the pseudo-F ratio of the explained trace
//! `tr(HGH)` to the residual trace `tr((I-H)G(I-H))`. Inference permutes
//! subject identities on the response side (rows and columns of `G`) and keeps
//! `X` and its hat matrix fixed.
//!
//! For symmetric idempotent `H`, `tr(HGH) = tr(HG)` and the residual trace is
//! `tr(G) - tr(HG)`; each permutation therefore costs one O(N^2) pass.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::distances::DissimilarityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, sym_eigenvalues, Matrix, SpdMatrix, SymMatrix};
use crate::rng::{self, tag};

/// Permutations used when the caller does not choose.
pub const DEFAULT_PERMUTATIONS: usize = 999;

/// Largest accepted condition number of `X'X`.
pub const MAX_DESIGN_CONDITION: f64 = 1e12;

/// Relative slack under which a permuted statistic counts as a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// N x (p+1) design matrix whose first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix(Matrix);

impl DesignMatrix {
    pub fn new(x: Matrix) -> Result<Self> {
        if x.cols() == 0 {
            return Err(Error::InvalidDesign("design has no columns".into()));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite);
        }
        if let Some(i) = (0..x.rows()).find(|&i| x[(i, 0)] != 1.0) {
            return Err(Error::InvalidDesign(format!(
                "first column must be the intercept (all ones); row {i} has {}",
                x[(i, 0)]
            )));
        }
        if x.rows() <= x.cols() {
            return Err(Error::InvalidDesign(format!(
                "{} subjects cannot support {} columns",
                x.rows(),
                x.cols()
            )));
        }
        Ok(DesignMatrix(x))
    }

    /// Intercept plus a 0/1 indicator of `in_group`.
    pub fn two_group(in_group: &[bool]) -> Result<Self> {
        let x = Matrix::from_fn(in_group.len(), 2, |i, j| {
            if j == 0 || in_group[i] {
                1.0
            } else {
                0.0
            }
        });
        DesignMatrix::new(x)
    }

    pub fn n_subjects(&self) -> usize {
        self.0.rows()
    }

    /// Number of predictors, excluding the intercept.
    pub fn n_predictors(&self) -> usize {
        self.0.cols() - 1
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }
}

/// Double-centred Gower matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GowerMatrix(Matrix);

impl GowerMatrix {
    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }
}

pub fn gower_center(d: &DissimilarityMatrix) -> GowerMatrix {
    let n = d.n_subjects();
    let dm = d.as_matrix();
    let a = Matrix::from_fn(n, n, |i, j| -0.5 * dm[(i, j)] * dm[(i, j)]);
    let means: Vec<f64> = (0..n)
        .map(|i| a.row(i).iter().sum::<f64>() / n as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / n as f64;
    let g = Matrix::from_fn(n, n, |i, j| a[(i, j)] - means[i] - means[j] + grand);
    GowerMatrix(SymMatrix::symmetrized(g).into_matrix())
}

/// Orthogonal projection `H = X (X'X)^{-1} X'` onto the column space of a design.
#[derive(Debug, Clone, PartialEq)]
pub struct HatMatrix {
    h: Matrix,
    n_predictors: usize,
}

impl HatMatrix {
    pub fn as_matrix(&self) -> &Matrix {
        &self.h
    }

    pub fn n(&self) -> usize {
        self.h.rows()
    }

    pub fn n_predictors(&self) -> usize {
        self.n_predictors
    }
}

pub fn hat_matrix(x: &DesignMatrix) -> Result<HatMatrix> {
    let xm = x.as_matrix();
    let xt = xm.transpose();
    let xtx = SymMatrix::symmetrized(xt.matmul(xm));
    let eig = sym_eigenvalues(&xtx)?;
    let (lo, hi) = (eig[0], eig[eig.len() - 1]);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_DESIGN_CONDITION) {
        return Err(Error::RankDeficientDesign { condition });
    }
    let spd = SpdMatrix::new(xtx).map_err(|_| Error::RankDeficientDesign { condition })?;
    let l = cholesky(&spd)?;
    // H = Z'Z with Z = L^{-1} X'.
    let z = l.solve(&xt);
    let h = SymMatrix::symmetrized(z.transpose().matmul(&z)).into_matrix();
    Ok(HatMatrix {
        h,
        n_predictors: x.n_predictors(),
    })
}

/// Degrees-of-freedom convention for the pseudo-F ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PseudoFVariant {
    /// `[tr(HGH)/(N-p-1)] / [tr((I-H)G(I-H))/(N-1)]`.
    #[default]
    AsPrinted,
    /// `[tr(HGH)/p] / [tr((I-H)G(I-H))/(N-p-1)]`, the usual PERMANOVA form.
    Conventional,
}

impl PseudoFVariant {
    fn ratio(self, explained: f64, residual: f64, n: usize, p: usize) -> f64 {
        let (n, p) = (n as f64, p as f64);
        match self {
            PseudoFVariant::AsPrinted => (explained / (n - p - 1.0)) / (residual / (n - 1.0)),
            PseudoFVariant::Conventional => (explained / p) / (residual / (n - p - 1.0)),
        }
    }
}

/// `tr(HG)` for symmetric H and G.
fn trace_product(h: &Matrix, g: &Matrix) -> f64 {
    h.as_slice()
        .iter()
        .zip(g.as_slice())
        .map(|(a, b)| a * b)
        .sum()
}

/// `tr(H P G P')` where `(P G P')_{ij} = G_{perm[i], perm[j]}`.
fn permuted_trace_product(h: &Matrix, g: &Matrix, perm: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &pi) in perm.iter().enumerate() {
        let g_row = g.row(pi);
        let h_row = h.row(i);
        let mut acc = 0.0;
        for (hij, &pj) in h_row.iter().zip(perm) {
            acc += hij * g_row[pj];
        }
        total += acc;
    }
    total
}

struct Traces {
    total: f64,
    scale: f64,
}

impl Traces {
    fn of(g: &GowerMatrix) -> Self {
        let gm = g.as_matrix();
        Traces {
            total: gm.trace(),
            scale: gm.diagonal().iter().map(|x| libm::fabs(*x)).sum(),
        }
    }

    fn statistic(
        &self,
        explained: f64,
        n: usize,
        p: usize,
        variant: PseudoFVariant,
    ) -> Result<f64> {
        let residual = self.total - explained;
        if !(residual > 1e-12 * self.scale) {
            return Err(Error::DegenerateResidual { trace: residual });
        }
        Ok(variant.ratio(explained, residual, n, p))
    }
}

fn check_dims(g: &GowerMatrix, h: &HatMatrix, variant: PseudoFVariant) -> Result<()> {
    if g.n() != h.n() {
        return Err(Error::DimensionMismatch {
            expected: h.n(),
            found: g.n(),
        });
    }
    if variant == PseudoFVariant::Conventional && h.n_predictors() == 0 {
        return Err(Error::InvalidDesign(
            "the conventional pseudo-F needs at least one predictor".into(),
        ));
    }
    Ok(())
}

/// Pseudo-F with the divisors `(N-p-1)` and `(N-1)`.
pub fn pseudo_f(g: &GowerMatrix, h: &HatMatrix, n: usize, p: usize) -> Result<f64> {
    pseudo_f_with(g, h, n, p, PseudoFVariant::AsPrinted)
}

pub fn pseudo_f_with(
    g: &GowerMatrix,
    h: &HatMatrix,
    n: usize,
    p: usize,
    variant: PseudoFVariant,
) -> Result<f64> {
    check_dims(g, h, variant)?;
    if n != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: n,
        });
    }
    let explained = trace_product(h.as_matrix(), g.as_matrix());
    Traces::of(g).statistic(explained, n, p, variant)
}

/// Explained and residual traces `(tr(HGH), tr((I-H)G(I-H)))`.
pub fn trace_decomposition(g: &GowerMatrix, h: &HatMatrix) -> (f64, f64) {
    let explained = trace_product(h.as_matrix(), g.as_matrix());
    (explained, g.as_matrix().trace() - explained)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdmrResult {
    pub pseudo_f: f64,
    /// `(1 + #{F* >= F}) / (1 + n_permutations)`.
    pub p_value: f64,
    pub n_permutations: usize,
    pub seed: u64,
    pub permutation_f_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PermutationOptions {
    pub variant: PseudoFVariant,
    pub keep_f_values: bool,
}

/// Add-one permutation p-value. Values within [`TIE_TOLERANCE`] of the
/// observed statistic count as ties.
pub fn permutation_p_value(observed: f64, permuted: &[f64]) -> f64 {
    let slack = TIE_TOLERANCE * libm::fabs(observed).max(1.0);
    let hits = permuted.iter().filter(|&&f| f >= observed - slack).count();
    (1 + hits) as f64 / (1 + permuted.len()) as f64
}

/// Uniform random permutation `i` of `0..n` for `seed`.
pub fn nth_permutation(seed: u64, i: usize, n: usize) -> Vec<usize> {
    let mut rng = rng::substream(seed, &[tag::PERMUTATION, i as u64]);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    perm
}

pub fn permutation_test(
    g: &GowerMatrix,
    x: &DesignMatrix,
    n_perms: usize,
    seed: u64,
) -> Result<MdmrResult> {
    let h = hat_matrix(x)?;
    permutation_test_with(g, &h, n_perms, seed, &PermutationOptions::default())
}

/// Permutation test with a precomputed hat matrix.
///
/// Permutation `i` is drawn from its own stream keyed by `(seed, i)`, so the
/// result is identical for any number of worker threads.
pub fn permutation_test_with(
    g: &GowerMatrix,
    h: &HatMatrix,
    n_perms: usize,
    seed: u64,
    opts: &PermutationOptions,
) -> Result<MdmrResult> {
    if n_perms == 0 {
        return Err(Error::InvalidParameter("n_perms must be at least 1".into()));
    }
    check_dims(g, h, opts.variant)?;
    let n = g.n();
    let p = h.n_predictors();
    let traces = Traces::of(g);
    let (hm, gm) = (h.as_matrix(), g.as_matrix());
    let identity: Vec<usize> = (0..n).collect();
    let observed = traces.statistic(
        permuted_trace_product(hm, gm, &identity),
        n,
        p,
        opts.variant,
    )?;

    let one = |i: usize| {
        let perm = nth_permutation(seed, i, n);
        let explained = permuted_trace_product(hm, gm, &perm);
        traces
            .statistic(explained, n, p, opts.variant)
            .unwrap_or(f64::INFINITY)
    };
    #[cfg(feature = "parallel")]
    let permuted: Vec<f64> = {
        use rayon::prelude::*;
        (0..n_perms)
            .into_par_iter()
            .with_min_len(16)
            .map(one)
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let permuted: Vec<f64> = (0..n_perms).map(one).collect();

    Ok(MdmrResult {
        pseudo_f: observed,
        p_value: permutation_p_value(observed, &permuted),
        n_permutations: n_perms,
        seed,
        permutation_f_values: opts.keep_f_values.then_some(permuted),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances::{dissimilarity_matrix, DistanceMeasure, Response};
    use alloc::vec;

    fn euclid_1d(y: &[f64]) -> DissimilarityMatrix {
        let r: Vec<Response> = y.iter().map(|&v| Response::Vector(vec![v])).collect();
        dissimilarity_matrix(&r, DistanceMeasure::EuclideanUpperTriangle).unwrap()
    }

    #[test]
    fn gower_of_zero_is_zero() {
        let d = DissimilarityMatrix::new(Matrix::zeros(4, 4)).unwrap();
        assert_eq!(gower_center(&d).as_matrix(), &Matrix::zeros(4, 4));
    }

    #[test]
    fn gower_rows_sum_to_zero() {
        let g = gower_center(&euclid_1d(&[0.0, 1.3, -2.0, 4.5, 0.2]));
        for i in 0..5 {
            let s: f64 = g.as_matrix().row(i).iter().sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn intercept_only_hat_is_averaging() {
        let x = DesignMatrix::new(Matrix::from_fn(4, 1, |_, _| 1.0)).unwrap();
        let h = hat_matrix(&x).unwrap();
        assert!(
            h.as_matrix()
                .max_abs_diff(&Matrix::from_fn(4, 4, |_, _| 0.25))
                < 1e-15
        );
    }

    #[test]
    fn two_group_hat_is_block_constant() {
        let x = DesignMatrix::two_group(&[true, true, true, false, false, false]).unwrap();
        let h = hat_matrix(&x).unwrap();
        let expected = Matrix::from_fn(
            6,
            6,
            |i, j| if (i < 3) == (j < 3) { 1.0 / 3.0 } else { 0.0 },
        );
        assert!(h.as_matrix().max_abs_diff(&expected) < 1e-14);
        assert!((h.as_matrix().trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn design_validation() {
        let no_intercept = Matrix::from_rows(&[[0.0, 1.0], [1.0, 2.0], [1.0, 3.0]]).unwrap();
        assert!(matches!(
            DesignMatrix::new(no_intercept),
            Err(Error::InvalidDesign(_))
        ));
        let collinear =
            Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        let x = DesignMatrix::new(collinear).unwrap();
        assert!(matches!(
            hat_matrix(&x),
            Err(Error::RankDeficientDesign { .. })
        ));
    }

    #[test]
    fn zero_gower_is_degenerate() {
        let d = DissimilarityMatrix::new(Matrix::zeros(4, 4)).unwrap();
        let g = gower_center(&d);
        let h = hat_matrix(&DesignMatrix::two_group(&[true, true, false, false]).unwrap()).unwrap();
        assert!(matches!(
            pseudo_f(&g, &h, 4, 1),
            Err(Error::DegenerateResidual { .. })
        ));
    }

    #[test]
    fn pseudo_f_matches_sums_of_squares() {
        // Groups {0, 0.2} and {1, 1.2}: means 0.1 and 1.1, grand mean 0.6.
        // SSB = 4 * 0.25 = 1, SSW = 4 * 0.01 = 0.04.
        let y = [0.0, 0.2, 1.0, 1.2];
        let g = gower_center(&euclid_1d(&y));
        let h = hat_matrix(&DesignMatrix::two_group(&[true, true, false, false]).unwrap()).unwrap();
        let (ssb, ssw) = (1.0, 0.04);
        let (explained, residual) = trace_decomposition(&g, &h);
        assert!((explained - ssb).abs() < 1e-12);
        assert!((residual - ssw).abs() < 1e-12);
        let f = pseudo_f(&g, &h, 4, 1).unwrap();
        let expected = (ssb / 2.0) / (ssw / 3.0);
        assert!((f - expected).abs() < 1e-9 * expected);
        let conv = pseudo_f_with(&g, &h, 4, 1, PseudoFVariant::Conventional).unwrap();
        assert!((conv - (ssb / 1.0) / (ssw / 2.0)).abs() < 1e-9 * conv);
    }

    #[test]
    fn p_value_bounds() {
        assert_eq!(permutation_p_value(5.0, &[1.0, 2.0, 3.0]), 0.25);
        assert_eq!(permutation_p_value(0.5, &[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(permutation_p_value(2.0, &[1.0, 2.0, 3.0]), 0.75);
        assert_eq!(permutation_p_value(1.0, &[f64::INFINITY]), 1.0);
    }

    #[test]
    fn zero_permutations_rejected() {
        let g = gower_center(&euclid_1d(&[0.0, 0.2, 1.0, 1.2]));
        let x = DesignMatrix::two_group(&[true, true, false, false]).unwrap();
        assert!(matches!(
            permutation_test(&g, &x, 0, 1),
            Err(Error::InvalidParameter(_))
        ));
    }
}
