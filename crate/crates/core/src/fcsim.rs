//! Functional-connectivity simulation.
//!
//! A simulated subject starts from a base correlation matrix. Patients get an
//! AR(1) signal block `B` with `B_ij = rho^|i-j|` implanted into a set of
//! target ROIs; the implantation is a congruence `C(r) A C(r)'` that blends the
//! target block from `A_11` (at `r = 0`) to `B` (at `r = 1`) without leaving
//! the SPD cone. The implanted matrix is used as the scale of a Wishart draw
//! with random degrees of freedom, and the draw is normalised back to a
//! correlation matrix.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, normalize_to_correlation, CorrelationMatrix, LowerTriangular, Matrix, SpdMatrix,
    SymMatrix,
};
use crate::rng::{self, tag};

/// Signal size and the normal law of `atanh(rho)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalParams {
    /// Block size, at least 2.
    pub b: usize,
    /// Mean of `atanh(rho)`.
    pub m: f64,
    /// Standard deviation of `atanh(rho)`.
    pub s: f64,
}

impl SignalParams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.b < 2 || self.b > dim {
            return Err(Error::InvalidParameter(format!(
                "signal size b = {} must lie in [2, {dim}]",
                self.b
            )));
        }
        if !self.m.is_finite() || !(self.s >= 0.0) || !self.s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "signal law needs finite m and s >= 0 (m = {}, s = {})",
                self.m, self.s
            )));
        }
        Ok(())
    }
}

/// Where and how strongly to implant.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplantPlan {
    pub target: Vec<usize>,
    pub r: f64,
}

impl ImplantPlan {
    /// Targets the leading `b` ROIs.
    pub fn leading(b: usize, r: f64) -> Self {
        ImplantPlan {
            target: (0..b).collect(),
            r,
        }
    }

    pub fn validate(&self, dim: usize, b: usize) -> Result<()> {
        if self.target.len() != b {
            return Err(Error::InvalidImplant(format!(
                "{} target indices for a {b}x{b} signal",
                self.target.len()
            )));
        }
        for (k, &t) in self.target.iter().enumerate() {
            if t >= dim {
                return Err(Error::InvalidImplant(format!(
                    "target index {t} out of range for dimension {dim}"
                )));
            }
            if self.target[..k].contains(&t) {
                return Err(Error::InvalidImplant(format!("target index {t} repeated")));
            }
        }
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::InvalidImplant(format!(
                "r = {} outside [0, 1]",
                self.r
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Patient,
    Control,
}

impl Group {
    pub fn name(self) -> &'static str {
        match self {
            Group::Patient => "patient",
            Group::Control => "control",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubjectSpec {
    pub group: Group,
}

/// Block template for the synthetic base cohort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseTemplate {
    /// Number of networks. ROI `i` belongs to network `i % n_blocks`.
    pub n_blocks: usize,
    /// Correlation between ROIs of the same network.
    pub within_rho: f64,
    /// Wishart degrees of freedom of each base draw.
    pub df: usize,
}

impl Default for BaseTemplate {
    fn default() -> Self {
        BaseTemplate {
            n_blocks: 4,
            within_rho: 0.3,
            df: 100,
        }
    }
}

impl BaseTemplate {
    pub fn scale_matrix(&self, dim: usize) -> Result<SpdMatrix> {
        if self.n_blocks == 0 {
            return Err(Error::InvalidParameter(
                "template needs at least one block".into(),
            ));
        }
        let m = Matrix::from_fn(dim, dim, |i, j| {
            if i == j {
                1.0
            } else if i % self.n_blocks == j % self.n_blocks {
                self.within_rho
            } else {
                0.0
            }
        });
        SpdMatrix::from_matrix(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CohortSource {
    Synthetic(BaseTemplate),
    /// Directory of matrix CSV files; loaded by the IO layer.
    File(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortConfig {
    /// Number of ROIs.
    pub dimension: usize,
    /// Number of base matrices to generate.
    pub n_base: usize,
    pub df_min: usize,
    pub df_max: usize,
    pub source: CohortSource,
}

impl CohortConfig {
    /// `df_min = max(dimension, 39)`, `df_max = 150`, synthetic default template.
    pub fn synthetic(dimension: usize, n_base: usize) -> Self {
        CohortConfig {
            dimension,
            n_base,
            df_min: dimension.max(39),
            df_max: 150.max(dimension.max(39)),
            source: CohortSource::Synthetic(BaseTemplate::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::InvalidParameter(
                "dimension must be at least 2".into(),
            ));
        }
        if self.n_base == 0 {
            return Err(Error::InvalidParameter("n_base must be at least 1".into()));
        }
        if self.df_min < self.dimension {
            return Err(Error::DegreesOfFreedomTooSmall {
                df: self.df_min,
                dim: self.dimension,
            });
        }
        if self.df_max < self.df_min {
            return Err(Error::InvalidParameter(format!(
                "df_max {} below df_min {}",
                self.df_max, self.df_min
            )));
        }
        Ok(())
    }
}

/// Simulation switches that resolve ambiguities in the procedure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    /// Pass the implanted scale matrix through [`normalize_to_correlation`].
    pub renormalize_implant: bool,
    /// Draw `rho` for every patient rather than once per replicate.
    pub rho_per_subject: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            renormalize_implant: true,
            rho_per_subject: true,
        }
    }
}

/// AR(1) correlation block `B_ij = rho^|i-j|`.
pub fn signal_matrix(b: usize, rho: f64) -> Result<CorrelationMatrix> {
    if !(libm::fabs(rho) < 1.0) {
        return Err(Error::InvalidRho(rho));
    }
    if b == 0 {
        return Err(Error::InvalidParameter(
            "signal size must be positive".into(),
        ));
    }
    let m = Matrix::from_fn(b, b, |i, j| libm::pow(rho, i.abs_diff(j) as f64));
    CorrelationMatrix::from_matrix(m)
}

/// `tanh(p)` with `p ~ N(m, s^2)`, kept strictly inside (-1, 1).
pub fn sample_rho<R: Rng + ?Sized>(m: f64, s: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let rho = libm::tanh(m + s * z);
    let edge = 1.0 - f64::EPSILON;
    rho.clamp(-edge, edge)
}

struct Blocked {
    order: Vec<usize>,
    permuted: Matrix,
}

fn lead_with_target(a: &Matrix, target: &[usize]) -> Blocked {
    let mut order: Vec<usize> = target.to_vec();
    order.extend((0..a.rows()).filter(|i| !target.contains(i)));
    let permuted = a.permuted(&order);
    Blocked { order, permuted }
}

fn leading_block(m: &Matrix, b: usize) -> Result<SpdMatrix> {
    SpdMatrix::from_matrix(Matrix::from_fn(b, b, |i, j| m[(i, j)]))
}

/// Implanted scale matrix before any renormalisation.
///
/// With the target block moved to the front, `C(r) = diag(M, I)` where
/// `M = L_{B(r)} L_{A_11}^{-1}`, `B(r) = (1 - r) A_11 + r B`, and `L_X` is the
/// lower Cholesky factor of `X`. Then `M A_11 M' = B(r)` and `C(r) A C(r)'`
/// is SPD whenever `A` is.
pub fn implant_scale(
    a: &SpdMatrix,
    signal: &CorrelationMatrix,
    target: &[usize],
    r: f64,
) -> Result<SpdMatrix> {
    let b = signal.dim();
    ImplantPlan {
        target: target.to_vec(),
        r,
    }
    .validate(a.dim(), b)?;
    if r == 0.0 {
        return Ok(a.clone());
    }
    let blocked = lead_with_target(a.as_matrix(), target);
    let a11 = leading_block(&blocked.permuted, b)?;
    let blend = SpdMatrix::new(SymMatrix::symmetrized(a11.as_matrix().lincomb(
        1.0 - r,
        signal.as_matrix(),
        r,
    )))?;
    let l_a = cholesky(&a11)?;
    let l_b = cholesky(&blend)?;
    let m = l_b.as_matrix().matmul(l_a.inverse().as_matrix());

    let dim = a.dim();
    let mut c = Matrix::identity(dim);
    for i in 0..b {
        for j in 0..b {
            c[(i, j)] = m[(i, j)];
        }
    }
    let tilde = SymMatrix::symmetrized(blocked.permuted.clone()).congruence(&c);

    // Undo the reordering.
    let mut inverse = alloc::vec![0; dim];
    for (pos, &orig) in blocked.order.iter().enumerate() {
        inverse[orig] = pos;
    }
    let restored = tilde.as_matrix().permuted(&inverse);
    SpdMatrix::new(SymMatrix::symmetrized(restored))
}

/// Implants `signal` into `a` at blend level `r` and returns a correlation matrix.
pub fn implant(
    a: &CorrelationMatrix,
    signal: &CorrelationMatrix,
    target: &[usize],
    r: f64,
) -> Result<CorrelationMatrix> {
    let scale = implant_scale(a.as_spd(), signal, target, r)?;
    normalize_to_correlation(&scale)
}

/// One `Wishart(scale, df)` draw by the Bartlett construction.
pub fn wishart_sample<R: Rng + ?Sized>(
    scale: &SpdMatrix,
    df: usize,
    rng: &mut R,
) -> Result<SpdMatrix> {
    let l = cholesky(scale)?;
    wishart_sample_with_factor(&l, df, rng)
}

/// Bartlett draw `L T T' L'` for a precomputed factor `L` of the scale.
///
/// `T` is lower triangular with `T_ii^2 ~ chi^2(df - i)` (0-based `i`) and
/// standard normal entries below the diagonal.
pub fn wishart_sample_with_factor<R: Rng + ?Sized>(
    l: &LowerTriangular,
    df: usize,
    rng: &mut R,
) -> Result<SpdMatrix> {
    let dim = l.dim();
    if df < dim {
        return Err(Error::DegreesOfFreedomTooSmall { df, dim });
    }
    let mut t = Matrix::zeros(dim, dim);
    for i in 0..dim {
        let chi = ChiSquared::new((df - i) as f64)
            .map_err(|e| Error::InvalidParameter(format!("chi-square: {e}")))?;
        t[(i, i)] = libm::sqrt(chi.sample(rng));
        for j in 0..i {
            t[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let lt = l.as_matrix().matmul(&t);
    let w = lt.matmul(&lt.transpose());
    SpdMatrix::new(SymMatrix::symmetrized(w))
}

/// A simulated subject and the random quantities behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSubject {
    pub matrix: CorrelationMatrix,
    /// Signal strength applied, `None` for controls.
    pub rho: Option<f64>,
    /// Wishart degrees of freedom drawn.
    pub df: usize,
}

/// Simulates one subject, drawing `rho` for patients from `params`.
pub fn simulate_subject<R: Rng + ?Sized>(
    base: &CorrelationMatrix,
    spec: SubjectSpec,
    params: &SignalParams,
    plan: &ImplantPlan,
    cfg: &CohortConfig,
    rng: &mut R,
) -> Result<SimulatedSubject> {
    simulate_subject_with(
        base,
        spec,
        params,
        plan,
        cfg,
        &SimulationOptions::default(),
        None,
        rng,
    )
}

/// [`simulate_subject`] with explicit options and an optional fixed `rho`.
///
/// Patients and controls consume the random stream identically: a `rho` draw
/// (skipped when `fixed_rho` is given, for both groups), the degrees of
/// freedom, then the Wishart draw. A control and a patient at `r = 0` fed the
/// same stream therefore produce the same matrix bit for bit.
#[allow(clippy::too_many_arguments)]
pub fn simulate_subject_with<R: Rng + ?Sized>(
    base: &CorrelationMatrix,
    spec: SubjectSpec,
    params: &SignalParams,
    plan: &ImplantPlan,
    cfg: &CohortConfig,
    opts: &SimulationOptions,
    fixed_rho: Option<f64>,
    rng: &mut R,
) -> Result<SimulatedSubject> {
    if base.dim() != cfg.dimension {
        return Err(Error::DimensionMismatch {
            expected: cfg.dimension,
            found: base.dim(),
        });
    }
    params.validate(cfg.dimension)?;
    plan.validate(cfg.dimension, params.b)?;
    let rho = match fixed_rho {
        Some(rho) => rho,
        None => sample_rho(params.m, params.s, rng),
    };
    let (scale, rho) = match spec.group {
        Group::Patient => {
            let signal = signal_matrix(params.b, rho)?;
            let implanted = implant_scale(base.as_spd(), &signal, &plan.target, plan.r)?;
            let scale = if opts.renormalize_implant {
                normalize_to_correlation(&implanted)?.into_spd()
            } else {
                implanted
            };
            (scale, Some(rho))
        }
        Group::Control => (base.as_spd().clone(), None),
    };
    let df = rng.random_range(cfg.df_min..=cfg.df_max);
    let w = wishart_sample(&scale, df, rng)?;
    Ok(SimulatedSubject {
        matrix: normalize_to_correlation(&w)?,
        rho,
        df,
    })
}

/// Synthetic stand-in for a real cohort: `n_base` normalised
/// `Wishart(template, template.df)` draws. Matrix `i` uses its own stream.
pub fn generate_base_cohort(cfg: &CohortConfig, seed: u64) -> Result<Vec<CorrelationMatrix>> {
    cfg.validate()?;
    let template = match &cfg.source {
        CohortSource::Synthetic(t) => *t,
        CohortSource::File(path) => {
            return Err(Error::InvalidParameter(format!(
                "cohort source {path} is a file; load it instead of generating"
            )))
        }
    };
    let scale = template.scale_matrix(cfg.dimension)?;
    let l = cholesky(&scale)?;
    (0..cfg.n_base)
        .map(|i| {
            let mut rng = rng::substream(seed, &[tag::COHORT, i as u64]);
            let w = wishart_sample_with_factor(&l, template.df, &mut rng)?;
            normalize_to_correlation(&w)
        })
        .collect()
}
