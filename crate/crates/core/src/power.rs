//! Simulation power study over a (b, m, r) grid.
//!
//! Every random number is addressed by a key path so the table is a pure
//! function of the grid and its seed:
//!
//! * subject streams: `(seed, SUBJECT, b_idx, m_idx, r_idx, replicate, subject)`
//! * per-replicate rho: `(seed, RHO, b_idx, m_idx, r_idx, replicate)`
//! * permutation seeds: `(seed, PERMUTATION, b_idx, m_idx, r_idx, replicate, method_id)`
//!
//! Methods consume no simulation randomness, so all methods in a replicate see
//! the same cohort and adding or removing a method leaves the others unchanged.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::distances::{
    geodesic_dissimilarity, vector_dissimilarity, vectorize_upper, CorrelationDistance,
    DistanceMeasure,
};
use crate::error::{Error, Result};
use crate::fcsim::{
    sample_rho, simulate_subject_with, CohortConfig, Group, ImplantPlan, SignalParams,
    SimulationOptions, SubjectSpec,
};
use crate::linalg::{CorrelationMatrix, SpdMatrix};
use crate::mdmr::{
    gower_center, hat_matrix, permutation_test_with, DesignMatrix, HatMatrix, PermutationOptions,
    PseudoFVariant,
};
use crate::rng::{self, tag};

/// Distance used by an MDMR variant in the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Geodesic,
    Euclidean,
    Correlation,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Geodesic, Method::Euclidean, Method::Correlation];

    pub fn name(self) -> &'static str {
        match self {
            Method::Geodesic => "geodesic",
            Method::Euclidean => "euclidean",
            Method::Correlation => "correlation",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Stable id for stream keys; independent of list position.
    fn id(self) -> u64 {
        match self {
            Method::Geodesic => 0,
            Method::Euclidean => 1,
            Method::Correlation => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub b_values: Vec<usize>,
    pub m_values: Vec<f64>,
    pub r_values: Vec<f64>,
    pub s: f64,
    pub n_patients: usize,
    pub n_controls: usize,
    pub n_replications: usize,
    pub n_permutations: usize,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl Default for ExperimentGrid {
    /// Desk-scale version of the full grid.
    fn default() -> Self {
        ExperimentGrid {
            b_values: alloc::vec![2, 3, 4],
            m_values: alloc::vec![-1.83, -0.55, 0.0, 0.55, 1.83],
            r_values: alloc::vec![0.0, 0.25, 0.5, 0.75, 1.0],
            s: 0.267,
            n_patients: 20,
            n_controls: 20,
            n_replications: 200,
            n_permutations: 199,
            alpha: 0.05,
            methods: Method::ALL.to_vec(),
            seed: 20_210_301,
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if self.b_values.is_empty() || self.m_values.is_empty() || self.r_values.is_empty() {
            return bad("b_values, m_values and r_values must be non-empty");
        }
        if self.methods.is_empty() {
            return bad("methods must name at least one of geodesic, euclidean, correlation");
        }
        if self.n_replications == 0 || self.n_permutations == 0 {
            return bad("n_replications and n_permutations must be at least 1");
        }
        if self.n_patients == 0 || self.n_controls == 0 {
            return bad("both groups need at least one subject");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.s >= 0.0) || !self.s.is_finite() {
            return bad("s must be finite and nonnegative");
        }
        if self.r_values.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("r values must lie in [0, 1]");
        }
        if self.m_values.iter().any(|m| !m.is_finite()) {
            return bad("m values must be finite");
        }
        if self.b_values.iter().any(|&b| b < 2) {
            return bad("b values must be at least 2");
        }
        Ok(())
    }
}

/// Everything a study needs besides the base cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub grid: ExperimentGrid,
    pub cohort: CohortConfig,
    pub correlation_distance: CorrelationDistance,
    pub pseudo_f: PseudoFVariant,
    pub simulation: SimulationOptions,
    /// Implant targets; the first `b` entries are used. Defaults to `0..b`.
    pub target: Option<Vec<usize>>,
}

impl Study {
    pub fn new(grid: ExperimentGrid, cohort: CohortConfig) -> Self {
        Study {
            grid,
            cohort,
            correlation_distance: CorrelationDistance::default(),
            pseudo_f: PseudoFVariant::default(),
            simulation: SimulationOptions::default(),
            target: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.cohort.validate()?;
        let max_b = *self.grid.b_values.iter().max().unwrap_or(&0);
        if max_b > self.cohort.dimension {
            return Err(Error::InvalidParameter(format!(
                "b = {max_b} exceeds the matrix dimension {}",
                self.cohort.dimension
            )));
        }
        if let Some(t) = &self.target {
            if t.len() < max_b {
                return Err(Error::InvalidParameter(format!(
                    "{} target indices given but b goes up to {max_b}",
                    t.len()
                )));
            }
            if let Some(&i) = t.iter().find(|&&i| i >= self.cohort.dimension) {
                return Err(Error::InvalidParameter(format!(
                    "target index {i} out of range for dimension {}",
                    self.cohort.dimension
                )));
            }
        }
        Ok(())
    }

    fn plan(&self, b: usize, r: f64) -> ImplantPlan {
        match &self.target {
            Some(t) => ImplantPlan {
                target: t[..b].to_vec(),
                r,
            },
            None => ImplantPlan::leading(b, r),
        }
    }

    fn measure(&self, method: Method) -> DistanceMeasure {
        match method {
            Method::Geodesic => DistanceMeasure::GeodesicAffineInvariant,
            Method::Euclidean => DistanceMeasure::EuclideanUpperTriangle,
            Method::Correlation => {
                DistanceMeasure::CorrelationUpperTriangle(self.correlation_distance)
            }
        }
    }

    fn n_subjects(&self) -> usize {
        self.grid.n_patients + self.grid.n_controls
    }

    /// Patients first, then controls.
    pub fn design(&self) -> Result<DesignMatrix> {
        let groups: Vec<bool> = (0..self.n_subjects())
            .map(|i| i < self.grid.n_patients)
            .collect();
        DesignMatrix::two_group(&groups)
    }
}

/// Indices of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub b_index: usize,
    pub m_index: usize,
    pub r_index: usize,
}

impl Cell {
    fn values(&self, grid: &ExperimentGrid) -> (usize, f64, f64) {
        (
            grid.b_values[self.b_index],
            grid.m_values[self.m_index],
            grid.r_values[self.r_index],
        )
    }

    fn path(&self) -> [u64; 3] {
        [
            self.b_index as u64,
            self.m_index as u64,
            self.r_index as u64,
        ]
    }
}

/// p-values of one cell, one list per method in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPValues {
    pub cell: Cell,
    pub p_values: Vec<(Method, Vec<f64>)>,
}

/// Simulates one replicate of `cell` and returns the p-value of each method.
pub fn run_replicate(
    study: &Study,
    cohort: &[CorrelationMatrix],
    hat: &HatMatrix,
    cell: Cell,
    replicate: usize,
) -> Result<Vec<f64>> {
    let grid = &study.grid;
    let (b, m, r) = cell.values(grid);
    let params = SignalParams { b, m, s: grid.s };
    let plan = study.plan(b, r);
    let [bi, mi, ri] = cell.path();
    let rep = replicate as u64;

    let fixed_rho = if study.simulation.rho_per_subject {
        None
    } else {
        let mut rng = rng::substream(grid.seed, &[tag::RHO, bi, mi, ri, rep]);
        Some(sample_rho(m, grid.s, &mut rng))
    };

    let subjects = (0..study.n_subjects())
        .map(|k| {
            let mut rng = rng::substream(grid.seed, &[tag::SUBJECT, bi, mi, ri, rep, k as u64]);
            let base = &cohort[rng.random_range(0..cohort.len())];
            let group = if k < grid.n_patients {
                Group::Patient
            } else {
                Group::Control
            };
            simulate_subject_with(
                base,
                SubjectSpec { group },
                &params,
                &plan,
                &study.cohort,
                &study.simulation,
                fixed_rho,
                &mut rng,
            )
            .map(|s| s.matrix)
        })
        .collect::<Result<Vec<_>>>()?;

    let vectors: Option<Vec<Vec<f64>>> = grid
        .methods
        .iter()
        .any(|m| *m != Method::Geodesic)
        .then(|| subjects.iter().map(vectorize_upper).collect());

    let opts = PermutationOptions {
        variant: study.pseudo_f,
        keep_f_values: false,
    };
    grid.methods
        .iter()
        .map(|&method| {
            let d = match method {
                Method::Geodesic => {
                    let spds: Vec<SpdMatrix> =
                        subjects.iter().map(|c| c.as_spd().clone()).collect();
                    geodesic_dissimilarity(&spds)?
                }
                _ => {
                    vector_dissimilarity(vectors.as_deref().unwrap_or(&[]), study.measure(method))?
                }
            };
            let g = gower_center(&d);
            let seed = rng::derive(grid.seed, &[tag::PERMUTATION, bi, mi, ri, rep, method.id()]);
            permutation_test_with(&g, hat, grid.n_permutations, seed, &opts).map(|res| res.p_value)
        })
        .collect()
}

/// Runs every replicate of one cell.
pub fn run_cell(study: &Study, cohort: &[CorrelationMatrix], cell: Cell) -> Result<CellPValues> {
    study.validate()?;
    check_cohort(study, cohort)?;
    let hat = hat_matrix(&study.design()?)?;
    run_cell_with_hat(study, cohort, &hat, cell)
}

fn run_cell_with_hat(
    study: &Study,
    cohort: &[CorrelationMatrix],
    hat: &HatMatrix,
    cell: Cell,
) -> Result<CellPValues> {
    let grid = &study.grid;
    let one = |rep: usize| run_replicate(study, cohort, hat, cell, rep);
    #[cfg(feature = "parallel")]
    let per_rep: Vec<Result<Vec<f64>>> = {
        use rayon::prelude::*;
        (0..grid.n_replications).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_rep: Vec<Result<Vec<f64>>> = (0..grid.n_replications).map(one).collect();

    let (b, m, r) = cell.values(grid);
    let mut p_values: Vec<(Method, Vec<f64>)> = grid
        .methods
        .iter()
        .map(|&method| (method, Vec::with_capacity(grid.n_replications)))
        .collect();
    for (replicate, res) in per_rep.into_iter().enumerate() {
        let ps = res.map_err(|e| Error::Cell {
            b,
            m,
            r,
            replicate,
            source: Box::new(e),
        })?;
        for ((_, list), p) in p_values.iter_mut().zip(ps) {
            list.push(p);
        }
    }
    Ok(CellPValues { cell, p_values })
}

fn check_cohort(study: &Study, cohort: &[CorrelationMatrix]) -> Result<()> {
    if cohort.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(c) = cohort.iter().find(|c| c.dim() != study.cohort.dimension) {
        return Err(Error::DimensionMismatch {
            expected: study.cohort.dimension,
            found: c.dim(),
        });
    }
    Ok(())
}

/// Fraction of p-values strictly below `alpha`.
pub fn estimate_power(p_values: &[f64], alpha: f64) -> Result<f64> {
    if p_values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = p_values.iter().filter(|&&p| p < alpha).count();
    Ok(hits as f64 / p_values.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub b: usize,
    pub m: f64,
    pub r: f64,
    pub method: Method,
    pub power: f64,
    pub n_replications: usize,
    pub mean_p: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    pub fn get(&self, b: usize, m: f64, r: f64, method: Method) -> Option<&PowerRow> {
        self.rows
            .iter()
            .find(|row| row.b == b && row.m == m && row.r == r && row.method == method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub b: usize,
    pub m: f64,
    pub r: f64,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub table: PowerTable,
    pub failures: Vec<CellFailure>,
}

/// Progress callback payload, emitted once per cell in grid order.
#[derive(Debug)]
pub enum CellReport<'a> {
    Completed { cell: Cell, rows: &'a [PowerRow] },
    Failed(&'a CellFailure),
}

fn rows_for(study: &Study, values: &CellPValues) -> Result<Vec<PowerRow>> {
    let grid = &study.grid;
    let (b, m, r) = values.cell.values(grid);
    values
        .p_values
        .iter()
        .map(|(method, ps)| {
            Ok(PowerRow {
                b,
                m,
                r,
                method: *method,
                power: estimate_power(ps, grid.alpha)?,
                n_replications: ps.len(),
                mean_p: ps.iter().sum::<f64>() / ps.len() as f64,
                seed: grid.seed,
            })
        })
        .collect()
}

/// Every cell of the grid in (b, m, r) order.
pub fn cells(grid: &ExperimentGrid) -> Vec<Cell> {
    let mut out = Vec::new();
    for b_index in 0..grid.b_values.len() {
        for m_index in 0..grid.m_values.len() {
            for r_index in 0..grid.r_values.len() {
                out.push(Cell {
                    b_index,
                    m_index,
                    r_index,
                });
            }
        }
    }
    out
}

/// Runs the whole grid. Invalid configurations fail up front; a failing cell
/// is recorded in [`GridOutcome::failures`] and the remaining cells still run.
pub fn run_grid(study: &Study, cohort: &[CorrelationMatrix]) -> Result<GridOutcome> {
    run_grid_observed(study, cohort, |_| {})
}

pub fn run_grid_observed(
    study: &Study,
    cohort: &[CorrelationMatrix],
    mut observer: impl FnMut(CellReport<'_>),
) -> Result<GridOutcome> {
    study.validate()?;
    check_cohort(study, cohort)?;
    let hat = hat_matrix(&study.design()?)?;
    let mut table = PowerTable::default();
    let mut failures = Vec::new();
    for cell in cells(&study.grid) {
        match run_cell_with_hat(study, cohort, &hat, cell).and_then(|v| rows_for(study, &v)) {
            Ok(rows) => {
                observer(CellReport::Completed { cell, rows: &rows });
                table.rows.extend(rows);
            }
            Err(error) => {
                let (b, m, r) = cell.values(&study.grid);
                let failure = CellFailure { b, m, r, error };
                observer(CellReport::Failed(&failure));
                failures.push(failure);
            }
        }
    }
    Ok(GridOutcome { table, failures })
}
