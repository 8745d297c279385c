//! TOML run configuration for the power study.
//!
//! Every section and key is optional; missing values take the defaults shown
//! by [`DEFAULT_CONFIG`]. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use gmdmr_core::fcsim::SimulationOptions;
use gmdmr_core::{
    BaseTemplate, CohortConfig, CohortSource, CorrelationDistance, ExperimentGrid, Method,
    PseudoFVariant, Study,
};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_ALPHA: f64 = 0.05;

/// The configuration that reproduces the built-in defaults, with comments.
pub const DEFAULT_CONFIG: &str = r#"# gmdmr power-study configuration
seed = 20210301
out_dir = "power_out"
# Worker threads; 0 uses every available core.
threads = 0

[grid]
b_values = [2, 3, 4]
m_values = [-1.83, -0.55, 0.0, 0.55, 1.83]
r_values = [0.0, 0.25, 0.5, 0.75, 1.0]
s = 0.267
n_patients = 20
n_controls = 20
n_replications = 200
n_permutations = 199
alpha = 0.05
methods = ["geodesic", "euclidean", "correlation"]

[cohort]
# "synthetic", or a directory of correlation-matrix CSV files.
source = "synthetic"
dimension = 10
n_base = 100
# Defaults to max(dimension, 39).
df_min = 39
df_max = 150
# ROIs receiving the implanted block; defaults to 0..b.
# target_indices = [0, 1, 2, 3]

[cohort.template]
n_blocks = 4
within_rho = 0.3
df = 100

[options]
# "sqrt2_one_minus_r" or "one_minus_r"
correlation_distance = "sqrt2_one_minus_r"
# "as_printed" or "conventional"
pseudo_f = "as_printed"
rho_per_subject = true
renormalize_implant = true
"#;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub grid: GridSection,
    pub cohort: CohortSection,
    pub options: OptionsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: ExperimentGrid::default().seed,
            out_dir: PathBuf::from("power_out"),
            threads: 0,
            grid: GridSection::default(),
            cohort: CohortSection::default(),
            options: OptionsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub b_values: Vec<usize>,
    pub m_values: Vec<f64>,
    pub r_values: Vec<f64>,
    pub s: f64,
    pub n_patients: usize,
    pub n_controls: usize,
    pub n_replications: usize,
    pub n_permutations: usize,
    pub alpha: Option<f64>,
    pub methods: Vec<String>,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = ExperimentGrid::default();
        GridSection {
            b_values: g.b_values,
            m_values: g.m_values,
            r_values: g.r_values,
            s: g.s,
            n_patients: g.n_patients,
            n_controls: g.n_controls,
            n_replications: g.n_replications,
            n_permutations: g.n_permutations,
            alpha: None,
            methods: g.methods.iter().map(|m| m.name().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSection {
    pub source: String,
    pub dimension: Option<usize>,
    pub n_base: usize,
    pub df_min: Option<usize>,
    pub df_max: usize,
    pub target_indices: Option<Vec<usize>>,
    pub template: TemplateSection,
}

impl Default for CohortSection {
    fn default() -> Self {
        CohortSection {
            source: "synthetic".into(),
            dimension: None,
            n_base: 100,
            df_min: None,
            df_max: 150,
            target_indices: None,
            template: TemplateSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateSection {
    pub n_blocks: usize,
    pub within_rho: f64,
    pub df: usize,
}

impl Default for TemplateSection {
    fn default() -> Self {
        let t = BaseTemplate::default();
        TemplateSection {
            n_blocks: t.n_blocks,
            within_rho: t.within_rho,
            df: t.df,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptionsSection {
    pub correlation_distance: String,
    pub pseudo_f: String,
    pub rho_per_subject: bool,
    pub renormalize_implant: bool,
}

impl Default for OptionsSection {
    fn default() -> Self {
        let sim = SimulationOptions::default();
        OptionsSection {
            correlation_distance: "sqrt2_one_minus_r".into(),
            pseudo_f: "as_printed".into(),
            rho_per_subject: sim.rho_per_subject,
            renormalize_implant: sim.renormalize_implant,
        }
    }
}

/// A configuration checked and turned into core types.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub study: Study,
    /// Directory of cohort CSVs, when the cohort is not synthetic.
    pub cohort_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub threads: usize,
    /// True when `alpha` was absent and [`DEFAULT_ALPHA`] was applied.
    pub alpha_defaulted: bool,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    /// Validates and converts. A relative cohort directory is taken relative
    /// to `base_dir` (normally the directory holding the config file).
    ///
    /// `cohort_dimension` supplies the dimension of an already loaded file
    /// cohort; it is ignored for synthetic cohorts.
    pub fn resolve(
        &self,
        base_dir: &Path,
        cohort_dimension: Option<usize>,
    ) -> Result<ResolvedRun, CliError> {
        let methods = self
            .grid
            .methods
            .iter()
            .map(|name| parse_method(name))
            .collect::<Result<Vec<_>, _>>()?;
        let grid = ExperimentGrid {
            b_values: self.grid.b_values.clone(),
            m_values: self.grid.m_values.clone(),
            r_values: self.grid.r_values.clone(),
            s: self.grid.s,
            n_patients: self.grid.n_patients,
            n_controls: self.grid.n_controls,
            n_replications: self.grid.n_replications,
            n_permutations: self.grid.n_permutations,
            alpha: self.grid.alpha.unwrap_or(DEFAULT_ALPHA),
            methods,
            seed: self.seed,
        };

        let c = &self.cohort;
        let (source, cohort_dir, dimension) = if c.source == "synthetic" {
            let t = &c.template;
            let template = BaseTemplate {
                n_blocks: t.n_blocks,
                within_rho: t.within_rho,
                df: t.df,
            };
            (
                CohortSource::Synthetic(template),
                None,
                c.dimension.unwrap_or(10),
            )
        } else {
            let dir = base_dir.join(&c.source);
            let found = cohort_dimension.or(c.dimension).unwrap_or(0);
            if let (Some(given), Some(loaded)) = (c.dimension, cohort_dimension) {
                if given != loaded {
                    return Err(CliError::Validation(format!(
                        "config: cohort.dimension = {given} but the matrices in {} are {loaded}x{loaded}",
                        dir.display()
                    )));
                }
            }
            (
                CohortSource::File(dir.display().to_string()),
                Some(dir),
                found,
            )
        };
        let cohort = CohortConfig {
            dimension,
            n_base: c.n_base,
            df_min: c.df_min.unwrap_or(dimension.max(39)),
            df_max: c.df_max,
            source,
        };

        let mut study = Study::new(grid, cohort);
        study.correlation_distance =
            parse_correlation_distance(&self.options.correlation_distance)?;
        study.pseudo_f = parse_pseudo_f(&self.options.pseudo_f)?;
        study.simulation = SimulationOptions {
            renormalize_implant: self.options.renormalize_implant,
            rho_per_subject: self.options.rho_per_subject,
        };
        study.target = c.target_indices.clone();
        study
            .validate()
            .map_err(|e| CliError::Validation(format!("config: {e}")))?;

        Ok(ResolvedRun {
            study,
            cohort_dir,
            out_dir: self.out_dir.clone(),
            threads: self.threads,
            alpha_defaulted: self.grid.alpha.is_none(),
        })
    }
}

fn parse_method(name: &str) -> Result<Method, CliError> {
    Method::parse(name).ok_or_else(|| {
        let valid: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
        CliError::Validation(format!(
            "config: unknown method '{name}'; valid methods are {}",
            valid.join(", ")
        ))
    })
}

pub fn parse_correlation_distance(name: &str) -> Result<CorrelationDistance, CliError> {
    match name {
        "sqrt2_one_minus_r" => Ok(CorrelationDistance::Sqrt2OneMinusR),
        "one_minus_r" => Ok(CorrelationDistance::OneMinusR),
        _ => Err(CliError::Validation(format!(
            "config: unknown correlation_distance '{name}'; use sqrt2_one_minus_r or one_minus_r"
        ))),
    }
}

fn parse_pseudo_f(name: &str) -> Result<PseudoFVariant, CliError> {
    match name {
        "as_printed" => Ok(PseudoFVariant::AsPrinted),
        "conventional" => Ok(PseudoFVariant::Conventional),
        _ => Err(CliError::Validation(format!(
            "config: unknown pseudo_f '{name}'; use as_printed or conventional"
        ))),
    }
}
