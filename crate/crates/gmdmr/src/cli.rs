//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmdmr_core::fcsim::{simulate_subject_with, SimulationOptions};
use gmdmr_core::mdmr::{permutation_test_with, PermutationOptions};
use gmdmr_core::power::{run_grid_observed, CellReport};
use gmdmr_core::rng::{self, tag};
use gmdmr_core::{
    dissimilarity_matrix, generate_base_cohort, gower_center, hat_matrix, vectorize_upper,
    CohortConfig, CohortSource, CorrelationMatrix, DesignMatrix, DissimilarityMatrix,
    DistanceMeasure, Error, Group, ImplantPlan, Matrix, PseudoFVariant, Response, SignalParams,
    SpdMatrix, SubjectSpec,
};
use rand::Rng as _;

use crate::cohort::load_cohort;
use crate::config::{parse_correlation_distance, RunConfig, DEFAULT_CONFIG};
use crate::csvio::{csv_files_in, fmt_f64, read_matrix, write_matrix, write_text};
use crate::error::CliError;
use crate::output::write_power_outputs;

/// Sink for user-facing text.
pub type Out = dyn std::io::Write + Send;

#[derive(Debug, Parser)]
#[command(
    name = "gmdmr",
    version,
    about = "Geodesic distance MDMR on SPD matrices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pairwise dissimilarity matrix of matrix or vector CSV files.
    Dist(DistArgs),
    /// Pseudo-F permutation test from a dissimilarity matrix and a design.
    Mdmr(MdmrArgs),
    /// Simulate a patient/control cohort of connectivity matrices.
    Simulate(SimulateArgs),
    /// Run the power study described by a TOML config.
    Power(PowerArgs),
    /// Print the default power-study config.
    PrintDefaultConfig,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random draw.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output file or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Geodesic,
    Euclidean,
    Correlation,
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorrelationDistanceArg {
    Sqrt2OneMinusR,
    OneMinusR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PseudoFArg {
    AsPrinted,
    Conventional,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    /// Matrix CSV files, or a single directory of them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "geodesic")]
    pub measure: MeasureArg,
    #[arg(long, value_enum, default_value = "sqrt2-one-minus-r")]
    pub correlation_distance: CorrelationDistanceArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MdmrArgs {
    /// Dissimilarity matrix CSV.
    #[arg(long)]
    pub dist: PathBuf,
    /// Design CSV; the first column must be all ones.
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long, default_value_t = gmdmr_core::mdmr::DEFAULT_PERMUTATIONS)]
    pub perms: usize,
    #[arg(long, value_enum, default_value = "as-printed")]
    pub pseudo_f: PseudoFArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 20)]
    pub n_patients: usize,
    #[arg(long, default_value_t = 20)]
    pub n_controls: usize,
    /// Size of the implanted block.
    #[arg(long, default_value_t = 4)]
    pub b: usize,
    /// Mean of atanh(rho).
    #[arg(long, default_value_t = 1.83, allow_negative_numbers = true)]
    pub m: f64,
    /// Standard deviation of atanh(rho).
    #[arg(long, default_value_t = 0.267)]
    pub s: f64,
    /// Blend weight of the implanted signal.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// "synthetic" or a directory of correlation-matrix CSVs.
    #[arg(long, default_value = "synthetic")]
    pub cohort: String,
    /// Number of ROIs of a synthetic cohort.
    #[arg(long, default_value_t = 10)]
    pub dimension: usize,
    /// Number of synthetic base matrices.
    #[arg(long, default_value_t = 100)]
    pub n_base: usize,
    #[arg(long)]
    pub df_min: Option<usize>,
    #[arg(long, default_value_t = 150)]
    pub df_max: usize,
    /// Comma-separated ROI indices receiving the block (default 0..b).
    #[arg(long, value_delimiter = ',')]
    pub target: Option<Vec<usize>>,
    /// Skip renormalising the implanted scale matrix.
    #[arg(long)]
    pub no_renormalize: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// TOML config; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the default config and exit.
    #[arg(long)]
    pub print_default_config: bool,
    #[command(flatten)]
    pub common: Common,
}

/// Parses `args` and runs the command, writing user-facing text to `stdout`.
pub fn run(cli: Cli, stdout: &mut Out) -> Result<(), CliError> {
    match cli.command {
        Command::Dist(a) => with_threads(a.common.threads, || cmd_dist(&a, stdout)),
        Command::Mdmr(a) => with_threads(a.common.threads, || cmd_mdmr(&a, stdout)),
        Command::Simulate(a) => with_threads(a.common.threads, || cmd_simulate(&a, stdout)),
        Command::Power(a) if a.print_default_config => print_default_config(stdout),
        Command::Power(a) => cmd_power(&a, stdout),
        Command::PrintDefaultConfig => print_default_config(stdout),
    }
}

fn print_default_config(stdout: &mut Out) -> Result<(), CliError> {
    stdout
        .write_all(DEFAULT_CONFIG.as_bytes())
        .map_err(CliError::runtime)
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(CliError::runtime)?;
    pool.install(f)
}

fn say(stdout: &mut Out, line: &str) -> Result<(), CliError> {
    writeln!(stdout, "{line}").map_err(CliError::runtime)
}

fn input_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    if let [dir] = inputs {
        if dir.is_dir() {
            return Ok(csv_files_in(dir)?);
        }
    }
    Ok(inputs.to_vec())
}

fn cmd_dist(a: &DistArgs, stdout: &mut Out) -> Result<(), CliError> {
    let files = input_files(&a.inputs)?;
    if files.len() < 2 {
        return Err(CliError::Validation(format!(
            "need at least 2 inputs, got {}",
            files.len()
        )));
    }
    let mats = files
        .iter()
        .map(|f| read_matrix(f))
        .collect::<Result<Vec<_>, _>>()?;
    for (f, m) in files.iter().zip(&mats).skip(1) {
        let shape = (m.rows(), m.cols());
        let first = (mats[0].rows(), mats[0].cols());
        if shape != first {
            return Err(CliError::Validation(format!(
                "{} is {}x{} but {} is {}x{}",
                files[0].display(),
                first.0,
                first.1,
                f.display(),
                shape.0,
                shape.1
            )));
        }
    }

    let measure = match a.measure {
        MeasureArg::Geodesic => DistanceMeasure::GeodesicAffineInvariant,
        MeasureArg::Euclidean => DistanceMeasure::EuclideanUpperTriangle,
        MeasureArg::Correlation => DistanceMeasure::CorrelationUpperTriangle(
            parse_correlation_distance(match a.correlation_distance {
                CorrelationDistanceArg::Sqrt2OneMinusR => "sqrt2_one_minus_r",
                CorrelationDistanceArg::OneMinusR => "one_minus_r",
            })?,
        ),
        MeasureArg::Sphere => DistanceMeasure::Sphere,
    };
    let responses = files
        .iter()
        .zip(mats)
        .map(|(f, m)| to_response(m, measure).map_err(|e| invalid_file(f, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let d = dissimilarity_matrix(&responses, measure).map_err(|e| match e {
        Error::Pair { i, j, source } => CliError::Validation(format!(
            "{} vs {}: {source}",
            files[i].display(),
            files[j].display()
        )),
        other => CliError::validation(other),
    })?;

    let out = a
        .common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("dissimilarity.csv"));
    write_matrix(&out, d.as_matrix()).map_err(CliError::runtime)?;
    say(
        stdout,
        &format!("N={} measure={}", d.n_subjects(), measure.name()),
    )
}

fn invalid_file(path: &Path, e: Error) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}

/// A one-row file is a vector; anything else must be a square matrix.
fn to_response(m: Matrix, measure: DistanceMeasure) -> Result<Response, Error> {
    if m.rows() == 1 {
        return Ok(Response::Vector(m.row(0).to_vec()));
    }
    match measure {
        DistanceMeasure::GeodesicAffineInvariant => Ok(Response::Spd(SpdMatrix::from_matrix(m)?)),
        _ => Ok(Response::Vector(vectorize_upper(
            &CorrelationMatrix::from_matrix(m)?,
        ))),
    }
}

fn cmd_mdmr(a: &MdmrArgs, stdout: &mut Out) -> Result<(), CliError> {
    let d =
        DissimilarityMatrix::new(read_matrix(&a.dist)?).map_err(|e| invalid_file(&a.dist, e))?;
    let x = read_matrix(&a.design)?;
    if x.rows() != d.n_subjects() {
        return Err(CliError::Validation(format!(
            "{} has {} rows but {} describes {} subjects",
            a.design.display(),
            x.rows(),
            a.dist.display(),
            d.n_subjects()
        )));
    }
    let x = DesignMatrix::new(x).map_err(|e| match e {
        Error::InvalidDesign(msg) if msg.contains("intercept") => CliError::Validation(format!(
            "{}: {msg}; add a leading column of 1s to the design file",
            a.design.display()
        )),
        other => invalid_file(&a.design, other),
    })?;
    let h = hat_matrix(&x).map_err(|e| invalid_file(&a.design, e))?;
    let g = gower_center(&d);
    let seed = a.common.seed.unwrap_or(0);
    let opts = PermutationOptions {
        variant: match a.pseudo_f {
            PseudoFArg::AsPrinted => PseudoFVariant::AsPrinted,
            PseudoFArg::Conventional => PseudoFVariant::Conventional,
        },
        keep_f_values: false,
    };
    let res = permutation_test_with(&g, &h, a.perms, seed, &opts).map_err(|e| match e {
        Error::InvalidParameter(_) => CliError::validation(e),
        other => CliError::runtime(other),
    })?;

    let text = format!(
        "pseudo_f,p_value,n_permutations,seed\n{},{},{},{}\n",
        fmt_f64(res.pseudo_f),
        fmt_f64(res.p_value),
        res.n_permutations,
        res.seed
    );
    let out = a
        .common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("mdmr_result.csv"));
    write_text(&out, &text).map_err(CliError::runtime)?;
    say(
        stdout,
        &format!(
            "pseudo_f={} p_value={} n_permutations={} seed={}",
            res.pseudo_f, res.p_value, res.n_permutations, res.seed
        ),
    )
}

/// Base cohort for `simulate`: loaded from a directory or generated from `seed`.
fn simulate_cohort(
    a: &SimulateArgs,
    seed: u64,
) -> Result<(CohortConfig, Vec<CorrelationMatrix>), CliError> {
    let config = |dimension: usize, n_base: usize, source| CohortConfig {
        dimension,
        n_base,
        df_min: a.df_min.unwrap_or(dimension.max(39)),
        df_max: a.df_max,
        source,
    };
    if a.cohort == "synthetic" {
        let cfg = config(
            a.dimension,
            a.n_base,
            CohortSource::Synthetic(Default::default()),
        );
        let cohort = generate_base_cohort(&cfg, seed).map_err(CliError::validation)?;
        Ok((cfg, cohort))
    } else {
        let cohort = load_cohort(Path::new(&a.cohort))?;
        let cfg = config(
            cohort[0].dim(),
            cohort.len(),
            CohortSource::File(a.cohort.clone()),
        );
        cfg.validate().map_err(CliError::validation)?;
        Ok((cfg, cohort))
    }
}

fn cmd_simulate(a: &SimulateArgs, stdout: &mut Out) -> Result<(), CliError> {
    let seed = a.common.seed.unwrap_or(0);
    let (cfg, cohort) = simulate_cohort(a, seed)?;

    let params = SignalParams {
        b: a.b,
        m: a.m,
        s: a.s,
    };
    let plan = match &a.target {
        Some(t) => ImplantPlan {
            target: t.clone(),
            r: a.r,
        },
        None => ImplantPlan::leading(a.b, a.r),
    };
    params
        .validate(cfg.dimension)
        .map_err(CliError::validation)?;
    plan.validate(cfg.dimension, a.b)
        .map_err(CliError::validation)?;
    let opts = SimulationOptions {
        renormalize_implant: !a.no_renormalize,
        rho_per_subject: true,
    };

    let out = a
        .common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("simulated"));
    let n = a.n_patients + a.n_controls;
    let width = n.saturating_sub(1).to_string().len().max(3);
    let mut manifest = String::from("subject_id,group,rho,df,base_id\n");
    for k in 0..n {
        let group = if k < a.n_patients {
            Group::Patient
        } else {
            Group::Control
        };
        let mut rng = rng::substream(seed, &[tag::SUBJECT, k as u64]);
        let base_id = rng.random_range(0..cohort.len());
        let subject = simulate_subject_with(
            &cohort[base_id],
            SubjectSpec { group },
            &params,
            &plan,
            &cfg,
            &opts,
            None,
            &mut rng,
        )
        .map_err(|e| CliError::Runtime(format!("subject {k}: {e}")))?;
        let id = format!("subject_{k:0width$}");
        write_matrix(&out.join(format!("{id}.csv")), subject.matrix.as_matrix())
            .map_err(CliError::runtime)?;
        let rho = subject.rho.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            manifest,
            "{id},{},{rho},{},{base_id}",
            group.name(),
            subject.df
        );
    }
    write_text(&out.join("manifest.csv"), &manifest).map_err(CliError::runtime)?;
    say(
        stdout,
        &format!("wrote {n} subjects to {} (seed {seed})", out.display()),
    )
}

fn cmd_power(a: &PowerArgs, stdout: &mut Out) -> Result<(), CliError> {
    let (mut config, base_dir) = match &a.config {
        Some(path) => (
            RunConfig::load(path)?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if let Some(seed) = a.common.seed {
        config.seed = seed;
    }
    if let Some(threads) = a.common.threads {
        config.threads = threads;
    }
    if let Some(out) = &a.common.out {
        config.out_dir = out.clone();
    }

    let loaded = if config.cohort.source == "synthetic" {
        None
    } else {
        Some(load_cohort(&base_dir.join(&config.cohort.source))?)
    };
    let run = config.resolve(&base_dir, loaded.as_ref().map(|c| c[0].dim()))?;
    let threads = run.threads;
    with_threads(Some(threads), move || {
        let study = &run.study;
        let seed = study.grid.seed;
        let mut log = String::new();
        let _ = writeln!(log, "seed = {seed}");
        let _ = writeln!(
            log,
            "config = {}",
            a.config
                .as_ref()
                .map_or("(built-in defaults)".to_string(), |p| p
                    .display()
                    .to_string())
        );
        let _ = writeln!(log, "threads = {}", rayon::current_num_threads());
        let _ = writeln!(
            log,
            "alpha = {}{}",
            study.grid.alpha,
            if run.alpha_defaulted {
                " (default)"
            } else {
                ""
            }
        );

        let t0 = Instant::now();
        let cohort = match loaded {
            Some(c) => {
                let _ = writeln!(
                    log,
                    "cohort = {} ({} matrices, {}x{})",
                    run.cohort_dir.as_ref().unwrap().display(),
                    c.len(),
                    c[0].dim(),
                    c[0].dim()
                );
                c
            }
            None => {
                let c = generate_base_cohort(&study.cohort, seed).map_err(CliError::runtime)?;
                let _ = writeln!(
                    log,
                    "cohort = synthetic, {} matrices of dimension {}, generated from seed {seed}",
                    c.len(),
                    study.cohort.dimension
                );
                c
            }
        };
        let _ = writeln!(log, "cohort time = {:.3} s", t0.elapsed().as_secs_f64());
        let _ = writeln!(
            log,
            "streams: subject (seed, SUBJECT, b, m, r, replicate, subject); permutation (seed, PERMUTATION, b, m, r, replicate, method)"
        );

        let mut cell_start = Instant::now();
        let outcome = run_grid_observed(study, &cohort, |report| {
            let secs = cell_start.elapsed().as_secs_f64();
            match report {
                CellReport::Completed { rows, .. } => {
                    if let Some(first) = rows.first() {
                        let powers: Vec<String> = rows
                            .iter()
                            .map(|r| format!("{}={}", r.method.name(), r.power))
                            .collect();
                        let _ = writeln!(
                            log,
                            "cell b={} m={} r={} time={secs:.3} s {}",
                            first.b,
                            first.m,
                            first.r,
                            powers.join(" ")
                        );
                    }
                }
                CellReport::Failed(f) => {
                    let _ = writeln!(
                        log,
                        "cell b={} m={} r={} time={secs:.3} s FAILED: {}",
                        f.b, f.m, f.r, f.error
                    );
                }
            }
            cell_start = Instant::now();
        })
        .map_err(CliError::validation)?;
        let _ = writeln!(log, "total time = {:.3} s", t0.elapsed().as_secs_f64());

        write_power_outputs(&run.out_dir, &outcome.table, &outcome.failures)
            .map_err(CliError::runtime)?;
        write_text(&run.out_dir.join("power_log.txt"), &log).map_err(CliError::runtime)?;
        if !outcome.failures.is_empty() {
            return Err(CliError::Runtime(format!(
                "{} cell(s) failed; see {}",
                outcome.failures.len(),
                run.out_dir.join("failed_cells.csv").display()
            )));
        }
        say(
            stdout,
            &format!(
                "wrote {} rows to {}",
                outcome.table.rows.len(),
                run.out_dir.join("power_table.csv").display()
            ),
        )
    })
}
