//! Command-line front end: data generation, fitting, scoring, geometry
//! exports, sensitivity profiles and the fixed experiments.

pub mod error;
pub mod experiment;
pub mod model;
pub mod table;

use std::path::{Path, PathBuf};

use aif_core::analysis::{
    compare_anomaly_features, export_tree_partitions, label_top_fraction, make_blob,
    ray_mean_scores, score_grid, segments_table, TTestKind, DEFAULT_RAY_SAMPLES,
    DEFAULT_RHO_MAX, DEFAULT_RHO_MIN,
};
use aif_core::linalg::normalize_spectral;
use aif_core::sensitivity::{
    alpha, alpha_mixture, max_alpha_mixture, normalize_mixture, polar_grid, tau, tau_mixture,
    Direction, SensitivityProfile, SphereRegion, DEFAULT_NORMALIZE_GRID, DEFAULT_TAU_SAMPLES,
};
use aif_core::{NormalDistribution, RngStream, RunConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, Result};
use crate::experiment::{Experiment, Scenario};
use crate::model::ModelFile;
use crate::table::{fmt_f64, read_diabetes, read_table, write_numeric, write_table};

#[derive(Debug, Parser)]
#[command(name = "aif", version, about = "Isolation forests with anisotropic hyperplane normals")]
pub struct Cli {
    /// Worker threads; 0 uses every core
    #[arg(long, global = true, env = "AIF_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset
    Generate(GenerateArgs),
    /// Fit a forest and save it as a model file
    Fit(FitArgs),
    /// Score every row of a dataset
    Score(ScoreArgs),
    /// Score a regular 2D grid
    Map(MapArgs),
    /// Mean scores along polar rays of a 2D model
    Rays(RaysArgs),
    /// Split lines of one tree of a 2D model
    Partitions(PartitionsArgs),
    /// Directional sensitivity of a configured normal distribution
    Sensitivity(SensitivityArgs),
    /// Per-feature t-tests between the anomalies of two models
    Compare(CompareArgs),
    /// Run one of the fixed experiments
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DataKind {
    /// Standard Gaussian points
    Blob,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "blob")]
    pub kind: DataKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// TOML run configuration
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Columns to ignore, e.g. a label column
    #[arg(long)]
    pub exclude: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Output table; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// lo,hi
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true, default_value = "-4,4")]
    pub x_range: (f64, f64),
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true, default_value = "-4,4")]
    pub y_range: (f64, f64),
    /// nx,ny
    #[arg(long, value_parser = parse_size_pair, default_value = "100,100")]
    pub resolution: (usize, usize),
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RaysArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Number of evenly spaced angles in [0, 2pi)
    #[arg(long, default_value_t = 36)]
    pub thetas: usize,
    #[arg(long, default_value_t = DEFAULT_RHO_MIN)]
    pub rho_min: f64,
    #[arg(long, default_value_t = DEFAULT_RHO_MAX)]
    pub rho_max: f64,
    #[arg(long, default_value_t = DEFAULT_RAY_SAMPLES)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PartitionsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub tree: usize,
    /// xlo,ylo,xhi,yhi
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true, default_value = "-4,-4,4,4")]
    pub bounds: ([f64; 2], [f64; 2]),
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RegionKind {
    Full,
    Cap,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    /// TOML file with a [distribution] table; other run settings are ignored
    #[arg(long)]
    pub config: PathBuf,
    /// Number of polar angles for a 2D profile
    #[arg(long, default_value_t = 360)]
    pub thetas: usize,
    /// Table of direction vectors, one per row
    #[arg(long, conflicts_with = "region")]
    pub directions: Option<PathBuf>,
    /// Average over a region of the sphere instead of a profile
    #[arg(long, value_enum)]
    pub region: Option<RegionKind>,
    /// Cap axis, comma separated
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    pub axis: Option<::std::vec::Vec<f64>>,
    /// Cap half-angle in radians
    #[arg(long)]
    pub half_angle: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TAU_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rescale so that the largest sensitivity is 1
    #[arg(long)]
    pub normalize: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub model_a: PathBuf,
    #[arg(long)]
    pub model_b: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Fraction of highest scores flagged under each model
    #[arg(long, default_value_t = 0.1)]
    pub q: f64,
    /// Pooled-variance test instead of Welch's
    #[arg(long)]
    pub pooled: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: Experiment,
    /// Diabetes table (required by the diabetes experiments)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Master seed of the forests
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 7)]
    pub blob_seed: u64,
    /// Fit the diabetes forests on raw feature values instead of z-scores
    #[arg(long)]
    pub raw: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect()
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err("expected two comma separated numbers".into()),
    }
}

fn parse_size_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => Ok((
            a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?,
            b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?,
        )),
        _ => Err("expected nx,ny".into()),
    }
}

fn parse_bounds(s: &str) -> std::result::Result<([f64; 2], [f64; 2]), String> {
    match parse_list(s)?.as_slice() {
        [a, b, c, d] => Ok(([*a, *b], [*c, *d])),
        _ => Err("expected xlo,ylo,xhi,yhi".into()),
    }
}

fn parse_vector(s: &str) -> std::result::Result<Vec<f64>, String> {
    parse_list(s)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::input(path, e.to_string()))
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", cli.threads)))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Fit(a) => fit(a),
        Command::Score(a) => score(a),
        Command::Map(a) => map(a),
        Command::Rays(a) => rays(a),
        Command::Partitions(a) => partitions(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Compare(a) => compare(a),
        Command::Experiment(a) => run_experiment(a),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    if a.n == 0 || a.d == 0 {
        return Err(CliError::Usage("--n and --d must be at least 1".into()));
    }
    let data = match a.kind {
        DataKind::Blob => make_blob(a.n, a.d, a.seed)?,
    };
    let header: Vec<String> = (1..=a.d).map(|j| format!("x{j}")).collect();
    write_numeric(Some(&a.out), &header, data.rows().map(<[f64]>::to_vec).collect())
}

fn fit(a: FitArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    config
        .validate(None)
        .map_err(|e| CliError::input(&a.config, e.to_string()))?;
    let table = read_table(&a.data, &a.exclude)?;
    let model = ModelFile::fit(&config, &table)?;
    model.save(&a.out)?;
    println!("{}", model.summary());
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    let model = ModelFile::load(&a.model)?;
    let data = table::read_columns(&a.data, &model.features)?;
    let report = model.forest.score_all(&model.prepare(&data)?)?;
    let rows = report
        .mean_path_lengths
        .iter()
        .zip(&report.scores)
        .enumerate()
        .map(|(i, (h, s))| vec![i.to_string(), fmt_f64(*h), fmt_f64(*s)])
        .collect::<Vec<_>>();
    write_table(a.out.as_deref(), &["row", "mean_path_length", "score"], &rows)
}

fn load_planar(path: &Path) -> Result<ModelFile> {
    let model = ModelFile::load(path)?;
    if model.forest.dim() != 2 {
        return Err(CliError::input(
            path,
            format!("this command needs a 2D model, got dimension {}", model.forest.dim()),
        ));
    }
    if model.standardization.is_some() {
        return Err(CliError::input(path, "this command needs a model fitted without standardization"));
    }
    Ok(model)
}

fn map(a: MapArgs) -> Result<()> {
    let model = load_planar(&a.model)?;
    let (header, rows) = score_grid(&model.forest, a.x_range, a.y_range, a.resolution)?.table();
    write_numeric(a.out.as_deref(), &header, rows)
}

fn rays(a: RaysArgs) -> Result<()> {
    let model = load_planar(&a.model)?;
    if a.thetas == 0 {
        return Err(CliError::Usage("--thetas must be at least 1".into()));
    }
    let profile = ray_mean_scores(&model.forest, &polar_grid(a.thetas), a.rho_min, a.rho_max, a.samples)?;
    let rows = profile
        .thetas
        .iter()
        .zip(&profile.mean_scores)
        .map(|(t, s)| Ok(vec![*t, *s, experiment::polar_sensitivity(model.forest.distribution(), *t)?]))
        .collect::<Result<Vec<_>>>()?;
    write_numeric(a.out.as_deref(), &["theta", "mean_score", "sensitivity"], rows)
}

fn partitions(a: PartitionsArgs) -> Result<()> {
    let model = load_planar(&a.model)?;
    let tree = model.forest.trees().get(a.tree).ok_or_else(|| {
        CliError::Usage(format!(
            "--tree {} out of range, the model has {} trees",
            a.tree,
            model.forest.trees().len()
        ))
    })?;
    let (header, rows) = segments_table(&export_tree_partitions(tree, a.bounds)?);
    write_numeric(a.out.as_deref(), &header, rows)
}

fn sensitivity(a: SensitivityArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    let mut dist = config.distribution.build()?;
    let d = dist.dim();
    if a.normalize {
        dist = match dist {
            NormalDistribution::Gaussian(g) => NormalDistribution::gaussian(normalize_spectral(g.cov())?)?,
            NormalDistribution::Mixture(m) => {
                let m = normalize_mixture(&m, DEFAULT_NORMALIZE_GRID)?;
                let (max, _) = max_alpha_mixture(&m, DEFAULT_NORMALIZE_GRID)?;
                eprintln!("scale = {} (max sensitivity {})", fmt_f64(m.scale()), fmt_f64(max));
                NormalDistribution::Mixture(m)
            }
        };
    }
    let at = |n: &Direction| -> aif_core::Result<f64> {
        match &dist {
            NormalDistribution::Gaussian(g) => alpha(n, g.cov()),
            NormalDistribution::Mixture(m) => alpha_mixture(n, m),
        }
    };

    if let Some(kind) = a.region {
        let region = match kind {
            RegionKind::Full => SphereRegion::full(d),
            RegionKind::Cap => {
                let (Some(axis), Some(u)) = (a.axis.clone(), a.half_angle) else {
                    return Err(CliError::Usage("a cap needs --axis and --half-angle".into()));
                };
                if axis.len() != d {
                    return Err(aif_core::Error::DimensionMismatch { expected: d, found: axis.len() }.into());
                }
                SphereRegion::cap(Direction::new(axis)?, u)?
            }
        };
        let mut rng = RngStream::new(a.seed, 0);
        let est = match &dist {
            NormalDistribution::Gaussian(g) => tau(&region, g.cov(), a.samples, &mut rng)?,
            NormalDistribution::Mixture(m) => tau_mixture(&region, m, a.samples, &mut rng)?,
        };
        return write_numeric(
            a.out.as_deref(),
            &["estimate", "std_error", "samples"],
            vec![vec![est.value, est.std_error, est.samples as f64]],
        );
    }

    let profile = if let Some(path) = &a.directions {
        let table = read_table(path, &[])?;
        if table.data.dim() != d {
            return Err(aif_core::Error::DimensionMismatch { expected: d, found: table.data.dim() }.into());
        }
        let dirs = table
            .data
            .rows()
            .map(|r| Direction::new(r.to_vec()))
            .collect::<aif_core::Result<Vec<_>>>()?;
        SensitivityProfile::over_directions(dirs, at)?
    } else {
        if d != 2 {
            return Err(CliError::Usage(format!(
                "a polar profile needs a 2D distribution; use --directions or --region for dimension {d}"
            )));
        }
        if a.thetas == 0 {
            return Err(CliError::Usage("--thetas must be at least 1".into()));
        }
        SensitivityProfile::polar(&polar_grid(a.thetas), at)?
    };
    let (header, rows) = profile.table();
    write_numeric(a.out.as_deref(), &header, rows)
}

fn compare(a: CompareArgs) -> Result<()> {
    let model_a = ModelFile::load(&a.model_a)?;
    let model_b = ModelFile::load(&a.model_b)?;
    if model_a.features != model_b.features {
        return Err(CliError::input(&a.model_b, "models were fitted on different features"));
    }
    let data = table::read_columns(&a.data, &model_a.features)?;
    let flags = |m: &ModelFile| -> Result<Vec<bool>> {
        let scores = m.forest.score_all(&m.prepare(&data)?)?.scores;
        Ok(label_top_fraction(&scores, a.q)?.flags)
    };
    let kind = if a.pooled { TTestKind::Pooled } else { TTestKind::Welch };
    let results = compare_anomaly_features(&data, &flags(&model_a)?, &flags(&model_b)?, kind)?;
    write_table(
        a.out.as_deref(),
        &["feature", "mean_a", "mean_b", "t", "df", "p"],
        &experiment::comparison_rows(&model_a.features, &results),
    )
}

fn run_experiment(a: ExperimentArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let scenario = match a.name {
        Experiment::DiabetesA3 => Scenario::A3,
        Experiment::DiabetesA4 => Scenario::A4,
        Experiment::DiabetesA5 => Scenario::A5,
        Experiment::BlobMaps | Experiment::BlobMixtures => {
            for f in experiment::run_blob(a.name, a.blob_seed, a.seed, &a.out_dir)? {
                println!("{}", a.out_dir.join(f).display());
            }
            return Ok(());
        }
    };
    let path = a
        .data
        .ok_or_else(|| CliError::Usage(format!("{} needs --data", scenario.name())))?;
    let table = read_diabetes(&path)?;
    let outcome = experiment::run_diabetes(&table, scenario, a.seed, !a.raw)?;
    experiment::write_diabetes(&a.out_dir, scenario, &outcome)?;
    for (f, r) in outcome.features.iter().zip(&outcome.results) {
        println!(
            "{f:<26} aif {:>10.4} eif {:>10.4} p {:.4}",
            r.mean_a, r.mean_b, r.p_value
        );
    }
    Ok(())
}
