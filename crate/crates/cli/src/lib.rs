//! Command implementations behind the `skipset` binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use skipset::assets::RobotAssets;
use skipset::bench::{bench_ratio, classify_with_oracle, collision_oracle, AccuracyReport, BenchReport};
use skipset::geometry::{DecompositionParams, ShapeType};
use skipset::matrix::{
    import_moveit_srdf, infer_skips, ExportFormat, InferenceThresholds, SkipMatrix, SkipReason,
};
use skipset::proximity::{shape_layout, QueryMode};
use skipset::sampling::{run_sampling, DEFAULT_SAMPLES};

#[derive(Debug, Parser)]
#[command(name = "skipset", version, about = "Self-collision matrices for articulated robots")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a URDF and build the six shape representations of every link.
    Preprocess(PreprocessArgs),
    /// Sample configurations and write stats tables and inferred matrices.
    Infer(InferArgs),
    /// Serve the refinement viewer and API (runs inference first when needed).
    Refine(RefineArgs),
    /// Time pair queries with and without the matrices and score them against an oracle.
    Bench(BenchArgs),
    /// Rewrite matrix files from the canonical JSON.
    Export(ExportArgs),
    /// Import MoveIt disable_collisions entries into the hull_link matrix.
    ImportMoveit(ImportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RobotDir {
    /// Robot asset directory.
    #[arg(long)]
    pub robot_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// URDF to preprocess.
    #[arg(long)]
    pub urdf: Option<PathBuf>,
    /// Directory that `package://` and relative mesh paths resolve against
    /// (defaults to the URDF's directory).
    #[arg(long)]
    pub mesh_root: Option<PathBuf>,
    /// Upper bound on convex parts per link.
    #[arg(long, default_value_t = DecompositionParams::default().max_parts)]
    pub max_parts: usize,
    /// Concavity below which a part is accepted as convex (m).
    #[arg(long, default_value_t = DecompositionParams::default().concavity_tol)]
    pub concavity_tol: f64,
}

impl SourceArgs {
    fn params(&self) -> DecompositionParams {
        DecompositionParams {
            max_parts: self.max_parts,
            concavity_tol: self.concavity_tol,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub dir: RobotDir,
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SamplingArgs {
    /// Configurations to sample.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Collision share at or above which a pair is always in collision.
    #[arg(long, default_value_t = InferenceThresholds::default().always_fraction)]
    pub always_fraction: f64,
    /// Clearance a never-colliding pair must keep to be skipped (m).
    #[arg(long, default_value_t = InferenceThresholds::default().never_margin)]
    pub never_margin: f64,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl SamplingArgs {
    fn thresholds(&self) -> InferenceThresholds {
        InferenceThresholds {
            always_fraction: self.always_fraction,
            never_margin: self.never_margin,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub dir: RobotDir,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Preprocess this URDF first when the directory has no shapes yet.
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RefineArgs {
    #[command(flatten)]
    pub infer: InferArgs,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Interface to bind.
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Built viewer assets to serve at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Seed of the server's random-configuration generator.
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub dir: RobotDir,
    /// Configurations per timing run.
    #[arg(long, default_value_t = 2000)]
    pub configs: usize,
    /// Timing runs per variant.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Samples for the accuracy oracle (0 skips scoring).
    #[arg(long, default_value_t = 100_000)]
    pub oracle_samples: usize,
    /// Seed of the oracle's configuration stream.
    #[arg(long, default_value_t = 7)]
    pub oracle_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatChoice {
    Json,
    Yaml,
    Both,
}

impl FormatChoice {
    fn formats(self) -> Vec<ExportFormat> {
        match self {
            FormatChoice::Json => vec![ExportFormat::Json],
            FormatChoice::Yaml => vec![ExportFormat::Yaml],
            FormatChoice::Both => ExportFormat::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub dir: RobotDir,
    #[arg(long, value_enum, default_value_t = FormatChoice::Both)]
    pub format: FormatChoice,
}

#[derive(Debug, Clone, Args)]
pub struct ImportArgs {
    #[command(flatten)]
    pub dir: RobotDir,
    /// MoveIt SRDF file.
    #[arg(long)]
    pub srdf: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess(args) => {
            let links = cmd_preprocess(&args)?;
            println!("preprocessed {links} links into {}", args.dir.robot_dir.display());
        }
        Command::Infer(args) => {
            let written = cmd_infer(&args)?;
            println!("wrote {} files", written.len());
        }
        Command::Refine(args) => cmd_refine(&args)?,
        Command::Bench(args) => {
            let report = cmd_bench(&args)?;
            print!("{}", report.table());
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Export(args) => {
            for path in cmd_export(&args)? {
                println!("{}", path.display());
            }
        }
        Command::ImportMoveit(args) => {
            let report = cmd_import_moveit(&args)?;
            for warning in &report.warnings {
                log::warn!("{warning}");
            }
            println!(
                "imported {} pairs into {}",
                report.imported,
                report.path.display()
            );
        }
    }
    Ok(())
}

/// Returns the number of links with geometry.
pub fn cmd_preprocess(args: &PreprocessArgs) -> Result<usize> {
    let Some(urdf) = &args.source.urdf else {
        bail!("preprocess needs --urdf");
    };
    let mesh_root = match &args.source.mesh_root {
        Some(root) => root.clone(),
        None => urdf
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let assets = RobotAssets::new(&args.dir.robot_dir);
    let (_, shapes) = assets
        .preprocess(urdf, &mesh_root, &args.source.params())
        .with_context(|| format!("preprocessing {}", urdf.display()))?;
    Ok(shapes.len())
}

/// Sample, infer and write six stats tables plus six JSON/YAML matrix pairs. Manual
/// entries (user marked, imported) of existing matrices carry over.
pub fn cmd_infer(args: &InferArgs) -> Result<Vec<PathBuf>> {
    let assets = RobotAssets::new(&args.dir.robot_dir);
    if args.source.urdf.is_some() && !assets.shapes_dir().exists() {
        cmd_preprocess(&PreprocessArgs {
            dir: args.dir.clone(),
            source: args.source.clone(),
        })?;
    }
    let model = assets.load_model()?;
    let shapes = assets.load_shapes()?;
    let thresholds = args.sampling.thresholds();
    thresholds.validate()?;
    let samples = args.sampling.samples;
    if samples == 0 {
        bail!("--samples must be positive");
    }
    log::info!("sampling {samples} configurations of `{}`", model.name);
    let stats = run_sampling(&model, &shapes, samples, args.sampling.seed, args.sampling.threads)?;

    let mut written = Vec::new();
    for (t, table) in &stats {
        let layout = shape_layout(&model, &shapes, *t)?;
        let mut matrix = infer_skips(table, &model, &layout, &thresholds)?;
        if assets.matrix_path(*t, ExportFormat::Json).exists() {
            match assets.load_matrix(*t) {
                Ok(previous) if previous.shape_index_map == matrix.shape_index_map => {
                    matrix = previous.with_manual_entries_of(matrix);
                }
                Ok(_) => log::warn!("{t}: shapes changed; dropping earlier manual edits"),
                Err(e) => log::warn!("{t}: ignoring unreadable matrix ({e})"),
            }
        }
        written.push(assets.write_stats(table)?);
        written.extend(assets.write_matrix(&matrix, &ExportFormat::ALL)?);
        log::info!(
            "{t}: {} of {} pairs skipped",
            matrix.skips.len(),
            table.entries.len()
        );
    }
    Ok(written)
}

pub fn cmd_refine(args: &RefineArgs) -> Result<()> {
    let assets = RobotAssets::new(&args.infer.dir.robot_dir);
    if !assets.has_all_matrices() || !assets.has_all_stats() {
        log::info!("no matrices yet; running inference first");
        cmd_infer(&args.infer)?;
    }
    let options = skipset_service::ServiceOptions {
        robot_dir: Some(args.infer.dir.robot_dir.clone()),
        static_dir: args.static_dir.clone(),
        rng_seed: args.rng_seed,
    };
    let app = skipset_service::app(&options)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async {
        let address = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&address)
            .await
            .with_context(|| format!("cannot listen on {address}"))?;
        println!("viewer at http://{}/", listener.local_addr()?);
        skipset_service::serve(listener, app).await?;
        Ok(())
    })
}

#[derive(Debug, Serialize)]
pub struct BenchSummary {
    pub robot_name: String,
    pub timings: Vec<BenchReport>,
    pub accuracy: Vec<AccuracyReport>,
}

impl BenchSummary {
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:<10} {:>8} {:>8}", "shape_type", "mode", "ratio", "std");
        for r in &self.timings {
            let mode = match r.mode {
                QueryMode::Collision => "collision",
                QueryMode::Proximity => "proximity",
            };
            let _ = writeln!(
                out,
                "{:<14} {:<10} {:>8.3} {:>8.3}",
                r.shape_type.as_str(),
                mode,
                r.ratio_mean,
                r.ratio_std
            );
        }
        if !self.accuracy.is_empty() {
            let _ = writeln!(out, "\n{:<14} {:>8} {:>10}", "shape_type", "correct", "accuracy");
            for a in &self.accuracy {
                let _ = writeln!(
                    out,
                    "{:<14} {:>3}/{:<4} {:>10.3}",
                    a.shape_type.as_str(),
                    a.correct,
                    a.total,
                    a.accuracy()
                );
            }
        }
        out
    }
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchSummary> {
    let assets = RobotAssets::new(&args.dir.robot_dir);
    let model = assets.load_model()?;
    let shapes = assets.load_shapes()?;
    let mut matrices: BTreeMap<ShapeType, SkipMatrix> = BTreeMap::new();
    for t in ShapeType::ALL {
        matrices.insert(t, assets.load_matrix(t)?);
    }
    let mut timings = Vec::new();
    for matrix in matrices.values() {
        for mode in [QueryMode::Collision, QueryMode::Proximity] {
            timings.push(bench_ratio(
                &model,
                &shapes,
                matrix,
                mode,
                args.configs,
                args.seed,
                args.repeats,
            )?);
        }
    }
    let mut accuracy = Vec::new();
    if args.oracle_samples > 0 {
        let oracle = collision_oracle(&model, &shapes, args.oracle_samples, args.oracle_seed)?;
        for (t, matrix) in &matrices {
            let layout = shape_layout(&model, &shapes, *t)?;
            accuracy.push(classify_with_oracle(matrix, &layout, &oracle));
        }
    }
    Ok(BenchSummary {
        robot_name: model.name,
        timings,
        accuracy,
    })
}

pub fn cmd_export(args: &ExportArgs) -> Result<Vec<PathBuf>> {
    let assets = RobotAssets::new(&args.dir.robot_dir);
    let mut written = Vec::new();
    for t in ShapeType::ALL {
        let matrix = assets.load_matrix(t)?;
        written.extend(assets.write_matrix(&matrix, &args.format.formats())?);
    }
    Ok(written)
}

#[derive(Debug)]
pub struct ImportReport {
    pub imported: usize,
    pub warnings: Vec<String>,
    pub path: PathBuf,
}

/// Imported entries replace whatever the hull_link matrix held for those pairs.
pub fn cmd_import_moveit(args: &ImportArgs) -> Result<ImportReport> {
    let assets = RobotAssets::new(&args.dir.robot_dir);
    let model = assets.load_model()?;
    let shapes = assets.load_shapes()?;
    let layout = shape_layout(&model, &shapes, ShapeType::HullLink)?;
    let srdf = std::fs::read_to_string(&args.srdf)
        .with_context(|| format!("reading {}", args.srdf.display()))?;
    let import = import_moveit_srdf(&srdf, &model, &layout)?;
    let base = if assets.matrix_path(ShapeType::HullLink, ExportFormat::Json).exists() {
        assets.load_matrix(ShapeType::HullLink)?
    } else {
        SkipMatrix::empty(&model.name, ShapeType::HullLink, &layout)
    };
    let merged = import.matrix.with_manual_entries_of(base);
    let imported = merged
        .skips
        .iter()
        .filter(|s| s.reason == SkipReason::Imported)
        .count();
    assets.write_matrix(&merged, &ExportFormat::ALL)?;
    Ok(ImportReport {
        imported,
        warnings: import.warnings,
        path: assets.matrix_path(ShapeType::HullLink, ExportFormat::Json),
    })
}
