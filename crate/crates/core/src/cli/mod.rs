//! Command-line front end. Every command echoes its resolved configuration
//! to a `<output>.run.json` sidecar, which `voxfeat replay` accepts.

pub mod gridfile;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::classify::{self, EarlyStopping, TrainParams, TreeEnsemble};
use crate::error::{Error, Result};
use crate::features::{compute_grid, FeatureKind};
use crate::mesh::{load_mesh, normalize_to_unit_cube};
use crate::pipeline::{build_matrix, Dataset, FeatureMatrix, FeatureRecipe, MatrixFormat, Split};
use crate::util::write_atomic;
use gridfile::{save_grid, GridFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "voxfeat",
    version,
    about = "Voxel integral-geometry features and boosted-tree shape classification"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log verbosity: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Sparse per-voxel feature grids of one mesh.
    Voxelize(VoxelizeArgs),
    /// Feature matrix of a manifest of meshes.
    Features(FeaturesArgs),
    /// Train a boosted-tree model on a feature matrix.
    Train(TrainArgs),
    /// Error rate, confusion matrix and error history of a model.
    Eval(EvalArgs),
    /// Most frequent split columns of a model.
    Importance(ImportanceArgs),
    /// Re-run a command from its `.run.json` sidecar.
    #[serde(skip)]
    Replay { config: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VoxelizeArgs {
    pub mesh: PathBuf,
    /// Octree level n (resolution 2^n).
    #[arg(long, short)]
    pub level: u32,
    /// Comma-separated feature kinds.
    #[arg(long, short, value_delimiter = ',', default_value = "SA")]
    pub kinds: Vec<FeatureKind>,
    /// Output file; `.csv` selects the CSV form. With several kinds the kind
    /// name is appended to the file stem.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Use the mesh coordinates as given instead of fitting the unit cube.
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FeaturesArgs {
    /// CSV manifest with path,label,split columns.
    #[arg(long, short)]
    pub manifest: PathBuf,
    /// Recipe DSL such as "EV@1:raw,VAD@32:hist25", or "standard".
    #[arg(long, short, default_value = "standard", conflicts_with = "recipe_file")]
    pub recipe: String,
    /// JSON recipe file; overrides --recipe and the rotation options.
    #[arg(long)]
    pub recipe_file: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub rotations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample rotations from O(3) instead of SO(3).
    #[arg(long)]
    pub reflections: bool,
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
    /// Declared label set; manifest rows with other labels are errors.
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    /// Replace the manifest splits by a seeded stratified split.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Output matrix; `.csv` selects CSV, anything else the binary form.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long, short)]
    pub matrix: PathBuf,
    /// Model file (JSON).
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
    #[arg(long, default_value_t = 0.3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub min_child_weight: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hold out this fraction of training objects for early stopping.
    #[arg(long)]
    pub early_stopping: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Train on all rows instead of the train split.
    #[arg(long)]
    pub all_rows: bool,
    /// Also write a readable dump of every tree.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, short)]
    pub matrix: PathBuf,
    /// Summary CSV; `.confusion.csv`, `.history.csv` and `.predictions.csv`
    /// siblings are written next to it.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Average predictions over each object's rotations.
    #[arg(long)]
    pub symmetrize: bool,
    /// Evaluate all rows instead of the test split.
    #[arg(long)]
    pub all_rows: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, short = 'k', default_value_t = 20)]
    pub top: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

/// The echoed configuration of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    #[serde(flatten)]
    pub command: Command,
}

impl RunConfig {
    /// Canonical form: the recipe of `features` is normalized.
    pub fn new(command: Command) -> Result<Self> {
        let command = match command {
            Command::Features(mut a) if a.recipe_file.is_none() => {
                a.recipe = FeatureRecipe::parse(&a.recipe)?.canonical();
                Command::Features(a)
            }
            other => other,
        };
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .try_init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not set thread count: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_data_error() {
        EXIT_DATA
    } else {
        EXIT_INTERNAL
    }
}

/// Runs one command. Outputs written before a failure are removed.
pub fn run(command: Command) -> Result<()> {
    let command = match command {
        Command::Replay { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::file(&config, e))?;
            RunConfig::from_json(&text)?.command
        }
        other => other,
    };
    let config = RunConfig::new(command.clone())?;
    let mut outputs = Outputs::default();
    let result = match &command {
        Command::Voxelize(a) => cmd_voxelize(a, &mut outputs),
        Command::Features(a) => cmd_features(a, &mut outputs),
        Command::Train(a) => cmd_train(a, &mut outputs),
        Command::Eval(a) => cmd_eval(a, &mut outputs),
        Command::Importance(a) => cmd_importance(a, &mut outputs),
        Command::Replay { .. } => Err(Error::Recipe(
            "a replayed configuration cannot itself be a replay".into(),
        )),
    }
    .and_then(|primary| {
        let sidecar = sidecar_path(&primary, "run.json");
        let json = config.to_json()?;
        outputs.write(&sidecar, |w| Ok(w.write_all(json.as_bytes())?))
    });
    if result.is_err() {
        outputs.remove_all();
    }
    result
}

/// Tracks written files so they can be removed on failure.
#[derive(Default)]
struct Outputs(Vec<PathBuf>);

impl Outputs {
    fn write(&mut self, path: &Path, f: impl FnOnce(&mut dyn std::io::Write) -> Result<()>) -> Result<()> {
        write_atomic(path, f)?;
        self.0.push(path.to_path_buf());
        Ok(())
    }

    fn record(&mut self, path: &Path) {
        self.0.push(path.to_path_buf());
    }

    fn remove_all(&mut self) {
        for p in self.0.drain(..) {
            let _ = std::fs::remove_file(p);
        }
    }
}

/// `dir/stem.suffix` for an output `dir/stem.ext`.
fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_voxelize(a: &VoxelizeArgs, outputs: &mut Outputs) -> Result<PathBuf> {
    let mesh = load_mesh(&a.mesh, None)?;
    let mesh = if a.no_normalize {
        mesh
    } else {
        normalize_to_unit_cube(&mesh, a.margin)?.0
    };
    let grids = compute_grid(&mesh, a.level, &a.kinds)?;
    let format = GridFormat::from_path(&a.out);
    let several = grids.len() > 1;
    for (&kind, grid) in &grids {
        let path = if several {
            let ext = a
                .out
                .extension()
                .map(|e| e.to_string_lossy().into_owned())
                .unwrap_or_else(|| "vxg".into());
            sidecar_path(&a.out, &format!("{kind}.{ext}"))
        } else {
            a.out.clone()
        };
        save_grid(&path, grid, kind, format)?;
        outputs.record(&path);
        log::info!(
            "{kind}: {} occupied voxels at resolution {} -> {}",
            grid.len(),
            grid.resolution(),
            path.display()
        );
    }
    Ok(a.out.clone())
}

fn cmd_features(a: &FeaturesArgs, outputs: &mut Outputs) -> Result<PathBuf> {
    let recipe = match &a.recipe_file {
        Some(path) => FeatureRecipe::load(path)?,
        None => {
            let mut r = FeatureRecipe::parse(&a.recipe)?;
            r.rotations = a.rotations.max(1);
            r.seed = a.seed;
            r.include_reflections = a.reflections;
            r.margin = a.margin;
            r
        }
    };
    let mut dataset = Dataset::from_manifest(&a.manifest, a.labels.as_deref())?;
    if let Some(f) = a.test_fraction {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Manifest("test fraction must lie in [0, 1]".into()));
        }
        dataset.stratified_split(f, a.split_seed);
    }
    log::info!(
        "{} objects, {} columns, {} rotations each",
        dataset.len(),
        recipe.columns().len(),
        recipe.rotations
    );
    let (matrix, report) = build_matrix(&dataset, &recipe)?;
    outputs.write(&a.out, |w| match MatrixFormat::from_path(&a.out) {
        MatrixFormat::Csv => matrix.write_csv(w),
        MatrixFormat::Binary => matrix.write_binary(w),
    })?;
    if !report.failures.is_empty() {
        let path = sidecar_path(&a.out, "failures.csv");
        outputs.write(&path, |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["object_id", "reason"])?;
            for (id, reason) in &report.failures {
                out.write_record([id, reason])?;
            }
            out.flush()?;
            Ok(())
        })?;
    }
    Ok(a.out.clone())
}

fn load_matrix(path: &Path) -> Result<FeatureMatrix> {
    FeatureMatrix::load(path, MatrixFormat::from_path(path))
}

fn cmd_train(a: &TrainArgs, outputs: &mut Outputs) -> Result<PathBuf> {
    let matrix = load_matrix(&a.matrix)?;
    let matrix = if a.all_rows { matrix } else { matrix.split(Split::Train) };
    let params = TrainParams {
        max_depth: a.depth,
        rounds: a.rounds,
        learning_rate: a.learning_rate,
        lambda: a.lambda,
        gamma: a.gamma,
        min_child_weight: a.min_child_weight,
        seed: a.seed,
        early_stopping: a.early_stopping.map(|f| EarlyStopping {
            validation_fraction: f,
            patience: a.patience,
        }),
        ..Default::default()
    };
    log::info!("training on {} rows x {} columns", matrix.n_rows(), matrix.n_cols());
    let model = classify::train(&matrix, &params)?;
    if let Some(loss) = model.train_loss().last() {
        log::info!("{} rounds, final train loss {loss:.6}", model.rounds());
    }
    outputs.write(&a.out, |w| {
        serde_json::to_writer(&mut *w, &model)?;
        Ok(())
    })?;
    let loss_path = sidecar_path(&a.out, "loss.csv");
    outputs.write(&loss_path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["round", "train_loss", "validation_loss"])?;
        for (r, l) in model.train_loss().iter().enumerate() {
            let v = model
                .validation_loss()
                .get(r)
                .map_or(String::new(), |v| format!("{v:.16e}"));
            out.write_record([(r + 1).to_string(), format!("{l:.16e}"), v])?;
        }
        out.flush()?;
        Ok(())
    })?;
    if let Some(dump) = &a.dump {
        let text = model.dump();
        outputs.write(dump, |w| Ok(w.write_all(text.as_bytes())?))?;
    }
    Ok(a.out.clone())
}

fn cmd_eval(a: &EvalArgs, outputs: &mut Outputs) -> Result<PathBuf> {
    let model = TreeEnsemble::load(&a.model)?;
    let matrix = load_matrix(&a.matrix)?;
    let matrix = if a.all_rows { matrix } else { matrix.split(Split::Test) };
    let eval = classify::evaluate(&model, &matrix, a.symmetrize)?;
    let per_row = classify::error_history(&model, &matrix, false)?;
    let symmetrized = classify::error_history(&model, &matrix, true)?;
    log::info!(
        "{} error rate {:.4} over {} predictions",
        if a.symmetrize { "symmetrized" } else { "per-rotation" },
        eval.error_rate,
        eval.predictions.len()
    );
    outputs.write(&a.out, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "value"])?;
        out.write_record(["error_rate", &format!("{:.16e}", eval.error_rate)])?;
        out.write_record(["accuracy", &format!("{:.16e}", eval.accuracy())])?;
        out.write_record(["predictions", &eval.predictions.len().to_string()])?;
        out.write_record(["symmetrized", &eval.symmetrized.to_string()])?;
        out.write_record(["rounds", &model.rounds().to_string()])?;
        out.flush()?;
        Ok(())
    })?;
    outputs.write(&sidecar_path(&a.out, "confusion.csv"), |w| {
        eval.write_confusion_csv(model.labels(), w)
    })?;
    outputs.write(&sidecar_path(&a.out, "predictions.csv"), |w| {
        eval.write_predictions_csv(model.labels(), w)
    })?;
    outputs.write(&sidecar_path(&a.out, "history.csv"), |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["round", "error", "symmetrized_error"])?;
        for (r, (e, s)) in per_row.iter().zip(&symmetrized).enumerate() {
            out.write_record([(r + 1).to_string(), format!("{e:.16e}"), format!("{s:.16e}")])?;
        }
        out.flush()?;
        Ok(())
    })?;
    Ok(a.out.clone())
}

fn cmd_importance(a: &ImportanceArgs, outputs: &mut Outputs) -> Result<PathBuf> {
    let model = TreeEnsemble::load(&a.model)?;
    let report = classify::importance(&model, Some(a.top));
    for e in report.entries.iter().take(5) {
        log::info!("{:>6}  {}", e.count, e.name);
    }
    outputs.write(&a.out, |w| report.write_csv(w))?;
    Ok(a.out.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_round_trips_with_canonical_recipe() {
        let cli = Cli::try_parse_from([
            "voxfeat",
            "features",
            "-m",
            "m.csv",
            "-r",
            "VAD@32:hist25, EV@1:raw",
            "-o",
            "x.bin",
        ])
        .unwrap();
        let config = RunConfig::new(cli.command).unwrap();
        let Command::Features(a) = &config.command else {
            panic!("features command expected");
        };
        assert_eq!(a.recipe, "EV@1:raw,VAD@32:hist25");
        let back = RunConfig::from_json(&config.to_json().unwrap()).unwrap();
        assert_eq!(back, config);
        assert_eq!(RunConfig::new(back.command.clone()).unwrap(), config);
    }

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(main_with_args(["voxfeat", "voxelize"]), EXIT_USAGE);
        assert_eq!(main_with_args(["voxfeat", "frobnicate"]), EXIT_USAGE);
        assert_eq!(
            main_with_args(["voxfeat", "voxelize", "a.obj", "-l", "1", "-k", "XX", "-o", "o"]),
            EXIT_USAGE
        );
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(
            sidecar_path(Path::new("out/m.bin"), "run.json"),
            Path::new("out/m.run.json")
        );
        assert_eq!(sidecar_path(Path::new("g.csv"), "SA.csv"), Path::new("g.SA.csv"));
    }
}
