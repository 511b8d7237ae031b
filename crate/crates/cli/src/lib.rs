//! `synseg` command line: `render`, `convert`, `evaluate` and `plan`.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 when the command
//! itself fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use synseg::kv::KeyValues;
use synseg::scene::{self, AssetStore, DatasetManifest, ForgeConfig};
use synseg::voc::parse_box_file;
use synseg::weak::{convert_dataset, ConvertOptions, LabelMethod};
use synseg::{eval, plan, ClassTaxonomy, Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "synseg",
    version,
    about = "Synthetic scene rendering, box-to-mask labeling and IoU evaluation",
    after_help = "Exit status: 0 success, 1 usage error, 2 runtime failure."
)]
pub struct Cli {
    /// Seed every random choice derives from
    #[arg(long, global = true, default_value_t = 0, env = "SYNSEG_SEED")]
    pub seed: u64,

    /// Worker threads; 0 uses every core. Never changes output bytes
    #[arg(long, global = true, default_value_t = 0, env = "SYNSEG_THREADS")]
    pub threads: usize,

    /// More logging on stderr (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render synthetic image/label pairs from randomized 3D scenes
    Render(RenderArgs),
    /// Turn bounding-box annotations into label images
    Convert(ConvertArgs),
    /// Score predicted label images against ground truth (global mean IoU)
    Evaluate(EvaluateArgs),
    /// Emit a fine-tuning plan for one training stage
    Plan(PlanArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Forge config file (key = value); built-in defaults when omitted
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Output directory for images/, labels/ and manifest.txt
    #[arg(long, env = "SYNSEG_RENDER_DIR", default_value = "synthetic")]
    pub out: PathBuf,

    /// Overrides samples_per_class from the config [default: 100]
    #[arg(long)]
    pub samples_per_class: Option<usize>,

    /// Re-render the entries of an existing manifest instead of planning anew
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Directory holding <image_id>.jpg (or .jpeg, .png, .bmp)
    #[arg(long, env = "SYNSEG_IMAGES_DIR", default_value = "images")]
    pub images: PathBuf,

    /// Box file: one `image_id class xmin ymin xmax ymax` per line
    #[arg(long)]
    pub boxes: PathBuf,

    /// Output directory for label PNGs and manifest.txt
    #[arg(long, env = "SYNSEG_WEAK_DIR", default_value = "weak_labels")]
    pub out: PathBuf,

    /// Labeling method: grabcut or crf [default: crf, or the config's]
    #[arg(long)]
    pub method: Option<LabelMethod>,

    /// Conversion config file (key = value)
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Class names, one per line, 21 entries starting with background
    #[arg(long)]
    pub classes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of predicted label PNGs
    #[arg(long)]
    pub pred: PathBuf,

    /// Directory of ground-truth label PNGs
    #[arg(long, env = "SYNSEG_GT_DIR")]
    pub gt: PathBuf,

    /// Class names for the report, one per line, 21 entries
    #[arg(long)]
    pub classes: Option<PathBuf>,

    /// Also write the report as key = value lines to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// baseline (all layers, imagenet init) or synthetic (5 score layers)
    #[arg(long)]
    pub stage: String,

    /// Dataset manifest to train on; repeatable
    #[arg(long = "dataset")]
    pub datasets: Vec<PathBuf>,

    /// Write the plan here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Batch size recorded in the plan; omitted when unset
    #[arg(long)]
    pub batch_size: Option<u32>,

    /// Epoch count recorded in the plan; omitted when unset
    #[arg(long)]
    pub epochs: Option<u32>,

    /// Free-form schedule name recorded in the plan
    #[arg(long)]
    pub lr_schedule: Option<String>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    // A second call in the same process keeps the first logger.
    let _ = env_logger::Builder::new().filter_level(level).try_init();

    let Some(command) = cli.command else {
        let mut cmd = <Cli as clap::CommandFactory>::command();
        let _ = cmd.write_long_help(&mut std::io::stderr());
        return EXIT_USAGE;
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} worker threads: {e}", cli.threads);
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| dispatch(command, cli.seed)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(command: Command, seed: u64) -> Result<()> {
    match command {
        Command::Render(a) => render(a, seed),
        Command::Convert(a) => convert(a, seed),
        Command::Evaluate(a) => evaluate(a),
        Command::Plan(a) => emit_plan(a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn taxonomy(path: Option<&Path>) -> Result<ClassTaxonomy> {
    match path {
        Some(p) => ClassTaxonomy::parse(&read_text(p)?),
        None => Ok(ClassTaxonomy::voc()),
    }
}

fn render(a: RenderArgs, seed: u64) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => ForgeConfig::read(p)?,
        None => ForgeConfig::default(),
    };
    config.seed = seed;
    if let Some(n) = a.samples_per_class {
        config.samples_per_class = n;
    }
    let assets = AssetStore::from_config(&config)?;
    let manifest = match &a.manifest {
        Some(m) => {
            let manifest = DatasetManifest::read(m)?;
            std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
            scene::render_manifest(&config, &assets, &manifest, &a.out)?;
            write_text(&a.out.join(scene::dataset::MANIFEST_NAME), &manifest.to_text())?;
            manifest
        }
        None => scene::generate_dataset(&config, &assets, &a.out)?,
    };
    println!(
        "rendered {} image/label pairs into {}",
        manifest.entries.len(),
        a.out.display()
    );
    Ok(())
}

fn convert(a: ConvertArgs, seed: u64) -> Result<()> {
    let tax = taxonomy(a.classes.as_deref())?;
    let mut options = ConvertOptions {
        seed,
        ..ConvertOptions::default()
    };
    if let Some(p) = &a.config {
        options.apply_config(&KeyValues::parse(&read_text(p)?)?)?;
    }
    if let Some(m) = a.method {
        options.method = m;
    }
    let annotations = parse_box_file(&read_text(&a.boxes)?, &tax)?;
    let manifest = convert_dataset(&a.images, &annotations, &options, &a.out)?;
    println!(
        "labeled {} images with {} into {}",
        manifest.entries.len(),
        options.method,
        a.out.display()
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let tax = taxonomy(a.classes.as_deref())?;
    let report = eval::evaluate_dataset(&a.pred, &a.gt)?;
    let mut out = std::io::stdout().lock();
    let _ = write!(out, "{}", report.to_table(&tax));
    let _ = writeln!(out, "mean_iou = {:.6}", report.mean);
    if let Some(p) = &a.out {
        write_text(p, &report.to_key_values(&tax))?;
    }
    Ok(())
}

fn emit_plan(a: PlanArgs) -> Result<()> {
    let mut p = plan::emit_plan(&a.stage, &a.datasets)?;
    p.batch_size = a.batch_size;
    p.epochs = a.epochs;
    p.lr_schedule = a.lr_schedule;
    let text = p.to_key_values();
    match &a.out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
