//! Command-line entry point: ingest, phase planning, training, evaluation
//! and reporting, plus standalone metric recomputation from prediction
//! logs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use xrc::eval::{confusion_from_rows, emit_reports, read_prediction_log, MetricsReport};
use xrc::ingest::{
    build_manifest, generate_synthetic_corpus, ingest_cohen, ingest_rsna, ClassLabel, ImageRecord,
    Manifest, Split, SplitSpec, SyntheticSpec,
};
use xrc::model::named_spec;
use xrc::phases::{build_phase_plan, phase_schedule, PhaseLayout};
use xrc::train::{load_experiment, reevaluate_experiment, run_experiment, TrainingConfig};
use xrc::{Result, XrcError};

#[derive(Parser)]
#[command(
    name = "xrc",
    version,
    about = "Chest X-ray three-class classification experiments",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest the source corpora (or generate a synthetic one) and write
    /// the manifest with its train/validation split.
    Prepare(PrepareArgs),
    /// Build one fold's phase plan from a manifest.
    Plan(PlanArgs),
    /// Train every (fold, network) pair and write checkpoints, logs,
    /// prediction logs and reports.
    Train(TrainArgs),
    /// Re-run validation inference from the checkpoints of a finished run.
    Evaluate(EvaluateArgs),
    /// Regenerate the report tables and plots of a finished run.
    Report(ReportArgs),
    /// Recompute metrics from a standalone prediction log.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// Generate a synthetic corpus of roughly this many images instead of
    /// ingesting real data.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Synthetic image side in pixels.
    #[arg(long, default_value_t = 32)]
    resolution: u32,
    /// Dataset root holding `cohen/metadata.csv`, `cohen/images/`,
    /// `rsna/labels.csv` and `rsna/dicom/`.
    #[arg(long, env = "XRC_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Output directory for the manifest (and synthetic images or
    /// converted PNGs).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// COVID-19 training quota (default: published split, scaled for a
    /// smaller synthetic corpus).
    #[arg(long)]
    train_covid: Option<usize>,
    /// Pneumonia training quota.
    #[arg(long)]
    train_pneumonia: Option<usize>,
    /// Normal training quota.
    #[arg(long)]
    train_normal: Option<usize>,
    /// How many pneumonia training images must come from the first corpus.
    #[arg(long)]
    cohen_pneumonia_train: Option<usize>,
}

#[derive(Args)]
struct LayoutArgs {
    /// Number of training phases per fold.
    #[arg(long, default_value_t = 8)]
    phases: usize,
    /// Pneumonia images shared by every phase.
    #[arg(long, default_value_t = 34)]
    shared_pneumonia: usize,
    /// Fresh pneumonia images per phase.
    #[arg(long, default_value_t = 200)]
    unique_pneumonia: usize,
    /// Fresh normal images per phase.
    #[arg(long, default_value_t = 250)]
    unique_normal: usize,
}

impl LayoutArgs {
    fn layout(&self) -> PhaseLayout {
        PhaseLayout {
            n_phases: self.phases,
            shared_pneumonia: self.shared_pneumonia,
            unique_pneumonia_per_phase: self.unique_pneumonia,
            unique_normal_per_phase: self.unique_normal,
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 1)]
    fold: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    layout: LayoutArgs,
    /// Output plan file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Networks to train, comma-separated (tiny_a, tiny_b, tiny_concat,
    /// xception, resnet50v2, concat).
    #[arg(long, value_delimiter = ',', default_value = "tiny_concat")]
    network: Vec<String>,
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config overrides as key=value; wins over the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(flatten)]
    layout: LayoutArgs,
    /// Run output directory.
    #[arg(long)]
    out: PathBuf,
    /// Print the epoch schedule and exit without training.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// A `train` output directory.
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long, default_value_t = 20)]
    batch_size: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// A `train` output directory.
    #[arg(long)]
    run_dir: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Prediction log to recompute metrics from.
    #[arg(long)]
    predictions: PathBuf,
    /// Network name to print in the report.
    #[arg(long, default_value = "external")]
    network: String,
    #[arg(long, default_value_t = 1)]
    fold: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(args) => cmd_prepare(args),
        Command::Plan(args) => cmd_plan(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Report(args) => cmd_report(args),
        Command::Metrics(args) => cmd_metrics(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Scales a published training quota to a differently sized class pool;
/// exact at the published pool sizes.
fn scaled_quota(pool: usize, published_quota: usize, published_pool: usize) -> usize {
    ((pool * published_quota) as f64 / published_pool as f64).round() as usize
}

fn cmd_prepare(args: PrepareArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out).map_err(|e| XrcError::io(&args.out, e))?;
    let records: Vec<ImageRecord> = if let Some(n) = args.synthetic {
        let spec = SyntheticSpec::scaled(n, args.resolution, args.seed);
        generate_synthetic_corpus(&spec, &args.out.join("images"))?
    } else {
        let data_dir = args.data_dir.clone().ok_or_else(|| {
            XrcError::Config("pass --data-dir (or set XRC_DATA_DIR), or use --synthetic".into())
        })?;
        let mut records = ingest_cohen(
            &data_dir.join("cohen/metadata.csv"),
            &data_dir.join("cohen/images"),
        )?;
        records.extend(ingest_rsna(
            &data_dir.join("rsna/labels.csv"),
            &data_dir.join("rsna/dicom"),
            &args.out.join("rsna_png"),
        )?);
        records
    };

    let mut pools = [0usize; 3];
    for r in &records {
        pools[r.class_label.index()] += 1;
    }
    let published = SplitSpec::default();
    let quota = |flag: Option<usize>, class: ClassLabel| {
        flag.unwrap_or_else(|| {
            if args.synthetic.is_some() {
                scaled_quota(
                    pools[class.index()],
                    published.train_count(class),
                    match class {
                        ClassLabel::Normal => 8851,
                        ClassLabel::Pneumonia => 6054,
                        ClassLabel::Covid19 => 180,
                    },
                )
            } else {
                published.train_count(class)
            }
        })
    };
    let split_spec = SplitSpec {
        train_covid: quota(args.train_covid, ClassLabel::Covid19),
        train_pneumonia: quota(args.train_pneumonia, ClassLabel::Pneumonia),
        train_normal: quota(args.train_normal, ClassLabel::Normal),
        cohen_pneumonia_train: args.cohen_pneumonia_train.unwrap_or_else(|| {
            let cohen = records
                .iter()
                .filter(|r| {
                    r.class_label == ClassLabel::Pneumonia
                        && r.source == xrc::ingest::Source::CohenXray
                })
                .count();
            published.cohen_pneumonia_train.min(cohen)
        }),
        patient_level: false,
    };

    let manifest = build_manifest(records, &split_spec, args.seed)?;
    let manifest_path = args.out.join("manifest.csv");
    manifest.write(&manifest_path)?;

    print_split_table(&manifest);
    let bytes = std::fs::read(&manifest_path).map_err(|e| XrcError::io(&manifest_path, e))?;
    let digest = Sha256::digest(&bytes);
    println!("manifest: {}", manifest_path.display());
    println!("manifest digest: {:x}", digest);
    Ok(())
}

fn print_split_table(manifest: &Manifest) {
    let train = manifest.split_class_totals(Split::Train);
    let val = manifest.split_class_totals(Split::Validation);
    println!("{:<12} {:>7} {:>7} {:>11}", "class", "total", "train", "validation");
    for class in ClassLabel::ALL {
        let i = class.index();
        println!(
            "{:<12} {:>7} {:>7} {:>11}",
            class.as_str(),
            train[i] + val[i],
            train[i],
            val[i]
        );
    }
    println!(
        "{:<12} {:>7} {:>7} {:>11}",
        "total",
        train.iter().sum::<usize>() + val.iter().sum::<usize>(),
        train.iter().sum::<usize>(),
        val.iter().sum::<usize>()
    );
}

fn cmd_plan(args: PlanArgs) -> Result<()> {
    let manifest = Manifest::read(&args.manifest)?;
    let plan = build_phase_plan(&manifest, args.fold, args.seed, &args.layout.layout())?;
    plan.write(&args.out)?;
    println!(
        "fold {}: {} phases, union {} images, COVID core {}, shared pneumonia {}",
        plan.fold_id,
        plan.phases.len(),
        plan.union().len(),
        plan.covid_core.len(),
        plan.shared_pneumonia.len()
    );
    for p in &plan.phases {
        println!(
            "phase {}: {} images (normal {}, pneumonia {}, covid {})",
            p.phase_index + 1,
            p.image_ids.len(),
            p.class_histogram[0],
            p.class_histogram[1],
            p.class_histogram[2]
        );
    }
    println!("plan: {}", args.out.display());
    Ok(())
}

fn training_config(config_path: Option<&Path>, overrides: &[String]) -> Result<TrainingConfig> {
    let mut config = match config_path {
        Some(path) => TrainingConfig::from_file(path)?,
        None => TrainingConfig::default(),
    };
    for kv in overrides {
        let (key, value) = kv.split_once('=').ok_or_else(|| {
            XrcError::Config(format!("--set expects key=value, got {kv:?}"))
        })?;
        config.apply_override(key.trim(), value.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let config = training_config(args.config.as_deref(), &args.set)?;
    let manifest = Manifest::read(&args.manifest)?;
    let specs = args
        .network
        .iter()
        .map(|n| named_spec(n))
        .collect::<Result<Vec<_>>>()?;
    let layout = args.layout.layout();

    if args.dry_run {
        let plan = build_phase_plan(&manifest, 1, config.seed, &layout)?;
        let schedule = phase_schedule(&plan, config.epochs_per_phase)?;
        let total: usize = schedule.iter().map(|(_, r)| r.clone().count()).sum();
        println!(
            "dry run: {} folds x {} networks, {} epochs per fold",
            config.n_folds,
            specs.len(),
            total
        );
        for (phase, range) in &schedule {
            println!(
                "phase {}: epochs {}-{} ({} images)",
                phase + 1,
                range.start(),
                range.end(),
                plan.phases[*phase].image_ids.len()
            );
        }
        return Ok(());
    }

    let bundle = run_experiment(&manifest, &specs, &config, &layout, &args.out)?;
    for r in &bundle.results {
        println!(
            "fold {} {}: overall accuracy {}",
            r.fold_id,
            r.network,
            r.report.overall_accuracy.display()
        );
    }
    println!("run: {}", bundle.out_dir.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let bundle = reevaluate_experiment(&args.run_dir, args.batch_size)?;
    for r in &bundle.results {
        println!(
            "fold {} {}: overall accuracy {}",
            r.fold_id,
            r.network,
            r.report.overall_accuracy.display()
        );
        println!("  predictions: {}", r.prediction_log.display());
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let bundle = load_experiment(&args.run_dir)?;
    let paths = emit_reports(&bundle.reports(), &args.run_dir.join("reports"))?;
    println!("counts table:  {}", paths.counts_csv.display());
    println!("metrics table: {}", paths.metrics_csv.display());
    println!("report:        {}", paths.structured_json.display());
    for p in &paths.plots {
        println!("plot:          {}", p.display());
    }
    Ok(())
}

fn cmd_metrics(args: MetricsArgs) -> Result<()> {
    let rows = read_prediction_log(&args.predictions)?;
    let cm = confusion_from_rows(&rows)?;
    let report = MetricsReport::from_confusion(args.fold, &args.network, cm)?;
    print_report(&report);
    Ok(())
}

fn print_report(report: &MetricsReport) {
    println!(
        "network {} fold {}: overall accuracy {}",
        report.network_name,
        report.fold_id.map_or("-".into(), |f| f.to_string()),
        report.overall_accuracy.display()
    );
    println!(
        "{:<12} {:>8} {:>12} {:>10} {:>9}",
        "class", "recall", "specificity", "precision", "accuracy"
    );
    for class in [ClassLabel::Covid19, ClassLabel::Pneumonia, ClassLabel::Normal] {
        let m = report.class_metrics(class);
        println!(
            "{:<12} {:>8} {:>12} {:>10} {:>9}",
            class.as_str(),
            m.recall.display(),
            m.specificity.display(),
            m.precision.display(),
            m.class_accuracy.display()
        );
    }
}
