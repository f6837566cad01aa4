//! Thin operational surface over the library: generate synthetic data, train
//! (full model and every ablation), evaluate a checkpoint, and re-render
//! reports. Exit codes: 0 success, 2 configuration error, 3 format error,
//! 4 divergence, 5 dimension mismatch.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use cmgan::config::RunConfig;
use cmgan::data::{load_dataset, save_dataset, split_with_indices, FileFormat};
use cmgan::error::{Error, Result};
use cmgan::eval::{full_report, per_category_map};
use cmgan::model::{load_checkpoint, save_checkpoint, CmGanModel};
use cmgan::report::{parse_report_csv, per_category_csv, report_csv, report_markdown};
use cmgan::train::{train_with, EpochRecord};

#[derive(Parser)]
#[command(name = "cmgan", version, about = "Cross-modal common-representation learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; omitted sections take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the training/synthesis seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving every output of this run.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired-modality dataset and split it.
    Synth {
        #[command(flatten)]
        common: Common,
        /// On-disk encoding for the modality blocks.
        #[arg(long, default_value = "cmgf")]
        format: String,
    },
    /// Train a model on a previously generated dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory holding train/val manifests (as written by synth).
        #[arg(long)]
        data: PathBuf,
        /// Override the number of epochs from the config.
        #[arg(long)]
        epochs: Option<usize>,
        /// Disable the shared second encoder layer.
        #[arg(long)]
        no_weight_sharing: bool,
        /// Disable the semantic softmax constraint.
        #[arg(long)]
        no_semantic: bool,
        /// Keep only inter-modality discrimination (drop the intra pair).
        #[arg(long)]
        inter_only: bool,
        /// Autoencoder baseline: no adversarial terms, reconstruction loss on.
        #[arg(long)]
        no_adversarial: bool,
    },
    /// Evaluate a checkpoint on a test set and write report files.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Model checkpoint to evaluate.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Test-set manifest (or a directory containing test.manifest.toml).
        #[arg(long)]
        data: PathBuf,
    },
    /// Re-render the markdown report from an existing report CSV.
    Report {
        #[command(flatten)]
        common: Common,
        /// Report CSV produced by eval.
        #[arg(long)]
        from: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.synth.seed = seed;
        cfg.train.seed = seed;
        cfg.split.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}

fn cmd_synth(common: &Common, format: &str) -> Result<()> {
    let cfg = load_config(common)?;
    let format = match format {
        "cmgf" => FileFormat::Cmgf,
        "csv" => FileFormat::Csv,
        other => return Err(Error::Config(format!("unknown format {other:?}"))),
    };
    let dataset = cmgan::data::generate_synthetic(&cfg.synth)?;
    let (subsets, indices) =
        split_with_indices(&dataset, &cfg.split.fractions(), cfg.split.seed)?;

    std::fs::create_dir_all(&common.out)
        .map_err(|e| Error::io(common.out.display().to_string(), e))?;
    for ((subset, idx), name) in subsets.iter().zip(&indices).zip(["train", "val", "test"]) {
        save_dataset(subset, &common.out, name, format)?;
        let listing: String = idx.iter().map(|i| format!("{i}\n")).collect();
        write_file(&common.out.join(format!("{name}.indices.txt")), &listing)?;
    }
    cfg.write_resolved(&common.out, "synth")?;
    println!(
        "wrote {} train / {} val / {} test pairs to {}",
        subsets[0].len(),
        subsets[1].len(),
        subsets[2].len(),
        common.out.display()
    );
    Ok(())
}

fn manifest_in(dir: &Path, name: &str) -> PathBuf {
    if dir.is_dir() {
        dir.join(format!("{name}.manifest.toml"))
    } else {
        dir.to_path_buf()
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    common: &Common,
    data: &Path,
    epochs: Option<usize>,
    no_weight_sharing: bool,
    no_semantic: bool,
    inter_only: bool,
    no_adversarial: bool,
) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(epochs) = epochs {
        cfg.train.epochs = epochs;
    }
    if no_weight_sharing {
        cfg.train.ablation.weight_sharing = false;
    }
    if no_semantic {
        cfg.train.ablation.semantic_constraint = false;
    }
    if inter_only {
        cfg.train.ablation.intra_discrimination = false;
    }
    if no_adversarial {
        cfg.train = cfg.train.cae_defaults();
    }

    let train_ds = load_dataset(&manifest_in(data, "train"))?;
    let val_ds = load_dataset(&manifest_in(data, "val"))?;
    let dims = cfg
        .model
        .dims(train_ds.d_img(), train_ds.d_txt(), train_ds.classes());

    std::fs::create_dir_all(&common.out)
        .map_err(|e| Error::io(common.out.display().to_string(), e))?;
    cfg.write_resolved(&common.out, "train")?;

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.train.seed);
    let mut model = CmGanModel::new(dims, cfg.train.ablation.weight_sharing, &mut rng);

    // Stream the log so a divergence abort still leaves the partial rows.
    let log_path = common.out.join("log.csv");
    let log_file = std::fs::File::create(&log_path)
        .map_err(|e| Error::io(log_path.display().to_string(), e))?;
    let mut log_file = std::io::BufWriter::new(log_file);
    writeln!(log_file, "{}", EpochRecord::CSV_HEADER)
        .map_err(|e| Error::io(log_path.display().to_string(), e))?;

    let outcome = train_with(&mut model, &train_ds, &val_ds, &cfg.train, |record| {
        let _ = writeln!(log_file, "{}", record.csv_row());
        let _ = log_file.flush();
    });
    let _ = log_file.flush();
    let log = outcome?;

    let ckpt_path = common.out.join("model.ckpt");
    save_checkpoint(&model, &ckpt_path)?;
    println!(
        "trained {} epochs (best validation at epoch {}), checkpoint at {}",
        log.epochs.len(),
        log.best_epoch.map_or_else(|| "-".into(), |e| e.to_string()),
        ckpt_path.display()
    );
    Ok(())
}

fn cmd_eval(common: &Common, checkpoint: &Path, data: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    let mut model = load_checkpoint(checkpoint)?;
    let test_ds = load_dataset(&manifest_in(data, "test"))?;
    if model.dims.d_img != test_ds.d_img() || model.dims.d_txt != test_ds.d_txt() {
        return Err(Error::DimensionMismatch {
            ckpt_img: model.dims.d_img,
            ckpt_txt: model.dims.d_txt,
            data_img: test_ds.d_img(),
            data_txt: test_ds.d_txt(),
        });
    }

    let report = full_report(&mut model, &test_ds, cfg.eval.exclude_query)?;
    let per_category = per_category_map(&mut model, &test_ds)?;

    std::fs::create_dir_all(&common.out)
        .map_err(|e| Error::io(common.out.display().to_string(), e))?;
    cfg.write_resolved(&common.out, "eval")?;
    write_file(&common.out.join("report.csv"), &report_csv(&report))?;
    write_file(&common.out.join("report.md"), &report_markdown(&report))?;
    write_file(
        &common.out.join("per_category.csv"),
        &per_category_csv(&per_category, test_ds.category_names()),
    )?;
    println!(
        "bi-modal MAP {:.3} / all-modal MAP {:.3}, reports in {}",
        report.map_bi_avg,
        report.map_all_avg,
        common.out.display()
    );
    Ok(())
}

fn cmd_report(common: &Common, from: &Path) -> Result<()> {
    let body = std::fs::read_to_string(from).map_err(|e| Error::io(from.display().to_string(), e))?;
    let report = parse_report_csv(&body, &from.display().to_string())?;
    std::fs::create_dir_all(&common.out)
        .map_err(|e| Error::io(common.out.display().to_string(), e))?;
    let path = common.out.join("report.md");
    write_file(&path, &report_markdown(&report))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Synth { common, format } => cmd_synth(&common, &format),
        Command::Train {
            common,
            data,
            epochs,
            no_weight_sharing,
            no_semantic,
            inter_only,
            no_adversarial,
        } => cmd_train(
            &common,
            &data,
            epochs,
            no_weight_sharing,
            no_semantic,
            inter_only,
            no_adversarial,
        ),
        Command::Eval {
            common,
            checkpoint,
            data,
        } => cmd_eval(&common, &checkpoint, &data),
        Command::Report { common, from } => cmd_report(&common, &from),
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
