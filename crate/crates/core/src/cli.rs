//! Command-line surface.
//!
//! Output files under `--out`: `manifest.tsv` and sequence files
//! (generate), `<stem>.<modality>.das`/`.png` (encode, export-stamps),
//! `model.dan`, `config.cfg`, `loss.csv` (train), `confusion.csv`,
//! `confusion.png`, `report.txt` (eval), `ablation.csv`, `report.txt`
//! (ablate), `gradcheck.txt` (grad-check).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::engine::{gradcheck, load_checkpoint, save_checkpoint, Checkpoint};
use crate::harness::{
    ablation_csv, encode_samples, evaluate, generate_synthetic, read_dataset, run_ablation, split_dataset,
    summarize_ablation, write_dataset, AblationConfig, AblationRow, Dataset, SplitMode, SyntheticTaskSpec,
};
use crate::model::{fit, parse_branches, Model, ModelSpec, TrainConfig};
use crate::modality::parse_modality_list;
use crate::skeleton::{parse_sequence, resample_temporal, SkeletonSequence};
use crate::stamp::{encode_deepacts, export_png, write_raw_file, EncodeConfig, NormScope};
use crate::Error;

pub const CHECKPOINT_FILE: &str = "model.dan";
pub const CONFIG_FILE: &str = "config.cfg";
pub const LOSS_FILE: &str = "loss.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const HEATMAP_FILE: &str = "confusion.png";
pub const REPORT_FILE: &str = "report.txt";
pub const ABLATION_FILE: &str = "ablation.csv";

/// Training share of the default split.
pub const TRAIN_RATIO: f64 = 2.0 / 3.0;

#[derive(Debug, Parser)]
#[command(name = "deepacts", version, about = "Multi-modal skeleton action stamps and DeepActsNet")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// `key = value` model and training configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed of data generation, splitting, initialization and shuffling.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated subset of body,hands,bones,face,flow.
    #[arg(long)]
    modalities: Option<String>,
    /// Comma-separated subset of cnn,graph.
    #[arg(long)]
    branches: Option<String>,
    /// Dataset directory; without it the default synthetic task is generated in memory.
    #[arg(long, env = "DEEPACTS_DATA")]
    data: Option<PathBuf>,
    /// Number of repetitions with consecutive seeds.
    #[arg(long, default_value_t = 1)]
    folds: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic task as a dataset directory.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "same_subject")]
        split: String,
        #[arg(long, default_value_t = TRAIN_RATIO)]
        ratio: f64,
        #[arg(long)]
        sequences_per_class: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Encode sequence files into raw stamp dumps.
    Encode {
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Also write PNG images.
        #[arg(long)]
        png: bool,
        /// Stamp side; defaults to the configured stamp size.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Train a model and write its checkpoint and loss log.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a trained model on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Directory holding `model.dan` and `config.cfg`; defaults to `--out`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train and evaluate the ablation rows.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Row letters to run, e.g. `ABCD`.
        #[arg(long, default_value = "ABCDEFGH")]
        rows: String,
    },
    /// Write the five stamps of one sequence as PNG images.
    ExportStamps {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        size: Option<usize>,
    },
    /// Run the finite-difference gradient suite.
    GradCheck {
        #[command(flatten)]
        common: Common,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Result<(), Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            return Err(Error::Usage(first));
        }
    };
    match cli.command {
        Command::Generate {
            common,
            split,
            ratio,
            sequences_per_class,
            noise,
        } => cmd_generate(&common, &split, ratio, sequences_per_class, noise),
        Command::Encode { inputs, common, png, size } => cmd_encode(&inputs, &common, png, size),
        Command::Train { common } => cmd_train(&common),
        Command::Eval { common, model } => cmd_eval(&common, model.as_deref()),
        Command::Ablate { common, rows } => cmd_ablate(&common, &rows),
        Command::ExportStamps { input, common, size } => cmd_export(&input, &common, size),
        Command::GradCheck { common } => cmd_gradcheck(&common),
    }
}

fn create_out(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Usage(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents).map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Model and training settings after the config file and command-line overrides.
fn settings(c: &Common) -> Result<(ModelSpec, TrainConfig), Error> {
    let (mut spec, mut train) = match &c.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Usage(format!("cannot read {}: {e}", p.display())))?;
            ModelSpec::parse_config(&text)?
        }
        None => (ModelSpec::default(), TrainConfig::default()),
    };
    if let Some(s) = c.seed {
        spec.init_seed = s;
        train.shuffle_seed = s;
    }
    if let Some(e) = c.epochs {
        train.epochs = e;
    }
    if let Some(m) = &c.modalities {
        spec.modalities = parse_modality_list(m).map_err(Error::Usage)?;
    }
    if let Some(b) = &c.branches {
        (spec.cnn_on, spec.graph_on) = parse_branches(b)?;
    }
    if c.threads == 0 {
        return Err(Error::Usage("--threads must be positive".into()));
    }
    if c.folds == 0 {
        return Err(Error::Usage("--folds must be positive".into()));
    }
    train.threads = c.threads;
    spec.validate()?;
    Ok((spec, train))
}

fn synthetic_spec(c: &Common) -> SyntheticTaskSpec {
    let mut s = SyntheticTaskSpec::default();
    if let Some(seed) = c.seed {
        s.seed = seed;
    }
    s
}

/// Train and test sets: the dataset directory's split, or the synthetic task split by `seed`.
fn load_data(c: &Common, seed: u64) -> Result<(Dataset, Dataset), Error> {
    match &c.data {
        Some(dir) => Ok(read_dataset(dir)?),
        None => {
            let mut s = synthetic_spec(c);
            s.seed = seed;
            let ds = Dataset::new(s.class_names(), generate_synthetic(&s)?)?;
            Ok(split_dataset(&ds, SplitMode::SameSubject, TRAIN_RATIO, seed)?)
        }
    }
}

/// Re-splits the union of a directory dataset for folds after the first.
fn fold_data(c: &Common, seed: u64, fold: usize) -> Result<(Dataset, Dataset), Error> {
    let (train, test) = load_data(c, seed)?;
    if fold == 0 || c.data.is_none() {
        return Ok((train, test));
    }
    let mut all = train;
    all.sequences.extend(test.sequences);
    Ok(split_dataset(&all, SplitMode::SameSubject, TRAIN_RATIO, seed)?)
}

fn cmd_generate(c: &Common, split: &str, ratio: f64, per_class: Option<usize>, noise: Option<f64>) -> Result<(), Error> {
    let mode: SplitMode = split.parse()?;
    let mut s = synthetic_spec(c);
    if let Some(n) = per_class {
        s.sequences_per_class = n;
    }
    if let Some(n) = noise {
        s.noise_sigma = n;
    }
    let seqs = generate_synthetic(&s)?;
    let ds = Dataset::new(s.class_names(), seqs)?;
    let (train, test) = split_dataset(&ds, mode, ratio, s.seed)?;
    write_dataset(&c.out, &train, &test)?;
    println!(
        "generated {} sequences ({} train, {} test) in {}",
        ds.len(),
        train.len(),
        test.len(),
        c.out.display()
    );
    Ok(())
}

fn read_sequence(path: &Path) -> Result<SkeletonSequence, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_sequence(&text)?)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sequence".into())
}

fn stamps_of(path: &Path, spec: &ModelSpec, size: Option<usize>) -> Result<crate::stamp::DeepActStamps, Error> {
    let seq = read_sequence(path)?;
    let seq = if seq.len() == spec.frames { seq } else { resample_temporal(&seq, spec.frames)? };
    let cfg = EncodeConfig {
        frames: spec.frames,
        stamp_size: size.unwrap_or(spec.stamp_size),
        scope: NormScope::PerSequence,
    };
    Ok(encode_deepacts(&seq, &cfg)?)
}

fn cmd_encode(inputs: &[PathBuf], c: &Common, png: bool, size: Option<usize>) -> Result<(), Error> {
    if inputs.is_empty() {
        return Err(Error::Usage("encode needs at least one sequence file".into()));
    }
    let (spec, _) = settings(c)?;
    create_out(&c.out)?;
    for input in inputs {
        let stamps = stamps_of(input, &spec, size)?;
        let name = stem(input);
        for st in stamps.iter() {
            write_raw_file(st, &c.out.join(format!("{name}.{}.das", st.modality)))?;
            if png {
                export_png(st, &c.out.join(format!("{name}.{}.png", st.modality)))?;
            }
        }
    }
    println!("encoded {} sequence(s) into {}", inputs.len(), c.out.display());
    Ok(())
}

fn cmd_export(input: &Path, c: &Common, size: Option<usize>) -> Result<(), Error> {
    let (spec, _) = settings(c)?;
    create_out(&c.out)?;
    let stamps = stamps_of(input, &spec, size)?;
    let name = stem(input);
    for st in stamps.iter() {
        export_png(st, &c.out.join(format!("{name}.{}.png", st.modality)))?;
    }
    println!("wrote 5 stamps of {} to {}", input.display(), c.out.display());
    Ok(())
}

/// `epoch,lr,loss,train_acc` rows with round-trip float formatting.
pub fn loss_csv(trace: &[crate::model::EpochMetrics]) -> String {
    let mut s = String::from("epoch,lr,loss,train_acc\n");
    for m in trace {
        let _ = writeln!(s, "{},{},{},{}", m.epoch, m.lr, m.mean_loss, m.accuracy);
    }
    s
}

fn train_one(c: &Common, spec: &ModelSpec, train_cfg: &TrainConfig, out: &Path, fold: usize) -> Result<f64, Error> {
    let split_seed = c.seed.unwrap_or(SyntheticTaskSpec::default().seed) + fold as u64;
    let (train, test) = fold_data(c, split_seed, fold)?;
    let mut spec = spec.clone();
    spec.num_classes = train.classes.len();
    spec.validate()?;
    for w in spec.warnings() {
        eprintln!("warning: {w}");
    }
    let train_samples = encode_samples(&train, &spec, c.threads)?;
    let test_samples = encode_samples(&test, &spec, c.threads)?;
    let mut model = Model::new(&spec)?;
    create_out(out)?;
    let trace = fit(&mut model, &train_samples, train_cfg, |m| {
        println!(
            "epoch {} lr {} loss {:.6} train_acc {:.4}",
            m.epoch, m.lr, m.mean_loss, m.accuracy
        )
    })?;
    write_file(&out.join(LOSS_FILE), &loss_csv(&trace))?;
    write_file(
        &out.join(CONFIG_FILE),
        &format!("{}{}", spec.canonical_text(), train_cfg.canonical_text()),
    )?;
    save_checkpoint(&out.join(CHECKPOINT_FILE), &Checkpoint::from_params(spec.config_hash(), &model.params))?;
    let acc = if test_samples.is_empty() {
        f64::NAN
    } else {
        let r = evaluate(&model, &train.classes, &test_samples, c.threads)?;
        println!("test_accuracy {:.4}", r.accuracy);
        r.accuracy
    };
    Ok(acc)
}

fn cmd_train(c: &Common) -> Result<(), Error> {
    let (spec, train_cfg) = settings(c)?;
    if c.folds == 1 {
        train_one(c, &spec, &train_cfg, &c.out, 0)?;
        return Ok(());
    }
    let mut csv = String::from("fold,test_accuracy\n");
    for fold in 0..c.folds {
        let acc = train_one(c, &spec, &train_cfg, &c.out.join(format!("fold{fold}")), fold)?;
        let _ = writeln!(csv, "{fold},{acc:.4}");
    }
    write_file(&c.out.join("folds.csv"), &csv)
}

fn cmd_eval(c: &Common, model_dir: Option<&Path>) -> Result<(), Error> {
    let dir = model_dir.unwrap_or(&c.out);
    let cfg_path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&cfg_path)
        .map_err(|e| Error::Usage(format!("cannot read {}: {e}", cfg_path.display())))?;
    let (spec, _) = ModelSpec::parse_config(&text)?;
    let ck = load_checkpoint(&dir.join(CHECKPOINT_FILE), Some(spec.config_hash()))?;
    let mut model = Model::new(&spec)?;
    ck.restore_into(&mut model.params)?;
    let seed = c.seed.unwrap_or(SyntheticTaskSpec::default().seed);
    let (_, test) = load_data(c, seed)?;
    if test.classes.len() != spec.num_classes {
        return Err(Error::Usage(format!(
            "dataset has {} classes, model was trained for {}",
            test.classes.len(),
            spec.num_classes
        )));
    }
    let samples = encode_samples(&test, &spec, c.threads)?;
    let report = evaluate(&model, &test.classes, &samples, c.threads)?;
    create_out(&c.out)?;
    write_file(&c.out.join(CONFUSION_FILE), &report.confusion_csv())?;
    write_file(&c.out.join(REPORT_FILE), &report.summary_text())?;
    report.write_heatmap_png(&c.out.join(HEATMAP_FILE))?;
    print!("{}", report.summary_text());
    Ok(())
}

fn cmd_ablate(c: &Common, rows: &str) -> Result<(), Error> {
    let (spec, train_cfg) = settings(c)?;
    let rows: Vec<AblationRow> = rows
        .chars()
        .filter(|ch| !ch.is_whitespace() && *ch != ',')
        .map(|ch| AblationRow::by_id(ch).ok_or_else(|| Error::Usage(format!("unknown ablation row `{ch}`"))))
        .collect::<Result<_, _>>()?;
    let seed = c.seed.unwrap_or(SyntheticTaskSpec::default().seed);
    let (train, test) = load_data(c, seed)?;
    let mut spec = spec;
    spec.num_classes = train.classes.len();
    let train_samples = encode_samples(&train, &spec, c.threads)?;
    let test_samples = encode_samples(&test, &spec, c.threads)?;
    let synth = synthetic_spec(c);
    let pair = match (synth.class_index("wave"), synth.class_index("finger-wiggle")) {
        (Some(a), Some(b)) if c.data.is_none() || train.classes == synth.class_names() => Some((a, b)),
        _ => None,
    };
    let acfg = AblationConfig {
        rows: rows.clone(),
        seeds: (0..c.folds.max(1) as u64).map(|i| seed + i).collect(),
        pair,
        threads: c.threads,
    };
    let results = run_ablation(&train_samples, &test_samples, &train.classes, &spec, &train_cfg, &acfg, |r| {
        println!("row {} seed {} accuracy {:.4}", r.row, r.seed, r.accuracy)
    })?;
    let summary = summarize_ablation(&rows, &results);
    create_out(&c.out)?;
    let csv = ablation_csv(&summary);
    write_file(&c.out.join(ABLATION_FILE), &csv)?;
    let mut text = String::new();
    for s in &summary {
        let _ = writeln!(text, "row {} {} mean_accuracy {:.4}", s.row.id, s.row.description, s.mean_accuracy);
    }
    write_file(&c.out.join(REPORT_FILE), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_gradcheck(c: &Common) -> Result<(), Error> {
    let seeds: Vec<u64> = match c.seed {
        Some(s) => (s..s + gradcheck::DEFAULT_SEEDS.len() as u64).collect(),
        None => gradcheck::DEFAULT_SEEDS.to_vec(),
    };
    let report = gradcheck::run_suite(&seeds)?;
    let text = gradcheck::format_report(&report);
    print!("{text}");
    if c.out != Path::new(".") {
        create_out(&c.out)?;
        write_file(&c.out.join("gradcheck.txt"), &text)?;
    }
    let failed: Vec<String> = report.iter().filter(|r| !r.passed()).map(|r| format!("{}:{}", r.op, r.operand)).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::GradCheck(format!("{} operand(s) failed: {}", failed.len(), failed.join(","))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ABLATION_ROWS;

    #[test]
    fn usage_errors_are_reported() {
        let e = run(["deepacts", "frobnicate"]).unwrap_err();
        assert_eq!(e.kind(), "usage");
        assert!(!e.one_line().contains('\n'));
        let e = run(["deepacts", "train", "--bogus"]).unwrap_err();
        assert_eq!(e.kind(), "usage");
    }

    #[test]
    fn help_is_not_an_error() {
        run(["deepacts", "--help"]).unwrap();
    }

    #[test]
    fn ablation_rows_are_known() {
        assert_eq!(ABLATION_ROWS.len(), 8);
        assert!(AblationRow::by_id('h').is_some());
        assert!(AblationRow::by_id('Z').is_none());
    }
}
