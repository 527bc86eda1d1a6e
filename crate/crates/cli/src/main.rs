//! `unet` command-line tool: train, evaluate, predict, summary.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use unet_core::data::{load_image, read_manifest, split, Dataset, DiagnosisGrade, IMAGE_EXTENSIONS};
use unet_core::model::{load_checkpoint, save_checkpoint, write_atomic, Architecture};
use unet_core::train::{
    evaluate, export_history, format_table, ovr_auc_per_class, per_class_scores, summary_table, Evaluation, Trainer,
};
use unet_core::{Error, Result, Tensor, UNet32};

use config::{resolve, CommonArgs, Settings};

#[derive(Parser, Debug)]
#[command(name = "unet", version, about = "UNET / stacked-UNET retinopathy grade classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split the manifest, train, and write checkpoint + history CSV
    Train(CommonArgs),
    /// Score a checkpoint on one split of the manifest
    Evaluate(EvaluateArgs),
    /// Grade individual images or directories of images
    Predict(PredictArgs),
    /// Print the shape ledger and parameter counts of the configured model
    Summary(CommonArgs),
}

#[derive(clap::Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which side of the seeded split to score
    #[arg(long, value_enum, default_value_t = SplitChoice::Validation)]
    split: SplitChoice,
    /// Also write per-class scores plus a macro row to this CSV
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Image files or directories (directories are read in filename order)
    #[arg(required = true, value_name = "PATH")]
    paths: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SplitChoice {
    /// Training side, including horizontal-flip copies
    Train,
    Validation,
}

/// Exit codes: 2 config, 3 data/checkpoint, 4 numerical abort, 5 nothing predicted.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Numerical(_) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => with_settings(&a, cmd_train),
        Command::Evaluate(a) => with_settings(&a.common, |s| cmd_evaluate(s, a.split, a.csv.as_deref())),
        Command::Predict(a) => with_settings(&a.common, |s| cmd_predict(s, &a.paths)),
        Command::Summary(a) => with_settings(&a, cmd_summary),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn with_settings(args: &CommonArgs, f: impl FnOnce(&Settings) -> Result<u8>) -> Result<u8> {
    let s = resolve(args)?;
    if let Some(n) = s.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    f(&s)
}

/// Train split (with flips) and validation split of the configured manifest.
fn load_splits(s: &Settings) -> Result<(Dataset, Dataset)> {
    let manifest = read_manifest(s.manifest()?, s.images()?)?;
    let (train_ids, val_ids) = split(&manifest, &s.split)?;
    let size = s.train.unet.input_hw.0;
    let train = Dataset::load(&manifest, &train_ids, size)?.with_hflips();
    let val = Dataset::load(&manifest, &val_ids, size)?;
    Ok((train, val))
}

fn load_model(s: &Settings) -> Result<UNet32> {
    load_checkpoint(&s.checkpoint, s.train.model, &s.train.unet)
}

fn cmd_summary(s: &Settings) -> Result<u8> {
    let arch = Architecture::new(s.train.model, &s.train.unet)?;
    println!("{} ({} bottleneck(s), {} head)", arch.kind().display_name(), arch.bottleneck_count(), arch.head_count());
    println!("{}", arch.ledger());
    Ok(0)
}

fn cmd_train(s: &Settings) -> Result<u8> {
    let cfg = &s.train;
    // Fail on unusable output locations before any work is done.
    for p in [&s.checkpoint, &s.history_out] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            if !dir.is_dir() {
                return Err(Error::Config(format!("output directory {} does not exist", dir.display())));
            }
        }
    }
    let (train, val) = load_splits(s)?;
    cmd_summary(s)?;
    println!("train samples {} (with flips), validation samples {}", train.len(), val.len());

    let mut trainer = Trainer::new(cfg.build_model::<f32>()?, cfg.clone())?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let e = trainer.run_epoch(&train, &val)?;
        println!(
            "epoch {:>4}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
            e.epoch, e.train.loss, e.train.accuracy, e.validation.loss, e.validation.accuracy
        );
        history.push(e);
    }
    let model = trainer.into_model();
    save_checkpoint(&model, &s.checkpoint)?;
    if let Some(last) = history.last() {
        export_history(&history, &s.history_out)?;
        print!("{}", summary_table(&[(cfg.model, last)]));
    }
    Ok(0)
}

fn cmd_evaluate(s: &Settings, which: SplitChoice, csv: Option<&Path>) -> Result<u8> {
    let model = load_model(s)?;
    let (train, val) = load_splits(s)?;
    let (data, label) = match which {
        SplitChoice::Train => (&train, "Training"),
        SplitChoice::Validation => (&val, "Validation"),
    };
    let ev = evaluate(&model, data, s.train.batch_size)?;
    print!("{}", format_table(&[(s.train.model.display_name(), label, &ev.metrics)]));
    let m = &ev.metrics;
    println!(
        "metrics loss={:.6} accuracy={:.6} auc={:.6} precision={:.6} recall={:.6} f1={:.6}",
        m.loss, m.accuracy, m.auc, m.precision, m.recall, m.f1
    );
    println!("{}", ev.confusion);
    if let Some(path) = csv {
        write_class_csv(&ev, path)?;
    }
    Ok(0)
}

/// `class,support,precision,recall,f1,auc`; classes excluded from the macro
/// averages have empty cells.
fn class_csv(ev: &Evaluation) -> Result<String> {
    let classes = ev.confusion.classes();
    let scores = per_class_scores(&ev.confusion);
    let aucs = ovr_auc_per_class(&ev.probabilities, classes, &ev.labels)?;
    let cell = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
    let mut out = String::from("class,support,precision,recall,f1,auc\n");
    for c in 0..classes {
        let sc = scores[c];
        let _ = writeln!(
            out,
            "{c},{},{},{},{},{}",
            ev.confusion.row_sum(c),
            cell(sc.map(|x| x.precision)),
            cell(sc.map(|x| x.recall)),
            cell(sc.map(|x| x.f1)),
            cell(aucs[c])
        );
    }
    let m = &ev.metrics;
    let _ = writeln!(
        out,
        "macro,{},{:.6},{:.6},{:.6},{:.6}",
        ev.confusion.total(),
        m.precision,
        m.recall,
        m.f1,
        m.auc
    );
    Ok(out)
}

fn write_class_csv(ev: &Evaluation, path: &Path) -> Result<()> {
    write_atomic(path, class_csv(ev)?.as_bytes())
}

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Expands directories into their image files, sorted by file name.
fn expand_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            files.retain(|f| f.is_file() && is_image(f));
            files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn cmd_predict(s: &Settings, paths: &[PathBuf]) -> Result<u8> {
    let model = load_model(s)?;
    let files = expand_paths(paths)?;
    let size = s.train.unet.input_hw.0;
    let mut ok = 0;
    for path in &files {
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let result = load_image(path, size).and_then(|px| {
            let x = Tensor::from_vec(&[1, size, size, 1], px.into_vec())?;
            let logits = model.infer(&x)?;
            Ok(unet_core::ops::softmax(&logits)?.into_vec())
        });
        match result {
            Ok(probs) => {
                let grade = unet_core::train::argmax(&probs);
                let grade = DiagnosisGrade::new(grade as u8)?;
                let mut line = format!("{id} {}", grade.value());
                for p in &probs {
                    let _ = write!(line, " {p:.6}");
                }
                println!("{line}");
                ok += 1;
            }
            Err(e) => eprintln!("error: {}: {e}", path.display()),
        }
    }
    Ok(if ok == 0 { 5 } else { 0 })
}
