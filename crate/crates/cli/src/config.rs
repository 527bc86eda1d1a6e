//! Flag / config-file / default merging.
//!
//! The config file is flat UTF-8 `key = value`, one entry per line, `#`
//! starts a comment. Keys are the long flag names without dashes
//! (`batch-size` or `batch_size`).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use unet_core::data::SplitSpec;
use unet_core::model::{ModelKind, UNetConfig};
use unet_core::train::{OptimizerKind, TrainConfig};
use unet_core::{Error, Result};

pub const KEYS: [&str; 14] = [
    "manifest",
    "images",
    "model",
    "epochs",
    "batch-size",
    "lr",
    "optimizer",
    "seed",
    "threads",
    "base-filters",
    "input-size",
    "val-fraction",
    "checkpoint",
    "history-out",
];

pub const DEFAULT_CHECKPOINT: &str = "unet.ckpt";
pub const DEFAULT_HISTORY: &str = "history.csv";

/// Flags shared by every subcommand.
#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// Manifest CSV with `id_code,diagnosis` columns
    #[arg(long, value_name = "CSV")]
    pub manifest: Option<PathBuf>,
    /// Directory holding `<id_code>.png|jpg|jpeg` images
    #[arg(long, value_name = "DIR")]
    pub images: Option<PathBuf>,
    /// Architecture: unet or stacked_unet [default: unet]
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Training epochs [default: 10]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size for training and evaluation [default: 16]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Optimizer: sgd or adam [default: adam]
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    /// Seed for initialization, split and shuffling [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads [default: available cores]
    #[arg(long)]
    pub threads: Option<usize>,
    /// Filters of the first encoder block [default: 64]
    #[arg(long)]
    pub base_filters: Option<usize>,
    /// Square input side in pixels [default: 256]
    #[arg(long)]
    pub input_size: Option<usize>,
    /// Validation fraction of each grade [default: 0.2]
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// Checkpoint path written by train, read by evaluate/predict [default: unet.ckpt]
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// History CSV written by train [default: history.csv]
    #[arg(long, value_name = "PATH")]
    pub history_out: Option<PathBuf>,
    /// Flat `key = value` file supplying any of the above
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

/// Fully resolved settings.
#[derive(Clone, Debug)]
pub struct Settings {
    pub manifest: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub threads: Option<usize>,
    pub checkpoint: PathBuf,
    pub history_out: PathBuf,
}

impl Settings {
    pub fn manifest(&self) -> Result<&Path> {
        self.manifest.as_deref().ok_or_else(|| Error::Config("--manifest is required".into()))
    }

    pub fn images(&self) -> Result<&Path> {
        self.images.as_deref().ok_or_else(|| Error::Config("--images is required".into()))
    }
}

/// Parses a config document into `key -> (line, value)`.
pub fn parse_config(text: &str, origin: &Path) -> Result<BTreeMap<String, (usize, String)>> {
    let bad = |line: usize, m: String| Error::Config(format!("{}:{line}: {m}", origin.display()));
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(line_no, format!("expected `key = value`, got `{line}`")))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(bad(line_no, format!("unknown key `{}`", k.trim())));
        }
        let value = v.trim().trim_matches('"').to_string();
        if out.insert(key, (line_no, value)).is_some() {
            return Err(bad(line_no, format!("duplicate key `{}`", k.trim())));
        }
    }
    Ok(out)
}

struct FileValues {
    origin: PathBuf,
    values: BTreeMap<String, (usize, String)>,
}

impl FileValues {
    fn get<V: FromStr>(&self, key: &str) -> Result<Option<V>>
    where
        V::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, s)) => s.parse().map(Some).map_err(|e| {
                Error::Config(format!("{}:{line}: invalid value `{s}` for `{key}`: {e}", self.origin.display()))
            }),
        }
    }
}

fn pick<V: FromStr>(cli: Option<V>, file: &FileValues, key: &str) -> Result<Option<V>>
where
    V::Err: Display,
{
    match cli {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

/// Command line over config file over defaults; everything is validated.
pub fn resolve(args: &CommonArgs) -> Result<Settings> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            FileValues { values: parse_config(&text, path)?, origin: path.clone() }
        }
        None => FileValues { values: BTreeMap::new(), origin: PathBuf::new() },
    };
    let a = args.clone();
    let defaults = TrainConfig::default();
    let unet_default = UNetConfig::default();
    let input_size = pick(a.input_size, &file, "input-size")?.unwrap_or(unet_default.input_hw.0);
    let base_filters = pick(a.base_filters, &file, "base-filters")?.unwrap_or(unet_default.base_filters);
    let train = TrainConfig {
        epochs: pick(a.epochs, &file, "epochs")?.unwrap_or(defaults.epochs),
        batch_size: pick(a.batch_size, &file, "batch-size")?.unwrap_or(defaults.batch_size),
        optimizer: pick(a.optimizer, &file, "optimizer")?.unwrap_or(defaults.optimizer),
        learning_rate: pick(a.lr, &file, "lr")?.unwrap_or(defaults.learning_rate),
        seed: pick(a.seed, &file, "seed")?.unwrap_or(defaults.seed),
        model: pick(a.model, &file, "model")?.unwrap_or(defaults.model),
        unet: UNetConfig::scaled(input_size, base_filters),
        ..defaults
    };
    train.validate()?;
    let mut split = SplitSpec { seed: train.seed, ..SplitSpec::default() };
    if let Some(f) = pick(a.val_fraction, &file, "val-fraction")? {
        split.validation_fraction = f;
    }
    split.validate()?;
    let threads = pick(a.threads, &file, "threads")?;
    if threads == Some(0) {
        return Err(Error::Config("threads must be >= 1".into()));
    }
    Ok(Settings {
        manifest: pick(a.manifest, &file, "manifest")?,
        images: pick(a.images, &file, "images")?,
        train,
        split,
        threads,
        checkpoint: pick(a.checkpoint, &file, "checkpoint")?.unwrap_or_else(|| DEFAULT_CHECKPOINT.into()),
        history_out: pick(a.history_out, &file, "history-out")?.unwrap_or_else(|| DEFAULT_HISTORY.into()),
    })
}
