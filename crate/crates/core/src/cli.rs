//! Command-line front end: experiment config files, subcommand dispatch and
//! line-delimited JSON metrics.
//!
//! Exit codes: 0 on success, 1 on a domain or configuration error, 2 on a
//! usage error. Every config field can also be set by flag; flags win. The
//! output directory resolves as `--out`, then `$SUVR_METRICS_DIR`, then
//! `output.dir` from the config.

use std::ffi::OsString;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bank::MemoryBank;
use crate::data::{self, BlobSpec, LabeledDataset};
use crate::encoder::MlpEncoder;
use crate::error::{Result, SuvrError};
use crate::eval::{self, AblationCell, AblationGrid, EvalConfig};
use crate::neighbors::{self, Strategy, TraceRecord};
use crate::optim::OptimizerState;
use crate::train::{self, EpochRecord, LossTerms, ResetPolicy, TrainConfig};

pub const METRICS_DIR_ENV: &str = "SUVR_METRICS_DIR";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const ABLATION_FILE: &str = "ablation.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const BANK_FILE: &str = "bank.emb";
const CHECKPOINT_FORMAT: &str = "suvr-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobSource {
    pub num_classes: usize,
    pub per_class: usize,
    pub d_in: usize,
    pub center_radius: f64,
    pub noise_sigma: f64,
    /// Defaults to the experiment seed.
    pub seed: Option<u64>,
    /// Size of the held-out test draw, per class.
    pub test_per_class: usize,
}

impl Default for BlobSource {
    fn default() -> Self {
        let spec = BlobSpec::default();
        BlobSource {
            num_classes: spec.num_classes,
            per_class: spec.per_class,
            d_in: spec.d_in,
            center_radius: spec.center_radius,
            noise_sigma: spec.noise_sigma,
            seed: None,
            test_per_class: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default)]
    pub has_header: bool,
    /// 0-based column holding class labels.
    #[serde(default)]
    pub label_column: Option<usize>,
    #[serde(default)]
    pub test_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdxSource {
    pub images: PathBuf,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub test_images: Option<PathBuf>,
    #[serde(default)]
    pub test_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    Blobs(BlobSource),
    Csv(CsvSource),
    Idx(IdxSource),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Blobs(BlobSource::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Include per-epoch wall time in the metrics file. Off by default so
    /// that repeated runs produce identical files.
    pub record_timing: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("runs/default"),
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub strategies: Vec<Strategy>,
    pub ks: Vec<usize>,
    pub resets: Vec<ResetPolicy>,
    pub seeds: Vec<u64>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        let grid = AblationGrid::default();
        AblateConfig {
            strategies: grid.strategies,
            ks: grid.ks,
            resets: grid.resets,
            seeds: (0..5).collect(),
        }
    }
}

/// Everything one experiment needs, as read from a TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Overrides `train.seed` and seeds blob generation when set.
    pub seed: Option<u64>,
    pub dataset: DatasetSource,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub output: OutputConfig,
    pub ablate: AblateConfig,
}

impl ExperimentConfig {
    /// Parses TOML; relative dataset paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| SuvrError::config("config", e.to_string().trim().to_string()))?;
        cfg.rebase_paths(base_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| SuvrError::io(path, e))?;
        ExperimentConfig::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn rebase_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetSource::Blobs(_) => {}
            DatasetSource::Csv(c) => {
                fix(&mut c.path);
                c.test_path.iter_mut().for_each(fix);
            }
            DatasetSource::Idx(i) => {
                fix(&mut i.images);
                i.labels.iter_mut().for_each(fix);
                i.test_images.iter_mut().for_each(fix);
                i.test_labels.iter_mut().for_each(fix);
            }
        }
    }

    /// Folds the top-level seed into the train and blob sections, then
    /// validates. Idempotent.
    pub fn resolve(mut self) -> Result<Self> {
        if let Some(seed) = self.seed {
            self.train.seed = seed;
        }
        self.seed = Some(self.train.seed);
        if let DatasetSource::Blobs(b) = &mut self.dataset {
            b.seed.get_or_insert(self.train.seed);
        }
        self.train.validate()?;
        self.eval.validate()?;
        if let DatasetSource::Blobs(b) = &self.dataset {
            blob_spec(b).validate()?;
        }
        Ok(self)
    }

    /// Loads the training set and, when the source provides one, a test set.
    pub fn load_datasets(&self) -> Result<(LabeledDataset, Option<LabeledDataset>)> {
        match &self.dataset {
            DatasetSource::Blobs(b) => {
                let (train, test) = data::make_blob_split(&blob_spec(b), b.test_per_class)?;
                Ok((train, Some(test)))
            }
            DatasetSource::Csv(c) => {
                let train = data::load_csv(&c.path, c.has_header, c.label_column)?;
                let test = match &c.test_path {
                    Some(p) => Some(data::load_csv(p, c.has_header, c.label_column)?),
                    None => None,
                };
                Ok((train, test))
            }
            DatasetSource::Idx(i) => {
                let train = data::load_idx(&i.images, i.labels.as_deref())?;
                let test = match &i.test_images {
                    Some(p) => Some(data::load_idx(p, i.test_labels.as_deref())?),
                    None => None,
                };
                Ok((train, test))
            }
        }
    }
}

fn blob_spec(b: &BlobSource) -> BlobSpec {
    BlobSpec {
        num_classes: b.num_classes,
        per_class: b.per_class,
        d_in: b.d_in,
        center_radius: b.center_radius,
        noise_sigma: b.noise_sigma,
        seed: b.seed.unwrap_or(0),
    }
}

/// One line of a metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum MetricsRecord {
    Config {
        config: Box<ExperimentConfig>,
    },
    Epoch {
        epoch: usize,
        lr: f64,
        loss: LossTerms,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wall_time_secs: Option<f64>,
    },
    Summary {
        epochs: usize,
        final_loss: Option<f64>,
        test_accuracy: Option<f64>,
        k_eval: usize,
    },
    AblationCell(AblationCell),
}

impl MetricsRecord {
    pub fn epoch(r: &EpochRecord, with_timing: bool) -> Self {
        MetricsRecord::Epoch {
            epoch: r.epoch,
            lr: r.lr,
            loss: r.loss,
            wall_time_secs: with_timing.then_some(r.wall_time_secs),
        }
    }
}

/// Appends whole records to a metrics file, one JSON object per line. Each
/// record goes out in a single write, so an interrupted run never leaves a
/// partial line behind.
pub struct MetricsWriter {
    path: PathBuf,
    file: File,
}

impl MetricsWriter {
    /// Truncates `path` and opens it for appending.
    pub fn create(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        File::create(&path).map_err(|e| SuvrError::io(&path, e))?;
        let file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| SuvrError::io(&path, e))?;
        Ok(MetricsWriter { path, file })
    }

    pub fn emit(&mut self, record: &MetricsRecord) -> Result<()> {
        let mut line = serde_json::to_string(record).expect("metrics records always serialize");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| SuvrError::io(&self.path, e))
    }
}

/// Writes `records` to a fresh metrics file.
pub fn emit_metrics<'a>(records: impl IntoIterator<Item = &'a MetricsRecord>, path: impl Into<PathBuf>) -> Result<()> {
    let mut w = MetricsWriter::create(path)?;
    for r in records {
        w.emit(r)?;
    }
    Ok(())
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| SuvrError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SuvrError::io(path, e))?;
        out.push(serde_json::from_str(&line).map_err(|e| SuvrError::Parse {
            path: path.into(),
            row: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Self-contained training snapshot: resolved config, encoder, bank and
/// optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ExperimentConfig,
    pub encoder: MlpEncoder,
    pub bank: MemoryBank,
    pub optimizer: OptimizerState,
}

impl Checkpoint {
    pub fn new(config: ExperimentConfig, encoder: MlpEncoder, bank: MemoryBank, optimizer: OptimizerState) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config,
            encoder,
            bank,
            optimizer,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("checkpoints always serialize");
        fs::write(path, text).map_err(|e| SuvrError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| SuvrError::io(path, e))?;
        let ck: Checkpoint =
            serde_json::from_str(&text).map_err(|e| SuvrError::format(path, format!("not a checkpoint: {e}")))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(SuvrError::format(
                path,
                format!("unsupported checkpoint {} v{}", ck.format, ck.version),
            ));
        }
        Ok(ck)
    }
}

#[derive(Debug, Parser)]
#[command(name = "suvr", version, about = "Search-based unsupervised embedding learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an encoder and memory bank; writes metrics, checkpoint and bank snapshot.
    Train(ConfigArgs),
    /// Re-evaluate a checkpoint's kNN accuracy on its test set.
    Eval(EvalArgs),
    /// Grid over strategies, neighbor sizes and reset policies.
    Ablate(AblateArgs),
    /// Dump embeddings in the plain-text export format.
    Export(ExportArgs),
    /// Emit discovered neighbor sets for chosen queries as JSON lines.
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Experiment TOML file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    extra_negatives: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    nesterov_mu: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    reset: Option<ResetPolicy>,
    #[arg(long)]
    warmup_epochs: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    k_eval: Option<usize>,
    /// Output directory (overrides $SUVR_METRICS_DIR and output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    record_timing: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        let t = &mut cfg.train;
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { t.$field = v; })*
            };
        }
        set!(strategy => strategy, k => k, m => m, extra_negatives => extra_negatives, tau => tau,
             epochs => epochs, batch_size => batch_size, lr => base_lr, nesterov_mu => nesterov_mu,
             momentum => momentum, reset => reset_policy, warmup_epochs => warmup_epochs,
             embed_dim => embed_dim);
        if let Some(k) = self.k_eval {
            cfg.eval.k_eval = k;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        } else if let Some(dir) = std::env::var_os(METRICS_DIR_ENV) {
            cfg.output.dir = PathBuf::from(dir);
        }
        if self.record_timing {
            cfg.output.record_timing = true;
        }
        cfg.resolve()
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    k_eval: Option<usize>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    base: ConfigArgs,
    /// Comma-separated, e.g. bfs,dfs,greedy.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<Strategy>>,
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    resets: Option<Vec<ResetPolicy>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ExportSource {
    Bank,
    Encoder,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Bank rows, or the encoder applied to the training features.
    #[arg(long, value_enum, default_value = "bank")]
    source: ExportSource,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Comma-separated query indices.
    #[arg(long, value_delimiter = ',', required = true)]
    queries: Vec<usize>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the subcommand, and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Ablate(args) => cmd_ablate(&args),
        Command::Export(args) => cmd_export(&args),
        Command::Trace(args) => cmd_trace(&args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SuvrError::io(dir, e))
}

fn test_accuracy(
    encoder: &MlpEncoder,
    bank: &MemoryBank,
    train: &LabeledDataset,
    test: Option<&LabeledDataset>,
    eval_cfg: &EvalConfig,
) -> Result<Option<f64>> {
    match (train.labels(), test) {
        (Some(labels), Some(test)) if test.labels().is_some() => {
            eval::evaluate(encoder, bank.embeddings(), labels, test, eval_cfg).map(Some)
        }
        _ => Ok(None),
    }
}

fn cmd_train(args: &ConfigArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let (train_set, test_set) = cfg.load_datasets()?;
    cfg.train.validate_for(train_set.len())?;
    let dir = cfg.output.dir.clone();
    prepare_dir(&dir)?;
    let mut metrics = MetricsWriter::create(dir.join(METRICS_FILE))?;
    metrics.emit(&MetricsRecord::Config {
        config: Box::new(cfg.clone()),
    })?;
    let timing = cfg.output.record_timing;
    let out = train::fit_with(train_set.features(), &cfg.train, |r| {
        metrics.emit(&MetricsRecord::epoch(r, timing))
    })?;
    let (encoder, bank, optimizer) = out.trainer.into_parts();
    let accuracy = test_accuracy(&encoder, &bank, &train_set, test_set.as_ref(), &cfg.eval)?;
    metrics.emit(&MetricsRecord::Summary {
        epochs: out.history.epochs.len(),
        final_loss: out.history.epochs.last().map(|e| e.loss.total),
        test_accuracy: accuracy,
        k_eval: cfg.eval.k_eval,
    })?;
    data::export_embeddings(bank.embeddings(), train_set.labels(), dir.join(BANK_FILE))?;
    Checkpoint::new(cfg, encoder, bank, optimizer).save(&dir.join(CHECKPOINT_FILE))?;
    match accuracy {
        Some(a) => println!("trained {} epochs; test accuracy {a}", out.history.epochs.len()),
        None => println!("trained {} epochs", out.history.epochs.len()),
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let mut eval_cfg = ck.config.eval.clone();
    if let Some(k) = args.k_eval {
        eval_cfg.k_eval = k;
    }
    let (train_set, test_set) = ck.config.load_datasets()?;
    if train_set.len() != ck.bank.len() {
        return Err(SuvrError::DimensionMismatch {
            expected: ck.bank.len(),
            found: train_set.len(),
        });
    }
    let accuracy = test_accuracy(&ck.encoder, &ck.bank, &train_set, test_set.as_ref(), &eval_cfg)?
        .ok_or_else(|| SuvrError::InvalidArgument("checkpoint's dataset has no labeled test set".into()))?;
    println!(
        "{}",
        serde_json::json!({ "accuracy": accuracy, "k_eval": eval_cfg.k_eval, "test_instances": test_set.map_or(0, |t| t.len()) })
    );
    Ok(())
}

fn cmd_ablate(args: &AblateArgs) -> Result<()> {
    let mut cfg = args.base.resolve()?;
    if let Some(s) = &args.strategies {
        cfg.ablate.strategies = s.clone();
    }
    if let Some(k) = &args.ks {
        cfg.ablate.ks = k.clone();
    }
    if let Some(r) = &args.resets {
        cfg.ablate.resets = r.clone();
    }
    if let Some(s) = &args.seeds {
        cfg.ablate.seeds = s.clone();
    }
    let (train_set, test_set) = cfg.load_datasets()?;
    let test_set = test_set.ok_or_else(|| SuvrError::config("dataset", "ablation needs a labeled test set"))?;
    let grid = AblationGrid {
        strategies: cfg.ablate.strategies.clone(),
        ks: cfg.ablate.ks.clone(),
        resets: cfg.ablate.resets.clone(),
    };
    for &k in &grid.ks {
        let probe = TrainConfig {
            k,
            m: eval::cell_negatives(cfg.train.m, k),
            ..cfg.train.clone()
        };
        probe.validate_for(train_set.len())?;
    }
    let dir = cfg.output.dir.clone();
    prepare_dir(&dir)?;
    let cells = eval::ablate(&train_set, &test_set, &cfg.train, &cfg.eval, &grid, &cfg.ablate.seeds)?;
    let mut records = vec![MetricsRecord::Config {
        config: Box::new(cfg.clone()),
    }];
    records.extend(cells.iter().cloned().map(MetricsRecord::AblationCell));
    emit_metrics(&records, dir.join(ABLATION_FILE))?;
    println!("{:<8} {:>3} {:>3} {:<12} {:>8} {:>8}", "strategy", "k", "m", "reset", "mean", "std");
    for c in &cells {
        println!(
            "{:<8} {:>3} {:>3} {:<12} {:>8.4} {:>8.4}",
            c.strategy,
            c.k,
            c.m,
            c.reset_policy,
            c.mean,
            c.std
        );
    }
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> Result<()> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let (train_set, _) = ck.config.load_datasets()?;
    let embeddings = match args.source {
        ExportSource::Bank => ck.bank.embeddings().clone(),
        ExportSource::Encoder => ck.encoder.embed_all(train_set.features())?,
    };
    data::export_embeddings(&embeddings, train_set.labels(), &args.out)
}

fn cmd_trace(args: &TraceArgs) -> Result<()> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let strategy = args.strategy.unwrap_or(ck.config.train.strategy);
    let k = args.k.unwrap_or(ck.config.train.k);
    let m = args.m.unwrap_or(if args.k.is_some() {
        eval::cell_negatives(ck.config.train.m, k)
    } else {
        ck.config.train.m
    });
    let mut text = String::new();
    for &q in &args.queries {
        let set = neighbors::discover(&ck.bank, q, strategy, k, m)?;
        let line = serde_json::to_string(&TraceRecord { strategy, k, m, set }).expect("trace records serialize");
        text.push_str(&line);
        text.push('\n');
    }
    match &args.out {
        Some(p) => fs::write(p, text).map_err(|e| SuvrError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_sections_parse_with_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            seed = 3
            [dataset]
            source = "blobs"
            per_class = 20
            [train]
            strategy = "dfs"
            reset_policy = "never"
            "#,
            Path::new("."),
        )
        .unwrap()
        .resolve()
        .unwrap();
        assert_eq!(cfg.train.strategy, Strategy::Dfs);
        assert_eq!(cfg.train.reset_policy, ResetPolicy::Never);
        assert_eq!(cfg.train.k, 4);
        assert_eq!(cfg.train.seed, 3);
        match &cfg.dataset {
            DatasetSource::Blobs(b) => {
                assert_eq!(b.per_class, 20);
                assert_eq!(b.seed, Some(3));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.clone().resolve().unwrap(), cfg);
    }

    #[test]
    fn csv_paths_rebase_on_config_dir() {
        let cfg = ExperimentConfig::from_toml(
            "[dataset]\nsource = \"csv\"\npath = \"data/x.csv\"\nlabel_column = 2\n",
            Path::new("/tmp/exp"),
        )
        .unwrap();
        match cfg.dataset {
            DatasetSource::Csv(c) => {
                assert_eq!(c.path, PathBuf::from("/tmp/exp/data/x.csv"));
                assert_eq!(c.label_column, Some(2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err = ExperimentConfig::from_toml("[train]\nk = 0\n", Path::new("."))
            .unwrap()
            .resolve()
            .unwrap_err();
        assert!(err.to_string().contains("train.k"), "{err}");
        let err = ExperimentConfig::from_toml("[train]\nbogus = 1\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn metrics_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        let records = vec![
            MetricsRecord::Config {
                config: Box::default(),
            },
            MetricsRecord::Epoch {
                epoch: 1,
                lr: 0.03,
                loss: LossTerms {
                    instance: 5.123456789012345,
                    positive: 1.0 / 3.0,
                    negative: 1e-17,
                    total: std::f64::consts::PI,
                },
                wall_time_secs: None,
            },
            MetricsRecord::Summary {
                epochs: 1,
                final_loss: Some(0.1 + 0.2),
                test_accuracy: None,
                k_eval: 5,
            },
        ];
        emit_metrics(&records, &p).unwrap();
        assert_eq!(read_metrics(&p).unwrap(), records);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.ends_with('\n'));
        assert_eq!(text.lines().count(), 3);
    }
}
