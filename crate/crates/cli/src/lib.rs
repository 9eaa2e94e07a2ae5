//! The `psyling` command line.
//!
//! Data goes to stdout (or to `--out`), diagnostics to stderr. Exit codes:
//! 0 on success, 1 on a domain error (reported as a JSON object on stderr),
//! 2 on a usage error.

pub mod config;
pub mod manifest;
pub mod pipeline;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use psyling::adapt::{association, parse_conversations_jsonl, Adapter, Lexicons};
use psyling::agreement::perfect_agreement;
use psyling::bundle::ModelBundle;
use psyling::corpus::{
    derive_gold, generate_synthetic, labeled_from_jsonl, parse_gold_jsonl, Corpus, DatasetPartition, GoldInstance, GoldPolicy,
    ImportOptions, LabeledText, PartitionName,
};
use psyling::evaluate::{calibration_report, error_slices, Band, DEFAULT_LENGTH_THRESHOLD};
use psyling::model::{train_model, ModelKind, TextClassifier, TrainedModel};
use psyling::{ByCharacteristic, Characteristic};
use serde::Serialize;

use config::CliConfig;
use manifest::{manifest_path, Recorder};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain { kind: String, message: String },
}

impl CliError {
    pub fn domain(kind: &str, message: impl Into<String>) -> Self {
        CliError::Domain {
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::domain("io", format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain { .. } => 1,
        }
    }
}

impl From<psyling::Error> for CliError {
    fn from(e: psyling::Error) -> Self {
        Self::domain(e.kind(), e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "psyling",
    version,
    about = "Psycholinguistic profiling: corpora, agreement, classifiers, evaluation and adaptation"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random step (overrides `seed` in the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file or directory. Without it, data goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a corpus file and write it in canonical form.
    Import {
        #[arg(long)]
        input: PathBuf,
        /// Accept records without votes (annotation queues).
        #[arg(long)]
        allow_unannotated: bool,
    },
    /// Keep one utterance per author.
    Dedupe {
        #[arg(long)]
        input: PathBuf,
    },
    /// Resolve gold labels.
    Gold {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "perfect")]
        policy: GoldPolicy,
    },
    /// Stratified train/test split for one characteristic; writes
    /// `train.jsonl` and `test.jsonl` into `--out`.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        task: Characteristic,
        #[arg(long)]
        test_size: usize,
        #[arg(long, default_value = "perfect")]
        policy: GoldPolicy,
    },
    /// Perfect-agreement report.
    Agreement {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Train a model; `--task all` writes a five-model bundle directory.
    Train {
        #[arg(long)]
        task: String,
        #[arg(long)]
        model: ModelKind,
        /// Corpus or gold JSONL.
        #[arg(long)]
        train: PathBuf,
        #[arg(long, default_value = "perfect")]
        policy: GoldPolicy,
    },
    /// Score a model on a labelled file.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value = "perfect")]
        policy: GoldPolicy,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Learning curve as `size,f1,seed` CSV.
    Curve {
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        task: Characteristic,
        /// Comma-separated, strictly increasing training sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Training pool (corpus or gold JSONL). Omit to use a synthetic corpus.
        #[arg(long, requires = "test")]
        train: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, default_value_t = 0.7)]
        marker_strength: f64,
        #[arg(long, default_value_t = 1000)]
        test_size: usize,
        #[arg(long, default_value = "perfect")]
        policy: GoldPolicy,
    },
    /// Probability-band table by difficulty and gold class, plus error
    /// slices by length.
    Calibrate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value = "perfect")]
        policy: GoldPolicy,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Replay conversations through the adaptation engine.
    Adapt {
        /// Model bundle directory.
        #[arg(long)]
        models: PathBuf,
        /// One conversation JSON per line.
        #[arg(long)]
        conversations: PathBuf,
        #[arg(long)]
        lexicons: Option<PathBuf>,
        #[arg(long, default_value_t = psyling::adapt::DEFAULT_CONCISE_WORDS)]
        concise_words: usize,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<std::net::SocketAddr>,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        lexicons: Option<PathBuf>,
        #[arg(long)]
        max_body_bytes: Option<usize>,
        #[arg(long)]
        request_timeout_ms: Option<u64>,
        /// Seed the store's annotation queue from this corpus file.
        #[arg(long, requires = "store")]
        init_queue: Option<PathBuf>,
    },
    /// Generate a synthetic labelled corpus.
    Synth {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        marker_strength: f64,
    },
    /// End to end on synthetic data: comparison grid and learning curves.
    Demo {
        #[arg(long)]
        n: Option<usize>,
    },
}

struct Ctx<'a> {
    stdout: &'a mut dyn Write,
    argv: Vec<String>,
    config: CliConfig,
    seed: u64,
    out: Option<PathBuf>,
    rec: Recorder,
}

impl Ctx<'_> {
    fn emit(&mut self, data: &[u8]) -> CliResult {
        match self.out.clone() {
            Some(path) => self.rec.write(&path, data),
            None => self.print(data),
        }
    }

    fn print(&mut self, data: &[u8]) -> CliResult {
        match self.stdout.write_all(data) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::domain("io", e.to_string())),
            _ => Ok(()),
        }
    }

    fn require_out(&self, what: &str) -> CliResult<PathBuf> {
        self.out.clone().ok_or_else(|| CliError::Usage(format!("{what} needs --out")))
    }

    fn model_config(&self) -> psyling::model::ModelConfig {
        self.config.model.clone().with_seed(self.seed)
    }

    fn finish(self, dir_output: bool) -> CliResult {
        let Some(out) = &self.out else {
            return Ok(());
        };
        let config = serde_json::to_value(&self.config).expect("config serializes");
        self.rec.finish(&manifest_path(out, dir_output), self.argv, config, self.seed)
    }
}

fn json_line<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn gold_jsonl(gold: &[GoldInstance]) -> String {
    gold.iter()
        .map(|g| serde_json::to_string(g).expect("gold serializes") + "\n")
        .collect()
}

fn read_corpus(ctx: &mut Ctx, path: &Path, options: ImportOptions) -> CliResult<Corpus> {
    let text = ctx.rec.read_string(path)?;
    Ok(Corpus::parse_jsonl_with(&text, options)?)
}

fn read_labeled(ctx: &mut Ctx, path: &Path, task: Characteristic, policy: GoldPolicy) -> CliResult<Vec<LabeledText>> {
    let text = ctx.rec.read_string(path)?;
    Ok(labeled_from_jsonl(&text, task, policy)?)
}

fn read_gold(ctx: &mut Ctx, path: &Path, policy: GoldPolicy) -> CliResult<Vec<GoldInstance>> {
    let text = ctx.rec.read_string(path)?;
    let is_corpus = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| serde_json::from_str::<serde_json::Value>(l).ok())
        .is_some_and(|v| v.get("votes").is_some());
    if is_corpus {
        Ok(derive_gold(&Corpus::parse_jsonl(&text)?, policy)?)
    } else {
        Ok(parse_gold_jsonl(&text)?)
    }
}

fn load_model(ctx: &mut Ctx, path: &Path) -> CliResult<TrainedModel> {
    Ok(TrainedModel::from_bytes(&ctx.rec.read(path)?)?)
}

#[derive(Serialize)]
struct CalibrateOutput {
    task: Characteristic,
    calibration: psyling::evaluate::CalibrationReport,
    slices: psyling::evaluate::SliceTable,
}

#[derive(Serialize)]
struct AdaptOutput {
    conversations: Vec<psyling::adapt::ConversationReport>,
    association: Option<psyling::adapt::Association>,
    association_error: Option<String>,
}

fn execute(command: Command, ctx: &mut Ctx) -> CliResult<bool> {
    let mut dir_output = false;
    match command {
        Command::Import { input, allow_unannotated } => {
            let corpus = read_corpus(ctx, &input, ImportOptions { allow_unannotated })?;
            log::info!("{} records", corpus.len());
            ctx.emit(corpus.to_jsonl().as_bytes())?;
        }
        Command::Dedupe { input } => {
            let corpus = read_corpus(ctx, &input, ImportOptions { allow_unannotated: true })?;
            let kept = corpus.dedupe_by_author();
            log::info!("kept {} of {} records", kept.len(), corpus.len());
            ctx.emit(kept.to_jsonl().as_bytes())?;
        }
        Command::Gold { input, policy } => {
            let corpus = read_corpus(ctx, &input, ImportOptions::default())?;
            ctx.emit(gold_jsonl(&derive_gold(&corpus, policy)?).as_bytes())?;
        }
        Command::Split {
            input,
            task,
            test_size,
            policy,
        } => {
            let out = ctx.require_out("split")?;
            let gold: Vec<GoldInstance> = read_gold(ctx, &input, policy)?
                .into_iter()
                .filter(|g| g.labels[task].is_some())
                .collect();
            let split = psyling::corpus::stratified_split(&gold, |g| g.labels[task] == Some(true), test_size, ctx.seed)?;
            let (mut train, mut test) = split.select(&gold);
            train.iter_mut().for_each(|g| g.partition = Some(PartitionName::Train));
            test.iter_mut().for_each(|g| g.partition = Some(PartitionName::Test));
            ctx.rec.write(&out.join("train.jsonl"), gold_jsonl(&train).as_bytes())?;
            ctx.rec.write(&out.join("test.jsonl"), gold_jsonl(&test).as_bytes())?;
            let stats = [
                DatasetPartition::new(PartitionName::Train, &train),
                DatasetPartition::new(PartitionName::Test, &test),
            ];
            let stats_json = json_line(&stats);
            ctx.rec.write(&out.join("stats.json"), &stats_json)?;
            dir_output = true;
        }
        Command::Agreement { input, format } => {
            let corpus = read_corpus(ctx, &input, ImportOptions::default())?;
            let report = perfect_agreement(&corpus);
            match (format, ctx.out.is_some()) {
                (Format::Table, false) => ctx.print(report.to_table().as_bytes())?,
                _ => ctx.emit(&json_line(&report))?,
            }
        }
        Command::Train {
            task,
            model,
            train,
            policy,
        } => {
            let out = ctx.require_out("train")?;
            let config = ctx.model_config();
            if task == "all" {
                let gold = read_gold(ctx, &train, policy)?;
                let models: ByCharacteristic<TrainedModel> = ByCharacteristic::from_fn(|c| c).try_map(|_, &c| {
                    let data: Vec<LabeledText> = gold.iter().filter_map(|g| g.labeled(c)).collect();
                    train_model(model, c, &data, &config)
                })?;
                let manifest = ModelBundle::save_dir(&out, &models)?;
                for entry in manifest.models.values() {
                    ctx.rec.note_output(&out.join(&entry.file))?;
                }
                ctx.rec.note_output(&out.join(psyling::bundle::MANIFEST))?;
                dir_output = true;
            } else {
                let task: Characteristic = task.parse().map_err(CliError::Usage)?;
                let data = read_labeled(ctx, &train, task, policy)?;
                let m = train_model(model, task, &data, &config)?;
                ctx.rec.write(&out, &m.to_bytes())?;
                ctx.print(format!("{}\n", m.fingerprint()).as_bytes())?;
            }
        }
        Command::Evaluate {
            model,
            test,
            policy,
            format,
        } => {
            let m = load_model(ctx, &model)?;
            let data = read_labeled(ctx, &test, m.task, policy)?;
            let report = pipeline::evaluate(&m, &data)?;
            match format {
                Format::Json => ctx.emit(&json_line(&report))?,
                Format::Table => ctx.emit(report.to_table().as_bytes())?,
            }
        }
        Command::Curve {
            model,
            task,
            sizes,
            train,
            test,
            marker_strength,
            test_size,
            policy,
        } => {
            let config = ctx.model_config();
            let (pool, test_set) = match (train, test) {
                (Some(train), Some(test)) => (read_labeled(ctx, &train, task, policy)?, read_labeled(ctx, &test, task, policy)?),
                (None, None) => {
                    let max = sizes.iter().copied().max().unwrap_or(0);
                    let corpus = generate_synthetic(ctx.seed, max + test_size, marker_strength)?;
                    pipeline::task_split(&derive_gold(&corpus, GoldPolicy::PerfectOnly)?, task, test_size, ctx.seed)?
                }
                _ => return Err(CliError::Usage("--train and --test go together".into())),
            };
            let curve = pipeline::curve_for(model, task, &pool, &test_set, &sizes, &config, ctx.seed)?;
            ctx.emit(curve.to_csv().as_bytes())?;
        }
        Command::Calibrate {
            model,
            test,
            policy,
            format,
        } => {
            let m = load_model(ctx, &model)?;
            let data = read_labeled(ctx, &test, m.task, policy)?;
            let texts: Vec<&str> = data.iter().map(|t| t.text.as_str()).collect();
            let p_yes = m.prob_yes_batch(&texts)?;
            let p_no: Vec<f64> = p_yes.iter().map(|p| 1.0 - p).collect();
            let gold: Vec<bool> = data.iter().map(|t| t.label).collect();
            let difficulty: Vec<_> = data.iter().map(|t| t.difficulty).collect();
            let calibration = calibration_report(&p_no, &gold, &difficulty, &Band::DEFAULTS)?;
            let preds: Vec<bool> = p_yes.iter().map(|&p| p >= 0.5).collect();
            let slices = error_slices(&preds, &gold, &texts, DEFAULT_LENGTH_THRESHOLD)?;
            match format {
                Format::Json => ctx.emit(&json_line(&CalibrateOutput {
                    task: m.task,
                    calibration,
                    slices,
                }))?,
                Format::Table => ctx.emit(calibration.to_table().as_bytes())?,
            }
        }
        Command::Adapt {
            models,
            conversations,
            lexicons,
            concise_words,
        } => {
            let bundle = ModelBundle::load_dir(&models)?;
            let lexicons = match lexicons {
                Some(dir) => Lexicons::load_dir(dir)?,
                None => Lexicons::bundled(),
            };
            let mut adapter = Adapter::new(bundle, lexicons);
            adapter.concise_words = concise_words;
            let text = ctx.rec.read_string(&conversations)?;
            let reports = parse_conversations_jsonl(&text)?
                .iter()
                .map(|c| adapter.adapt(c))
                .collect::<psyling::Result<Vec<_>>>()?;
            let pairs: Vec<_> = reports.iter().map(|r| (r.matching.matching_level, r.satisfaction)).collect();
            let (association, association_error) = match association(&pairs) {
                Ok(a) => (Some(a), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ctx.emit(&json_line(&AdaptOutput {
                conversations: reports,
                association,
                association_error,
            }))?;
        }
        Command::Serve {
            bind,
            models,
            store,
            lexicons,
            max_body_bytes,
            request_timeout_ms,
            init_queue,
        } => {
            let flags = psyling_service::ConfigOverrides {
                bind,
                models,
                store,
                lexicons,
                max_body_bytes,
                request_timeout_ms,
            };
            let env = psyling_service::ConfigOverrides::from_env().map_err(CliError::Usage)?;
            let config = flags.or(env).or(ctx.config.serve.clone()).resolve();
            if let (Some(queue), Some(dir)) = (init_queue, &config.store) {
                let text = ctx.rec.read_string(&queue)?;
                Corpus::parse_jsonl_with(&text, ImportOptions { allow_unannotated: true })?;
                psyling_service::init_store(dir, &text)?;
            }
            log::info!("serving on {}", config.bind);
            psyling_service::run(config)?;
        }
        Command::Synth { n, marker_strength } => {
            let corpus = generate_synthetic(ctx.seed, n, marker_strength)?;
            ctx.emit(corpus.to_jsonl().as_bytes())?;
        }
        Command::Demo { n } => {
            let out = ctx.out.clone().unwrap_or_else(|| PathBuf::from("demo-out"));
            ctx.out = Some(out.clone());
            let mut demo = ctx.config.demo.clone();
            if let Some(n) = n {
                demo.n = n;
            }
            let result = pipeline::demo(&demo, &ctx.model_config(), ctx.seed)?;
            let table = result.grid.to_table();
            ctx.rec.write(&out.join("grid.txt"), table.as_bytes())?;
            ctx.rec.write(&out.join("grid.csv"), result.grid.to_csv().as_bytes())?;
            ctx.rec.write(&out.join("grid.json"), &json_line(&result.grid))?;
            ctx.rec
                .write(&out.join("curve.csv"), pipeline::curves_csv(&result.curves).as_bytes())?;
            for s in &result.curves {
                ctx.rec.write(
                    &out.join("curves").join(format!("{}_{}.csv", s.kind, s.task)),
                    s.curve.to_csv().as_bytes(),
                )?;
            }
            ctx.print(table.as_bytes())?;
            dir_output = true;
        }
    }
    Ok(dir_output)
}

fn run_inner(argv: Vec<String>, cli: Cli, stdout: &mut dyn Write) -> CliResult {
    let config = match &cli.common.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    let seed = cli.common.seed.or(config.seed).unwrap_or(0);
    let mut ctx = Ctx {
        stdout,
        argv,
        config,
        seed,
        out: cli.common.out.clone(),
        rec: Recorder::default(),
    };
    if let Some(path) = &cli.common.config {
        ctx.rec.note_input(path)?;
    }
    let dir_output = execute(cli.command, &mut ctx)?;
    ctx.finish(dir_output)
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(rendered.as_bytes());
            } else {
                let _ = stdout.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match run_inner(argv, cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let body = match &e {
                CliError::Usage(m) => serde_json::json!({"error": {"kind": "usage", "message": m}}),
                CliError::Domain { kind, message } => serde_json::json!({"error": {"kind": kind, "message": message}}),
            };
            let _ = writeln!(stderr, "{body}");
            e.exit_code()
        }
    }
}
