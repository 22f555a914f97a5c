//! `tfi`: synthesize radar signals, compute time-frequency images, build
//! datasets, train desk classifiers and run the staged pipeline and the
//! transient-stability experiment.

pub mod manifest;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use tfi_core::classify::{evaluate, load_model, save_model, train, Arch, Hyper, Split};
use tfi_core::pipeline::*;
use tfi_core::raster::{export, rasterize, ExportFormat, RasterPolicy};
use tfi_core::signal::{load_tfsg, save_tfsg};
use tfi_core::tft::{load_tftm, save_tftm};
use tfi_core::waveforms::{WaveformKind, DEFAULT_FS, DEFAULT_SAMPLES};
use tfi_core::{Error, Result};

use manifest::*;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "tfi", version, about = "Time-frequency imaging and staged signal classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize one catalog waveform, optionally with noise, to a TFSG file.
    Synth(SynthArgs),
    /// Compute a time-frequency or imaging matrix (TFTM) from a TFSG signal.
    Transform(TransformArgs),
    /// Rasterize a TFTM matrix to PNG or a TFTN tensor.
    Render(RenderArgs),
    /// Build a radar or TSA dataset of tensors plus a manifest, or verify one.
    Dataset {
        #[command(subcommand)]
        action: DatasetAction,
    },
    /// Train a desk classifier on the train split of a dataset.
    Train(TrainArgs),
    /// Evaluate a model on one split of a dataset.
    Eval(EvalArgs),
    /// Staged radar pipeline.
    Pipeline {
        #[command(subcommand)]
        action: PipelineAction,
    },
    /// Transient-stability surrogate experiment.
    Tsa {
        #[command(subcommand)]
        action: TsaAction,
    },
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Catalog label, e.g. LFM, P3, Frank.
    #[arg(long)]
    pub class: String,
    #[arg(long, default_value_t = DEFAULT_FS)]
    pub fs: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    /// Add white Gaussian noise at this SNR (dB).
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Catalog JSON replacing the built-in catalog.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    #[arg(long, value_parser = parse_method)]
    pub method: String,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON object of parameters overriding the method defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_method(s: &str) -> std::result::Result<String, String> {
    if METHODS.contains(&s) {
        Ok(s.to_string())
    } else {
        Err(format!("unknown method `{s}`; expected one of {}", METHODS.join(", ")))
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Png,
    Tensor,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScalingArg {
    Db,
    Linear,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "png")]
    pub format: Format,
    #[arg(long, value_enum, default_value = "db")]
    pub scaling: ScalingArg,
    #[arg(long, default_value_t = 224)]
    pub height: usize,
    #[arg(long, default_value_t = 224)]
    pub width: usize,
    /// Raster policy JSON; overrides the scaling and size flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum DatasetAction {
    /// Radar dataset from a recipe JSON.
    Radar(BuildArgs),
    /// TSA dataset from an experiment JSON (all fields optional).
    Tsa(BuildArgs),
    /// Check a manifest's labels and tensor hashes.
    Verify {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Training JSON: `{"arch": ..., "hyper": ...}`, both optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Metrics JSON; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum PipelineAction {
    /// Classify one TFSG signal with the models named in the config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Trace JSON; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train desk models for a config and write them with an updated config.
    Train(DeskArgs),
    /// SNR sweep of the pipeline, the P1-P4 branch and the 18-class
    /// baselines. Trains desk models when the config names none.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct DeskArgs {
    /// Pipeline config; the defaults are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Desk training JSON (n_per_class, snr_db, arch, hyper, baselines).
    #[arg(long)]
    pub desk: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub desk: DeskArgs,
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    pub n_per_class: usize,
}

#[derive(Subcommand, Debug)]
pub enum TsaAction {
    /// Run one imaging method, or the method × load table with `--table`.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        table: bool,
    },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::Invalid(format!("{}: {other}", path.display())),
    })
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn emit(out: Option<&Path>, v: &impl Serialize) -> Result<()> {
    match out {
        Some(p) => write_json(p, v),
        None => {
            let text = serde_json::to_string_pretty(v)?;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io(Path::new("<stdout>"), e)),
                _ => Ok(()),
            }
        }
    }
}

fn make_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Records the (config, seed, version) triple that reproduces a run.
fn log_run(out_dir: &Path, command: &str, config: &Value, seed: u64) -> Result<()> {
    eprintln!("tfi {VERSION} {command} seed={seed}");
    write_json(
        &out_dir.join("run.json"),
        &json!({ "tool": "tfi", "version": VERSION, "command": command, "seed": seed, "config": config }),
    )
}

fn load_pipeline_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default_for(DEFAULT_FS, DEFAULT_SAMPLES)),
        Some(p) => {
            let mut cfg = with_path(p, PipelineConfig::from_json(&read_text(p)?))?;
            cfg.resolve_paths(p.parent().unwrap_or(Path::new(".")));
            Ok(cfg)
        }
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let catalog = load_catalog(a.catalog.as_deref())?;
    let kind = WaveformKind::from_label(&a.class)
        .ok_or_else(|| Error::Invalid(format!("--class: unknown class `{}`; expected one of {}", a.class, catalog.labels().join(", "))))?;
    let c = catalog
        .index_of(kind)
        .ok_or_else(|| Error::Invalid(format!("--class: `{}` is not in the catalog", a.class)))?;
    let s = match a.snr {
        Some(snr) => synth_item(&catalog, c, a.fs, a.samples, snr, a.seed)?,
        None => catalog.generate(c, a.fs, a.samples, a.seed)?,
    };
    save_tfsg(&s, &a.out)
}

fn transform(a: TransformArgs) -> Result<()> {
    let s = load_tfsg(&a.input)?;
    let mut params = json!({ "method": a.method });
    if let Some(p) = &a.config {
        let overrides: Value = read_json(p)?;
        let obj = overrides
            .as_object()
            .ok_or_else(|| Error::Invalid(format!("{}: expected a JSON object", p.display())))?;
        for (k, v) in obj {
            params[k] = v.clone();
        }
    }
    let params = parse_transform(&params, "transform", s.len(), s.fs())?;
    save_tftm(&apply_transform(&params, &s)?, &a.out)
}

fn render(a: RenderArgs) -> Result<()> {
    let m = load_tftm(&a.input)?;
    let policy = match &a.config {
        Some(p) => read_json(p)?,
        None => match a.scaling {
            ScalingArg::Db => RasterPolicy::db(a.height, a.width),
            ScalingArg::Linear => RasterPolicy::linear(a.height, a.width),
        },
    };
    let img = rasterize(&m, &policy)?;
    let format = match a.format {
        Format::Png => ExportFormat::Png,
        Format::Tensor => ExportFormat::Tensor,
    };
    export(&img, format, &a.out)
}

fn dataset(action: DatasetAction) -> Result<()> {
    match action {
        DatasetAction::Radar(b) => {
            let path = b.config.as_ref().ok_or_else(|| Error::Invalid("--config: a radar recipe is required".into()))?;
            let cfg = with_path(path, RadarDatasetConfig::from_json(&read_text(path)?))?;
            let catalog = load_catalog(cfg.catalog.as_deref())?;
            let seed = b.seed.unwrap_or(0);
            make_dir(&b.out)?;
            let m = build_radar(&cfg, &catalog, seed, &b.out)?;
            m.save(&b.out.join(MANIFEST_FILE))?;
            log_run(&b.out, "dataset radar", &m.config, seed)?;
            eprintln!("{} items", m.items.len());
            Ok(())
        }
        DatasetAction::Tsa(b) => {
            let mut cfg: TsaExperiment = match &b.config {
                Some(p) => read_json(p)?,
                None => TsaExperiment::default(),
            };
            if let Some(s) = b.seed {
                cfg.seed = s;
            }
            make_dir(&b.out)?;
            let m = build_tsa(&cfg, &b.out)?;
            m.save(&b.out.join(MANIFEST_FILE))?;
            log_run(&b.out, "dataset tsa", &m.config, cfg.seed)?;
            eprintln!("{} items", m.items.len());
            Ok(())
        }
        DatasetAction::Verify { manifest } => {
            let m = Manifest::load(&manifest)?;
            m.verify(manifest.parent().unwrap_or(Path::new(".")))?;
            eprintln!("{} items verified", m.items.len());
            Ok(())
        }
    }
}

fn load_manifest_dataset(path: &Path) -> Result<tfi_core::classify::Dataset> {
    Manifest::load(path)?.dataset(path.parent().unwrap_or(Path::new(".")))
}

#[derive(serde::Deserialize, Serialize, Default)]
#[serde(default, deny_unknown_fields)]
struct TrainConfig {
    arch: Arch,
    hyper: Hyper,
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let tc: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    let d = load_manifest_dataset(&a.manifest)?;
    let m = train(&d, tc.arch.clone(), tc.hyper, a.seed)?;
    eprintln!(
        "tfi {VERSION} train seed={} final_loss={:.4}",
        a.seed,
        m.record.as_ref().map(|r| r.final_loss).unwrap_or(f64::NAN)
    );
    save_model(&m, &a.out)
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let d = load_manifest_dataset(&a.manifest)?;
    let m = load_model(&a.model)?;
    let metrics = evaluate(&m, &d, a.split.into())?;
    emit(a.out.as_deref(), &metrics)
}

fn load_desk(path: Option<&Path>, seed: u64) -> Result<DeskConfig> {
    let mut d: DeskConfig = match path {
        Some(p) => read_json(p)?,
        None => DeskConfig::default(),
    };
    d.seed = seed;
    Ok(d)
}

/// Trains desk models, saves them under `out/models` and returns the config
/// pointing at them plus the baselines.
fn train_and_save(cfg: &PipelineConfig, desk: &DeskConfig, out: &Path) -> Result<(PipelineConfig, Vec<Baseline>)> {
    let catalog = load_catalog(cfg.catalog.as_deref())?;
    let models = train_desk_models(cfg, &catalog, desk)?;
    let dir = out.join("models");
    make_dir(&dir)?;
    let mut cfg = cfg.clone();
    for (m, stage, name) in [
        (&models.stage1, &mut cfg.stage1, "stage1.tfmd"),
        (&models.poly, &mut cfg.branch_poly, "branch_poly.tfmd"),
        (&models.other, &mut cfg.branch_other, "branch_other.tfmd"),
    ] {
        let p = dir.join(name);
        save_model(m, &p)?;
        stage.model = Some(PathBuf::from("models").join(name));
    }
    let mut baselines = Vec::new();
    for (m, spec, name) in [
        (models.fsst18, &cfg.branch_other.spec, "fsst18"),
        (models.spwvd18, &cfg.branch_poly.spec, "spwvd18"),
    ] {
        if let Some(m) = m {
            save_model(&m, &dir.join(format!("{name}.tfmd")))?;
            baselines.push(Baseline { name: name.to_string(), spec: spec.clone(), model: Box::new(m) });
        }
    }
    write_json(&out.join("pipeline.json"), &cfg)?;
    cfg.resolve_paths(out);
    Ok((cfg, baselines))
}

fn pipeline(action: PipelineAction) -> Result<()> {
    match action {
        PipelineAction::Run { config, input, out } => {
            let cfg = load_pipeline_config(Some(&config))?;
            let catalog = load_catalog(cfg.catalog.as_deref())?;
            let p = Pipeline::load(cfg, catalog)?;
            let s = load_tfsg(&input)?;
            let result = run_radar_pipeline(&p, &s)?;
            emit(out.as_deref(), &result)
        }
        PipelineAction::Train(a) => {
            let cfg = load_pipeline_config(a.config.as_deref())?;
            let desk = load_desk(a.desk.as_deref(), a.seed)?;
            make_dir(&a.out)?;
            train_and_save(&cfg, &desk, &a.out)?;
            log_run(&a.out, "pipeline train", &json!({ "pipeline": cfg, "desk": desk }), a.seed)
        }
        PipelineAction::Sweep(a) => {
            let cfg = load_pipeline_config(a.desk.config.as_deref())?;
            let out = &a.desk.out;
            make_dir(out)?;
            let sweep = SweepConfig {
                grid: a.grid.clone().unwrap_or_else(|| SweepConfig::default().grid),
                n_per_class: a.n_per_class,
                master_seed: a.desk.seed,
            };
            let have_models = [&cfg.stage1, &cfg.branch_poly, &cfg.branch_other].iter().all(|s| s.model.is_some());
            let (p, baselines, desk) = if have_models {
                let catalog = load_catalog(cfg.catalog.as_deref())?;
                (Pipeline::load(cfg.clone(), catalog)?, Vec::new(), None)
            } else {
                let desk = load_desk(a.desk.desk.as_deref(), a.desk.seed)?;
                let (trained, baselines) = train_and_save(&cfg, &desk, out)?;
                let catalog = load_catalog(trained.catalog.as_deref())?;
                (Pipeline::load(trained, catalog)?, baselines, Some(desk))
            };
            let report = snr_sweep(&p, &baselines, &sweep)?;
            let csv = out.join("sweep.csv");
            fs::write(&csv, report.to_csv()).map_err(|e| Error::io(&csv, e))?;
            let conf = out.join("confusion.json");
            fs::write(&conf, report.confusion_json()).map_err(|e| Error::io(&conf, e))?;
            write_json(&out.join("sweep.json"), &report)?;
            log_run(out, "pipeline sweep", &json!({ "pipeline": cfg, "sweep": sweep, "desk": desk }), a.desk.seed)
        }
    }
}

fn tsa(action: TsaAction) -> Result<()> {
    let TsaAction::Run { config, seed, out, table } = action;
    let mut cfg: TsaExperiment = match &config {
        Some(p) => read_json(p)?,
        None => TsaExperiment::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    make_dir(&out)?;
    if table {
        let t = tsa_table(&cfg)?;
        let csv = out.join("table.csv");
        fs::write(&csv, t.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let md = out.join("table.md");
        fs::write(&md, t.to_markdown()).map_err(|e| Error::io(&md, e))?;
        print!("{}", t.to_markdown());
    } else {
        let m = tsa_experiment(&cfg)?;
        write_json(&out.join("metrics.json"), &m)?;
        println!(
            "{} ACC {:.3} TUR {:.3} TSR {:.3}",
            cfg.imaging.name(),
            m.acc,
            m.tur.unwrap_or(f64::NAN),
            m.tsr.unwrap_or(f64::NAN)
        );
    }
    log_run(&out, "tsa run", &serde_json::to_value(&cfg)?, cfg.seed)
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Transform(a) => transform(a),
        Command::Render(a) => render(a),
        Command::Dataset { action } => dataset(action),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Pipeline { action } => pipeline(action),
        Command::Tsa { action } => tsa(action),
    }
}

/// Exit code for an error: 2 for filesystem errors, 1 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_io() {
        2
    } else {
        1
    }
}

/// Parses `args` and runs the command. Usage errors exit 1; `--help` and
/// `--version` exit 0.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
