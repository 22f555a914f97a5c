use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{parse_transform, rasterize, apply_transform, StageSpec};
use crate::classify::{argmax, load_model, train, Arch, Classifier, Dataset, DatasetItem, Hyper, Model, Split};
use crate::error::{Error, Result};
use crate::raster::{RasterImage, RasterPolicy};
use crate::rng::{derive_seed, rng_from_seed};
use crate::signal::{add_awgn, Signal};
use crate::tft::TfDescriptor;
use crate::waveforms::{Catalog, DEFAULT_FS, DEFAULT_SAMPLES, POLYPHASE_GROUP};

pub const OTHER_GROUP: &str = "other";

/// Stage-1 label map.
pub fn stage1_labels() -> Vec<String> {
    vec![OTHER_GROUP.to_string(), POLYPHASE_GROUP.to_string()]
}

/// P1–P4 labels of `catalog`, in catalog order.
pub fn poly_labels(catalog: &Catalog) -> Vec<String> {
    catalog
        .kinds()
        .into_iter()
        .filter(|k| k.is_p_code())
        .map(|k| k.label().to_string())
        .collect()
}

/// Every non-P1–P4 label of `catalog`, in catalog order.
pub fn other_labels(catalog: &Catalog) -> Vec<String> {
    catalog
        .kinds()
        .into_iter()
        .filter(|k| !k.is_p_code())
        .map(|k| k.label().to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageConfig {
    #[serde(flatten)]
    pub spec: StageSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub fs: f64,
    pub n_samples: usize,
    pub stage1: StageConfig,
    pub branch_poly: StageConfig,
    pub branch_other: StageConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    transform: Value,
    #[serde(default)]
    raster: Option<RasterPolicy>,
    #[serde(default)]
    model: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPipeline {
    #[serde(default)]
    fs: Option<f64>,
    #[serde(default)]
    n_samples: Option<usize>,
    stage1: RawStage,
    branch_poly: RawStage,
    branch_other: RawStage,
    #[serde(default)]
    catalog: Option<PathBuf>,
}

fn stage(method: &str, n: usize, fs: f64) -> StageConfig {
    StageConfig {
        spec: StageSpec {
            transform: super::default_params(method, n, fs).expect("known method"),
            raster: RasterPolicy::default(),
        },
        model: None,
    }
}

impl PipelineConfig {
    /// FSST for stage 1 and the 14-class branch, SPWVD for the P1–P4 branch.
    pub fn default_for(fs: f64, n_samples: usize) -> Self {
        Self {
            fs,
            n_samples,
            stage1: stage("fsst", n_samples, fs),
            branch_poly: stage("spwvd", n_samples, fs),
            branch_other: stage("fsst", n_samples, fs),
            catalog: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawPipeline = serde_json::from_str(text)?;
        let fs = raw.fs.unwrap_or(DEFAULT_FS);
        let n = raw.n_samples.unwrap_or(DEFAULT_SAMPLES);
        if !(fs.is_finite() && fs > 0.0) || n < 16 {
            return Err(Error::invalid("fs must be positive and n_samples at least 16"));
        }
        let conv = |r: RawStage, name: &str| -> Result<StageConfig> {
            Ok(StageConfig {
                spec: StageSpec {
                    transform: parse_transform(&r.transform, &format!("{name}.transform"), n, fs)?,
                    raster: r.raster.unwrap_or_default(),
                },
                model: r.model,
            })
        };
        Ok(Self {
            fs,
            n_samples: n,
            stage1: conv(raw.stage1, "stage1")?,
            branch_poly: conv(raw.branch_poly, "branch_poly")?,
            branch_other: conv(raw.branch_other, "branch_other")?,
            catalog: raw.catalog,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Makes relative model and catalog paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.stage1.model);
        fix(&mut self.branch_poly.model);
        fix(&mut self.branch_other.model);
        fix(&mut self.catalog);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Poly,
    Other,
}

/// Routes on the stage-1 argmax: P1–P4 goes to the SPWVD branch, anything
/// else to the 14-class branch.
pub fn route(labels: &[String], probs: &[f64]) -> Result<Branch> {
    if probs.len() != labels.len() || probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("stage-1 probabilities do not match its label map"));
    }
    Ok(if labels[argmax(probs)] == POLYPHASE_GROUP {
        Branch::Poly
    } else {
        Branch::Other
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTrace {
    pub stage: String,
    pub descriptor: TfDescriptor,
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineOutput {
    pub label: String,
    pub branch: Branch,
    pub trace: Vec<StageTrace>,
}

/// A configured pipeline with its three classifiers, label maps checked.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub catalog: Catalog,
    stage1: Box<dyn Classifier>,
    poly: Box<dyn Classifier>,
    other: Box<dyn Classifier>,
}

fn label_set(labels: &[String], what: &str) -> Result<BTreeSet<String>> {
    let set: BTreeSet<String> = labels.iter().cloned().collect();
    if set.len() != labels.len() {
        return Err(Error::invalid(format!("{what} model has duplicate labels")));
    }
    Ok(set)
}

fn expect_labels(model: &dyn Classifier, expected: &[String], what: &str) -> Result<()> {
    let got = label_set(model.labels(), what)?;
    let want: BTreeSet<String> = expected.iter().cloned().collect();
    if got != want {
        return Err(Error::invalid(format!(
            "{what} model labels {:?} do not match expected {:?}",
            model.labels(),
            expected
        )));
    }
    Ok(())
}

impl Pipeline {
    pub fn new(
        config: PipelineConfig,
        catalog: Catalog,
        stage1: Box<dyn Classifier>,
        poly: Box<dyn Classifier>,
        other: Box<dyn Classifier>,
    ) -> Result<Self> {
        let poly_l = poly_labels(&catalog);
        if poly_l.is_empty() {
            return Err(Error::invalid("catalog has no P1-P4 classes"));
        }
        expect_labels(stage1.as_ref(), &stage1_labels(), "stage1")?;
        expect_labels(poly.as_ref(), &poly_l, "branch_poly")?;
        expect_labels(other.as_ref(), &other_labels(&catalog), "branch_other")?;
        Ok(Self { config, catalog, stage1, poly, other })
    }

    /// Loads the three models named in the config.
    pub fn load(config: PipelineConfig, catalog: Catalog) -> Result<Self> {
        let get = |c: &StageConfig, name: &str| -> Result<Box<dyn Classifier>> {
            let path = c
                .model
                .as_ref()
                .ok_or_else(|| Error::Invalid(format!("{name}.model: no model path configured")))?;
            Ok(Box::new(load_model(path)?))
        };
        let s1 = get(&config.stage1, "stage1")?;
        let p = get(&config.branch_poly, "branch_poly")?;
        let o = get(&config.branch_other, "branch_other")?;
        Self::new(config, catalog, s1, p, o)
    }

    pub fn stage1_model(&self) -> &dyn Classifier {
        self.stage1.as_ref()
    }

    pub fn poly_model(&self) -> &dyn Classifier {
        self.poly.as_ref()
    }

    pub fn other_model(&self) -> &dyn Classifier {
        self.other.as_ref()
    }
}

fn run_stage(name: &str, spec: &StageSpec, model: &dyn Classifier, s: &Signal) -> Result<StageTrace> {
    let tf = apply_transform(&spec.transform, s)?;
    let img = rasterize(&tf, &spec.raster)?;
    let probs = model.predict(&img)?;
    if probs.len() != model.labels().len() {
        return Err(Error::invalid(format!("{name} returned {} probabilities", probs.len())));
    }
    Ok(StageTrace {
        stage: name.to_string(),
        descriptor: tf.descriptor().clone(),
        labels: model.labels().to_vec(),
        label: model.labels()[argmax(&probs)].clone(),
        probs,
    })
}

/// Stage 1 on FSST, then exactly one branch. Only the taken branch's
/// transform is computed.
pub fn run_radar_pipeline(p: &Pipeline, s: &Signal) -> Result<PipelineOutput> {
    let first = run_stage("stage1", &p.config.stage1.spec, p.stage1.as_ref(), s)?;
    let branch = route(&first.labels, &first.probs)?;
    let second = match branch {
        Branch::Poly => run_stage("branch_poly", &p.config.branch_poly.spec, p.poly.as_ref(), s)?,
        Branch::Other => run_stage("branch_other", &p.config.branch_other.spec, p.other.as_ref(), s)?,
    };
    Ok(PipelineOutput {
        label: second.label.clone(),
        branch,
        trace: vec![first, second],
    })
}

/// One noisy catalog signal: parameters and carrier phase from
/// `derive_seed(seed, [0])`, noise from `derive_seed(seed, [1])`.
pub fn synth_item(catalog: &Catalog, class: usize, fs: f64, n: usize, snr_db: f64, seed: u64) -> Result<Signal> {
    let clean = catalog.generate(class, fs, n, derive_seed(seed, &[0]))?;
    add_awgn(&clean, snr_db, derive_seed(seed, &[1]))
}

/// Which label map a dataset is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Stage1,
    Poly,
    Other,
    All,
}

impl Task {
    pub fn labels(self, catalog: &Catalog) -> Vec<String> {
        match self {
            Task::Stage1 => stage1_labels(),
            Task::Poly => poly_labels(catalog),
            Task::Other => other_labels(catalog),
            Task::All => catalog.labels(),
        }
    }

    /// Label index of catalog class `class`, or `None` if the task skips it.
    pub fn map(self, catalog: &Catalog, class: usize) -> Option<usize> {
        let kind = catalog.kinds()[class];
        let find = |labels: Vec<String>| labels.iter().position(|l| l == kind.label());
        match self {
            Task::Stage1 => Some(kind.is_p_code() as usize),
            Task::Poly => find(poly_labels(catalog)),
            Task::Other => find(other_labels(catalog)),
            Task::All => Some(class),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskConfig {
    pub n_per_class: usize,
    /// Training SNRs are drawn uniformly from this range.
    pub snr_db: (f64, f64),
    pub seed: u64,
    pub arch: Arch,
    pub hyper: Hyper,
    /// Also train the 18-class FSST and SPWVD single-stage baselines.
    pub baselines: bool,
}

impl Default for DeskConfig {
    fn default() -> Self {
        Self {
            n_per_class: 50,
            snr_db: (-6.0, 12.0),
            seed: 0,
            arch: Arch::default(),
            hyper: Hyper::default(),
            baselines: true,
        }
    }
}

/// Noisy training signals, one list per catalog class.
pub struct DeskSignals {
    pub items: Vec<(usize, f64, Signal)>,
}

impl DeskSignals {
    pub fn generate(catalog: &Catalog, fs: f64, n: usize, desk: &DeskConfig) -> Result<Self> {
        if desk.n_per_class == 0 {
            return Err(Error::param("n_per_class", "must be at least 1"));
        }
        let (lo, hi) = desk.snr_db;
        let jobs: Vec<(usize, usize)> = (0..catalog.len())
            .flat_map(|c| (0..desk.n_per_class).map(move |i| (c, i)))
            .collect();
        let items = jobs
            .par_iter()
            .map(|&(c, i)| {
                let mut rng = rng_from_seed(derive_seed(desk.seed, &[1, c as u64, i as u64]));
                let snr = lo + (hi - lo) * rng.random::<f64>();
                let s = synth_item(catalog, c, fs, n, snr, derive_seed(desk.seed, &[0, c as u64, i as u64]))?;
                Ok((c, snr, s))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { items })
    }

    /// Images every signal the task uses with `spec`, all in the train split.
    pub fn dataset(&self, catalog: &Catalog, task: Task, spec: &StageSpec) -> Result<Dataset> {
        let chosen: Vec<(usize, &(usize, f64, Signal))> = self
            .items
            .iter()
            .filter_map(|it| task.map(catalog, it.0).map(|l| (l, it)))
            .collect();
        let images: Vec<RasterImage> = chosen
            .par_iter()
            .map(|(_, (_, _, s))| spec.image(s))
            .collect::<Result<_>>()?;
        let mut d = Dataset::new(task.labels(catalog));
        for ((label, (_, snr, _)), image) in chosen.into_iter().zip(images) {
            d.push(DatasetItem { image, label, snr_db: Some(*snr), split: Split::Train })?;
        }
        Ok(d)
    }
}

pub struct DeskModels {
    pub stage1: Model,
    pub poly: Model,
    pub other: Model,
    pub fsst18: Option<Model>,
    pub spwvd18: Option<Model>,
}

/// Trains the three pipeline models (and optionally the two 18-class
/// baselines) on freshly synthesized signals. The FSST baseline uses the
/// 14-class branch's stage spec, the SPWVD baseline the P1–P4 branch's.
pub fn train_desk_models(cfg: &PipelineConfig, catalog: &Catalog, desk: &DeskConfig) -> Result<DeskModels> {
    let signals = DeskSignals::generate(catalog, cfg.fs, cfg.n_samples, desk)?;
    let fit = |task: Task, spec: &StageSpec, tag: u64| -> Result<Model> {
        let d = signals.dataset(catalog, task, spec)?;
        train(&d, desk.arch.clone(), desk.hyper, derive_seed(desk.seed, &[2, tag]))
    };
    let stage1 = fit(Task::Stage1, &cfg.stage1.spec, 0)?;
    let poly = fit(Task::Poly, &cfg.branch_poly.spec, 1)?;
    let other = fit(Task::Other, &cfg.branch_other.spec, 2)?;
    let (fsst18, spwvd18) = if desk.baselines {
        (
            Some(fit(Task::All, &cfg.branch_other.spec, 3)?),
            Some(fit(Task::All, &cfg.branch_poly.spec, 4)?),
        )
    } else {
        (None, None)
    };
    Ok(DeskModels { stage1, poly, other, fsst18, spwvd18 })
}

/// A single-stage 18-class comparison classifier.
pub struct Baseline {
    pub name: String,
    pub spec: StageSpec,
    pub model: Box<dyn Classifier>,
}

pub const METHOD_PIPELINE: &str = "pipeline";
pub const METHOD_BRANCH_POLY: &str = "branch_poly";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub class: String,
    pub snr_db: f64,
    pub accuracy: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSweep {
    pub method: String,
    pub labels: Vec<String>,
    pub cells: Vec<SweepCell>,
    /// Mean of the per-class accuracies at each grid SNR.
    pub overall: Vec<f64>,
    /// `confusion[snr][true][predicted]` over `labels`.
    pub confusion: Vec<Vec<Vec<u64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub grid: Vec<f64>,
    pub n_per_class: usize,
    pub master_seed: u64,
    pub methods: Vec<MethodSweep>,
}

impl SweepReport {
    pub fn method(&self, name: &str) -> Option<&MethodSweep> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// Mean accuracy of `method` over `classes` at `snr_db`.
    pub fn mean_accuracy(&self, method: &str, classes: &[String], snr_db: f64) -> Option<f64> {
        let m = self.method(method)?;
        let acc: Vec<f64> = m
            .cells
            .iter()
            .filter(|c| c.snr_db == snr_db && classes.contains(&c.class))
            .map(|c| c.accuracy)
            .collect();
        (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64)
    }

    /// `class,snr_db,accuracy,method`; overall averages use class `ALL`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,snr_db,accuracy,method\n");
        for m in &self.methods {
            for c in &m.cells {
                let _ = writeln!(out, "{},{},{},{}", c.class, c.snr_db, c.accuracy, m.method);
            }
            for (snr, acc) in self.grid.iter().zip(&m.overall) {
                let _ = writeln!(out, "ALL,{snr},{acc},{}", m.method);
            }
        }
        out
    }

    pub fn confusion_json(&self) -> String {
        let v: Vec<Value> = self
            .methods
            .iter()
            .map(|m| {
                serde_json::json!({
                    "method": m.method,
                    "labels": m.labels,
                    "snr_db": self.grid,
                    "confusion": m.confusion,
                })
            })
            .collect();
        serde_json::to_string_pretty(&v).expect("confusion serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub grid: Vec<f64>,
    pub n_per_class: usize,
    pub master_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grid: (0..14).map(|i| -14.0 + 2.0 * i as f64).collect(),
            n_per_class: 10,
            master_seed: 0,
        }
    }
}

/// Accuracy of the pipeline, the P1–P4 branch on its own classes and every
/// baseline, per (class, SNR). Item `(c, j, i)` is seeded from
/// `derive_seed(master_seed, [c, j, i])`, so results do not depend on the
/// thread count.
pub fn snr_sweep(p: &Pipeline, baselines: &[Baseline], cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.n_per_class == 0 {
        return Err(Error::param("n_per_class", "must be at least 1"));
    }
    if cfg.grid.is_empty() || cfg.grid.iter().any(|s| !s.is_finite()) {
        return Err(Error::param("grid", "must be a nonempty list of finite SNRs"));
    }
    let catalog = &p.catalog;
    let all = catalog.labels();
    for b in baselines {
        expect_labels(b.model.as_ref(), &all, &b.name)?;
    }
    let poly_l = poly_labels(catalog);
    let mut methods: Vec<(String, Vec<String>)> = vec![
        (METHOD_PIPELINE.to_string(), all.clone()),
        (METHOD_BRANCH_POLY.to_string(), poly_l.clone()),
    ];
    methods.extend(baselines.iter().map(|b| (b.name.clone(), all.clone())));

    let jobs: Vec<(usize, usize, usize)> = (0..catalog.len())
        .flat_map(|c| (0..cfg.grid.len()).flat_map(move |j| (0..cfg.n_per_class).map(move |i| (c, j, i))))
        .collect();
    // per item: (method index, true index, predicted index)
    let results: Vec<(usize, usize, Vec<(usize, usize, usize)>)> = jobs
        .par_iter()
        .map(|&(c, j, i)| {
            let seed = derive_seed(cfg.master_seed, &[c as u64, j as u64, i as u64]);
            let s = synth_item(catalog, c, p.config.fs, p.config.n_samples, cfg.grid[j], seed)?;
            let truth = &all[c];
            let mut out = Vec::with_capacity(methods.len());
            let index_in = |labels: &[String], l: &str| labels.iter().position(|x| x == l);
            let piped = run_radar_pipeline(p, &s)?;
            out.push((0, c, index_in(&all, &piped.label).expect("branch labels are catalog labels")));
            if let Some(t) = index_in(&poly_l, truth) {
                let tr = run_stage(METHOD_BRANCH_POLY, &p.config.branch_poly.spec, p.poly.as_ref(), &s)?;
                out.push((1, t, index_in(&poly_l, &tr.label).expect("poly label")));
            }
            for (bi, b) in baselines.iter().enumerate() {
                let probs = b.model.predict(&b.spec.image(&s)?)?;
                let pred = index_in(&all, &b.model.labels()[argmax(&probs)]).expect("catalog label");
                out.push((2 + bi, c, pred));
            }
            Ok((c, j, out))
        })
        .collect::<Result<_>>()?;

    let report_methods = methods
        .into_iter()
        .enumerate()
        .map(|(mi, (method, labels))| {
            let k = labels.len();
            let mut confusion = vec![vec![vec![0u64; k]; k]; cfg.grid.len()];
            for (_, j, preds) in &results {
                for &(m, t, pr) in preds {
                    if m == mi {
                        confusion[*j][t][pr] += 1;
                    }
                }
            }
            let mut cells = Vec::new();
            let mut overall = Vec::with_capacity(cfg.grid.len());
            for (j, &snr) in cfg.grid.iter().enumerate() {
                let mut accs = Vec::new();
                for (t, label) in labels.iter().enumerate() {
                    let n: u64 = confusion[j][t].iter().sum();
                    if n == 0 {
                        continue;
                    }
                    let acc = confusion[j][t][t] as f64 / n as f64;
                    accs.push(acc);
                    cells.push(SweepCell { class: label.clone(), snr_db: snr, accuracy: acc, count: n });
                }
                overall.push(accs.iter().sum::<f64>() / accs.len().max(1) as f64);
            }
            MethodSweep { method, labels, cells, overall, confusion }
        })
        .collect();
    Ok(SweepReport {
        grid: cfg.grid.clone(),
        n_per_class: cfg.n_per_class,
        master_seed: cfg.master_seed,
        methods: report_methods,
    })
}
