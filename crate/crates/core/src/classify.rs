//! Desk-scale classifiers over pooled image features, datasets and metrics.
//!
//! Images are average-pooled to a fixed grid (16×16 per channel by default),
//! standardized with training-set statistics and fed to a dense network with
//! tanh hidden layers and a softmax output.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binio::*;
use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::rng::rng_from_seed;

pub const DEFAULT_POOL: usize = 16;

/// Anything that maps an image to class probabilities.
pub trait Classifier: Send + Sync {
    fn labels(&self) -> &[String];
    fn predict(&self, image: &RasterImage) -> Result<Vec<f64>>;
}

pub fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Average-pools every channel onto a `ph × pw` grid, channel-major.
pub fn pool_features(img: &RasterImage, ph: usize, pw: usize) -> Vec<f64> {
    let (h, w, c) = img.shape();
    let bounds = |i: usize, n: usize, p: usize| {
        let lo = i * n / p;
        let hi = ((i + 1) * n / p).max(lo + 1).min(n);
        (lo.min(n - 1), hi)
    };
    let px = img.pixels();
    let mut out = Vec::with_capacity(ph * pw * c);
    for ch in 0..c {
        for i in 0..ph {
            let (y0, y1) = bounds(i, h, ph);
            for j in 0..pw {
                let (x0, x1) = bounds(j, w, pw);
                let mut s = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        s += px[(y * w + x) * c + ch] as f64;
                    }
                }
                out.push(s / ((y1 - y0) * (x1 - x0)) as f64);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Arch {
    Logreg,
    Mlp { hidden: Vec<usize> },
}

impl Default for Arch {
    fn default() -> Self {
        Arch::Mlp { hidden: vec![64] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub l2: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self { lr: 0.05, epochs: 200, batch: 32, l2: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub seed: u64,
    pub hyper: Hyper,
    pub final_loss: f64,
    /// Mean pre-update mini-batch loss of every epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.w[o * self.inputs..(o + 1) * self.inputs];
                self.b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }
}

/// A trained (or zero-initialized) dense softmax classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: Arch,
    /// Expected input image shape (H, W, C).
    pub input: (usize, usize, usize),
    pub pool: (usize, usize),
    labels: Vec<String>,
    layers: Vec<Dense>,
    feat_mean: Vec<f64>,
    feat_std: Vec<f64>,
    pub record: Option<TrainingRecord>,
}

impl Model {
    /// A model with all weights zero, which predicts the uniform distribution.
    pub fn zeros(arch: Arch, input: (usize, usize, usize), labels: Vec<String>) -> Result<Self> {
        Self::build(arch, input, (DEFAULT_POOL, DEFAULT_POOL), labels, |_, _| 0.0)
    }

    fn build(
        arch: Arch,
        input: (usize, usize, usize),
        pool: (usize, usize),
        labels: Vec<String>,
        mut init: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::invalid("a classifier needs at least two labels"));
        }
        let d = pool.0 * pool.1 * input.2;
        let mut sizes = vec![d];
        if let Arch::Mlp { hidden } = &arch {
            if hidden.iter().any(|&h| h == 0) {
                return Err(Error::param("hidden", "layer sizes must be positive"));
            }
            sizes.extend(hidden);
        }
        sizes.push(labels.len());
        let layers = sizes
            .windows(2)
            .map(|p| Dense {
                inputs: p[0],
                outputs: p[1],
                w: (0..p[0] * p[1]).map(|_| init(p[0], p[1])).collect(),
                b: vec![0.0; p[1]],
            })
            .collect();
        Ok(Self {
            arch,
            input,
            pool,
            labels,
            layers,
            feat_mean: vec![0.0; d],
            feat_std: vec![1.0; d],
            record: None,
        })
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// All weights and biases, layer by layer (weights first).
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(&l.b).copied()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::Shape(format!("{} params for a model of {}", p.len(), self.n_params())));
        }
        let mut it = p.iter().copied();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = it.next().unwrap();
            }
        }
        Ok(())
    }

    fn standardize(&self, f: &[f64]) -> Vec<f64> {
        f.iter()
            .zip(self.feat_mean.iter().zip(&self.feat_std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    /// Logits for an already standardized feature vector.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            a = l.forward(&a);
            if i < last {
                a.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        a
    }

    /// Mean cross-entropy plus `l2/2·Σw²` over standardized features, with
    /// its gradient in [`Model::params`] order.
    pub fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[usize], l2: f64) -> (f64, Vec<f64>) {
        let n = xs.len() as f64;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
            .collect();
        let mut loss = 0.0;
        let last = self.layers.len() - 1;
        for (x, &y) in xs.iter().zip(ys) {
            let mut acts = vec![x.clone()];
            for (i, l) in self.layers.iter().enumerate() {
                let mut z = l.forward(acts.last().unwrap());
                if i < last {
                    z.iter_mut().for_each(|v| *v = v.tanh());
                }
                acts.push(z);
            }
            let p = softmax(acts.last().unwrap());
            loss -= p[y].max(f64::MIN_POSITIVE).ln();
            let mut delta: Vec<f64> = p.iter().enumerate().map(|(k, &pk)| pk - (k == y) as u8 as f64).collect();
            for i in (0..self.layers.len()).rev() {
                let l = &self.layers[i];
                let input = &acts[i];
                let (gw, gb) = &mut grads[i];
                for o in 0..l.outputs {
                    gb[o] += delta[o];
                    let row = &mut gw[o * l.inputs..(o + 1) * l.inputs];
                    for (g, a) in row.iter_mut().zip(input) {
                        *g += delta[o] * a;
                    }
                }
                if i > 0 {
                    delta = (0..l.inputs)
                        .map(|j| {
                            let back: f64 = (0..l.outputs).map(|o| l.w[o * l.inputs + j] * delta[o]).sum();
                            back * (1.0 - input[j] * input[j])
                        })
                        .collect();
                }
            }
        }
        let mut reg = 0.0;
        let mut flat = Vec::with_capacity(self.n_params());
        for (l, (gw, gb)) in self.layers.iter().zip(grads) {
            for (g, w) in gw.iter().zip(&l.w) {
                flat.push(g / n + l2 * w);
                reg += w * w;
            }
            flat.extend(gb.iter().map(|g| g / n));
        }
        (loss / n + 0.5 * l2 * reg, flat)
    }

    fn check_shape(&self, img: &RasterImage) -> Result<()> {
        if img.shape() != self.input {
            return Err(Error::Shape(format!(
                "model expects {:?}, image is {:?}",
                self.input,
                img.shape()
            )));
        }
        Ok(())
    }

    pub fn features(&self, img: &RasterImage) -> Result<Vec<f64>> {
        self.check_shape(img)?;
        Ok(self.standardize(&pool_features(img, self.pool.0, self.pool.1)))
    }
}

impl Classifier for Model {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, image: &RasterImage) -> Result<Vec<f64>> {
        let x = self.features(image)?;
        Ok(softmax(&self.logits(&x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub image: RasterImage,
    pub label: usize,
    pub snr_db: Option<f64>,
    pub split: Split,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub labels: Vec<String>,
    pub items: Vec<DatasetItem>,
}

impl Dataset {
    pub fn new(labels: Vec<String>) -> Self {
        Self { labels, items: Vec::new() }
    }

    pub fn push(&mut self, item: DatasetItem) -> Result<()> {
        if item.label >= self.labels.len() {
            return Err(Error::invalid(format!(
                "label {} outside map of {}",
                item.label,
                self.labels.len()
            )));
        }
        self.items.push(item);
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetItem> {
        self.items.iter().filter(move |i| i.split == split)
    }
}

/// Mini-batch gradient descent on softmax cross-entropy. Deterministic in
/// `seed`: initialization and per-epoch shuffles come from one ChaCha stream
/// and batch gradients are summed in a fixed order.
pub fn train(d: &Dataset, arch: Arch, hyper: Hyper, seed: u64) -> Result<Model> {
    train_with_pool(d, arch, hyper, seed, (DEFAULT_POOL, DEFAULT_POOL))
}

pub fn train_with_pool(d: &Dataset, arch: Arch, hyper: Hyper, seed: u64, pool: (usize, usize)) -> Result<Model> {
    let items: Vec<&DatasetItem> = d.split(Split::Train).collect();
    let first = items.first().ok_or_else(|| Error::invalid("train split is empty"))?;
    if hyper.batch == 0 || !(hyper.lr > 0.0) || !(hyper.l2 >= 0.0) {
        return Err(Error::invalid("hyperparameters need batch >= 1, lr > 0, l2 >= 0"));
    }
    let input = first.image.shape();
    if let Some(bad) = items.iter().find(|i| i.image.shape() != input) {
        return Err(Error::Shape(format!("mixed image shapes {:?} and {:?}", input, bad.image.shape())));
    }
    if let Some(bad) = items.iter().find(|i| i.label >= d.labels.len()) {
        return Err(Error::invalid(format!("label {} outside map", bad.label)));
    }
    let raw: Vec<Vec<f64>> = items.par_iter().map(|i| pool_features(&i.image, pool.0, pool.1)).collect();
    let ys: Vec<usize> = items.iter().map(|i| i.label).collect();
    let dim = raw[0].len();
    let n = raw.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|j| raw.iter().map(|f| f[j]).sum::<f64>() / n).collect();
    let std: Vec<f64> = (0..dim)
        .map(|j| {
            let v = raw.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if v.sqrt() > 1e-6 { v.sqrt() } else { 1.0 }
        })
        .collect();

    let mut rng = rng_from_seed(seed);
    let mut model = Model::build(arch, input, pool, d.labels.clone(), |fan_in, fan_out| {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        (rng.random::<f64>() * 2.0 - 1.0) * a
    })?;
    model.feat_mean = mean;
    model.feat_std = std;
    let xs: Vec<Vec<f64>> = raw.iter().map(|f| model.standardize(f)).collect();

    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut history = Vec::with_capacity(hyper.epochs);
    let mut params = model.params();
    for _ in 0..hyper.epochs {
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(hyper.batch) {
            let bx: Vec<Vec<f64>> = chunk.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<usize> = chunk.iter().map(|&i| ys[i]).collect();
            let (loss, grad) = model.loss_and_grad(&bx, &by, hyper.l2);
            if !loss.is_finite() {
                return Err(Error::Diverged);
            }
            epoch_loss += loss * chunk.len() as f64;
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= hyper.lr * g;
            }
            model.set_params(&params)?;
        }
        history.push(epoch_loss / xs.len() as f64);
    }
    let (final_loss, _) = model.loss_and_grad(&xs, &ys, hyper.l2);
    if !final_loss.is_finite() {
        return Err(Error::Diverged);
    }
    model.record = Some(TrainingRecord {
        seed,
        hyper,
        final_loss,
        loss_history: history,
    });
    Ok(model)
}

pub fn predict(m: &dyn Classifier, r: &RasterImage) -> Result<Vec<f64>> {
    m.predict(r)
}

/// Accuracy of one (label, SNR) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrCell {
    pub label: String,
    pub snr_db: f64,
    pub accuracy: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub labels: Vec<String>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub acc: f64,
    /// Binary only: recall of the unstable class.
    pub tur: Option<f64>,
    /// Binary only: recall of the stable class.
    pub tsr: Option<f64>,
    /// `None` for classes absent from the evaluated set.
    pub per_class_acc: Vec<Option<f64>>,
    pub per_snr: Vec<SnrCell>,
}

/// Index treated as "unstable" in binary problems: the label literally
/// named `unstable`, else index 1.
pub fn unstable_index(labels: &[String]) -> usize {
    labels.iter().position(|l| l.eq_ignore_ascii_case("unstable")).unwrap_or(1)
}

impl Metrics {
    pub fn from_predictions(
        labels: &[String],
        truth: &[usize],
        predicted: &[usize],
        snrs: &[Option<f64>],
    ) -> Result<Self> {
        let k = labels.len();
        if truth.is_empty() {
            return Err(Error::invalid("cannot evaluate an empty split"));
        }
        if truth.len() != predicted.len() || snrs.len() != truth.len() {
            return Err(Error::Shape("truth/prediction/snr lengths differ".into()));
        }
        let mut confusion = vec![vec![0u64; k]; k];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= k || p >= k {
                return Err(Error::invalid(format!("label {} outside map of {k}", t.max(p))));
            }
            confusion[t][p] += 1;
        }
        let total = truth.len() as f64;
        let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();
        let recall = |i: usize| {
            let n: u64 = confusion[i].iter().sum();
            (n > 0).then(|| confusion[i][i] as f64 / n as f64)
        };
        let per_class_acc: Vec<Option<f64>> = (0..k).map(recall).collect();
        let (tur, tsr) = if k == 2 {
            let u = unstable_index(labels);
            (Some(recall(u).unwrap_or(0.0)), Some(recall(1 - u).unwrap_or(0.0)))
        } else {
            (None, None)
        };
        let mut cells: BTreeMap<(usize, i64), (u64, u64)> = BTreeMap::new();
        for ((&t, &p), snr) in truth.iter().zip(predicted).zip(snrs) {
            if let Some(s) = snr {
                // key on milli-dB so grid values group exactly
                let e = cells.entry((t, (s * 1000.0).round() as i64)).or_default();
                e.0 += (t == p) as u64;
                e.1 += 1;
            }
        }
        let per_snr = cells
            .into_iter()
            .map(|((t, s), (c, n))| SnrCell {
                label: labels[t].clone(),
                snr_db: s as f64 / 1000.0,
                accuracy: c as f64 / n as f64,
                count: n,
            })
            .collect();
        Ok(Self {
            labels: labels.to_vec(),
            confusion,
            acc: correct as f64 / total,
            tur,
            tsr,
            per_class_acc,
            per_snr,
        })
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}

/// Evaluates `m` on one split of `d` by argmax prediction.
pub fn evaluate(m: &dyn Classifier, d: &Dataset, split: Split) -> Result<Metrics> {
    if m.labels().len() != d.labels.len() {
        return Err(Error::invalid("model and dataset label maps differ"));
    }
    let items: Vec<&DatasetItem> = d.split(split).collect();
    if let Some(bad) = items.iter().find(|i| i.label >= d.labels.len()) {
        return Err(Error::invalid(format!("label {} outside map", bad.label)));
    }
    let predicted: Vec<usize> = items
        .par_iter()
        .map(|i| m.predict(&i.image).map(|p| argmax(&p)))
        .collect::<Result<_>>()?;
    let truth: Vec<usize> = items.iter().map(|i| i.label).collect();
    let snrs: Vec<Option<f64>> = items.iter().map(|i| i.snr_db).collect();
    Metrics::from_predictions(&d.labels, &truth, &predicted, &snrs)
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    arch: Arch,
    input: (usize, usize, usize),
    pool: (usize, usize),
    labels: Vec<String>,
    feat_mean: Vec<f64>,
    feat_std: Vec<f64>,
    record: Option<TrainingRecord>,
    n_params: usize,
}

const MODEL_MAGIC: &[u8; 4] = b"TFMD";
const MODEL_VERSION: u32 = 1;

/// Model file: magic `TFMD`, u32 version, u32 header length, JSON header,
/// then every parameter as f32 in [`Model::params`] order.
pub fn write_model(m: &Model, w: &mut impl Write) -> std::io::Result<()> {
    let header = ModelHeader {
        arch: m.arch.clone(),
        input: m.input,
        pool: m.pool,
        labels: m.labels.clone(),
        feat_mean: m.feat_mean.clone(),
        feat_std: m.feat_std.clone(),
        record: m.record.clone(),
        n_params: m.n_params(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    w.write_all(MODEL_MAGIC)?;
    put_u32(w, MODEL_VERSION)?;
    put_u32(w, json.len() as u32)?;
    w.write_all(&json)?;
    for p in m.params() {
        put_f32(w, p as f32)?;
    }
    Ok(())
}

pub fn read_model(r: &mut impl Read) -> Result<Model> {
    let fmt = |msg: String| Error::Format { format: "model", msg };
    let io = |e: std::io::Error| fmt(e.to_string());
    let magic: [u8; 4] = get_array(r).map_err(io)?;
    if &magic != MODEL_MAGIC {
        return Err(fmt("bad magic".into()));
    }
    if get_u32(r).map_err(io)? != MODEL_VERSION {
        return Err(fmt("unsupported version".into()));
    }
    let len = get_u32(r).map_err(io)? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(io)?;
    let h: ModelHeader = serde_json::from_slice(&json)?;
    let mut m = Model::build(h.arch, h.input, h.pool, h.labels, |_, _| 0.0)?;
    if m.n_params() != h.n_params || h.feat_mean.len() != m.feat_mean.len() || h.feat_std.len() != m.feat_std.len() {
        return Err(fmt("header shapes disagree with architecture".into()));
    }
    let params = (0..h.n_params)
        .map(|_| get_f32(r).map(|v| v as f64))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(io)?;
    if params.iter().any(|p| !p.is_finite()) {
        return Err(fmt("non-finite weights".into()));
    }
    m.set_params(&params)?;
    m.feat_mean = h.feat_mean;
    m.feat_std = h.feat_std;
    m.record = h.record;
    Ok(m)
}

pub fn save_model(m: &Model, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_model(m, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(&mut BufReader::new(f))
}

/// Classifier that answers with the source label recorded in the image
/// provenance. Useful for checking harnesses independently of any model.
pub struct LabelOracle {
    labels: Vec<String>,
}

impl LabelOracle {
    pub fn new(labels: Vec<String>) -> Self {
        Self { labels }
    }
}

impl Classifier for LabelOracle {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, image: &RasterImage) -> Result<Vec<f64>> {
        let src = image
            .provenance
            .iter()
            .find_map(|d| d.source.as_ref())
            .ok_or_else(|| Error::invalid("image carries no source label"))?;
        let i = self
            .labels
            .iter()
            .position(|l| l == src)
            .ok_or_else(|| Error::invalid(format!("source label {src} not in map")))?;
        let mut p = vec![0.0; self.labels.len()];
        p[i] = 1.0;
        Ok(p)
    }
}
