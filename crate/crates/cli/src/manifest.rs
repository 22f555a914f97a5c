//! Dataset manifests: tensor files plus a JSON index with content hashes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use tfi_core::classify::{Dataset, DatasetItem, Split};
use tfi_core::pipeline::{parse_transform, synth_item, StageSpec, TsaExperiment};
use tfi_core::raster::{export, load_tensor, ExportFormat, RasterImage, RasterPolicy};
use tfi_core::rng::derive_seed;
use tfi_core::waveforms::{waveform_catalog, Catalog, DEFAULT_FS, DEFAULT_SAMPLES};
use tfi_core::{Error, Result};

pub const MANIFEST_SCHEMA: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Radar,
    Tsa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub label: String,
    pub snr_db: Option<f64>,
    pub split: Split,
    pub sha256: String,
    pub source: Vec<tfi_core::tft::TfDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub kind: DatasetKind,
    pub tool_version: String,
    pub seed: u64,
    pub labels: Vec<String>,
    /// The resolved build config.
    pub config: Value,
    pub items: Vec<ManifestItem>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(Error::Invalid(format!(
                "{}: manifest schema {} not supported (expected {MANIFEST_SCHEMA})",
                path.display(),
                m.schema
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Checks labels against the map and every tensor against its hash.
    /// A missing tensor is an I/O error; an altered one is a validation error.
    pub fn verify(&self, root: &Path) -> Result<()> {
        for (i, item) in self.items.iter().enumerate() {
            if !self.labels.contains(&item.label) {
                return Err(Error::Invalid(format!("item {i}: label `{}` not in label map", item.label)));
            }
            let p = root.join(&item.path);
            let h = sha256_file(&p)?;
            if h != item.sha256 {
                return Err(Error::Invalid(format!(
                    "item {i}: {} content hash mismatch (expected {}, found {h})",
                    p.display(),
                    item.sha256
                )));
            }
        }
        Ok(())
    }

    /// Verifies, then loads every tensor into a dataset.
    pub fn dataset(&self, root: &Path) -> Result<Dataset> {
        self.verify(root)?;
        let mut d = Dataset::new(self.labels.clone());
        for item in &self.items {
            let mut image = load_tensor(&root.join(&item.path))?;
            if image.provenance.is_empty() {
                image.provenance = item.source.clone();
            }
            let label = self.labels.iter().position(|l| *l == item.label).expect("verified");
            d.push(DatasetItem { image, label, snr_db: item.snr_db, split: item.split })?;
        }
        Ok(d)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRadarConfig {
    #[serde(default)]
    schema: Option<u32>,
    #[serde(default)]
    fs: Option<f64>,
    #[serde(default)]
    n_samples: Option<usize>,
    transform: Value,
    #[serde(default)]
    raster: Option<RasterPolicy>,
    n_per_class: usize,
    snr_db: Vec<f64>,
    #[serde(default)]
    split: Option<(f64, f64, f64)>,
    #[serde(default)]
    catalog: Option<PathBuf>,
}

/// Radar dataset recipe: `n_per_class` noisy signals per class and SNR,
/// imaged with one stage spec.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadarDatasetConfig {
    pub schema: u32,
    pub fs: f64,
    pub n_samples: usize,
    #[serde(flatten)]
    pub spec: StageSpec,
    pub n_per_class: usize,
    pub snr_db: Vec<f64>,
    pub split: (f64, f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
}

fn check_split(s: (f64, f64, f64)) -> Result<()> {
    let ok = [s.0, s.1, s.2].iter().all(|v| v.is_finite() && *v >= 0.0) && ((s.0 + s.1 + s.2) - 1.0).abs() < 1e-9;
    if !ok {
        return Err(Error::Invalid("split: fractions must be non-negative and sum to 1".into()));
    }
    Ok(())
}

impl RadarDatasetConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawRadarConfig = serde_json::from_str(text)?;
        let schema = raw.schema.unwrap_or(MANIFEST_SCHEMA);
        if schema != MANIFEST_SCHEMA {
            return Err(Error::Invalid(format!("schema: version {schema} not supported")));
        }
        let fs = raw.fs.unwrap_or(DEFAULT_FS);
        let n = raw.n_samples.unwrap_or(DEFAULT_SAMPLES);
        let transform = parse_transform(&raw.transform, "transform", n, fs)?;
        if raw.n_per_class == 0 {
            return Err(Error::Invalid("n_per_class: must be at least 1".into()));
        }
        if raw.snr_db.is_empty() || raw.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Invalid("snr_db: must be a nonempty list of finite values".into()));
        }
        let split = raw.split.unwrap_or((0.6, 0.1, 0.3));
        check_split(split)?;
        Ok(Self {
            schema,
            fs,
            n_samples: n,
            spec: StageSpec { transform, raster: raw.raster.unwrap_or_default() },
            n_per_class: raw.n_per_class,
            snr_db: raw.snr_db,
            split,
            catalog: raw.catalog,
        })
    }
}

/// Uniform draw in [0, 1) from a derived seed.
fn unit(seed: u64) -> f64 {
    (seed >> 11) as f64 / (1u64 << 53) as f64
}

fn split_for(u: f64, s: (f64, f64, f64)) -> Split {
    if u < s.0 {
        Split::Train
    } else if u < s.0 + s.1 {
        Split::Val
    } else {
        Split::Test
    }
}

fn write_item(out: &Path, rel: PathBuf, image: &RasterImage) -> Result<String> {
    let p = out.join(&rel);
    export(image, ExportFormat::Tensor, &p)?;
    sha256_file(&p)
}

fn items_dir(out: &Path) -> Result<PathBuf> {
    let dir = out.join("items");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

pub fn load_catalog(path: Option<&Path>) -> Result<Catalog> {
    match path {
        None => Ok(waveform_catalog()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Catalog::from_json(&text).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))
        }
    }
}

pub fn build_radar(cfg: &RadarDatasetConfig, catalog: &Catalog, seed: u64, out: &Path) -> Result<Manifest> {
    items_dir(out)?;
    let labels = catalog.labels();
    let mut items = Vec::new();
    for (c, label) in labels.iter().enumerate() {
        for (j, &snr) in cfg.snr_db.iter().enumerate() {
            for i in 0..cfg.n_per_class {
                let item_seed = derive_seed(seed, &[c as u64, j as u64, i as u64]);
                let s = synth_item(catalog, c, cfg.fs, cfg.n_samples, snr, item_seed)?;
                let image = cfg.spec.image(&s)?;
                let rel = PathBuf::from("items").join(format!("{c:02}_{label}_{j:02}_{i:04}.tftn"));
                let sha256 = write_item(out, rel.clone(), &image)?;
                items.push(ManifestItem {
                    path: rel,
                    label: label.clone(),
                    snr_db: Some(snr),
                    split: split_for(unit(derive_seed(item_seed, &[9])), cfg.split),
                    sha256,
                    source: image.provenance.clone(),
                });
            }
        }
    }
    Ok(Manifest {
        schema: MANIFEST_SCHEMA,
        kind: DatasetKind::Radar,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        labels,
        config: serde_json::to_value(cfg)?,
        items,
    })
}

pub fn build_tsa(cfg: &TsaExperiment, out: &Path) -> Result<Manifest> {
    items_dir(out)?;
    let d = cfg.dataset()?;
    let mut items = Vec::with_capacity(d.items.len());
    for (k, it) in d.items.iter().enumerate() {
        let label = d.labels[it.label].clone();
        let rel = PathBuf::from("items").join(format!("{k:05}_{label}.tftn"));
        let sha256 = write_item(out, rel.clone(), &it.image)?;
        items.push(ManifestItem {
            path: rel,
            label,
            snr_db: None,
            split: it.split,
            sha256,
            source: it.image.provenance.clone(),
        });
    }
    Ok(Manifest {
        schema: MANIFEST_SCHEMA,
        kind: DatasetKind::Tsa,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        labels: d.labels.clone(),
        config: serde_json::to_value(cfg)?,
        items,
    })
}
