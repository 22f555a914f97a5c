//! Python module `tfimage`.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tfi_core::classify::{load_model, Classifier, Model};
use tfi_core::pipeline::{
    apply_transform, gen_tsa_surrogate, parse_transform, run_radar_pipeline, synth_item, tsa_experiment,
    Imaging, Pipeline, PipelineConfig, SmibParams, TsaExperiment,
};
use tfi_core::raster::{export, rasterize, ExportFormat, RasterImage, RasterPolicy};
use tfi_core::signal::{load_tfsg, save_tfsg};
use tfi_core::tft::save_tftm;
use tfi_core::waveforms::{waveform_catalog, WaveformKind, DEFAULT_FS, DEFAULT_SAMPLES};

fn err(e: tfi_core::Error) -> PyErr {
    if e.is_io() {
        PyOSError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A complex signal sampled at `fs` Hz.
#[pyclass(name = "Signal", module = "tfimage", frozen)]
struct PySignal {
    inner: tfi_core::Signal,
}

#[pymethods]
impl PySignal {
    #[new]
    #[pyo3(signature = (samples, fs, label=None))]
    fn new(samples: Vec<Complex64>, fs: f64, label: Option<String>) -> PyResult<Self> {
        let mut inner = tfi_core::Signal::new(samples, fs).map_err(err)?;
        inner.meta.label = label;
        Ok(Self { inner })
    }

    /// One catalog waveform with unit power; white noise is added when
    /// `snr_db` is given.
    #[staticmethod]
    #[pyo3(signature = (label, fs=DEFAULT_FS, n=DEFAULT_SAMPLES, seed=0, snr_db=None))]
    fn synthesize(label: &str, fs: f64, n: usize, seed: u64, snr_db: Option<f64>) -> PyResult<Self> {
        let cat = waveform_catalog();
        let c = WaveformKind::from_label(label)
            .and_then(|k| cat.index_of(k))
            .ok_or_else(|| PyValueError::new_err(format!("unknown class `{label}`")))?;
        let inner = match snr_db {
            Some(snr) => synth_item(&cat, c, fs, n, snr, seed),
            None => cat.generate(c, fs, n, seed),
        }
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: load_tfsg(&path).map_err(err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_tfsg(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn fs(&self) -> f64 {
        self.inner.fs()
    }

    #[getter]
    fn label(&self) -> Option<String> {
        self.inner.meta.label.clone()
    }

    #[getter]
    fn samples(&self) -> Vec<Complex64> {
        self.inner.samples().to_vec()
    }

    fn mean_power(&self) -> f64 {
        self.inner.mean_power()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Signal(n={}, fs={}, label={:?})", self.inner.len(), self.inner.fs(), self.inner.meta.label)
    }
}

/// A time-frequency (or imaging) matrix with its descriptor.
#[pyclass(name = "TfMatrix", module = "tfimage", frozen)]
struct PyTfMatrix {
    inner: tfi_core::TfMatrix,
}

#[pymethods]
impl PyTfMatrix {
    /// Transform name, e.g. `fsst`.
    #[getter]
    fn method(&self) -> PyResult<String> {
        let v = serde_json::to_value(&self.inner.descriptor().params).map_err(json_err)?;
        Ok(v["method"].as_str().unwrap_or_default().to_string())
    }

    /// `(n_freq, n_time)`.
    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.n_freq(), self.inner.n_time())
    }

    #[getter]
    fn f_axis(&self) -> Vec<f64> {
        self.inner.f_axis().to_vec()
    }

    #[getter]
    fn t_axis(&self) -> Vec<f64> {
        self.inner.t_axis().to_vec()
    }

    #[getter]
    fn interior(&self) -> (usize, usize) {
        self.inner.descriptor().interior
    }

    /// Descriptor as a JSON string.
    fn descriptor(&self) -> PyResult<String> {
        serde_json::to_string(self.inner.descriptor()).map_err(json_err)
    }

    /// Row-major magnitudes, frequency-major.
    fn magnitude(&self) -> Vec<f64> {
        self.inner.magnitude()
    }

    /// Row-major values; real matrices come back as real numbers.
    fn values(&self) -> Vec<Complex64> {
        (0..self.inner.n_freq())
            .flat_map(|f| (0..self.inner.n_time()).map(move |t| (f, t)))
            .map(|(f, t)| self.inner.at(f, t))
            .collect()
    }

    #[pyo3(signature = (height=224, width=224, scaling="db"))]
    fn rasterize(&self, height: usize, width: usize, scaling: &str) -> PyResult<PyImage> {
        let policy = match scaling {
            "db" => RasterPolicy::db(height, width),
            "linear" => RasterPolicy::linear(height, width),
            other => return Err(PyValueError::new_err(format!("scaling must be db or linear, got `{other}`"))),
        };
        Ok(PyImage { inner: rasterize(&self.inner, &policy).map_err(err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_tftm(&self.inner, &path).map_err(err)
    }
}

/// An H×W×C image with pixels in [0, 1].
#[pyclass(name = "Image", module = "tfimage", frozen)]
struct PyImage {
    inner: RasterImage,
}

#[pymethods]
impl PyImage {
    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        self.inner.shape()
    }

    /// Interleaved HWC pixels.
    #[getter]
    fn pixels(&self) -> Vec<f32> {
        self.inner.pixels().to_vec()
    }

    fn save_png(&self, path: PathBuf) -> PyResult<()> {
        export(&self.inner, ExportFormat::Png, &path).map_err(err)
    }

    fn save_tensor(&self, path: PathBuf) -> PyResult<()> {
        export(&self.inner, ExportFormat::Tensor, &path).map_err(err)
    }
}

/// A trained desk classifier.
#[pyclass(name = "Model", module = "tfimage", frozen)]
struct PyModel {
    inner: Model,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: load_model(&path).map_err(err)? })
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    fn predict(&self, image: &PyImage) -> PyResult<Vec<f64>> {
        self.inner.predict(&image.inner).map_err(err)
    }
}

#[pyfunction]
fn catalog_labels() -> Vec<String> {
    waveform_catalog().labels()
}

/// Frank/P1/P2 (order M) or P3/P4 (order Nc) chip phases in radians.
#[pyfunction]
fn code_phases(kind: &str, order: usize) -> PyResult<Vec<f64>> {
    let k = WaveformKind::from_label(kind).ok_or_else(|| PyValueError::new_err(format!("unknown code `{kind}`")))?;
    tfi_core::waveforms::code_phases(k, order).map_err(err)
}

/// Runs one transform; `params` is an optional JSON object overriding the
/// method defaults.
#[pyfunction]
#[pyo3(signature = (signal, method, params=None))]
fn transform(signal: &PySignal, method: &str, params: Option<&str>) -> PyResult<PyTfMatrix> {
    let mut v = match params {
        Some(p) => serde_json::from_str(p).map_err(json_err)?,
        None => serde_json::json!({}),
    };
    if !v.is_object() {
        return Err(PyValueError::new_err("params must be a JSON object"));
    }
    v["method"] = serde_json::Value::String(method.to_string());
    let s = &signal.inner;
    let p = parse_transform(&v, "transform", s.len(), s.fs()).map_err(err)?;
    Ok(PyTfMatrix { inner: apply_transform(&p, s).map_err(err)? })
}

/// Classifies one signal with the pipeline config at `config_path`;
/// returns the trace as JSON.
#[pyfunction]
fn run_pipeline(config_path: PathBuf, signal: &PySignal) -> PyResult<String> {
    let text = std::fs::read_to_string(&config_path).map_err(|e| PyOSError::new_err(e.to_string()))?;
    let mut cfg = PipelineConfig::from_json(&text).map_err(err)?;
    cfg.resolve_paths(config_path.parent().unwrap_or(std::path::Path::new(".")));
    let p = Pipeline::load(cfg, waveform_catalog()).map_err(err)?;
    let out = run_radar_pipeline(&p, &signal.inner).map_err(err)?;
    serde_json::to_string(&out).map_err(json_err)
}

/// Integrates the single-machine surrogate. Returns `(stable, delta)`.
#[pyfunction]
#[pyo3(signature = (params=None, seed=0))]
fn tsa_surrogate(params: Option<&str>, seed: u64) -> PyResult<(bool, Vec<f64>)> {
    let p: SmibParams = match params {
        Some(t) => serde_json::from_str(t).map_err(json_err)?,
        None => SmibParams::default(),
    };
    let c = gen_tsa_surrogate(&p, seed).map_err(err)?;
    Ok((c.stable, c.delta))
}

/// Trains and tests one imaging method on balanced surrogate cases.
#[pyfunction]
#[pyo3(signature = (imaging="dwt", n_cases=200, seed=0))]
fn run_tsa<'py>(py: Python<'py>, imaging: &str, n_cases: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let imaging: Imaging = serde_json::from_value(serde_json::Value::String(imaging.to_lowercase())).map_err(json_err)?;
    let cfg = TsaExperiment { imaging, n_cases, seed, ..TsaExperiment::default() };
    let m = py.detach(|| tsa_experiment(&cfg)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("acc", m.acc)?;
    d.set_item("tur", m.tur)?;
    d.set_item("tsr", m.tsr)?;
    d.set_item("confusion", m.confusion)?;
    Ok(d)
}

#[pymodule]
fn tfimage(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySignal>()?;
    m.add_class::<PyTfMatrix>()?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(catalog_labels, m)?)?;
    m.add_function(wrap_pyfunction!(code_phases, m)?)?;
    m.add_function(wrap_pyfunction!(transform, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(tsa_surrogate, m)?)?;
    m.add_function(wrap_pyfunction!(run_tsa, m)?)?;
    Ok(())
}
