//! Staged radar classification, SNR sweeps and the transient-stability
//! experiment.

mod radar;
mod tsa;

pub use radar::*;
pub use tsa::*;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::imaging::{dwt_image, gadf, recurrence_plot, Channel, SeriesWindow, Wavelet, RpMode};
use crate::raster::{rasterize, RasterImage, RasterPolicy};
use crate::signal::{analytic_signal, Signal};
use crate::tft::{
    cwd, cwt, default_spwvd_windows, fsst_with, spwvd, stft, wvd, TfMatrix, TransformParams, WindowSpec,
    FSST_THRESHOLD, MORLET_OMEGA0,
};

/// Method names accepted in configs and on the command line.
pub const METHODS: [&str; 9] = ["stft", "fsst", "wvd", "spwvd", "cwd", "cwt", "rp", "gadf", "dwt"];

/// Default parameters for `method` on an `n`-sample record at rate `fs`.
pub fn default_params(method: &str, n: usize, fs: f64) -> Result<TransformParams> {
    Ok(match method {
        "stft" => TransformParams::Stft { window: WindowSpec::hann(128), hop: 32, nfft: 256 },
        "fsst" => TransformParams::Fsst {
            window: WindowSpec::gauss_default(128),
            nfft: 256,
            threshold: FSST_THRESHOLD,
        },
        "wvd" => TransformParams::Wvd,
        "spwvd" => {
            let (g_time, h_lag) = default_spwvd_windows(n);
            TransformParams::Spwvd { g_time, h_lag }
        }
        "cwd" => TransformParams::Cwd { sigma: 1.0 },
        "cwt" => TransformParams::Cwt {
            n_scales: 128,
            f_min: (4.0 * fs / n.max(1) as f64).min(0.05 * fs),
            f_max: 0.45 * fs,
            omega0: MORLET_OMEGA0,
        },
        "rp" => TransformParams::Rp { mode: RpMode::Distance, eps: 0.1 },
        "gadf" => TransformParams::Gadf,
        "dwt" => TransformParams::DwtImg { wavelet: Wavelet::Haar, levels: 3 },
        other => return Err(unknown_method(other, "method")),
    })
}

fn unknown_method(name: &str, field: &str) -> Error {
    Error::Invalid(format!(
        "{field}: unknown method `{name}`; expected one of {}",
        METHODS.join(", ")
    ))
}

/// Parses a `{"method": ..., ...}` object. Missing fields take the defaults
/// of [`default_params`]; errors name `field`.
pub fn parse_transform(v: &Value, field: &str, n: usize, fs: f64) -> Result<TransformParams> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Invalid(format!("{field}: expected an object")))?;
    let method = obj
        .get("method")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Invalid(format!("{field}.method: missing or not a string")))?;
    if !METHODS.contains(&method) {
        return Err(unknown_method(method, &format!("{field}.method")));
    }
    let defaults = serde_json::to_value(default_params(method, n, fs)?)?;
    let mut merged: Map<String, Value> = defaults.as_object().cloned().unwrap_or_default();
    for (k, val) in obj {
        merged.insert(k.clone(), val.clone());
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Invalid(format!("{field}: {e}")))
}

fn series_of(s: &Signal) -> Result<SeriesWindow> {
    if !s.is_real() {
        return Err(Error::invalid("imaging methods take a real series"));
    }
    let v = s.samples().iter().map(|z| z.re).collect();
    SeriesWindow::new(v, s.fs(), Channel::Vm, 0.0)
}

/// Runs one transform. Wigner-type methods receive the analytic signal when
/// given real input; imaging methods take the real series.
pub fn apply_transform(params: &TransformParams, s: &Signal) -> Result<TfMatrix> {
    let complex_input = || -> Result<Signal> {
        if s.is_real() {
            analytic_signal(s)
        } else {
            Ok(s.clone())
        }
    };
    let mut m = match params {
        TransformParams::Stft { window, hop, nfft } => stft(s, window, *hop, *nfft)?,
        TransformParams::Fsst { window, nfft, threshold } => fsst_with(s, window, *nfft, *threshold)?,
        TransformParams::Wvd => wvd(&complex_input()?)?,
        TransformParams::Spwvd { g_time, h_lag } => spwvd(&complex_input()?, g_time, h_lag)?,
        TransformParams::Cwd { sigma } => cwd(&complex_input()?, *sigma)?,
        TransformParams::Cwt { n_scales, f_min, f_max, omega0 } => {
            if *omega0 != MORLET_OMEGA0 {
                return Err(Error::param("omega0", "only the Morlet centre frequency 6 is supported"));
            }
            cwt(s, *n_scales, *f_min, *f_max)?
        }
        TransformParams::Rp { mode, eps } => recurrence_plot(&series_of(s)?, *mode, *eps)?.into_tf(params.clone())?,
        TransformParams::Gadf => gadf(&series_of(s)?).into_tf(params.clone())?,
        TransformParams::DwtImg { wavelet, levels } => dwt_image(&series_of(s)?, *wavelet, *levels)?.into_tf(params.clone())?,
    };
    if m.descriptor().source.is_none() {
        m.set_source(s.meta.label.clone());
    }
    Ok(m)
}

/// Transform plus raster policy for one pipeline stage.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StageSpec {
    pub transform: TransformParams,
    pub raster: RasterPolicy,
}

impl StageSpec {
    pub fn image(&self, s: &Signal) -> Result<RasterImage> {
        rasterize(&apply_transform(&self.transform, s)?, &self.raster)
    }
}
