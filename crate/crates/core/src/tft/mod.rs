//! Time-frequency transforms and the `TfMatrix` container they produce.

mod cwt;
mod io;
mod stft;
mod wigner;
pub mod window;

pub use cwt::{cwt, cwt_frequencies, MORLET_OMEGA0};
pub use io::{load_tftm, read_tftm, save_tftm, write_tftm};
pub use stft::{fsst, fsst_detailed, fsst_detailed_with, fsst_reconstruct, fsst_with, istft, stft, FSST_THRESHOLD};
pub use wigner::{choi_williams_kernel, cwd, default_spwvd_windows, spwvd, wvd, wvd_raw};
pub use window::{WindowKind, WindowSpec};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{RpMode, Wavelet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Stft,
    Fsst,
    Wvd,
    Spwvd,
    Cwd,
    Cwt,
    Rp,
    Gadf,
    DwtImg,
}

impl TransformKind {
    pub fn code(self) -> u8 {
        match self {
            Self::Stft => 0,
            Self::Fsst => 1,
            Self::Wvd => 2,
            Self::Spwvd => 3,
            Self::Cwd => 4,
            Self::Cwt => 5,
            Self::Rp => 6,
            Self::Gadf => 7,
            Self::DwtImg => 8,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        [
            Self::Stft,
            Self::Fsst,
            Self::Wvd,
            Self::Spwvd,
            Self::Cwd,
            Self::Cwt,
            Self::Rp,
            Self::Gadf,
            Self::DwtImg,
        ]
        .into_iter()
        .find(|k| k.code() == code)
    }

    /// Time-series images rather than time-frequency distributions.
    pub fn is_imaging(self) -> bool {
        matches!(self, Self::Rp | Self::Gadf | Self::DwtImg)
    }
}

/// Full parameter record of a transform run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum TransformParams {
    Stft { window: WindowSpec, hop: usize, nfft: usize },
    Fsst { window: WindowSpec, nfft: usize, threshold: f64 },
    Wvd,
    Spwvd { g_time: WindowSpec, h_lag: WindowSpec },
    Cwd { sigma: f64 },
    Cwt { n_scales: usize, f_min: f64, f_max: f64, omega0: f64 },
    Rp { mode: RpMode, eps: f64 },
    Gadf,
    #[serde(rename = "dwt")]
    DwtImg { wavelet: Wavelet, levels: usize },
}

impl TransformParams {
    pub fn kind(&self) -> TransformKind {
        match self {
            Self::Stft { .. } => TransformKind::Stft,
            Self::Fsst { .. } => TransformKind::Fsst,
            Self::Wvd => TransformKind::Wvd,
            Self::Spwvd { .. } => TransformKind::Spwvd,
            Self::Cwd { .. } => TransformKind::Cwd,
            Self::Cwt { .. } => TransformKind::Cwt,
            Self::Rp { .. } => TransformKind::Rp,
            Self::Gadf => TransformKind::Gadf,
            Self::DwtImg { .. } => TransformKind::DwtImg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfDescriptor {
    pub params: TransformParams,
    /// Sample rate of the source (1 for unitless imaging matrices).
    pub fs: f64,
    pub n_samples: usize,
    /// Columns `[start, end)` unaffected by edge zero-padding.
    pub interior: (usize, usize),
    /// Label carried over from the source signal, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl TfDescriptor {
    pub fn kind(&self) -> TransformKind {
        self.params.kind()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TfValues {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// A `[n_freq × n_time]` row-major time-frequency array. Row 0 is the
/// lowest frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct TfMatrix {
    values: TfValues,
    n_freq: usize,
    n_time: usize,
    t_axis: Vec<f64>,
    f_axis: Vec<f64>,
    descriptor: TfDescriptor,
}

pub(crate) fn uniform_axis(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + i as f64 * step).collect()
}

impl TfMatrix {
    pub fn new(
        values: TfValues,
        n_freq: usize,
        n_time: usize,
        t_axis: Vec<f64>,
        f_axis: Vec<f64>,
        descriptor: TfDescriptor,
    ) -> Result<Self> {
        let len = match &values {
            TfValues::Real(v) => v.len(),
            TfValues::Complex(v) => v.len(),
        };
        if n_freq == 0 || n_time == 0 {
            return Err(Error::Shape("empty time-frequency matrix".into()));
        }
        if len != n_freq * n_time || t_axis.len() != n_time || f_axis.len() != n_freq {
            return Err(Error::Shape(format!(
                "{len} values for {n_freq}x{n_time} with axes {}x{}",
                f_axis.len(),
                t_axis.len()
            )));
        }
        let monotone = |a: &[f64]| a.windows(2).all(|w| w[1] > w[0]);
        if !monotone(&t_axis) || !monotone(&f_axis) {
            return Err(Error::invalid("axes must be strictly increasing"));
        }
        Ok(Self {
            values,
            n_freq,
            n_time,
            t_axis,
            f_axis,
            descriptor,
        })
    }

    /// Wraps a real square-or-rectangular image (rows × cols) with unit axes.
    pub fn from_image(rows: usize, cols: usize, data: Vec<f64>, params: TransformParams) -> Result<Self> {
        let descriptor = TfDescriptor {
            params,
            fs: 1.0,
            n_samples: cols,
            interior: (0, cols),
            source: None,
        };
        Self::new(
            TfValues::Real(data),
            rows,
            cols,
            uniform_axis(0.0, 1.0, cols),
            uniform_axis(0.0, 1.0, rows),
            descriptor,
        )
    }

    pub fn values(&self) -> &TfValues {
        &self.values
    }

    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn t_axis(&self) -> &[f64] {
        &self.t_axis
    }

    pub fn f_axis(&self) -> &[f64] {
        &self.f_axis
    }

    pub fn descriptor(&self) -> &TfDescriptor {
        &self.descriptor
    }

    pub fn kind(&self) -> TransformKind {
        self.descriptor.kind()
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.values, TfValues::Complex(_))
    }

    pub fn real(&self) -> Option<&[f64]> {
        match &self.values {
            TfValues::Real(v) => Some(v),
            TfValues::Complex(_) => None,
        }
    }

    pub fn complex(&self) -> Option<&[Complex64]> {
        match &self.values {
            TfValues::Complex(v) => Some(v),
            TfValues::Real(_) => None,
        }
    }

    /// Value at (frequency row, time column) as a complex number.
    pub fn at(&self, f: usize, t: usize) -> Complex64 {
        let i = f * self.n_time + t;
        match &self.values {
            TfValues::Real(v) => Complex64::new(v[i], 0.0),
            TfValues::Complex(v) => v[i],
        }
    }

    /// |value| for complex matrices, the value itself for real ones.
    pub fn magnitude(&self) -> Vec<f64> {
        match &self.values {
            TfValues::Real(v) => v.clone(),
            TfValues::Complex(v) => v.iter().map(|z| z.norm()).collect(),
        }
    }

    pub fn column(&self, t: usize) -> Vec<Complex64> {
        (0..self.n_freq).map(|f| self.at(f, t)).collect()
    }

    pub fn set_source(&mut self, source: Option<String>) {
        self.descriptor.source = source;
    }

    pub fn scaled(&self, a: f64) -> Self {
        let values = match &self.values {
            TfValues::Real(v) => TfValues::Real(v.iter().map(|x| x * a).collect()),
            TfValues::Complex(v) => TfValues::Complex(v.iter().map(|x| x * a).collect()),
        };
        Self { values, ..self.clone() }
    }
}

/// Transposes column-major frame data (`n_time` frames of `n_freq` bins)
/// into the row-major frequency × time layout.
pub(crate) fn frames_to_rows<T: Copy + Default>(frames: &[Vec<T>], n_freq: usize) -> Vec<T> {
    let n_time = frames.len();
    let mut out = vec![T::default(); n_freq * n_time];
    for (t, col) in frames.iter().enumerate() {
        for (f, &v) in col.iter().enumerate().take(n_freq) {
            out[f * n_time + t] = v;
        }
    }
    out
}
