//! Time-series imaging: recurrence plots, Gramian angular difference fields
//! and multilevel DWT images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tft::{TfMatrix, TransformParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "VM")]
    Vm,
    #[serde(rename = "VA")]
    Va,
    #[serde(rename = "VF")]
    Vf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesWindow {
    values: Vec<f64>,
    pub fs: f64,
    pub channel: Channel,
    pub t0: f64,
}

impl SeriesWindow {
    pub fn new(values: Vec<f64>, fs: f64, channel: Channel, t0: f64) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::invalid(format!(
                "series window needs at least 4 samples, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("series window contains non-finite values"));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::param("fs", "must be finite and positive"));
        }
        Ok(Self { values, fs, channel, t0 })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RealMatrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Wraps the matrix in a unit-axis `TfMatrix` for rasterization or TFTM export.
    pub fn into_tf(self, params: TransformParams) -> Result<TfMatrix> {
        TfMatrix::from_image(self.rows, self.cols, self.data, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RpMode {
    Distance,
    Thresholded,
}

/// `D[i,j] = |v_i − v_j|`, or its `≤ eps` indicator in thresholded mode.
pub fn recurrence_plot(w: &SeriesWindow, mode: RpMode, eps: f64) -> Result<RealMatrix> {
    if mode == RpMode::Thresholded && !(eps > 0.0) {
        return Err(Error::param("eps", "must be positive in thresholded mode"));
    }
    let v = w.values();
    let n = v.len();
    let mut data = Vec::with_capacity(n * n);
    for a in v {
        for b in v {
            let d = (a - b).abs();
            data.push(match mode {
                RpMode::Distance => d,
                RpMode::Thresholded => (d <= eps) as u8 as f64,
            });
        }
    }
    Ok(RealMatrix { rows: n, cols: n, data })
}

/// Gramian angular difference field `sin(φ_i − φ_j)` of the min-max
/// normalized series.
pub fn gadf(w: &SeriesWindow) -> RealMatrix {
    let v = w.values();
    let n = v.len();
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let phi: Vec<f64> = v
        .iter()
        .map(|&x| {
            let xn = if hi > lo { 2.0 * (x - lo) / (hi - lo) - 1.0 } else { 0.0 };
            xn.clamp(-1.0, 1.0).acos()
        })
        .collect();
    let mut data = Vec::with_capacity(n * n);
    for a in &phi {
        for b in &phi {
            data.push((a - b).sin());
        }
    }
    RealMatrix { rows: n, cols: n, data }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wavelet {
    Haar,
    Db4,
}

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

/// Daubechies 8-tap scaling filter (4 vanishing moments).
const DB4: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_7,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_85,
    -0.187_034_811_719_093_1,
    0.030_841_381_835_560_76,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_03,
];

impl Wavelet {
    pub fn lowpass(self) -> &'static [f64] {
        match self {
            Wavelet::Haar => &HAAR,
            Wavelet::Db4 => &DB4,
        }
    }

    /// Quadrature mirror highpass `g[n] = (−1)^n h[L−1−n]`.
    pub fn highpass(self) -> Vec<f64> {
        let h = self.lowpass();
        let l = h.len();
        (0..l)
            .map(|n| if n % 2 == 0 { h[l - 1 - n] } else { -h[l - 1 - n] })
            .collect()
    }
}

/// Coefficients of a pyramidal decomposition, ordered
/// `[approx_L, detail_L, …, detail_1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DwtBands {
    pub wavelet: Wavelet,
    pub bands: Vec<Vec<f64>>,
    /// Input length at each level, finest first; odd lengths were extended
    /// periodically by one sample before analysis.
    pub lengths: Vec<usize>,
}

impl DwtBands {
    pub fn levels(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn energy(&self) -> f64 {
        self.bands.iter().flatten().map(|c| c * c).sum()
    }
}

fn analysis_step(x: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut ext = x.to_vec();
    if ext.len() % 2 == 1 {
        ext.push(x[0]);
    }
    let n = ext.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        for (i, (hi, gi)) in h.iter().zip(g).enumerate() {
            let v = ext[(2 * k + i) % n];
            a[k] += hi * v;
            d[k] += gi * v;
        }
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64], h: &[f64], g: &[f64], len: usize) -> Vec<f64> {
    let n = 2 * a.len();
    let mut x = vec![0.0; n];
    for k in 0..a.len() {
        for (i, (hi, gi)) in h.iter().zip(g).enumerate() {
            x[(2 * k + i) % n] += hi * a[k] + gi * d[k];
        }
    }
    x.truncate(len);
    x
}

/// Orthogonal DWT with periodic extension.
pub fn dwt_decompose(w: &SeriesWindow, wavelet: Wavelet, levels: usize) -> Result<DwtBands> {
    if levels == 0 {
        return Err(Error::param("levels", "must be at least 1"));
    }
    if w.len() < 1 << levels {
        return Err(Error::param(
            "levels",
            format!("{levels} levels need at least {} samples, got {}", 1 << levels, w.len()),
        ));
    }
    let h = wavelet.lowpass();
    let g = wavelet.highpass();
    let mut approx = w.values().to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut lengths = Vec::with_capacity(levels);
    for _ in 0..levels {
        lengths.push(approx.len());
        let (a, d) = analysis_step(&approx, h, &g);
        details.push(d);
        approx = a;
    }
    let mut bands = vec![approx];
    bands.extend(details.into_iter().rev());
    Ok(DwtBands { wavelet, bands, lengths })
}

/// Inverse of [`dwt_decompose`].
pub fn dwt_reconstruct(b: &DwtBands) -> Vec<f64> {
    let h = b.wavelet.lowpass();
    let g = b.wavelet.highpass();
    let mut approx = b.bands[0].clone();
    for (level, detail) in b.bands[1..].iter().enumerate() {
        let len = b.lengths[b.lengths.len() - 1 - level];
        approx = synthesis_step(&approx, detail, h, &g, len);
    }
    approx
}

/// Stacks `|coefficients|` of every band (nearest-neighbour upsampled to
/// the window length) as rows `approx → finest detail`, then replicates rows
/// to an N×N image.
pub fn dwt_image(w: &SeriesWindow, wavelet: Wavelet, levels: usize) -> Result<RealMatrix> {
    let bands = dwt_decompose(w, wavelet, levels)?;
    let n = w.len();
    let nb = bands.bands.len();
    let band_rows: Vec<Vec<f64>> = bands
        .bands
        .iter()
        .map(|b| (0..n).map(|c| b[c * b.len() / n].abs()).collect())
        .collect();
    let mut data = Vec::with_capacity(n * n);
    for r in 0..n {
        data.extend_from_slice(&band_rows[r * nb / n]);
    }
    Ok(RealMatrix { rows: n, cols: n, data })
}
