use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{uniform_axis, TfDescriptor, TfMatrix, TfValues, TransformParams};
use crate::error::{Error, Result};
use crate::fft::signed_omega;
use crate::signal::Signal;

/// Morlet centre frequency in rad/sample at unit scale.
pub const MORLET_OMEGA0: f64 = 6.0;

/// Log-spaced pseudo-frequencies, ascending.
pub fn cwt_frequencies(n_scales: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    let ratio = f_max / f_min;
    (0..n_scales)
        .map(|i| f_min * ratio.powf(i as f64 / (n_scales - 1) as f64))
        .collect()
}

/// Morlet continuous wavelet transform evaluated by frequency-domain
/// multiplication. Scales are in samples, `s = (ω0/2π)·fs/f`; the
/// normalization keeps a unit tone's ridge height independent of scale.
pub fn cwt(s: &Signal, n_scales: usize, f_min: f64, f_max: f64) -> Result<TfMatrix> {
    let fs = s.fs();
    if n_scales < 2 {
        return Err(Error::param("n_scales", "need at least 2 scales"));
    }
    if !(f_min > 0.0 && f_min < f_max && f_max <= fs / 2.0) {
        return Err(Error::param(
            "f_min/f_max",
            format!("need 0 < f_min < f_max <= fs/2, got [{f_min}, {f_max}] at fs={fs}"),
        ));
    }
    let n = s.len();
    // zero-pad to 2N so the circular product does not wrap the record onto itself
    let m = 2 * n;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    spec[..n].copy_from_slice(s.samples());
    fwd.process(&mut spec);
    let freqs = cwt_frequencies(n_scales, f_min, f_max);
    let norm = PI.powf(-0.25) * (2.0 * PI).sqrt();
    let rows: Vec<Vec<Complex64>> = freqs
        .par_iter()
        .map(|&f| {
            let scale = MORLET_OMEGA0 / (2.0 * PI) * fs / f;
            let mut buf: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    let d = scale * signed_omega(k, m) - MORLET_OMEGA0;
                    x * (norm * (-0.5 * d * d).exp() / m as f64)
                })
                .collect();
            inv.process(&mut buf);
            buf.truncate(n);
            buf
        })
        .collect();
    let descriptor = TfDescriptor {
        params: TransformParams::Cwt { n_scales, f_min, f_max, omega0: MORLET_OMEGA0 },
        fs,
        n_samples: n,
        interior: (0, n),
        source: s.meta.label.clone(),
    };
    TfMatrix::new(
        TfValues::Complex(rows.concat()),
        n_scales,
        n,
        uniform_axis(0.0, 1.0 / fs, n),
        freqs,
        descriptor,
    )
}
