use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::window::{cola_constant, WindowSpec};
use super::{frames_to_rows, uniform_axis, TfDescriptor, TfMatrix, TfValues, TransformKind, TransformParams};
use crate::error::{Error, Result};
use crate::signal::Signal;

/// Fraction of the global `|V_g|` maximum below which synchrosqueezing
/// drops coefficients.
pub const FSST_THRESHOLD: f64 = 1e-4;

fn check_analysis_window(w: &WindowSpec, nfft: usize, n: usize) -> Result<()> {
    w.validate()?;
    if w.length < 4 {
        return Err(Error::param("window.length", "analysis windows need at least 4 samples"));
    }
    if nfft < w.length {
        return Err(Error::param("nfft", format!("{nfft} shorter than window {}", w.length)));
    }
    if w.length > n {
        return Err(Error::param(
            "window.length",
            format!("window of {} samples longer than signal of {n}", w.length),
        ));
    }
    Ok(())
}

/// Short-time Fourier transform. Frame `m` starts at sample `m·hop`; the
/// phase is referenced to the frame start. Frames running past the end are
/// zero-padded.
pub fn stft(s: &Signal, w: &WindowSpec, hop: usize, nfft: usize) -> Result<TfMatrix> {
    if hop == 0 {
        return Err(Error::param("hop", "must be at least 1"));
    }
    let n = s.len();
    check_analysis_window(w, nfft, n)?;
    let l = w.length;
    let g = w.values();
    let n_frames = (n - l).div_ceil(hop) + 1;
    let x = s.samples();
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let frames: Vec<Vec<Complex64>> = (0..n_frames)
        .into_par_iter()
        .map(|m| {
            let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
            for (i, gi) in g.iter().enumerate() {
                if let Some(v) = x.get(m * hop + i) {
                    buf[i] = v * gi;
                }
            }
            fft.process(&mut buf);
            buf
        })
        .collect();
    let fs = s.fs();
    let descriptor = TfDescriptor {
        params: TransformParams::Stft { window: *w, hop, nfft },
        fs,
        n_samples: n,
        interior: (0, (n - l) / hop + 1),
        source: s.meta.label.clone(),
    };
    TfMatrix::new(
        TfValues::Complex(frames_to_rows(&frames, nfft)),
        nfft,
        n_frames,
        uniform_axis(l as f64 / 2.0 / fs, hop as f64 / fs, n_frames),
        uniform_axis(0.0, fs / nfft as f64, nfft),
        descriptor,
    )
}

/// Overlap-add inverse of [`stft`]. Each sample is divided by the window
/// weight that actually covered it, so the reconstruction is exact wherever
/// that weight is non-zero.
pub fn istft(v: &TfMatrix, w: &WindowSpec, hop: usize) -> Result<Signal> {
    let d = v.descriptor();
    let (dw, dhop, nfft) = match &d.params {
        TransformParams::Stft { window, hop, nfft } => (window, *hop, *nfft),
        _ => return Err(Error::invalid("istft needs an STFT matrix")),
    };
    if dw != w || dhop != hop {
        return Err(Error::invalid("istft window/hop differ from the forward transform"));
    }
    let c = cola_constant(w, hop)?;
    let values = v.complex().ok_or_else(|| Error::invalid("STFT matrix must be complex"))?;
    let n = d.n_samples;
    let g = w.values();
    let ifft = FftPlanner::new().plan_fft_inverse(nfft);
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    let mut weight = vec![0.0; n];
    let n_time = v.n_time();
    for m in 0..n_time {
        let mut buf: Vec<Complex64> = (0..nfft).map(|k| values[k * n_time + m]).collect();
        ifft.process(&mut buf);
        for (i, gi) in g.iter().enumerate() {
            let idx = m * hop + i;
            if idx < n {
                acc[idx] += buf[i] / nfft as f64;
                weight[idx] += gi;
            }
        }
    }
    // frames hold x·g, so each sample is divided by the window weight that
    // covered it; samples with no weight cannot be recovered
    let floor = 1e-12 * c;
    let out = acc
        .iter()
        .zip(&weight)
        .map(|(a, &wt)| if wt > floor { a / wt } else { Complex64::new(0.0, 0.0) })
        .collect();
    Signal::new(out, d.fs)
}

/// Centered-phase STFTs with the window and its derivative, hop 1, one
/// column per input sample.
fn centered_stft_pair(s: &Signal, w: &WindowSpec, nfft: usize) -> Result<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>)> {
    let g = w.values();
    let dg = w.derivative()?;
    let x = s.samples();
    let n = x.len() as isize;
    let c = w.center() as isize;
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let pairs: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..n)
        .into_par_iter()
        .map(|t| {
            let mut a = vec![Complex64::new(0.0, 0.0); nfft];
            let mut b = vec![Complex64::new(0.0, 0.0); nfft];
            for i in 0..g.len() {
                let u = i as isize - c;
                let idx = t + u;
                if idx < 0 || idx >= n {
                    continue;
                }
                let slot = u.rem_euclid(nfft as isize) as usize;
                let v = x[idx as usize];
                a[slot] = v * g[i];
                b[slot] = v * dg[i];
            }
            fft.process(&mut a);
            fft.process(&mut b);
            (a, b)
        })
        .collect();
    Ok(pairs.into_iter().unzip())
}

/// Fourier synchrosqueezing: returns the squeezed matrix `T` together with
/// the centered-phase STFT `V_g` it was built from.
pub fn fsst_detailed(s: &Signal, w: &WindowSpec, nfft: usize) -> Result<(TfMatrix, TfMatrix)> {
    fsst_detailed_with(s, w, nfft, FSST_THRESHOLD)
}

/// [`fsst_detailed`] with an explicit relative magnitude threshold.
pub fn fsst_detailed_with(s: &Signal, w: &WindowSpec, nfft: usize, threshold: f64) -> Result<(TfMatrix, TfMatrix)> {
    let (t, vg) = squeeze(s, w, nfft, threshold)?;
    let d = t.descriptor().clone();
    let v = TfMatrix::new(
        TfValues::Complex(frames_to_rows(&vg, nfft)),
        nfft,
        d.n_samples,
        t.t_axis().to_vec(),
        t.f_axis().to_vec(),
        TfDescriptor {
            params: TransformParams::Stft { window: *w, hop: 1, nfft },
            ..d
        },
    )?;
    Ok((t, v))
}

/// [`fsst`] with an explicit relative magnitude threshold.
pub fn fsst_with(s: &Signal, w: &WindowSpec, nfft: usize, threshold: f64) -> Result<TfMatrix> {
    Ok(squeeze(s, w, nfft, threshold)?.0)
}

fn squeeze(s: &Signal, w: &WindowSpec, nfft: usize, threshold: f64) -> Result<(TfMatrix, Vec<Vec<Complex64>>)> {
    if !(threshold >= 0.0 && threshold < 1.0) {
        return Err(Error::param("threshold", "must lie in [0, 1)"));
    }
    let n = s.len();
    check_analysis_window(w, nfft, n)?;
    let (vg, vd) = centered_stft_pair(s, w, nfft)?;
    let fs = s.fs();
    let peak_sq = vg
        .iter()
        .flat_map(|col| col.iter().map(|z| z.norm_sqr()))
        .fold(0.0, f64::max);
    let thresh_sq = threshold * threshold * peak_sq;
    let scale = nfft as f64 / (2.0 * std::f64::consts::PI);
    let squeezed: Vec<Vec<Complex64>> = vg
        .par_iter()
        .zip(vd.par_iter())
        .map(|(a, b)| {
            let mut out = vec![Complex64::new(0.0, 0.0); nfft];
            for k in 0..nfft {
                if a[k].norm_sqr() <= thresh_sq || a[k].norm_sqr() == 0.0 {
                    continue;
                }
                // instantaneous frequency in bins
                let shift = (b[k] / a[k]).im * scale;
                let target = (k as f64 - shift).round() as i64;
                out[target.rem_euclid(nfft as i64) as usize] += a[k];
            }
            out
        })
        .collect();
    let l = w.length;
    let c = w.center();
    let descriptor = TfDescriptor {
        params: TransformParams::Fsst { window: *w, nfft, threshold },
        fs,
        n_samples: n,
        interior: (c, n + c + 1 - l),
        source: s.meta.label.clone(),
    };
    let t_axis = uniform_axis(0.0, 1.0 / fs, n);
    let f_axis = uniform_axis(0.0, fs / nfft as f64, nfft);
    let t = TfMatrix::new(
        TfValues::Complex(frames_to_rows(&squeezed, nfft)),
        nfft,
        n,
        t_axis,
        f_axis,
        descriptor,
    )?;
    Ok((t, vg))
}

pub fn fsst(s: &Signal, w: &WindowSpec, nfft: usize) -> Result<TfMatrix> {
    fsst_with(s, w, nfft, FSST_THRESHOLD)
}

/// Column-sum inversion of [`fsst`]: `x[n] = Σ_k T[k,n] / (nfft · g(0))`.
pub fn fsst_reconstruct(t: &TfMatrix, w: &WindowSpec) -> Result<Signal> {
    let d = t.descriptor();
    let nfft = match &d.params {
        TransformParams::Fsst { window, nfft, .. } if window == w => *nfft,
        _ => {
            return Err(Error::invalid(format!(
                "descriptor mismatch: expected an FSST matrix computed with {w:?}, got {:?}",
                d.kind()
            )))
        }
    };
    debug_assert_eq!(d.kind(), TransformKind::Fsst);
    let vals = t.complex().ok_or_else(|| Error::invalid("FSST matrix must be complex"))?;
    let g0 = w.values()[w.center()];
    let n_time = t.n_time();
    let out = (0..n_time)
        .map(|m| (0..t.n_freq()).map(|k| vals[k * n_time + m]).sum::<Complex64>() / (nfft as f64 * g0))
        .collect();
    Signal::new(out, d.fs)
}
