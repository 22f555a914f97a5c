//! Wigner-Ville family: WVD, smoothed pseudo WVD and Choi-Williams.
//!
//! All three take the instantaneous autocorrelation
//! `K[n,τ] = z[n+τ]·conj(z[n−τ])` and transform over the lag, so bin `k` of
//! an `N`-point lag DFT sits at `k·fs/(2N)`. Outputs are scaled by `2/fs` so
//! that `Σ_k W[n,k]·df = |z[n]|²`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::window::WindowSpec;
use super::{uniform_axis, TfDescriptor, TfMatrix, TfValues, TransformParams};
use crate::error::{Error, Result};
use crate::fft::signed_omega;
use crate::signal::Signal;

const REALNESS_TOL: f64 = 1e-10;

fn check_input(s: &Signal) -> Result<()> {
    if s.len() % 2 != 0 || s.len() < 4 {
        return Err(Error::invalid(format!(
            "Wigner-type distributions need an even length of at least 4, got {}",
            s.len()
        )));
    }
    if s.is_real() {
        return Err(Error::invalid(
            "Wigner-type distributions take complex input; pass real data through analytic_signal first",
        ));
    }
    Ok(())
}

fn max_lag(n: usize, t: usize) -> usize {
    t.min(n - 1 - t).min(n / 2 - 1)
}

/// Lag DFT of each row, laid out row-major as `[time][freq]`.
fn lag_transform(rows: Vec<Vec<Complex64>>) -> Vec<Vec<Complex64>> {
    let n = rows.first().map_or(0, Vec::len);
    let fft = FftPlanner::new().plan_fft_forward(n);
    rows.into_par_iter()
        .map(|mut r| {
            fft.process(&mut r);
            r
        })
        .collect()
}

/// Converts `[time][freq]` complex rows to a real frequency-major matrix after
/// checking that the imaginary parts vanish.
fn finish(s: &Signal, rows: Vec<Vec<Complex64>>, params: TransformParams) -> Result<TfMatrix> {
    let n = s.len();
    let fs = s.fs();
    let scale = 2.0 / fs;
    let (mut max_re, mut max_im) = (0.0f64, 0.0f64);
    for z in rows.iter().flatten() {
        max_re = max_re.max(z.re.abs());
        max_im = max_im.max(z.im.abs());
    }
    if max_im > REALNESS_TOL * max_re.max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!(
            "distribution is not real: max|Im|/max|Re| = {:.3e}",
            max_im / max_re
        )));
    }
    let mut out = vec![0.0; n * n];
    for (t, row) in rows.iter().enumerate() {
        for (k, z) in row.iter().enumerate() {
            out[k * n + t] = z.re * scale;
        }
    }
    let half = match &params {
        TransformParams::Spwvd { g_time, .. } => g_time.length / 2,
        _ => 0,
    };
    let descriptor = TfDescriptor {
        params,
        fs,
        n_samples: n,
        interior: (half, n - half),
        source: s.meta.label.clone(),
    };
    TfMatrix::new(
        TfValues::Real(out),
        n,
        n,
        uniform_axis(0.0, 1.0 / fs, n),
        uniform_axis(0.0, fs / (2.0 * n as f64), n),
        descriptor,
    )
}

fn autocorrelation_rows(z: &[Complex64]) -> Vec<Vec<Complex64>> {
    let n = z.len();
    (0..n)
        .into_par_iter()
        .map(|t| {
            let mut row = vec![Complex64::new(0.0, 0.0); n];
            for tau in 0..=max_lag(n, t) {
                let v = z[t + tau] * z[t - tau].conj();
                row[tau] = v;
                if tau > 0 {
                    row[n - tau] = v.conj();
                }
            }
            row
        })
        .collect()
}

/// Unscaled complex WVD rows `[time][freq]`, before the realness check.
pub fn wvd_raw(s: &Signal) -> Result<Vec<Vec<Complex64>>> {
    check_input(s)?;
    Ok(lag_transform(autocorrelation_rows(s.samples())))
}

pub fn wvd(s: &Signal) -> Result<TfMatrix> {
    let rows = wvd_raw(s)?;
    finish(s, rows, TransformParams::Wvd)
}

/// Default smoothing: `g = hann(33)`, `h = hann(N/2+1)` forced odd.
pub fn default_spwvd_windows(n: usize) -> (WindowSpec, WindowSpec) {
    let mut lh = n / 2 + 1;
    if lh % 2 == 0 {
        lh -= 1;
    }
    (WindowSpec::hann(33), WindowSpec::hann(lh.max(1)))
}

/// Smoothed pseudo WVD with time window `g_time` (normalized to unit sum)
/// and lag window `h_lag` (unit peak). Both lengths must be odd; the lag
/// window may reach at most lag `N/2 − 1`.
pub fn spwvd(s: &Signal, g_time: &WindowSpec, h_lag: &WindowSpec) -> Result<TfMatrix> {
    check_input(s)?;
    g_time.validate()?;
    h_lag.validate()?;
    let n = s.len();
    if g_time.length % 2 == 0 {
        return Err(Error::param("g_time.length", "must be odd"));
    }
    if h_lag.length % 2 == 0 {
        return Err(Error::param("h_lag.length", "must be odd"));
    }
    let max_tau = (h_lag.length - 1) / 2;
    if max_tau > n / 2 - 1 {
        return Err(Error::param(
            "h_lag.length",
            format!("reaches lag {max_tau}, beyond N/2-1 = {}", n / 2 - 1),
        ));
    }
    let g = g_time.values();
    let gsum: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / gsum).collect();
    let h = h_lag.values();
    let hc = h_lag.center();
    let p_half = (g_time.length / 2) as isize;
    let z = s.samples();
    let ni = n as isize;
    let at = |i: isize| -> Complex64 {
        if i >= 0 && i < ni {
            z[i as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    // K[m, τ] for τ ≥ 0, zero outside the record
    let kmat: Vec<Vec<Complex64>> = (0..ni)
        .into_par_iter()
        .map(|m| (0..=max_tau as isize).map(|tau| at(m + tau) * at(m - tau).conj()).collect())
        .collect();
    let rows: Vec<Vec<Complex64>> = (0..ni)
        .into_par_iter()
        .map(|t| {
            let mut acc = vec![Complex64::new(0.0, 0.0); max_tau + 1];
            for (pi, &gp) in g.iter().enumerate() {
                let m = t + pi as isize - p_half;
                if m >= 0 && m < ni {
                    for (a, k) in acc.iter_mut().zip(&kmat[m as usize]) {
                        *a += k * gp;
                    }
                }
            }
            let mut row = vec![Complex64::new(0.0, 0.0); n];
            for (tau, a) in acc.iter().enumerate() {
                let v = a * h[hc + tau];
                row[tau] = v;
                if tau > 0 {
                    row[n - tau] = v.conj();
                }
            }
            row
        })
        .collect();
    finish(
        s,
        lag_transform(rows),
        TransformParams::Spwvd { g_time: *g_time, h_lag: *h_lag },
    )
}

/// Choi-Williams kernel `exp(−θ²τ²/σ)` for angular Doppler `θ` (rad/sample)
/// and lag `τ` (samples).
pub fn choi_williams_kernel(theta: f64, tau: f64, sigma: f64) -> f64 {
    (-(theta * theta * tau * tau) / sigma).exp()
}

/// Choi-Williams distribution: the WVD autocorrelation is filtered in the
/// ambiguity (Doppler × lag) plane by [`choi_williams_kernel`].
pub fn cwd(s: &Signal, sigma: f64) -> Result<TfMatrix> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param("sigma", "must be finite and positive"));
    }
    check_input(s)?;
    let n = s.len();
    let rows = autocorrelation_rows(s.samples());
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    // each lag column: DFT over time, weight by the kernel, back to time
    let cols: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|lag_slot| {
            let tau = if lag_slot < n / 2 { lag_slot as f64 } else { lag_slot as f64 - n as f64 };
            let mut col: Vec<Complex64> = rows.iter().map(|r| r[lag_slot]).collect();
            fwd.process(&mut col);
            for (p, v) in col.iter_mut().enumerate() {
                *v *= choi_williams_kernel(signed_omega(p, n), tau, sigma) / n as f64;
            }
            inv.process(&mut col);
            col
        })
        .collect();
    let filtered: Vec<Vec<Complex64>> = (0..n)
        .map(|t| cols.iter().map(|c| c[t]).collect())
        .collect();
    finish(s, lag_transform(filtered), TransformParams::Cwd { sigma })
}
