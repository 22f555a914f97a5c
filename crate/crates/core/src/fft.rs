//! Thin wrappers over `rustfft` with unnormalized forward / `1/N` inverse.

use num_complex::Complex64;
use rustfft::FftPlanner;

pub fn fft(input: &[Complex64]) -> Vec<Complex64> {
    let mut buf = input.to_vec();
    fft_in_place(&mut buf);
    buf
}

pub fn fft_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

pub fn ifft_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(buf.len()).process(buf);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

pub fn ifft(input: &[Complex64]) -> Vec<Complex64> {
    let mut buf = input.to_vec();
    ifft_in_place(&mut buf);
    buf
}

/// Signed angular frequency (rad/sample) of DFT bin `k` out of `n`.
pub fn signed_omega(k: usize, n: usize) -> f64 {
    let ks = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
    2.0 * std::f64::consts::PI * ks / n as f64
}
