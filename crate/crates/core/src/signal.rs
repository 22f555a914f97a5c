//! Uniformly sampled signals, noise injection, analytic-signal construction
//! and the direct-summation DFT used as a test oracle.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::binio::*;
use crate::error::{Error, Result};
use crate::fft;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalMeta {
    pub label: Option<String>,
    pub snr_db: Option<f64>,
}

/// A complex time series sampled at `fs` Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<Complex64>,
    fs: f64,
    pub meta: SignalMeta,
}

impl Signal {
    pub fn new(samples: Vec<Complex64>, fs: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("signal has no samples"));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::param("fs", format!("must be finite and positive, got {fs}")));
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("signal contains non-finite samples"));
        }
        Ok(Self {
            samples,
            fs,
            meta: SignalMeta::default(),
        })
    }

    pub fn from_real(samples: &[f64], fs: f64) -> Result<Self> {
        Self::new(samples.iter().map(|&x| Complex64::new(x, 0.0)).collect(), fs)
    }

    pub fn with_meta(mut self, meta: SignalMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.meta.label = Some(label.into());
        self
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// True when every imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        self.samples.iter().all(|z| z.im == 0.0)
    }

    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Same sample rate and metadata, new samples.
    pub fn map_samples(&self, samples: Vec<Complex64>) -> Result<Self> {
        Ok(Self::new(samples, self.fs)?.with_meta(self.meta.clone()))
    }
}

/// DFT bins with their spacing in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<Complex64>,
    pub df: f64,
}

/// Adds Gaussian noise so that the ratio of mean signal power to expected
/// noise power is `snr_db`. Real signals get real noise, complex signals get
/// circular complex noise.
pub fn add_awgn(s: &Signal, snr_db: f64, seed: u64) -> Result<Signal> {
    if !snr_db.is_finite() {
        return Err(Error::param("snr_db", "must be finite"));
    }
    let p_sig = s.mean_power();
    if p_sig <= 0.0 {
        return Err(Error::NoPower);
    }
    let p_noise = p_sig / 10f64.powf(snr_db / 10.0);
    let mut rng = rng_from_seed(seed);
    let real = s.is_real();
    let out = s
        .samples()
        .iter()
        .map(|&x| {
            if real {
                let n: f64 = StandardNormal.sample(&mut rng);
                x + Complex64::new(n * p_noise.sqrt(), 0.0)
            } else {
                let sd = (p_noise / 2.0).sqrt();
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                x + Complex64::new(re * sd, im * sd)
            }
        })
        .collect();
    let mut meta = s.meta.clone();
    meta.snr_db = Some(snr_db);
    Ok(Signal::new(out, s.fs())?.with_meta(meta))
}

/// One-sided spectrum construction for an even-length real signal.
pub fn analytic_signal(s: &Signal) -> Result<Signal> {
    let n = s.len();
    if n % 2 != 0 {
        return Err(Error::invalid(format!(
            "analytic signal needs an even length, got {n}"
        )));
    }
    if !s.is_real() {
        return Err(Error::invalid("analytic signal needs real-valued input"));
    }
    let mut spec = fft::fft(s.samples());
    for (k, v) in spec.iter_mut().enumerate() {
        if k == 0 || k == n / 2 {
            continue;
        }
        if k < n / 2 {
            *v *= 2.0;
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    fft::ifft_in_place(&mut spec);
    // the real part is the input by construction; restore it exactly
    for (z, x) in spec.iter_mut().zip(s.samples()) {
        z.re = x.re;
    }
    s.map_samples(spec)
}

/// Direct O(N²) DFT.
pub fn dft_oracle(s: &Signal) -> Spectrum {
    let n = s.len();
    let x = s.samples();
    let bins = (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, &v)| {
                    // reduce k·i mod n in integers to keep the angle small
                    let r = ((k as u128 * i as u128) % n as u128) as f64;
                    let ang = -2.0 * std::f64::consts::PI * r / n as f64;
                    v * Complex64::from_polar(1.0, ang)
                })
                .sum()
        })
        .collect();
    Spectrum {
        bins,
        df: s.fs() / n as f64,
    }
}

/// FFT spectrum of the whole record.
pub fn spectrum(s: &Signal) -> Spectrum {
    Spectrum {
        bins: fft::fft(s.samples()),
        df: s.fs() / s.len() as f64,
    }
}

const TFSG_MAGIC: &[u8; 4] = b"TFSG";
const TFSG_VERSION: u32 = 1;

/// Writes the TFSG container: magic, u32 version, f64 fs, u64 N,
/// u8 is_complex, then N (real) or 2N (interleaved) f32 values.
pub fn write_tfsg(s: &Signal, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(TFSG_MAGIC)?;
    put_u32(w, TFSG_VERSION)?;
    put_f64(w, s.fs())?;
    put_u64(w, s.len() as u64)?;
    let complex = !s.is_real();
    put_u8(w, complex as u8)?;
    for z in s.samples() {
        put_f32(w, z.re as f32)?;
        if complex {
            put_f32(w, z.im as f32)?;
        }
    }
    Ok(())
}

pub fn read_tfsg(r: &mut impl Read) -> Result<Signal> {
    let fmt = |msg: String| Error::Format {
        format: "TFSG",
        msg,
    };
    let io = |e: std::io::Error| fmt(e.to_string());
    let magic: [u8; 4] = get_array(r).map_err(io)?;
    if &magic != TFSG_MAGIC {
        return Err(fmt("bad magic".into()));
    }
    let version = get_u32(r).map_err(io)?;
    if version != TFSG_VERSION {
        return Err(fmt(format!("unsupported version {version}")));
    }
    let fs = get_f64(r).map_err(io)?;
    let n = get_u64(r).map_err(io)? as usize;
    let complex = match get_u8(r).map_err(io)? {
        0 => false,
        1 => true,
        b => return Err(fmt(format!("is_complex flag {b}"))),
    };
    let mut samples = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let re = get_f32(r).map_err(io)? as f64;
        let im = if complex { get_f32(r).map_err(io)? as f64 } else { 0.0 };
        samples.push(Complex64::new(re, im));
    }
    Signal::new(samples, fs)
}

pub fn save_tfsg(s: &Signal, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_tfsg(s, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_tfsg(path: &Path) -> Result<Signal> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tfsg(&mut BufReader::new(f))
}
