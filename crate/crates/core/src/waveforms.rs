//! Eighteen-class LPI radar waveform catalog and synthesizer.
//!
//! Every waveform is a unit-modulus complex exponential around a carrier
//! `fc`; the class determines the frequency or phase law on top of it.
//!
//! Polyphase phase laws (`i` = sample within a frequency group, `j` = group,
//! both 1-based, chip index `(j-1)·M + (i-1)`):
//!
//! | code  | phase |
//! |-------|-------|
//! | Frank | `2π(i−1)(j−1)/M` |
//! | P1    | `−(π/M)[M−(2j−1)][(j−1)M+(i−1)]` |
//! | P2    | `−(π/2M)[2i−1−M][2j−1−M]` |
//! | P3    | `π(i−1)²/Nc` |
//! | P4    | `π(i−1)²/Nc − π(i−1)` |
//!
//! Polytime codes T1–T4 are stepped approximations of linear FM with `n`
//! phase states and `k` segments.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::signal::Signal;

pub const DEFAULT_FS: f64 = 100_000.0;
pub const DEFAULT_SAMPLES: usize = 1024;
pub const POLYPHASE_GROUP: &str = "P1-P4";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WaveformKind {
    #[serde(rename = "LFM")]
    Lfm,
    Costas,
    Barker,
    #[serde(rename = "2FSK")]
    Fsk2,
    #[serde(rename = "4FSK")]
    Fsk4,
    #[serde(rename = "8FSK")]
    Fsk8,
    #[serde(rename = "SFM")]
    Sfm,
    #[serde(rename = "EQFM")]
    Eqfm,
    Frank,
    P1,
    P2,
    P3,
    P4,
    T1,
    T2,
    T3,
    T4,
    #[serde(rename = "NLFM")]
    Nlfm,
}

impl WaveformKind {
    pub const ALL: [WaveformKind; 18] = [
        Self::Lfm,
        Self::Costas,
        Self::Barker,
        Self::Fsk2,
        Self::Fsk4,
        Self::Fsk8,
        Self::Sfm,
        Self::Eqfm,
        Self::Frank,
        Self::P1,
        Self::P2,
        Self::P3,
        Self::P4,
        Self::T1,
        Self::T2,
        Self::T3,
        Self::T4,
        Self::Nlfm,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Lfm => "LFM",
            Self::Costas => "Costas",
            Self::Barker => "Barker",
            Self::Fsk2 => "2FSK",
            Self::Fsk4 => "4FSK",
            Self::Fsk8 => "8FSK",
            Self::Sfm => "SFM",
            Self::Eqfm => "EQFM",
            Self::Frank => "Frank",
            Self::P1 => "P1",
            Self::P2 => "P2",
            Self::P3 => "P3",
            Self::P4 => "P4",
            Self::T1 => "T1",
            Self::T2 => "T2",
            Self::T3 => "T3",
            Self::T4 => "T4",
            Self::Nlfm => "NLFM",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.label().eq_ignore_ascii_case(label))
    }

    /// P1, P2, P3 or P4: the classes routed to the polyphase branch.
    pub fn is_p_code(self) -> bool {
        matches!(self, Self::P1 | Self::P2 | Self::P3 | Self::P4)
    }

    pub fn is_polyphase(self) -> bool {
        self.is_p_code() || self == Self::Frank
    }
}

/// Kind-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Extra {
    None,
    /// Hop sequence, a permutation of `1..=len`.
    Costas { hops: Vec<usize> },
    /// Tone index per hop slot; tones are spread evenly across the bandwidth.
    Fsk { tones: usize, hops: Vec<usize> },
    Sfm { mod_freq: f64 },
    Nlfm { beta: f64 },
    /// Phase states for the polytime codes.
    Polytime { states: usize },
}

/// A fully parameterized waveform instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformSpec {
    pub kind: WaveformKind,
    /// Carrier in Hz.
    pub fc: f64,
    /// Sweep or hop bandwidth in Hz (FM, FSK, Costas, T3/T4).
    pub bandwidth: f64,
    /// M for Frank/P1/P2, Nc for P3/P4, code length for Barker/Costas,
    /// segment count for T1/T2, hop count for FSK.
    pub code_order: usize,
    /// Samples per code chip.
    pub subpulse_len: usize,
    /// Record length in seconds.
    pub duration: f64,
    pub extra: Extra,
}

/// Frank / P-code chip phases for code order `order` (M or Nc).
pub fn code_phases(kind: WaveformKind, order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::param("code_order", "must be at least 1"));
    }
    let m = order as f64;
    let grid = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        let mut out = Vec::with_capacity(order * order);
        for j in 1..=order {
            for i in 1..=order {
                out.push(f(i as f64, j as f64));
            }
        }
        out
    };
    let phases = match kind {
        WaveformKind::Frank => grid(&|i, j| 2.0 * PI * (i - 1.0) * (j - 1.0) / m),
        WaveformKind::P1 => grid(&|i, j| {
            -(PI / m) * (m - (2.0 * j - 1.0)) * ((j - 1.0) * m + (i - 1.0))
        }),
        WaveformKind::P2 => {
            if order % 2 != 0 {
                return Err(Error::param("code_order", "P2 needs an even M"));
            }
            grid(&|i, j| -(PI / (2.0 * m)) * (2.0 * i - 1.0 - m) * (2.0 * j - 1.0 - m))
        }
        WaveformKind::P3 => (1..=order)
            .map(|i| {
                let i = i as f64;
                PI * (i - 1.0) * (i - 1.0) / m
            })
            .collect(),
        WaveformKind::P4 => (1..=order)
            .map(|i| {
                let i = i as f64;
                PI * (i - 1.0) * (i - 1.0) / m - PI * (i - 1.0)
            })
            .collect(),
        other => {
            return Err(Error::invalid(format!(
                "{} is not a polyphase code",
                other.label()
            )))
        }
    };
    Ok(phases)
}

/// Polytime code phase at time `t` within a code period `period`.
fn polytime_phase(kind: WaveformKind, t: f64, period: f64, segments: usize, states: usize, bw: f64) -> f64 {
    let n = states as f64;
    let step = 2.0 * PI / n;
    let q = match kind {
        WaveformKind::T1 | WaveformKind::T2 => {
            let k = segments as f64;
            let j = ((k * t / period).floor()).clamp(0.0, k - 1.0);
            let local = k * t - j * period;
            if kind == WaveformKind::T1 {
                (local * j * n / period).floor()
            } else {
                (local * (2.0 * j - k + 1.0) / period * n / 2.0).floor()
            }
        }
        WaveformKind::T3 => (n * bw * t * t / (2.0 * period)).floor(),
        WaveformKind::T4 => (n * bw * t * t / (2.0 * period) - n * bw * t / 2.0).floor(),
        _ => 0.0,
    };
    (step * q).rem_euclid(2.0 * PI)
}

const BARKER_7: [i8; 7] = [1, 1, 1, -1, -1, 1, -1];
const BARKER_11: [i8; 11] = [1, 1, 1, -1, -1, -1, 1, -1, -1, 1, -1];
const BARKER_13: [i8; 13] = [1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1];

fn barker_code(len: usize) -> Result<&'static [i8]> {
    match len {
        7 => Ok(&BARKER_7),
        11 => Ok(&BARKER_11),
        13 => Ok(&BARKER_13),
        _ => Err(Error::param("code_order", format!("no Barker code of length {len}"))),
    }
}

/// Welch construction: `α^(i+shift) mod p` for `i = 1..p-1`.
pub fn welch_costas(p: usize, root: usize, shift: usize) -> Vec<usize> {
    let mut v = 1usize;
    for _ in 0..(1 + shift) {
        v = v * root % p;
    }
    let mut out = Vec::with_capacity(p - 1);
    for _ in 0..p - 1 {
        out.push(v);
        v = v * root % p;
    }
    out
}

impl WaveformSpec {
    pub fn n_samples(&self, fs: f64) -> usize {
        (self.duration * fs).round() as usize
    }

    /// Lowest and highest instantaneous frequency the carrier law can reach.
    fn frequency_span(&self) -> (f64, f64) {
        let (fc, b) = (self.fc, self.bandwidth);
        match self.kind {
            WaveformKind::Lfm
            | WaveformKind::Costas
            | WaveformKind::Fsk2
            | WaveformKind::Fsk4
            | WaveformKind::Fsk8
            | WaveformKind::Sfm
            | WaveformKind::Eqfm
            | WaveformKind::Nlfm
            | WaveformKind::T4 => (fc - b / 2.0, fc + b / 2.0),
            WaveformKind::T3 => (fc, fc + b),
            _ => (fc, fc),
        }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        let finite = [self.fc, self.bandwidth, self.duration];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("waveform parameters must be finite"));
        }
        if !(self.duration > 0.0) {
            return Err(Error::param("duration", "must be positive"));
        }
        if self.n_samples(fs) < 2 {
            return Err(Error::param("duration", "shorter than two samples"));
        }
        if !(self.fc > 0.0 && self.fc < fs / 2.0) {
            return Err(Error::param("fc", format!("{} Hz outside (0, fs/2) at fs={fs}", self.fc)));
        }
        let (lo, hi) = self.frequency_span();
        if lo <= 0.0 || hi >= fs / 2.0 {
            return Err(Error::param(
                "bandwidth",
                format!("sweep [{lo}, {hi}] Hz leaves (0, fs/2) at fs={fs}"),
            ));
        }
        if self.bandwidth < 0.0 {
            return Err(Error::param("bandwidth", "must be non-negative"));
        }
        if self.code_order == 0 {
            return Err(Error::param("code_order", "must be at least 1"));
        }
        if self.subpulse_len == 0 {
            return Err(Error::param("subpulse_len", "must be at least 1"));
        }
        match (&self.kind, &self.extra) {
            (WaveformKind::Costas, Extra::Costas { hops }) => {
                if hops.is_empty() || hops.iter().any(|&h| h == 0 || h > hops.len()) {
                    return Err(Error::param("extra", "Costas hops must be a permutation of 1..=len"));
                }
            }
            (WaveformKind::Costas, _) => return Err(Error::param("extra", "Costas needs a hop sequence")),
            (WaveformKind::Fsk2 | WaveformKind::Fsk4 | WaveformKind::Fsk8, Extra::Fsk { tones, hops }) => {
                if hops.is_empty() || hops.iter().any(|h| h >= tones) {
                    return Err(Error::param("extra", "FSK hop index out of range"));
                }
            }
            (WaveformKind::Fsk2 | WaveformKind::Fsk4 | WaveformKind::Fsk8, _) => {
                return Err(Error::param("extra", "FSK needs a hop sequence"))
            }
            (WaveformKind::Sfm, Extra::Sfm { mod_freq }) if !(*mod_freq > 0.0) => {
                return Err(Error::param("extra", "SFM modulation frequency must be positive"))
            }
            (WaveformKind::T1 | WaveformKind::T2 | WaveformKind::T3 | WaveformKind::T4, Extra::Polytime { states })
                if *states < 2 =>
            {
                return Err(Error::param("extra", "polytime codes need at least 2 phase states"))
            }
            (WaveformKind::Barker, _) => {
                barker_code(self.code_order)?;
            }
            (WaveformKind::P2, _) if self.code_order % 2 != 0 => {
                return Err(Error::param("code_order", "P2 needs an even M"))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Synthesizes a unit-power complex waveform. `seed` sets the carrier's
/// initial phase; all class parameters come from `spec`.
pub fn synthesize(spec: &WaveformSpec, fs: f64, seed: u64) -> Result<Signal> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::param("fs", "must be finite and positive"));
    }
    spec.validate(fs)?;
    let n = spec.n_samples(fs);
    let mut rng = rng_from_seed(seed);
    let theta0: f64 = rng.random::<f64>() * 2.0 * PI;
    let dt = 1.0 / fs;
    let t_total = spec.duration;
    let (fc, b) = (spec.fc, spec.bandwidth);
    let chip = |i: usize| i / spec.subpulse_len;

    // phase per sample relative to the carrier start
    let phase: Vec<f64> = match spec.kind {
        WaveformKind::Lfm => (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                2.0 * PI * ((fc - b / 2.0) * t + b / (2.0 * t_total) * t * t)
            })
            .collect(),
        WaveformKind::Frank | WaveformKind::P1 | WaveformKind::P2 | WaveformKind::P3 | WaveformKind::P4 => {
            let code = code_phases(spec.kind, spec.code_order)?;
            (0..n)
                .map(|i| 2.0 * PI * fc * i as f64 * dt + code[chip(i) % code.len()])
                .collect()
        }
        WaveformKind::Barker => {
            let code = barker_code(spec.code_order)?;
            (0..n)
                .map(|i| {
                    let c = if code[chip(i) % code.len()] > 0 { 0.0 } else { PI };
                    2.0 * PI * fc * i as f64 * dt + c
                })
                .collect()
        }
        WaveformKind::T1 | WaveformKind::T2 | WaveformKind::T3 | WaveformKind::T4 => {
            let states = match spec.extra {
                Extra::Polytime { states } => states,
                _ => 2,
            };
            // one code period spans subpulse_len · code_order samples
            let period = (spec.subpulse_len * spec.code_order) as f64 * dt;
            (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    let local = t.rem_euclid(period);
                    2.0 * PI * fc * t
                        + polytime_phase(spec.kind, local, period, spec.code_order, states, b)
                })
                .collect()
        }
        _ => {
            // frequency laws integrated sample by sample
            let inst = |i: usize| -> f64 {
                let t = i as f64 * dt;
                let u = t / t_total;
                match (&spec.kind, &spec.extra) {
                    (WaveformKind::Costas, Extra::Costas { hops }) => {
                        let len = hops.len() as f64;
                        let h = hops[chip(i) % hops.len()] as f64;
                        fc - b / 2.0 + (h - 0.5) * b / len
                    }
                    (_, Extra::Fsk { tones, hops }) => {
                        let m = *tones as f64;
                        let h = hops[chip(i) % hops.len()] as f64;
                        fc - b / 2.0 + (h + 0.5) * b / m
                    }
                    (WaveformKind::Sfm, Extra::Sfm { mod_freq }) => {
                        fc + b / 2.0 * (2.0 * PI * mod_freq * t).sin()
                    }
                    (WaveformKind::Eqfm, _) => {
                        let v = 2.0 * u - 1.0;
                        fc - b / 2.0 + b * v * v
                    }
                    (WaveformKind::Nlfm, extra) => {
                        let beta = match extra {
                            Extra::Nlfm { beta } => *beta,
                            _ => 1.2,
                        };
                        fc + b / 2.0 * (beta * (2.0 * u - 1.0)).tan() / beta.tan()
                    }
                    _ => fc,
                }
            };
            let mut acc = 0.0;
            (0..n)
                .map(|i| {
                    let p = acc;
                    acc += 2.0 * PI * inst(i) * dt;
                    p
                })
                .collect()
        }
    };

    let mut samples: Vec<Complex64> = phase
        .iter()
        .map(|&p| Complex64::from_polar(1.0, p + theta0))
        .collect();
    let p = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
    let k = 1.0 / p.sqrt();
    for z in samples.iter_mut() {
        *z *= k;
    }
    Ok(Signal::new(samples, fs)?.with_label(spec.kind.label()))
}

/// Inclusive parameter ranges for one catalog class. Frequencies are
/// fractions of the sample rate so a template is valid at any `fs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub fc: (f64, f64),
    pub bandwidth: (f64, f64),
    pub code_order: (usize, usize),
    /// Code periods per record (coded kinds) or hop slots (FSK/Costas).
    pub repeats: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformTemplate {
    pub kind: WaveformKind,
    pub ranges: ParamRanges,
}

impl WaveformTemplate {
    pub fn default_for(kind: WaveformKind) -> Self {
        let base = ParamRanges {
            fc: (1.0 / 6.0, 1.0 / 5.0),
            bandwidth: (1.0 / 20.0, 1.0 / 10.0),
            code_order: (1, 1),
            repeats: (1, 1),
        };
        let ranges = match kind {
            WaveformKind::Frank | WaveformKind::P1 => ParamRanges {
                code_order: (4, 8),
                repeats: (1, 2),
                ..base
            },
            WaveformKind::P2 => ParamRanges {
                code_order: (2, 4), // halved: M = 2·draw ∈ {4, 6, 8}
                repeats: (1, 2),
                ..base
            },
            WaveformKind::P3 | WaveformKind::P4 => ParamRanges {
                code_order: (16, 64),
                repeats: (1, 2),
                ..base
            },
            WaveformKind::Barker => ParamRanges {
                code_order: (0, 2), // index into {7, 11, 13}
                repeats: (2, 6),
                ..base
            },
            WaveformKind::Costas => ParamRanges {
                code_order: (0, 3), // index into p ∈ {5, 7, 11, 13}
                repeats: (1, 1),
                ..base
            },
            WaveformKind::Fsk2 | WaveformKind::Fsk4 | WaveformKind::Fsk8 => ParamRanges {
                code_order: (8, 16),
                repeats: (1, 1),
                ..base
            },
            WaveformKind::T1 | WaveformKind::T2 => ParamRanges {
                code_order: (4, 6),
                repeats: (1, 2),
                ..base
            },
            WaveformKind::T3 | WaveformKind::T4 => ParamRanges {
                code_order: (2, 4), // phase states
                repeats: (1, 2),
                ..base
            },
            _ => base,
        };
        Self { kind, ranges }
    }

    /// Draws a concrete spec for an `n_samples` record at `fs`.
    pub fn draw(&self, fs: f64, n_samples: usize, rng: &mut Rng) -> Result<WaveformSpec> {
        let r = &self.ranges;
        let uni = |rng: &mut Rng, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
        let pick = |rng: &mut Rng, (lo, hi): (usize, usize)| {
            if hi <= lo {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        };
        let fc = uni(rng, r.fc) * fs;
        let bandwidth = uni(rng, r.bandwidth) * fs;
        let order_draw = pick(rng, r.code_order);
        let repeats = pick(rng, r.repeats).max(1);
        let duration = n_samples as f64 / fs;
        let per = |chips: usize| (n_samples / (chips * repeats)).max(1);
        let mut spec = WaveformSpec {
            kind: self.kind,
            fc,
            bandwidth,
            code_order: 1,
            subpulse_len: n_samples,
            duration,
            extra: Extra::None,
        };
        match self.kind {
            WaveformKind::Frank | WaveformKind::P1 => {
                spec.code_order = order_draw;
                spec.subpulse_len = per(order_draw * order_draw);
            }
            WaveformKind::P2 => {
                let m = 2 * order_draw;
                spec.code_order = m;
                spec.subpulse_len = per(m * m);
            }
            WaveformKind::P3 | WaveformKind::P4 => {
                spec.code_order = order_draw;
                spec.subpulse_len = per(order_draw);
            }
            WaveformKind::Barker => {
                let len = [7, 11, 13][order_draw.min(2)];
                spec.code_order = len;
                spec.subpulse_len = per(len);
            }
            WaveformKind::Costas => {
                let (p, roots): (usize, &[usize]) = match order_draw.min(3) {
                    0 => (5, &[2, 3]),
                    1 => (7, &[3, 5]),
                    2 => (11, &[2, 6, 7, 8]),
                    _ => (13, &[2, 6, 7, 11]),
                };
                let root = roots[rng.random_range(0..roots.len())];
                let shift = rng.random_range(0..p - 1);
                let hops = welch_costas(p, root, shift);
                spec.code_order = hops.len();
                spec.subpulse_len = per(hops.len());
                spec.extra = Extra::Costas { hops };
            }
            WaveformKind::Fsk2 | WaveformKind::Fsk4 | WaveformKind::Fsk8 => {
                let tones = match self.kind {
                    WaveformKind::Fsk2 => 2,
                    WaveformKind::Fsk4 => 4,
                    _ => 8,
                };
                let hops: Vec<usize> = (0..order_draw).map(|_| rng.random_range(0..tones)).collect();
                spec.code_order = order_draw;
                spec.subpulse_len = per(order_draw);
                spec.extra = Extra::Fsk { tones, hops };
            }
            WaveformKind::Sfm => {
                spec.extra = Extra::Sfm {
                    mod_freq: uni(rng, (2.0, 6.0)) / duration,
                };
            }
            WaveformKind::Nlfm => {
                spec.extra = Extra::Nlfm {
                    beta: uni(rng, (0.9, 1.3)),
                };
            }
            WaveformKind::T1 | WaveformKind::T2 => {
                spec.code_order = order_draw;
                spec.subpulse_len = per(order_draw);
                spec.extra = Extra::Polytime {
                    states: 2 * pick(rng, (1, 2)),
                };
            }
            WaveformKind::T3 | WaveformKind::T4 => {
                spec.code_order = 1;
                spec.subpulse_len = per(1);
                spec.extra = Extra::Polytime { states: order_draw };
            }
            _ => {}
        }
        spec.validate(fs)?;
        Ok(spec)
    }
}

/// The ordered class list with per-class parameter ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Catalog {
    templates: Vec<WaveformTemplate>,
}

pub const CATALOG_SIZE: usize = 18;

impl Default for Catalog {
    fn default() -> Self {
        Self {
            templates: WaveformKind::ALL
                .iter()
                .map(|&k| WaveformTemplate::default_for(k))
                .collect(),
        }
    }
}

/// The default eighteen-class catalog.
pub fn waveform_catalog() -> Catalog {
    Catalog::default()
}

impl Catalog {
    pub fn new(templates: Vec<WaveformTemplate>) -> Result<Self> {
        if templates.len() != CATALOG_SIZE {
            return Err(Error::invalid(format!(
                "catalog needs exactly {CATALOG_SIZE} entries, got {}",
                templates.len()
            )));
        }
        let mut kinds: Vec<_> = templates.iter().map(|t| t.kind).collect();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != templates.len() {
            return Err(Error::invalid("catalog labels must be unique"));
        }
        Ok(Self { templates })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let templates: Vec<WaveformTemplate> = serde_json::from_str(text)?;
        Self::new(templates)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.templates).expect("catalog serializes")
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn templates(&self) -> &[WaveformTemplate] {
        &self.templates
    }

    pub fn kinds(&self) -> Vec<WaveformKind> {
        self.templates.iter().map(|t| t.kind).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.templates.iter().map(|t| t.kind.label().to_string()).collect()
    }

    pub fn index_of(&self, kind: WaveformKind) -> Option<usize> {
        self.templates.iter().position(|t| t.kind == kind)
    }

    /// Draws parameters and synthesizes class `index`, both driven by `seed`.
    pub fn generate(&self, index: usize, fs: f64, n_samples: usize, seed: u64) -> Result<Signal> {
        let template = self
            .templates
            .get(index)
            .ok_or_else(|| Error::invalid(format!("class index {index} out of range")))?;
        let mut rng = rng_from_seed(derive_seed(seed, &[0]));
        let spec = template.draw(fs, n_samples, &mut rng)?;
        synthesize(&spec, fs, derive_seed(seed, &[1]))
    }
}
