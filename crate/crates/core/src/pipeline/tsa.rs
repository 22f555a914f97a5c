use std::fmt::Write as _;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{argmax, evaluate, train, Arch, Classifier, Dataset, DatasetItem, Hyper, Metrics, Split};
use crate::error::{Error, Result};
use crate::imaging::{dwt_image, gadf, recurrence_plot, Channel, RealMatrix, RpMode, SeriesWindow, Wavelet};
use crate::raster::{rasterize, stack_channels, RasterImage, RasterPolicy};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tft::TransformParams;

pub const TSA_LABELS: [&str; 2] = ["stable", "unstable"];

/// Single-machine-infinite-bus surrogate. Angles in rad, time in s, powers
/// in per unit; the fault lasts from `t = 0` to `clearing_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmibParams {
    pub clearing_time: f64,
    pub damping: f64,
    pub inertia: f64,
    pub horizon: f64,
    pub pm: f64,
    pub pmax_pre: f64,
    pub pmax_fault: f64,
    pub pmax_post: f64,
    /// Internal EMF and bus voltage used for the V_M channel.
    pub e: f64,
    pub v: f64,
    pub f0: f64,
    pub rate: f64,
    /// Standard deviation of additive measurement noise on every channel.
    pub noise_std: f64,
}

impl Default for SmibParams {
    fn default() -> Self {
        Self {
            clearing_time: 0.2,
            damping: 0.02,
            inertia: 0.05,
            horizon: 2.0,
            pm: 0.8,
            pmax_pre: 1.5,
            pmax_fault: 0.3,
            pmax_post: 1.5,
            e: 1.0,
            v: 1.0,
            f0: 60.0,
            rate: 1000.0,
            noise_std: 0.0,
        }
    }
}

impl SmibParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(self.clearing_time.is_finite() && self.clearing_time >= 0.0 && self.horizon > self.clearing_time) {
            return Err(Error::invalid("need horizon > clearing_time >= 0"));
        }
        if !(pos(self.inertia) && self.damping >= 0.0 && pos(self.rate) && pos(self.pmax_fault) && self.noise_std >= 0.0) {
            return Err(Error::invalid("inertia, rate, pmax_fault must be positive; damping, noise_std non-negative"));
        }
        if !(pos(self.pm) && self.pm < self.pmax_pre && pos(self.pmax_post)) {
            return Err(Error::invalid("need 0 < pm < pmax_pre for a pre-fault equilibrium"));
        }
        Ok(())
    }

    /// Pre-fault equilibrium angle.
    pub fn delta0(&self) -> f64 {
        (self.pm / self.pmax_pre).asin()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsaCase {
    pub params: SmibParams,
    pub delta: Vec<f64>,
    pub vm: SeriesWindow,
    pub va: SeriesWindow,
    pub vf: SeriesWindow,
    pub stable: bool,
}

impl TsaCase {
    /// First sample index at or after fault clearing.
    pub fn clearing_index(&self) -> usize {
        (self.params.clearing_time * self.params.rate - 1e-9).ceil().max(0.0) as usize
    }

    /// `len` samples of every channel starting at fault clearing.
    pub fn post_fault_window(&self, len: usize) -> Result<[SeriesWindow; 3]> {
        let i0 = self.clearing_index();
        let cut = |w: &SeriesWindow| -> Result<SeriesWindow> {
            let v = w
                .values()
                .get(i0..i0 + len)
                .ok_or_else(|| Error::invalid("post-fault window runs past the horizon"))?;
            SeriesWindow::new(v.to_vec(), w.fs, w.channel, i0 as f64 / w.fs)
        };
        Ok([cut(&self.vm)?, cut(&self.va)?, cut(&self.vf)?])
    }
}

fn rk4(d: f64, w: f64, h: f64, accel: &impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let (k1d, k1w) = (w, accel(d, w));
    let (k2d, k2w) = (w + 0.5 * h * k1w, accel(d + 0.5 * h * k1d, w + 0.5 * h * k1w));
    let (k3d, k3w) = (w + 0.5 * h * k2w, accel(d + 0.5 * h * k2d, w + 0.5 * h * k2w));
    let (k4d, k4w) = (w + h * k3w, accel(d + h * k3d, w + h * k3w));
    (
        d + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
        w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
    )
}

/// Integrates `M·δ̈ = Pm − Pmax(t)·sin δ − D·δ̇` with RK4 at `rate`, splitting
/// the step that contains the clearing instant. Stable iff `|δ| < π` at
/// every sample.
pub fn gen_tsa_surrogate(p: &SmibParams, seed: u64) -> Result<TsaCase> {
    p.validate()?;
    let h = 1.0 / p.rate;
    let steps = (p.horizon * p.rate).round() as usize;
    let accel = |pmax: f64| move |d: f64, w: f64| (p.pm - pmax * d.sin() - p.damping * w) / p.inertia;
    let fault = accel(p.pmax_fault);
    let post = accel(p.pmax_post);
    let (mut d, mut w) = (p.delta0(), 0.0);
    let mut delta = Vec::with_capacity(steps + 1);
    let mut omega = Vec::with_capacity(steps + 1);
    delta.push(d);
    omega.push(w);
    for k in 0..steps {
        let (t0, t1) = (k as f64 * h, (k + 1) as f64 * h);
        let tc = p.clearing_time;
        (d, w) = if t1 <= tc {
            rk4(d, w, h, &fault)
        } else if t0 >= tc {
            rk4(d, w, h, &post)
        } else {
            let (dm, wm) = rk4(d, w, tc - t0, &fault);
            rk4(dm, wm, t1 - tc, &post)
        };
        if !(d.is_finite() && w.is_finite()) {
            return Err(Error::IntegrationDiverged);
        }
        delta.push(d);
        omega.push(w);
    }
    let stable = delta.iter().all(|x| x.abs() < std::f64::consts::PI);
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, p.noise_std.max(f64::MIN_POSITIVE)).expect("valid normal");
    let mut jitter = |v: f64| if p.noise_std > 0.0 { v + noise.sample(&mut rng) } else { v };
    let vm: Vec<f64> = delta
        .iter()
        .map(|x| jitter((p.e * p.e + p.v * p.v + 2.0 * p.e * p.v * x.cos()).sqrt() / 2.0))
        .collect();
    let va: Vec<f64> = delta.iter().map(|x| jitter(x / 2.0)).collect();
    let vf: Vec<f64> = omega
        .iter()
        .map(|x| jitter(p.f0 + x / (2.0 * std::f64::consts::PI)))
        .collect();
    Ok(TsaCase {
        params: *p,
        vm: SeriesWindow::new(vm, p.rate, Channel::Vm, 0.0)?,
        va: SeriesWindow::new(va, p.rate, Channel::Va, 0.0)?,
        vf: SeriesWindow::new(vf, p.rate, Channel::Vf, 0.0)?,
        delta,
        stable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Imaging {
    Rp,
    Gadf,
    #[serde(rename = "dwt")]
    DwtImg,
}

impl Imaging {
    pub const ALL: [Imaging; 3] = [Imaging::Rp, Imaging::Gadf, Imaging::DwtImg];

    pub fn name(self) -> &'static str {
        match self {
            Imaging::Rp => "RP",
            Imaging::Gadf => "GADF",
            Imaging::DwtImg => "DWT",
        }
    }

    fn matrix(self, w: &SeriesWindow) -> Result<(RealMatrix, TransformParams, RasterPolicy)> {
        let n = w.len();
        Ok(match self {
            Imaging::Rp => (
                recurrence_plot(w, RpMode::Distance, 0.0)?,
                TransformParams::Rp { mode: RpMode::Distance, eps: 0.0 },
                RasterPolicy::linear(n, n),
            ),
            Imaging::Gadf => (gadf(w), TransformParams::Gadf, RasterPolicy::gadf(n, n)),
            Imaging::DwtImg => (
                dwt_image(w, Wavelet::Haar, 3)?,
                TransformParams::DwtImg { wavelet: Wavelet::Haar, levels: 3 },
                RasterPolicy::linear(n, n),
            ),
        })
    }

    /// Images one channel window at its own size.
    pub fn image(self, w: &SeriesWindow) -> Result<RasterImage> {
        let (m, params, policy) = self.matrix(w)?;
        rasterize(&m.into_tf(params)?, &policy)
    }

    /// Three-channel V_M/V_A/V_F image of the post-fault window.
    pub fn case_image(self, case: &TsaCase, window: usize) -> Result<RasterImage> {
        let [vm, va, vf] = case.post_fault_window(window)?;
        let mut img = stack_channels(&self.image(&vm)?, &self.image(&va)?, &self.image(&vf)?)?;
        let label = TSA_LABELS[(!case.stable) as usize];
        for d in &mut img.provenance {
            d.source = Some(label.to_string());
        }
        Ok(img)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsaExperiment {
    pub imaging: Imaging,
    pub n_cases: usize,
    /// Train/val/test fractions, applied per class.
    pub split: (f64, f64, f64),
    pub seed: u64,
    pub base: SmibParams,
    pub clearing_range: (f64, f64),
    /// Relative spread of the inertia draw around `base.inertia`.
    pub inertia_spread: f64,
    pub damping_range: (f64, f64),
    /// Window length in seconds, starting at fault clearing.
    pub window_s: f64,
    pub arch: Arch,
    pub hyper: Hyper,
}

impl Default for TsaExperiment {
    fn default() -> Self {
        Self {
            imaging: Imaging::DwtImg,
            n_cases: 200,
            split: (0.6, 0.1, 0.3),
            seed: 0,
            base: SmibParams::default(),
            clearing_range: (0.05, 0.5),
            inertia_spread: 0.2,
            damping_range: (0.0, 0.04),
            window_s: 0.1,
            arch: Arch::default(),
            hyper: Hyper::default(),
        }
    }
}

impl TsaExperiment {
    pub fn window_len(&self) -> usize {
        (self.window_s * self.base.rate).round() as usize
    }

    /// Surrogate parameters of candidate `i`.
    pub fn draw(&self, i: usize) -> SmibParams {
        let mut rng = rng_from_seed(derive_seed(self.seed, &[0, i as u64]));
        let (c0, c1) = self.clearing_range;
        let (d0, d1) = self.damping_range;
        let mut p = self.base;
        p.clearing_time = c0 + (c1 - c0) * rng.random::<f64>();
        p.inertia = self.base.inertia * (1.0 + self.inertia_spread * (2.0 * rng.random::<f64>() - 1.0));
        p.damping = d0 + (d1 - d0) * rng.random::<f64>();
        p
    }

    /// Draws candidates in order until each class holds its quota
    /// (`n/2` unstable, the rest stable).
    pub fn balanced_cases(&self) -> Result<Vec<TsaCase>> {
        if self.n_cases < 20 {
            return Err(Error::param("n_cases", "must be at least 20"));
        }
        let want_u = self.n_cases / 2;
        let want_s = self.n_cases - want_u;
        let (mut stable, mut unstable) = (Vec::new(), Vec::new());
        let max_draws = 50 * self.n_cases;
        let batch = 64;
        let mut next = 0;
        while (stable.len() < want_s || unstable.len() < want_u) && next < max_draws {
            let cases: Vec<TsaCase> = (next..next + batch)
                .into_par_iter()
                .map(|i| gen_tsa_surrogate(&self.draw(i), derive_seed(self.seed, &[1, i as u64])))
                .collect::<Result<_>>()?;
            next += batch;
            for c in cases {
                if c.stable && stable.len() < want_s {
                    stable.push(c);
                } else if !c.stable && unstable.len() < want_u {
                    unstable.push(c);
                }
            }
        }
        if stable.len() < want_s || unstable.len() < want_u {
            return Err(Error::OneClassAbsent);
        }
        stable.extend(unstable);
        Ok(stable)
    }

    /// Images every case and assigns stratified train/val/test splits.
    pub fn dataset(&self) -> Result<Dataset> {
        let (a, b, c) = self.split;
        if !(a > 0.0 && b >= 0.0 && c > 0.0 && ((a + b + c) - 1.0).abs() < 1e-9) {
            return Err(Error::param("split", "fractions must be positive (val may be 0) and sum to 1"));
        }
        let cases = self.balanced_cases()?;
        let window = self.window_len();
        let images: Vec<RasterImage> = cases
            .par_iter()
            .map(|c| self.imaging.case_image(c, window))
            .collect::<Result<_>>()?;
        let mut d = Dataset::new(TSA_LABELS.iter().map(|s| s.to_string()).collect());
        let mut rng = rng_from_seed(derive_seed(self.seed, &[2]));
        let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, case) in cases.iter().enumerate() {
            by_class[(!case.stable) as usize].push(i);
        }
        let mut split_of = vec![Split::Train; cases.len()];
        for idx in by_class.iter_mut() {
            for i in (1..idx.len()).rev() {
                let j = rng.random_range(0..=i);
                idx.swap(i, j);
            }
            let n = idx.len();
            let n_test = ((c * n as f64).round() as usize).clamp(1, n - 1);
            let n_val = ((b * n as f64).round() as usize).min(n - 1 - n_test);
            for (k, &i) in idx.iter().enumerate() {
                split_of[i] = if k < n_test {
                    Split::Test
                } else if k < n_test + n_val {
                    Split::Val
                } else {
                    Split::Train
                };
            }
        }
        for ((case, image), split) in cases.iter().zip(images).zip(split_of) {
            d.push(DatasetItem { image, label: (!case.stable) as usize, snr_db: None, split })?;
        }
        Ok(d)
    }
}

/// Trains the desk MLP on the imaged surrogate cases and returns test metrics.
pub fn tsa_experiment(cfg: &TsaExperiment) -> Result<Metrics> {
    let d = cfg.dataset()?;
    let model = train(&d, cfg.arch.clone(), cfg.hyper, derive_seed(cfg.seed, &[3]))?;
    evaluate(&model, &d, Split::Test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsaRow {
    pub method: String,
    pub condition: String,
    pub acc: f64,
    pub tur: f64,
    pub tsr: f64,
}

/// Method × load-condition grid of ACC/TUR/TSR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsaTable {
    pub rows: Vec<TsaRow>,
}

pub const HEAVY_LOAD_PM: f64 = 0.9;

impl TsaTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,condition,acc,tur,tsr\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:.4},{:.4},{:.4}", r.method, r.condition, r.acc, r.tur, r.tsr);
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| method | condition | ACC | TUR | TSR |\n|---|---|---|---|---|\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {:.3} | {:.3} | {:.3} |",
                r.method, r.condition, r.acc, r.tur, r.tsr
            );
        }
        out
    }
}

/// Runs every imaging method under the baseline load and a heavier load
/// (`pm` raised to [`HEAVY_LOAD_PM`]).
pub fn tsa_table(base: &TsaExperiment) -> Result<TsaTable> {
    let mut heavy = base.base;
    heavy.pm = HEAVY_LOAD_PM;
    let conditions = [("baseline", base.base), ("heavy_load", heavy)];
    let mut rows = Vec::new();
    for (cname, params) in conditions {
        for imaging in Imaging::ALL {
            let cfg = TsaExperiment { imaging, base: params, ..base.clone() };
            let m = tsa_experiment(&cfg)?;
            rows.push(TsaRow {
                method: imaging.name().to_string(),
                condition: cname.to_string(),
                acc: m.acc,
                tur: m.tur.unwrap_or(0.0),
                tsr: m.tsr.unwrap_or(0.0),
            });
        }
    }
    Ok(TsaTable { rows })
}

/// Predicted label indices for a split, mostly for reports.
pub fn predict_split(m: &dyn Classifier, d: &Dataset, split: Split) -> Result<Vec<usize>> {
    d.split(split).map(|i| m.predict(&i.image).map(|p| argmax(&p))).collect()
}
