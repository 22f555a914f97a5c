use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Gauss,
    Kaiser,
    Rect,
}

/// Analysis window. Samples are placed at offsets `u = n - L/2` (integer
/// division) from the centre, so odd lengths are symmetric and even lengths
/// are periodic. The peak value is 1.
///
/// `shape` is the Gaussian standard deviation as a fraction of `L/2`, or the
/// Kaiser β; it is ignored by hann and rect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub kind: WindowKind,
    pub length: usize,
    #[serde(default)]
    pub shape: f64,
}

/// Gaussian shape giving an edge value of 1e-4.
pub fn gauss_shape_for_edge(edge: f64) -> f64 {
    1.0 / (2.0 * (1.0 / edge).ln()).sqrt()
}

fn bessel_i0(x: f64) -> f64 {
    // power series; converges quickly for the β range used by windows
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

impl WindowSpec {
    pub fn hann(length: usize) -> Self {
        Self { kind: WindowKind::Hann, length, shape: 0.0 }
    }

    pub fn rect(length: usize) -> Self {
        Self { kind: WindowKind::Rect, length, shape: 0.0 }
    }

    pub fn kaiser(length: usize, beta: f64) -> Self {
        Self { kind: WindowKind::Kaiser, length, shape: beta }
    }

    pub fn gauss(length: usize, shape: f64) -> Self {
        Self { kind: WindowKind::Gauss, length, shape }
    }

    /// Gaussian that decays to 1e-4 at the window edge.
    pub fn gauss_default(length: usize) -> Self {
        Self::gauss(length, gauss_shape_for_edge(1e-4))
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::param("window.length", "must be at least 1"));
        }
        if !self.shape.is_finite() {
            return Err(Error::param("window.shape", "must be finite"));
        }
        match self.kind {
            WindowKind::Gauss if self.shape <= 0.0 => {
                Err(Error::param("window.shape", "gaussian width must be positive"))
            }
            WindowKind::Kaiser if self.shape < 0.0 => {
                Err(Error::param("window.shape", "kaiser beta must be non-negative"))
            }
            _ => Ok(()),
        }
    }

    pub fn center(&self) -> usize {
        self.length / 2
    }

    fn half_width(&self) -> f64 {
        (self.length as f64 / 2.0).max(0.5)
    }

    /// Offset of sample `n` from the window centre.
    pub fn offset(&self, n: usize) -> f64 {
        n as f64 - self.center() as f64
    }

    fn value_at(&self, u: f64) -> f64 {
        let h = self.half_width();
        match self.kind {
            WindowKind::Rect => 1.0,
            WindowKind::Hann => 0.5 * (1.0 + (std::f64::consts::PI * u / h).cos()),
            WindowKind::Gauss => {
                let s = self.shape * h;
                (-0.5 * (u / s) * (u / s)).exp()
            }
            WindowKind::Kaiser => {
                let r = (u / h).clamp(-1.0, 1.0);
                bessel_i0(self.shape * (1.0 - r * r).sqrt()) / bessel_i0(self.shape)
            }
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.length).map(|n| self.value_at(self.offset(n))).collect()
    }

    /// Per-sample derivative `dg/du`; defined analytically for gaussians only.
    pub fn derivative(&self) -> Result<Vec<f64>> {
        if self.kind != WindowKind::Gauss {
            return Err(Error::param(
                "window.kind",
                "synchrosqueezing needs a gaussian window",
            ));
        }
        let s = self.shape * self.half_width();
        Ok((0..self.length)
            .map(|n| {
                let u = self.offset(n);
                -u / (s * s) * self.value_at(u)
            })
            .collect())
    }
}

/// Overlap-add sums `Σ_m g[n - mH]` over one hop period.
pub fn overlap_sums(g: &[f64], hop: usize) -> Vec<f64> {
    (0..hop)
        .map(|r| g.iter().skip(r).step_by(hop).sum())
        .collect()
}

/// Returns the overlap-add constant if `(g, hop)` satisfies COLA.
pub fn cola_constant(w: &WindowSpec, hop: usize) -> Result<f64> {
    if hop == 0 {
        return Err(Error::param("hop", "must be at least 1"));
    }
    let sums = overlap_sums(&w.values(), hop);
    let max = sums.iter().cloned().fold(f64::MIN, f64::max);
    let min = sums.iter().cloned().fold(f64::MAX, f64::min);
    let spread = max - min;
    if !(max > 0.0) || spread > 1e-8 * max {
        return Err(Error::ColaViolated { hop, spread });
    }
    Ok(sums.iter().sum::<f64>() / hop as f64)
}
