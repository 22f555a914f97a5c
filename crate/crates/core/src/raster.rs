//! Rasterization of time-frequency and imaging matrices into normalized
//! image tensors, plus PNG and TFTN export.
//!
//! TFTN layout (little-endian): magic `TFTN`, u32 version = 1, u32 H, u32 W,
//! u32 C, then `H·W·C` f32 pixels in row-major `(y, x, channel)` order.

use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::*;
use crate::error::{Error, Result};
use crate::tft::{TfDescriptor, TfMatrix, TfValues};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Scaling {
    /// `20·log10(|v|/max|v|)` clipped at the floor, then min-max.
    Db,
    /// Min-max of the raw values (magnitudes for complex input).
    Linear,
    /// Affine map of `[lo, hi]` onto `[0, 1]`, clamped.
    Fixed { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resize {
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterPolicy {
    pub scaling: Scaling,
    pub db_floor: f64,
    pub height: usize,
    pub width: usize,
    pub resize: Resize,
}

impl Default for RasterPolicy {
    fn default() -> Self {
        Self::db(224, 224)
    }
}

impl RasterPolicy {
    /// dB scaling with a −60 dB floor, for time-frequency distributions.
    pub fn db(height: usize, width: usize) -> Self {
        Self {
            scaling: Scaling::Db,
            db_floor: -60.0,
            height,
            width,
            resize: Resize::Bilinear,
        }
    }

    /// Linear min-max scaling, for recurrence plots and DWT images.
    pub fn linear(height: usize, width: usize) -> Self {
        Self {
            scaling: Scaling::Linear,
            ..Self::db(height, width)
        }
    }

    /// GADF values live in `[−1, 1]` and map to `(v+1)/2`.
    pub fn gadf(height: usize, width: usize) -> Self {
        Self {
            scaling: Scaling::Fixed { lo: -1.0, hi: 1.0 },
            ..Self::db(height, width)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.height < 8 || self.width < 8 {
            return Err(Error::param("policy.target", "images must be at least 8x8"));
        }
        if let Scaling::Fixed { lo, hi } = self.scaling {
            if !(hi > lo) {
                return Err(Error::param("policy.scaling", "fixed range needs hi > lo"));
            }
        }
        if matches!(self.scaling, Scaling::Db) && !(self.db_floor < 0.0) {
            return Err(Error::param("policy.db_floor", "must be negative"));
        }
        Ok(())
    }
}

/// An `H×W×C` image with every pixel in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f32>,
    pub policy: Option<RasterPolicy>,
    pub provenance: Vec<TfDescriptor>,
}

impl RasterImage {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f32>) -> Result<Self> {
        if height < 8 || width < 8 {
            return Err(Error::Shape(format!("image {height}x{width} below 8x8")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!("{channels} channels; expected 1 or 3")));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "{} pixels for {height}x{width}x{channels}",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("pixels must lie in [0, 1]"));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
            policy: None,
            provenance: Vec::new(),
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// Copies out one channel as a single-channel image.
    pub fn channel(&self, c: usize) -> Result<RasterImage> {
        if c >= self.channels {
            return Err(Error::Shape(format!("channel {c} of {}", self.channels)));
        }
        let px = self.pixels.iter().skip(c).step_by(self.channels).copied().collect();
        let mut out = RasterImage::new(self.height, self.width, 1, px)?;
        out.policy = self.policy;
        out.provenance = self.provenance.get(c).cloned().into_iter().collect();
        Ok(out)
    }
}

fn bilinear(src: impl Fn(usize) -> f64, sh: usize, sw: usize, th: usize, tw: usize) -> Vec<f64> {
    if sh == th && sw == tw {
        return (0..sh * sw).map(src).collect();
    }
    let map = |dst: usize, s: usize, t: usize| -> (usize, usize, f64) {
        let pos = ((dst as f64 + 0.5) * s as f64 / t as f64 - 0.5).clamp(0.0, (s - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(s - 1);
        (i0, i1, pos - i0 as f64)
    };
    let cols: Vec<_> = (0..tw).map(|x| map(x, sw, tw)).collect();
    let mut out = Vec::with_capacity(th * tw);
    for y in 0..th {
        let (y0, y1, fy) = map(y, sh, th);
        for &(x0, x1, fx) in &cols {
            let top = src(y0 * sw + x0) * (1.0 - fx) + src(y0 * sw + x1) * fx;
            let bot = src(y1 * sw + x0) * (1.0 - fx) + src(y1 * sw + x1) * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

/// Normalizes `values` (row-major, `rows × cols`, row 0 = lowest frequency)
/// into `[0, 1]`, flips so low frequencies are at the bottom, and resizes.
/// Every scaling is monotone, so its range comes from the extreme inputs and
/// only the pixels read by the resampler are transformed.
fn normalize(values: &[f64], rows: usize, cols: usize, policy: &RasterPolicy) -> Vec<f64> {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = policy.db_floor;
    let db = |v: f64| -> f64 {
        let r = v.abs() / peak;
        if r > 0.0 {
            (20.0 * r.log10()).max(floor)
        } else {
            floor
        }
    };
    let scale = |v: f64| -> f64 {
        match policy.scaling {
            Scaling::Db if peak > 0.0 => db(v),
            Scaling::Db => 0.0,
            Scaling::Linear => v,
            Scaling::Fixed { lo, hi } => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    };
    let (lo, hi) = match policy.scaling {
        Scaling::Fixed { .. } => (0.0, 1.0),
        Scaling::Db => {
            let min_abs = values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            (scale(min_abs), scale(peak))
        }
        Scaling::Linear => (
            values.iter().cloned().fold(f64::INFINITY, f64::min),
            values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ),
    };
    let unit = |i: usize| -> f64 {
        // row 0 of the image is the highest frequency
        let (r, c) = (rows - 1 - i / cols, i % cols);
        let v = scale(values[r * cols + c]);
        match policy.scaling {
            Scaling::Fixed { .. } => v,
            _ if hi > lo => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
            _ => 0.0,
        }
    };
    bilinear(unit, rows, cols, policy.height, policy.width)
}

/// Converts a matrix into a single-channel image under `policy`.
pub fn rasterize(m: &TfMatrix, policy: &RasterPolicy) -> Result<RasterImage> {
    policy.validate()?;
    let values: Vec<f64> = match m.values() {
        TfValues::Real(v) => v.clone(),
        TfValues::Complex(v) => v.iter().map(|z| z.norm_sqr().sqrt()).collect(),
    };
    if values.is_empty() {
        return Err(Error::Shape("empty matrix".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix contains non-finite values"));
    }
    let px = normalize(&values, m.n_freq(), m.n_time(), policy)
        .into_iter()
        .map(|v| v as f32)
        .collect();
    let mut img = RasterImage::new(policy.height, policy.width, 1, px)?;
    img.policy = Some(*policy);
    img.provenance = vec![m.descriptor().clone()];
    Ok(img)
}

/// Interleaves three single-channel images as (VM, VA, VF) channels.
pub fn stack_channels(r1: &RasterImage, r2: &RasterImage, r3: &RasterImage) -> Result<RasterImage> {
    for r in [r1, r2, r3] {
        if r.channels != 1 {
            return Err(Error::Shape("stack_channels takes single-channel images".into()));
        }
        if (r.height, r.width) != (r1.height, r1.width) {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                r1.height, r1.width, r.height, r.width
            )));
        }
    }
    let mut px = Vec::with_capacity(r1.pixels.len() * 3);
    for i in 0..r1.pixels.len() {
        px.extend([r1.pixels[i], r2.pixels[i], r3.pixels[i]]);
    }
    let mut out = RasterImage::new(r1.height, r1.width, 3, px)?;
    out.policy = r1.policy;
    out.provenance = [r1, r2, r3].iter().flat_map(|r| r.provenance.clone()).collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Png,
    Tensor,
}

/// Pixel to byte with round-half-up.
pub fn to_byte(p: f32) -> u8 {
    (p as f64 * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

const TFTN_MAGIC: &[u8; 4] = b"TFTN";
const TFTN_VERSION: u32 = 1;

pub fn write_tensor(r: &RasterImage, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(TFTN_MAGIC)?;
    put_u32(w, TFTN_VERSION)?;
    put_u32(w, r.height as u32)?;
    put_u32(w, r.width as u32)?;
    put_u32(w, r.channels as u32)?;
    for p in &r.pixels {
        put_f32(w, *p)?;
    }
    Ok(())
}

pub fn read_tensor(r: &mut impl Read) -> Result<RasterImage> {
    let fmt = |msg: String| Error::Format { format: "TFTN", msg };
    let io = |e: std::io::Error| fmt(e.to_string());
    let magic: [u8; 4] = get_array(r).map_err(io)?;
    if &magic != TFTN_MAGIC {
        return Err(fmt("bad magic".into()));
    }
    let version = get_u32(r).map_err(io)?;
    if version != TFTN_VERSION {
        return Err(fmt(format!("unsupported version {version}")));
    }
    let h = get_u32(r).map_err(io)? as usize;
    let w = get_u32(r).map_err(io)? as usize;
    let c = get_u32(r).map_err(io)? as usize;
    let mut px = Vec::with_capacity((h * w * c).min(1 << 26));
    for _ in 0..h * w * c {
        px.push(get_f32(r).map_err(io)?);
    }
    RasterImage::new(h, w, c, px)
}

fn create_exclusive(path: &Path) -> Result<BufWriter<File>> {
    let f = OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(f))
}

/// Writes `r` to a new file at `path`; fails if the file exists.
pub fn export(r: &RasterImage, format: ExportFormat, path: &Path) -> Result<()> {
    let mut w = create_exclusive(path)?;
    match format {
        ExportFormat::Tensor => write_tensor(r, &mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e)),
        ExportFormat::Png => {
            let color = if r.channels == 3 { png::ColorType::Rgb } else { png::ColorType::Grayscale };
            let mut enc = png::Encoder::new(&mut w, r.width as u32, r.height as u32);
            enc.set_color(color);
            enc.set_depth(png::BitDepth::Eight);
            let bytes: Vec<u8> = r.pixels.iter().map(|&p| to_byte(p)).collect();
            let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e.to_string()));
            let mut writer = enc.write_header().map_err(to_io)?;
            writer.write_image_data(&bytes).map_err(to_io)?;
            writer.finish().map_err(to_io)?;
            w.flush().map_err(|e| Error::io(path, e))
        }
    }
}

pub fn load_tensor(path: &Path) -> Result<RasterImage> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tensor(&mut BufReader::new(f))
}
