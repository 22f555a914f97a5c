//! TFTM container: magic `TFTM`, u32 version, u8 kind, u8 is_complex,
//! u32 n_freq, u32 n_time, f64 t0/dt/f0/df, u32 descriptor length + JSON
//! bytes, then row-major f32 values (re/im interleaved when complex).
//! Non-uniform frequency axes (CWT) are rebuilt from the descriptor.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{cwt_frequencies, uniform_axis, TfDescriptor, TfMatrix, TfValues, TransformKind, TransformParams};
use crate::binio::*;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TFTM";
const VERSION: u32 = 1;

fn step(axis: &[f64]) -> f64 {
    if axis.len() > 1 {
        axis[1] - axis[0]
    } else {
        1.0
    }
}

pub fn write_tftm(m: &TfMatrix, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    put_u32(w, VERSION)?;
    put_u8(w, m.kind().code())?;
    put_u8(w, m.is_complex() as u8)?;
    put_u32(w, m.n_freq() as u32)?;
    put_u32(w, m.n_time() as u32)?;
    put_f64(w, m.t_axis()[0])?;
    put_f64(w, step(m.t_axis()))?;
    put_f64(w, m.f_axis()[0])?;
    put_f64(w, step(m.f_axis()))?;
    let json = serde_json::to_vec(m.descriptor()).expect("descriptor serializes");
    put_u32(w, json.len() as u32)?;
    w.write_all(&json)?;
    match m.values() {
        TfValues::Real(v) => {
            for x in v {
                put_f32(w, *x as f32)?;
            }
        }
        TfValues::Complex(v) => {
            for z in v {
                put_f32(w, z.re as f32)?;
                put_f32(w, z.im as f32)?;
            }
        }
    }
    Ok(())
}

pub fn read_tftm(r: &mut impl Read) -> Result<TfMatrix> {
    let fmt = |msg: String| Error::Format { format: "TFTM", msg };
    let io = |e: std::io::Error| fmt(e.to_string());
    let magic: [u8; 4] = get_array(r).map_err(io)?;
    if &magic != MAGIC {
        return Err(fmt("bad magic".into()));
    }
    let version = get_u32(r).map_err(io)?;
    if version != VERSION {
        return Err(fmt(format!("unsupported version {version}")));
    }
    let kind = TransformKind::from_code(get_u8(r).map_err(io)?).ok_or_else(|| fmt("unknown kind".into()))?;
    let complex = get_u8(r).map_err(io)? != 0;
    let n_freq = get_u32(r).map_err(io)? as usize;
    let n_time = get_u32(r).map_err(io)? as usize;
    let t0 = get_f64(r).map_err(io)?;
    let dt = get_f64(r).map_err(io)?;
    let f0 = get_f64(r).map_err(io)?;
    let df = get_f64(r).map_err(io)?;
    let jlen = get_u32(r).map_err(io)? as usize;
    let mut json = vec![0u8; jlen];
    r.read_exact(&mut json).map_err(io)?;
    let descriptor: TfDescriptor = serde_json::from_slice(&json)?;
    if descriptor.kind() != kind {
        return Err(fmt("kind byte disagrees with descriptor".into()));
    }
    let count = n_freq * n_time;
    let values = if complex {
        let mut v = Vec::with_capacity(count);
        for _ in 0..count {
            let re = get_f32(r).map_err(io)? as f64;
            let im = get_f32(r).map_err(io)? as f64;
            v.push(Complex64::new(re, im));
        }
        TfValues::Complex(v)
    } else {
        let mut v = Vec::with_capacity(count);
        for _ in 0..count {
            v.push(get_f32(r).map_err(io)? as f64);
        }
        TfValues::Real(v)
    };
    let f_axis = match &descriptor.params {
        TransformParams::Cwt { n_scales, f_min, f_max, .. } => cwt_frequencies(*n_scales, *f_min, *f_max),
        _ => uniform_axis(f0, df, n_freq),
    };
    TfMatrix::new(values, n_freq, n_time, uniform_axis(t0, dt, n_time), f_axis, descriptor)
}

pub fn save_tftm(m: &TfMatrix, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_tftm(m, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_tftm(path: &Path) -> Result<TfMatrix> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tftm(&mut BufReader::new(f))
}
