//! Little-endian primitives shared by the TFSG, TFTM and TFTN containers.

use std::io::{Read, Write};

pub(crate) fn put_u8(w: &mut impl Write, v: u8) -> std::io::Result<()> {
    w.write_all(&[v])
}
pub(crate) fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
pub(crate) fn put_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
pub(crate) fn put_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
pub(crate) fn put_f32(w: &mut impl Write, v: f32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn get_array<const N: usize>(r: &mut impl Read) -> std::io::Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}
pub(crate) fn get_u8(r: &mut impl Read) -> std::io::Result<u8> {
    Ok(get_array::<1>(r)?[0])
}
pub(crate) fn get_u32(r: &mut impl Read) -> std::io::Result<u32> {
    Ok(u32::from_le_bytes(get_array(r)?))
}
pub(crate) fn get_u64(r: &mut impl Read) -> std::io::Result<u64> {
    Ok(u64::from_le_bytes(get_array(r)?))
}
pub(crate) fn get_f64(r: &mut impl Read) -> std::io::Result<f64> {
    Ok(f64::from_le_bytes(get_array(r)?))
}
pub(crate) fn get_f32(r: &mut impl Read) -> std::io::Result<f32> {
    Ok(f32::from_le_bytes(get_array(r)?))
}
