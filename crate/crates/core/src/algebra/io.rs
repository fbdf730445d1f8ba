//! `LQF1` field files.
//!
//! ```text
//! "LQF1" | 4 × u32 local dims | u8 kind (0 even, 1 odd, 2 gauge) | f64 (re, im) pairs
//! ```
//!
//! All integers and floats are little-endian; values follow storage order
//! (sites in parity-blocked order; spin outer and colour inner for spinors;
//! four row-major links per site for gauge fields).

use std::io::{Read, Write};
use std::sync::Arc;

use crate::geometry::{Parity, NDIM};
use crate::layout::Layout;

use super::field::{FermionField, GaugeField};
use super::matrix::{ColorMatrix, Complex, Spinor};
use super::AlgebraError;

pub const MAGIC: &[u8; 4] = b"LQF1";
const KIND_GAUGE: u8 = 2;

fn write_header<W: Write>(w: &mut W, layout: &Layout, kind: u8) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    for d in layout.local().0 {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&[kind])
}

fn write_complex<W: Write>(w: &mut W, z: &Complex) -> std::io::Result<()> {
    w.write_all(&z.re.to_le_bytes())?;
    w.write_all(&z.im.to_le_bytes())
}

fn read_header<R: Read>(r: &mut R, layout: &Layout) -> Result<u8, AlgebraError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(AlgebraError::Format(format!("bad magic {magic:?}")));
    }
    let mut dims = [0usize; NDIM];
    for d in dims.iter_mut() {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *d = u32::from_le_bytes(b) as usize;
    }
    if dims != layout.local().0 {
        return Err(AlgebraError::Format(format!(
            "file dims {dims:?} do not match local lattice {:?}",
            layout.local().0
        )));
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    Ok(kind[0])
}

fn read_complex<R: Read>(r: &mut R) -> std::io::Result<Complex> {
    let mut b = [0u8; 16];
    r.read_exact(&mut b)?;
    Ok(Complex::new(
        f64::from_le_bytes(b[..8].try_into().unwrap()),
        f64::from_le_bytes(b[8..].try_into().unwrap()),
    ))
}

pub fn write_fermion<W: Write>(w: &mut W, field: &FermionField) -> std::io::Result<()> {
    write_header(w, field.layout(), field.parity().index() as u8)?;
    for z in field.sites().iter().flat_map(Spinor::components) {
        write_complex(w, z)?;
    }
    Ok(())
}

pub fn read_fermion<R: Read>(r: &mut R, layout: &Arc<Layout>) -> Result<FermionField, AlgebraError> {
    let parity = match read_header(r, layout)? {
        0 => Parity::Even,
        1 => Parity::Odd,
        k => return Err(AlgebraError::Format(format!("kind byte {k} is not a fermion parity"))),
    };
    let mut field = FermionField::zeros(layout, parity);
    for s in field.sites_mut() {
        for z in s.0.iter_mut().flatten() {
            *z = read_complex(r)?;
        }
    }
    Ok(field)
}

pub fn write_gauge<W: Write>(w: &mut W, field: &GaugeField) -> std::io::Result<()> {
    write_header(w, field.layout(), KIND_GAUGE)?;
    for z in field.links().iter().flatten().flat_map(|u| u.0.iter().flatten()) {
        write_complex(w, z)?;
    }
    Ok(())
}

pub fn read_gauge<R: Read>(r: &mut R, layout: &Arc<Layout>) -> Result<GaugeField, AlgebraError> {
    let kind = read_header(r, layout)?;
    if kind != KIND_GAUGE {
        return Err(AlgebraError::Format(format!("kind byte {kind} is not a gauge field")));
    }
    let mut field = GaugeField::from_global_fn(layout, |_| [ColorMatrix::ZERO; NDIM]);
    for u in field.links_mut().iter_mut().flatten() {
        for z in u.0.iter_mut().flatten() {
            *z = read_complex(r)?;
        }
    }
    Ok(field)
}
