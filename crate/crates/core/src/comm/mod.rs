//! Rank topology, halo exchange and deterministic collectives.
//!
//! Two transports share one messaging contract: per ordered
//! `(source, destination)` stream delivery is FIFO and lossless, and each
//! exchange or collective runs under its own phase tag. An exchange sends all
//! eight faces before waiting on any of them, so no grid shape can deadlock,
//! including self-neighbours (grid extent 1) and extent-2 axes where both
//! faces travel to the same rank under distinct tags.

mod frame;
mod plan;
mod topology;
mod transport;

use std::time::Duration;

use thiserror::Error;

use crate::algebra::{ColorMatrix, Complex, FermionField, GaugeField, Spinor};
use crate::geometry::{index_to_site, site_index_unchecked, Sign, NDIM};

pub use frame::{decode_frame, encode_frame, FrameHeader, COLLECTIVE_AXIS, HEADER_LEN};
pub use plan::{Face, HaloPlan, LINK_BYTES, SPINOR_BYTES};
pub use topology::{build_topology, Topology};
pub use transport::{run_ranks, Comm, CommStats, TransportKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommError {
    #[error("rank {rank} out of range for {size} ranks")]
    RankOutOfRange { rank: usize, size: usize },
    #[error("serial transport runs exactly one rank, grid has {ranks}")]
    SerialNeedsOneRank { ranks: usize },
    #[error("transport closed")]
    TransportClosed,
    #[error("payload of {got} bytes where the plan expects {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("collective mismatch: {0}")]
    CollectiveMismatch(String),
    #[error("watchdog: {stalled} for {waited:?}")]
    Timeout { stalled: String, waited: Duration },
    #[error("aborted because another rank failed")]
    Aborted,
    #[error("malformed frame: {0}")]
    BadFrame(String),
}

/// Wire encoding of one site value.
pub(crate) trait Wire: Sized {
    const BYTES: usize;
    fn put(&self, out: &mut Vec<u8>);
    fn take(bytes: &[u8]) -> Self;
}

fn put_complex(z: &Complex, out: &mut Vec<u8>) {
    out.extend_from_slice(&z.re.to_le_bytes());
    out.extend_from_slice(&z.im.to_le_bytes());
}

fn take_complex(b: &[u8]) -> Complex {
    Complex::new(f64::from_le_bytes(b[..8].try_into().unwrap()), f64::from_le_bytes(b[8..16].try_into().unwrap()))
}

impl Wire for Spinor {
    const BYTES: usize = SPINOR_BYTES;

    fn put(&self, out: &mut Vec<u8>) {
        self.components().for_each(|z| put_complex(z, out));
    }

    fn take(bytes: &[u8]) -> Self {
        Spinor::from_fn(|s, c| take_complex(&bytes[16 * (3 * s + c)..]))
    }
}

impl Wire for ColorMatrix {
    const BYTES: usize = LINK_BYTES;

    fn put(&self, out: &mut Vec<u8>) {
        self.0.iter().flatten().for_each(|z| put_complex(z, out));
    }

    fn take(bytes: &[u8]) -> Self {
        ColorMatrix(std::array::from_fn(|i| std::array::from_fn(|j| take_complex(&bytes[16 * (3 * i + j)..]))))
    }
}

fn axis_byte(sign: Sign) -> u8 {
    sign.index() as u8
}

/// Refreshes the ghost slots of `field` from the ranks that own them.
pub fn halo_exchange(field: &mut FermionField, comm: &mut Comm) -> Result<(), CommError> {
    let layout = std::sync::Arc::clone(field.layout());
    let plan = &layout.fermion_plans[field.parity().index()];
    let phase = comm.next_phase();

    let sites = field.sites();
    for face in &plan.faces {
        let mut payload = Vec::with_capacity(face.len() * Spinor::BYTES);
        for &i in &face.pack {
            sites[i as usize].put(&mut payload);
        }
        // Our lower plane fills the ghost above the -mu neighbour and vice versa.
        let dest = comm.topology().neighbor(face.axis, face.sign.flip());
        comm.send(dest, phase, face.axis as u8, axis_byte(face.sign), &payload)?;
    }

    for face in &plan.faces {
        let src = comm.topology().neighbor(face.axis, face.sign);
        let payload = comm.recv(src, phase, face.axis as u8, axis_byte(face.sign), "halo exchange")?;
        let expected = face.len() * Spinor::BYTES;
        if payload.len() != expected {
            return Err(CommError::SizeMismatch {
                expected,
                got: payload.len(),
            });
        }
        let ghosts = field.ghosts_mut();
        for (k, chunk) in payload.chunks_exact(Spinor::BYTES).enumerate() {
            ghosts[face.ghost_offset + k] = Spinor::take(chunk);
        }
    }
    field.mark_halo_fresh();
    Ok(())
}

/// Fetches the backward-face links every rank needs from its `-mu`
/// neighbours. Links never change during a solve, so this runs once.
pub fn gauge_halo_exchange(field: &mut GaugeField, comm: &mut Comm) -> Result<(), CommError> {
    let layout = std::sync::Arc::clone(field.layout());
    let plan = &layout.gauge_plan;
    let phase = comm.next_phase();

    for face in &plan.faces {
        let mut payload = Vec::with_capacity(face.len() * ColorMatrix::BYTES);
        for &i in &face.pack {
            field.links()[i as usize][face.axis].put(&mut payload);
        }
        let dest = comm.topology().neighbor(face.axis, Sign::Forward);
        comm.send(dest, phase, face.axis as u8, axis_byte(face.sign), &payload)?;
    }
    for face in &plan.faces {
        let src = comm.topology().neighbor(face.axis, Sign::Backward);
        let payload = comm.recv(src, phase, face.axis as u8, axis_byte(face.sign), "gauge halo exchange")?;
        let expected = face.len() * ColorMatrix::BYTES;
        if payload.len() != expected {
            return Err(CommError::SizeMismatch {
                expected,
                got: payload.len(),
            });
        }
        let ghosts = field.ghosts_mut();
        for (k, chunk) in payload.chunks_exact(ColorMatrix::BYTES).enumerate() {
            ghosts[face.ghost_offset + k] = ColorMatrix::take(chunk);
        }
    }
    field.mark_halo_fresh();
    Ok(())
}

/// Reassembles a fermion field on rank 0, in the storage order a single rank
/// holding the whole lattice would use.
pub fn gather_fermion(field: &FermionField, comm: &mut Comm) -> Result<Option<Vec<Spinor>>, CommError> {
    let layout = field.layout();
    let mut payload = Vec::with_capacity(field.len() * Spinor::BYTES);
    field.sites().iter().for_each(|s| s.put(&mut payload));
    let Some(parts) = comm.gather_bytes(&payload)? else {
        return Ok(None);
    };
    let decomp = layout.decomp;
    let global = decomp.global.dims();
    let half = layout.half_volume();
    let mut out = vec![Spinor::ZERO; global.half_volume()];
    let offset = field.parity().index() * half;
    for (rank, bytes) in parts.iter().enumerate() {
        check_len(bytes.len(), half * Spinor::BYTES)?;
        let origin = decomp.origin_of(rank);
        for (i, chunk) in bytes.chunks_exact(Spinor::BYTES).enumerate() {
            let c = index_to_site(offset + i, decomp.local).expect("local index in range");
            let g = crate::geometry::SiteCoord(std::array::from_fn(|mu| origin[mu] + c.0[mu]));
            out[site_index_unchecked(g, global) % global.half_volume()] = Spinor::take(chunk);
        }
    }
    Ok(Some(out))
}

/// Reassembles a gauge field on rank 0 in single-rank storage order.
pub fn gather_gauge(field: &GaugeField, comm: &mut Comm) -> Result<Option<Vec<[ColorMatrix; NDIM]>>, CommError> {
    let layout = field.layout();
    let mut payload = Vec::with_capacity(field.links().len() * NDIM * ColorMatrix::BYTES);
    field.links().iter().flatten().for_each(|u| u.put(&mut payload));
    let Some(parts) = comm.gather_bytes(&payload)? else {
        return Ok(None);
    };
    let decomp = layout.decomp;
    let global = decomp.global.dims();
    let site_bytes = NDIM * ColorMatrix::BYTES;
    let mut out = vec![[ColorMatrix::ZERO; NDIM]; global.volume()];
    for (rank, bytes) in parts.iter().enumerate() {
        check_len(bytes.len(), layout.volume() * site_bytes)?;
        let origin = decomp.origin_of(rank);
        for (i, chunk) in bytes.chunks_exact(site_bytes).enumerate() {
            let c = index_to_site(i, decomp.local).expect("local index in range");
            let g = crate::geometry::SiteCoord(std::array::from_fn(|mu| origin[mu] + c.0[mu]));
            out[site_index_unchecked(g, global)] =
                std::array::from_fn(|mu| ColorMatrix::take(&chunk[mu * ColorMatrix::BYTES..]));
        }
    }
    Ok(Some(out))
}

fn check_len(got: usize, expected: usize) -> Result<(), CommError> {
    if got != expected {
        return Err(CommError::CollectiveMismatch(format!(
            "gather: rank sent {got} bytes, expected {expected}"
        )));
    }
    Ok(())
}
