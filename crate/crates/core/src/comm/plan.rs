//! Which local sites are packed for each face, and where incoming faces land.
//!
//! Ghost regions are named after the side of the *receiving* rank they sit
//! on: the `(mu, Forward)` ghost holds the sites one step beyond the upper
//! face (`x_mu = L_mu`), filled from the `+mu` neighbour's `x_mu = 0` face.

use crate::geometry::{parity, site_index_unchecked, Dims, Parity, SiteCoord, Sign, NDIM};

/// Bytes of one double-precision spinor (12 complex numbers).
pub const SPINOR_BYTES: usize = 192;
/// Bytes of one double-precision 3×3 complex link.
pub const LINK_BYTES: usize = 144;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub sign: Sign,
    /// Storage indices of the local sites this rank packs for the face of the
    /// same name on the neighbour it sends to.
    pub pack: Vec<u32>,
    /// First ghost slot filled by the incoming message for this face.
    pub ghost_offset: usize,
}

impl Face {
    pub fn len(&self) -> usize {
        self.pack.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pack.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaloPlan {
    pub local: Dims,
    /// Parity of the exchanged field; `None` for gauge links.
    pub parity: Option<Parity>,
    pub faces: Vec<Face>,
    pub ghost_len: usize,
    pub bytes_per_item: usize,
}

impl HaloPlan {
    /// Both faces of every axis for a single-parity fermion field. Pack
    /// indices are relative to the start of the parity block.
    pub fn fermion(local: Dims, p: Parity) -> Self {
        let half = local.half_volume();
        let mut faces = Vec::with_capacity(2 * NDIM);
        let mut offset = 0;
        for mu in 0..NDIM {
            for sign in Sign::BOTH {
                let plane = send_plane(local, mu, sign);
                let pack: Vec<u32> = local
                    .coords()
                    .filter(|c| c.0[mu] == plane && parity(*c) == p)
                    .map(|c| (site_index_unchecked(c, local) - p.index() * half) as u32)
                    .collect();
                let len = pack.len();
                faces.push(Face {
                    axis: mu,
                    sign,
                    pack,
                    ghost_offset: offset,
                });
                offset += len;
            }
        }
        Self {
            local,
            parity: Some(p),
            faces,
            ghost_len: offset,
            bytes_per_item: SPINOR_BYTES,
        }
    }

    /// The backward face of every axis, carrying only the links along that
    /// axis (`U_mu(x - mu)` for sites on the lower face).
    pub fn gauge(local: Dims) -> Self {
        let mut faces = Vec::with_capacity(NDIM);
        let mut offset = 0;
        for mu in 0..NDIM {
            let plane = send_plane(local, mu, Sign::Backward);
            let pack: Vec<u32> = local
                .coords()
                .filter(|c| c.0[mu] == plane)
                .map(|c| site_index_unchecked(c, local) as u32)
                .collect();
            let len = pack.len();
            faces.push(Face {
                axis: mu,
                sign: Sign::Backward,
                pack,
                ghost_offset: offset,
            });
            offset += len;
        }
        Self {
            local,
            parity: None,
            faces,
            ghost_len: offset,
            bytes_per_item: LINK_BYTES,
        }
    }

    pub fn face(&self, axis: usize, sign: Sign) -> Option<&Face> {
        self.faces.iter().find(|f| f.axis == axis && f.sign == sign)
    }

    /// Bytes received (equally, sent) by one rank per exchange.
    pub fn bytes(&self) -> usize {
        self.ghost_len * self.bytes_per_item
    }

    /// Ghost slot holding the off-rank site reached from local `c` by one step
    /// along `(axis, sign)`. `c` must sit on the matching face.
    pub fn ghost_slot(&self, c: SiteCoord, axis: usize, sign: Sign) -> usize {
        let face = self.face(axis, sign).expect("plan has no such face");
        let pos = face_lex(c, axis, self.local);
        match self.parity {
            Some(_) => face.ghost_offset + pos / 2,
            None => face.ghost_offset + pos,
        }
    }
}

/// The local plane whose sites are sent to fill the neighbour's `(mu, sign)`
/// ghost region.
fn send_plane(local: Dims, mu: usize, sign: Sign) -> usize {
    match sign {
        Sign::Forward => 0,
        Sign::Backward => local.0[mu] - 1,
    }
}

/// Lexicographic index over the three axes other than `mu`, `x` fastest.
fn face_lex(c: SiteCoord, mu: usize, local: Dims) -> usize {
    let mut idx = 0;
    let mut stride = 1;
    for nu in 0..NDIM {
        if nu != mu {
            idx += c.0[nu] * stride;
            stride *= local.0[nu];
        }
    }
    idx
}
