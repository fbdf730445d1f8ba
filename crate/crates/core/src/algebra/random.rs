//! Seeded field initialisation that does not depend on the decomposition.
//!
//! Every site draws from its own ChaCha8 stream: the key comes from the seed
//! and the field kind, the stream id is the global lexicographic site index.
//! A site's values therefore depend only on `(seed, global coordinate)`, and
//! any decomposition of the same lattice produces the same global field
//! without communication.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{Parity, SiteCoord, NDIM};
use crate::layout::Layout;

use super::field::{FermionField, GaugeField};
use super::matrix::{ColorMatrix, Complex, Spinor, ZERO};

const GAUGE_STREAM: u64 = 0x6761_7567_655f_6c6b;
const FERMION_STREAM: u64 = 0x6665_726d_696f_6e73;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one site of one field kind.
pub fn site_rng(seed: u64, kind: u64, global_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed ^ splitmix64(kind));
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&state.to_le_bytes());
        state = splitmix64(state);
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(global_index);
    rng
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re, im)
}

fn normalize(v: [Complex; 3]) -> [Complex; 3] {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.map(|z| z / n)
}

/// Haar-like SU(3) matrix: Gram–Schmidt on the first two rows of a complex
/// Gaussian matrix, third row `conj(row0 × row1)`. The cross product fixes
/// the determinant to 1, so no phase is left to remove.
pub fn random_su3<R: Rng + ?Sized>(rng: &mut R) -> ColorMatrix {
    let raw: [[Complex; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| gaussian(rng)));
    let r0 = normalize(raw[0]);
    let proj = r0.iter().zip(raw[1].iter()).fold(ZERO, |acc, (a, b)| acc + a.conj() * b);
    let r1 = normalize(std::array::from_fn(|j| raw[1][j] - proj * r0[j]));
    let r2 = [
        (r0[1] * r1[2] - r0[2] * r1[1]).conj(),
        (r0[2] * r1[0] - r0[0] * r1[2]).conj(),
        (r0[0] * r1[1] - r0[1] * r1[0]).conj(),
    ];
    ColorMatrix([r0, r1, r2])
}

pub fn unit_gauge(layout: &Arc<Layout>) -> GaugeField {
    GaugeField::from_global_fn(layout, |_| [ColorMatrix::IDENTITY; NDIM])
}

fn global_index(layout: &Layout, c: SiteCoord) -> u64 {
    layout.decomp.global.dims().lexicographic(c) as u64
}

pub fn random_gauge(layout: &Arc<Layout>, seed: u64) -> GaugeField {
    GaugeField::from_global_fn(layout, |c| {
        let mut rng = site_rng(seed, GAUGE_STREAM, global_index(layout, c));
        std::array::from_fn(|_| random_su3(&mut rng))
    })
}

/// Gaussian spinor on every site of `parity`.
pub fn random_fermion(layout: &Arc<Layout>, parity: Parity, seed: u64) -> FermionField {
    FermionField::from_global_fn(layout, parity, |c| {
        let mut rng = site_rng(seed, FERMION_STREAM, global_index(layout, c));
        Spinor::from_fn(|_, _| gaussian(&mut rng))
    })
}
