use std::sync::Arc;

use crate::geometry::{parity, site_index_unchecked, Parity, SiteCoord, Sign, NDIM};
use crate::layout::Layout;

use super::matrix::{ColorMatrix, Spinor};

/// One spinor per local site of a single parity, followed by ghost slots for
/// the off-rank neighbours the stencil reads.
///
/// Every mutable access to the local sites bumps a version counter, and the
/// halo is only considered fresh when it was exchanged for the current
/// version.
#[derive(Debug, Clone)]
pub struct FermionField {
    layout: Arc<Layout>,
    parity: Parity,
    data: Vec<Spinor>,
    version: u64,
    halo_version: Option<u64>,
}

impl FermionField {
    pub fn zeros(layout: &Arc<Layout>, parity: Parity) -> Self {
        let len = layout.half_volume() + layout.fermion_plans[parity.index()].ghost_len;
        Self {
            layout: Arc::clone(layout),
            parity,
            data: vec![Spinor::ZERO; len],
            version: 0,
            halo_version: None,
        }
    }

    /// Fills each local site from its global coordinate.
    pub fn from_global_fn(layout: &Arc<Layout>, parity: Parity, mut f: impl FnMut(SiteCoord) -> Spinor) -> Self {
        let mut field = Self::zeros(layout, parity);
        let half = layout.half_volume();
        for i in 0..half {
            let c = layout.coord_in_parity(parity, i);
            field.data[i] = f(layout.to_global(c));
        }
        field
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.layout, self.parity)
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Number of local sites.
    pub fn len(&self) -> usize {
        self.layout.half_volume()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sites(&self) -> &[Spinor] {
        &self.data[..self.len()]
    }

    pub fn sites_mut(&mut self) -> &mut [Spinor] {
        self.version += 1;
        let n = self.len();
        &mut self.data[..n]
    }

    pub fn ghosts(&self) -> &[Spinor] {
        &self.data[self.len()..]
    }

    pub(crate) fn ghosts_mut(&mut self) -> &mut [Spinor] {
        let n = self.len();
        &mut self.data[n..]
    }

    /// Local sites followed by ghost slots, as indexed by the stencil tables.
    pub(crate) fn buffer(&self) -> &[Spinor] {
        &self.data
    }

    pub fn halo_is_fresh(&self) -> bool {
        self.halo_version == Some(self.version)
    }

    pub(crate) fn mark_halo_fresh(&mut self) {
        self.halo_version = Some(self.version);
    }

    pub fn set_zero(&mut self) {
        self.sites_mut().fill(Spinor::ZERO);
    }

    pub fn copy_from(&mut self, other: &FermionField) {
        let n = self.len();
        self.version += 1;
        self.data[..n].copy_from_slice(other.sites());
    }

    /// Value at a local coordinate, if it has this field's parity.
    pub fn at(&self, c: SiteCoord) -> Option<&Spinor> {
        if !self.layout.local().contains(c) || parity(c) != self.parity {
            return None;
        }
        Some(&self.data[self.layout.index_in_parity(c)])
    }

    /// Value the stencil reads one step from local site `c` (of the opposite
    /// parity), looked up through the ghost slots when it lives off-rank.
    pub fn neighbor_value(&self, c: SiteCoord, mu: usize, sign: Sign) -> Option<&Spinor> {
        if !self.halo_is_fresh() || !self.layout.local().contains(c) || parity(c) == self.parity {
            return None;
        }
        let table = &self.layout.stencils[self.parity.flip().index()];
        let hops = &table.hops[self.layout.index_in_parity(c)];
        let idx = match sign {
            Sign::Forward => hops.fwd[mu],
            Sign::Backward => hops.bwd[mu],
        };
        Some(&self.data[idx as usize])
    }
}

/// One link per local site and forward direction, plus the backward-face
/// links of neighbouring ranks that the stencil needs.
#[derive(Debug, Clone)]
pub struct GaugeField {
    layout: Arc<Layout>,
    links: Vec<[ColorMatrix; NDIM]>,
    ghost: Vec<ColorMatrix>,
    halo_fresh: bool,
}

impl GaugeField {
    pub fn from_global_fn(layout: &Arc<Layout>, mut f: impl FnMut(SiteCoord) -> [ColorMatrix; NDIM]) -> Self {
        let volume = layout.volume();
        let mut links = vec![[ColorMatrix::IDENTITY; NDIM]; volume];
        for c in layout.local().coords() {
            links[site_index_unchecked(c, layout.local())] = f(layout.to_global(c));
        }
        Self {
            layout: Arc::clone(layout),
            links,
            ghost: vec![ColorMatrix::ZERO; layout.gauge_plan.ghost_len],
            halo_fresh: false,
        }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    /// Links in storage order, four per site.
    pub fn links(&self) -> &[[ColorMatrix; NDIM]] {
        &self.links
    }

    pub fn links_mut(&mut self) -> &mut [[ColorMatrix; NDIM]] {
        self.halo_fresh = false;
        &mut self.links
    }

    pub fn link(&self, c: SiteCoord, mu: usize) -> &ColorMatrix {
        &self.links[site_index_unchecked(c, self.layout.local())][mu]
    }

    pub fn ghosts(&self) -> &[ColorMatrix] {
        &self.ghost
    }

    pub(crate) fn ghosts_mut(&mut self) -> &mut [ColorMatrix] {
        &mut self.ghost
    }

    pub fn halo_is_fresh(&self) -> bool {
        self.halo_fresh
    }

    pub(crate) fn mark_halo_fresh(&mut self) {
        self.halo_fresh = true;
    }

    /// Link `U_mu` on the bond ending at local `c` from below, read from the
    /// ghost face when the bond starts on another rank.
    pub fn backward_link(&self, c: SiteCoord, mu: usize) -> Option<&ColorMatrix> {
        if !self.halo_fresh {
            return None;
        }
        let table = &self.layout.stencils[parity(c).index()];
        let idx = table.hops[self.layout.index_in_parity(c)].bwd_link[mu] as usize;
        Some(self.link_at(idx, mu))
    }

    #[inline(always)]
    pub(crate) fn link_at(&self, idx: usize, mu: usize) -> &ColorMatrix {
        let v = self.links.len();
        if idx < v {
            &self.links[idx][mu]
        } else {
            &self.ghost[idx - v]
        }
    }
}
