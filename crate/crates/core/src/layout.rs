//! Per-rank view of a decomposition: topology, halo plans and stencil tables.
//!
//! Built once per rank and shared by every field living on that rank.

use std::sync::Arc;

use crate::comm::{build_topology, CommError, HaloPlan, Topology};
use crate::geometry::{decompose, index_to_site, site_index_unchecked, Decomposition, Dims, GlobalLattice, Parity, ProcessGrid, SiteCoord, NDIM};
use crate::hopping::StencilTable;

#[derive(Debug)]
pub struct Layout {
    pub decomp: Decomposition,
    pub topo: Topology,
    /// Global coordinate of local `(0, 0, 0, 0)`.
    pub origin: [usize; NDIM],
    /// Indexed by field parity.
    pub fermion_plans: [HaloPlan; 2],
    pub gauge_plan: HaloPlan,
    /// Indexed by output parity.
    pub(crate) stencils: [StencilTable; 2],
}

impl Layout {
    pub fn new(decomp: Decomposition, rank: usize) -> Result<Arc<Self>, CommError> {
        let topo = build_topology(decomp.grid, rank)?;
        let origin = decomp.origin_of(rank);
        let local = decomp.local;
        let fermion_plans = [HaloPlan::fermion(local, Parity::Even), HaloPlan::fermion(local, Parity::Odd)];
        let gauge_plan = HaloPlan::gauge(local);
        let stencils = [
            StencilTable::build(&decomp, origin, Parity::Even, &fermion_plans[Parity::Odd.index()], &gauge_plan),
            StencilTable::build(&decomp, origin, Parity::Odd, &fermion_plans[Parity::Even.index()], &gauge_plan),
        ];
        Ok(Arc::new(Self {
            decomp,
            topo,
            origin,
            fermion_plans,
            gauge_plan,
            stencils,
        }))
    }

    /// The whole lattice on one rank.
    pub fn single(global: GlobalLattice) -> Arc<Self> {
        let decomp = decompose(global, ProcessGrid::single()).expect("even global extents always decompose over one rank");
        Self::new(decomp, 0).expect("rank 0 exists")
    }

    pub fn rank(&self) -> usize {
        self.topo.rank
    }

    pub fn local(&self) -> Dims {
        self.decomp.local
    }

    pub fn volume(&self) -> usize {
        self.decomp.local.volume()
    }

    pub fn half_volume(&self) -> usize {
        self.decomp.local.half_volume()
    }

    pub fn to_global(&self, local: SiteCoord) -> SiteCoord {
        SiteCoord(std::array::from_fn(|mu| self.origin[mu] + local.0[mu]))
    }

    /// Local coordinate of storage slot `i` in the `parity` block.
    pub fn coord_in_parity(&self, parity: Parity, i: usize) -> SiteCoord {
        index_to_site(parity.index() * self.half_volume() + i, self.local()).expect("index within the parity block")
    }

    /// Storage slot of local coordinate `c` within its parity block.
    pub fn index_in_parity(&self, c: SiteCoord) -> usize {
        site_index_unchecked(c, self.local()) % self.half_volume()
    }

    /// True when both layouts describe the same rank of the same decomposition.
    pub fn same_shape(&self, other: &Layout) -> bool {
        self.decomp == other.decomp && self.topo.rank == other.topo.rank
    }
}
