use crate::geometry::{ProcessGrid, Sign, NDIM};

use super::CommError;

/// A rank's place on the periodic process torus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub grid: ProcessGrid,
    pub rank: usize,
    pub coord: [usize; NDIM],
    /// `neighbors[mu][sign.index()]`
    pub neighbors: [[usize; 2]; NDIM],
}

impl Topology {
    pub fn neighbor(&self, mu: usize, sign: Sign) -> usize {
        self.neighbors[mu][sign.index()]
    }

    pub fn size(&self) -> usize {
        self.grid.ranks()
    }
}

/// Neighbour table of `rank`; ranks are numbered lexicographically in grid
/// coordinates with `x` fastest.
pub fn build_topology(grid: ProcessGrid, rank: usize) -> Result<Topology, CommError> {
    let size = grid.ranks();
    if rank >= size {
        return Err(CommError::RankOutOfRange { rank, size });
    }
    let coord = grid.coord_of(rank);
    let dims = grid.dims().0;
    let neighbors = std::array::from_fn(|mu| {
        let step = |delta: usize| {
            let mut c = coord;
            c[mu] = (c[mu] + delta) % dims[mu];
            grid.rank_of(c)
        };
        [step(1), step(dims[mu] - 1)]
    });
    Ok(Topology {
        grid,
        rank,
        coord,
        neighbors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rank_is_its_own_neighbor() {
        let t = build_topology(ProcessGrid::single(), 0).unwrap();
        assert!(t.neighbors.iter().flatten().all(|&r| r == 0));
    }

    #[test]
    fn extent_two_wraps_to_same_rank() {
        let t = build_topology(ProcessGrid::new([2, 1, 1, 1]).unwrap(), 0).unwrap();
        assert_eq!(t.neighbor(0, Sign::Forward), 1);
        assert_eq!(t.neighbor(0, Sign::Backward), 1);
        assert_eq!(t.neighbor(1, Sign::Forward), 0);
    }

    #[test]
    fn rank_out_of_range() {
        let grid = ProcessGrid::new([2, 2, 1, 1]).unwrap();
        assert_eq!(build_topology(grid, 4), Err(CommError::RankOutOfRange { rank: 4, size: 4 }));
    }
}
