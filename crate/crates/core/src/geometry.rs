//! Lattice coordinates, checkerboard parity and regular 4D domain decomposition.
//!
//! Sites are stored parity-blocked: all even sites first, then all odd sites,
//! each block in lexicographic order with `x` running fastest. Because every
//! local extent is even, a rank's local parity always agrees with the global
//! parity of the same site.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Number of space-time dimensions.
pub const NDIM: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("extent along axis {axis} is zero")]
    ZeroExtent { axis: usize },
    #[error("global extent {extent} along axis {axis} is odd")]
    OddGlobalExtent { axis: usize, extent: usize },
    #[error("grid extent {grid} does not divide global extent {global} along axis {axis}")]
    NonDivisible {
        axis: usize,
        global: usize,
        grid: usize,
    },
    #[error("local extent {extent} along axis {axis} is odd or smaller than 2")]
    OddLocalExtent { axis: usize, extent: usize },
    #[error("coordinate {coord:?} out of range for extents {dims:?}")]
    OutOfRange {
        coord: [usize; NDIM],
        dims: [usize; NDIM],
    },
    #[error("site index {index} out of range for volume {volume}")]
    IndexOutOfRange { index: usize, volume: usize },
    #[error("cannot parse dimensions {0:?}: expected four positive integers like 8x8x8x16")]
    Parse(String),
}

/// Four extents in the `x, y, z, t` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims(pub [usize; NDIM]);

impl Dims {
    pub fn volume(&self) -> usize {
        self.0.iter().product()
    }

    pub fn half_volume(&self) -> usize {
        self.volume() / 2
    }

    pub fn contains(&self, c: SiteCoord) -> bool {
        c.0.iter().zip(self.0.iter()).all(|(x, l)| x < l)
    }

    /// Lexicographic index with `x` fastest.
    pub fn lexicographic(&self, c: SiteCoord) -> usize {
        let [lx, ly, lz, _] = self.0;
        let [x, y, z, t] = c.0;
        x + lx * (y + ly * (z + lz * t))
    }

    pub fn from_lexicographic(&self, mut idx: usize) -> SiteCoord {
        let mut c = [0; NDIM];
        for (mu, l) in self.0.iter().enumerate() {
            c[mu] = idx % l;
            idx /= l;
        }
        SiteCoord(c)
    }

    /// Iterates all coordinates in lexicographic order.
    pub fn coords(&self) -> impl Iterator<Item = SiteCoord> + '_ {
        (0..self.volume()).map(move |i| self.from_lexicographic(i))
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "{a}x{b}x{c}x{d}")
    }
}

impl FromStr for Dims {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split('x').collect();
        if parts.len() != NDIM {
            return Err(GeometryError::Parse(s.to_string()));
        }
        let mut dims = [0; NDIM];
        for (d, p) in dims.iter_mut().zip(parts) {
            *d = p
                .parse::<usize>()
                .ok()
                .filter(|v| *v > 0)
                .ok_or_else(|| GeometryError::Parse(s.to_string()))?;
        }
        Ok(Dims(dims))
    }
}

/// Global lattice; every extent positive and even.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GlobalLattice(Dims);

impl GlobalLattice {
    pub fn new(dims: [usize; NDIM]) -> Result<Self, GeometryError> {
        for (axis, &extent) in dims.iter().enumerate() {
            if extent == 0 {
                return Err(GeometryError::ZeroExtent { axis });
            }
            if extent % 2 != 0 {
                return Err(GeometryError::OddGlobalExtent { axis, extent });
            }
        }
        Ok(Self(Dims(dims)))
    }

    pub fn dims(&self) -> Dims {
        self.0
    }

    pub fn volume(&self) -> usize {
        self.0.volume()
    }
}

impl FromStr for GlobalLattice {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GlobalLattice::new(s.parse::<Dims>()?.0)
    }
}

impl fmt::Display for GlobalLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Ranks along each axis of the process torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProcessGrid(Dims);

impl ProcessGrid {
    pub fn new(dims: [usize; NDIM]) -> Result<Self, GeometryError> {
        if let Some(axis) = dims.iter().position(|&d| d == 0) {
            return Err(GeometryError::ZeroExtent { axis });
        }
        Ok(Self(Dims(dims)))
    }

    pub fn single() -> Self {
        Self(Dims([1; NDIM]))
    }

    pub fn dims(&self) -> Dims {
        self.0
    }

    pub fn ranks(&self) -> usize {
        self.0.volume()
    }

    /// Grid coordinate of `rank`, lexicographic with `x` fastest.
    pub fn coord_of(&self, rank: usize) -> [usize; NDIM] {
        self.0.from_lexicographic(rank).0
    }

    pub fn rank_of(&self, coord: [usize; NDIM]) -> usize {
        self.0.lexicographic(SiteCoord(coord))
    }
}

impl FromStr for ProcessGrid {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProcessGrid::new(s.parse::<Dims>()?.0)
    }
}

impl fmt::Display for ProcessGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A global lattice split into equal local lattices over a process grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decomposition {
    pub global: GlobalLattice,
    pub grid: ProcessGrid,
    pub local: Dims,
}

impl Decomposition {
    pub fn ranks(&self) -> usize {
        self.grid.ranks()
    }

    /// Global coordinate of the local origin owned by `rank`.
    pub fn origin_of(&self, rank: usize) -> [usize; NDIM] {
        let g = self.grid.coord_of(rank);
        std::array::from_fn(|mu| g[mu] * self.local.0[mu])
    }

    /// Rank owning a global coordinate, and the coordinate local to it.
    pub fn owner_of(&self, global: SiteCoord) -> (usize, SiteCoord) {
        let grid_coord = std::array::from_fn(|mu| global.0[mu] / self.local.0[mu]);
        let local = std::array::from_fn(|mu| global.0[mu] % self.local.0[mu]);
        (self.grid.rank_of(grid_coord), SiteCoord(local))
    }
}

/// Splits `global` over `grid`. Local extents must be even and at least 2.
pub fn decompose(global: GlobalLattice, grid: ProcessGrid) -> Result<Decomposition, GeometryError> {
    let g = global.dims().0;
    let p = grid.dims().0;
    let mut local = [0; NDIM];
    for axis in 0..NDIM {
        if g[axis] % p[axis] != 0 {
            return Err(GeometryError::NonDivisible {
                axis,
                global: g[axis],
                grid: p[axis],
            });
        }
        local[axis] = g[axis] / p[axis];
        if local[axis] < 2 || local[axis] % 2 != 0 {
            return Err(GeometryError::OddLocalExtent {
                axis,
                extent: local[axis],
            });
        }
    }
    Ok(Decomposition {
        global,
        grid,
        local: Dims(local),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteCoord(pub [usize; NDIM]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }
}

pub fn parity(c: SiteCoord) -> Parity {
    if c.0.iter().sum::<usize>() % 2 == 0 {
        Parity::Even
    } else {
        Parity::Odd
    }
}

/// Parity-blocked storage index of `c` within `dims` (every extent even).
pub fn site_index(c: SiteCoord, dims: Dims) -> Result<usize, GeometryError> {
    if !dims.contains(c) {
        return Err(GeometryError::OutOfRange {
            coord: c.0,
            dims: dims.0,
        });
    }
    Ok(site_index_unchecked(c, dims))
}

#[inline]
pub(crate) fn site_index_unchecked(c: SiteCoord, dims: Dims) -> usize {
    // x extent is even, so each x-row holds as many even as odd sites and
    // lex / 2 enumerates either parity in lexicographic order.
    parity(c).index() * dims.half_volume() + dims.lexicographic(c) / 2
}

/// Inverse of [`site_index`].
pub fn index_to_site(index: usize, dims: Dims) -> Result<SiteCoord, GeometryError> {
    let volume = dims.volume();
    if index >= volume {
        return Err(GeometryError::IndexOutOfRange { index, volume });
    }
    let half = dims.half_volume();
    let want = index / half;
    let mut c = dims.from_lexicographic(2 * (index % half));
    if parity(c).index() != want {
        c.0[0] += 1;
    }
    Ok(c)
}

/// Positive or negative step along an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Forward,
    Backward,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Forward, Sign::Backward];

    pub fn flip(self) -> Self {
        match self {
            Sign::Forward => Sign::Backward,
            Sign::Backward => Sign::Forward,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sign::Forward => 0,
            Sign::Backward => 1,
        }
    }
}

/// Where a neighbouring site lives relative to the current rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    Local,
    /// Owned by the adjacent rank along the step's axis and sign. With grid
    /// extent 1 that rank is the current one.
    Adjacent,
}

/// Nearest neighbour of local coordinate `c` one step along `mu`.
///
/// The returned coordinate is local to whichever rank owns it; crossing a
/// rank boundary wraps into the adjacent rank's local coordinates.
pub fn neighbor(c: SiteCoord, mu: usize, sign: Sign, local: Dims) -> (SiteCoord, Owner) {
    let l = local.0[mu];
    let mut out = c;
    let (x, owner) = match sign {
        Sign::Forward if c.0[mu] + 1 == l => (0, Owner::Adjacent),
        Sign::Forward => (c.0[mu] + 1, Owner::Local),
        Sign::Backward if c.0[mu] == 0 => (l - 1, Owner::Adjacent),
        Sign::Backward => (c.0[mu] - 1, Owner::Local),
    };
    out.0[mu] = x;
    (out, owner)
}

/// Sites sent per full-lattice hopping application, both faces of every axis.
pub fn surface_count(local: Dims) -> usize {
    let v = local.volume();
    local.0.iter().map(|l| 2 * v / l).sum()
}

pub fn surface_to_volume(local: Dims) -> f64 {
    surface_count(local) as f64 / local.volume() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn global(d: [usize; 4]) -> GlobalLattice {
        GlobalLattice::new(d).unwrap()
    }

    fn grid(d: [usize; 4]) -> ProcessGrid {
        ProcessGrid::new(d).unwrap()
    }

    #[test]
    fn decompose_reference_rows() {
        let d = decompose(global([96, 96, 96, 192]), grid([1, 8, 8, 16])).unwrap();
        assert_eq!(d.local, Dims([96, 12, 12, 12]));
        assert_eq!(d.ranks(), 1024);

        let d = decompose(global([64, 64, 64, 96]), grid([4, 4, 8, 8])).unwrap();
        assert_eq!(d.local, Dims([16, 16, 8, 12]));
        assert_eq!(d.ranks(), 1024);
    }

    #[test]
    fn decompose_identity_and_errors() {
        let d = decompose(global([8, 8, 8, 16]), ProcessGrid::single()).unwrap();
        assert_eq!(d.local, Dims([8, 8, 8, 16]));

        assert_eq!(
            decompose(global([96, 96, 96, 192]), grid([5, 1, 1, 1])),
            Err(GeometryError::NonDivisible {
                axis: 0,
                global: 96,
                grid: 5
            })
        );
        assert!(matches!(
            decompose(global([6, 4, 4, 4]), grid([2, 1, 1, 1])),
            Err(GeometryError::OddLocalExtent { axis: 0, extent: 3 })
        ));
        assert!(matches!(
            decompose(global([4, 4, 4, 4]), grid([1, 1, 1, 4])),
            Err(GeometryError::OddLocalExtent { axis: 3, extent: 1 })
        ));
        assert!(GlobalLattice::new([4, 4, 5, 4]).is_err());
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity(SiteCoord([0, 0, 0, 0])), Parity::Even);
        assert_eq!(parity(SiteCoord([1, 0, 0, 0])), Parity::Odd);
        assert_eq!(parity(SiteCoord([1, 1, 0, 0])), Parity::Even);
    }

    #[test]
    fn site_index_examples() {
        let dims = Dims([4, 4, 4, 4]);
        assert_eq!(site_index(SiteCoord([0, 0, 0, 0]), dims).unwrap(), 0);
        assert_eq!(site_index(SiteCoord([1, 0, 0, 0]), dims).unwrap(), 128);
        assert!(site_index(SiteCoord([4, 0, 0, 0]), dims).is_err());
        assert!(index_to_site(256, dims).is_err());
    }

    #[test]
    fn site_index_matches_enumeration() {
        // Enumerate all sites, then bucket by parity in lexicographic order.
        let dims = Dims([4, 4, 4, 4]);
        let mut even = Vec::new();
        let mut odd = Vec::new();
        for t in 0..4 {
            for z in 0..4 {
                for y in 0..4 {
                    for x in 0..4 {
                        let c = SiteCoord([x, y, z, t]);
                        if (x + y + z + t) % 2 == 0 {
                            even.push(c);
                        } else {
                            odd.push(c);
                        }
                    }
                }
            }
        }
        for (i, c) in even.iter().chain(odd.iter()).enumerate() {
            assert_eq!(site_index(*c, dims).unwrap(), i);
            assert_eq!(index_to_site(i, dims).unwrap(), *c);
            assert_eq!(parity(*c) == Parity::Even, i < 128);
        }
    }

    #[test]
    fn neighbor_wraps() {
        let local = Dims([8, 8, 8, 16]);
        let (n, owner) = neighbor(SiteCoord([0, 0, 0, 0]), 0, Sign::Backward, local);
        assert_eq!(n, SiteCoord([7, 0, 0, 0]));
        assert_eq!(owner, Owner::Adjacent);

        let (n, owner) = neighbor(SiteCoord([7, 3, 2, 1]), 0, Sign::Forward, local);
        assert_eq!(n, SiteCoord([0, 3, 2, 1]));
        assert_eq!(owner, Owner::Adjacent);

        let (n, owner) = neighbor(SiteCoord([3, 3, 2, 1]), 2, Sign::Forward, local);
        assert_eq!(n, SiteCoord([3, 3, 3, 1]));
        assert_eq!(owner, Owner::Local);
    }

    #[test]
    fn surface_examples() {
        let d = Dims([8, 8, 4, 6]);
        assert_eq!(d.volume(), 1536);
        assert_eq!(surface_count(d), 2048);
        assert!((surface_to_volume(d) - 4.0 / 3.0).abs() < 1e-15);

        let d = Dims([96, 12, 12, 12]);
        assert_eq!(d.volume(), 165_888);
        assert_eq!(surface_count(d), 86_400);
        assert!((surface_to_volume(d) - 0.520_833).abs() < 1e-5);

        let d = Dims([2, 2, 2, 2]);
        assert_eq!(surface_count(d), 64);
        assert_eq!(surface_to_volume(d), 4.0);
    }

    #[test]
    fn parse_and_display() {
        let d: Dims = "96x96x96x192".parse().unwrap();
        assert_eq!(d, Dims([96, 96, 96, 192]));
        assert_eq!(d.to_string(), "96x96x96x192");
        assert!("8x8x8".parse::<Dims>().is_err());
        assert!("8X8x8x8".parse::<Dims>().is_err());
        assert!("8x0x8x8".parse::<ProcessGrid>().is_err());
        assert!("8x8x7x8".parse::<GlobalLattice>().is_err());
    }
}
