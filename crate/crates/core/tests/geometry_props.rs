use lqcd_core::geometry::{
    decompose, index_to_site, neighbor, parity, site_index, surface_count, Dims, GlobalLattice, Owner, Parity, ProcessGrid,
    Sign, SiteCoord,
};
use lqcd_core::comm::build_topology;
use proptest::prelude::*;

fn even_extent() -> impl Strategy<Value = usize> {
    (1usize..=5).prop_map(|h| 2 * h)
}

fn dims() -> impl Strategy<Value = Dims> {
    [even_extent(), even_extent(), even_extent(), even_extent()].prop_map(Dims)
}

proptest! {
    #[test]
    fn site_index_is_parity_blocked_bijection(d in dims()) {
        let v = d.volume();
        let mut seen = vec![false; v];
        for c in d.coords() {
            let i = site_index(c, d).unwrap();
            prop_assert!(!seen[i]);
            seen[i] = true;
            prop_assert_eq!(index_to_site(i, d).unwrap(), c);
            prop_assert_eq!(parity(c) == Parity::Even, i < v / 2);
        }
    }

    #[test]
    fn neighbor_steps_invert(d in dims(), seed in any::<u64>()) {
        let c = d.from_lexicographic(seed as usize % d.volume());
        for mu in 0..4 {
            for sign in Sign::BOTH {
                let (n, owner) = neighbor(c, mu, sign, d);
                let (back, back_owner) = neighbor(n, mu, sign.flip(), d);
                prop_assert_eq!(back, c);
                prop_assert_eq!(owner, back_owner);
                prop_assert_ne!(parity(n), parity(c));
            }
        }
    }

    #[test]
    fn surface_count_matches_brute_force(d in dims()) {
        let brute: usize = d
            .coords()
            .map(|c| {
                (0..4)
                    .flat_map(|mu| Sign::BOTH.map(|s| (mu, s)))
                    .filter(|&(mu, s)| neighbor(c, mu, s, d).1 == Owner::Adjacent)
                    .count()
            })
            .sum();
        prop_assert_eq!(surface_count(d), brute);
    }
}

#[test]
fn neighbor_is_involution_on_global_torus() {
    let global = GlobalLattice::new([4, 6, 2, 8]).unwrap();
    let decomp = decompose(global, ProcessGrid::new([2, 3, 1, 2]).unwrap()).unwrap();
    let g = global.dims();
    for gc in g.coords() {
        let (rank, local) = decomp.owner_of(gc);
        for mu in 0..4 {
            let (n, owner) = neighbor(local, mu, Sign::Forward, decomp.local);
            // Translate the local step back to global coordinates.
            let mut expect = gc;
            expect.0[mu] = (gc.0[mu] + 1) % g.0[mu];
            let (erank, elocal) = decomp.owner_of(expect);
            assert_eq!(n, elocal);
            let expected_owner = match owner {
                Owner::Local => rank,
                Owner::Adjacent => build_topology(decomp.grid, rank).unwrap().neighbor(mu, Sign::Forward),
            };
            assert_eq!(erank, expected_owner);
            let (back, _) = neighbor(n, mu, Sign::Backward, decomp.local);
            assert_eq!(back, local);
        }
    }
}

#[test]
fn reference_decompositions_conserve_volume() {
    let cases: [([usize; 4], [usize; 4], usize); 9] = [
        ([96, 96, 96, 192], [96, 12, 12, 12], 1024),
        ([96, 96, 96, 192], [48, 12, 12, 12], 2048),
        ([96, 96, 96, 192], [24, 24, 12, 6], 4096),
        ([96, 96, 96, 192], [24, 12, 12, 6], 8192),
        ([96, 96, 96, 192], [12, 6, 12, 12], 16384),
        ([64, 64, 64, 96], [16, 16, 8, 12], 1024),
        ([64, 64, 64, 96], [16, 16, 8, 6], 2048),
        ([64, 64, 64, 96], [16, 8, 4, 6], 8192),
        ([64, 64, 64, 96], [8, 8, 4, 6], 16384),
    ];
    for (global, local, ranks) in cases {
        let grid: [usize; 4] = std::array::from_fn(|mu| global[mu] / local[mu]);
        let gl = GlobalLattice::new(global).unwrap();
        let d = decompose(gl, ProcessGrid::new(grid).unwrap()).unwrap();
        assert_eq!(d.local, Dims(local));
        assert_eq!(d.ranks(), ranks);
        assert_eq!(d.local.volume() * d.ranks(), gl.volume());
    }
}

#[test]
fn site_coord_round_trip_through_lexicographic() {
    let d = Dims([4, 2, 6, 2]);
    for i in 0..d.volume() {
        assert_eq!(d.lexicographic(d.from_lexicographic(i)), i);
    }
    assert_eq!(d.from_lexicographic(5), SiteCoord([1, 1, 0, 0]));
}
