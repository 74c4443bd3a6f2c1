//! Randomized property checks complementing the unit suites: energy bounds
//! and flip invariance, lattice footprint monotonicity, and window-size
//! independence of certified structure.

use percovor::geom::Point;
use percovor::geometry::{build_tessellation, sample_poisson, Tessellation, Window};
use percovor::polyomino::{lattice_footprint, random_union, CellUnion};
use percovor::spin::{scaled_energy, SpinConfig};
use proptest::prelude::*;

fn tess(seed: u64, half_width: f64) -> Tessellation {
    let w = Window::new(Point::new(0.0, 0.0), half_width, 6.0).unwrap();
    build_tessellation(&sample_poisson(1.0, w, seed).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_is_bounded_and_flip_invariant(seed in 0u64..1000, eps in 0.01f64..1.0) {
        let t = tess(seed, 6.0);
        let u = SpinConfig::random(&t, eps, seed ^ 0x9e37).unwrap();
        let e = scaled_energy(&t, &u, None).unwrap();
        prop_assert!(e.energy >= 0.0);
        prop_assert!(e.energy <= eps * t.edges.len() as f64);
        let flipped = scaled_energy(&t, &u.flipped(), None).unwrap();
        prop_assert_eq!(e.energy, flipped.energy);
        prop_assert_eq!(&e.boundary_edges, &flipped.boundary_edges);
    }

    #[test]
    fn single_flip_changes_energy_by_at_most_degree(seed in 0u64..1000) {
        let t = tess(seed, 6.0);
        let eps = 0.1;
        let u = SpinConfig::random(&t, eps, seed ^ 0x51ab).unwrap();
        let site = (seed % t.num_sites() as u64) as usize;
        let mut values = u.values.clone();
        values[site] = -values[site];
        let v = SpinConfig::new(values, eps).unwrap();
        let before = scaled_energy(&t, &u, None).unwrap().energy;
        let after = scaled_energy(&t, &v, None).unwrap().energy;
        let degree = t.site_adjacency[site].len() as f64;
        prop_assert!((before - after).abs() <= eps * degree + 1e-12);
    }

    #[test]
    fn footprint_of_union_is_union_of_footprints(seed in 0u64..500) {
        let t = tess(seed, 12.0);
        let union = random_union(&t, 30, seed ^ 0xf00d).unwrap();
        let whole = lattice_footprint(&t, &union, 1.0).unwrap();
        let mut merged: Vec<(i64, i64)> = Vec::new();
        for &site in &union.sites {
            let single = CellUnion::new(&t, vec![site]).unwrap();
            merged.extend(lattice_footprint(&t, &single, 1.0).unwrap().squares);
        }
        merged.sort_unstable();
        merged.dedup();
        prop_assert_eq!(merged, whole.squares);
    }
}
