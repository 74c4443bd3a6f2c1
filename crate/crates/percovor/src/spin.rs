//! Spin configurations on the sites, the scaled interface energy, the region
//! covered by +1 cells, and the two convergence metrics (symmetric-difference
//! area and empirical-measure discrepancy).
//!
//! A configuration at scale `epsilon` lives on the unscaled tessellation; all
//! reported areas and energies are in the scaled frame, where site `i` sits
//! at `epsilon * x_i` and its cell is `epsilon * C_i`.

use crate::error::{Error, Result};
use crate::geom::{
    clip_to_rect, convex_intersection_area, is_simple_polygon, polygon_area, polygon_bbox,
    triangulate, Point, Rect,
};
use crate::geometry::Tessellation;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

/// Spin values for every site, together with the scaling parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinConfig {
    /// One entry per site: +1 or -1 (0 marks a missing value).
    pub values: Vec<i8>,
    pub epsilon: f64,
}

impl SpinConfig {
    pub fn new(values: Vec<i8>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(SpinConfig { values, epsilon })
    }

    pub fn uniform(n: usize, spin: i8, epsilon: f64) -> Result<Self> {
        Self::new(vec![spin; n], epsilon)
    }

    pub fn from_fn(tess: &Tessellation, epsilon: f64, f: impl Fn(Point) -> i8) -> Result<Self> {
        Self::new(tess.points.sites.iter().map(|&p| f(p)).collect(), epsilon)
    }

    /// Independent fair coin flips per site, deterministic per seed.
    pub fn random(tess: &Tessellation, epsilon: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let values = (0..tess.num_sites())
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Self::new(values, epsilon)
    }

    /// Checks that every site of the tessellation carries a +-1 value.
    pub fn validate(&self, tess: &Tessellation) -> Result<()> {
        if self.values.len() < tess.num_sites() {
            return Err(Error::IncompleteConfiguration(self.values.len()));
        }
        for (i, &v) in self.values.iter().enumerate().take(tess.num_sites()) {
            if v != 1 && v != -1 {
                return Err(Error::IncompleteConfiguration(i));
            }
        }
        Ok(())
    }

    pub fn spin(&self, site: u32) -> i8 {
        self.values[site as usize]
    }

    /// Flipped configuration -u.
    pub fn flipped(&self) -> SpinConfig {
        SpinConfig {
            values: self.values.iter().map(|v| -v).collect(),
            epsilon: self.epsilon,
        }
    }
}

/// Outcome of the energy computation. The energy is exactly
/// `epsilon * boundary_edges.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyResult {
    pub epsilon: f64,
    pub energy: f64,
    /// Edge ids (shared Delaunay/dual index) of the discordant pairs.
    pub boundary_edges: Vec<u32>,
    /// Energy restricted to the query rectangle, when one was given: counts
    /// discordant edges with at least one endpoint inside.
    pub per_region: Option<RegionEnergy>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionEnergy {
    pub region: Rect,
    pub edge_count: usize,
    pub energy: f64,
}

/// The scaled ferromagnetic energy: epsilon times the number of unordered
/// Delaunay edges with opposite spins. The quadratic, absolute-value and
/// counting forms of the energy are evaluated on exact integer counts and
/// cross-checked before the single float multiplication.
pub fn scaled_energy(
    tess: &Tessellation,
    u: &SpinConfig,
    region: Option<Rect>,
) -> Result<EnergyResult> {
    u.validate(tess)?;
    let eps = u.epsilon;
    let mut boundary_edges = Vec::new();
    let mut region_count = 0usize;
    let mut quad_sum = 0u64; // sum of (u_i - u_j)^2 over ordered pairs
    let mut half_count = 0u64; // ordered discordant pairs
    for (eid, edge) in tess.edges.iter().enumerate() {
        let (i, j) = edge.sites;
        let (si, sj) = (u.spin(i), u.spin(j));
        let d = (si - sj) as i64;
        quad_sum += 2 * (d * d) as u64;
        if si != sj {
            half_count += 2;
            boundary_edges.push(eid as u32);
            if let Some(r) = region {
                let pi = tess.points.sites[i as usize].scale(eps);
                let pj = tess.points.sites[j as usize].scale(eps);
                if r.contains(pi) || r.contains(pj) {
                    region_count += 1;
                }
            }
        }
    }
    let count = boundary_edges.len() as u64;
    debug_assert_eq!(quad_sum, 8 * count);
    debug_assert_eq!(half_count, 2 * count);
    Ok(EnergyResult {
        epsilon: eps,
        energy: eps * count as f64,
        boundary_edges,
        per_region: region.map(|r| RegionEnergy {
            region: r,
            edge_count: region_count,
            energy: eps * region_count as f64,
        }),
    })
}

/// The scaled Voronoi set of a configuration: the union of the +1 cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    pub epsilon: f64,
    pub plus_sites: Vec<u32>,
    /// Scaled area: epsilon^2 times the summed (possibly clipped) cell areas.
    pub area: f64,
    /// Interior boundary: discordant edges with a bounded dual.
    pub boundary_edges: Vec<u32>,
    /// True when some member cell was clipped at the sampled-region boundary.
    pub any_clipped: bool,
}

pub fn voronoi_set(tess: &Tessellation, u: &SpinConfig) -> Result<RegionSet> {
    u.validate(tess)?;
    let eps = u.epsilon;
    let mut plus_sites = Vec::new();
    let mut area = 0.0;
    let mut any_clipped = false;
    for cell in &tess.cells {
        if u.spin(cell.site) == 1 {
            plus_sites.push(cell.site);
            area += polygon_area(&cell.polygon);
            any_clipped |= cell.clipped;
        }
    }
    let energy = scaled_energy(tess, u, None)?;
    let boundary_edges = energy
        .boundary_edges
        .into_iter()
        .filter(|&eid| tess.dual_edge_length(eid).is_some())
        .collect();
    Ok(RegionSet {
        epsilon: eps,
        plus_sites,
        area: area * eps * eps,
        boundary_edges,
        any_clipped,
    })
}

/// Scaled polygons of the +1 cells of a region.
pub fn scaled_region_polygons<'a>(
    tess: &'a Tessellation,
    region: &'a RegionSet,
) -> impl Iterator<Item = Vec<Point>> + 'a {
    let eps = region.epsilon;
    region.plus_sites.iter().map(move |&site| {
        tess.cells[site as usize]
            .polygon
            .iter()
            .map(|p| p.scale(eps))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmDiffResult {
    pub area: f64,
    /// How the area was computed; always exact polygon clipping here.
    pub method: &'static str,
}

fn validate_target(target: &[Vec<Point>]) -> Result<()> {
    for poly in target {
        if !is_simple_polygon(poly) {
            return Err(Error::InvalidPolygon(
                "target polygon is self-intersecting or degenerate".into(),
            ));
        }
    }
    Ok(())
}

/// Triangulates the target polygons and clips the triangles to `core`.
fn target_triangles(target: &[Vec<Point>], core: &Rect) -> Vec<Vec<Point>> {
    let mut tris = Vec::new();
    for poly in target {
        for tri in triangulate(poly) {
            let clipped = clip_to_rect(&tri, core);
            if clipped.len() >= 3 {
                tris.push(clipped);
            }
        }
    }
    tris
}

/// Area of `(V (symm diff) A) ∩ core`, by exact polygon clipping:
/// |V∩core| + |A∩core| - 2 |V∩A∩core|. The target must be a union of
/// disjoint simple polygons.
pub fn symmetric_difference_area(
    tess: &Tessellation,
    region: &RegionSet,
    target: &[Vec<Point>],
    core: Rect,
) -> Result<SymmDiffResult> {
    validate_target(target)?;
    let tris = target_triangles(target, &core);
    let target_area: f64 = tris.iter().map(|t| polygon_area(t)).sum();
    let tri_boxes: Vec<Rect> = tris.iter().map(|t| polygon_bbox(t)).collect();

    let mut region_area = 0.0;
    let mut overlap = 0.0;
    for poly in scaled_region_polygons(tess, region) {
        let clipped = clip_to_rect(&poly, &core);
        if clipped.len() < 3 {
            continue;
        }
        region_area += polygon_area(&clipped);
        let bbox = polygon_bbox(&clipped);
        for (tri, tb) in tris.iter().zip(&tri_boxes) {
            if bbox.intersects(tb) {
                overlap += convex_intersection_area(&clipped, tri);
            }
        }
    }
    Ok(SymmDiffResult {
        area: (region_area + target_area - 2.0 * overlap).max(0.0),
        method: "exact-polygon-clipping",
    })
}

/// Maximum over grid squares of side `rho` tiling `core` of the discrepancy
/// between the empirical measure of the +1 sites and the target area.
pub fn empirical_measure_distance(
    tess: &Tessellation,
    u: &SpinConfig,
    target: &[Vec<Point>],
    rho: f64,
    core: Rect,
) -> Result<f64> {
    u.validate(tess)?;
    if rho <= u.epsilon {
        return Err(Error::ResolutionTooFine { rho, epsilon: u.epsilon });
    }
    validate_target(target)?;
    let tris = target_triangles(target, &core);
    let tri_boxes: Vec<Rect> = tris.iter().map(|t| polygon_bbox(t)).collect();
    let eps = u.epsilon;
    let nx = (core.width() / rho).ceil() as usize;
    let ny = (core.height() / rho).ceil() as usize;
    let mut atoms = vec![0u64; nx * ny];
    for (i, &p) in tess.points.sites.iter().enumerate() {
        if u.spin(i as u32) != 1 {
            continue;
        }
        let sp = p.scale(eps);
        if !core.contains(sp) {
            continue;
        }
        let gx = (((sp.x - core.min.x) / rho) as usize).min(nx - 1);
        let gy = (((sp.y - core.min.y) / rho) as usize).min(ny - 1);
        atoms[gy * nx + gx] += 1;
    }
    let mut worst = 0.0f64;
    for gy in 0..ny {
        for gx in 0..nx {
            let square = Rect::new(
                Point::new(core.min.x + gx as f64 * rho, core.min.y + gy as f64 * rho),
                Point::new(
                    (core.min.x + (gx + 1) as f64 * rho).min(core.max.x),
                    (core.min.y + (gy + 1) as f64 * rho).min(core.max.y),
                ),
            );
            let mu = eps * eps * atoms[gy * nx + gx] as f64;
            let sq_poly = square.corners().to_vec();
            let mut target_area = 0.0;
            for (tri, tb) in tris.iter().zip(&tri_boxes) {
                if square.intersects(tb) {
                    target_area += convex_intersection_area(&sq_poly, tri);
                }
            }
            worst = worst.max((mu - target_area).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_tessellation, sample_poisson, PointSet, Window};
    use approx::assert_relative_eq;

    fn small_tess(seed: u64) -> Tessellation {
        let w = Window::new(Point::new(0.0, 0.0), 8.0, 3.0).unwrap();
        build_tessellation(&sample_poisson(1.0, w, seed).unwrap()).unwrap()
    }

    #[test]
    fn constant_configuration_has_zero_energy() {
        let tess = small_tess(1);
        let u = SpinConfig::uniform(tess.num_sites(), 1, 0.5).unwrap();
        let e = scaled_energy(&tess, &u, None).unwrap();
        assert_eq!(e.energy, 0.0);
        assert!(e.boundary_edges.is_empty());
    }

    #[test]
    fn triangle_with_one_plus_site() {
        let pts = PointSet {
            sites: vec![
                Point::new(0.0, 0.0),
                Point::new(4.0, 0.0),
                Point::new(2.0, 3.0),
            ],
            intensity: 1.0,
            window: Window::new(Point::new(2.0, 1.0), 10.0, 0.0).unwrap(),
            seed: 0,
        };
        let tess = build_tessellation(&pts).unwrap();
        let u = SpinConfig::new(vec![1, -1, -1], 0.25).unwrap();
        let e = scaled_energy(&tess, &u, None).unwrap();
        assert_eq!(e.boundary_edges.len(), 2);
        assert_relative_eq!(e.energy, 2.0 * 0.25);
    }

    #[test]
    fn missing_spin_is_an_error() {
        let tess = small_tess(2);
        let mut values = vec![1i8; tess.num_sites()];
        values[3] = 0;
        let u = SpinConfig::new(values, 1.0).unwrap();
        assert!(matches!(
            scaled_energy(&tess, &u, None),
            Err(Error::IncompleteConfiguration(3))
        ));
        let short = SpinConfig::new(vec![1, -1], 1.0).unwrap();
        assert!(scaled_energy(&tess, &short, None).is_err());
    }

    #[test]
    fn flip_symmetry_is_exact() {
        let tess = small_tess(3);
        let u = SpinConfig::random(&tess, 0.1, 77).unwrap();
        let a = scaled_energy(&tess, &u, None).unwrap();
        let b = scaled_energy(&tess, &u.flipped(), None).unwrap();
        assert_eq!(a.energy, b.energy);
        assert_eq!(a.boundary_edges, b.boundary_edges);
    }

    #[test]
    fn empty_and_single_cell_regions() {
        let tess = small_tess(4);
        let all_minus = SpinConfig::uniform(tess.num_sites(), -1, 0.5).unwrap();
        let r = voronoi_set(&tess, &all_minus).unwrap();
        assert_eq!(r.area, 0.0);
        assert!(r.plus_sites.is_empty());

        // single interior +1 site: area = eps^2 |C_i|
        let site = tess
            .cells
            .iter()
            .find(|c| !c.clipped)
            .map(|c| c.site)
            .unwrap();
        let mut values = vec![-1i8; tess.num_sites()];
        values[site as usize] = 1;
        let eps = 0.5;
        let u = SpinConfig::new(values, eps).unwrap();
        let r = voronoi_set(&tess, &u).unwrap();
        assert_relative_eq!(
            r.area,
            eps * eps * polygon_area(&tess.cells[site as usize].polygon),
            epsilon = 1e-12
        );
    }

    #[test]
    fn symmetric_difference_trivial_cases() {
        let tess = small_tess(5);
        let eps = 1.0;
        let core = Rect::centered(Point::new(0.0, 0.0), 4.0);
        // empty region vs core-sized target: area of the target
        let all_minus = SpinConfig::uniform(tess.num_sites(), -1, eps).unwrap();
        let r = voronoi_set(&tess, &all_minus).unwrap();
        let target = vec![core.corners().to_vec()];
        let d = symmetric_difference_area(&tess, &r, &target, core).unwrap();
        assert_relative_eq!(d.area, core.area(), epsilon = 1e-9);
        // empty region vs empty target: zero
        let d0 = symmetric_difference_area(&tess, &r, &[], core).unwrap();
        assert_eq!(d0.area, 0.0);
    }

    #[test]
    fn symmetric_difference_rejects_bowtie() {
        let tess = small_tess(6);
        let u = SpinConfig::uniform(tess.num_sites(), -1, 1.0).unwrap();
        let r = voronoi_set(&tess, &u).unwrap();
        let bowtie = vec![vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ]];
        let core = Rect::centered(Point::new(0.0, 0.0), 4.0);
        assert!(matches!(
            symmetric_difference_area(&tess, &r, &bowtie, core),
            Err(Error::InvalidPolygon(_))
        ));
    }

    #[test]
    fn empirical_measure_edge_cases() {
        let tess = small_tess(7);
        let core = Rect::centered(Point::new(0.0, 0.0), 4.0);
        let eps = 0.5;
        let all_minus = SpinConfig::uniform(tess.num_sites(), -1, eps).unwrap();
        assert_eq!(
            empirical_measure_distance(&tess, &all_minus, &[], 2.0, core).unwrap(),
            0.0
        );
        // resolution must exceed epsilon
        assert!(matches!(
            empirical_measure_distance(&tess, &all_minus, &[], 0.25, core),
            Err(Error::ResolutionTooFine { .. })
        ));
        // one +1 atom inside the core, empty target: eps^2 in its square
        let site = tess
            .points
            .sites
            .iter()
            .position(|p| core.contains(p.scale(eps)))
            .unwrap();
        let mut values = vec![-1i8; tess.num_sites()];
        values[site] = 1;
        let u = SpinConfig::new(values, eps).unwrap();
        let d = empirical_measure_distance(&tess, &u, &[], 2.0, core).unwrap();
        assert_relative_eq!(d, eps * eps);
    }
}
