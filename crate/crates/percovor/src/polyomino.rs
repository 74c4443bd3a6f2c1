//! Connected unions of Voronoi cells compared against their lattice-square
//! footprint, and the decomposition of a configuration's interface into
//! closed contours with small islands and holes removed.

use crate::error::{Error, Result};
use crate::geom::{
    clip_segment_to_rect, convex_polygons_intersect, point_in_polygon, polygon_area,
    polygon_bbox, Point, Rect,
};
use crate::geometry::{DualEdge, Tessellation};
use crate::spin::SpinConfig;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use std::collections::{HashMap, HashSet, VecDeque};

/// A finite connected union of cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellUnion {
    /// Sorted site ids.
    pub sites: Vec<u32>,
    pub connected: bool,
}

impl CellUnion {
    /// Validates connectivity under Delaunay adjacency.
    pub fn new(tess: &Tessellation, mut sites: Vec<u32>) -> Result<Self> {
        sites.sort_unstable();
        sites.dedup();
        if sites.is_empty() {
            return Err(Error::InvalidArgument("empty cell union".into()));
        }
        let member: HashSet<u32> = sites.iter().copied().collect();
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([sites[0]]);
        seen.insert(sites[0]);
        while let Some(s) = queue.pop_front() {
            for &(j, _) in &tess.site_adjacency[s as usize] {
                if member.contains(&j) && seen.insert(j) {
                    queue.push_back(j);
                }
            }
        }
        if seen.len() != sites.len() {
            return Err(Error::DisconnectedUnion);
        }
        Ok(CellUnion {
            sites,
            connected: true,
        })
    }
}

/// Grows a random connected union of `size` certified cells from a random
/// interior start, deterministic per seed.
pub fn random_union(tess: &Tessellation, size: usize, seed: u64) -> Result<CellUnion> {
    grow_union(tess, size, seed, false)
}

/// Greedy eastward growth: always extends at the frontier cell with the
/// largest x, producing deliberately elongated unions.
pub fn adversarial_union(tess: &Tessellation, size: usize, seed: u64) -> Result<CellUnion> {
    grow_union(tess, size, seed, true)
}

fn grow_union(tess: &Tessellation, size: usize, seed: u64, eastward: bool) -> Result<CellUnion> {
    if size == 0 {
        return Err(Error::InvalidArgument("union size must be positive".into()));
    }
    let certified: Vec<u32> = tess
        .cells
        .iter()
        .filter(|c| c.certified)
        .map(|c| c.site)
        .collect();
    if certified.len() < size {
        return Err(Error::InvalidArgument(format!(
            "only {} certified cells for a union of {size}",
            certified.len()
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // start near the window center so large unions have room to grow
    let center = tess.points.window.center;
    let start = *certified
        .iter()
        .min_by(|&&a, &&b| {
            let da = tess.points.sites[a as usize].dist(center);
            let db = tess.points.sites[b as usize].dist(center);
            da.total_cmp(&db)
        })
        .unwrap();
    let mut chosen: HashSet<u32> = HashSet::from([start]);
    let mut frontier: Vec<u32> = vec![start];
    let eligible: HashSet<u32> = certified.iter().copied().collect();
    while chosen.len() < size {
        if frontier.is_empty() {
            return Err(Error::InvalidArgument(
                "ran out of certified cells while growing the union".into(),
            ));
        }
        let idx = if eastward {
            let mut best = 0;
            for (i, &s) in frontier.iter().enumerate() {
                if tess.points.sites[s as usize].x > tess.points.sites[frontier[best] as usize].x {
                    best = i;
                }
            }
            best
        } else {
            rng.random_range(0..frontier.len())
        };
        let s = frontier[idx];
        let mut added = false;
        let mut neighbors: Vec<u32> = tess.site_adjacency[s as usize]
            .iter()
            .map(|&(j, _)| j)
            .filter(|j| eligible.contains(j) && !chosen.contains(j))
            .collect();
        neighbors.sort_unstable();
        if let Some(&next) = if eastward {
            neighbors.iter().max_by(|&&a, &&b| {
                tess.points.sites[a as usize]
                    .x
                    .total_cmp(&tess.points.sites[b as usize].x)
            })
        } else if neighbors.is_empty() {
            None
        } else {
            Some(&neighbors[rng.random_range(0..neighbors.len())])
        } {
            chosen.insert(next);
            frontier.push(next);
            added = true;
        }
        if !added {
            frontier.swap_remove(idx);
        }
    }
    let sites: Vec<u32> = chosen.into_iter().collect();
    CellUnion::new(tess, sites)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFootprint {
    pub unit: f64,
    /// Sorted lattice coordinates z whose square z + Q meets the union.
    pub squares: Vec<(i64, i64)>,
    pub count: usize,
}

/// The square of side `unit` centered at `unit * z`.
fn lattice_square(z: (i64, i64), unit: f64) -> [Point; 4] {
    let cx = z.0 as f64 * unit;
    let cy = z.1 as f64 * unit;
    let h = 0.5 * unit;
    [
        Point::new(cx - h, cy - h),
        Point::new(cx + h, cy - h),
        Point::new(cx + h, cy + h),
        Point::new(cx - h, cy + h),
    ]
}

/// Exact set of lattice squares meeting the union: per member cell, the
/// candidate squares from its bounding box are tested by convex separation.
pub fn lattice_footprint(
    tess: &Tessellation,
    cells: &CellUnion,
    unit: f64,
) -> Result<LatticeFootprint> {
    if !(unit > 0.0) {
        return Err(Error::InvalidArgument("unit must be positive".into()));
    }
    if !cells.connected {
        return Err(Error::DisconnectedUnion);
    }
    let mut squares: HashSet<(i64, i64)> = HashSet::new();
    for &s in &cells.sites {
        let poly = &tess.cells[s as usize].polygon;
        if poly.len() < 3 {
            return Err(Error::UnboundedCell);
        }
        let bbox = polygon_bbox(poly);
        let zx_min = (bbox.min.x / unit - 0.5).floor() as i64;
        let zx_max = (bbox.max.x / unit + 0.5).ceil() as i64;
        let zy_min = (bbox.min.y / unit - 0.5).floor() as i64;
        let zy_max = (bbox.max.y / unit + 0.5).ceil() as i64;
        for zx in zx_min..=zx_max {
            for zy in zy_min..=zy_max {
                if squares.contains(&(zx, zy)) {
                    continue;
                }
                if convex_polygons_intersect(poly, &lattice_square((zx, zy), unit)) {
                    squares.insert((zx, zy));
                }
            }
        }
    }
    let mut squares: Vec<(i64, i64)> = squares.into_iter().collect();
    squares.sort_unstable();
    Ok(LatticeFootprint {
        unit,
        count: squares.len(),
        squares,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSample {
    pub size: usize,
    pub n_cells: usize,
    pub footprint: usize,
    /// footprint / cells and cells / footprint.
    pub ratio_over: f64,
    pub ratio_under: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioStats {
    pub unit: f64,
    pub samples: Vec<RatioSample>,
    /// size -> max of both ratios over that size's samples.
    pub max_ratio_per_size: Vec<(usize, f64)>,
}

/// Footprint-to-cell-count ratios over random connected unions of the given
/// sizes.
pub fn polyomino_ratio_stats(
    tess: &Tessellation,
    sizes: &[usize],
    per_size: usize,
    unit: f64,
    seed: u64,
    adversarial: bool,
) -> Result<RatioStats> {
    if sizes.iter().any(|&s| s < 10) {
        return Err(Error::InvalidArgument("union sizes must be >= 10".into()));
    }
    let mut samples = Vec::new();
    let mut max_ratio_per_size = Vec::new();
    for (si, &size) in sizes.iter().enumerate() {
        let mut worst = 0.0f64;
        for rep in 0..per_size {
            let sub_seed = crate::util::mix_seed(&[seed, si as u64, rep as u64]);
            let union = if adversarial {
                adversarial_union(tess, size, sub_seed)?
            } else {
                random_union(tess, size, sub_seed)?
            };
            let fp = lattice_footprint(tess, &union, unit)?;
            let n_cells = union.sites.len();
            let ratio_over = fp.count as f64 / n_cells as f64;
            let ratio_under = n_cells as f64 / fp.count as f64;
            worst = worst.max(ratio_over).max(ratio_under);
            samples.push(RatioSample {
                size,
                n_cells,
                footprint: fp.count,
                ratio_over,
                ratio_under,
            });
        }
        max_ratio_per_size.push((size, worst));
    }
    Ok(RatioStats {
        unit,
        samples,
        max_ratio_per_size,
    })
}

/// A connected component of the interface.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    /// Voronoi vertex cycle, in traversal order (first vertex not repeated).
    pub vertices: Vec<u32>,
    /// Delaunay/dual edge ids of the component.
    pub edge_ids: Vec<u32>,
    /// Number of incident cells carrying spin +1.
    pub incident_plus: usize,
    /// Meets the large-contour threshold.
    pub plus_class: bool,
    /// Among the small contours: not nested inside another small contour.
    pub maximal: bool,
    /// 1: encloses a +1 island (fills B'), 2: encloses a -1 hole (fills B'').
    pub orientation_class: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub gamma: f64,
    pub epsilon: f64,
    /// Contours with at least this many incident +1 cells are kept.
    pub threshold: f64,
    pub contours_plus: Vec<Contour>,
    pub contours_minus: Vec<Contour>,
    /// Non-closed boundary chains (window artifacts), excluded from the
    /// classification.
    pub open_chains: usize,
    /// Sorted +1 cells removed as small islands.
    pub b_prime: Vec<u32>,
    /// Sorted -1 cells filled in as small holes.
    pub b_dprime: Vec<u32>,
    /// Sorted sites of the cleaned region (plus sites minus B' plus B'').
    pub a_eps_sites: Vec<u32>,
    /// Scaled area of the cleaned region.
    pub area: f64,
    /// Scaled boundary length of the cleaned region (bounded duals only).
    pub perimeter: f64,
    /// Unscaled unit lattice squares touched by the cleaned boundary; a
    /// coarse surrogate for the lattice-animal covering of the interface.
    pub boundary_square_diagnostic: usize,
}

/// Splits the interface into closed contours, discards those with fewer than
/// `eps^-gamma` incident +1 cells (removing islands into B', filling holes
/// from B''), and returns the cleaned region.
pub fn contour_decompose(
    tess: &Tessellation,
    u: &SpinConfig,
    gamma: f64,
) -> Result<Decomposition> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "gamma must lie in (0, 1/2), got {gamma}"
        )));
    }
    u.validate(tess)?;
    let eps = u.epsilon;
    let threshold = eps.powf(-gamma);

    // discordant edges and their bounded duals
    let mut incident: HashMap<u32, Vec<(u32, u32)>> = HashMap::new(); // vertex -> (other, eid)
    let mut open_vertex: HashSet<u32> = HashSet::new();
    let mut discordant = Vec::new();
    for (eid, edge) in tess.edges.iter().enumerate() {
        let (i, j) = edge.sites;
        if u.spin(i) == u.spin(j) {
            continue;
        }
        discordant.push(eid as u32);
        match edge.dual {
            DualEdge::Bounded { v0, v1 } => {
                incident.entry(v0).or_default().push((v1, eid as u32));
                incident.entry(v1).or_default().push((v0, eid as u32));
            }
            DualEdge::Unbounded { v, .. } => {
                // the contour continues past the window: its component is open
                open_vertex.insert(v);
            }
        }
    }
    for edges in incident.values() {
        if edges.len() > 2 {
            return Err(Error::InvalidArgument(
                "interface vertex of degree > 2; tessellation not in general position".into(),
            ));
        }
    }

    // trace components edge by edge, starting from the lowest edge id of
    // each so the output is independent of hashing
    let mut visited: HashSet<u32> = HashSet::new();
    let mut contours = Vec::new();
    let mut open_chains = 0usize;
    for &eid0 in &discordant {
        if visited.contains(&eid0) {
            continue;
        }
        let (v_start, first) = match tess.edges[eid0 as usize].dual {
            DualEdge::Bounded { v0, v1 } => (v0, v1),
            DualEdge::Unbounded { .. } => continue,
        };
        visited.insert(eid0);
        let mut vertices = vec![v_start];
        let mut edge_ids = vec![eid0];
        let mut closed = false;
        let mut cur = first;
        while cur != v_start {
            vertices.push(cur);
            let next = incident[&cur]
                .iter()
                .find(|&&(_, e)| !visited.contains(&e))
                .copied();
            match next {
                Some((w, e)) => {
                    visited.insert(e);
                    edge_ids.push(e);
                    cur = w;
                }
                None => break,
            }
        }
        closed |= cur == v_start;
        if !closed {
            // pick up the rest of an open chain on the other side of eid0
            let mut back_v = Vec::new();
            let mut cur = v_start;
            loop {
                let next = incident[&cur]
                    .iter()
                    .find(|&&(_, e)| !visited.contains(&e))
                    .copied();
                match next {
                    Some((w, e)) => {
                        visited.insert(e);
                        edge_ids.push(e);
                        back_v.push(w);
                        cur = w;
                    }
                    None => break,
                }
            }
        }
        if closed {
            contours.push((vertices, edge_ids));
        } else {
            open_chains += 1;
        }
    }

    // classify by incident +1 cell count
    let mut classified: Vec<Contour> = contours
        .into_iter()
        .map(|(vertices, edge_ids)| {
            let mut cells: HashSet<u32> = HashSet::new();
            for &v in &vertices {
                cells.extend(tess.vertices[v as usize].sites);
            }
            let incident_plus = cells.iter().filter(|&&c| u.spin(c) == 1).count();
            let plus_class = incident_plus as f64 >= threshold;
            Contour {
                vertices,
                edge_ids,
                incident_plus,
                plus_class,
                maximal: false,
                orientation_class: None,
            }
        })
        .collect();
    classified.sort_by(|a, b| a.edge_ids.cmp(&b.edge_ids));

    // maximality among the minus contours, by cycle nesting
    let minus_polys: Vec<(usize, Vec<Point>, Rect)> = classified
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.plus_class)
        .map(|(i, c)| {
            let poly: Vec<Point> = c
                .vertices
                .iter()
                .map(|&v| tess.vertices[v as usize].pos)
                .collect();
            let bbox = polygon_bbox(&poly);
            (i, poly, bbox)
        })
        .collect();
    let mut maximal_ids = Vec::new();
    for &(i, ref poly, ref bbox) in &minus_polys {
        let probe = poly[0];
        let nested = minus_polys.iter().any(|&(j, ref other, ref obox)| {
            j != i
                && obox.contains(bbox.min)
                && obox.contains(bbox.max)
                && point_in_polygon(probe, other)
        });
        classified[i].maximal = !nested;
        if !nested {
            maximal_ids.push(i);
        }
    }

    // orient each maximal minus contour and collect its interior cells
    let mut b_prime: HashSet<u32> = HashSet::new();
    let mut b_dprime: HashSet<u32> = HashSet::new();
    for &ci in &maximal_ids {
        let poly: Vec<Point> = classified[ci]
            .vertices
            .iter()
            .map(|&v| tess.vertices[v as usize].pos)
            .collect();
        let blocked: HashSet<u32> = classified[ci].edge_ids.iter().copied().collect();
        let eid0 = classified[ci].edge_ids[0];
        let (s0, s1) = tess.edges[eid0 as usize].sites;
        let inside_site = if point_in_polygon(tess.points.sites[s0 as usize], &poly) {
            s0
        } else {
            s1
        };
        let class = if u.spin(inside_site) == 1 { 1u8 } else { 2u8 };
        classified[ci].orientation_class = Some(class);
        // flood over cells from the inside, never crossing the contour
        let mut interior = HashSet::from([inside_site]);
        let mut queue = VecDeque::from([inside_site]);
        while let Some(s) = queue.pop_front() {
            for &(j, eid) in &tess.site_adjacency[s as usize] {
                if !blocked.contains(&eid) && interior.insert(j) {
                    queue.push_back(j);
                }
            }
        }
        for &s in &interior {
            if u.spin(s) == 1 {
                if class == 1 {
                    b_prime.insert(s);
                }
            } else if class == 2 {
                b_dprime.insert(s);
            }
        }
    }

    // the cleaned region
    let mut in_a = vec![false; tess.num_sites()];
    for (s, val) in u.values.iter().enumerate().take(tess.num_sites()) {
        in_a[s] = *val == 1;
    }
    for &s in &b_prime {
        in_a[s as usize] = false;
    }
    for &s in &b_dprime {
        in_a[s as usize] = true;
    }
    let a_eps_sites: Vec<u32> = (0..tess.num_sites() as u32)
        .filter(|&s| in_a[s as usize])
        .collect();
    let area = eps
        * eps
        * a_eps_sites
            .iter()
            .map(|&s| polygon_area(&tess.cells[s as usize].polygon))
            .sum::<f64>();
    // duals of near-degenerate buffer triangles can run far outside the
    // window; only the part inside the sampled region separates actual cells
    let sampled = tess.points.window.sampled();
    let mut perimeter = 0.0;
    let mut boundary_squares: HashSet<(i64, i64)> = HashSet::new();
    for &eid in &discordant {
        let (i, j) = tess.edges[eid as usize].sites;
        if in_a[i as usize] == in_a[j as usize] {
            continue;
        }
        if let DualEdge::Bounded { v0, v1 } = tess.edges[eid as usize].dual {
            let (a, b) = (
                tess.vertices[v0 as usize].pos,
                tess.vertices[v1 as usize].pos,
            );
            if let Some((ca, cb)) = clip_segment_to_rect(a, b, sampled) {
                perimeter += ca.dist(cb);
                let mid = (ca + cb).scale(0.5);
                boundary_squares.insert((mid.x.round() as i64, mid.y.round() as i64));
            }
        }
    }
    // boundary edges of the cleaned region that were not discordant cannot
    // exist: flipping whole islands/holes only removes interface edges
    let mut b_prime: Vec<u32> = b_prime.into_iter().collect();
    let mut b_dprime: Vec<u32> = b_dprime.into_iter().collect();
    b_prime.sort_unstable();
    b_dprime.sort_unstable();
    let (contours_plus, contours_minus): (Vec<Contour>, Vec<Contour>) =
        classified.into_iter().partition(|c| c.plus_class);
    Ok(Decomposition {
        gamma,
        epsilon: eps,
        threshold,
        contours_plus,
        contours_minus,
        open_chains,
        b_prime,
        b_dprime,
        a_eps_sites,
        area,
        perimeter: eps * perimeter,
        boundary_square_diagnostic: boundary_squares.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_tessellation, sample_poisson, Window};

    fn tess(seed: u64, half_width: f64) -> Tessellation {
        let w = Window::new(Point::new(0.0, 0.0), half_width, 6.0).unwrap();
        build_tessellation(&sample_poisson(1.0, w, seed).unwrap()).unwrap()
    }

    #[test]
    fn union_connectivity_is_validated() {
        let t = tess(31, 8.0);
        let a = t.cells.iter().find(|c| c.certified).unwrap().site;
        // a and a far non-neighbour are disconnected
        let far = t
            .cells
            .iter()
            .filter(|c| c.certified)
            .map(|c| c.site)
            .filter(|&s| {
                s != a && !t.site_adjacency[a as usize].iter().any(|&(j, _)| j == s)
            })
            .max_by(|&x, &y| {
                let pa = t.points.sites[a as usize];
                t.points.sites[x as usize]
                    .dist(pa)
                    .total_cmp(&t.points.sites[y as usize].dist(pa))
            })
            .unwrap();
        assert!(matches!(
            CellUnion::new(&t, vec![a, far]),
            Err(Error::DisconnectedUnion)
        ));
        assert!(CellUnion::new(&t, vec![a]).is_ok());
    }

    #[test]
    fn grown_unions_have_requested_size_and_connectivity() {
        let t = tess(32, 10.0);
        for seed in [1, 2, 3] {
            let u = random_union(&t, 40, seed).unwrap();
            assert_eq!(u.sites.len(), 40);
            assert!(u.connected);
        }
        let adv = adversarial_union(&t, 40, 1).unwrap();
        assert_eq!(adv.sites.len(), 40);
        // determinism
        assert_eq!(random_union(&t, 40, 7).unwrap(), random_union(&t, 40, 7).unwrap());
    }

    #[test]
    fn footprint_single_cell_inside_one_big_square() {
        let t = tess(33, 8.0);
        // pick a certified cell near the origin; with a unit of 40 its cell
        // lies strictly inside the square at z = (0, 0)
        let s = t
            .cells
            .iter()
            .filter(|c| c.certified)
            .min_by(|a, b| {
                t.points.sites[a.site as usize]
                    .norm()
                    .total_cmp(&t.points.sites[b.site as usize].norm())
            })
            .unwrap()
            .site;
        let u = CellUnion::new(&t, vec![s]).unwrap();
        let fp = lattice_footprint(&t, &u, 40.0).unwrap();
        assert_eq!(fp.squares, vec![(0, 0)]);
        // at unit 1 a typical cell meets between 1 and ~9 squares
        let fp = lattice_footprint(&t, &u, 1.0).unwrap();
        assert!((1..=9).contains(&fp.count));
    }

    #[test]
    fn footprint_matches_exhaustive_oracle() {
        let t = tess(34, 9.0);
        let u = random_union(&t, 50, 5).unwrap();
        let fp = lattice_footprint(&t, &u, 1.0).unwrap();
        // oracle: test every candidate square in the union's bounding box
        // against every member cell
        let mut bbox: Option<Rect> = None;
        for &s in &u.sites {
            let b = polygon_bbox(&t.cells[s as usize].polygon);
            bbox = Some(match bbox {
                None => b,
                Some(r) => Rect::new(
                    Point::new(r.min.x.min(b.min.x), r.min.y.min(b.min.y)),
                    Point::new(r.max.x.max(b.max.x), r.max.y.max(b.max.y)),
                ),
            });
        }
        let bbox = bbox.unwrap();
        let mut oracle = Vec::new();
        for zx in (bbox.min.x.floor() as i64 - 2)..=(bbox.max.x.ceil() as i64 + 2) {
            for zy in (bbox.min.y.floor() as i64 - 2)..=(bbox.max.y.ceil() as i64 + 2) {
                let sq = lattice_square((zx, zy), 1.0);
                if u.sites
                    .iter()
                    .any(|&s| convex_polygons_intersect(&t.cells[s as usize].polygon, &sq))
                {
                    oracle.push((zx, zy));
                }
            }
        }
        assert_eq!(fp.squares, oracle);
    }

    #[test]
    fn footprint_is_monotone_in_the_union() {
        let t = tess(35, 9.0);
        let big = random_union(&t, 60, 9).unwrap();
        let small = CellUnion::new(
            &t,
            {
                // connected sub-union: first 30 reached by flood fill
                let member: HashSet<u32> = big.sites.iter().copied().collect();
                let mut seen = vec![big.sites[0]];
                let mut set: HashSet<u32> = seen.iter().copied().collect();
                let mut qi = 0;
                while set.len() < 30 && qi < seen.len() {
                    let s = seen[qi];
                    qi += 1;
                    for &(j, _) in &t.site_adjacency[s as usize] {
                        if member.contains(&j) && set.len() < 30 && set.insert(j) {
                            seen.push(j);
                        }
                    }
                }
                seen
            },
        )
        .unwrap();
        let fa = lattice_footprint(&t, &small, 1.0).unwrap();
        let fb = lattice_footprint(&t, &big, 1.0).unwrap();
        let set: HashSet<(i64, i64)> = fb.squares.iter().copied().collect();
        assert!(fa.squares.iter().all(|z| set.contains(z)));
    }

    #[test]
    fn constant_plus_has_no_contours() {
        let t = tess(36, 8.0);
        let u = SpinConfig::uniform(t.num_sites(), 1, 0.1).unwrap();
        let d = contour_decompose(&t, &u, 0.25).unwrap();
        assert!(d.contours_plus.is_empty() && d.contours_minus.is_empty());
        assert!(d.b_prime.is_empty() && d.b_dprime.is_empty());
        assert_eq!(d.a_eps_sites.len(), t.num_sites());
        assert_eq!(d.perimeter, 0.0);
    }

    #[test]
    fn single_island_is_removed() {
        let t = tess(37, 8.0);
        let s = t
            .cells
            .iter()
            .filter(|c| c.certified)
            .min_by(|a, b| {
                t.points.sites[a.site as usize]
                    .norm()
                    .total_cmp(&t.points.sites[b.site as usize].norm())
            })
            .unwrap()
            .site;
        let mut values = vec![-1i8; t.num_sites()];
        values[s as usize] = 1;
        let u = SpinConfig::new(values, 0.01).unwrap();
        let d = contour_decompose(&t, &u, 0.25).unwrap();
        assert_eq!(d.contours_minus.len(), 1);
        assert!(d.contours_plus.is_empty());
        let c = &d.contours_minus[0];
        assert!(c.maximal);
        assert_eq!(c.orientation_class, Some(1));
        assert_eq!(c.incident_plus, 1);
        assert_eq!(d.b_prime, vec![s]);
        assert!(d.b_dprime.is_empty());
        assert!(d.a_eps_sites.is_empty());
        assert_eq!(d.perimeter, 0.0);
    }

    #[test]
    fn single_hole_is_filled() {
        let t = tess(38, 8.0);
        let s = t
            .cells
            .iter()
            .filter(|c| c.certified)
            .min_by(|a, b| {
                t.points.sites[a.site as usize]
                    .norm()
                    .total_cmp(&t.points.sites[b.site as usize].norm())
            })
            .unwrap()
            .site;
        let mut values = vec![1i8; t.num_sites()];
        values[s as usize] = -1;
        // threshold eps^-gamma must exceed the ~6 incident +1 cells of the
        // hole's contour for it to count as small
        let u = SpinConfig::new(values, 1e-4).unwrap();
        let d = contour_decompose(&t, &u, 0.25).unwrap();
        assert_eq!(d.contours_minus.len(), 1);
        assert_eq!(d.contours_minus[0].orientation_class, Some(2));
        assert_eq!(d.b_dprime, vec![s]);
        assert_eq!(d.a_eps_sites.len(), t.num_sites());
        assert_eq!(d.perimeter, 0.0);
    }

    #[test]
    fn conservation_identity_holds_for_random_spins() {
        let t = tess(39, 9.0);
        let u = SpinConfig::random(&t, 1.0 / 30.0, 91).unwrap();
        let d = contour_decompose(&t, &u, 0.25).unwrap();
        // (A ∪ B') \ B'' equals the plus set, as site sets
        let mut rebuilt: HashSet<u32> = d.a_eps_sites.iter().copied().collect();
        rebuilt.extend(&d.b_prime);
        for s in &d.b_dprime {
            rebuilt.remove(s);
        }
        let plus: HashSet<u32> = (0..t.num_sites() as u32)
            .filter(|&s| u.spin(s) == 1)
            .collect();
        assert_eq!(rebuilt, plus);
        // B' and B'' are disjoint
        assert!(d.b_prime.iter().all(|s| d.b_dprime.binary_search(s).is_err()));
        // threshold classification is re-checkable per contour
        for c in d.contours_plus.iter().chain(&d.contours_minus) {
            assert_eq!(c.plus_class, c.incident_plus as f64 >= d.threshold);
        }
    }

    #[test]
    fn rejects_bad_gamma() {
        let t = tess(40, 8.0);
        let u = SpinConfig::uniform(t.num_sites(), 1, 0.1).unwrap();
        assert!(contour_decompose(&t, &u, 0.0).is_err());
        assert!(contour_decompose(&t, &u, 0.5).is_err());
    }

    #[test]
    fn ratio_stats_single_far_cell_is_unity() {
        let t = tess(41, 10.0);
        let stats = polyomino_ratio_stats(&t, &[20, 60], 3, 1.0, 77, false).unwrap();
        assert_eq!(stats.samples.len(), 6);
        for s in &stats.samples {
            assert!(s.ratio_over > 0.0 && s.ratio_under > 0.0);
            assert!(s.ratio_over * s.ratio_under <= 1.0 + 1e-12);
        }
        for (_, worst) in &stats.max_ratio_per_size {
            assert!(*worst >= 1.0);
        }
    }
}
