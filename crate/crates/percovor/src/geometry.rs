//! Poisson point sampling in a buffered window and the certified
//! Delaunay/Voronoi tessellation built on top of it.
//!
//! The sampled region is the core square inflated by a buffer; a Voronoi
//! vertex is *certified* when its circumscribed disk lies inside the sampled
//! region, so the vertex would be unchanged by any configuration of points
//! outside the window. Downstream statistics only consume certified objects.

use crate::error::{Error, Result};
use crate::geom::{
    chebyshev_center, clip_halfplane, polygon_diameter, signed_area, HalfPlane, Point, Rect,
};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Square observation window: a core square of side `2 * half_width` around
/// `center`, inflated by `buffer` on all sides for sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: Point,
    pub half_width: f64,
    pub buffer: f64,
}

impl Window {
    pub fn new(center: Point, half_width: f64, buffer: f64) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "half_width must be positive and finite, got {half_width}"
            )));
        }
        if !(buffer >= 0.0) || !buffer.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "buffer must be non-negative, got {buffer}"
            )));
        }
        Ok(Window { center, half_width, buffer })
    }

    /// Default buffer used by the pipeline at intensity `lambda`.
    pub fn default_buffer(lambda: f64) -> f64 {
        6.0 / lambda.sqrt()
    }

    pub fn core(&self) -> Rect {
        Rect::centered(self.center, self.half_width)
    }

    pub fn sampled(&self) -> Rect {
        Rect::centered(self.center, self.half_width + self.buffer)
    }
}

/// A sampled realization of the Poisson point process.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub sites: Vec<Point>,
    pub intensity: f64,
    pub window: Window,
    pub seed: u64,
}

impl PointSet {
    /// Applies the scaling map x -> factor * x. The intensity transforms by
    /// 1/factor^2 and the window is scaled along.
    pub fn scaled(&self, factor: f64) -> PointSet {
        PointSet {
            sites: self.sites.iter().map(|p| p.scale(factor)).collect(),
            intensity: self.intensity / (factor * factor),
            window: Window {
                center: self.window.center.scale(factor),
                half_width: self.window.half_width * factor,
                buffer: self.window.buffer * factor,
            },
            seed: self.seed,
        }
    }
}

/// Samples a Poisson point process of the given intensity on the sampled
/// region of `window`. Deterministic per seed; no two sites coincide.
pub fn sample_poisson(intensity: f64, window: Window, seed: u64) -> Result<PointSet> {
    if !(intensity > 0.0) || !intensity.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "intensity must be positive, got {intensity}"
        )));
    }
    let region = window.sampled();
    let mean = intensity * region.area();
    if !(mean > 0.0) {
        return Err(Error::InvalidArgument("sampled region has zero area".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = Poisson::new(mean)
        .map_err(|e| Error::InvalidArgument(format!("poisson: {e}")))?
        .sample(&mut rng) as usize;
    let mut sites = Vec::with_capacity(n);
    let mut seen: HashSet<(u64, u64)> = HashSet::with_capacity(n * 2);
    while sites.len() < n {
        let p = Point::new(
            rng.random_range(region.min.x..region.max.x),
            rng.random_range(region.min.y..region.max.y),
        );
        if seen.insert((p.x.to_bits(), p.y.to_bits())) {
            sites.push(p);
        }
    }
    Ok(PointSet { sites, intensity, window, seed })
}

/// The dual Voronoi edge of a Delaunay edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DualEdge {
    /// Segment between two Voronoi vertices (circumcenters of the two
    /// incident triangles).
    Bounded { v0: u32, v1: u32 },
    /// Half-infinite ray from one Voronoi vertex; the Delaunay edge lies on
    /// the convex hull.
    Unbounded { v: u32, dir: Point },
}

/// One Delaunay edge together with its dual Voronoi edge. The shared index in
/// [`Tessellation::edges`] identifies both sides of the duality bijection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Unordered site pair, stored with `sites.0 < sites.1`.
    pub sites: (u32, u32),
    pub dual: DualEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoronoiVertex {
    pub pos: Point,
    pub circumradius: f64,
    /// The three sites whose cells meet at this vertex.
    pub sites: [u32; 3],
    /// True when the circumscribed disk lies inside the sampled region.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub site: u32,
    /// Counterclockwise polygon, clipped to the sampled region if necessary.
    pub polygon: Vec<Point>,
    /// Ring of Voronoi vertex indices, present for unclipped cells.
    pub ring: Option<Vec<u32>>,
    /// True when the cell was cut by the sampled-region boundary (this
    /// includes every unbounded cell of a hull site).
    pub clipped: bool,
    /// Unclipped and all corner vertices certified.
    pub certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub site: u32,
    pub inradius: f64,
    pub diameter: f64,
    pub edge_count: usize,
    pub clipped: bool,
}

#[derive(Debug, Clone)]
pub struct Tessellation {
    pub points: PointSet,
    pub edges: Vec<Edge>,
    pub vertices: Vec<VoronoiVertex>,
    pub cells: Vec<Cell>,
    /// Per-site list of (neighbour site, edge id).
    pub site_adjacency: Vec<Vec<(u32, u32)>>,
    /// Per-Voronoi-vertex list of (neighbour vertex, edge id), bounded duals only.
    pub vertex_adjacency: Vec<Vec<(u32, u32)>>,
}

fn circumcircle(p1: Point, p2: Point, p3: Point) -> (Point, f64) {
    let b = p2 - p1;
    let c = p3 - p1;
    let d = 2.0 * b.cross(c);
    let b2 = b.dot(b);
    let c2 = c.dot(c);
    let ux = (c.y * b2 - b.y * c2) / d;
    let uy = (b.x * c2 - c.x * b2) / d;
    let offset = Point::new(ux, uy);
    (p1 + offset, offset.norm())
}

const BOUNDARY_EPS: f64 = 1e-9;

fn on_rect_boundary(p: Point, rect: &Rect, scale: f64) -> bool {
    let eps = BOUNDARY_EPS * scale;
    (p.x - rect.min.x).abs() <= eps
        || (p.x - rect.max.x).abs() <= eps
        || (p.y - rect.min.y).abs() <= eps
        || (p.y - rect.max.y).abs() <= eps
}

/// Builds the Delaunay triangulation and its dual Voronoi structure.
pub fn build_tessellation(points: &PointSet) -> Result<Tessellation> {
    use spade::{DelaunayTriangulation, Point2, Triangulation};

    let n = points.sites.len();
    if n < 3 {
        return Err(Error::InsufficientSites(n));
    }
    let input: Vec<Point2<f64>> = points.sites.iter().map(|p| Point2::new(p.x, p.y)).collect();
    let tri: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::bulk_load_stable(input)
        .map_err(|e| Error::InvalidArgument(format!("site insertion failed: {e:?}")))?;
    if tri.num_vertices() < n {
        return Err(Error::InvalidArgument("duplicate sites in input".into()));
    }
    if tri.num_inner_faces() == 0 {
        return Err(Error::DegenerateConfiguration);
    }

    let sampled = points.window.sampled();
    let scale = sampled.width().max(1.0);

    // Voronoi vertices = circumcenters of the inner faces.
    let mut vertices = Vec::with_capacity(tri.num_inner_faces());
    let mut face_to_vertex = vec![u32::MAX; tri.num_all_faces()];
    let mut faces_of_site: Vec<Vec<u32>> = vec![Vec::new(); n];
    for face in tri.inner_faces() {
        let vs = face.vertices();
        let ids = [
            vs[0].index() as u32,
            vs[1].index() as u32,
            vs[2].index() as u32,
        ];
        let (center, radius) = circumcircle(
            points.sites[ids[0] as usize],
            points.sites[ids[1] as usize],
            points.sites[ids[2] as usize],
        );
        let vid = vertices.len() as u32;
        face_to_vertex[face.index()] = vid;
        for id in ids {
            faces_of_site[id as usize].push(vid);
        }
        vertices.push(VoronoiVertex {
            pos: center,
            circumradius: radius,
            sites: ids,
            certified: sampled.contains_disk(center, radius),
        });
    }

    // Delaunay edges with their duals, in canonical (site pair) order.
    let mut raw_edges = Vec::with_capacity(tri.num_undirected_edges());
    let mut on_hull = vec![false; n];
    for edge in tri.undirected_edges() {
        let [va, vb] = edge.vertices();
        let (mut i, mut j) = (va.index() as u32, vb.index() as u32);
        if i > j {
            std::mem::swap(&mut i, &mut j);
        }
        let directed = edge.as_directed();
        let f1 = directed.face();
        let f2 = directed.rev().face();
        let v1 = f1.as_inner().map(|f| face_to_vertex[f.index()]);
        let v2 = f2.as_inner().map(|f| face_to_vertex[f.index()]);
        let dual = match (v1, v2) {
            (Some(a), Some(b)) => DualEdge::Bounded { v0: a.min(b), v1: a.max(b) },
            (Some(a), None) | (None, Some(a)) => {
                on_hull[i as usize] = true;
                on_hull[j as usize] = true;
                let pi = points.sites[i as usize];
                let pj = points.sites[j as usize];
                let mid = (pi + pj).scale(0.5);
                let mut dir = (pj - pi).perp();
                // orient away from the third site of the incident triangle
                let tri_sites = vertices[a as usize].sites;
                let third = tri_sites
                    .iter()
                    .copied()
                    .find(|&s| s != i && s != j)
                    .expect("triangle must contain a third site");
                if dir.dot(mid - points.sites[third as usize]) < 0.0 {
                    dir = dir.scale(-1.0);
                }
                let len = dir.norm();
                DualEdge::Unbounded { v: a, dir: dir.scale(1.0 / len) }
            }
            (None, None) => unreachable!("every Delaunay edge borders an inner face"),
        };
        raw_edges.push(Edge { sites: (i, j), dual });
    }
    raw_edges.sort_by_key(|e| e.sites);
    let edges = raw_edges;

    let mut site_adjacency: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
    let mut vertex_adjacency: Vec<Vec<(u32, u32)>> = vec![Vec::new(); vertices.len()];
    for (eid, edge) in edges.iter().enumerate() {
        let eid = eid as u32;
        let (i, j) = edge.sites;
        site_adjacency[i as usize].push((j, eid));
        site_adjacency[j as usize].push((i, eid));
        if let DualEdge::Bounded { v0, v1 } = edge.dual {
            vertex_adjacency[v0 as usize].push((v1, eid));
            vertex_adjacency[v1 as usize].push((v0, eid));
        }
    }

    // Cells. Interior cells whose corners stay inside the sampled region are
    // taken as rings of circumcenters; the rest are rebuilt by intersecting
    // the sampled rectangle with the neighbour bisectors and flagged clipped
    // when the boundary cut them.
    let mut cells = Vec::with_capacity(n);
    for site in 0..n {
        let p = points.sites[site];
        let incident = &faces_of_site[site];
        let interior_ok = !on_hull[site]
            && !incident.is_empty()
            && incident
                .iter()
                .all(|&v| sampled.contains(vertices[v as usize].pos));
        if interior_ok {
            let mut ring = incident.clone();
            ring.sort_by(|&a, &b| {
                let pa = vertices[a as usize].pos - p;
                let pb = vertices[b as usize].pos - p;
                pa.y.atan2(pa.x)
                    .partial_cmp(&pb.y.atan2(pb.x))
                    .expect("finite angles")
            });
            ring.dedup();
            let polygon: Vec<Point> = ring.iter().map(|&v| vertices[v as usize].pos).collect();
            let certified = ring.iter().all(|&v| vertices[v as usize].certified);
            cells.push(Cell { site: site as u32, polygon, ring: Some(ring), clipped: false, certified });
        } else {
            let mut polygon: Vec<Point> = sampled.corners().to_vec();
            for &(nbr, _) in &site_adjacency[site] {
                let hp = HalfPlane::bisector(p, points.sites[nbr as usize]);
                polygon = clip_halfplane(&polygon, &hp);
                if polygon.is_empty() {
                    break;
                }
            }
            if signed_area(&polygon) < 0.0 {
                polygon.reverse();
            }
            let clipped = polygon.iter().any(|&q| on_rect_boundary(q, &sampled, scale));
            cells.push(Cell { site: site as u32, polygon, ring: None, clipped, certified: false });
        }
    }

    Ok(Tessellation {
        points: points.clone(),
        edges,
        vertices,
        cells,
        site_adjacency,
        vertex_adjacency,
    })
}

impl Tessellation {
    pub fn num_sites(&self) -> usize {
        self.points.sites.len()
    }

    /// Indices of edges whose dual is bounded (interior Voronoi edges).
    pub fn bounded_dual_edges(&self) -> impl Iterator<Item = (u32, (u32, u32))> + '_ {
        self.edges.iter().enumerate().filter_map(|(eid, e)| match e.dual {
            DualEdge::Bounded { v0, v1 } => Some((eid as u32, (v0, v1))),
            DualEdge::Unbounded { .. } => None,
        })
    }

    /// Euclidean length of the dual Voronoi edge; unbounded duals have no
    /// finite length.
    pub fn dual_edge_length(&self, eid: u32) -> Option<f64> {
        match self.edges[eid as usize].dual {
            DualEdge::Bounded { v0, v1 } => {
                Some(self.vertices[v0 as usize].pos.dist(self.vertices[v1 as usize].pos))
            }
            DualEdge::Unbounded { .. } => None,
        }
    }
}

/// Inradius, diameter and edge count of a cell polygon.
pub fn cell_metrics(tess: &Tessellation, site: u32) -> Result<CellMetrics> {
    let cell = tess
        .cells
        .get(site as usize)
        .ok_or_else(|| Error::InvalidArgument(format!("no such site {site}")))?;
    if cell.polygon.len() < 3 {
        return Err(Error::UnboundedCell);
    }
    let (_, inradius) = chebyshev_center(&cell.polygon).ok_or(Error::UnboundedCell)?;
    Ok(CellMetrics {
        site,
        inradius,
        diameter: polygon_diameter(&cell.polygon),
        edge_count: cell.polygon.len(),
        clipped: cell.clipped,
    })
}
