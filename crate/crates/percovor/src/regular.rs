//! Regular-cell classification and the structures built on top of it: the
//! cluster of regular cells spanning the core window, the coarse-grained
//! block grid with its three opening conditions, vertex-disjoint channel
//! counting across rectangles, and the restricted metric estimate tau_alpha.

use crate::error::{Error, Result};
use crate::geom::{
    polygon_bbox, polygon_intersects_segment, Point, Rect,
};
use crate::geometry::{
    build_tessellation, cell_metrics, sample_poisson, CellMetrics, PointSet, Tessellation,
};
use crate::metric::{estimate_tau_with, TauConfig, TauEstimate, VertexFilter};
use crate::util::{mix_seed, UnionFind};
use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

/// Why a site was left out of the regular set. `boundary` marks cells that
/// are clipped or not fully certified, which are never classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExclusionRecord {
    pub site: u32,
    pub boundary: bool,
    pub fails_inradius: bool,
    pub fails_diameter: bool,
    pub fails_edge_count: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub alpha: f64,
    /// Sorted site ids with inradius >= alpha, diameter <= 1/alpha and at
    /// most 1/alpha edges.
    pub regular_sites: Vec<u32>,
    /// Metrics for every site with a bounded certified cell, indexed by site.
    pub metrics: Vec<Option<CellMetrics>>,
    pub excluded: Vec<ExclusionRecord>,
}

impl RegularityReport {
    pub fn is_regular(&self, site: u32) -> bool {
        self.regular_sites.binary_search(&site).is_ok()
    }

    pub fn regular_fraction(&self) -> f64 {
        let classified = self.regular_sites.len()
            + self.excluded.iter().filter(|e| !e.boundary).count();
        if classified == 0 {
            0.0
        } else {
            self.regular_sites.len() as f64 / classified as f64
        }
    }
}

/// Classifies every certified cell by the three regularity criteria.
pub fn classify_regular(tess: &Tessellation, alpha: f64) -> Result<RegularityReport> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let inv = 1.0 / alpha;
    let mut regular_sites = Vec::new();
    let mut metrics = vec![None; tess.num_sites()];
    let mut excluded = Vec::new();
    for cell in &tess.cells {
        let site = cell.site;
        if !cell.certified {
            excluded.push(ExclusionRecord {
                site,
                boundary: true,
                fails_inradius: false,
                fails_diameter: false,
                fails_edge_count: false,
            });
            continue;
        }
        let m = cell_metrics(tess, site)?;
        let fails_inradius = m.inradius < alpha;
        let fails_diameter = m.diameter > inv;
        let fails_edge_count = m.edge_count as f64 > inv;
        metrics[site as usize] = Some(m);
        if fails_inradius || fails_diameter || fails_edge_count {
            excluded.push(ExclusionRecord {
                site,
                boundary: false,
                fails_inradius,
                fails_diameter,
                fails_edge_count,
            });
        } else {
            regular_sites.push(site);
        }
    }
    regular_sites.sort_unstable();
    Ok(RegularityReport {
        alpha,
        regular_sites,
        metrics,
        excluded,
    })
}

/// A bounded complementary component of the cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hole {
    /// Number of sites in the component.
    pub size: usize,
    /// Diagonal of the bounding box of its sites.
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaCluster {
    pub alpha: f64,
    /// True when the component joins the left and right core edges.
    pub spanning: bool,
    /// Sorted sites of the spanning (or largest) component of the regular
    /// set under Delaunay adjacency.
    pub spanning_component: Vec<u32>,
    /// Membership indexed by site.
    pub in_cluster: Vec<bool>,
    /// Sorted Voronoi vertex ids on the boundary of cluster cells.
    pub vertex_set: Vec<u32>,
    /// Sorted edge ids of cluster-cell edges (bounded duals only).
    pub edge_set: Vec<u32>,
    /// Bounded complementary components inside the core.
    pub holes: Vec<Hole>,
}

impl AlphaCluster {
    /// Restriction of the hop metric to the cluster's vertices and edges.
    pub fn filter(&self, tess: &Tessellation) -> VertexFilter {
        let mut eligible = vec![false; tess.vertices.len()];
        for &v in &self.vertex_set {
            eligible[v as usize] = true;
        }
        let mut edge_eligible = vec![false; tess.edges.len()];
        for &e in &self.edge_set {
            edge_eligible[e as usize] = true;
        }
        VertexFilter {
            alpha: self.alpha,
            eligible,
            edge_eligible: Some(edge_eligible),
        }
    }
}

/// Whether a cell polygon meets the given edge segment of the core square.
fn touches_segment(poly: &[Point], a: Point, b: Point) -> bool {
    polygon_intersects_segment(poly, a, b)
}

fn core_edge_segments(core: &Rect) -> [(Point, Point); 4] {
    let [a, b, c, d] = core.corners();
    [(a, b), (b, c), (c, d), (d, a)]
}

/// Connected components of the regular set under Delaunay adjacency; the
/// spanning component joins the left and right core edges, otherwise the
/// largest component is reported with `spanning = false`. Complementary
/// components that do not reach the core boundary are the holes.
pub fn alpha_cluster(report: &RegularityReport, tess: &Tessellation) -> Result<AlphaCluster> {
    let n = tess.num_sites();
    let mut regular = vec![false; n];
    for &s in &report.regular_sites {
        regular[s as usize] = true;
    }
    let mut uf = UnionFind::new(n);
    for (i, adj) in tess.site_adjacency.iter().enumerate() {
        if !regular[i] {
            continue;
        }
        for &(j, _) in adj {
            if regular[j as usize] {
                uf.union(i as u32, j);
            }
        }
    }
    let core = tess.points.window.core();
    let [(bl, br), (_, tr2), _, (tl, _)] = core_edge_segments(&core);
    let left = (bl, tl);
    let right = (br, tr2);
    // pick the component touching both vertical core edges, else the largest;
    // ties and multiple spanning components resolve to the lowest root id
    let mut touches: HashMap<usize, (bool, bool, usize)> = HashMap::new();
    for i in 0..n {
        if !regular[i] {
            continue;
        }
        let root = uf.find(i as u32) as usize;
        let entry = touches.entry(root).or_insert((false, false, 0));
        entry.2 += 1;
        let poly = &tess.cells[i].polygon;
        if !entry.0 && touches_segment(poly, left.0, left.1) {
            entry.0 = true;
        }
        if !entry.1 && touches_segment(poly, right.0, right.1) {
            entry.1 = true;
        }
    }
    let mut roots: Vec<(usize, (bool, bool, usize))> =
        touches.iter().map(|(&r, &v)| (r, v)).collect();
    roots.sort_by_key(|&(r, _)| r);
    let mut chosen: Option<(usize, bool)> = None;
    let mut best_size = 0;
    for &(root, (l, r, size)) in &roots {
        if l && r {
            chosen = Some((root, true));
            break;
        }
        if size > best_size {
            best_size = size;
            chosen = Some((root, false));
        }
    }
    let (root, spanning) = match chosen {
        Some(c) => c,
        None => {
            return Ok(AlphaCluster {
                alpha: report.alpha,
                spanning: false,
                spanning_component: Vec::new(),
                in_cluster: vec![false; n],
                vertex_set: Vec::new(),
                edge_set: Vec::new(),
                holes: Vec::new(),
            })
        }
    };
    let mut in_cluster = vec![false; n];
    let mut spanning_component = Vec::new();
    for i in 0..n {
        if regular[i] && uf.find(i as u32) as usize == root {
            in_cluster[i] = true;
            spanning_component.push(i as u32);
        }
    }

    let mut vertex_set = Vec::new();
    {
        let mut seen = vec![false; tess.vertices.len()];
        for &s in &spanning_component {
            if let Some(ring) = &tess.cells[s as usize].ring {
                for &v in ring {
                    if !seen[v as usize] {
                        seen[v as usize] = true;
                        vertex_set.push(v);
                    }
                }
            }
        }
        vertex_set.sort_unstable();
    }
    let mut edge_set = Vec::new();
    for (eid, _) in tess.bounded_dual_edges() {
        let (i, j) = tess.edges[eid as usize].sites;
        if in_cluster[i as usize] || in_cluster[j as usize] {
            edge_set.push(eid);
        }
    }

    // complementary components and their boundedness in the core
    let mut cf = UnionFind::new(n);
    for (i, adj) in tess.site_adjacency.iter().enumerate() {
        if in_cluster[i] {
            continue;
        }
        for &(j, _) in adj {
            if !in_cluster[j as usize] {
                cf.union(i as u32, j);
            }
        }
    }
    let segments = core_edge_segments(&core);
    let mut comp: HashMap<usize, (usize, Rect, bool)> = HashMap::new();
    for i in 0..n {
        if in_cluster[i] {
            continue;
        }
        let root = cf.find(i as u32) as usize;
        let poly = &tess.cells[i].polygon;
        let bbox = polygon_bbox(poly);
        let unbounded = tess.cells[i].clipped
            || segments.iter().any(|&(a, b)| touches_segment(poly, a, b));
        let site = tess.points.sites[i];
        comp.entry(root)
            .and_modify(|(size, r, u)| {
                *size += 1;
                *r = Rect::new(
                    Point::new(r.min.x.min(bbox.min.x), r.min.y.min(bbox.min.y)),
                    Point::new(r.max.x.max(bbox.max.x), r.max.y.max(bbox.max.y)),
                );
                *u |= unbounded;
            })
            .or_insert((1, Rect::new(site, site), unbounded));
    }
    let mut holes: Vec<Hole> = comp
        .values()
        .filter(|(_, _, unbounded)| !unbounded)
        .map(|(size, r, _)| Hole {
            size: *size,
            diameter: r.min.dist(r.max),
        })
        .collect();
    holes.sort_by(|a, b| b.size.cmp(&a.size).then(a.diameter.total_cmp(&b.diameter)));

    Ok(AlphaCluster {
        alpha: report.alpha,
        spanning,
        spanning_component,
        in_cluster,
        vertex_set,
        edge_set,
        holes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockState {
    pub j: (i64, i64),
    /// Block not fully inside the sampled region; never counted.
    pub skipped: bool,
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
    pub open: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid {
    pub l: f64,
    pub k: usize,
    pub alpha: f64,
    pub blocks: Vec<BlockState>,
    /// Open share among non-skipped blocks.
    pub open_fraction: f64,
}

/// Coarse blocks of side 10L centered at 10L*j. A block is open when every
/// L-subsquare holds a point (c1), the block holds at most K points (c2),
/// and points keep distance > 2 alpha from each other and from the block
/// boundary (c3).
pub fn classify_blocks(points: &PointSet, l: f64, k: usize, alpha: f64) -> Result<BlockGrid> {
    if !(l > 0.0) || k < 1 || alpha < 0.0 {
        return Err(Error::InvalidArgument(
            "need L > 0, K >= 1, alpha >= 0".into(),
        ));
    }
    let sampled = points.window.sampled();
    let side = 10.0 * l;
    let jx_min = ((sampled.min.x + 0.5 * side) / side).floor() as i64 - 1;
    let jx_max = ((sampled.max.x + 0.5 * side) / side).floor() as i64 + 1;
    let jy_min = ((sampled.min.y + 0.5 * side) / side).floor() as i64 - 1;
    let jy_max = ((sampled.max.y + 0.5 * side) / side).floor() as i64 + 1;

    // bin points by block; blocks tile the plane
    let mut bins: HashMap<(i64, i64), Vec<Point>> = HashMap::new();
    for &p in &points.sites {
        let jx = ((p.x + 0.5 * side) / side).floor() as i64;
        let jy = ((p.y + 0.5 * side) / side).floor() as i64;
        bins.entry((jx, jy)).or_default().push(p);
    }

    let mut blocks = Vec::new();
    let (mut open_count, mut considered) = (0usize, 0usize);
    for jx in jx_min..=jx_max {
        for jy in jy_min..=jy_max {
            let center = Point::new(jx as f64 * side, jy as f64 * side);
            let block = Rect::centered(center, 0.5 * side);
            if !block.intersects(&sampled) {
                continue;
            }
            let inside = sampled.contains(block.min) && sampled.contains(block.max);
            if !inside {
                blocks.push(BlockState {
                    j: (jx, jy),
                    skipped: true,
                    c1: false,
                    c2: false,
                    c3: false,
                    open: false,
                });
                continue;
            }
            let empty = Vec::new();
            let pts = bins.get(&(jx, jy)).unwrap_or(&empty);
            // (c1): all 100 L-subsquares occupied
            let mut occupied = [false; 100];
            for p in pts {
                let sx = (((p.x - block.min.x) / l) as usize).min(9);
                let sy = (((p.y - block.min.y) / l) as usize).min(9);
                occupied[sy * 10 + sx] = true;
            }
            let c1 = occupied.iter().all(|&o| o);
            let c2 = pts.len() <= k;
            let c3 = spacing_ok(pts, &block, alpha);
            let open = c1 && c2 && c3;
            blocks.push(BlockState {
                j: (jx, jy),
                skipped: false,
                c1,
                c2,
                c3,
                open,
            });
            considered += 1;
            open_count += open as usize;
        }
    }
    Ok(BlockGrid {
        l,
        k,
        alpha,
        blocks,
        open_fraction: if considered == 0 {
            0.0
        } else {
            open_count as f64 / considered as f64
        },
    })
}

/// (c3): pairwise distances and distances to the block boundary all exceed
/// 2 alpha. Uses a hash grid of cell size 2 alpha so only neighbouring
/// buckets are compared.
fn spacing_ok(pts: &[Point], block: &Rect, alpha: f64) -> bool {
    let gap = 2.0 * alpha;
    if gap == 0.0 {
        return true;
    }
    for p in pts {
        let to_boundary = (p.x - block.min.x)
            .min(block.max.x - p.x)
            .min(p.y - block.min.y)
            .min(block.max.y - p.y);
        if to_boundary <= gap {
            return false;
        }
    }
    let mut grid: HashMap<(i64, i64), Vec<Point>> = HashMap::new();
    for &p in pts {
        let key = ((p.x / gap).floor() as i64, (p.y / gap).floor() as i64);
        grid.entry(key).or_default().push(p);
    }
    for (&(gx, gy), cell_pts) in &grid {
        for (i, p) in cell_pts.iter().enumerate() {
            for q in &cell_pts[i + 1..] {
                if p.dist(*q) <= gap {
                    return false;
                }
            }
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    if (dx, dy) == (0, 0) || (dx, dy) < (0, 0) {
                        continue;
                    }
                    if let Some(others) = grid.get(&(gx + dx, gy + dy)) {
                        if others.iter().any(|q| p.dist(*q) <= gap) {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

/// Crossing rectangle: extent 2*delta*T along nu, T along the perpendicular.
/// Channels connect the two sides parallel to nu.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRect {
    pub center: Point,
    pub nu_deg: f64,
    pub t_len: f64,
    pub delta: f64,
}

impl ChannelRect {
    fn axes(&self) -> (Point, Point) {
        let r = self.nu_deg.to_radians();
        let nu = Point::new(r.cos(), r.sin());
        (nu, nu.perp())
    }

    pub fn corners(&self) -> [Point; 4] {
        let (nu, pe) = self.axes();
        let a = nu.scale(self.delta * self.t_len);
        let b = pe.scale(0.5 * self.t_len);
        [
            self.center + a + b,
            self.center + a - b.scale(1.0),
            self.center - a - b,
            self.center - a.scale(1.0) + b,
        ]
    }

    /// Coordinates of p in the (nu, nu-perp) frame centered at the rectangle.
    fn local(&self, p: Point) -> (f64, f64) {
        let (nu, pe) = self.axes();
        let d = p - self.center;
        (d.dot(nu), d.dot(pe))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub rect: ChannelRect,
    /// Maximum number of pairwise site-disjoint crossing paths.
    pub count: usize,
    /// One path per unit of flow, as site id sequences from the +side to the
    /// -side.
    pub witnesses: Vec<Vec<u32>>,
}

/// Maximum number of site-disjoint paths of cluster cells crossing the
/// rectangle between its two sides parallel to nu, via max-flow with unit
/// site capacities (node splitting, shortest augmenting paths).
pub fn channel_count(
    cluster: &AlphaCluster,
    tess: &Tessellation,
    rect: &ChannelRect,
) -> Result<ChannelReport> {
    if !(rect.delta > 0.0 && rect.delta < 1.0) || !(rect.t_len > 0.0) {
        return Err(Error::InvalidArgument(
            "need delta in (0,1) and T > 0".into(),
        ));
    }
    let core = tess.points.window.core();
    if rect.corners().iter().any(|c| !core.contains(*c)) {
        return Err(Error::OutOfCore);
    }
    let half = 0.5 * rect.t_len;
    let band = rect.delta * rect.t_len;

    // eligible cluster cells: polygon meets the rectangle
    let mut ids = Vec::new(); // site -> dense node id
    let mut dense: HashMap<u32, usize> = HashMap::new();
    let mut is_source = Vec::new();
    let mut is_sink = Vec::new();
    for &s in &cluster.spanning_component {
        let poly = &tess.cells[s as usize].polygon;
        let locals: Vec<(f64, f64)> = poly.iter().map(|&p| rect.local(p)).collect();
        let u_min = locals.iter().map(|l| l.0).fold(f64::INFINITY, f64::min);
        let u_max = locals.iter().map(|l| l.0).fold(f64::NEG_INFINITY, f64::max);
        let v_min = locals.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
        let v_max = locals.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
        if u_max < -band || u_min > band || v_max < -half || v_min > half {
            continue;
        }
        dense.insert(s, ids.len());
        ids.push(s);
        is_source.push(v_max >= half);
        is_sink.push(v_min <= -half);
    }
    let m = ids.len();
    if m == 0 {
        return Ok(ChannelReport {
            rect: *rect,
            count: 0,
            witnesses: Vec::new(),
        });
    }

    // node-split flow network: node 2i = in, 2i+1 = out, source = 2m, sink = 2m+1
    let mut flow = FlowNetwork::new(2 * m + 2);
    let (source, sink) = (2 * m, 2 * m + 1);
    for i in 0..m {
        flow.add_edge(2 * i, 2 * i + 1, 1);
        if is_source[i] {
            flow.add_edge(source, 2 * i, 1);
        }
        if is_sink[i] {
            flow.add_edge(2 * i + 1, sink, 1);
        }
        for &(j, _) in &tess.site_adjacency[ids[i] as usize] {
            if let Some(&dj) = dense.get(&j) {
                flow.add_edge(2 * i + 1, 2 * dj, 1);
            }
        }
    }
    let count = flow.max_flow(source, sink);

    // decompose: follow saturated arcs out of each used source cell
    let mut witnesses = Vec::new();
    for i in 0..m {
        if !is_source[i] || !flow.edge_used(source, 2 * i) {
            continue;
        }
        let mut path = vec![ids[i]];
        let mut cur = i;
        loop {
            if is_sink[cur] && flow.edge_used(2 * cur + 1, sink) {
                flow.consume(2 * cur + 1, sink);
                break;
            }
            let next = flow
                .used_successor(2 * cur + 1)
                .expect("flow conservation: interior node must forward");
            flow.consume(2 * cur + 1, next);
            cur = next / 2;
            path.push(ids[cur]);
        }
        witnesses.push(path);
    }
    debug_assert_eq!(witnesses.len(), count);
    validate_witnesses(cluster, tess, rect, &witnesses)?;
    Ok(ChannelReport {
        rect: *rect,
        count,
        witnesses,
    })
}

/// Independent re-check of the extracted channels: cluster membership,
/// Delaunay connectivity, site-disjointness, and side contact.
fn validate_witnesses(
    cluster: &AlphaCluster,
    tess: &Tessellation,
    rect: &ChannelRect,
    witnesses: &[Vec<u32>],
) -> Result<()> {
    let half = 0.5 * rect.t_len;
    let mut seen = std::collections::HashSet::new();
    for path in witnesses {
        for pair in path.windows(2) {
            if !tess.site_adjacency[pair[0] as usize]
                .iter()
                .any(|&(j, _)| j == pair[1])
            {
                return Err(Error::InvalidArgument(
                    "witness path not Delaunay-connected".into(),
                ));
            }
        }
        for &s in path {
            if !cluster.in_cluster[s as usize] || !seen.insert(s) {
                return Err(Error::InvalidArgument(
                    "witness paths overlap or leave the cluster".into(),
                ));
            }
        }
        let top = tess.cells[path[0] as usize]
            .polygon
            .iter()
            .map(|&p| rect.local(p).1)
            .fold(f64::NEG_INFINITY, f64::max);
        let bottom = tess.cells[*path.last().unwrap() as usize]
            .polygon
            .iter()
            .map(|&p| rect.local(p).1)
            .fold(f64::INFINITY, f64::min);
        if top < half || bottom > -half {
            return Err(Error::InvalidArgument(
                "witness path does not reach both sides".into(),
            ));
        }
    }
    Ok(())
}

/// Unit-capacity max flow by shortest augmenting paths, with enough residual
/// bookkeeping to decompose the final flow into paths.
struct FlowNetwork {
    adj: Vec<Vec<usize>>, // node -> indices into edges
    edges: Vec<(usize, usize, i32)>, // (from, to, residual capacity)
}

impl FlowNetwork {
    fn new(n: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); n],
            edges: Vec::new(),
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i32) {
        self.adj[from].push(self.edges.len());
        self.edges.push((from, to, cap));
        self.adj[to].push(self.edges.len());
        self.edges.push((to, from, 0));
    }

    fn max_flow(&mut self, source: usize, sink: usize) -> usize {
        let mut total = 0;
        loop {
            let mut pred: Vec<Option<usize>> = vec![None; self.adj.len()];
            let mut queue = std::collections::VecDeque::from([source]);
            'bfs: while let Some(v) = queue.pop_front() {
                for &ei in &self.adj[v] {
                    let (_, to, cap) = self.edges[ei];
                    if cap > 0 && pred[to].is_none() && to != source {
                        pred[to] = Some(ei);
                        if to == sink {
                            break 'bfs;
                        }
                        queue.push_back(to);
                    }
                }
            }
            if pred[sink].is_none() {
                return total;
            }
            let mut v = sink;
            while v != source {
                let ei = pred[v].unwrap();
                self.edges[ei].2 -= 1;
                self.edges[ei ^ 1].2 += 1;
                v = self.edges[ei].0;
            }
            total += 1;
        }
    }

    /// Whether the forward edge from `from` to `to` carries flow.
    fn edge_used(&self, from: usize, to: usize) -> bool {
        self.adj[from].iter().any(|&ei| {
            ei % 2 == 0 && self.edges[ei].1 == to && self.edges[ei].2 == 0
        })
    }

    /// First flow-carrying forward edge out of `from`; used by decomposition.
    fn used_successor(&self, from: usize) -> Option<usize> {
        self.adj[from]
            .iter()
            .find(|&&ei| ei % 2 == 0 && self.edges[ei].0 == from && self.edges[ei].2 == 0)
            .map(|&ei| self.edges[ei].1)
    }

    /// Returns a unit of flow on (from, to) to the residual so decomposition
    /// visits each used edge once.
    fn consume(&mut self, from: usize, to: usize) {
        for i in 0..self.adj[from].len() {
            let ei = self.adj[from][i];
            if ei % 2 == 0 && self.edges[ei].0 == from && self.edges[ei].1 == to && self.edges[ei].2 == 0 {
                self.edges[ei].2 = 1;
                return;
            }
        }
        panic!("consume called on an unused edge");
    }
}

/// Result of the restricted estimate, with the resampling bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct TauAlphaResult {
    pub estimate: TauEstimate,
    pub attempts: usize,
    pub rejections: usize,
}

const MAX_ATTEMPTS_PER_TASK: u64 = 12;

/// Estimates tau on the alpha-cluster: per ensemble task, realizations are
/// resampled until one has a spanning cluster; hop distances then run on the
/// cluster's vertex and edge sets. Fails when more than half of all sampled
/// realizations had to be rejected.
pub fn tau_alpha(cfg: &TauConfig) -> Result<TauAlphaResult> {
    if !(cfg.alpha > 0.0) {
        return Err(Error::InvalidArgument(
            "tau_alpha needs alpha > 0".into(),
        ));
    }
    let attempts = AtomicUsize::new(0);
    let rejections = AtomicUsize::new(0);
    let estimate = estimate_tau_with(cfg, &|window, sub_seed| {
        for attempt in 0..MAX_ATTEMPTS_PER_TASK {
            let seed = if attempt == 0 {
                sub_seed
            } else {
                mix_seed(&[sub_seed, attempt])
            };
            attempts.fetch_add(1, Ordering::Relaxed);
            let points = sample_poisson(cfg.intensity, window, seed)?;
            let tess = build_tessellation(&points)?;
            let report = classify_regular(&tess, cfg.alpha)?;
            let cluster = alpha_cluster(&report, &tess)?;
            if cluster.spanning {
                let filter = cluster.filter(&tess);
                return Ok((tess, Some(filter)));
            }
            rejections.fetch_add(1, Ordering::Relaxed);
        }
        Err(Error::AlphaTooLarge(1.0))
    })?;
    let attempts = attempts.load(Ordering::Relaxed);
    let rejections = rejections.load(Ordering::Relaxed);
    let rate = rejections as f64 / attempts.max(1) as f64;
    if rate > 0.5 {
        return Err(Error::AlphaTooLarge(rate));
    }
    Ok(TauAlphaResult {
        estimate,
        attempts,
        rejections,
    })
}

/// Block-pair soundness: between adjacent open blocks, every cell meeting
/// the center-to-center segment stays inside the two blocks, contains an
/// alpha-ball, and has at most K edges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SoundnessReport {
    pub pairs_checked: usize,
    pub cells_checked: usize,
    pub containment_violations: usize,
    pub inradius_violations: usize,
    pub edge_count_violations: usize,
}

pub fn block_soundness(tess: &Tessellation, grid: &BlockGrid) -> Result<SoundnessReport> {
    let side = 10.0 * grid.l;
    let open: std::collections::HashSet<(i64, i64)> = grid
        .blocks
        .iter()
        .filter(|b| b.open)
        .map(|b| b.j)
        .collect();
    let mut report = SoundnessReport::default();
    for &(jx, jy) in &open {
        for (dx, dy) in [(1i64, 0i64), (0, 1)] {
            let other = (jx + dx, jy + dy);
            if !open.contains(&other) {
                continue;
            }
            report.pairs_checked += 1;
            let a = Point::new(jx as f64 * side, jy as f64 * side);
            let b = Point::new(other.0 as f64 * side, other.1 as f64 * side);
            let union = [
                Rect::centered(a, 0.5 * side),
                Rect::centered(b, 0.5 * side),
            ];
            let seg_box = Rect::new(
                Point::new(a.x.min(b.x) - 1.0, a.y.min(b.y) - 1.0),
                Point::new(a.x.max(b.x) + 1.0, a.y.max(b.y) + 1.0),
            );
            for cell in &tess.cells {
                if cell.polygon.len() < 3 {
                    continue;
                }
                if !polygon_bbox(&cell.polygon).intersects(&seg_box)
                    || !polygon_intersects_segment(&cell.polygon, a, b)
                {
                    continue;
                }
                report.cells_checked += 1;
                if !cell
                    .polygon
                    .iter()
                    .all(|&p| union.iter().any(|r| r.contains(p)))
                {
                    report.containment_violations += 1;
                }
                let m = cell_metrics(tess, cell.site)?;
                if m.inradius < grid.alpha {
                    report.inradius_violations += 1;
                }
                if m.edge_count > grid.k {
                    report.edge_count_violations += 1;
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Window;
    use crate::metric::MetricGraph;

    fn tess(seed: u64, half_width: f64) -> Tessellation {
        let w = Window::new(Point::new(0.0, 0.0), half_width, 6.0).unwrap();
        build_tessellation(&sample_poisson(1.0, w, seed).unwrap()).unwrap()
    }

    #[test]
    fn extreme_alphas() {
        let t = tess(21, 8.0);
        let max_inradius = (0..t.num_sites() as u32)
            .filter(|&s| t.cells[s as usize].certified)
            .map(|s| cell_metrics(&t, s).unwrap().inradius)
            .fold(0.0f64, f64::max);
        let none = classify_regular(&t, max_inradius * 1.01).unwrap();
        assert!(none.regular_sites.is_empty());
        let all = classify_regular(&t, 1e-6).unwrap();
        let certified = t.cells.iter().filter(|c| c.certified).count();
        assert_eq!(all.regular_sites.len(), certified);
    }

    #[test]
    fn nesting_in_alpha() {
        let t = tess(22, 8.0);
        let a1 = classify_regular(&t, 0.02).unwrap();
        let a2 = classify_regular(&t, 0.08).unwrap();
        for s in &a2.regular_sites {
            assert!(a1.is_regular(*s), "site {s} regular at 0.08 but not 0.02");
        }
        // determinism
        assert_eq!(classify_regular(&t, 0.02).unwrap(), a1);
    }

    #[test]
    fn cluster_components_match_flood_fill_oracle() {
        let t = tess(23, 9.0);
        let report = classify_regular(&t, 0.15).unwrap();
        let cluster = alpha_cluster(&report, &t).unwrap();
        if cluster.spanning_component.is_empty() {
            return;
        }
        // oracle: recursive flood fill from one member over regular sites
        let mut regular = vec![false; t.num_sites()];
        for &s in &report.regular_sites {
            regular[s as usize] = true;
        }
        let start = cluster.spanning_component[0] as usize;
        let mut seen = vec![false; t.num_sites()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &(w, _) in &t.site_adjacency[v] {
                if regular[w as usize] && !seen[w as usize] {
                    seen[w as usize] = true;
                    stack.push(w as usize);
                }
            }
        }
        let oracle: Vec<u32> = (0..t.num_sites() as u32)
            .filter(|&s| seen[s as usize])
            .collect();
        assert_eq!(cluster.spanning_component, oracle);
    }

    #[test]
    fn tiny_alpha_cluster_spans_and_has_no_holes() {
        let t = tess(24, 10.0);
        let report = classify_regular(&t, 1e-6).unwrap();
        let cluster = alpha_cluster(&report, &t).unwrap();
        assert!(cluster.spanning);
        assert!(cluster.holes.is_empty());
        assert!(!cluster.vertex_set.is_empty());
        assert!(!cluster.edge_set.is_empty());
    }

    fn manual_points(sites: Vec<Point>, half_width: f64, buffer: f64) -> PointSet {
        PointSet {
            sites,
            intensity: 1.0,
            window: Window::new(Point::new(0.0, 0.0), half_width, buffer).unwrap(),
            seed: 0,
        }
    }

    #[test]
    fn blocks_trivial_cases() {
        // empty point set: every interior block fails (c1)
        let empty = manual_points(Vec::new(), 20.0, 0.0);
        let grid = classify_blocks(&empty, 2.0, 100, 0.01).unwrap();
        assert!(grid.blocks.iter().all(|b| !b.open));
        assert_eq!(grid.open_fraction, 0.0);

        // one point at the center of each L-subsquare: all conditions hold
        let l = 2.0;
        let mut sites = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                sites.push(Point::new(
                    -20.0 + l * (i as f64 + 0.5),
                    -20.0 + l * (j as f64 + 0.5),
                ));
            }
        }
        let pts = manual_points(sites, 20.0, 0.0);
        let grid = classify_blocks(&pts, l, 100_000, 0.01).unwrap();
        let considered: Vec<_> = grid.blocks.iter().filter(|b| !b.skipped).collect();
        assert!(!considered.is_empty());
        assert!(considered.iter().all(|b| b.open), "{considered:?}");
        assert_eq!(grid.open_fraction, 1.0);
    }

    #[test]
    fn blocks_c2_and_c3_binding() {
        let l = 1.0;
        let mut sites = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                sites.push(Point::new(-5.0 + (i as f64 + 0.5), -5.0 + (j as f64 + 0.5)));
            }
        }
        // a close pair violating (c3) at alpha = 0.3 (distance 0.2 < 0.6)
        sites.push(Point::new(0.4, 0.45));
        let pts = manual_points(sites, 5.0, 0.0);
        let tight = classify_blocks(&pts, l, 1000, 0.3).unwrap();
        let b = tight.blocks.iter().find(|b| b.j == (0, 0)).unwrap();
        assert!(b.c1 && b.c2 && !b.c3 && !b.open);
        // K below the count violates (c2)
        let capped = classify_blocks(&pts, l, 50, 0.0).unwrap();
        let b = capped.blocks.iter().find(|b| b.j == (0, 0)).unwrap();
        assert!(!b.c2 && !b.open);
    }

    #[test]
    fn channel_empty_and_single_file() {
        // lattice cells; cluster of everything certified
        let mut sites = Vec::new();
        for i in -12i32..=12 {
            for j in -12..=12 {
                let jig = ((i * 3 + j * 7).rem_euclid(11)) as f64 * 0.01;
                sites.push(Point::new(i as f64 + jig, j as f64 + jig * 0.6));
            }
        }
        let pts = manual_points(sites, 8.0, 4.0);
        let t = build_tessellation(&pts).unwrap();
        let report = classify_regular(&t, 1e-6).unwrap();
        let cluster = alpha_cluster(&report, &t).unwrap();
        assert!(cluster.spanning);

        // narrow rectangle over one cell column: exactly one disjoint path
        let rect = ChannelRect {
            center: Point::new(0.0, 0.0),
            nu_deg: 0.0,
            t_len: 10.0,
            delta: 0.03,
        };
        let rep = channel_count(&cluster, &t, &rect).unwrap();
        assert_eq!(rep.count, 1);
        assert_eq!(rep.witnesses.len(), 1);

        // wider rectangle: several disjoint columns
        let rect = ChannelRect {
            center: Point::new(0.0, 0.0),
            nu_deg: 0.0,
            t_len: 10.0,
            delta: 0.35,
        };
        let rep = channel_count(&cluster, &t, &rect).unwrap();
        assert!(rep.count >= 3, "count {}", rep.count);

        // an empty cluster yields zero channels
        let empty = AlphaCluster {
            alpha: 0.5,
            spanning: false,
            spanning_component: Vec::new(),
            in_cluster: vec![false; t.num_sites()],
            vertex_set: Vec::new(),
            edge_set: Vec::new(),
            holes: Vec::new(),
        };
        let rep = channel_count(&empty, &t, &rect).unwrap();
        assert_eq!(rep.count, 0);

        // rectangle exiting the core is rejected
        let outside = ChannelRect {
            center: Point::new(7.0, 0.0),
            nu_deg: 0.0,
            t_len: 10.0,
            delta: 0.35,
        };
        assert!(matches!(
            channel_count(&cluster, &t, &outside),
            Err(Error::OutOfCore)
        ));
    }

    #[test]
    fn tau_alpha_tiny_alpha_matches_unrestricted_hops() {
        use crate::metric::estimate_tau;
        let mut cfg = TauConfig::new(1.0, vec![10.0], vec![0.0], vec![5, 6]);
        cfg.offset_fraction = 0.0;
        let base = estimate_tau(&cfg, None).unwrap();
        cfg.alpha = 1e-6;
        let restricted = tau_alpha(&cfg).unwrap();
        assert_eq!(restricted.rejections, 0);
        let base_hops: Vec<usize> = base.samples.iter().map(|s| s.hops).collect();
        let alpha_hops: Vec<usize> = restricted.estimate.samples.iter().map(|s| s.hops).collect();
        assert_eq!(base_hops, alpha_hops);
    }

    #[test]
    fn tau_alpha_rejects_oversized_alpha() {
        let mut cfg = TauConfig::new(1.0, vec![10.0], vec![0.0], vec![5, 6]);
        cfg.offset_fraction = 0.0;
        cfg.alpha = 10.0;
        assert!(matches!(tau_alpha(&cfg), Err(Error::AlphaTooLarge(_))));
    }

    #[test]
    fn cluster_filter_restricts_hops() {
        let t = tess(25, 9.0);
        let report = classify_regular(&t, 0.1).unwrap();
        let cluster = alpha_cluster(&report, &t).unwrap();
        if !cluster.spanning {
            return;
        }
        let filter = cluster.filter(&t);
        let a = crate::metric::project_vertex(&t, Point::new(-5.0, 0.0), MetricGraph::Voronoi, Some(&filter)).unwrap();
        let b = crate::metric::project_vertex(&t, Point::new(5.0, 0.0), MetricGraph::Voronoi, Some(&filter)).unwrap();
        let restricted = crate::metric::hop_distance(&t, a, b, MetricGraph::Voronoi, Some(&filter));
        if let Ok(r) = restricted {
            let free = crate::metric::hop_distance(&t, a, b, MetricGraph::Voronoi, None).unwrap();
            assert!(r.hops >= free.hops);
        }
    }

    #[test]
    fn soundness_report_runs_clean_on_a_lattice() {
        let l = 1.0;
        let mut sites = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                let jig = ((i * 5 + j * 3) % 7) as f64 * 0.02;
                sites.push(Point::new(-20.0 + (i as f64 + 0.4 + jig), -20.0 + (j as f64 + 0.4 + jig)));
            }
        }
        let pts = manual_points(sites, 20.0, 0.0);
        let t = build_tessellation(&pts).unwrap();
        let grid = classify_blocks(&pts, l, 200, 0.05).unwrap();
        let report = block_soundness(&t, &grid).unwrap();
        if report.pairs_checked > 0 {
            assert_eq!(report.containment_violations, 0);
            assert_eq!(report.edge_count_violations, 0);
        }
    }
}
