//! The chemical distance on the Voronoi vertex graph: projection of planar
//! points onto the nearest certified vertex, hop-count shortest paths, and
//! Monte-Carlo estimation of the linear growth rate tau of the distance
//! between the projections of 0 and t*v.
//!
//! All functions also work on an optional vertex filter, which restricts
//! paths and projections to the vertices of a regular-cell cluster.

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::geometry::{build_tessellation, sample_poisson, Tessellation, Window};
use crate::util::{ci_halfwidth, mean, mix_seed};
use rayon::prelude::*;
use std::collections::VecDeque;

/// Which adjacency the hop metric runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricGraph {
    /// Voronoi vertices joined by Voronoi edges (the default).
    Voronoi,
    /// Sites joined by Delaunay edges; projections go to the nearest site.
    Delaunay,
}

/// Restriction of the metric to a subset of vertices, typically the vertex
/// set of an alpha-cluster. `eligible` is indexed by vertex id (or site id
/// for the Delaunay graph).
#[derive(Debug, Clone, PartialEq)]
pub struct VertexFilter {
    pub alpha: f64,
    pub eligible: Vec<bool>,
    /// Optional restriction by edge id: a cluster's edge set is smaller than
    /// the set of edges between its vertices.
    pub edge_eligible: Option<Vec<bool>>,
}

impl VertexFilter {
    pub fn all(alpha: f64, n: usize) -> Self {
        VertexFilter { alpha, eligible: vec![true; n], edge_eligible: None }
    }
}

/// Shortest hop path between two projections.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDistanceResult {
    pub hops: usize,
    /// Vertex ids from `start_vertex` to `end_vertex`; length = hops + 1.
    pub path: Vec<u32>,
    pub start_vertex: u32,
    pub end_vertex: u32,
    /// 0 when the metric was unrestricted.
    pub restricted_alpha: f64,
}

fn vertex_positions(tess: &Tessellation, graph: MetricGraph) -> Vec<Point> {
    match graph {
        MetricGraph::Voronoi => tess.vertices.iter().map(|v| v.pos).collect(),
        MetricGraph::Delaunay => tess.points.sites.clone(),
    }
}

fn is_eligible(tess: &Tessellation, graph: MetricGraph, filter: Option<&VertexFilter>, v: usize) -> bool {
    let base = match graph {
        MetricGraph::Voronoi => tess.vertices[v].certified,
        MetricGraph::Delaunay => tess.cells[v].certified,
    };
    base && filter.is_none_or(|f| f.eligible[v])
}

/// Nearest eligible vertex to `x`; ties go to the lowest id.
pub fn project_vertex(
    tess: &Tessellation,
    x: Point,
    graph: MetricGraph,
    filter: Option<&VertexFilter>,
) -> Result<u32> {
    let positions = vertex_positions(tess, graph);
    let mut best: Option<(f64, u32)> = None;
    for (i, p) in positions.iter().enumerate() {
        if !is_eligible(tess, graph, filter, i) {
            continue;
        }
        let d = x.dist(*p);
        // strict `<` keeps the lowest id among exact ties
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i as u32));
        }
    }
    best.map(|(_, i)| i).ok_or(Error::EmptyTarget)
}

fn adjacency(tess: &Tessellation, graph: MetricGraph) -> &[Vec<(u32, u32)>] {
    match graph {
        MetricGraph::Voronoi => &tess.vertex_adjacency,
        MetricGraph::Delaunay => &tess.site_adjacency,
    }
}

/// Size of the connected component of `start` in the (filtered) graph.
fn component_size(
    adj: &[Vec<(u32, u32)>],
    start: u32,
    allowed: impl Fn(usize) -> bool,
    edge_ok: impl Fn(u32) -> bool,
) -> usize {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start as usize] = true;
    let mut size = 0;
    while let Some(v) = queue.pop_front() {
        size += 1;
        for &(w, eid) in &adj[v as usize] {
            if !seen[w as usize] && allowed(w as usize) && edge_ok(eid) {
                seen[w as usize] = true;
                queue.push_back(w);
            }
        }
    }
    size
}

/// Minimal number of edges between two vertices, by breadth-first search.
/// Path vertices obey the filter; a disconnected pair is an error carrying
/// both component sizes.
pub fn hop_distance(
    tess: &Tessellation,
    v1: u32,
    v2: u32,
    graph: MetricGraph,
    filter: Option<&VertexFilter>,
) -> Result<GraphDistanceResult> {
    let adj = adjacency(tess, graph);
    let n = adj.len();
    if v1 as usize >= n || v2 as usize >= n {
        return Err(Error::InvalidArgument(format!(
            "vertex id out of range: {} / {} (n = {n})",
            v1, v2
        )));
    }
    // uncertified boundary vertices carry window-artifact edges that would
    // shortcut long distances; paths stay on certified structure
    let allowed = |v: usize| is_eligible(tess, graph, filter, v);
    let edge_ok = |eid: u32| {
        filter.is_none_or(|f| f.edge_eligible.as_ref().is_none_or(|ee| ee[eid as usize]))
    };
    if !allowed(v1 as usize) || !allowed(v2 as usize) {
        return Err(Error::InvalidArgument(
            "endpoint vertex excluded by the filter".into(),
        ));
    }
    let restricted_alpha = filter.map_or(0.0, |f| f.alpha);
    let mut parent: Vec<u32> = vec![u32::MAX; n];
    parent[v1 as usize] = v1;
    let mut queue = VecDeque::from([v1]);
    while let Some(v) = queue.pop_front() {
        if v == v2 {
            let mut path = vec![v2];
            let mut cur = v2;
            while cur != v1 {
                cur = parent[cur as usize];
                path.push(cur);
            }
            path.reverse();
            return Ok(GraphDistanceResult {
                hops: path.len() - 1,
                path,
                start_vertex: v1,
                end_vertex: v2,
                restricted_alpha,
            });
        }
        for &(w, eid) in &adj[v as usize] {
            if parent[w as usize] == u32::MAX && allowed(w as usize) && edge_ok(eid) {
                parent[w as usize] = v;
                queue.push_back(w);
            }
        }
    }
    Err(Error::Disconnected(
        component_size(adj, v1, allowed, edge_ok),
        component_size(adj, v2, &allowed, &edge_ok),
    ))
}

/// One row of the tau ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct TauSample {
    pub seed: u64,
    pub intensity: f64,
    pub alpha: f64,
    pub t: f64,
    pub dir_deg: f64,
    /// Start offset of the pair (x, x + t*v); (0,0) for the main samples.
    pub offset: Point,
    pub hops: usize,
    pub tau_sample: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauEstimate {
    pub samples: Vec<TauSample>,
    /// Mean of hops/t over the zero-offset samples at the largest t.
    pub tau_hat: f64,
    pub ci_halfwidth: f64,
    /// Direction (degrees) -> mean of hops/t at the largest t, sorted.
    pub per_direction: Vec<(f64, f64)>,
    pub alpha: f64,
    pub n_samples: usize,
}

/// Ensemble configuration for [`estimate_tau`].
#[derive(Clone)]
pub struct TauConfig {
    pub intensity: f64,
    pub ts: Vec<f64>,
    /// Directions in degrees.
    pub directions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub alpha: f64,
    pub graph: MetricGraph,
    /// Core half-width as a multiple of t; must leave an endpoint margin of
    /// at least 0.1 t, i.e. factor >= 0.6.
    pub half_width_factor: f64,
    /// Buffer override; default 6 / sqrt(intensity).
    pub buffer: Option<f64>,
    /// |offset| as a multiple of t for the uniformity probes; 0 disables them.
    pub offset_fraction: f64,
}

impl TauConfig {
    pub fn new(intensity: f64, ts: Vec<f64>, directions: Vec<f64>, seeds: Vec<u64>) -> Self {
        TauConfig {
            intensity,
            ts,
            directions,
            seeds,
            alpha: 0.0,
            graph: MetricGraph::Voronoi,
            half_width_factor: 0.625,
            buffer: None,
            offset_fraction: 0.025,
        }
    }
}

/// Builds the per-sample tessellation for the pair (0, t*v): window centered
/// at the midpoint t*v/2 with half-width `factor * t`.
pub fn tau_sample_window(cfg: &TauConfig, t: f64, dir_deg: f64) -> Result<Window> {
    let needed = 0.6 * t;
    let have = cfg.half_width_factor * t;
    if have < needed {
        return Err(Error::WindowTooSmall { needed, have });
    }
    let v = direction(dir_deg);
    let buffer = cfg
        .buffer
        .unwrap_or_else(|| Window::default_buffer(cfg.intensity));
    Window::new(v.scale(t / 2.0), have, buffer)
}

pub fn direction(dir_deg: f64) -> Point {
    let r = dir_deg.to_radians();
    Point::new(r.cos(), r.sin())
}

/// Measures hops between the projections of `x0` and `x1` on a fresh
/// tessellation; shared by the main and offset probes.
fn measure_pair(
    tess: &Tessellation,
    x0: Point,
    x1: Point,
    graph: MetricGraph,
    filter: Option<&VertexFilter>,
) -> Result<usize> {
    let a = project_vertex(tess, x0, graph, filter)?;
    let b = project_vertex(tess, x1, graph, filter)?;
    Ok(hop_distance(tess, a, b, graph, filter)?.hops)
}

pub type FilterFn<'a> = dyn Fn(&Tessellation) -> Result<Option<VertexFilter>> + Sync + 'a;

/// Produces the tessellation and optional vertex filter for one ensemble
/// task, given its window and sub-seed. Lets callers resample or restrict.
pub type SampleFn<'a> = dyn Fn(Window, u64) -> Result<(Tessellation, Option<VertexFilter>)> + Sync + 'a;

/// Estimates tau over the (seed, t, direction) ensemble. Each task samples a
/// fresh tessellation from a sub-seed of the task key, measures hops between
/// the projections of 0 and t*v, and optionally an offset pair
/// (o, o + t*v) with |o| = offset_fraction * t perpendicular to v. Tasks run
/// in parallel; rows are sorted by (seed, t, direction, offset) so output is
/// independent of scheduling.
pub fn estimate_tau(cfg: &TauConfig, filter_fn: Option<&FilterFn>) -> Result<TauEstimate> {
    let intensity = cfg.intensity;
    estimate_tau_with(cfg, &move |window, sub_seed| {
        let points = sample_poisson(intensity, window, sub_seed)?;
        let tess = build_tessellation(&points)?;
        let filter = match filter_fn {
            Some(f) => f(&tess)?,
            None => None,
        };
        Ok((tess, filter))
    })
}

/// [`estimate_tau`] with a custom per-task sampler.
pub fn estimate_tau_with(cfg: &TauConfig, sample_fn: &SampleFn) -> Result<TauEstimate> {
    if cfg.seeds.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 seeds for an ensemble estimate".into(),
        ));
    }
    if cfg.ts.is_empty() || cfg.directions.is_empty() {
        return Err(Error::InvalidArgument("empty t or direction list".into()));
    }
    for &t in &cfg.ts {
        tau_sample_window(cfg, t, 0.0)?;
    }
    let mut tasks = Vec::new();
    for &seed in &cfg.seeds {
        for (ti, &t) in cfg.ts.iter().enumerate() {
            for (di, &dir) in cfg.directions.iter().enumerate() {
                tasks.push((seed, ti, t, di, dir));
            }
        }
    }
    let mut rows: Vec<((u64, usize, usize, u8), TauSample)> = tasks
        .par_iter()
        .map(|&(seed, ti, t, di, dir)| {
            let window = tau_sample_window(cfg, t, dir)?;
            let sub_seed = mix_seed(&[seed, t.to_bits(), di as u64, cfg.graph as u64]);
            let (tess, filter) = sample_fn(window, sub_seed)?;
            let v = direction(dir);
            let mut out = Vec::with_capacity(2);
            let hops = measure_pair(&tess, Point::new(0.0, 0.0), v.scale(t), cfg.graph, filter.as_ref())?;
            out.push((
                (seed, ti, di, 0u8),
                TauSample {
                    seed,
                    intensity: cfg.intensity,
                    alpha: cfg.alpha,
                    t,
                    dir_deg: dir,
                    offset: Point::new(0.0, 0.0),
                    hops,
                    tau_sample: hops as f64 / t,
                },
            ));
            if cfg.offset_fraction > 0.0 {
                let o = v.perp().scale(cfg.offset_fraction * t);
                let hops = measure_pair(&tess, o, o + v.scale(t), cfg.graph, filter.as_ref())?;
                out.push((
                    (seed, ti, di, 1u8),
                    TauSample {
                        seed,
                        intensity: cfg.intensity,
                        alpha: cfg.alpha,
                        t,
                        dir_deg: dir,
                        offset: o,
                        hops,
                        tau_sample: hops as f64 / t,
                    },
                ));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let samples: Vec<TauSample> = rows.into_iter().map(|(_, s)| s).collect();

    let t_max = cfg.ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let at_max: Vec<&TauSample> = samples
        .iter()
        .filter(|s| s.t == t_max && s.offset == Point::new(0.0, 0.0))
        .collect();
    let values: Vec<f64> = at_max.iter().map(|s| s.tau_sample).collect();
    let mut per_direction = Vec::new();
    for &dir in &cfg.directions {
        let vals: Vec<f64> = at_max
            .iter()
            .filter(|s| s.dir_deg == dir)
            .map(|s| s.tau_sample)
            .collect();
        per_direction.push((dir, mean(&vals)));
    }
    per_direction.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(TauEstimate {
        tau_hat: mean(&values),
        ci_halfwidth: ci_halfwidth(&values),
        per_direction,
        alpha: cfg.alpha,
        n_samples: samples.len(),
        samples,
    })
}

/// How far the path strays from `x`, relative to M*t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtentReport {
    pub max_distance: f64,
    /// max_distance / (M * t); bounded by a t-independent constant for
    /// shortest paths started near x.
    pub extent: f64,
}

pub fn path_extent_check(
    tess: &Tessellation,
    result: &GraphDistanceResult,
    graph: MetricGraph,
    x: Point,
    t: f64,
    m_bound: f64,
) -> Result<ExtentReport> {
    if !(t > 0.0 && m_bound > 0.0) {
        return Err(Error::InvalidArgument("t and M must be positive".into()));
    }
    if result.hops as f64 > t * m_bound {
        return Err(Error::InvalidArgument(format!(
            "hops {} exceeds M*t = {}",
            result.hops,
            t * m_bound
        )));
    }
    let positions = vertex_positions(tess, graph);
    let max_distance = result
        .path
        .iter()
        .map(|&v| x.dist(positions[v as usize]))
        .fold(0.0f64, f64::max);
    Ok(ExtentReport {
        max_distance,
        extent: max_distance / (m_bound * t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointSet;
    use std::collections::BinaryHeap;

    fn tess(seed: u64, half_width: f64) -> Tessellation {
        let w = Window::new(Point::new(0.0, 0.0), half_width, 6.0).unwrap();
        build_tessellation(&sample_poisson(1.0, w, seed).unwrap()).unwrap()
    }

    #[test]
    fn projection_trivial_cases() {
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
        let t = build_tessellation(&pts).unwrap();
        // single Voronoi vertex: every query projects onto it
        assert_eq!(project_vertex(&t, Point::new(-3.0, 9.0), MetricGraph::Voronoi, None).unwrap(), 0);
        let v = t.vertices[0].pos;
        assert_eq!(project_vertex(&t, v, MetricGraph::Voronoi, None).unwrap(), 0);
    }

    #[test]
    fn projection_matches_linear_scan_oracle() {
        let t = tess(11, 12.0);
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        for _ in 0..1000 {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let x = Point::new(
                ((rng_state >> 16) % 2000) as f64 / 100.0 - 10.0,
                ((rng_state >> 40) % 2000) as f64 / 100.0 - 10.0,
            );
            let got = project_vertex(&t, x, MetricGraph::Voronoi, None).unwrap();
            // oracle: independent scan over certified vertices, lowest id wins ties
            let mut best = None;
            for (i, v) in t.vertices.iter().enumerate() {
                if !v.certified {
                    continue;
                }
                let d = x.dist(v.pos);
                match best {
                    None => best = Some((d, i as u32)),
                    Some((bd, _)) if d < bd => best = Some((d, i as u32)),
                    _ => {}
                }
            }
            assert_eq!(got, best.unwrap().1);
        }
    }

    #[test]
    fn hop_trivial_cases() {
        let t = tess(12, 10.0);
        let v = project_vertex(&t, Point::new(0.0, 0.0), MetricGraph::Voronoi, None).unwrap();
        let r = hop_distance(&t, v, v, MetricGraph::Voronoi, None).unwrap();
        assert_eq!(r.hops, 0);
        assert_eq!(r.path, vec![v]);
        let (w, _) = t.vertex_adjacency[v as usize][0];
        let r = hop_distance(&t, v, w, MetricGraph::Voronoi, None).unwrap();
        assert_eq!(r.hops, 1);
    }

    /// Unit-weight Dijkstra over the certified vertices, written
    /// independently of the BFS.
    fn dijkstra_oracle(adj: &[Vec<(u32, u32)>], certified: &[bool], a: u32, b: u32) -> Option<usize> {
        let mut dist = vec![usize::MAX; adj.len()];
        dist[a as usize] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(std::cmp::Reverse((0usize, a)));
        while let Some(std::cmp::Reverse((d, v))) = heap.pop() {
            if d > dist[v as usize] {
                continue;
            }
            if v == b {
                return Some(d);
            }
            for &(w, _) in &adj[v as usize] {
                if certified[w as usize] && d + 1 < dist[w as usize] {
                    dist[w as usize] = d + 1;
                    heap.push(std::cmp::Reverse((d + 1, w)));
                }
            }
        }
        None
    }

    #[test]
    fn hops_match_dijkstra_oracle() {
        let t = tess(13, 11.0);
        let certified: Vec<bool> = t.vertices.iter().map(|v| v.certified).collect();
        let ids: Vec<u32> = (0..t.vertices.len() as u32)
            .filter(|&v| certified[v as usize])
            .collect();
        let n = ids.len() as u64;
        let mut s = 42u64;
        for _ in 0..50 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(7);
            let a = ids[((s >> 8) % n) as usize];
            let b = ids[((s >> 33) % n) as usize];
            let oracle = dijkstra_oracle(&t.vertex_adjacency, &certified, a, b);
            match hop_distance(&t, a, b, MetricGraph::Voronoi, None) {
                Ok(r) => {
                    assert_eq!(Some(r.hops), oracle);
                    assert_eq!(r.path.len(), r.hops + 1);
                    // consecutive path vertices share an edge, no repeats
                    let mut seen = std::collections::HashSet::new();
                    for pair in r.path.windows(2) {
                        assert!(t.vertex_adjacency[pair[0] as usize]
                            .iter()
                            .any(|&(w, _)| w == pair[1]));
                    }
                    assert!(r.path.iter().all(|v| seen.insert(*v)));
                }
                Err(Error::Disconnected(_, _)) => assert_eq!(oracle, None),
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn symmetry_and_subadditivity() {
        let t = tess(14, 9.0);
        let pick = |x: f64, y: f64| {
            project_vertex(&t, Point::new(x, y), MetricGraph::Voronoi, None).unwrap()
        };
        let (a, b, c) = (pick(-6.0, -6.0), pick(0.0, 5.0), pick(6.0, -2.0));
        let d = |u, v| hop_distance(&t, u, v, MetricGraph::Voronoi, None).unwrap().hops;
        assert_eq!(d(a, b), d(b, a));
        assert!(d(a, c) <= d(a, b) + d(b, c));
    }

    #[test]
    fn restriction_never_shortens() {
        let t = tess(15, 9.0);
        let a = project_vertex(&t, Point::new(-5.0, 0.0), MetricGraph::Voronoi, None).unwrap();
        let b = project_vertex(&t, Point::new(5.0, 0.0), MetricGraph::Voronoi, None).unwrap();
        let full = hop_distance(&t, a, b, MetricGraph::Voronoi, None).unwrap().hops;
        // drop every third vertex that is not on the unrestricted geodesic
        let unrestricted = hop_distance(&t, a, b, MetricGraph::Voronoi, None).unwrap();
        let mut eligible = vec![true; t.vertices.len()];
        for i in (0..t.vertices.len()).step_by(3) {
            eligible[i] = false;
        }
        for &v in &unrestricted.path {
            eligible[v as usize] = true;
        }
        let filter = VertexFilter { alpha: 0.1, eligible, edge_eligible: None };
        let restricted = hop_distance(&t, a, b, MetricGraph::Voronoi, Some(&filter)).unwrap();
        assert!(restricted.hops >= full);
        assert_eq!(restricted.restricted_alpha, 0.1);
    }

    #[test]
    fn disconnected_pair_reports_component_sizes() {
        let t = tess(16, 8.0);
        let a = project_vertex(&t, Point::new(-4.0, 0.0), MetricGraph::Voronoi, None).unwrap();
        let b = project_vertex(&t, Point::new(4.0, 0.0), MetricGraph::Voronoi, None).unwrap();
        assert_ne!(a, b);
        let mut eligible = vec![false; t.vertices.len()];
        eligible[a as usize] = true;
        eligible[b as usize] = true;
        let filter = VertexFilter { alpha: 0.0, eligible, edge_eligible: None };
        match hop_distance(&t, a, b, MetricGraph::Voronoi, Some(&filter)) {
            Err(Error::Disconnected(ca, cb)) => {
                assert_eq!((ca, cb), (1, 1));
            }
            other => panic!("expected disconnected error, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_ensemble_is_the_plain_mean() {
        let mut cfg = TauConfig::new(1.0, vec![12.0], vec![0.0], vec![1, 2, 3]);
        cfg.offset_fraction = 0.0;
        let est = estimate_tau(&cfg, None).unwrap();
        assert_eq!(est.n_samples, 3);
        let m = mean(&est.samples.iter().map(|s| s.tau_sample).collect::<Vec<_>>());
        assert_eq!(est.tau_hat, m);
        assert!(est.tau_hat > 0.0);
        // replay determinism
        let again = estimate_tau(&cfg, None).unwrap();
        assert_eq!(again.samples, est.samples);
        assert_eq!(again.tau_hat, est.tau_hat);
    }

    #[test]
    fn window_too_small_is_an_error() {
        let mut cfg = TauConfig::new(1.0, vec![50.0], vec![0.0], vec![1, 2]);
        cfg.half_width_factor = 0.55;
        assert!(matches!(
            estimate_tau(&cfg, None),
            Err(Error::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn extent_of_zero_hop_path_is_small() {
        let t = tess(17, 9.0);
        let x = Point::new(0.0, 0.0);
        let v = project_vertex(&t, x, MetricGraph::Voronoi, None).unwrap();
        let r = hop_distance(&t, v, v, MetricGraph::Voronoi, None).unwrap();
        let rep = path_extent_check(&t, &r, MetricGraph::Voronoi, x, 100.0, 4.0).unwrap();
        assert_eq!(rep.max_distance, x.dist(t.vertices[v as usize].pos));
        assert!(rep.extent < 0.05);
    }

    #[test]
    fn straight_corridor_extent() {
        // sites on a slightly perturbed line of squares force geodesics along
        // the corridor: the farthest path point sits near the middle, at
        // distance about t/2 from the start, so extent ~ 1/(2M).
        let mut sites = Vec::new();
        for i in 0..61 {
            for j in -2..=2 {
                let jitter = ((i * 7 + j * 13) % 10) as f64 * 0.013;
                sites.push(Point::new(i as f64 + jitter, j as f64 + jitter * 0.7));
            }
        }
        let pts = PointSet {
            sites,
            intensity: 1.0,
            window: Window::new(Point::new(30.0, 0.0), 40.0, 0.0).unwrap(),
            seed: 0,
        };
        let t = build_tessellation(&pts).unwrap();
        // keep only the vertices inside the strip: the sliver triangles of
        // the outer rows have far-away circumcenters that would otherwise
        // bridge distant columns in one hop
        let eligible = t
            .vertices
            .iter()
            .map(|v| v.pos.y.abs() <= 3.5 && (-1.0..=61.0).contains(&v.pos.x))
            .collect();
        let filter = VertexFilter { alpha: 0.0, eligible, edge_eligible: None };
        let f = Some(&filter);
        let a = project_vertex(&t, Point::new(0.0, 0.0), MetricGraph::Voronoi, f).unwrap();
        let b = project_vertex(&t, Point::new(60.0, 0.0), MetricGraph::Voronoi, f).unwrap();
        let r = hop_distance(&t, a, b, MetricGraph::Voronoi, f).unwrap();
        let m = 4.0;
        // measured from the midpoint, the farthest path points are the two
        // endpoints at distance ~t/2, so extent ~ 1/(2M)
        let mid = Point::new(30.0, 0.0);
        let rep = path_extent_check(&t, &r, MetricGraph::Voronoi, mid, 60.0, m).unwrap();
        assert!(
            (rep.extent - 1.0 / (2.0 * m)).abs() < 0.15 / (2.0 * m),
            "extent {}",
            rep.extent
        );
    }

    #[test]
    fn delaunay_switch_runs() {
        let t = tess(18, 8.0);
        let a = project_vertex(&t, Point::new(-4.0, 0.0), MetricGraph::Delaunay, None).unwrap();
        let b = project_vertex(&t, Point::new(4.0, 0.0), MetricGraph::Delaunay, None).unwrap();
        let r = hop_distance(&t, a, b, MetricGraph::Delaunay, None).unwrap();
        assert!(r.hops >= 1);
    }
}
