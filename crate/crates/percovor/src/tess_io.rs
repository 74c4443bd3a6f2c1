//! Tessellation export/import as JSON.
//!
//! Coordinates are written in decimal with 17 significant digits, which
//! round-trips every IEEE-754 double exactly. The schema is documented in the
//! project README.

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::geometry::{Cell, DualEdge, Edge, PointSet, Tessellation, VoronoiVertex, Window};
use serde_json::Value;
use std::fmt::Write as _;

pub const SCHEMA: &str = "percovor-tessellation-v1";

/// 17 significant digits, enough to reproduce the exact double.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_json(tess: &Tessellation) -> String {
    let mut s = String::new();
    let w = &tess.points.window;
    write!(
        s,
        "{{\n\"schema\": \"{SCHEMA}\",\n\"intensity\": {},\n\"seed\": {},\n\"window\": {{\"center\": [{}, {}], \"half_width\": {}, \"buffer\": {}}},\n",
        fmt_f64(tess.points.intensity),
        tess.points.seed,
        fmt_f64(w.center.x),
        fmt_f64(w.center.y),
        fmt_f64(w.half_width),
        fmt_f64(w.buffer),
    )
    .unwrap();

    s.push_str("\"sites\": {\"x\": [");
    push_joined(&mut s, tess.points.sites.iter().map(|p| fmt_f64(p.x)));
    s.push_str("], \"y\": [");
    push_joined(&mut s, tess.points.sites.iter().map(|p| fmt_f64(p.y)));
    s.push_str("]},\n");

    s.push_str("\"delaunay_edges\": [");
    push_joined(
        &mut s,
        tess.edges.iter().map(|e| format!("[{}, {}]", e.sites.0, e.sites.1)),
    );
    s.push_str("],\n");

    s.push_str("\"voronoi_vertices\": [\n");
    push_joined_sep(
        &mut s,
        tess.vertices.iter().map(|v| {
            format!(
                "{{\"x\": {}, \"y\": {}, \"circumradius\": {}, \"sites\": [{}, {}, {}], \"certified\": {}}}",
                fmt_f64(v.pos.x),
                fmt_f64(v.pos.y),
                fmt_f64(v.circumradius),
                v.sites[0],
                v.sites[1],
                v.sites[2],
                v.certified
            )
        }),
        ",\n",
    );
    s.push_str("\n],\n");

    let mut bounded = Vec::new();
    let mut unbounded = Vec::new();
    for (eid, e) in tess.edges.iter().enumerate() {
        match e.dual {
            DualEdge::Bounded { v0, v1 } => bounded.push(format!(
                "{{\"edge\": {eid}, \"v\": [{v0}, {v1}], \"sites\": [{}, {}]}}",
                e.sites.0, e.sites.1
            )),
            DualEdge::Unbounded { v, dir } => unbounded.push(format!(
                "{{\"edge\": {eid}, \"v\": {v}, \"dir\": [{}, {}], \"sites\": [{}, {}]}}",
                fmt_f64(dir.x),
                fmt_f64(dir.y),
                e.sites.0,
                e.sites.1
            )),
        }
    }
    s.push_str("\"voronoi_edges\": [\n");
    push_joined_sep(&mut s, bounded.into_iter(), ",\n");
    s.push_str("\n],\n\"unbounded_voronoi_edges\": [\n");
    push_joined_sep(&mut s, unbounded.into_iter(), ",\n");
    s.push_str("\n],\n");

    s.push_str("\"cells\": [\n");
    push_joined_sep(
        &mut s,
        tess.cells.iter().map(|c| {
            let ring = match &c.ring {
                Some(r) => {
                    let ids: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                    format!("[{}]", ids.join(", "))
                }
                None => "null".to_string(),
            };
            let poly: Vec<String> = c
                .polygon
                .iter()
                .map(|p| format!("[{}, {}]", fmt_f64(p.x), fmt_f64(p.y)))
                .collect();
            format!(
                "{{\"site\": {}, \"clipped\": {}, \"certified\": {}, \"ring\": {}, \"polygon\": [{}]}}",
                c.site,
                c.clipped,
                c.certified,
                ring,
                poly.join(", ")
            )
        }),
        ",\n",
    );
    s.push_str("\n]\n}\n");
    s
}

fn push_joined(s: &mut String, items: impl Iterator<Item = String>) {
    push_joined_sep(s, items, ", ");
}

fn push_joined_sep(s: &mut String, items: impl Iterator<Item = String>, sep: &str) {
    let mut first = true;
    for item in items {
        if !first {
            s.push_str(sep);
        }
        s.push_str(&item);
        first = false;
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadTessellationFile(msg.into())
}

fn get<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| bad(format!("missing key '{key}'")))
}

fn as_f64(v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| bad("expected number"))
}

fn as_u32(v: &Value) -> Result<u32> {
    v.as_u64()
        .and_then(|x| u32::try_from(x).ok())
        .ok_or_else(|| bad("expected small unsigned integer"))
}

fn as_point(v: &Value) -> Result<Point> {
    let arr = v.as_array().ok_or_else(|| bad("expected [x, y]"))?;
    if arr.len() != 2 {
        return Err(bad("expected [x, y]"));
    }
    Ok(Point::new(as_f64(&arr[0])?, as_f64(&arr[1])?))
}

pub fn from_json(text: &str) -> Result<Tessellation> {
    let root: Value = serde_json::from_str(text)?;
    if get(&root, "schema")?.as_str() != Some(SCHEMA) {
        return Err(bad(format!("unknown schema, expected {SCHEMA}")));
    }
    let wv = get(&root, "window")?;
    let window = Window::new(
        as_point(get(wv, "center")?)?,
        as_f64(get(wv, "half_width")?)?,
        as_f64(get(wv, "buffer")?)?,
    )?;
    let sites_v = get(&root, "sites")?;
    let xs = get(sites_v, "x")?.as_array().ok_or_else(|| bad("sites.x"))?;
    let ys = get(sites_v, "y")?.as_array().ok_or_else(|| bad("sites.y"))?;
    if xs.len() != ys.len() {
        return Err(bad("sites.x and sites.y lengths differ"));
    }
    let sites: Vec<Point> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| Ok(Point::new(as_f64(x)?, as_f64(y)?)))
        .collect::<Result<_>>()?;
    let n_sites = sites.len();
    let points = PointSet {
        sites,
        intensity: as_f64(get(&root, "intensity")?)?,
        window,
        seed: get(&root, "seed")?.as_u64().ok_or_else(|| bad("seed"))?,
    };

    let vertices: Vec<VoronoiVertex> = get(&root, "voronoi_vertices")?
        .as_array()
        .ok_or_else(|| bad("voronoi_vertices"))?
        .iter()
        .map(|v| {
            let sv = get(v, "sites")?.as_array().ok_or_else(|| bad("vertex sites"))?;
            if sv.len() != 3 {
                return Err(bad("vertex needs 3 sites"));
            }
            Ok(VoronoiVertex {
                pos: Point::new(as_f64(get(v, "x")?)?, as_f64(get(v, "y")?)?),
                circumradius: as_f64(get(v, "circumradius")?)?,
                sites: [as_u32(&sv[0])?, as_u32(&sv[1])?, as_u32(&sv[2])?],
                certified: get(v, "certified")?.as_bool().ok_or_else(|| bad("certified"))?,
            })
        })
        .collect::<Result<_>>()?;
    let n_vertices = vertices.len() as u32;

    let edge_pairs: Vec<(u32, u32)> = get(&root, "delaunay_edges")?
        .as_array()
        .ok_or_else(|| bad("delaunay_edges"))?
        .iter()
        .map(|e| {
            let arr = e.as_array().ok_or_else(|| bad("edge pair"))?;
            if arr.len() != 2 {
                return Err(bad("edge pair"));
            }
            Ok((as_u32(&arr[0])?, as_u32(&arr[1])?))
        })
        .collect::<Result<_>>()?;

    let mut duals: Vec<Option<DualEdge>> = vec![None; edge_pairs.len()];
    for ev in get(&root, "voronoi_edges")?.as_array().ok_or_else(|| bad("voronoi_edges"))? {
        let eid = as_u32(get(ev, "edge")?)? as usize;
        let vv = get(ev, "v")?.as_array().ok_or_else(|| bad("voronoi edge v"))?;
        let (v0, v1) = (as_u32(&vv[0])?, as_u32(&vv[1])?);
        if v0 >= n_vertices || v1 >= n_vertices {
            return Err(bad("voronoi edge vertex out of range"));
        }
        *duals.get_mut(eid).ok_or_else(|| bad("edge id out of range"))? =
            Some(DualEdge::Bounded { v0, v1 });
    }
    for ev in get(&root, "unbounded_voronoi_edges")?
        .as_array()
        .ok_or_else(|| bad("unbounded_voronoi_edges"))?
    {
        let eid = as_u32(get(ev, "edge")?)? as usize;
        let v = as_u32(get(ev, "v")?)?;
        if v >= n_vertices {
            return Err(bad("voronoi edge vertex out of range"));
        }
        *duals.get_mut(eid).ok_or_else(|| bad("edge id out of range"))? = Some(DualEdge::Unbounded {
            v,
            dir: as_point(get(ev, "dir")?)?,
        });
    }
    let edges: Vec<Edge> = edge_pairs
        .iter()
        .zip(&duals)
        .enumerate()
        .map(|(eid, (&(i, j), dual))| {
            if i as usize >= n_sites || j as usize >= n_sites {
                return Err(bad("delaunay edge site out of range"));
            }
            Ok(Edge {
                sites: (i, j),
                dual: dual.ok_or_else(|| bad(format!("edge {eid} has no dual")))?,
            })
        })
        .collect::<Result<_>>()?;

    let cells: Vec<Cell> = get(&root, "cells")?
        .as_array()
        .ok_or_else(|| bad("cells"))?
        .iter()
        .map(|cv| {
            let ring = match get(cv, "ring")? {
                Value::Null => None,
                Value::Array(arr) => Some(
                    arr.iter()
                        .map(|v| {
                            let id = as_u32(v)?;
                            if id >= n_vertices {
                                return Err(bad("ring vertex out of range"));
                            }
                            Ok(id)
                        })
                        .collect::<Result<Vec<u32>>>()?,
                ),
                _ => return Err(bad("ring")),
            };
            Ok(Cell {
                site: as_u32(get(cv, "site")?)?,
                polygon: get(cv, "polygon")?
                    .as_array()
                    .ok_or_else(|| bad("polygon"))?
                    .iter()
                    .map(as_point)
                    .collect::<Result<_>>()?,
                ring,
                clipped: get(cv, "clipped")?.as_bool().ok_or_else(|| bad("clipped"))?,
                certified: get(cv, "certified")?.as_bool().ok_or_else(|| bad("certified"))?,
            })
        })
        .collect::<Result<_>>()?;
    if cells.len() != n_sites {
        return Err(bad("cell count does not match site count"));
    }

    let mut site_adjacency: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n_sites];
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

    Ok(Tessellation {
        points,
        edges,
        vertices,
        cells,
        site_adjacency,
        vertex_adjacency,
    })
}
