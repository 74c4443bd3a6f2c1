//! Planar primitives: points, convex clipping, polygon measures and the
//! Chebyshev center of a convex polygon.

use serde::{Deserialize, Serialize};

/// A point (or vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    /// Counterclockwise rotation by 90 degrees.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Axis-aligned rectangle given by two opposite corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Rect { min, max }
    }

    pub fn centered(center: Point, half_width: f64) -> Self {
        Rect {
            min: Point::new(center.x - half_width, center.y - half_width),
            max: Point::new(center.x + half_width, center.y + half_width),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Whether the disk of given center and radius lies inside the rectangle.
    pub fn contains_disk(&self, center: Point, radius: f64) -> bool {
        center.x - radius >= self.min.x
            && center.x + radius <= self.max.x
            && center.y - radius >= self.min.y
            && center.y + radius <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            self.min,
            Point::new(self.max.x, self.min.y),
            self.max,
            Point::new(self.min.x, self.max.y),
        ]
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }
}

/// An oriented half-plane `{p : n . p <= c}` with outward normal `n`.
#[derive(Debug, Clone, Copy)]
pub struct HalfPlane {
    pub normal: Point,
    pub offset: f64,
}

impl HalfPlane {
    /// Half-plane of points at least as close to `a` as to `b` (the bisector
    /// side of `a`).
    pub fn bisector(a: Point, b: Point) -> Self {
        let normal = b - a;
        let mid = (a + b).scale(0.5);
        HalfPlane {
            normal,
            offset: normal.dot(mid),
        }
    }

    pub fn signed_excess(&self, p: Point) -> f64 {
        self.normal.dot(p) - self.offset
    }

    pub fn contains(&self, p: Point) -> bool {
        self.signed_excess(p) <= 0.0
    }
}

/// Signed area of a polygon (positive when counterclockwise).
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a.cross(b);
    }
    acc / 2.0
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

pub fn polygon_perimeter(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].dist(poly[(i + 1) % n])).sum()
}

/// Maximum pairwise vertex distance.
pub fn polygon_diameter(poly: &[Point]) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..poly.len() {
        for j in (i + 1)..poly.len() {
            best = best.max(poly[i].dist(poly[j]));
        }
    }
    best
}

pub fn polygon_bbox(poly: &[Point]) -> Rect {
    let mut min = Point::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in poly {
        min.x = min.x.min(p.x);
        min.y = min.y.min(p.y);
        max.x = max.x.max(p.x);
        max.y = max.y.max(p.y);
    }
    Rect::new(min, max)
}

/// Clips a convex polygon against a half-plane (one Sutherland-Hodgman pass).
pub fn clip_halfplane(poly: &[Point], hp: &HalfPlane) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        let dc = hp.signed_excess(cur);
        let dn = hp.signed_excess(next);
        if dc <= 0.0 {
            out.push(cur);
        }
        if (dc < 0.0 && dn > 0.0) || (dc > 0.0 && dn < 0.0) {
            let t = dc / (dc - dn);
            out.push(cur + (next - cur).scale(t));
        }
    }
    out
}

/// Clips a convex polygon to an axis-aligned rectangle.
pub fn clip_to_rect(poly: &[Point], rect: &Rect) -> Vec<Point> {
    let planes = [
        HalfPlane { normal: Point::new(-1.0, 0.0), offset: -rect.min.x },
        HalfPlane { normal: Point::new(1.0, 0.0), offset: rect.max.x },
        HalfPlane { normal: Point::new(0.0, -1.0), offset: -rect.min.y },
        HalfPlane { normal: Point::new(0.0, 1.0), offset: rect.max.y },
    ];
    let mut out = poly.to_vec();
    for hp in &planes {
        if out.is_empty() {
            break;
        }
        out = clip_halfplane(&out, hp);
    }
    out
}

/// Intersection area of two convex polygons.
pub fn convex_intersection_area(a: &[Point], b: &[Point]) -> f64 {
    if a.len() < 3 || b.len() < 3 {
        return 0.0;
    }
    let ccw_b: Vec<Point> = if signed_area(b) < 0.0 {
        b.iter().rev().copied().collect()
    } else {
        b.to_vec()
    };
    let mut out = a.to_vec();
    let n = ccw_b.len();
    for i in 0..n {
        if out.is_empty() {
            return 0.0;
        }
        let p = ccw_b[i];
        let q = ccw_b[(i + 1) % n];
        // inner side of directed edge p->q is the left side
        let normal = (q - p).perp().scale(-1.0);
        let hp = HalfPlane { normal, offset: normal.dot(p) };
        out = clip_halfplane(&out, &hp);
    }
    polygon_area(&out)
}

/// Even-odd point-in-polygon test. Points exactly on an edge may land on
/// either side; callers only use this for points in general position.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = poly[i];
        let b = poly[j];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Part of the segment inside the rectangle, by Liang-Barsky parameter
/// clipping; None when the segment misses the rectangle.
pub fn clip_segment_to_rect(a: Point, b: Point, r: Rect) -> Option<(Point, Point)> {
    let d = b - a;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (p, q) in [
        (-d.x, a.x - r.min.x),
        (d.x, r.max.x - a.x),
        (-d.y, a.y - r.min.y),
        (d.y, r.max.y - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
            continue;
        }
        let t = q / p;
        if p < 0.0 {
            t0 = t0.max(t);
        } else {
            t1 = t1.min(t);
        }
        if t0 > t1 {
            return None;
        }
    }
    Some((a + d.scale(t0), a + d.scale(t1)))
}

pub fn dist_point_segment(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab.scale(t))
}

/// Distance from a point to the boundary of a polygon.
pub fn dist_point_polygon_boundary(p: Point, poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| dist_point_segment(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn segments_properly_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != 0.0 && d2 != 0.0
}

/// Whether two convex polygons share at least one point (boundary contact
/// counts), by checking every edge normal as a separating axis.
pub fn convex_polygons_intersect(a: &[Point], b: &[Point]) -> bool {
    for (p, q) in [(a, b), (b, a)] {
        let n = p.len();
        for i in 0..n {
            let axis = (p[(i + 1) % n] - p[i]).perp();
            let (p_min, p_max) = project_extent(p, axis);
            let (q_min, q_max) = project_extent(q, axis);
            if p_max < q_min || q_max < p_min {
                return false;
            }
        }
    }
    true
}

fn project_extent(poly: &[Point], axis: Point) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &p in poly {
        let d = p.dot(axis);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// Whether a polygon and a segment meet: an endpoint lies inside, or the
/// segment properly crosses some edge. Grazing contacts along an edge may go
/// either way; callers use this on generic data.
pub fn polygon_intersects_segment(poly: &[Point], a: Point, b: Point) -> bool {
    if point_in_polygon(a, poly) || point_in_polygon(b, poly) {
        return true;
    }
    let n = poly.len();
    (0..n).any(|i| segments_properly_intersect(poly[i], poly[(i + 1) % n], a, b))
}

/// Checks that a closed polygon is simple (no two non-adjacent edges cross).
pub fn is_simple_polygon(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_properly_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Ear-clipping triangulation of a simple polygon. Returns triangles as
/// vertex triples.
pub fn triangulate(poly: &[Point]) -> Vec<[Point; 3]> {
    let mut pts: Vec<Point> = if signed_area(poly) < 0.0 {
        poly.iter().rev().copied().collect()
    } else {
        poly.to_vec()
    };
    let mut tris = Vec::with_capacity(pts.len().saturating_sub(2));
    while pts.len() > 3 {
        let n = pts.len();
        let mut clipped = false;
        for i in 0..n {
            let prev = pts[(i + n - 1) % n];
            let cur = pts[i];
            let next = pts[(i + 1) % n];
            if (cur - prev).cross(next - cur) <= 0.0 {
                continue; // reflex
            }
            let tri = [prev, cur, next];
            let any_inside = pts.iter().enumerate().any(|(j, &p)| {
                j != i && j != (i + n - 1) % n && j != (i + 1) % n && point_in_triangle(p, &tri)
            });
            if !any_inside {
                tris.push(tri);
                pts.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            // numerically degenerate remainder; drop the flattest vertex
            let i = flattest_vertex(&pts);
            pts.remove(i);
        }
    }
    if pts.len() == 3 {
        tris.push([pts[0], pts[1], pts[2]]);
    }
    tris
}

fn flattest_vertex(pts: &[Point]) -> usize {
    let n = pts.len();
    let mut best = (f64::INFINITY, 0);
    for i in 0..n {
        let prev = pts[(i + n - 1) % n];
        let next = pts[(i + 1) % n];
        let a = ((pts[i] - prev).cross(next - pts[i])).abs();
        if a < best.0 {
            best = (a, i);
        }
    }
    best.1
}

fn point_in_triangle(p: Point, tri: &[Point; 3]) -> bool {
    let d1 = (tri[1] - tri[0]).cross(p - tri[0]);
    let d2 = (tri[2] - tri[1]).cross(p - tri[1]);
    let d3 = (tri[0] - tri[2]).cross(p - tri[2]);
    let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(has_neg && has_pos)
}

/// Chebyshev center of a convex polygon: the center and radius of the largest
/// inscribed disk, found by enumerating bases of the 3-variable linear program
/// max r subject to n_k . c + r <= b_k over the supporting half-planes.
pub fn chebyshev_center(poly: &[Point]) -> Option<(Point, f64)> {
    let n = poly.len();
    if n < 3 {
        return None;
    }
    let ccw: Vec<Point> = if signed_area(poly) < 0.0 {
        poly.iter().rev().copied().collect()
    } else {
        poly.to_vec()
    };
    // unit outward normals of the supporting lines
    let mut planes = Vec::with_capacity(n);
    for i in 0..n {
        let a = ccw[i];
        let b = ccw[(i + 1) % n];
        let e = b - a;
        let len = e.norm();
        if len == 0.0 {
            continue;
        }
        let normal = e.perp().scale(-1.0 / len);
        planes.push(HalfPlane { normal, offset: normal.dot(a) });
    }
    let m = planes.len();
    let feasible = |c: Point, r: f64| -> bool {
        planes
            .iter()
            .all(|hp| hp.normal.dot(c) + r <= hp.offset + 1e-9 * (1.0 + hp.offset.abs()))
    };
    let mut best: Option<(Point, f64)> = None;
    let mut consider = |c: Point, r: f64| {
        if r >= 0.0 && feasible(c, r) && best.map_or(true, |(_, br)| r > br) {
            best = Some((c, r));
        }
    };
    // bases of three active constraints
    for i in 0..m {
        for j in (i + 1)..m {
            for k in (j + 1)..m {
                if let Some((c, r)) = solve3(&planes[i], &planes[j], &planes[k]) {
                    consider(c, r);
                }
            }
        }
    }
    // bases of two active constraints with antiparallel normals (slab optimum)
    for i in 0..m {
        for j in (i + 1)..m {
            let (pi, pj) = (&planes[i], &planes[j]);
            if pi.normal.cross(pj.normal).abs() < 1e-12 && pi.normal.dot(pj.normal) < 0.0 {
                let r = (pi.offset + pj.offset) / 2.0;
                // center midway between the lines, slid to stay feasible:
                // take the midpoint of the polygon's projection onto the slab axis
                let axis = pi.normal.perp();
                let base = pi.normal.scale(pi.offset - r);
                let ts: Vec<f64> = ccw.iter().map(|&p| axis.dot(p - base)).collect();
                let tmid = (ts.iter().cloned().fold(f64::INFINITY, f64::min)
                    + ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                    / 2.0;
                consider(base + axis.scale(tmid), r);
            }
        }
    }
    best
}

/// Intersection of three constraints n_k . c + r = b_k.
fn solve3(p1: &HalfPlane, p2: &HalfPlane, p3: &HalfPlane) -> Option<(Point, f64)> {
    // 3x3 linear system in (cx, cy, r)
    let a = [
        [p1.normal.x, p1.normal.y, 1.0],
        [p2.normal.x, p2.normal.y, 1.0],
        [p3.normal.x, p3.normal.y, 1.0],
    ];
    let b = [p1.offset, p2.offset, p3.offset];
    let det = det3(&a);
    if det.abs() < 1e-14 {
        return None;
    }
    let mut cols = [0.0f64; 3];
    for c in 0..3 {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        cols[c] = det3(&m) / det;
    }
    Some((Point::new(cols[0], cols[1]), cols[2]))
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square(side: f64) -> Vec<Point> {
        let h = side / 2.0;
        vec![
            Point::new(-h, -h),
            Point::new(h, -h),
            Point::new(h, h),
            Point::new(-h, h),
        ]
    }

    #[test]
    fn area_and_perimeter_of_square() {
        let sq = square(2.0);
        assert_relative_eq!(polygon_area(&sq), 4.0);
        assert_relative_eq!(polygon_perimeter(&sq), 8.0);
        assert_relative_eq!(polygon_diameter(&sq), 8.0f64.sqrt());
    }

    #[test]
    fn chebyshev_center_of_square() {
        let (c, r) = chebyshev_center(&square(2.0)).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-9);
        assert!(c.norm() < 1e-9);
    }

    #[test]
    fn chebyshev_center_of_equilateral_triangle() {
        let s = 3.0f64;
        let tri = vec![
            Point::new(0.0, 0.0),
            Point::new(s, 0.0),
            Point::new(s / 2.0, s * 3.0f64.sqrt() / 2.0),
        ];
        let (_, r) = chebyshev_center(&tri).unwrap();
        assert_relative_eq!(r, s / (2.0 * 3.0f64.sqrt()), epsilon = 1e-9);
    }

    #[test]
    fn clip_square_to_halfplane() {
        let sq = square(2.0);
        let hp = HalfPlane { normal: Point::new(1.0, 0.0), offset: 0.0 };
        let clipped = clip_halfplane(&sq, &hp);
        assert_relative_eq!(polygon_area(&clipped), 2.0);
    }

    #[test]
    fn convex_intersection_of_offset_squares() {
        let a = square(2.0);
        let b: Vec<Point> = square(2.0).iter().map(|p| *p + Point::new(1.0, 1.0)).collect();
        assert_relative_eq!(convex_intersection_area(&a, &b), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn triangulation_covers_polygon() {
        // L-shaped (non-convex) polygon of area 3
        let poly = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        let tris = triangulate(&poly);
        let total: f64 = tris.iter().map(|t| polygon_area(t)).sum();
        assert_relative_eq!(total, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn simple_polygon_detection() {
        assert!(is_simple_polygon(&square(1.0)));
        let bowtie = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        assert!(!is_simple_polygon(&bowtie));
    }

    #[test]
    fn point_in_polygon_basic() {
        let sq = square(2.0);
        assert!(point_in_polygon(Point::new(0.3, -0.2), &sq));
        assert!(!point_in_polygon(Point::new(1.5, 0.0), &sq));
    }
}
