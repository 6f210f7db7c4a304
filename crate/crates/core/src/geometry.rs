//! Planar primitives: vectors, 2x2 matrices, convex polygons and the
//! square-boundary neighborhoods used for dislocation cores.
//!
//! Polygons are always stored counterclockwise and convex. All predicates take
//! an explicit absolute tolerance; callers derive it from the domain diameter
//! with [`geometric_tolerance`].

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative factor applied to the domain diameter to obtain the absolute
/// tolerance of geometric predicates.
pub const RELATIVE_TOLERANCE: f64 = 1e-12;

pub fn geometric_tolerance(diameter: f64) -> f64 {
    RELATIVE_TOLERANCE * diameter
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };
    pub const E1: Vec2 = Vec2 { x: 1.0, y: 0.0 };
    pub const E2: Vec2 = Vec2 { x: 0.0, y: 1.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at angle `a` from the positive x-axis.
    #[inline]
    pub fn from_angle(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self { x: c, y: s }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    /// Outer product `self ⊗ o`.
    #[inline]
    pub fn outer(self, o: Vec2) -> Mat2 {
        Mat2::new(self.x * o.x, self.x * o.y, self.y * o.x, self.y * o.y)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v.scale(self)
    }
}

/// 2x2 matrix, entries in row-major order `[a11, a12, a21, a22]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mat2(pub [f64; 4]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([1.0, 0.0, 0.0, 1.0]);
    pub const ZERO: Mat2 = Mat2([0.0; 4]);

    #[inline]
    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2([a11, a12, a21, a22])
    }

    /// Matrix with columns `c1`, `c2`.
    #[inline]
    pub fn from_columns(c1: Vec2, c2: Vec2) -> Self {
        Mat2::new(c1.x, c2.x, c1.y, c2.y)
    }

    /// Counterclockwise rotation by `angle`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    #[inline]
    pub fn a11(&self) -> f64 {
        self.0[0]
    }
    #[inline]
    pub fn a12(&self) -> f64 {
        self.0[1]
    }
    #[inline]
    pub fn a21(&self) -> f64 {
        self.0[2]
    }
    #[inline]
    pub fn a22(&self) -> f64 {
        self.0[3]
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.a11() * self.a22() - self.a12() * self.a21()
    }

    #[inline]
    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a11(), self.a21(), self.a12(), self.a22())
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Mat2::new(self.a22() / d, -self.a12() / d, -self.a21() / d, self.a11() / d))
    }

    #[inline]
    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.a11() * v.x + self.a12() * v.y,
            self.a21() * v.x + self.a22() * v.y,
        )
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2(self.0.map(|a| a * s))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, o: &Mat2) -> f64 {
        self.0
            .iter()
            .zip(o.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.is_finite())
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2], self.0[3] + o.0[3]])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2], self.0[3] - o.0[3]])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11() * o.a11() + self.a12() * o.a21(),
            self.a11() * o.a12() + self.a12() * o.a22(),
            self.a21() * o.a11() + self.a22() * o.a21(),
            self.a21() * o.a12() + self.a22() * o.a22(),
        )
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        self.apply(v)
    }
}

/// Affine map `x ↦ linear·x + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub linear: Mat2,
    pub offset: Vec2,
}

impl Affine {
    pub fn new(linear: Mat2, offset: Vec2) -> Self {
        Self { linear, offset }
    }

    #[inline]
    pub fn apply(&self, x: Vec2) -> Vec2 {
        self.linear.apply(x) + self.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn vector(&self) -> Vec2 {
        self.b - self.a
    }

    pub fn length(&self) -> f64 {
        self.vector().norm()
    }

    pub fn midpoint(&self) -> Vec2 {
        (self.a + self.b).scale(0.5)
    }

    /// Unit tangent from `a` to `b`.
    pub fn tangent(&self) -> Vec2 {
        let v = self.vector();
        v.scale(1.0 / v.norm())
    }

    pub fn reversed(&self) -> Segment {
        Segment::new(self.b, self.a)
    }

    pub fn point_at(&self, t: f64) -> Vec2 {
        self.a + self.vector().scale(t)
    }
}

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn centered_square(center: Vec2, half_side: f64) -> Self {
        Rect::new(
            center.x - half_side,
            center.x + half_side,
            center.y - half_side,
            center.y + half_side,
        )
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        p.x >= self.x0 - tol && p.x <= self.x1 + tol && p.y >= self.y0 - tol && p.y <= self.y1 + tol
    }

    pub fn intersects(&self, o: &Rect, tol: f64) -> bool {
        self.x0 <= o.x1 + tol && o.x0 <= self.x1 + tol && self.y0 <= o.y1 + tol && o.y0 <= self.y1 + tol
    }

    pub fn intersection(&self, o: &Rect) -> Option<Rect> {
        let r = Rect::new(self.x0.max(o.x0), self.x1.min(o.x1), self.y0.max(o.y0), self.y1.min(o.y1));
        (r.x0 < r.x1 && r.y0 < r.y1).then_some(r)
    }

    pub fn expanded(&self, d: f64) -> Rect {
        Rect::new(self.x0 - d, self.x1 + d, self.y0 - d, self.y1 + d)
    }

    pub fn contains_rect(&self, o: &Rect, tol: f64) -> bool {
        o.x0 >= self.x0 - tol && o.x1 <= self.x1 + tol && o.y0 >= self.y0 - tol && o.y1 <= self.y1 + tol
    }

    pub fn to_polygon(&self) -> Result<Polygon> {
        Polygon::new(vec![
            Vec2::new(self.x0, self.y0),
            Vec2::new(self.x1, self.y0),
            Vec2::new(self.x1, self.y1),
            Vec2::new(self.x0, self.y1),
        ])
    }
}

/// Shoelace signed area; positive for counterclockwise vertex order.
pub fn signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += vertices[i].cross(vertices[(i + 1) % n]);
    }
    0.5 * acc
}

/// Convex polygon with counterclockwise vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl TryFrom<Vec<Vec2>> for Polygon {
    type Error = Error;
    fn try_from(v: Vec<Vec2>) -> Result<Self> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Vec2> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

impl Polygon {
    /// Validates and normalizes the vertex list: drops repeated consecutive
    /// vertices, orients counterclockwise and rejects zero-area or non-convex
    /// input.
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegeneratePolygon("non-finite vertex".into()));
        }
        let scale = bounding_rect(&vertices).map(|r| r.diameter()).unwrap_or(0.0);
        let tol = geometric_tolerance(scale.max(f64::MIN_POSITIVE));
        let mut vs: Vec<Vec2> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if vs.last().is_none_or(|l: &Vec2| (*l - v).norm() > tol) {
                vs.push(v);
            }
        }
        while vs.len() > 1 && (vs[0] - vs[vs.len() - 1]).norm() <= tol {
            vs.pop();
        }
        if vs.len() < 3 {
            return Err(Error::DegeneratePolygon(format!("{} distinct vertices", vs.len())));
        }
        let area = signed_area(&vs);
        if area.abs() <= tol * scale {
            return Err(Error::DegeneratePolygon("zero area".into()));
        }
        if area < 0.0 {
            vs.reverse();
        }
        let n = vs.len();
        for i in 0..n {
            let e0 = vs[(i + 1) % n] - vs[i];
            let e1 = vs[(i + 2) % n] - vs[(i + 1) % n];
            if e0.cross(e1) < -tol * scale {
                return Err(Error::NonConvexPolygon);
            }
        }
        Ok(Self { vertices: vs })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn bounding_rect(&self) -> Rect {
        bounding_rect(&self.vertices).expect("polygon has vertices")
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        let (mut cx, mut cy, mut a) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.cross(q);
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
            a += w;
        }
        Vec2::new(cx / (3.0 * a), cy / (3.0 * a))
    }

    pub fn translated(&self, t: Vec2) -> Polygon {
        Polygon { vertices: self.vertices.iter().map(|v| *v + t).collect() }
    }

    /// Closed containment with tolerance.
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        self.edges().all(|e| {
            let d = e.vector();
            d.cross(p - e.a) >= -tol * d.norm()
        })
    }

    /// Parameter interval `[t0, t1] ⊂ [0, 1]` of the part of `s` inside the
    /// polygon, if it has positive length.
    pub fn clip_segment(&self, s: &Segment) -> Option<(f64, f64)> {
        let d = s.vector();
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for e in self.edges() {
            let ev = e.vector();
            // inside: ev × (p - e.a) >= 0
            let num = ev.cross(s.a - e.a);
            let den = ev.cross(d);
            if den == 0.0 {
                if num < 0.0 {
                    return None;
                }
                continue;
            }
            let t = -num / den;
            if den > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 >= t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

pub fn bounding_rect(points: &[Vec2]) -> Option<Rect> {
    let first = points.first()?;
    let mut r = Rect::new(first.x, first.x, first.y, first.y);
    for p in &points[1..] {
        r.x0 = r.x0.min(p.x);
        r.x1 = r.x1.max(p.x);
        r.y0 = r.y0.min(p.y);
        r.y1 = r.y1.max(p.y);
    }
    Some(r)
}

/// Area of a vertex list after validation as a convex polygon.
pub fn polygon_area(vertices: &[Vec2]) -> Result<f64> {
    Polygon::new(vertices.to_vec()).map(|p| p.area())
}

/// Distance from `p` to the segment `s`.
pub fn point_segment_distance(p: Vec2, s: &Segment) -> f64 {
    let d = s.vector();
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return (p - s.a).norm();
    }
    let t = ((p - s.a).dot(d) / len2).clamp(0.0, 1.0);
    (p - s.point_at(t)).norm()
}

fn segments_intersect(s: &Segment, q: &Segment) -> bool {
    let d1 = s.vector();
    let d2 = q.vector();
    let o1 = d1.cross(q.a - s.a);
    let o2 = d1.cross(q.b - s.a);
    let o3 = d2.cross(s.a - q.a);
    let o4 = d2.cross(s.b - q.a);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    // collinear or touching cases are covered by the endpoint distances
    false
}

pub fn segment_segment_distance(s: &Segment, q: &Segment) -> f64 {
    if segments_intersect(s, q) {
        return 0.0;
    }
    point_segment_distance(s.a, q)
        .min(point_segment_distance(s.b, q))
        .min(point_segment_distance(q.a, s))
        .min(point_segment_distance(q.b, s))
}

/// Maximal common boundary segment of two polygons, oriented along `p`'s
/// counterclockwise boundary. `None` unless the overlap is longer than `tol`.
pub fn shared_edge(p: &Polygon, q: &Polygon, tol: f64) -> Option<Segment> {
    if !p.bounding_rect().intersects(&q.bounding_rect(), tol) {
        return None;
    }
    let mut best: Option<(f64, Segment)> = None;
    for e in p.edges() {
        let len = e.length();
        let t = e.tangent();
        for f in q.edges() {
            if point_line_distance(f.a, &e) > tol || point_line_distance(f.b, &e) > tol {
                continue;
            }
            let sa = (f.a - e.a).dot(t);
            let sb = (f.b - e.a).dot(t);
            let lo = sa.min(sb).max(0.0);
            let hi = sa.max(sb).min(len);
            if hi - lo > tol && best.as_ref().is_none_or(|(l, _)| hi - lo > *l) {
                // reuse exact vertices where the overlap reaches them
                let a = if lo <= tol { e.a } else { e.a + t.scale(lo) };
                let b = if hi >= len - tol { e.b } else { e.a + t.scale(hi) };
                best = Some((hi - lo, Segment::new(a, b)));
            }
        }
    }
    best.map(|(_, s)| s)
}

fn point_line_distance(p: Vec2, line: &Segment) -> f64 {
    line.tangent().cross(p - line.a).abs()
}

/// Convex intersection of `p` with the rectangle, or `None` when it has zero
/// area (up to the geometric tolerance of `p`).
pub fn clip_to_rect(p: &Polygon, r: &Rect) -> Option<Polygon> {
    let bb = p.bounding_rect();
    if r.contains_rect(&bb, 0.0) {
        return Some(p.clone());
    }
    if !r.intersects(&bb, 0.0) {
        return None;
    }
    // half-planes n·x <= c
    let planes = [
        (Vec2::new(-1.0, 0.0), -r.x0),
        (Vec2::new(1.0, 0.0), r.x1),
        (Vec2::new(0.0, -1.0), -r.y0),
        (Vec2::new(0.0, 1.0), r.y1),
    ];
    let mut poly = p.vertices().to_vec();
    for (n, c) in planes {
        poly = clip_half_plane(&poly, n, c);
        if poly.len() < 3 {
            return None;
        }
    }
    let tol = geometric_tolerance(bb.diameter());
    if signed_area(&poly) <= tol * bb.diameter() {
        return None;
    }
    Polygon::new(poly).ok()
}

/// Sutherland–Hodgman step against the half-plane `n·x <= c`.
pub fn clip_half_plane(poly: &[Vec2], n: Vec2, c: f64) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let len = poly.len();
    for i in 0..len {
        let cur = poly[i];
        let next = poly[(i + 1) % len];
        let dc = n.dot(cur) - c;
        let dn = n.dot(next) - c;
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

/// Signed-free distance from `x` to the boundary of the square of half-side
/// `r0` centered at `center`.
pub fn distance_to_square_boundary(x: Vec2, center: Vec2, r0: f64) -> f64 {
    let dx = (x.x - center.x).abs();
    let dy = (x.y - center.y).abs();
    if dx <= r0 && dy <= r0 {
        r0 - dx.max(dy)
    } else {
        (dx - r0).max(0.0).hypot((dy - r0).max(0.0))
    }
}

/// Whether `x` lies in the closed `rho`-neighborhood of the boundary of the
/// square of half-side `r0` centered at `center`.
pub fn point_in_band(x: Vec2, center: Vec2, r0: f64, rho: f64) -> bool {
    distance_to_square_boundary(x, center, r0) <= rho
}

/// Exact area of the closed `rho`-neighborhood of the boundary of
/// `[-r0, r0]²`: outer rounded square minus the inner square.
pub fn square_band_area(r0: f64, rho: f64) -> Result<f64> {
    if !(r0 > 0.0) || !(rho >= 0.0) || !r0.is_finite() || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "square_band_area needs r0 > 0 and rho >= 0, got r0={r0}, rho={rho}"
        )));
    }
    let side = 2.0 * r0;
    let inner = (2.0 * (r0 - rho)).max(0.0);
    Ok(side * side + 4.0 * side * rho + std::f64::consts::PI * rho * rho - inner * inner)
}

/// Distance from a segment to the boundary of an axis-aligned square.
pub fn segment_square_boundary_distance(s: &Segment, center: Vec2, r0: f64) -> f64 {
    let sq = Rect::centered_square(center, r0);
    let corners = [
        Vec2::new(sq.x0, sq.y0),
        Vec2::new(sq.x1, sq.y0),
        Vec2::new(sq.x1, sq.y1),
        Vec2::new(sq.x0, sq.y1),
    ];
    let a_in = sq.contains(s.a, 0.0);
    let b_in = sq.contains(s.b, 0.0);
    if a_in && b_in {
        // distance to the boundary is concave along the segment
        return distance_to_square_boundary(s.a, center, r0)
            .min(distance_to_square_boundary(s.b, center, r0));
    }
    (0..4)
        .map(|i| segment_segment_distance(s, &Segment::new(corners[i], corners[(i + 1) % 4])))
        .fold(f64::INFINITY, f64::min)
}

/// Uniform bucket grid over bounding rectangles for candidate lookup.
#[derive(Clone, Debug)]
pub struct BucketIndex {
    bounds: Rect,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl BucketIndex {
    pub fn new(bounds: Rect, items: &[Rect], nx: usize, ny: usize) -> Self {
        let nx = nx.max(1);
        let ny = ny.max(1);
        let mut idx = Self { bounds, nx, ny, buckets: vec![Vec::new(); nx * ny] };
        for (k, r) in items.iter().enumerate() {
            let (i0, i1, j0, j1) = idx.cell_range(r);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    idx.buckets[j * nx + i].push(k as u32);
                }
            }
        }
        idx
    }

    fn cell_range(&self, r: &Rect) -> (usize, usize, usize, usize) {
        let fx = |x: f64| {
            let t = (x - self.bounds.x0) / self.bounds.width() * self.nx as f64;
            (t.floor().max(0.0) as usize).min(self.nx - 1)
        };
        let fy = |y: f64| {
            let t = (y - self.bounds.y0) / self.bounds.height() * self.ny as f64;
            (t.floor().max(0.0) as usize).min(self.ny - 1)
        };
        (fx(r.x0), fx(r.x1), fy(r.y0), fy(r.y1))
    }

    /// Candidate item indices whose rectangles may meet `r`, sorted and
    /// deduplicated.
    pub fn query(&self, r: &Rect) -> Vec<usize> {
        let (i0, i1, j0, j1) = self.cell_range(r);
        let mut out: Vec<usize> = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                out.extend(self.buckets[j * self.nx + i].iter().map(|&k| k as usize));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(x0: f64, x1: f64, y0: f64, y1: f64) -> Polygon {
        Rect::new(x0, x1, y0, y1).to_polygon().unwrap()
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn area_of_unit_square_and_triangle() {
        assert_close(sq(0.0, 1.0, 0.0, 1.0).area(), 1.0, 1e-15);
        let tri = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        assert_close(polygon_area(&tri).unwrap(), 0.5, 1e-15);
    }

    #[test]
    fn area_of_delta_a_triangle() {
        // vertices of the a-triangle with inner half-side 1 and outer half-side 2
        let tri = [Vec2::new(1.0, -1.0), Vec2::new(2.0, 2.0), Vec2::new(1.0, 1.0)];
        assert_close(polygon_area(&tri).unwrap(), 1.0, 1e-15);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let p = Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)]).unwrap();
        assert!(signed_area(p.vertices()) > 0.0);
    }

    #[test]
    fn collinear_vertices_are_rejected() {
        let err = polygon_area(&[Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)]);
        assert!(matches!(err, Err(Error::DegeneratePolygon(_))));
        assert!(polygon_area(&[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn non_convex_is_rejected() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(1.0, 0.5),
            Vec2::new(2.0, 2.0),
            Vec2::new(0.0, 2.0),
        ];
        assert!(matches!(Polygon::new(v), Err(Error::NonConvexPolygon)));
    }

    #[test]
    fn shared_edge_of_abutting_squares() {
        let p = sq(0.0, 1.0, 0.0, 1.0);
        let q = sq(1.0, 2.0, 0.0, 1.0);
        let s = shared_edge(&p, &q, 1e-12).unwrap();
        assert_eq!(s, Segment::new(Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)));
        assert!(shared_edge(&p, &sq(2.0, 3.0, 2.0, 3.0), 1e-12).is_none());
        // corner contact only
        assert!(shared_edge(&p, &sq(1.0, 2.0, 1.0, 2.0), 1e-12).is_none());
    }

    #[test]
    fn shared_edge_partial_overlap() {
        let p = sq(0.0, 1.0, 0.0, 2.0);
        let q = sq(1.0, 2.0, 1.5, 3.0);
        let s = shared_edge(&p, &q, 1e-12).unwrap();
        assert_close(s.length(), 0.5, 1e-15);
        assert_close(s.a.y.min(s.b.y), 1.5, 1e-15);
    }

    #[test]
    fn shared_edge_of_fan_triangles() {
        let a = Polygon::new(vec![Vec2::new(1.0, -1.0), Vec2::new(2.0, 2.0), Vec2::new(1.0, 1.0)]).unwrap();
        let b = Polygon::new(vec![Vec2::new(2.0, 2.0), Vec2::new(2.0, -2.0), Vec2::new(1.0, -1.0)]).unwrap();
        let s = shared_edge(&a, &b, 1e-12).unwrap();
        let ends = [s.a, s.b];
        assert!(ends.contains(&Vec2::new(1.0, -1.0)));
        assert!(ends.contains(&Vec2::new(2.0, 2.0)));
    }

    #[test]
    fn clip_cases() {
        let r = Rect::new(0.0, 1.0, 0.0, 1.0);
        let c = clip_to_rect(&sq(0.0, 2.0, 0.0, 2.0), &r).unwrap();
        assert_close(c.area(), 1.0, 1e-15);
        let inner = sq(0.25, 0.5, 0.25, 0.5);
        assert_eq!(clip_to_rect(&inner, &r).unwrap(), inner);
        assert!(clip_to_rect(&sq(2.0, 3.0, 0.0, 1.0), &r).is_none());
        // touching along an edge has zero area
        assert!(clip_to_rect(&sq(1.0, 2.0, 0.0, 1.0), &r).is_none());
    }

    #[test]
    fn clip_triangle_to_unit_square() {
        // The half-plane x + y <= 2 passes through the corner (1,1), so the whole
        // unit square survives. Oracle: point-sampled membership in both sets.
        let tri = Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 2.0)]).unwrap();
        let r = Rect::new(0.0, 1.0, 0.0, 1.0);
        let c = clip_to_rect(&tri, &r).unwrap();
        let n = 400;
        let mut inside = 0usize;
        for i in 0..n {
            for j in 0..n {
                let p = Vec2::new((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                if p.x + p.y <= 2.0 {
                    inside += 1;
                }
            }
        }
        let oracle = inside as f64 / (n * n) as f64;
        assert_close(c.area(), oracle, 1e-12);
        assert_eq!(c.vertices().len(), 4);
        for v in [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)] {
            assert!(c.vertices().iter().any(|w| (*w - v).norm() < 1e-12));
        }
    }

    #[test]
    fn band_area_values() {
        assert_close(square_band_area(1.0, 0.0).unwrap(), 0.0, 1e-15);
        assert_close(square_band_area(1.0, 1.0).unwrap(), 12.0 + std::f64::consts::PI, 1e-12);
        assert_close(square_band_area(2.0, 1.0).unwrap(), 28.0 + std::f64::consts::PI, 1e-12);
        assert!(square_band_area(-1.0, 1.0).is_err());
        assert!(square_band_area(1.0, -1.0).is_err());
    }

    #[test]
    fn band_membership() {
        let c = Vec2::new(0.3, -0.7);
        assert!(!point_in_band(c, c, 1.0, 0.5));
        assert!(point_in_band(c + Vec2::new(1.0, 0.0), c, 1.0, 0.0));
        // corner distance is sqrt(2)*1.1 > 1
        assert!(!point_in_band(c + Vec2::new(2.1, 2.1), c, 1.0, 1.0));
        assert!(point_in_band(c + Vec2::new(1.7, 1.7), c, 1.0, 1.0));
    }

    #[test]
    fn segment_clip_interval() {
        let p = sq(0.0, 1.0, 0.0, 1.0);
        let (t0, t1) = p
            .clip_segment(&Segment::new(Vec2::new(-1.0, 0.5), Vec2::new(3.0, 0.5)))
            .unwrap();
        assert_close(t0, 0.25, 1e-15);
        assert_close(t1, 0.5, 1e-15);
        assert!(p.clip_segment(&Segment::new(Vec2::new(-1.0, 2.0), Vec2::new(3.0, 2.0))).is_none());
    }

    #[test]
    fn segment_to_square_distance() {
        let c = Vec2::ZERO;
        let s = Segment::new(Vec2::new(-3.0, 2.0), Vec2::new(3.0, 2.0));
        assert_close(segment_square_boundary_distance(&s, c, 1.0), 1.0, 1e-15);
        let crossing = Segment::new(Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0));
        assert_close(segment_square_boundary_distance(&crossing, c, 1.0), 0.0, 1e-15);
        let inside = Segment::new(Vec2::new(-0.5, 0.0), Vec2::new(0.5, 0.0));
        assert_close(segment_square_boundary_distance(&inside, c, 1.0), 0.5, 1e-15);
    }

    #[test]
    fn rotation_and_inverse() {
        let r = Mat2::rotation(0.3);
        assert_close(r.det(), 1.0, 1e-15);
        let p = r * r.inverse().unwrap();
        assert!(p.max_abs_diff(&Mat2::IDENTITY) < 1e-15);
        assert!(Mat2::ZERO.inverse().is_none());
    }
}
