//! Admissibility checks on a constructed strain field: tangential jumps
//! across cell interfaces, exact circulations along polygonal loops, boundary
//! conditions and continuity of the deformation modulo the lattice.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construction::{CoreSite, RegionDescriptor, RegionKind, StrainField};
use crate::error::{Error, Result};
use crate::geometry::{
    clip_to_rect, distance_to_square_boundary, segment_square_boundary_distance, shared_edge, Mat2, Rect,
    Segment, Vec2,
};
use crate::lattice::coords_in_lattice;
use crate::sampling::substream;
use rand::Rng;

/// Default relative tolerance for jumps, circulations and continuity.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Entrywise tolerance of the boundary-condition check.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;
const MAX_VIOLATIONS: usize = 100;
const MAX_LOOP_ATTEMPTS: usize = 2_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopValidity {
    /// Loops stay farther than the core half-side `r0` from every core
    /// square boundary.
    #[default]
    Strict,
    /// Loops only avoid the core square boundaries themselves
    /// (distance `> 1e-12·τε`).
    Lenient,
}

/// Tangential strain jump across one shared edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceJump {
    /// Oriented along the counterclockwise boundary of the left cell.
    pub edge: Segment,
    pub left_cell: usize,
    pub right_cell: usize,
    pub left_region: RegionDescriptor,
    pub right_region: RegionDescriptor,
    /// `(β_right − β_left) t` with `t` the unit edge tangent.
    pub jump_tangential: Vec2,
    pub on_core_boundary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreCirculation {
    pub core: usize,
    pub strip: u8,
    pub square: u32,
    pub circulation: Vec2,
    pub coords: Option<(i64, i64)>,
    /// Largest deviation from `−τε b_i` over the certification loops.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopCheck {
    pub rect: Rect,
    pub circulation: Vec2,
    pub coords: Option<(i64, i64)>,
    pub expected: (i64, i64),
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H2Report {
    pub ok: bool,
    pub core_circulations: Vec<CoreCirculation>,
    /// Cores whose certification loops would leave the domain.
    pub skipped_cores: usize,
    pub max_core_error: f64,
    pub random_loops: Vec<LoopCheck>,
    /// Random loops for which no admissible rectangle was found.
    pub unsampled_loops: usize,
    pub violations: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    /// Largest raw disagreement of neighboring deformations at edge endpoints.
    pub max_raw: f64,
    /// Same, measured modulo the lattice `τε𝓑`.
    pub max_modulo_lattice: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub h1_ok: bool,
    pub h2_ok: bool,
    pub h3_ok: bool,
    pub continuity_ok: bool,
    pub max_offcore_jump: f64,
    pub max_strain_norm: f64,
    pub max_boundary_deviation: f64,
    pub continuity: ContinuityReport,
    pub h2: H2Report,
    pub violations: Vec<String>,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.h1_ok && self.h2_ok && self.h3_ok && self.continuity_ok
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub tolerance: f64,
    pub n_random_loops: usize,
    pub seed: u64,
    pub validity: LoopValidity,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { tolerance: DEFAULT_TOLERANCE, n_random_loops: 20, seed: 0x5eed, validity: LoopValidity::Strict }
    }
}

/// Neumaier-compensated vector sum.
#[derive(Default)]
struct VecSum {
    sum: Vec2,
    comp: Vec2,
}

impl VecSum {
    fn add(&mut self, v: Vec2) {
        fn step(s: &mut f64, c: &mut f64, x: f64) {
            let t = *s + x;
            if s.abs() >= x.abs() {
                *c += (*s - t) + x;
            } else {
                *c += (x - t) + *s;
            }
            *s = t;
        }
        step(&mut self.sum.x, &mut self.comp.x, v.x);
        step(&mut self.sum.y, &mut self.comp.y, v.y);
    }

    fn value(&self) -> Vec2 {
        self.sum + self.comp
    }
}

fn own_core(f: &StrainField, r: &RegionDescriptor) -> Option<CoreSite> {
    let i = f.core_index(r.strip?, r.square?)?;
    Some(f.cores[i])
}

fn on_square_boundary(seg: &Segment, core: &CoreSite, tol: f64) -> bool {
    [seg.a, seg.b, seg.midpoint()]
        .iter()
        .all(|&p| distance_to_square_boundary(p, core.center, core.half_side) <= tol)
}

/// Every shared edge of positive length with its tangential jump.
pub fn interface_jumps(f: &StrainField) -> Vec<InterfaceJump> {
    let tol = f.tolerance();
    f.index();
    (0..f.cells.len())
        .into_par_iter()
        .map(|i| {
            let ci = &f.cells[i];
            let mut out = Vec::new();
            for j in f.candidates(&ci.polygon.bounding_rect().expanded(tol)) {
                if j <= i {
                    continue;
                }
                let cj = &f.cells[j];
                let Some(edge) = shared_edge(&ci.polygon, &cj.polygon, tol) else { continue };
                if edge.length() <= tol {
                    continue;
                }
                let t = edge.tangent();
                let on_core = [&ci.region, &cj.region]
                    .iter()
                    .filter_map(|r| own_core(f, r))
                    .any(|c| on_square_boundary(&edge, &c, tol));
                out.push(InterfaceJump {
                    edge,
                    left_cell: i,
                    right_cell: j,
                    left_region: ci.region,
                    right_region: cj.region,
                    jump_tangential: (cj.strain - ci.strain).apply(t),
                    on_core_boundary: on_core,
                });
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

pub fn max_strain_norm(f: &StrainField) -> f64 {
    f.cells.iter().map(|c| c.strain.frobenius()).fold(0.0, f64::max)
}

/// Curl support check: `(ok, max off-core |jump|)`, with jumps compared to
/// `tol · max |β|`.
pub fn check_h1(f: &StrainField, tol: f64) -> (bool, f64) {
    let (ok, max, _) = h1_with_violations(f, tol);
    (ok, max)
}

fn h1_with_violations(f: &StrainField, tol: f64) -> (bool, f64, Vec<String>) {
    let bound = tol * max_strain_norm(f);
    let mut max: f64 = 0.0;
    let mut violations = Vec::new();
    for j in interface_jumps(f).iter().filter(|j| !j.on_core_boundary) {
        let m = j.jump_tangential.norm();
        max = max.max(m);
        if m > bound && violations.len() < MAX_VIOLATIONS {
            violations.push(format!(
                "H1: jump {:.3e} on edge ({:.9e},{:.9e})-({:.9e},{:.9e}) between {:?} and {:?}",
                m, j.edge.a.x, j.edge.a.y, j.edge.b.x, j.edge.b.y, j.left_region, j.right_region
            ));
        }
    }
    (max <= bound, max, violations)
}

fn validate_loop(f: &StrainField, pts: &[Vec2], validity: LoopValidity) -> Result<()> {
    let tol = f.tolerance();
    if pts.len() < 4 {
        return Err(Error::InvalidLoop(format!("need at least 4 points, got {}", pts.len())));
    }
    if pts.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidLoop("non-finite loop vertex".into()));
    }
    if (pts[0] - pts[pts.len() - 1]).norm() > tol {
        return Err(Error::InvalidLoop("loop is not closed".into()));
    }
    let omega = f.params.domain();
    if let Some(p) = pts.iter().find(|p| !omega.contains(**p, tol)) {
        return Err(Error::InvalidLoop(format!("vertex ({}, {}) lies outside the domain", p.x, p.y)));
    }
    let margin = f.cores.iter().map(|c| c.half_side).fold(0.0, f64::max);
    let lenient = 1e-12 * f.params.burgers_length();
    for w in pts.windows(2) {
        let seg = Segment::new(w[0], w[1]);
        let bbox = Rect::new(seg.a.x.min(seg.b.x), seg.a.x.max(seg.b.x), seg.a.y.min(seg.b.y), seg.a.y.max(seg.b.y))
            .expanded(margin + tol);
        for i in f.candidates(&bbox) {
            let cell = &f.cells[i];
            if cell.region.kind != RegionKind::D0 {
                continue;
            }
            let Some(core) = own_core(f, &cell.region) else { continue };
            let threshold = match validity {
                LoopValidity::Strict => core.half_side,
                LoopValidity::Lenient => lenient,
            };
            let d = segment_square_boundary_distance(&seg, core.center, core.half_side);
            if d <= threshold {
                return Err(Error::InvalidLoop(format!(
                    "segment ({}, {})-({}, {}) is {d:.3e} from core ({}, {}), need > {threshold:.3e}",
                    seg.a.x, seg.a.y, seg.b.x, seg.b.y, core.strip, core.square
                )));
            }
        }
    }
    Ok(())
}

/// Exact `∮ β t` along a closed polyline (last point equal to the first),
/// computed by splitting every segment at cell boundaries.
pub fn circulation(f: &StrainField, pts: &[Vec2], validity: LoopValidity) -> Result<Vec2> {
    validate_loop(f, pts, validity)?;
    let tol = f.tolerance();
    let mut acc = VecSum::default();
    for w in pts.windows(2) {
        let seg = Segment::new(w[0], w[1]);
        if seg.length() <= tol {
            continue;
        }
        let bbox = Rect::new(seg.a.x.min(seg.b.x), seg.a.x.max(seg.b.x), seg.a.y.min(seg.b.y), seg.a.y.max(seg.b.y))
            .expanded(tol);
        let cands = f.candidates(&bbox);
        let mut breaks = vec![0.0, 1.0];
        for &i in &cands {
            if let Some((t0, t1)) = f.cells[i].polygon.clip_segment(&seg) {
                breaks.push(t0);
                breaks.push(t1);
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let v = seg.vector();
        for b in breaks.windows(2) {
            let (t0, t1) = (b[0].clamp(0.0, 1.0), b[1].clamp(0.0, 1.0));
            if (t1 - t0) * seg.length() <= tol {
                continue;
            }
            let mid = seg.point_at(0.5 * (t0 + t1));
            let cell = cands
                .iter()
                .copied()
                .find(|&i| f.cells[i].polygon.contains(mid, tol))
                .ok_or_else(|| Error::InvalidLoop(format!("point ({}, {}) is not covered", mid.x, mid.y)))?;
            acc.add(f.cells[cell].strain.apply(v.scale(t1 - t0)));
        }
    }
    Ok(acc.value())
}

/// Closed counterclockwise boundary of a rectangle.
pub fn rect_loop(r: &Rect) -> Vec<Vec2> {
    vec![
        Vec2::new(r.x0, r.y0),
        Vec2::new(r.x1, r.y0),
        Vec2::new(r.x1, r.y1),
        Vec2::new(r.x0, r.y1),
        Vec2::new(r.x0, r.y0),
    ]
}

/// Closed counterclockwise square of half-side `half` around `center`.
pub fn square_loop(center: Vec2, half: f64) -> Vec<Vec2> {
    rect_loop(&Rect::centered_square(center, half))
}

fn burgers_of(f: &StrainField, strip: u8) -> Vec2 {
    f.layout.strip(strip).map_or(Vec2::ZERO, |s| s.burgers)
}

/// Lattice coordinates of `−(m1 b1 + m2 b2)` expressed in the field's
/// normalized generators.
fn expected_coords(f: &StrainField, enclosed: &[usize]) -> (i64, i64) {
    let te = f.params.burgers_length();
    let total = enclosed.iter().fold(Vec2::ZERO, |acc, &i| acc - burgers_of(f, f.cores[i].strip).scale(te));
    coords_in_lattice(total, &f.params.lattice, te, 1e-6 * te).unwrap_or((i64::MAX, i64::MAX))
}

fn random_rect(f: &StrainField, index: usize, seed: u64, validity: LoopValidity) -> Option<Rect> {
    let l = f.params.half_width;
    let mut rng = substream(seed, 0x6c6f_6f70, index as u64);
    for _ in 0..MAX_LOOP_ATTEMPTS {
        let (xa, xb) = (rng.random_range(-l..l), rng.random_range(-l..l));
        let (ya, yb) = (rng.random_range(-2.0 * l..0.0), rng.random_range(-2.0 * l..0.0));
        let r = Rect::new(xa.min(xb), xa.max(xb), ya.min(yb), ya.max(yb));
        if r.width() <= 0.0 || r.height() <= 0.0 {
            continue;
        }
        if validate_loop(f, &rect_loop(&r), validity).is_ok() {
            return Some(r);
        }
    }
    None
}

fn certify_core(f: &StrainField, idx: usize, tol: f64) -> Option<Result<CoreCirculation>> {
    let core = f.cores[idx];
    let strip = f.layout.strip(core.strip)?;
    let omega = f.params.domain();
    let te = f.params.burgers_length();
    let expected = burgers_of(f, core.strip).scale(-te);
    let radii = [strip.r(1), strip.r_bar];
    if radii.iter().any(|&r| !omega.contains_rect(&Rect::centered_square(core.center, r), f.tolerance())) {
        return None;
    }
    let mut last = Vec2::ZERO;
    let mut error: f64 = 0.0;
    for r in radii {
        match circulation(f, &square_loop(core.center, r), LoopValidity::Lenient) {
            Ok(c) => {
                error = error.max((c - expected).norm());
                last = c;
            }
            Err(e) => return Some(Err(e)),
        }
    }
    Some(Ok(CoreCirculation {
        core: idx,
        strip: core.strip,
        square: core.square,
        circulation: last,
        coords: coords_in_lattice(last, &f.params.lattice, te, tol * te),
        error,
    }))
}

/// Quantized circulation check: per-core certification on concentric
/// squares of half-sides `r_1` and `r̄`, plus seeded random rectangles.
pub fn check_h2(f: &StrainField, n_random_loops: usize, seed: u64, validity: LoopValidity, tol: f64) -> H2Report {
    let te = f.params.burgers_length();
    let results: Vec<_> = (0..f.cores.len()).into_par_iter().map(|i| certify_core(f, i, tol)).collect();
    let mut violations = Vec::new();
    let mut core_circulations = Vec::new();
    let mut skipped = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            None => skipped += 1,
            Some(Err(e)) => violations.push(format!("H2: core {i}: {e}")),
            Some(Ok(c)) => core_circulations.push(c),
        }
    }
    let max_core_error = core_circulations.iter().map(|c| c.error).fold(0.0, f64::max);
    for c in core_circulations.iter().filter(|c| c.error > tol * te).take(MAX_VIOLATIONS) {
        violations.push(format!("H2: core {} circulation off by {:.3e}", c.core, c.error));
    }

    let loops: Vec<Option<Result<LoopCheck>>> = (0..n_random_loops)
        .into_par_iter()
        .map(|k| {
            let r = random_rect(f, k, seed, validity)?;
            Some(circulation(f, &rect_loop(&r), validity).map(|c| {
                let enclosed: Vec<usize> = (0..f.cores.len())
                    .filter(|&i| {
                        let p = f.cores[i].center;
                        p.x > r.x0 && p.x < r.x1 && p.y > r.y0 && p.y < r.y1
                    })
                    .collect();
                let expected = expected_coords(f, &enclosed);
                let coords = coords_in_lattice(c, &f.params.lattice, te, tol * te);
                LoopCheck { rect: r, circulation: c, coords, expected, ok: coords == Some(expected) }
            }))
        })
        .collect();
    let mut random_loops = Vec::new();
    let mut unsampled = 0;
    for (k, l) in loops.into_iter().enumerate() {
        match l {
            None => unsampled += 1,
            Some(Err(e)) => violations.push(format!("H2: random loop {k}: {e}")),
            Some(Ok(c)) => {
                if !c.ok {
                    violations.push(format!(
                        "H2: random loop {k} has coords {:?}, expected {:?}",
                        c.coords, c.expected
                    ));
                }
                random_loops.push(c);
            }
        }
    }
    let ok = violations.is_empty();
    H2Report {
        ok,
        core_circulations,
        skipped_cores: skipped,
        max_core_error,
        random_loops,
        unsampled_loops: unsampled,
        violations,
    }
}

/// Boundary-condition check: `(ok, max entrywise deviation)` over cells that
/// meet the two lateral strips of width `l`.
pub fn check_h3(f: &StrainField) -> (bool, f64) {
    let p = &f.params;
    let omega = p.domain();
    let bands = [
        (Rect::new(-p.half_width, -p.half_width + p.boundary_width, omega.y0, omega.y1), Mat2::rotation(-p.theta)),
        (Rect::new(p.half_width - p.boundary_width, p.half_width, omega.y0, omega.y1), Mat2::rotation(p.theta)),
    ];
    let mut max: f64 = 0.0;
    for (band, target) in bands {
        for i in f.candidates(&band) {
            let cell = &f.cells[i];
            if clip_to_rect(&cell.polygon, &band).is_some() {
                max = max.max(cell.strain.max_abs_diff(&target));
            }
        }
    }
    (max <= BOUNDARY_TOLERANCE, max)
}

/// Disagreement of neighboring affine deformations at shared-edge endpoints,
/// raw and modulo `τε𝓑`. Edges touching a core square are skipped.
pub fn deformation_continuity(f: &StrainField) -> ContinuityReport {
    let te = f.params.burgers_length();
    let lattice = &f.params.lattice;
    let mut report = ContinuityReport { max_raw: 0.0, max_modulo_lattice: 0.0 };
    for j in interface_jumps(f) {
        let (Some(a), Some(b)) = (f.cells[j.left_cell].affine, f.cells[j.right_cell].affine) else { continue };
        let da = b.apply(j.edge.a) - a.apply(j.edge.a);
        let db = b.apply(j.edge.b) - a.apply(j.edge.b);
        report.max_raw = report.max_raw.max(da.norm()).max(db.norm());
        let modulo = lattice.nearest(da, te).1 + (da - db).norm();
        report.max_modulo_lattice = report.max_modulo_lattice.max(modulo);
    }
    report
}

pub fn check_admissibility(f: &StrainField, opts: &CheckOptions) -> AdmissibilityReport {
    let (h1_ok, max_offcore_jump, mut violations) = h1_with_violations(f, opts.tolerance);
    let h2 = check_h2(f, opts.n_random_loops, opts.seed, opts.validity, opts.tolerance);
    let (h3_ok, max_boundary_deviation) = check_h3(f);
    if !h3_ok {
        violations.push(format!("H3: boundary strain deviates by {max_boundary_deviation:.3e}"));
    }
    let continuity = deformation_continuity(f);
    let continuity_ok = continuity.max_modulo_lattice <= opts.tolerance * f.params.burgers_length();
    if !continuity_ok {
        violations.push(format!(
            "continuity: deformation mismatch {:.3e} modulo the lattice",
            continuity.max_modulo_lattice
        ));
    }
    violations.extend(h2.violations.iter().cloned());
    AdmissibilityReport {
        h1_ok,
        h2_ok: h2.ok,
        h3_ok,
        continuity_ok,
        max_offcore_jump,
        max_strain_norm: max_strain_norm(f),
        max_boundary_deviation,
        continuity,
        h2,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{build_strain_field, Cell, Params, StripLayout};
    use crate::geometry::Affine;
    use crate::lattice::Lattice;
    use std::f64::consts::PI;

    fn field() -> StrainField {
        let l = Lattice::new(-PI / 3.0, PI / 6.0).unwrap();
        build_strain_field(&Params::new(1e-3, 1.0, 2.0, 2f64.powi(-5).asin(), l, 1.0, 0.05)).unwrap()
    }

    fn single_cell() -> StrainField {
        let l = Lattice::new(-PI / 3.0, PI / 6.0).unwrap();
        let p = Params::new(1e-3, 1.0, 2.0, 0.1, l, 1.0, 0.05);
        let cell = Cell {
            polygon: p.domain().to_polygon().unwrap(),
            region: RegionDescriptor::sigma(RegionKind::SigmaTheta),
            affine: Some(Affine::new(Mat2::rotation(0.1), Vec2::ZERO)),
            strain: Mat2::rotation(0.1),
        };
        StrainField::from_parts(p, StripLayout { strips: vec![] }, vec![cell], vec![])
    }

    #[test]
    fn single_cell_field_is_trivial() {
        let f = single_cell();
        assert_eq!(check_h1(&f, 1e-9), (true, 0.0));
        assert_eq!(deformation_continuity(&f).max_raw, 0.0);
        let c = circulation(&f, &rect_loop(&Rect::new(-0.5, 0.5, -1.5, -0.5)), LoopValidity::Strict).unwrap();
        assert!(c.norm() < 1e-15);
    }

    #[test]
    fn open_and_short_loops_are_rejected() {
        let f = single_cell();
        let mut pts = rect_loop(&Rect::new(-0.5, 0.5, -1.5, -0.5));
        pts.pop();
        assert!(matches!(circulation(&f, &pts, LoopValidity::Strict), Err(Error::InvalidLoop(_))));
        assert!(circulation(&f, &pts[..2], LoopValidity::Strict).is_err());
    }

    #[test]
    fn constructed_field_satisfies_h1_h3() {
        let f = field();
        let (ok, max) = check_h1(&f, 1e-9);
        assert!(ok, "max off-core jump {max}");
        assert!(check_h3(&f).0);
        let c = deformation_continuity(&f);
        assert!(c.max_modulo_lattice <= 1e-9 * f.params.burgers_length(), "{c:?}");
        assert!(c.max_raw > f.params.burgers_length() * 0.5);
    }

    #[test]
    fn core_boundary_jump_matches_closed_form() {
        let f = field();
        let te = f.params.burgers_length();
        let s1 = f.layout.strip(1).unwrap();
        let r1 = s1.r(1);
        let jumps = interface_jumps(&f);
        let j = jumps
            .iter()
            .find(|j| {
                let kinds = (j.left_region.kind, j.right_region.kind);
                j.left_region.strip == Some(1)
                    && j.left_region.square == Some(2)
                    && matches!(kinds, (RegionKind::D0, RegionKind::DeltaA) | (RegionKind::DeltaA, RegionKind::D0))
            })
            .expect("D0/Δa edge");
        assert!(j.on_core_boundary);
        let fan = Mat2::rotation(-f.params.theta) + s1.burgers.outer(Vec2::new(1.0, -1.0)).scale(te / r1);
        let expected = (Mat2::IDENTITY - fan).apply(Vec2::E2);
        assert!((j.jump_tangential.norm() - expected.norm()).abs() < 1e-12);
    }

    #[test]
    fn interface_fans_are_rank_one_connected() {
        let f = field();
        let outer: Vec<_> = interface_jumps(&f)
            .into_iter()
            .filter(|j| {
                j.left_region.is_delta()
                    && j.right_region.is_delta()
                    && j.left_region.strip != j.right_region.strip
            })
            .collect();
        assert!(!outer.is_empty());
        for j in outer {
            assert!(j.edge.a.x.abs() < 1e-12 && j.edge.b.x.abs() < 1e-12);
            assert!(j.jump_tangential.norm() < 1e-12);
        }
    }

    #[test]
    fn perturbed_strain_breaks_h1() {
        let mut f = field();
        let i = f.cells.iter().position(|c| c.region.kind == RegionKind::DeltaB).unwrap();
        f.cells[i].strain.0[1] += 1e-3;
        assert!(!check_h1(&f, 1e-9).0);
    }

    #[test]
    fn perturbed_translation_breaks_continuity() {
        let mut f = field();
        let delta = 1e-6;
        let i = f.cells.iter().position(|c| c.region.kind == RegionKind::Ta).unwrap();
        let a = f.cells[i].affine.as_mut().unwrap();
        a.offset += Vec2::new(delta, 0.0);
        assert!(deformation_continuity(&f).max_modulo_lattice >= delta * (1.0 - 1e-6));
    }

    #[test]
    fn core_circulations_are_burgers_vectors() {
        let f = field();
        let te = f.params.burgers_length();
        for (idx, expected) in [(0usize, (-1, 0)), (f.layout.strip(1).unwrap().count + 2, (0, -1))] {
            let c = certify_core(&f, idx, 1e-9).unwrap().unwrap();
            assert!(c.error <= 1e-9 * te, "{c:?}");
            assert_eq!(c.coords, Some(expected));
        }
    }

    #[test]
    fn loop_around_two_cores() {
        let f = field();
        let s1 = f.layout.strip(1).unwrap();
        let (a, b) = (s1.center(2), s1.center(3));
        let r = Rect::new(a.x - 0.75 * s1.r_bar, a.x + 0.75 * s1.r_bar, b.y - 0.75 * s1.r_bar, a.y + 0.75 * s1.r_bar);
        let c = circulation(&f, &rect_loop(&r), LoopValidity::Lenient).unwrap();
        let te = f.params.burgers_length();
        assert_eq!(coords_in_lattice(c, &f.params.lattice, te, 1e-9 * te), Some((-2, 0)));
        let mut rev = rect_loop(&r);
        rev.reverse();
        let back = circulation(&f, &rev, LoopValidity::Lenient).unwrap();
        assert!((back + c).norm() < 1e-9 * te);
    }

    #[test]
    fn loop_crossing_core_is_invalid() {
        let f = field();
        let core = f.cores[3];
        let r = Rect::new(core.center.x, core.center.x + 0.01, core.center.y - 0.01, core.center.y + 0.01);
        assert!(matches!(
            circulation(&f, &rect_loop(&r), LoopValidity::Lenient),
            Err(Error::InvalidLoop(_))
        ));
    }

    #[test]
    fn random_loops_are_quantized() {
        let f = field();
        let h2 = check_h2(&f, 6, 7, LoopValidity::Strict, 1e-9);
        assert!(h2.ok, "{:?}", h2.violations);
        assert!(!h2.random_loops.is_empty());
    }
}
