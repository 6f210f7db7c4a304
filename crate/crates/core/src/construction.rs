//! The grain-boundary construction: strip layout, polygonal partition of the
//! domain and the piecewise-affine deformation whose gradients form the
//! piecewise-constant strain.
//!
//! Geometry of one strip square (local coordinates, half-side `r̄ = r_{n̄}`,
//! `s = +1` for strip 1 and `s = -1` for strip 2):
//!
//! ```text
//!   D0      [-r0, r0]²                       strain Id, no deformation
//!   Q       far half x·s <= 0 minus D0       three rectangles, rotation only
//!   Ta      conv{(0,r0),(s r0,r0),(s r̄,r̄),(0,r̄)}
//!   Tb      mirror of Ta in y
//!   Δa,n    conv{(s r_{n-1},-r_{n-1}),(s r_n,r_n),(s r_{n-1},r_{n-1})}
//!   Δb,n    conv{(s r_n,r_n),(s r_n,-r_n),(s r_{n-1},-r_{n-1})}
//! ```
//!
//! with `r_n = 2^n r0`. Square `k` of strip `i` is centered at
//! `t_{i,k} = (-1)^i r̄ e1 - (2k-1) r̄ e2`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    clip_to_rect, geometric_tolerance, Affine, BucketIndex, Mat2, Polygon, Rect, Vec2,
};
use crate::lattice::Lattice;

pub const DEFAULT_MC_SAMPLES: usize = 20_000;
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Scalar model inputs plus numerical controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub epsilon: f64,
    pub tau: f64,
    pub lambda: f64,
    /// Misorientation angle in radians.
    pub theta: f64,
    pub lattice: Lattice,
    /// Half-width `L` of `Ω = [-L, L] × [-2L, 0]`.
    #[serde(rename = "L")]
    pub half_width: f64,
    /// Width `l` of the boundary-condition strips.
    #[serde(rename = "l")]
    pub boundary_width: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Params {
    pub fn new(
        epsilon: f64,
        tau: f64,
        lambda: f64,
        theta: f64,
        lattice: Lattice,
        half_width: f64,
        boundary_width: f64,
    ) -> Self {
        Self {
            epsilon,
            tau,
            lambda,
            theta,
            lattice,
            half_width,
            boundary_width,
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.epsilon, self.tau, self.lambda, self.theta, self.half_width, self.boundary_width]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParams(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.tau > 0.0 && self.tau < self.lambda) {
            return Err(Error::InvalidParams(format!(
                "need 0 < tau < lambda, got tau={}, lambda={}",
                self.tau, self.lambda
            )));
        }
        if !(self.theta > 0.0 && self.theta < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParams(format!("need 0 < theta < pi/2, got {}", self.theta)));
        }
        if !(self.half_width > 0.0) {
            return Err(Error::InvalidParams(format!("L must be positive, got {}", self.half_width)));
        }
        if !(self.boundary_width > 0.0 && self.boundary_width < self.half_width / 10.0) {
            return Err(Error::InvalidParams(format!(
                "need 0 < l < L/10, got l={}, L={}",
                self.boundary_width, self.half_width
            )));
        }
        if self.mc_samples == 0 {
            return Err(Error::InvalidParams("mc_samples must be positive".into()));
        }
        Ok(())
    }

    /// Lattice spacing `τε`.
    pub fn burgers_length(&self) -> f64 {
        self.tau * self.epsilon
    }

    pub fn domain(&self) -> Rect {
        Rect::new(-self.half_width, self.half_width, -2.0 * self.half_width, 0.0)
    }

    pub fn tolerance(&self) -> f64 {
        geometric_tolerance(self.domain().diameter())
    }
}

/// One vertical strip hosting a column of dislocations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    /// 1 (left of the interface) or 2 (right of it).
    pub index: u8,
    /// Outer half-side `r_{n̄}` of the squares, equal to `ℓ`.
    pub r_bar: f64,
    pub n_bar: u32,
    /// Core half-side after dyadic snapping, `r_bar = 2^{n_bar} r0`.
    pub r0: f64,
    /// Number of squares `⌈L / r_bar⌉`.
    pub count: usize,
    /// Unit Burgers direction of the strip.
    pub burgers: Vec2,
}

impl Strip {
    /// `(-1)^{i+1}`: the side of the square carrying the Δ fan.
    pub fn side(&self) -> f64 {
        if self.index == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Center `t_{i,k}` of square `k` (1-based).
    pub fn center(&self, k: usize) -> Vec2 {
        Vec2::new(-self.side() * self.r_bar, -(2.0 * k as f64 - 1.0) * self.r_bar)
    }

    /// `r_n = 2^n r0`.
    pub fn r(&self, n: u32) -> f64 {
        self.r0 * 2f64.powi(n as i32)
    }

    /// Rotation angle `θ_i = (-1)^i θ` of the strip's background rotation.
    pub fn rotation_angle(&self, theta: f64) -> f64 {
        if self.index == 1 {
            -theta
        } else {
            theta
        }
    }

    pub fn square(&self, k: usize) -> Rect {
        Rect::centered_square(self.center(k), self.r_bar)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripLayout {
    pub strips: Vec<Strip>,
}

impl StripLayout {
    pub fn strip(&self, index: u8) -> Option<&Strip> {
        self.strips.iter().find(|s| s.index == index)
    }

    /// Left edge of the strip region (`-2ℓ1`).
    pub fn left_edge(&self) -> f64 {
        self.strip(1).map_or(0.0, |s| -2.0 * s.r_bar)
    }

    /// Right edge of the strip region (`2ℓ2`, or 0 with a single strip).
    pub fn right_edge(&self) -> f64 {
        self.strip(2).map_or(0.0, |s| 2.0 * s.r_bar)
    }

    pub fn total_squares(&self) -> usize {
        self.strips.iter().map(|s| s.count).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    SigmaMinusTheta,
    SigmaTheta,
    D0,
    QlOrQr,
    Ta,
    Tb,
    DeltaA,
    DeltaB,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionDescriptor {
    pub kind: RegionKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub strip: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub square: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub annulus: Option<u32>,
}

impl RegionDescriptor {
    pub fn sigma(kind: RegionKind) -> Self {
        Self { kind, strip: None, square: None, annulus: None }
    }

    pub fn in_square(kind: RegionKind, strip: u8, k: usize) -> Self {
        Self { kind, strip: Some(strip), square: Some(k as u32), annulus: None }
    }

    pub fn in_annulus(kind: RegionKind, strip: u8, k: usize, n: u32) -> Self {
        Self { kind, strip: Some(strip), square: Some(k as u32), annulus: Some(n) }
    }

    pub fn is_delta(&self) -> bool {
        matches!(self.kind, RegionKind::DeltaA | RegionKind::DeltaB)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub polygon: Polygon,
    pub region: RegionDescriptor,
    /// Deformation on the cell; absent on core squares.
    pub affine: Option<Affine>,
    pub strain: Mat2,
}

/// Translated core square `D0 + t_{i,k}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreSite {
    pub center: Vec2,
    pub half_side: f64,
    pub strip: u8,
    pub square: u32,
}

impl CoreSite {
    pub fn square_rect(&self) -> Rect {
        Rect::centered_square(self.center, self.half_side)
    }

    /// Bounding box of the band of radius `rho` around the square boundary.
    pub fn band_rect(&self, rho: f64) -> Rect {
        Rect::centered_square(self.center, self.half_side + rho)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrainField {
    pub params: Params,
    pub layout: StripLayout,
    pub cells: Vec<Cell>,
    pub cores: Vec<CoreSite>,
    #[serde(skip)]
    index: OnceLock<BucketIndex>,
}

impl PartialEq for StrainField {
    fn eq(&self, o: &Self) -> bool {
        self.params == o.params && self.layout == o.layout && self.cells == o.cells && self.cores == o.cores
    }
}

impl StrainField {
    pub fn from_parts(params: Params, layout: StripLayout, cells: Vec<Cell>, cores: Vec<CoreSite>) -> Self {
        Self { params, layout, cells, cores, index: OnceLock::new() }
    }

    pub fn tolerance(&self) -> f64 {
        self.params.tolerance()
    }

    pub fn index(&self) -> &BucketIndex {
        self.index.get_or_init(|| {
            let rects: Vec<Rect> = self.cells.iter().map(|c| c.polygon.bounding_rect()).collect();
            let ny = (self.layout.total_squares() * 2).clamp(1, 16_384);
            BucketIndex::new(self.params.domain(), &rects, 64, ny)
        })
    }

    /// Indices of cells whose bounding boxes meet `r`.
    pub fn candidates(&self, r: &Rect) -> Vec<usize> {
        self.index().query(r)
    }

    /// First cell (in list order) containing `x`.
    pub fn locate(&self, x: Vec2) -> Option<usize> {
        let tol = self.tolerance();
        self.candidates(&Rect::new(x.x, x.x, x.y, x.y))
            .into_iter()
            .find(|&i| self.cells[i].polygon.contains(x, tol))
    }

    pub fn strain_at(&self, x: Vec2) -> Option<Mat2> {
        self.locate(x).map(|i| self.cells[i].strain)
    }

    /// Index of the core belonging to square `k` of strip `i`.
    pub fn core_index(&self, strip: u8, square: u32) -> Option<usize> {
        let offset: usize = self.layout.strips.iter().take_while(|s| s.index != strip).map(|s| s.count).sum();
        let count = self.layout.strip(strip)?.count;
        let k = square as usize;
        (k >= 1 && k <= count).then(|| offset + k - 1)
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.polygon.area()).sum()
    }
}

/// Strip half-sides `(r̄1, r̄2)` that make the strains of the two outermost
/// fan triangles rank-one connected across `x1 = 0`. The lattice must be
/// normalized (or flagged degenerate).
pub fn solve_spacings(p: &Params) -> Result<(f64, f64)> {
    let l = &p.lattice;
    let sin_theta = p.theta.sin();
    let te = p.burgers_length();
    let (r1, r2) = if l.degenerate {
        let r = te / (4.0 * sin_theta);
        (r, r)
    } else {
        let s = l.sin_phi_minus_eta();
        (-(te / 4.0) * s / (sin_theta * l.sin_eta()), (te / 4.0) * s / (sin_theta * l.sin_phi()))
    };
    for r in [r1, r2] {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InadmissibleSpacing { value: r });
        }
    }
    let available = p.half_width - p.boundary_width;
    let strips: &[(u8, f64)] = if l.degenerate { &[(1, r1)] } else { &[(1, r1), (2, r2)] };
    for &(strip, r) in strips {
        if 2.0 * r > available {
            let k = r * sin_theta;
            return Err(Error::DomainTooSmall {
                strip,
                width: 2.0 * r,
                available,
                min_theta: (2.0 * k / available).min(1.0).asin(),
            });
        }
    }
    Ok((r1, r2))
}

/// Number of dyadic annuli and snapped core half-side for a strip of
/// half-side `r_bar`: `n̄ = max(1, round(log2(r̄/(λε))))`, `r0 = r̄ 2^{-n̄}`.
pub fn snap_dyadic(r_bar: f64, p: &Params) -> Result<(u32, f64)> {
    let core = p.lambda * p.epsilon;
    if !(r_bar > core) {
        let k = r_bar * p.theta.sin();
        return Err(Error::ThetaTooLarge { r_bar, core, max_theta: (k / core).min(1.0).asin() });
    }
    let n_bar = ((r_bar / core).log2().round() as i64).max(1) as u32;
    let r0 = r_bar / 2f64.powi(n_bar as i32);
    Ok((n_bar, r0))
}

/// Full strip layout for normalized parameters.
pub fn strip_layout(p: &Params) -> Result<StripLayout> {
    let (r1, r2) = solve_spacings(p)?;
    let l = &p.lattice;
    let seeds: Vec<(u8, f64, Vec2)> = if l.degenerate {
        vec![(1, r1, Vec2::E1)]
    } else {
        vec![(1, r1, l.b1), (2, r2, l.b2)]
    };
    let core = p.lambda * p.epsilon;
    if let Some(&(_, r_bar, _)) = seeds.iter().find(|s| !(s.1 > core)) {
        // the binding strip is the one with the smallest spacing per unit sin(theta)
        let k = seeds.iter().map(|s| s.1).fold(f64::INFINITY, f64::min) * p.theta.sin();
        return Err(Error::ThetaTooLarge { r_bar, core, max_theta: (k / core).min(1.0).asin() });
    }
    let strips = seeds
        .into_iter()
        .map(|(index, r_bar, burgers)| {
            let (n_bar, r0) = snap_dyadic(r_bar, p)?;
            Ok(Strip {
                index,
                r_bar,
                n_bar,
                r0,
                count: (p.half_width / r_bar).ceil() as usize,
                burgers,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StripLayout { strips })
}

fn poly(vs: &[(f64, f64)], t: Vec2) -> Result<Polygon> {
    Polygon::new(vs.iter().map(|&(x, y)| Vec2::new(x, y) + t).collect())
}

/// Cells of square `k` of `strip`, unclipped, in a fixed order.
fn square_partition(strip: &Strip, k: usize) -> Result<Vec<(Polygon, RegionDescriptor)>> {
    use RegionKind::*;
    let i = strip.index;
    let s = strip.side();
    let t = strip.center(k);
    let (r0, rb) = (strip.r0, strip.r_bar);
    let sq = |kind| RegionDescriptor::in_square(kind, i, k);
    let mut out = Vec::with_capacity(6 + 2 * strip.n_bar as usize);
    out.push((poly(&[(-r0, -r0), (r0, -r0), (r0, r0), (-r0, r0)], t)?, sq(D0)));
    // far half minus D0, as three convex rectangles
    out.push((poly(&[(-s * rb, r0), (0.0, r0), (0.0, rb), (-s * rb, rb)], t)?, sq(QlOrQr)));
    out.push((poly(&[(-s * rb, -r0), (-s * r0, -r0), (-s * r0, r0), (-s * rb, r0)], t)?, sq(QlOrQr)));
    out.push((poly(&[(-s * rb, -rb), (0.0, -rb), (0.0, -r0), (-s * rb, -r0)], t)?, sq(QlOrQr)));
    out.push((poly(&[(0.0, r0), (s * r0, r0), (s * rb, rb), (0.0, rb)], t)?, sq(Ta)));
    out.push((poly(&[(0.0, -r0), (s * r0, -r0), (s * rb, -rb), (0.0, -rb)], t)?, sq(Tb)));
    for n in 1..=strip.n_bar {
        let (rp, rn) = (strip.r(n - 1), strip.r(n));
        out.push((
            poly(&[(s * rp, -rp), (s * rn, rn), (s * rp, rp)], t)?,
            RegionDescriptor::in_annulus(DeltaA, i, k, n),
        ));
        out.push((
            poly(&[(s * rn, rn), (s * rn, -rn), (s * rp, -rp)], t)?,
            RegionDescriptor::in_annulus(DeltaB, i, k, n),
        ));
    }
    Ok(out)
}

/// Polygonal partition of `Ω`. With `clip`, every polygon is intersected with
/// `Ω` and zero-area pieces are dropped; without it the last square of each
/// strip extends below the domain.
pub fn build_partition(
    p: &Params,
    layout: &StripLayout,
    clip: bool,
) -> Result<Vec<(Polygon, RegionDescriptor)>> {
    let omega = p.domain();
    let (x_left, x_right) = (layout.left_edge(), layout.right_edge());
    let mut out = Vec::new();
    out.push((
        Rect::new(-p.half_width, x_left, omega.y0, omega.y1).to_polygon()?,
        RegionDescriptor::sigma(RegionKind::SigmaMinusTheta),
    ));
    out.push((
        Rect::new(x_right, p.half_width, omega.y0, omega.y1).to_polygon()?,
        RegionDescriptor::sigma(RegionKind::SigmaTheta),
    ));
    for strip in &layout.strips {
        for k in 1..=strip.count {
            for (poly, region) in square_partition(strip, k)? {
                if !clip {
                    out.push((poly, region));
                } else if let Some(c) = clip_to_rect(&poly, &omega) {
                    out.push((c, region));
                }
            }
        }
    }
    Ok(out)
}

/// Constant gradient of the affine interpolation taking values `v_j` at the
/// vertices `p_j`.
pub fn interpolation_gradient(p1: Vec2, p2: Vec2, p3: Vec2, v1: Vec2, v2: Vec2, v3: Vec2) -> Result<Mat2> {
    let pm = Mat2::from_columns(p2 - p1, p3 - p1);
    let det = pm.det();
    if det.abs() <= 1e-12 * pm.frobenius_sq() || !det.is_finite() {
        return Err(Error::DegenerateSimplex);
    }
    let (p11, p12, p21, p22) = (pm.a11(), pm.a12(), pm.a21(), pm.a22());
    let g = v1.outer(Vec2::new(p21 - p22, p12 - p11)) + v2.outer(Vec2::new(p22, -p12)) + v3.outer(Vec2::new(-p21, p11));
    Ok(g.scale(1.0 / det))
}

fn interpolate(points: [Vec2; 3], values: [Vec2; 3]) -> Result<Affine> {
    let g = interpolation_gradient(points[0], points[1], points[2], values[0], values[1], values[2])?;
    Ok(Affine::new(g, values[0] - g.apply(points[0])))
}

/// The affine deformation of a region, `None` on core squares.
pub fn affine_for_region(region: &RegionDescriptor, p: &Params, layout: &StripLayout) -> Result<Option<Affine>> {
    use RegionKind::*;
    match region.kind {
        SigmaMinusTheta => return Ok(Some(Affine::new(Mat2::rotation(-p.theta), Vec2::ZERO))),
        SigmaTheta => return Ok(Some(Affine::new(Mat2::rotation(p.theta), Vec2::ZERO))),
        D0 => return Ok(None),
        _ => {}
    }
    let missing = || Error::InvalidArgument(format!("region {region:?} lacks strip or square"));
    let strip = region.strip.and_then(|i| layout.strip(i)).ok_or_else(missing)?;
    let k = region.square.ok_or_else(missing)? as f64;
    let rot = Mat2::rotation(strip.rotation_angle(p.theta));
    let s = strip.side();
    let te = p.burgers_length();
    // cumulative opening above (top) and below (bottom) the core
    let top = strip.burgers.scale(s * k * te);
    let bottom = strip.burgers.scale(s * (k + 1.0) * te);
    let t = strip.center(region.square.unwrap() as usize);
    let affine = match region.kind {
        QlOrQr => Affine::new(rot, Vec2::ZERO),
        Ta => Affine::new(rot, top),
        Tb => Affine::new(rot, bottom),
        DeltaA | DeltaB => {
            let n = region.annulus.filter(|&n| n >= 1 && n <= strip.n_bar).ok_or_else(|| {
                Error::InvalidArgument(format!("region {region:?} has no valid annulus"))
            })?;
            let (rp, rn) = (strip.r(n - 1), strip.r(n));
            let at = |x: f64, y: f64| Vec2::new(x, y) + t;
            let (pts, offsets) = if region.kind == DeltaA {
                ([at(s * rp, -rp), at(s * rn, rn), at(s * rp, rp)], [bottom, top, top])
            } else {
                ([at(s * rp, -rp), at(s * rn, -rn), at(s * rn, rn)], [bottom, bottom, top])
            };
            let vals = [0, 1, 2].map(|j| rot.apply(pts[j]) + offsets[j]);
            interpolate(pts, vals)?
        }
        SigmaMinusTheta | SigmaTheta | D0 => unreachable!(),
    };
    Ok(Some(affine))
}

fn assemble_cells(p: &Params, layout: &StripLayout, clip: bool) -> Result<Vec<Cell>> {
    build_partition(p, layout, clip)?
        .into_iter()
        .map(|(polygon, region)| {
            let affine = affine_for_region(&region, p, layout)?;
            let strain = affine.map_or(Mat2::IDENTITY, |a| a.linear);
            Ok(Cell { polygon, region, affine, strain })
        })
        .collect()
}

/// Parameters with the lattice normalized; validates everything upstream of
/// the layout.
pub fn normalized_params(p: &Params) -> Result<Params> {
    p.validate()?;
    let mut q = p.clone();
    q.lattice = p.lattice.normalize()?;
    Ok(q)
}

/// Builds the complete strain field: normalizes the lattice, solves and snaps
/// the strip spacings, partitions `Ω` and assigns deformations and strains.
pub fn build_strain_field(p: &Params) -> Result<StrainField> {
    let params = normalized_params(p)?;
    let layout = strip_layout(&params)?;
    let cells = assemble_cells(&params, &layout, true)?;
    let cores = layout
        .strips
        .iter()
        .flat_map(|s| {
            (1..=s.count).map(move |k| CoreSite {
                center: s.center(k),
                half_side: s.r0,
                strip: s.index,
                square: k as u32,
            })
        })
        .collect();
    Ok(StrainField::from_parts(params, layout, cells, cores))
}

/// Cells of the field's natural extension: the last squares are not cut by
/// the lower boundary of `Ω`.
pub fn unclipped_cells(f: &StrainField) -> Result<Vec<Cell>> {
    assemble_cells(&f.params, &f.layout, false)
}
