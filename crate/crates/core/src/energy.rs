//! Elastic and core energy of a constructed field, the predicted
//! Read–Shockley constants and misorientation sweeps.

use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construction::{build_strain_field, unclipped_cells, Cell, Params, RegionDescriptor, StrainField};
use crate::error::{Error, Result};
use crate::geometry::{point_in_band, square_band_area, Mat2};
use crate::lattice::Lattice;
use crate::sampling::{polygon_area_where, rect_area_where, substream};

/// Integrands below this are rounding noise on rotation-valued cells.
const NEGLIGIBLE_INTEGRAND: f64 = 1e-24;

/// Whether the last square of each strip is cut by the domain boundary
/// (`Clipped`) or taken whole (`Unclipped`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaMode {
    #[default]
    Clipped,
    Unclipped,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyOptions {
    pub mc_samples: usize,
    pub seed: u64,
    pub core_area: AreaMode,
    pub elastic_extent: AreaMode,
}

impl EnergyOptions {
    pub fn from_params(p: &Params) -> Self {
        Self {
            mc_samples: p.mc_samples,
            seed: p.seed,
            core_area: AreaMode::Clipped,
            elastic_extent: AreaMode::Clipped,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedConstants {
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "E1")]
    pub e1: f64,
    /// `1 + E1/E0`.
    #[serde(rename = "A")]
    pub a: f64,
    /// Closed-form simplification of `A`.
    #[serde(rename = "A_simplified")]
    pub a_simplified: f64,
    /// Read–Shockley constant, square lattices only.
    #[serde(rename = "A_RS")]
    pub a_rs: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub elastic: f64,
    pub core: f64,
    pub total: f64,
    #[serde(flatten)]
    pub constants: PredictedConstants,
    #[serde(rename = "A_minus_A_RS")]
    pub a_minus_a_rs: Option<f64>,
    /// `εL·E0·sinθ·(A − log2 sinθ)`.
    pub bound_value: f64,
    pub ratio: f64,
    pub n_cores: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub sin_theta: f64,
    pub elastic: f64,
    pub core: f64,
    pub total: f64,
    pub normalized: f64,
    pub neg_log2_sin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub fit: LinearFit,
    pub reports: Vec<EnergyReport>,
}

/// Squared Frobenius distance from `f` to SO(2).
///
/// The nearest rotation has `cos ∝ a11 + a22`, `sin ∝ a21 − a12`; the
/// distance is evaluated directly from it rather than through
/// `|F|² + 2 − 2√(|F|² + 2 det F)`, which cancels badly near SO(2).
pub fn dist2_so2(f: &Mat2) -> f64 {
    let (a, b, c, d) = (f.a11(), f.a12(), f.a21(), f.a22());
    let rho = (a + d).hypot(c - b);
    if rho == 0.0 {
        return f.frobenius_sq() + 2.0;
    }
    let (cs, sn) = ((a + d) / rho, (c - b) / rho);
    (*f - Mat2::new(cs, -sn, sn, cs)).frobenius_sq()
}

fn region_key(r: &RegionDescriptor) -> u64 {
    (r.kind as u64) << 8 | r.strip.unwrap_or(0) as u64
}

fn region_subkey(r: &RegionDescriptor) -> u64 {
    (r.square.unwrap_or(0) as u64) << 32 | r.annulus.unwrap_or(0) as u64
}

/// Order-independent sum: terms are sorted before accumulation.
fn canonical_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn cell_energy(f: &StrainField, cells: &[Cell], idx: usize, opts: &EnergyOptions) -> f64 {
    let cell = &cells[idx];
    let d2 = dist2_so2(&cell.strain);
    let area = cell.polygon.area();
    if d2 < NEGLIGIBLE_INTEGRAND {
        return d2 * area;
    }
    let core = cell
        .region
        .strip
        .zip(cell.region.square)
        .and_then(|(s, k)| f.core_index(s, k))
        .map(|i| f.cores[i]);
    let Some(core) = core else { return d2 * area };
    let r0 = core.half_side;
    if !cell.polygon.bounding_rect().intersects(&core.band_rect(r0), 0.0) {
        return d2 * area;
    }
    let mut rng = substream(opts.seed, 0x656c_6173 ^ region_key(&cell.region), region_subkey(&cell.region));
    let outside = polygon_area_where(&cell.polygon, opts.mc_samples, &mut rng, |x| {
        !point_in_band(x, core.center, r0, r0)
    });
    d2 * outside
}

fn elastic_cells<'a>(f: &'a StrainField, opts: &EnergyOptions) -> Result<Cow<'a, [Cell]>> {
    Ok(match opts.elastic_extent {
        AreaMode::Clipped => Cow::Borrowed(&f.cells),
        AreaMode::Unclipped => Cow::Owned(unclipped_cells(f)?),
    })
}

/// Elastic energy contribution of a single cell of the (clipped) field.
pub fn cell_elastic_energy(f: &StrainField, idx: usize, opts: &EnergyOptions) -> f64 {
    cell_energy(f, &f.cells, idx, opts)
}

/// `Σ dist²(β, SO(2))·area(cell \ core band)` over all cells.
pub fn elastic_energy(f: &StrainField, opts: &EnergyOptions) -> Result<f64> {
    let cells = elastic_cells(f, opts)?;
    let terms: Vec<f64> = (0..cells.len()).into_par_iter().map(|i| cell_energy(f, &cells, i, opts)).collect();
    Ok(canonical_sum(terms))
}

/// `Σ (τε/r0)²·area(B_{r0}(∂D0 + t) ∩ Ω)` over all cores.
pub fn core_energy(f: &StrainField, opts: &EnergyOptions) -> Result<f64> {
    let omega = f.params.domain();
    let te = f.params.burgers_length();
    let terms: Vec<f64> = (0..f.cores.len())
        .into_par_iter()
        .map(|i| {
            let core = f.cores[i];
            let r0 = core.half_side;
            let band = core.band_rect(r0);
            let area = if opts.core_area == AreaMode::Unclipped || omega.contains_rect(&band, 0.0) {
                square_band_area(r0, r0)?
            } else {
                match band.intersection(&omega) {
                    None => 0.0,
                    Some(rect) => {
                        let key = (core.strip as u64) << 32 | core.square as u64;
                        let mut rng = substream(opts.seed, 0x636f_7265, key);
                        rect_area_where(&rect, opts.mc_samples, &mut rng, |x| point_in_band(x, core.center, r0, r0))
                    }
                }
            };
            Ok((te / r0).powi(2) * area)
        })
        .collect::<Result<_>>()?;
    Ok(canonical_sum(terms))
}

/// Angle in `(0, π/2)` of the generator direction of a square lattice.
fn square_angle(l: &Lattice) -> Option<f64> {
    if !l.is_square() {
        return None;
    }
    let dirs = [l.b1, -l.b1, l.b2, -l.b2];
    Some(
        dirs.iter()
            .map(|v| v.y.atan2(v.x))
            .find(|a| *a >= 0.0 && *a < std::f64::consts::FRAC_PI_2)
            .unwrap_or(0.0),
    )
}

fn x_log2(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Square-lattice energy constants at generator angle `phi ∈ [0, π/2)`:
/// `(E0, A, A_RS)`.
pub fn square_lattice_constants(tau: f64, lambda: f64, phi: f64) -> (f64, f64, f64) {
    let (s, c) = phi.sin_cos();
    let e0 = tau * (s + c);
    let mix = (x_log2(c) + x_log2(s)) / (s + c);
    let a = 1.0 + (tau / (4.0 * lambda)).log2() - mix;
    let a_rs = 1.0 + (tau / (2.0 * std::f64::consts::PI * lambda)).log2() - (2.0 * phi).sin() / 2.0 - mix;
    (e0, a, a_rs)
}

/// Predicted constants for a normalized lattice.
pub fn predicted_constants(tau: f64, lambda: f64, l: &Lattice) -> Result<PredictedConstants> {
    let a_rs = square_angle(l).map(|phi| square_lattice_constants(tau, lambda, phi).2);
    if l.degenerate || l.is_e1_degenerate() {
        let e1 = tau * (tau / (4.0 * lambda)).log2();
        let a = 1.0 + e1 / tau;
        return Ok(PredictedConstants { e0: tau, e1, a, a_simplified: a, a_rs });
    }
    if !l.satisfies_sign_conditions() {
        return Err(Error::InvalidArgument("predicted constants need a normalized lattice".into()));
    }
    let (sp, se, s) = (l.sin_phi(), l.sin_eta(), l.sin_phi_minus_eta());
    let e0 = tau * (sp - se) / s;
    let e1 = tau
        * (sp / s * (tau * s / (4.0 * lambda * sp)).log2() - se / s * (-tau * s / (4.0 * lambda * se)).log2());
    let a = 1.0 + e1 / e0;
    let a_simplified = 1.0
        + (tau * s.abs() / (4.0 * lambda)).log2()
        + (se * se.abs().log2() - sp * sp.abs().log2()) / (sp - se);
    Ok(PredictedConstants { e0, e1, a, a_simplified, a_rs })
}

pub fn energy_report_for_field(f: &StrainField, opts: &EnergyOptions) -> Result<EnergyReport> {
    let p = &f.params;
    let elastic = elastic_energy(f, opts)?;
    let core = core_energy(f, opts)?;
    let total = elastic + core;
    let constants = predicted_constants(p.tau, p.lambda, &p.lattice)?;
    let sin_theta = p.theta.sin();
    let bound_value = p.epsilon * p.half_width * constants.e0 * sin_theta * (constants.a - sin_theta.log2());
    Ok(EnergyReport {
        elastic,
        core,
        total,
        constants,
        a_minus_a_rs: constants.a_rs.map(|rs| constants.a - rs),
        bound_value,
        ratio: total / bound_value,
        n_cores: f.cores.len(),
    })
}

pub fn energy_report(p: &Params, opts: &EnergyOptions) -> Result<EnergyReport> {
    energy_report_for_field(&build_strain_field(p)?, opts)
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("fit needs equally many x and y values".into()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 points, got {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// Energy at each misorientation angle and a fit of `total/(εL sinθ)`
/// against `−log2 sinθ`.
pub fn theta_sweep(p: &Params, thetas: &[f64], opts: &EnergyOptions) -> Result<SweepResult> {
    if thetas.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 angles, got {}", thetas.len())));
    }
    let mut rows = Vec::with_capacity(thetas.len());
    let mut reports = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let q = Params { theta, ..p.clone() };
        let r = energy_report(&q, opts)?;
        let sin_theta = theta.sin();
        rows.push(SweepRow {
            theta,
            sin_theta,
            elastic: r.elastic,
            core: r.core,
            total: r.total,
            normalized: r.total / (p.epsilon * p.half_width * sin_theta),
            neg_log2_sin: -sin_theta.log2(),
        });
        reports.push(r);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.neg_log2_sin).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.normalized).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(SweepResult { rows, fit, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::RegionKind;
    use std::f64::consts::PI;

    fn brute_force(f: &Mat2) -> f64 {
        (0..3600)
            .map(|k| (*f - Mat2::rotation(2.0 * PI * k as f64 / 3600.0)).frobenius_sq())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn distance_examples() {
        assert_eq!(dist2_so2(&Mat2::IDENTITY), 0.0);
        assert!(dist2_so2(&Mat2::rotation(0.7)) < 1e-30);
        assert!((dist2_so2(&Mat2::new(1.1, 0.0, 0.0, 1.0)) - 0.01).abs() < 1e-15);
        assert!((dist2_so2(&Mat2::IDENTITY.scale(2.0)) - 2.0).abs() < 1e-15);
        assert!((dist2_so2(&Mat2::ZERO) - 2.0).abs() < 1e-15);
        let reflection = Mat2::new(1.0, 0.0, 0.0, -1.0);
        assert!((dist2_so2(&reflection) - brute_force(&reflection)).abs() < 1e-5);
    }

    #[test]
    fn distance_matches_closed_form() {
        let f = Mat2::new(0.3, -1.2, 2.0, 0.4);
        let s = f.frobenius_sq();
        let closed = s + 2.0 - 2.0 * (s + 2.0 * f.det()).sqrt();
        assert!((dist2_so2(&f) - closed).abs() < 1e-12);
    }

    #[test]
    fn square_constants_at_pi_over_4() {
        let (e0, a, _) = square_lattice_constants(1.0, 1.0, PI / 4.0);
        assert!((e0 - 2f64.sqrt()).abs() < 1e-15);
        assert!((a + 0.5).abs() < 1e-14);
        let (_, a0, rs0) = square_lattice_constants(2.0, 5.0, 0.0);
        assert!((a0 - (1.0 + (2.0f64 / 20.0).log2())).abs() < 1e-15);
        assert!((rs0 - (1.0 + (2.0 / (10.0 * PI)).log2())).abs() < 1e-15);
    }

    #[test]
    fn general_constants_agree_with_square_forms() {
        let phi = PI / 6.0;
        let l = Lattice::new(phi, phi + 1.5 * PI).unwrap().normalize().unwrap();
        let c = predicted_constants(1.0, 4.0, &l).unwrap();
        let (e0, a, a_rs) = square_lattice_constants(1.0, 4.0, phi);
        assert!((c.e0 - e0).abs() < 1e-12);
        assert!((c.a - a).abs() < 1e-12);
        assert!((c.a - c.a_simplified).abs() < 1e-12);
        assert!((c.a_rs.unwrap() - a_rs).abs() < 1e-12);
    }

    #[test]
    fn simplified_a_holds_with_negative_sine() {
        let l = Lattice::new(-PI / 3.0, PI / 6.0).unwrap().normalize().unwrap();
        assert!(l.sin_phi_minus_eta() < 0.0);
        let c = predicted_constants(1.0, 4.0, &l).unwrap();
        assert!((c.a - c.a_simplified).abs() < 1e-12);
    }

    #[test]
    fn degenerate_constants() {
        let l = Lattice::new(0.0, PI / 2.0).unwrap().normalize().unwrap();
        let c = predicted_constants(1.0, 4.0, &l).unwrap();
        assert_eq!(c.e0, 1.0);
        assert!((c.a - (1.0 + (1.0f64 / 16.0).log2())).abs() < 1e-15);
        assert!((c.a_rs.unwrap() - (1.0 + (1.0 / (8.0 * PI)).log2())).abs() < 1e-15);
    }

    #[test]
    fn fit_of_exact_line() {
        let fit = linear_fit(&[1.0, 2.0, 3.0, 4.0], &[3.0, 5.0, 7.0, 9.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14 && (fit.intercept - 1.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
        assert!(matches!(linear_fit(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::InsufficientData(_))));
    }

    fn field() -> StrainField {
        let l = Lattice::new(-PI / 3.0, PI / 6.0).unwrap();
        build_strain_field(&Params::new(1e-3, 1.0, 2.0, 2f64.powi(-5).asin(), l, 1.0, 0.05)).unwrap()
    }

    #[test]
    fn interior_cores_carry_exact_band_energy() {
        let f = field();
        let mut opts = EnergyOptions::from_params(&f.params);
        opts.core_area = AreaMode::Unclipped;
        let expected = (12.0 + PI) * f.params.burgers_length().powi(2) * f.cores.len() as f64;
        let core = core_energy(&f, &opts).unwrap();
        assert!((core - expected).abs() <= 1e-12 * expected);
        opts.core_area = AreaMode::Clipped;
        assert!(core_energy(&f, &opts).unwrap() <= core * (1.0 + 1e-12));
    }

    #[test]
    fn cells_away_from_the_band_use_exact_area() {
        let f = field();
        let opts = EnergyOptions::from_params(&f.params);
        let s1 = f.layout.strip(1).unwrap();
        let i = f
            .cells
            .iter()
            .position(|c| {
                c.region.kind == RegionKind::DeltaA && c.region.annulus == Some(s1.n_bar) && c.region.square == Some(2)
            })
            .unwrap();
        let c = &f.cells[i];
        let expected = dist2_so2(&c.strain) * c.polygon.area();
        assert!(s1.n_bar >= 2);
        assert_eq!(cell_elastic_energy(&f, i, &opts), expected);
        assert!(expected > 0.0);
    }

    #[test]
    fn rotation_cells_carry_no_energy() {
        let f = field();
        let opts = EnergyOptions::from_params(&f.params);
        for (i, c) in f.cells.iter().enumerate().filter(|(_, c)| !c.region.is_delta()) {
            assert!(cell_elastic_energy(&f, i, &opts) < 1e-20, "{:?}", c.region);
        }
    }

    #[test]
    fn report_is_deterministic() {
        let f = field();
        let mut opts = EnergyOptions::from_params(&f.params);
        opts.mc_samples = 500;
        let a = energy_report_for_field(&f, &opts).unwrap();
        let b = energy_report_for_field(&f, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.total > 0.0 && a.ratio.is_finite());
        assert_eq!(a.total, a.elastic + a.core);
    }
}
