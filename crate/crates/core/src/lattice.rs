//! Bravais lattices generated by two unit vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};

/// Below this `|sin|` a generator counts as parallel to `e1`, and below it
/// `|sin(phi - eta)|` counts as collinear.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    Swap,
    NegateB1,
    NegateB2,
}

/// Lattice `span_Z{b1, b2}` with unit generators at angles `phi`, `eta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub b1: Vec2,
    pub b2: Vec2,
    pub phi: f64,
    pub eta: f64,
    pub normalization: Vec<Transform>,
    /// Set when one generator is parallel to `e1`; the construction then uses
    /// a single strip with Burgers vector `b1 = e1`.
    pub degenerate: bool,
}

/// Fixed search order of generator variants, first match wins.
const VARIANTS: [&[Transform]; 8] = [
    &[],
    &[Transform::Swap],
    &[Transform::NegateB1],
    &[Transform::NegateB2],
    &[Transform::Swap, Transform::NegateB1],
    &[Transform::Swap, Transform::NegateB2],
    &[Transform::NegateB1, Transform::NegateB2],
    &[Transform::Swap, Transform::NegateB1, Transform::NegateB2],
];

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

impl Lattice {
    pub fn new(phi: f64, eta: f64) -> Result<Self> {
        if !phi.is_finite() || !eta.is_finite() {
            return Err(Error::InvalidArgument("lattice angles must be finite".into()));
        }
        if (phi - eta).sin().abs() <= DEGENERACY_THRESHOLD {
            return Err(Error::DegenerateLattice { phi, eta });
        }
        Ok(Self {
            b1: Vec2::from_angle(phi),
            b2: Vec2::from_angle(eta),
            phi,
            eta,
            normalization: Vec::new(),
            degenerate: false,
        })
    }

    /// `sin(phi - eta)` evaluated from the generators.
    pub fn sin_phi_minus_eta(&self) -> f64 {
        self.b1.y * self.b2.x - self.b1.x * self.b2.y
    }

    pub fn sin_phi(&self) -> f64 {
        self.b1.y
    }

    pub fn sin_eta(&self) -> f64 {
        self.b2.y
    }

    /// Both strip-spacing sign conditions:
    /// `sin(phi-eta)/sin(eta) < 0` and `sin(phi-eta)/sin(phi) > 0`.
    pub fn satisfies_sign_conditions(&self) -> bool {
        let s = self.sin_phi_minus_eta();
        s / self.sin_eta() < 0.0 && s / self.sin_phi() > 0.0
    }

    pub fn is_e1_degenerate(&self) -> bool {
        self.sin_phi().abs() < DEGENERACY_THRESHOLD || self.sin_eta().abs() < DEGENERACY_THRESHOLD
    }

    /// Generators at right angles (square lattice).
    pub fn is_square(&self) -> bool {
        self.b1.dot(self.b2).abs() < DEGENERACY_THRESHOLD
    }

    pub fn apply(&self, t: Transform) -> Lattice {
        let mut out = self.clone();
        match t {
            Transform::Swap => {
                std::mem::swap(&mut out.b1, &mut out.b2);
                std::mem::swap(&mut out.phi, &mut out.eta);
            }
            Transform::NegateB1 => {
                out.b1 = -out.b1;
                out.phi = wrap_angle(out.phi + std::f64::consts::PI);
            }
            Transform::NegateB2 => {
                out.b2 = -out.b2;
                out.eta = wrap_angle(out.eta + std::f64::consts::PI);
            }
        }
        out.normalization.push(t);
        out
    }

    fn apply_all(&self, ts: &[Transform]) -> Lattice {
        ts.iter().fold(self.clone(), |l, t| l.apply(*t))
    }

    /// Reorders/negates the generators so that both strip spacings are
    /// positive. For an `e1`-parallel generator, returns the lattice with
    /// `b1 = e1` and the degenerate flag set.
    pub fn normalize(&self) -> Result<Lattice> {
        if self.is_e1_degenerate() {
            let mut l = self.clone();
            if l.sin_phi().abs() >= DEGENERACY_THRESHOLD {
                l = l.apply(Transform::Swap);
            }
            if l.b1.x < 0.0 {
                l = l.apply(Transform::NegateB1);
            }
            l.degenerate = true;
            return Ok(l);
        }
        VARIANTS
            .iter()
            .map(|ts| self.apply_all(ts))
            .find(|l| l.satisfies_sign_conditions())
            .ok_or(Error::NormalizationFailed { phi: self.phi, eta: self.eta })
    }

    pub fn generator_matrix(&self) -> Mat2 {
        Mat2::from_columns(self.b1, self.b2)
    }

    /// `scale·(m·b1 + n·b2)`.
    pub fn point(&self, m: i64, n: i64, scale: f64) -> Vec2 {
        (self.b1.scale(m as f64) + self.b2.scale(n as f64)).scale(scale)
    }

    /// Real coordinates of `v` in the basis `scale·b1, scale·b2`.
    pub fn real_coords(&self, v: Vec2, scale: f64) -> Vec2 {
        let inv = self.generator_matrix().inverse().expect("generators span the plane");
        inv.apply(v.scale(1.0 / scale))
    }

    /// Distance from `v` to the nearest point of `scale·B`, together with its
    /// integer coordinates.
    pub fn nearest(&self, v: Vec2, scale: f64) -> ((i64, i64), f64) {
        let c = self.real_coords(v, scale);
        let (m0, n0) = (c.x.floor() as i64, c.y.floor() as i64);
        let mut best = ((m0, n0), f64::INFINITY);
        for dm in -1..=2 {
            for dn in -1..=2 {
                let (m, n) = (m0 + dm, n0 + dn);
                let d = (v - self.point(m, n, scale)).norm();
                if d < best.1 {
                    best = ((m, n), d);
                }
            }
        }
        best
    }
}

pub fn make_lattice(phi: f64, eta: f64) -> Result<Lattice> {
    Lattice::new(phi, eta)
}

pub fn normalize_generators(l: &Lattice) -> Result<Lattice> {
    l.normalize()
}

/// Integer coordinates `(m, n)` with `|v - scale·(m·b1 + n·b2)| <= tol`.
pub fn coords_in_lattice(v: Vec2, l: &Lattice, scale: f64, tol: f64) -> Option<(i64, i64)> {
    let c = l.real_coords(v, scale);
    let (m, n) = (c.x.round() as i64, c.y.round() as i64);
    ((v - l.point(m, n, scale)).norm() <= tol).then_some((m, n))
}
