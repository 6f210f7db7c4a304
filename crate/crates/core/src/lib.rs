//! Explicit small-angle grain-boundary construction for a two-dimensional
//! semi-discrete dislocation energy.
//!
//! The crate builds a piecewise-constant strain field on
//! `Ω = [-L, L] × [-2L, 0]` for an arbitrary Bravais lattice, certifies that it
//! is admissible (curl supported on the dislocation cores, quantized
//! circulations, rotation boundary conditions) and evaluates the elastic and
//! core energy of the field.
//!
//! Modules, bottom-up:
//! - [`geometry`]: vectors, matrices, convex polygons, core bands.
//! - [`lattice`]: generators, sign normalization, lattice membership.
//! - [`construction`]: strip layout, partition, affine maps, strain field.
//! - [`analysis`]: interface jumps, circulations, admissibility report.
//! - [`energy`]: distance to SO(2), elastic/core energy, constants, sweeps.

pub mod analysis;
pub mod construction;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod json;
pub mod lattice;
mod sampling;

pub use analysis::{AdmissibilityReport, CheckOptions, InterfaceJump, LoopValidity};
pub use construction::{
    build_strain_field, Cell, CoreSite, Params, RegionDescriptor, RegionKind, StrainField, Strip,
    StripLayout,
};
pub use energy::{AreaMode, EnergyOptions, EnergyReport, LinearFit, PredictedConstants, SweepResult, SweepRow};
pub use error::{Error, Result};
pub use geometry::{Affine, Mat2, Polygon, Rect, Segment, Vec2};
pub use lattice::{Lattice, Transform};
