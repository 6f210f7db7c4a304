use std::path::{Path, PathBuf};

use gb_core::analysis::CheckOptions;
use gb_core::construction::{DEFAULT_MC_SAMPLES, DEFAULT_SEED};
use gb_core::{AreaMode, EnergyOptions, Lattice, LoopValidity, Params};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    Degrees,
    #[default]
    Radians,
}

impl AngleUnit {
    fn to_radians(self, v: f64) -> f64 {
        match self {
            AngleUnit::Degrees => v.to_radians(),
            AngleUnit::Radians => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometric {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

/// Sweep grid: explicit `sin θ` values or a geometric progression of them.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub sin_theta: Option<Vec<f64>>,
    pub geometric: Option<Geometric>,
}

impl SweepGrid {
    pub fn sin_values(&self) -> Result<Vec<f64>, CliError> {
        let values = match (&self.sin_theta, &self.geometric) {
            (Some(_), Some(_)) => {
                return Err(CliError::Validation("sweep takes either sin_theta or geometric, not both".into()))
            }
            (Some(v), None) => v.clone(),
            (None, Some(g)) => (0..g.count).map(|k| g.start * g.ratio.powi(k as i32)).collect(),
            (None, None) => Vec::new(),
        };
        if values.is_empty() {
            return Err(CliError::Validation("sweep grid is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(CliError::Validation(format!("sweep value sin(theta) = {v} outside (0, 1)")));
        }
        Ok(values)
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderOptions {
    /// Circle radius in canvas units (the canvas is 1000 units wide).
    pub point_radius: f64,
    pub stroke_width: f64,
    pub outlines: bool,
    /// `[x0, x1, y0, y1]` in reference coordinates; defaults to a window of
    /// width `4·max r̄` at the top of the interface.
    pub window: Option<[f64; 4]>,
    pub max_points: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { point_radius: 1.5, stroke_width: 0.5, outlines: false, window: None, max_points: 200_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub angle_unit: AngleUnit,
    pub epsilon: f64,
    pub tau: f64,
    pub lambda: f64,
    pub theta: Option<f64>,
    pub sin_theta: Option<f64>,
    pub phi: f64,
    pub eta: f64,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "l")]
    pub boundary_width: f64,
    pub mc_samples: usize,
    pub seed: u64,
    pub core_area: AreaMode,
    pub loop_validity: LoopValidity,
    pub n_random_loops: usize,
    pub sweep: SweepGrid,
    pub render: RenderOptions,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    /// Previously built field to check instead of building one.
    pub field: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            angle_unit: AngleUnit::Radians,
            epsilon: 1e-3,
            tau: 1.0,
            lambda: 4.0,
            theta: None,
            sin_theta: Some(2f64.powi(-5)),
            phi: -std::f64::consts::FRAC_PI_3,
            eta: std::f64::consts::FRAC_PI_6,
            half_width: 1.0,
            boundary_width: 0.05,
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: DEFAULT_SEED,
            core_area: AreaMode::Clipped,
            loop_validity: LoopValidity::Strict,
            n_random_loops: 20,
            sweep: SweepGrid::default(),
            render: RenderOptions::default(),
            out: None,
            csv: None,
            svg: None,
            field: None,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c: Config =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
        if c.theta.is_some() {
            // an explicit angle overrides the default sin(theta)
            let explicit_sin = serde_json::from_str::<serde_json::Value>(text)
                .ok()
                .is_some_and(|v| v.get("sin_theta").is_some());
            if explicit_sin {
                return Err(CliError::Validation("give either theta or sin_theta, not both".into()));
            }
            c.sin_theta = None;
        }
        Ok(c)
    }

    pub fn theta(&self) -> Result<f64, CliError> {
        match (self.theta, self.sin_theta) {
            (Some(t), _) => Ok(self.angle_unit.to_radians(t)),
            (None, Some(s)) if s > 0.0 && s < 1.0 => Ok(s.asin()),
            (None, Some(s)) => Err(CliError::Validation(format!("sin_theta = {s} outside (0, 1)"))),
            (None, None) => Err(CliError::Validation("missing theta or sin_theta".into())),
        }
    }

    pub fn lattice(&self) -> Result<Lattice, CliError> {
        Ok(Lattice::new(self.angle_unit.to_radians(self.phi), self.angle_unit.to_radians(self.eta))?)
    }

    pub fn params(&self) -> Result<Params, CliError> {
        let mut p = Params::new(
            self.epsilon,
            self.tau,
            self.lambda,
            self.theta()?,
            self.lattice()?,
            self.half_width,
            self.boundary_width,
        );
        p.mc_samples = self.mc_samples;
        p.seed = self.seed;
        p.validate()?;
        Ok(p)
    }

    pub fn energy_options(&self) -> EnergyOptions {
        EnergyOptions {
            mc_samples: self.mc_samples,
            seed: self.seed,
            core_area: self.core_area,
            elastic_extent: AreaMode::Clipped,
        }
    }

    pub fn check_options(&self) -> CheckOptions {
        CheckOptions {
            n_random_loops: self.n_random_loops,
            seed: self.seed,
            validity: self.loop_validity,
            ..CheckOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_default() {
        let c = Config::parse("{}").unwrap();
        assert_eq!(c, Config::default());
        let p = c.params().unwrap();
        assert!((p.theta.sin() - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn degrees_are_converted() {
        let c = Config::parse(r#"{"angle_unit": "degrees", "theta": 2.0, "phi": 30.0, "eta": 300.0}"#).unwrap();
        let p = c.params().unwrap();
        assert!((p.theta - 2f64.to_radians()).abs() < 1e-15);
        assert!((p.lattice.phi - 30f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn conflicting_or_unknown_fields_fail() {
        assert!(matches!(Config::parse(r#"{"theta": 0.1, "sin_theta": 0.1}"#), Err(CliError::Validation(_))));
        assert!(matches!(Config::parse(r#"{"epsilom": 0.1}"#), Err(CliError::Validation(_))));
    }

    #[test]
    fn sweep_grids() {
        let g = SweepGrid { sin_theta: None, geometric: Some(Geometric { start: 0.0625, ratio: 0.5, count: 3 }) };
        assert_eq!(g.sin_values().unwrap(), vec![0.0625, 0.03125, 0.015625]);
        assert!(SweepGrid::default().sin_values().is_err());
    }
}
