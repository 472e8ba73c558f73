//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fractal::{FractalDefinition, Ifs, MapDefinition};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Dim,
    Solve,
    Sweep,
    Growth,
    Convergence,
    Density,
    EnergyLimit,
    IntervalCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Dim => "dim",
            Experiment::Solve => "solve",
            Experiment::Sweep => "sweep",
            Experiment::Growth => "growth",
            Experiment::Convergence => "convergence",
            Experiment::Density => "density",
            Experiment::EnergyLimit => "energy-limit",
            Experiment::IntervalCheck => "interval-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Linear,
    /// Geometric in `d - s`.
    LogGap,
}

/// An `s` grid: explicit `values`, explicit `gaps` (`d - s`), or `min`/`max`/`count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SGridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
}

impl SGridSpec {
    pub fn from_gaps(gaps: &[f64]) -> Self {
        SGridSpec {
            gaps: Some(gaps.to_vec()),
            ..Default::default()
        }
    }

    /// Increasing `s` values inside `(0, d)`.
    pub fn resolve(&self, d: f64) -> Result<Vec<f64>> {
        let mut s: Vec<f64> = if let Some(v) = &self.values {
            v.clone()
        } else if let Some(g) = &self.gaps {
            let mut v: Vec<f64> = g.iter().map(|g| d - g).collect();
            v.sort_by(f64::total_cmp);
            v
        } else {
            let (Some(lo), Some(hi), Some(n)) = (self.min, self.max, self.count) else {
                return Err(Error::invalid(
                    "s grid needs values, gaps, or min/max/count",
                ));
            };
            if n == 0 || hi < lo {
                return Err(Error::invalid("s grid needs count > 0 and min <= max"));
            }
            match (self.spacing, n) {
                (_, 1) => vec![lo],
                (Spacing::Linear, _) => (0..n)
                    .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                    .collect(),
                (Spacing::LogGap, _) => {
                    if !(hi < d) {
                        return Err(Error::invalid("log-gap grid needs max < d"));
                    }
                    crate::fit::log_space(d - lo, d - hi, n)
                        .into_iter()
                        .map(|g| d - g)
                        .collect()
                }
            }
        };
        s.dedup();
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("s grid must be strictly increasing"));
        }
        if let Some(bad) = s.iter().find(|s| !(**s > 0.0 && **s < d)) {
            return Err(Error::invalid(format!(
                "grid value s = {bad} outside (0, {d})"
            )));
        }
        Ok(s)
    }
}

/// Pass/fail thresholds; every report echoes the ones it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub dimension_abs: f64,
    /// Uniqueness check: discrepancy below this multiple of `tol`.
    pub uniqueness_factor: f64,
    /// Growth: `max K / median K` below this.
    pub growth_factor: f64,
    /// Growth: relative change of `max K` when the radius floor drops tenfold.
    pub growth_stability: f64,
    pub discrepancy_limit: f64,
    /// Discrepancies at or below this are treated as exactly zero.
    pub discrepancy_floor: f64,
    pub mass_limit: f64,
    pub energy_ratio_rel: f64,
    pub interval_l1: f64,
    pub interval_uniform: f64,
    pub prop22_rel: f64,
    pub constancy_rel: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            dimension_abs: 1e-10,
            uniqueness_factor: 10.0,
            growth_factor: 3.0,
            growth_stability: 0.2,
            discrepancy_limit: 1e-2,
            discrepancy_floor: 1e-12,
            mass_limit: 1e-2,
            energy_ratio_rel: 0.05,
            interval_l1: 0.02,
            interval_uniform: 0.10,
            prop22_rel: 0.05,
            constancy_rel: 0.05,
        }
    }
}

/// A density perturbation given cell-wise at a coarse level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub level: usize,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    /// Fractal given inline, in the same layout as a fractal file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ambient_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maps: Option<Vec<MapDefinition>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diameter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fractal_file: Option<PathBuf>,
    pub level: usize,
    pub s_grid: SGridSpec,
    /// Single `s` for `solve`; defaults to the last grid value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    pub near_pair_depth: usize,
    pub coarse_levels: Vec<usize>,
    /// Trailing grid points used for trends and linear extrapolation.
    pub trend_points: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub samples: usize,
    /// Letters in the random words used for typical-point densities.
    pub word_len: usize,
    pub radius_floor: f64,
    pub radius_count: usize,
    pub perturbations: Vec<Perturbation>,
    pub random_perturbations: usize,
    pub perturbation_level: usize,
    pub perturbation_amplitude: f64,
    /// Check values for `dim`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_dimension: Option<f64>,
    /// `s` values for `interval-check`: the closed-form test and the near-uniform test.
    pub interval_s: f64,
    pub interval_uniform_s: f64,
    /// Fraction of cells, centred, counted as interior.
    pub interior_fraction: f64,
    pub thresholds: Thresholds,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            ambient_dim: None,
            maps: None,
            diameter: None,
            fractal_file: None,
            level: 8,
            s_grid: SGridSpec::from_gaps(&[0.2, 0.1, 0.05, 0.025, 0.0125]),
            s: None,
            tol: crate::equilibrium::DEFAULT_TOL,
            max_iter: None,
            near_pair_depth: crate::energy::DEFAULT_NEAR_PAIR_DEPTH,
            coarse_levels: vec![1],
            trend_points: 3,
            seed: 1,
            out: PathBuf::from("out"),
            samples: 10,
            word_len: 96,
            radius_floor: 1e-4,
            radius_count: 41,
            perturbations: vec![Perturbation {
                level: 1,
                density: vec![1.5, 0.5],
            }],
            random_perturbations: 20,
            perturbation_level: 2,
            perturbation_amplitude: 0.3,
            expected_dimension: None,
            interval_s: 0.5,
            interval_uniform_s: 0.95,
            interior_fraction: 0.9,
            thresholds: Thresholds::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads a config; a relative `fractal_file` is resolved against the config's directory
    /// and inlined so the echoed config is self-contained.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(path.display().to_string()))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        if let Some(file) = cfg.fractal_file.take() {
            let full = match path.parent() {
                Some(dir) if file.is_relative() => dir.join(&file),
                _ => file.clone(),
            };
            let text = std::fs::read_to_string(&full)
                .map_err(|e| Error::from(e).context(full.display().to_string()))?;
            let def: FractalDefinition = serde_json::from_str(&text)
                .map_err(|e| Error::invalid(format!("{}: {e}", full.display())))?;
            if cfg.maps.is_some() {
                return Err(Error::invalid(
                    "give either inline maps or fractal_file, not both",
                ));
            }
            cfg.set_fractal(def);
            cfg.fractal_file = Some(file);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        if !(self.perturbation_amplitude >= 0.0 && self.perturbation_amplitude < 1.0) {
            return Err(Error::invalid("perturbation amplitude must lie in [0, 1)"));
        }
        if !(self.interior_fraction > 0.0 && self.interior_fraction <= 1.0) {
            return Err(Error::invalid("interior fraction must lie in (0, 1]"));
        }
        if self.trend_points < 2 {
            return Err(Error::invalid("trends need at least two points"));
        }
        if !(self.radius_floor > 0.0 && self.radius_floor < 1.0) || self.radius_count < 2 {
            return Err(Error::invalid(
                "radius grid needs a positive floor and two radii",
            ));
        }
        Ok(())
    }

    pub fn set_fractal(&mut self, def: FractalDefinition) {
        self.ambient_dim = Some(def.ambient_dim);
        self.maps = Some(def.maps);
        self.diameter = def.diameter;
    }

    pub fn fractal(&self) -> Result<FractalDefinition> {
        match (&self.ambient_dim, &self.maps) {
            (Some(p), Some(maps)) => Ok(FractalDefinition {
                ambient_dim: *p,
                maps: maps.clone(),
                diameter: self.diameter,
            }),
            _ => Err(Error::invalid(
                "config has no fractal (ambient_dim and maps)",
            )),
        }
    }

    /// The validated IFS of the configured fractal.
    pub fn ifs(&self) -> Result<Ifs> {
        Ifs::from_definition(&self.fractal()?)?.validated()
    }
}
