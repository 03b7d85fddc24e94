//! Pipeline parameters shared by every stage.
//!
//! One [`PipelineConfig`] governs voxelization, lighting, scoring, pruning,
//! suggestion and the synthetic benchmark, so an experiment is reproducible
//! from a single file. Radii left unset are derived from `voxel_size`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::light::{build_sky_model, LogBase, SkyModel};
use crate::scoring::Coefficients;
use crate::synth::BenchmarkConfig;
use crate::treegraph::{CUT_RADIUS_FACTOR, NEIGHBOR_RADIUS_FACTOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub voxel_size: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neighbor_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut_radius: Option<f64>,
    pub kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ray_spacing: Option<f64>,
    pub slice_height: f64,
    pub log_base: LogBase,
    pub latitude: f64,
    /// Inclusive day-of-year range; wraps through the new year when the end
    /// precedes the start.
    pub season: [u32; 2],
    pub day_step: u32,
    pub hour_step: f64,
    pub shade_percentile: f64,
    pub candidate_percentile: f64,
    pub min_separation: f64,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub match_tolerance: Option<f64>,
    pub seed: u64,
    pub coefficients: Coefficients,
    pub benchmark: BenchmarkConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            voxel_size: crate::geometry::DEFAULT_VOXEL_SIZE,
            neighbor_radius: None,
            cut_radius: None,
            kappa: 0.5,
            ray_spacing: None,
            slice_height: crate::scoring::DEFAULT_SLICE_HEIGHT,
            log_base: LogBase::Natural,
            latitude: -25.0,
            season: [1, 365],
            day_step: 7,
            hour_step: 1.0,
            shade_percentile: 75.0,
            candidate_percentile: 95.0,
            min_separation: 1.0,
            k: 7,
            match_tolerance: None,
            seed: 0,
            coefficients: Coefficients::default(),
            benchmark: BenchmarkConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn neighbor_radius(&self) -> f64 {
        self.neighbor_radius.unwrap_or(NEIGHBOR_RADIUS_FACTOR * self.voxel_size)
    }

    pub fn cut_radius(&self) -> f64 {
        self.cut_radius.unwrap_or(CUT_RADIUS_FACTOR * self.voxel_size)
    }

    pub fn ray_spacing(&self) -> f64 {
        self.ray_spacing.unwrap_or(self.voxel_size / 2.0)
    }

    pub fn match_tolerance(&self) -> f64 {
        self.match_tolerance.unwrap_or(self.voxel_size / 2.0)
    }

    /// Radius around the trunk node inside which no cut is suggested.
    pub fn trunk_exclusion_radius(&self) -> f64 {
        2.0 * self.cut_radius()
    }

    pub fn sky(&self) -> Result<SkyModel> {
        build_sky_model(self.latitude, (self.season[0], self.season[1]), self.day_step, self.hour_step)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        positive("voxel_size", self.voxel_size)?;
        positive("neighbor_radius", self.neighbor_radius())?;
        positive("cut_radius", self.cut_radius())?;
        positive("ray_spacing", self.ray_spacing())?;
        positive("slice_height", self.slice_height)?;
        positive("hour_step", self.hour_step)?;
        positive("match_tolerance", self.match_tolerance())?;
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::param("kappa", format!("must be in (0, 1], got {}", self.kappa)));
        }
        if self.day_step == 0 {
            return Err(Error::param("day_step", "must be positive"));
        }
        for (name, p) in [("shade_percentile", self.shade_percentile), ("candidate_percentile", self.candidate_percentile)] {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::param(name, format!("{p} is outside [0, 100]")));
            }
        }
        if !(self.min_separation >= 0.0) {
            return Err(Error::param("min_separation", "must be non-negative"));
        }
        if self.k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        let c = self.coefficients;
        if ![c.alpha, c.beta, c.gamma].iter().all(|v| v.is_finite()) {
            return Err(Error::param("coefficients", "must be finite"));
        }
        self.benchmark.validate()
    }
}
