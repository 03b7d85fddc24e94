//! Config file loading and command-line overrides.

use std::path::Path;

use anyhow::{Context, Result};
use canopy_core::PipelineConfig;
use clap::Args;

/// Pipeline settings that can be given on the command line. Anything set
/// here wins over the config file, which wins over built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Voxel edge length in meters.
    #[arg(long, global = true)]
    pub voxel_size: Option<f64>,
    #[arg(long, global = true)]
    pub neighbor_radius: Option<f64>,
    #[arg(long, global = true)]
    pub cut_radius: Option<f64>,
    /// Fraction of incoming light a voxel absorbs.
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    #[arg(long, global = true)]
    pub ray_spacing: Option<f64>,
    #[arg(long, global = true)]
    pub slice_height: Option<f64>,
    /// Site latitude in degrees, negative south.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub latitude: Option<f64>,
    /// Day-of-year range as START:END.
    #[arg(long, global = true, value_parser = parse_season)]
    pub season: Option<[u32; 2]>,
    #[arg(long, global = true)]
    pub day_step: Option<u32>,
    #[arg(long, global = true)]
    pub hour_step: Option<f64>,
    #[arg(long, global = true)]
    pub shade_percentile: Option<f64>,
    #[arg(long, global = true)]
    pub candidate_percentile: Option<f64>,
    #[arg(long, global = true)]
    pub min_separation: Option<f64>,
    /// Number of cuts to suggest.
    #[arg(short, long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub match_tolerance: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
}

fn parse_season(s: &str) -> Result<[u32; 2], String> {
    let (a, b) = s.split_once(':').ok_or("expected START:END")?;
    let day = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("bad day `{v}`: {e}"));
    Ok([day(a)?, day(b)?])
}

impl Overrides {
    pub fn apply(&self, c: &mut PipelineConfig) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    c.$field = v;
                }
            )*};
        }
        set!(voxel_size, kappa, slice_height, latitude, season, day_step, hour_step);
        set!(shade_percentile, candidate_percentile, min_separation, k, seed);
        if self.neighbor_radius.is_some() {
            c.neighbor_radius = self.neighbor_radius;
        }
        if self.cut_radius.is_some() {
            c.cut_radius = self.cut_radius;
        }
        if self.ray_spacing.is_some() {
            c.ray_spacing = self.ray_spacing;
        }
        if self.match_tolerance.is_some() {
            c.match_tolerance = self.match_tolerance;
        }
        if let Some(v) = self.alpha {
            c.coefficients.alpha = v;
        }
        if let Some(v) = self.beta {
            c.coefficients.beta = v;
        }
        if let Some(v) = self.gamma {
            c.coefficients.gamma = v;
        }
    }
}

pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    Ok(toml::from_str(text)?)
}

pub fn to_toml(config: &PipelineConfig) -> Result<String> {
    Ok(toml::to_string(config)?)
}

/// Defaults, then the file at `path`, then `overrides`.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<PipelineConfig> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            parse_config(&text).with_context(|| format!("config {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    overrides.apply(&mut config);
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("voxel_size = 0.3\nvoxle = 1\n").unwrap_err();
        assert!(format!("{err:#}").contains("voxle"), "{err:#}");
        let err = parse_config("[benchmark]\nreplicate = 2\n").unwrap_err();
        assert!(format!("{err:#}").contains("replicate"), "{err:#}");
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let file = parse_config("voxel_size = 0.3\nkappa = 0.7\n").unwrap();
        let mut c = file.clone();
        Overrides {
            kappa: Some(0.9),
            ..Default::default()
        }
        .apply(&mut c);
        assert_eq!(c.voxel_size, 0.3);
        assert_eq!(c.kappa, 0.9);
        assert_eq!(c.seed, PipelineConfig::default().seed);
    }

    #[test]
    fn season_parses() {
        assert_eq!(parse_season("300:60").unwrap(), [300, 60]);
        assert!(parse_season("300").is_err());
    }
}
