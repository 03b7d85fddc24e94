//! Seasonal sky model, voxel raytracing and the light distribution score.

mod distribution;
mod raytrace;
mod sky;

pub use distribution::{distribution_score, distribution_score_with, light_fraction, response, DistributionScore, LogBase};
pub use raytrace::{raytrace, LightField};
pub use sky::{build_sky_model, solar_declination, sun_vector, SkyModel, SunSample};
