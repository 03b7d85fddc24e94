use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SunSample {
    /// Unit vector pointing from the sun toward the ground (x east, y north, z up).
    pub direction: Vec3,
    pub weight: f64,
    pub day: u32,
    pub hour: f64,
    pub elevation_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkyModel {
    pub samples: Vec<SunSample>,
    pub latitude: f64,
    pub season: (u32, u32),
    pub day_step: u32,
    pub time_step: f64,
}

impl SkyModel {
    pub fn total_weight(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).sum()
    }

    /// A one-sample sky, mostly for tests and what-if probes.
    pub fn single(direction: Vec3, weight: f64) -> Self {
        let direction = direction.normalize();
        SkyModel {
            samples: vec![SunSample {
                direction,
                weight,
                day: 0,
                hour: 0.0,
                elevation_deg: (-direction.z).asin().to_degrees(),
            }],
            latitude: 0.0,
            season: (0, 0),
            day_step: 1,
            time_step: 0.0,
        }
    }
}

/// Solar declination (radians) for a day of year, Cooper's approximation.
pub fn solar_declination(day: u32) -> f64 {
    let tilt = 23.44f64.to_radians();
    tilt * (2.0 * std::f64::consts::PI * (284.0 + day as f64) / 365.0).sin()
}

/// Unit vector toward the sun in local east-north-up coordinates for a
/// latitude (degrees), day of year and local solar time (hours).
pub fn sun_vector(latitude_deg: f64, day: u32, solar_hour: f64) -> Vec3 {
    let lat = latitude_deg.to_radians();
    let dec = solar_declination(day);
    let hour_angle = (15.0 * (solar_hour - 12.0)).to_radians();
    Vec3::new(
        -dec.cos() * hour_angle.sin(),
        lat.cos() * dec.sin() - lat.sin() * dec.cos() * hour_angle.cos(),
        lat.sin() * dec.sin() + lat.cos() * dec.cos() * hour_angle.cos(),
    )
}

/// Days of the season, stepping by `day_step`. A season whose end precedes
/// its start wraps through the new year.
pub(crate) fn season_days(season: (u32, u32), day_step: u32) -> Vec<u32> {
    let (start, end) = season;
    let span = if end >= start { end - start } else { 365 - start + end };
    (0..=span)
        .step_by(day_step as usize)
        .map(|k| (start - 1 + k) % 365 + 1)
        .collect()
}

pub(crate) fn day_hours(hour_step: f64) -> Vec<f64> {
    let n = (24.0 / hour_step).ceil() as usize;
    (0..n).map(|k| k as f64 * hour_step).filter(|&h| h < 24.0).collect()
}

/// Samples the direct-beam sun over a season. Every (day, hour) pair with
/// the sun above the horizon becomes one sample weighted by the sine of its
/// elevation.
pub fn build_sky_model(latitude: f64, season: (u32, u32), day_step: u32, hour_step: f64) -> Result<SkyModel> {
    if !(-90.0..=90.0).contains(&latitude) {
        return Err(Error::param("latitude", format!("{latitude} is outside [-90, 90]")));
    }
    if day_step == 0 {
        return Err(Error::param("day_step", "must be positive"));
    }
    if !(hour_step > 0.0 && hour_step.is_finite()) {
        return Err(Error::param("hour_step", "must be positive"));
    }
    for d in [season.0, season.1] {
        if !(1..=365).contains(&d) {
            return Err(Error::param("season", format!("day {d} is outside 1..=365")));
        }
    }

    let hours = day_hours(hour_step);
    let mut samples = Vec::new();
    for day in season_days(season, day_step) {
        for &hour in &hours {
            let to_sun = sun_vector(latitude, day, hour).normalize();
            if to_sun.z <= 0.0 {
                continue;
            }
            samples.push(SunSample {
                direction: -to_sun,
                weight: to_sun.z,
                day,
                hour,
                elevation_deg: to_sun.z.asin().to_degrees(),
            });
        }
    }
    if samples.is_empty() {
        return Err(Error::NoSun);
    }
    Ok(SkyModel {
        samples,
        latitude,
        season,
        day_step,
        time_step: hour_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equatorial_equinox_noon_is_overhead() {
        let sky = build_sky_model(0.0, (81, 81), 1, 1.0).unwrap();
        let noon = sky.samples.iter().find(|s| s.hour == 12.0).unwrap();
        assert!((noon.elevation_deg - 90.0).abs() <= 0.5, "{}", noon.elevation_deg);
        assert!((noon.direction - Vec3::new(0.0, 0.0, -1.0)).norm() < 0.01);
    }

    #[test]
    fn samples_are_downwelling_unit_vectors() {
        for lat in [-60.0, -25.0, 0.0, 35.0, 66.0] {
            let sky = build_sky_model(lat, (1, 365), 5, 0.5).unwrap();
            assert!(sky.total_weight() > 0.0);
            for s in &sky.samples {
                assert!(s.elevation_deg > 0.0);
                assert!(s.direction.z < 0.0);
                assert!((s.direction.norm() - 1.0).abs() < 1e-9);
                assert!((s.weight - s.elevation_deg.to_radians().sin()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn morning_sun_is_in_the_east() {
        let v = sun_vector(-25.0, 172, 9.0);
        assert!(v.x > 0.0);
        // Southern-hemisphere winter: sun stays to the north.
        assert!(sun_vector(-25.0, 172, 12.0).y > 0.0);
    }

    #[test]
    fn polar_night_has_no_sun() {
        assert!(matches!(build_sky_model(89.0, (355, 360), 1, 1.0), Err(Error::NoSun)));
    }

    #[test]
    fn invalid_parameters() {
        assert!(build_sky_model(91.0, (1, 10), 1, 1.0).is_err());
        assert!(build_sky_model(0.0, (1, 10), 0, 1.0).is_err());
        assert!(build_sky_model(0.0, (1, 10), 1, 0.0).is_err());
        assert!(build_sky_model(0.0, (0, 10), 1, 1.0).is_err());
    }

    #[test]
    fn wrapping_season() {
        assert_eq!(season_days((360, 3), 2), vec![360, 362, 364, 1, 3]);
        assert_eq!(season_days((10, 10), 7), vec![10]);
    }

    /// Independent elevation from the textbook altitude formula.
    fn oracle_elevation(lat_deg: f64, day: u32, hour: f64) -> f64 {
        let lat = lat_deg.to_radians();
        let dec = 23.44f64.to_radians() * ((284.0 + day as f64) * 360.0 / 365.0).to_radians().sin();
        let h = ((hour - 12.0) * 15.0).to_radians();
        (lat.sin() * dec.sin() + lat.cos() * dec.cos() * h.cos()).asin()
    }

    #[test]
    fn sample_count_matches_brute_force_enumeration() {
        let sky = build_sky_model(-25.0, (182, 212), 7, 1.0).unwrap();
        let mut expected = 0;
        let mut day = 182;
        while day <= 212 {
            for hour in 0..24 {
                if oracle_elevation(-25.0, day, hour as f64) > 0.0 {
                    expected += 1;
                }
            }
            day += 7;
        }
        assert_eq!(sky.samples.len(), expected);
        for s in &sky.samples {
            let e = oracle_elevation(-25.0, s.day, s.hour).to_degrees();
            assert!((s.elevation_deg - e).abs() < 1e-9);
        }
    }
}
