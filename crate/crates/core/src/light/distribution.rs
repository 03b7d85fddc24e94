use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::raytrace::LightField;
use crate::error::{Error, Result};
use crate::geometry::CellIndex;

/// Light fraction below which a voxel is penalised.
pub const PENALTY_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
    Two,
}

impl LogBase {
    pub fn log1p(self, p: f64) -> f64 {
        let ln = (1.0 + p).ln();
        match self {
            LogBase::Natural => ln,
            LogBase::Ten => ln / std::f64::consts::LN_10,
            LogBase::Two => ln / std::f64::consts::LN_2,
        }
    }
}

/// Per-voxel response: quadratic penalty up to a quarter of full light,
/// logarithmic reward above. The jump at the threshold is intentional.
pub fn response(p: f64, base: LogBase) -> f64 {
    if p <= PENALTY_THRESHOLD {
        -(0.5 - p).powi(2)
    } else {
        base.log1p(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionScore {
    pub value: f64,
    pub per_voxel: BTreeMap<CellIndex, f64>,
}

/// `p_i = L_i / max L_j` over every cell of the field.
pub fn light_fraction(field: &LightField) -> Result<BTreeMap<CellIndex, f64>> {
    let max = field.absorbed.values().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::DegenerateLight);
    }
    Ok(field.absorbed.iter().map(|(&k, &l)| (k, l / max)).collect())
}

pub fn distribution_score(p: &BTreeMap<CellIndex, f64>) -> Result<DistributionScore> {
    distribution_score_with(p, LogBase::Natural)
}

pub fn distribution_score_with(p: &BTreeMap<CellIndex, f64>, base: LogBase) -> Result<DistributionScore> {
    if p.is_empty() {
        return Err(Error::param("p", "no voxels to score"));
    }
    if let Some((k, v)) = p.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::param("p", format!("fraction {v} at cell {k} is outside [0, 1]")));
    }
    let per_voxel: BTreeMap<CellIndex, f64> = p.iter().map(|(&k, &v)| (k, response(v, base))).collect();
    let value = per_voxel.values().sum::<f64>() / per_voxel.len() as f64;
    Ok(DistributionScore { value, per_voxel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(values: &[f64]) -> BTreeMap<CellIndex, f64> {
        values.iter().enumerate().map(|(i, &v)| (CellIndex::new(i as i64, 0, 0), v)).collect()
    }

    fn field(values: &[f64]) -> LightField {
        LightField {
            absorbed: map(values),
            total_emitted: values.iter().sum(),
            escaped: 0.0,
            p: BTreeMap::new(),
        }
    }

    #[test]
    fn fractions_divide_by_max() {
        let p = light_fraction(&field(&[2.0, 4.0, 8.0])).unwrap();
        assert_eq!(p.values().copied().collect::<Vec<_>>(), vec![0.25, 0.5, 1.0]);
        let p = light_fraction(&field(&[3.0, 3.0])).unwrap();
        assert!(p.values().all(|&v| v == 1.0));
        assert!(matches!(light_fraction(&field(&[0.0, 0.0])), Err(Error::DegenerateLight)));
    }

    #[test]
    fn score_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!((distribution_score(&map(&[1.0, 1.0])).unwrap().value - ln2).abs() < 1e-15);
        assert_eq!(distribution_score(&map(&[0.0, 0.0, 0.0])).unwrap().value, -0.25);
        let mixed = distribution_score(&map(&[0.1, 0.3])).unwrap().value;
        assert!((mixed - (-0.16 + 1.3f64.ln()) / 2.0).abs() < 1e-15);
        assert!((mixed - 0.0512).abs() < 1e-4);
    }

    #[test]
    fn threshold_jump_is_kept() {
        assert_eq!(response(0.25, LogBase::Natural), -0.0625);
        let just_above = response(0.25 + 1e-12, LogBase::Natural);
        assert!((just_above - 1.25f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn other_bases() {
        assert!((response(1.0, LogBase::Ten) - 2f64.log10()).abs() < 1e-15);
        assert!((response(1.0, LogBase::Two) - 1.0).abs() < 1e-15);
        assert_eq!(response(0.0, LogBase::Two), -0.25);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(distribution_score(&BTreeMap::new()).is_err());
        assert!(distribution_score(&map(&[1.5])).is_err());
        assert!(distribution_score(&map(&[-0.1])).is_err());
    }

    proptest! {
        #[test]
        fn score_is_bounded_and_scale_free(
            ls in prop::collection::vec(0.0f64..100.0, 1..50),
            scale in 0.01f64..100.0,
        ) {
            prop_assume!(ls.iter().any(|&l| l > 0.0));
            let p = light_fraction(&field(&ls)).unwrap();
            let scaled: Vec<f64> = ls.iter().map(|l| l * scale).collect();
            let q = light_fraction(&field(&scaled)).unwrap();
            let d = distribution_score(&p).unwrap();
            let e = distribution_score(&q).unwrap();
            prop_assert!((d.value - e.value).abs() < 1e-12);
            prop_assert!(d.value >= -0.25 && d.value <= std::f64::consts::LN_2 + 1e-15);
            for v in d.per_voxel.values() {
                prop_assert!(*v >= -0.25 && *v <= std::f64::consts::LN_2);
            }
            let all_full = p.values().all(|&v| v == 1.0);
            prop_assert_eq!(all_full, (d.value - std::f64::consts::LN_2).abs() < 1e-12);
        }
    }
}
