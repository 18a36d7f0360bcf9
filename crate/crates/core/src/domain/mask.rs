use std::sync::Arc;

use super::{ScalarField, TorusDomain};
use crate::error::{Error, Result};

/// Boolean indicator of a region of the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    domain: Arc<TorusDomain>,
    inside: Vec<bool>,
    label: String,
}

impl RegionMask {
    pub fn new(domain: &Arc<TorusDomain>, inside: Vec<bool>, label: impl Into<String>) -> Result<Self> {
        if inside.len() != domain.len() {
            return Err(Error::InvalidArgument(format!(
                "mask has {} entries, domain has {} points",
                inside.len(),
                domain.len()
            )));
        }
        Ok(RegionMask {
            domain: Arc::clone(domain),
            inside,
            label: label.into(),
        })
    }

    pub fn domain(&self) -> &Arc<TorusDomain> {
        &self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn contains(&self, index: usize) -> bool {
        self.inside[index]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.inside
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Quadrature measure of the region.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.domain.cell_volume()
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.inside
            .iter()
            .zip(&other.inside)
            .all(|(&a, &b)| !a || b)
    }

    /// Checks the containment a `K` mask owes its parent region.
    pub fn require_subset_of(&self, parent: &RegionMask) -> Result<()> {
        if self.is_subset_of(parent) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "mask '{}' is not contained in '{}'",
                self.label, parent.label
            )))
        }
    }

    pub fn intersect(&self, other: &RegionMask, label: impl Into<String>) -> RegionMask {
        RegionMask {
            domain: Arc::clone(&self.domain),
            inside: self
                .inside
                .iter()
                .zip(&other.inside)
                .map(|(&a, &b)| a && b)
                .collect(),
            label: label.into(),
        }
    }

    pub fn max_of(&self, f: &ScalarField) -> Option<f64> {
        self.values_of(f).reduce(f64::max)
    }

    pub fn min_of(&self, f: &ScalarField) -> Option<f64> {
        self.values_of(f).reduce(f64::min)
    }

    fn values_of<'a>(&'a self, f: &'a ScalarField) -> impl Iterator<Item = f64> + 'a {
        f.values()
            .iter()
            .zip(&self.inside)
            .filter(|(_, &b)| b)
            .map(|(&v, _)| v)
    }
}

/// Region where `s < threshold`. An empty region is a valid answer.
pub fn sublevel_mask(s: &ScalarField, threshold: f64, label: impl Into<String>) -> RegionMask {
    RegionMask {
        domain: Arc::clone(s.domain()),
        inside: s.values().iter().map(|&v| v < threshold).collect(),
        label: label.into(),
    }
}

/// Region where `s > threshold`.
pub fn superlevel_mask(s: &ScalarField, threshold: f64, label: impl Into<String>) -> RegionMask {
    RegionMask {
        domain: Arc::clone(s.domain()),
        inside: s.values().iter().map(|&v| v > threshold).collect(),
        label: label.into(),
    }
}

/// Closed periodic ball around `center`.
pub fn ball_mask(
    domain: &Arc<TorusDomain>,
    center: &[f64],
    radius: f64,
    label: impl Into<String>,
) -> RegionMask {
    let mut x = vec![0.0; domain.dim()];
    let inside = (0..domain.len())
        .map(|i| {
            domain.point_into(i, &mut x);
            domain.distance(&x, center) <= radius
        })
        .collect();
    RegionMask {
        domain: Arc::clone(domain),
        inside,
        label: label.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_sublevel_sets() {
        let d = TorusDomain::unit(2, 16).unwrap();
        let neg = ScalarField::constant(&d, -1.0);
        assert_eq!(sublevel_mask(&neg, -0.5, "M_minus").count(), d.len());
        let pos = ScalarField::constant(&d, 1.0);
        assert!(sublevel_mask(&pos, -0.5, "M_minus").is_empty());
    }

    #[test]
    fn sublevel_measure_matches_arc_fraction() {
        // {sin(2πx) - 0.5 < -0.1} = {sin(2πx) < 0.4}; its length on [0,1) is
        // 1 - (π - 2 asin(0.4)) / (2π)
        let n = 128;
        let d = TorusDomain::unit(2, n).unwrap();
        let s = ScalarField::from_fn(&d, |x| (2.0 * PI * x[0]).sin() - 0.5);
        let mask = sublevel_mask(&s, -0.1, "M_minus");
        let exact = 1.0 - (PI - 2.0 * 0.4f64.asin()) / (2.0 * PI);
        assert!((mask.measure() - exact).abs() <= 2.0 / n as f64);
    }

    #[test]
    fn ball_inside_sublevel_set() {
        let d = TorusDomain::unit(2, 64).unwrap();
        let s = ScalarField::from_fn(&d, |x| (2.0 * PI * x[0]).sin() - 0.5);
        let m_minus = sublevel_mask(&s, -0.1, "M_minus");
        let k = ball_mask(&d, &[0.75, 0.5], 0.1, "K");
        assert!(k.require_subset_of(&m_minus).is_ok());
        let too_big = ball_mask(&d, &[0.75, 0.5], 0.45, "K");
        assert!(too_big.require_subset_of(&m_minus).is_err());
        assert_eq!(m_minus.max_of(&s).map(|v| v < -0.1), Some(true));
    }

    proptest! {
        #[test]
        fn sublevel_sets_are_nested(t1 in -2.0f64..2.0, t2 in -2.0f64..2.0, phase in 0.0f64..1.0) {
            let d = TorusDomain::unit(2, 16).unwrap();
            let s = ScalarField::from_fn(&d, |x| (2.0 * PI * (x[0] + phase)).sin() + 0.3 * (2.0 * PI * x[1]).cos());
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(sublevel_mask(&s, lo, "a").is_subset_of(&sublevel_mask(&s, hi, "b")));
        }
    }
}
