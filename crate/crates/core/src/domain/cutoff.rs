use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ScalarField, TorusDomain};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutoffProfile {
    /// `1 - (6t⁵ - 15t⁴ + 10t³)` in the normalized radial variable; C².
    QuinticSmoothstep,
}

/// Radial bump: identically one on the inner ball, zero outside the outer one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub center: Vec<f64>,
    pub r_inner: f64,
    pub r_outer: f64,
    pub profile: CutoffProfile,
}

impl CutoffSpec {
    pub fn new(center: Vec<f64>, r_inner: f64, r_outer: f64) -> Self {
        CutoffSpec {
            center,
            r_inner,
            r_outer,
            profile: CutoffProfile::QuinticSmoothstep,
        }
    }

    fn validate(&self, domain: &TorusDomain) -> Result<()> {
        if self.center.len() != domain.dim() {
            return Err(Error::InvalidArgument(format!(
                "cutoff center has {} coordinates, domain dimension is {}",
                self.center.len(),
                domain.dim()
            )));
        }
        if !(self.r_inner > 0.0 && self.r_inner < self.r_outer) {
            return Err(Error::InvalidArgument(format!(
                "cutoff radii must satisfy 0 < r_inner < r_outer, got {} and {}",
                self.r_inner, self.r_outer
            )));
        }
        let half = 0.5 * domain.shortest_period();
        if self.r_outer > half {
            return Err(Error::InvalidArgument(format!(
                "cutoff r_outer {} exceeds half the shortest period {half}",
                self.r_outer
            )));
        }
        Ok(())
    }

    /// Profile value at periodic distance `r` from the center.
    pub fn profile_at(&self, r: f64) -> f64 {
        if r <= self.r_inner {
            return 1.0;
        }
        if r >= self.r_outer {
            return 0.0;
        }
        let t = (r - self.r_inner) / (self.r_outer - self.r_inner);
        match self.profile {
            CutoffProfile::QuinticSmoothstep => 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t)),
        }
    }
}

/// Samples the cutoff described by `spec` on the grid.
pub fn make_cutoff(domain: &Arc<TorusDomain>, spec: &CutoffSpec) -> Result<ScalarField> {
    spec.validate(domain)?;
    Ok(ScalarField::from_fn(domain, |x| {
        spec.profile_at(domain.distance(x, &spec.center))
    }))
}
