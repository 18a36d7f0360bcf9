//! A-priori estimates as executable checks on solution families.
//!
//! A finite family cannot certify a limit. "Uniformly bounded" is
//! operationalized as: every value finite, and the least-squares slope of
//! the signed logarithm `sign(x) ln(1 + |x|)` against the member index over
//! the last quartile of the family at most [`TREND_TOL`] in magnitude.

mod apriori;
mod table;

use serde::Serialize;

use crate::domain::{RegionMask, ScalarField};
use crate::error::{Error, Result};
use crate::threshold::Family;

pub use apriori::{apriori_c0_bound, minus_mask, AprioriBoundCertificate, DEFAULT_EPS0_FRACTION};
pub use table::{family_table, FamilyDiagnostics, FamilyRow, Verdict, CSV_COLUMNS, STABILITY_TOL};

/// Largest last-quartile slope per member, in signed-log scale.
pub const TREND_TOL: f64 = 0.01;

/// Summary of a scalar sequence along a family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trend {
    pub finite: bool,
    pub max_abs: f64,
    /// Last-quartile slope of the signed log.
    pub slope: f64,
}

impl Trend {
    pub fn of(values: &[f64]) -> Trend {
        let finite = !values.is_empty() && values.iter().all(|v| v.is_finite());
        let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let slope = if finite { tail_slope(values) } else { f64::NAN };
        Trend { finite, max_abs, slope }
    }

    pub fn flat(&self) -> bool {
        self.finite && self.slope.abs() <= TREND_TOL
    }

    pub fn not_falling(&self) -> bool {
        self.finite && self.slope >= -TREND_TOL
    }

    pub fn not_rising(&self) -> bool {
        self.finite && self.slope <= TREND_TOL
    }
}

fn signed_log(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

fn tail_slope(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = (n / 4).max(2);
    let tail = &values[n - m..];
    let xs: Vec<f64> = (0..m).map(|i| i as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|&v| signed_log(v)).collect();
    let xm = xs.iter().sum::<f64>() / m as f64;
    let ym = ys.iter().sum::<f64>() / m as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundCheck {
    /// `-min_k inf_M u_k`.
    pub a_observed: f64,
    pub infima: Vec<f64>,
    pub trend: Trend,
    pub pass: bool,
}

/// Uniform lower bound `u_k > -A` along the family.
pub fn check_lower_bound(family: &Family) -> Result<LowerBoundCheck> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty family".into()));
    }
    let infima: Vec<f64> = family.members.iter().map(|m| m.report.solution.min()).collect();
    let a_observed = -infima.iter().copied().fold(f64::INFINITY, f64::min);
    let trend = Trend::of(&infima);
    Ok(LowerBoundCheck {
        a_observed,
        pass: a_observed.is_finite() && trend.not_falling(),
        infima,
        trend,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupInfTrack {
    pub series: Vec<f64>,
    pub trend: Trend,
    pub pass: bool,
}

/// `sup_K u + inf_K u` per member; passes when bounded above.
pub fn sup_inf_track(family: &Family, k: &RegionMask) -> Result<SupInfTrack> {
    if k.is_empty() {
        return Err(Error::InvalidArgument(format!("region {} is empty", k.label())));
    }
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty family".into()));
    }
    let series = family
        .members
        .iter()
        .map(|m| sup_plus_inf(&m.report.solution, k))
        .collect::<Result<Vec<_>>>()?;
    let trend = Trend::of(&series);
    Ok(SupInfTrack {
        pass: trend.not_rising(),
        series,
        trend,
    })
}

pub(crate) fn sup_plus_inf(u: &ScalarField, k: &RegionMask) -> Result<f64> {
    if !std::sync::Arc::ptr_eq(u.domain(), k.domain()) && **u.domain() != **k.domain() {
        return Err(Error::DomainMismatch);
    }
    match (k.max_of(u), k.min_of(u)) {
        (Some(a), Some(b)) => Ok(a + b),
        _ => Err(Error::InvalidArgument(format!("region {} is empty", k.label()))),
    }
}
