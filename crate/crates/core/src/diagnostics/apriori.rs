use serde::Serialize;

use crate::domain::{sublevel_mask, RegionMask, ScalarField};
use crate::error::{Error, Result};
use crate::spectral::SpectralPlan;

/// Default `ε₀ / max|S|` for the negative region `M₋ = {S < -ε₀}`.
pub const DEFAULT_EPS0_FRACTION: f64 = 0.05;

/// Tolerance for `φ = 1` on `K`.
const PLATEAU_TOL: f64 = 1e-12;

/// `M₋ = {S < -ε₀}` with `ε₀ = fraction · max|S|`.
pub fn minus_mask(s: &ScalarField, fraction: f64) -> RegionMask {
    sublevel_mask(s, -fraction * s.sup_norm(), "M_minus")
}

/// Upper bound on `sup_K u` valid for every solution at any `α ∈ (α★, 0)`,
/// computed from `S`, `α★` and a cutoff `φ` alone.
#[derive(Debug, Clone, Serialize)]
pub struct AprioriBoundCertificate {
    #[serde(skip)]
    pub cutoff: ScalarField,
    #[serde(skip)]
    pub k: RegionMask,
    pub alpha_star: f64,
    pub n: u32,
    /// `max_M (2|∇φ|² - 2φΔφ - (2/n) α★ φ²)`.
    pub c1: f64,
    /// `max S` over the support of `φ`; negative.
    pub max_s_on_support: f64,
    pub bound_on_sup_u: f64,
}

impl AprioriBoundCertificate {
    /// `bound - sup_K u`; nonnegative when the certificate holds for `u`.
    pub fn margin(&self, u: &ScalarField) -> Result<f64> {
        u.check_domain(&self.cutoff)?;
        let sup = self
            .k
            .max_of(u)
            .ok_or_else(|| Error::InvalidArgument("empty K".into()))?;
        Ok(self.bound_on_sup_u - sup)
    }

    pub fn margins<'a>(&self, fields: impl IntoIterator<Item = &'a ScalarField>) -> Result<Vec<f64>> {
        fields.into_iter().map(|u| self.margin(u)).collect()
    }
}

/// At a maximum of `φ² e^{2u/n}` the equation forces
/// `e^{2u/n} ≤ -(n/2) C / max_{supp φ} S` on `{φ = 1}`.
///
/// Requires `supp φ ⊂ {S < 0}` and `K ⊆ {φ = 1}`.
pub fn apriori_c0_bound(
    plan: &SpectralPlan,
    s: &ScalarField,
    alpha_star: f64,
    n: u32,
    phi: &ScalarField,
    k: &RegionMask,
) -> Result<AprioriBoundCertificate> {
    s.check_domain(phi)?;
    if !(alpha_star < 0.0 && alpha_star.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha_star must be finite and negative, got {alpha_star}")));
    }
    if k.is_empty() {
        return Err(Error::InvalidArgument("K is empty".into()));
    }
    let mut max_s = f64::NEG_INFINITY;
    for (i, (&p, &sv)) in phi.values().iter().zip(s.values()).enumerate() {
        if p != 0.0 {
            if sv >= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "cutoff support leaks into S >= 0 at grid point {i} (S = {sv})"
                )));
            }
            max_s = max_s.max(sv);
        }
    }
    if !(max_s < 0.0) {
        return Err(Error::InvalidArgument("cutoff has empty support".into()));
    }
    if let Some(i) = (0..phi.len()).find(|&i| k.contains(i) && (phi.values()[i] - 1.0).abs() > PLATEAU_TOL) {
        return Err(Error::InvalidArgument(format!(
            "K leaves the plateau of the cutoff at grid point {i} (phi = {})",
            phi.values()[i]
        )));
    }

    let grad2 = plan.grad_norm_sq(phi)?;
    let lap = plan.laplacian(phi)?;
    let e = 2.0 / n as f64;
    let c1 = phi
        .values()
        .iter()
        .zip(grad2.values())
        .zip(lap.values())
        .map(|((p, g), l)| 2.0 * g - 2.0 * p * l - e * alpha_star * p * p)
        .fold(f64::NEG_INFINITY, f64::max);
    let half_n = 0.5 * n as f64;
    let bound_exp = -half_n * c1 / max_s;
    if !(bound_exp > 0.0 && bound_exp.is_finite()) {
        return Err(Error::InvalidArgument(format!("degenerate bound {bound_exp} from C = {c1}")));
    }
    Ok(AprioriBoundCertificate {
        cutoff: phi.clone(),
        k: k.clone(),
        alpha_star,
        n,
        c1,
        max_s_on_support: max_s,
        bound_on_sup_u: half_n * bound_exp.ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ball_mask, make_cutoff, CutoffSpec, TorusDomain};
    use std::f64::consts::PI;

    #[test]
    fn all_constant_algebra() {
        let d = TorusDomain::unit(2, 16).unwrap();
        let p = SpectralPlan::new(&d);
        let s = ScalarField::constant(&d, -1.0);
        let phi = ScalarField::constant(&d, 1.0);
        let k = RegionMask::new(&d, vec![true; d.len()], "M").unwrap();
        let cert = apriori_c0_bound(&p, &s, -2.0, 1, &phi, &k).unwrap();
        assert!((cert.c1 - 4.0).abs() < 1e-12);
        assert!((cert.bound_on_sup_u - 0.5 * 2f64.ln()).abs() < 1e-12);
        // exact solutions e^{2u} = -α < 2
        for alpha in [-0.5f64, -1.0, -1.9] {
            let u = ScalarField::constant(&d, 0.5 * (-alpha).ln());
            assert!(cert.margin(&u).unwrap() > 0.0);
        }
    }

    #[test]
    fn preconditions() {
        let d = TorusDomain::unit(2, 32).unwrap();
        let p = SpectralPlan::new(&d);
        let s = ScalarField::from_fn(&d, |x| (2.0 * PI * x[0]).sin() - 0.5);
        let k = ball_mask(&d, &[0.75, 0.5], 0.05, "K");
        // centered where S = 0.5 > 0
        let bad = make_cutoff(&d, &CutoffSpec::new(vec![0.25, 0.5], 0.1, 0.2)).unwrap();
        let kb = ball_mask(&d, &[0.25, 0.5], 0.05, "K");
        assert!(apriori_c0_bound(&p, &s, -3.2, 1, &bad, &kb).is_err());
        // support straddling the sign change
        let wide = make_cutoff(&d, &CutoffSpec::new(vec![0.75, 0.5], 0.1, 0.4)).unwrap();
        assert!(apriori_c0_bound(&p, &s, -3.2, 1, &wide, &k).is_err());
        // K outside the plateau
        let phi = make_cutoff(&d, &CutoffSpec::new(vec![0.75, 0.5], 0.05, 0.2)).unwrap();
        let big_k = ball_mask(&d, &[0.75, 0.5], 0.15, "K");
        assert!(apriori_c0_bound(&p, &s, -3.2, 1, &phi, &big_k).is_err());
        let cert = apriori_c0_bound(&p, &s, -3.2, 1, &phi, &k).unwrap();
        assert!(cert.bound_on_sup_u.is_finite());
    }

    #[test]
    fn minus_mask_uses_the_fraction() {
        let d = TorusDomain::unit(2, 64).unwrap();
        let s = ScalarField::from_fn(&d, |x| (2.0 * PI * x[0]).sin() - 0.5);
        let m = minus_mask(&s, DEFAULT_EPS0_FRACTION);
        let eps0 = 0.05 * 1.5;
        for i in 0..d.len() {
            assert_eq!(m.contains(i), s.values()[i] < -eps0);
        }
    }
}
