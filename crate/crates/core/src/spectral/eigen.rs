use super::SpectralPlan;
use crate::domain::ScalarField;
use crate::error::{Error, Result};
use crate::krylov::{dot, norm, pcg};

pub const DEFAULT_EIG_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// Unit vector in the Euclidean grid norm.
    pub vector: ScalarField,
    pub iterations: usize,
    /// `‖(-Δ + V)x - λx‖` for the returned unit vector; bounds `|λ - λ_j|`
    /// for some eigenvalue `λ_j`.
    pub residual: f64,
}

/// Smallest eigenvalue of `-Δ + V`.
pub fn min_eigenvalue(plan: &SpectralPlan, potential: &ScalarField, tol: f64) -> Result<f64> {
    min_eigenpair(plan, potential, tol).map(|p| p.value)
}

/// Shifted inverse power iteration for the ground state of `-Δ + V`.
///
/// The shift sits one unit below `min V`, so `-Δ + V - σ ≥ 1` and each inner
/// solve is a positive definite CG with a constant-coefficient Helmholtz
/// preconditioner. The start vector is the constant field, which overlaps
/// the (positive) ground state.
pub fn min_eigenpair(plan: &SpectralPlan, potential: &ScalarField, tol: f64) -> Result<EigenPair> {
    plan.check(potential)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("eigen tolerance must be positive, got {tol}")));
    }
    let v = potential.values();
    let sigma = potential.min() - 1.0;
    let shifted: Vec<f64> = v.iter().map(|x| x - sigma).collect();
    let c_pre = shifted.iter().sum::<f64>() / shifted.len() as f64;
    let max_n = plan.domain().sizes().iter().copied().max().unwrap_or(8);
    let max_iter = 10 * max_n;

    let apply = |x: &[f64]| -> Vec<f64> {
        let mut y = plan.neg_laplacian_raw(x);
        for ((yi, xi), vi) in y.iter_mut().zip(x).zip(v) {
            *yi += vi * xi;
        }
        y
    };
    let apply_shifted = |x: &[f64]| -> Vec<f64> {
        let mut y = plan.neg_laplacian_raw(x);
        for ((yi, xi), wi) in y.iter_mut().zip(x).zip(&shifted) {
            *yi += wi * xi;
        }
        y
    };

    let n = v.len();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut rho = f64::NAN;
    let mut res = f64::INFINITY;
    for it in 0..=max_iter {
        let ax = apply(&x);
        rho = dot(&x, &ax);
        res = ax
            .iter()
            .zip(&x)
            .map(|(a, xi)| (a - rho * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        if res <= tol {
            return Ok(EigenPair {
                value: rho,
                vector: ScalarField::from_raw(plan.domain(), x),
                iterations: it,
                residual: res,
            });
        }
        if it == max_iter {
            break;
        }
        let mut y = x.clone();
        let out = pcg(
            apply_shifted,
            |r| plan.helmholtz_raw(c_pre, r),
            &x,
            &mut y,
            1e-13,
            2000,
        );
        if !out.converged && out.relative_residual > 1e-9 {
            break;
        }
        let ny = norm(&y);
        x = y.into_iter().map(|t| t / ny).collect();
    }
    Err(Error::NotConverged {
        what: "inverse iteration",
        iterations: max_iter,
        estimate: if res.is_finite() { rho } else { f64::NAN },
    })
}
