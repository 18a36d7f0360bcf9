use super::{accepts, Method, OrderInterval, SolveReport, SolverOptions, Termination};
use crate::domain::ScalarField;
use crate::error::{Error, Result};
use crate::problem::ProblemInstance;

/// Allowed upward drift of an iterate relative to its predecessor.
const MONOTONE_SLACK: f64 = 1e-12;
/// Allowed escape from the order interval.
const INTERVAL_SLACK: f64 = 1e-9;

/// Smallest constant (plus one) making `u ↦ c u + S e^{2u/n}` nondecreasing
/// below `max upper`.
pub fn monotone_constant(inst: &ProblemInstance, upper: &ScalarField) -> f64 {
    let e = inst.exponent();
    e * inst.s().sup_norm() * (e * upper.max()).exp() + 1.0
}

/// Fixed point iteration `u ← (-Δ + c)⁻¹(c u - α + S e^{2u/n})` from the
/// super-solution down.
///
/// With `c` from [`monotone_constant`] the map preserves order on the
/// interval, so the iterates decrease pointwise and stay above the
/// sub-solution. Either property failing by more than round-off is an error:
/// it means the interval or the override of `c` is wrong.
pub fn monotone_iterate(
    inst: &ProblemInstance,
    interval: &OrderInterval,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let plan = inst.plan();
    let c = opts
        .monotone_c
        .unwrap_or_else(|| monotone_constant(inst, interval.upper()));
    let alpha = inst.alpha();
    let mut u = interval.upper().clone();
    let mut f = inst.residual(&u)?;
    let mut history = vec![f.sup_norm()];

    for it in 0..opts.max_iters {
        if accepts(inst, &f, opts.residual_tol) {
            return Ok(SolveReport::finish(inst, u, it, history, Method::Monotone, Termination::Converged));
        }
        let ef = inst.conformal_factor(&u)?;
        let rhs: Vec<f64> = u
            .values()
            .iter()
            .zip(inst.s().values())
            .zip(ef.values())
            .map(|((ui, si), ei)| c * ui - alpha + si * ei)
            .collect();
        let next = ScalarField::from_raw(inst.domain(), plan.helmholtz_raw(c, &rhs));

        if let Some(i) = next
            .values()
            .iter()
            .zip(u.values())
            .position(|(a, b)| *a > b + MONOTONE_SLACK)
        {
            return Err(Error::OrderInterval(format!(
                "iterate {} increased at index {i} by {:e}",
                it + 1,
                next.values()[i] - u.values()[i]
            )));
        }
        if !interval.contains(&next, INTERVAL_SLACK) {
            return Err(Error::OrderInterval(format!(
                "iterate {} left the order interval (c = {c})",
                it + 1
            )));
        }
        u = next;
        f = inst.residual(&u)?;
        history.push(f.sup_norm());
    }
    let term = if accepts(inst, &f, opts.residual_tol) {
        Termination::Converged
    } else {
        Termination::BudgetExhausted
    };
    Ok(SolveReport::finish(inst, u, opts.max_iters, history, Method::Monotone, term))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TorusDomain;
    use crate::solvers::{build_sub_solution, newton_solve, Start};
    use crate::spectral::SpectralPlan;

    #[test]
    fn constant_instance_converges_from_above() {
        let d = TorusDomain::unit(2, 32).unwrap();
        let p = SpectralPlan::new(&d);
        let inst = ProblemInstance::new(&p, ScalarField::constant(&d, -2.0), -2.0, 1).unwrap();
        let deeper = inst.with_alpha(-2.5).unwrap();
        let warm = newton_solve(&deeper, &SolverOptions::default()).unwrap();
        let interval = OrderInterval::from_warm(&inst, &warm).unwrap();
        let rep = monotone_iterate(&inst, &interval, &SolverOptions::interval_engines()).unwrap();
        assert!(rep.converged);
        assert!(rep.solution.sup_norm() < 1e-10);
        assert!(rep.solution.min() >= 0.0, "approached from above");
    }

    #[test]
    fn too_small_constant_is_detected_or_harmless() {
        // c far below the safe value breaks order preservation
        let d = TorusDomain::unit(2, 16).unwrap();
        let p = SpectralPlan::new(&d);
        let inst = ProblemInstance::new(&p, ScalarField::constant(&d, -2.0), -2.0, 1).unwrap();
        let lower = build_sub_solution(&inst).unwrap();
        let upper = ScalarField::constant(&d, 1.5);
        let interval = OrderInterval::new(&inst, lower, upper).unwrap();
        let opts = SolverOptions {
            monotone_c: Some(0.05),
            ..SolverOptions::interval_engines()
        };
        assert!(monotone_iterate(&inst, &interval, &opts).is_err());
    }

    #[test]
    fn sign_changing_instance_agrees_with_newton() {
        let d = TorusDomain::unit(2, 32).unwrap();
        let p = SpectralPlan::new(&d);
        let s = ScalarField::from_fn(&d, |x| (2.0 * std::f64::consts::PI * x[0]).sin() - 0.5);
        let inst = ProblemInstance::new(&p, s, -1.0, 1).unwrap();
        let deeper = newton_solve(
            &inst.with_alpha(-1.5).unwrap(),
            &SolverOptions::default().with_start(Start::ConstantGuess),
        )
        .unwrap();
        assert!(deeper.converged);
        let interval = OrderInterval::from_warm(&inst, &deeper).unwrap();
        let mono = monotone_iterate(&inst, &interval, &SolverOptions::interval_engines()).unwrap();
        assert!(mono.converged, "{:?}", mono.termination);
        for w in mono.residual_history.windows(2).take(3) {
            assert!(w[1].is_finite() && w[0].is_finite());
        }
        let newton = newton_solve(&inst, &SolverOptions::default().with_start(Start::Field(deeper.solution.clone()))).unwrap();
        assert!(newton.converged);
        assert!(newton.solution.max_abs_diff(&mono.solution) < 1e-7);
    }
}
