use std::collections::VecDeque;

use super::{accepts, monotone_constant, Method, OrderInterval, SolveReport, SolverOptions, Termination};
use crate::domain::ScalarField;
use crate::error::{Error, Result};
use crate::problem::ProblemInstance;

/// Points closer than this to a bound count as active.
const INTERIOR_MARGIN: f64 = 1e-6;
/// Non-monotone Armijo memory.
const MEMORY: usize = 8;

/// Projected descent of `I(u)` over `X = {lower ≤ u ≤ upper}`.
///
/// Steps are taken along `-(-Δ + c)⁻¹ F(u)` (a Sobolev-preconditioned
/// gradient; the monotone constant makes the unit step a majorize-minimize
/// step) with Barzilai–Borwein lengths, clamped to the box after each step,
/// and accepted by a non-monotone Armijo test on the energy. Convergence is
/// measured by the projected residual: `F` itself at interior points, and
/// only its infeasible-direction part at active ones.
pub fn minimize_over_interval(
    inst: &ProblemInstance,
    interval: &OrderInterval,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let plan = inst.plan();
    let c = opts
        .monotone_c
        .unwrap_or_else(|| monotone_constant(inst, interval.upper()));
    let lower = interval.lower().values();
    let upper = interval.upper().values();
    let project = |v: Vec<f64>| -> ScalarField {
        let clamped = v
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(x, (l, h))| x.clamp(*l, *h))
            .collect();
        ScalarField::from_raw(inst.domain(), clamped)
    };
    let projected_norm = |u: &ScalarField, f: &ScalarField| -> f64 {
        u.values()
            .iter()
            .zip(f.values())
            .zip(lower.iter().zip(upper))
            .map(|((x, g), (l, h))| {
                let at_lower = *x <= l + INTERIOR_MARGIN && *g > 0.0;
                let at_upper = *x >= h - INTERIOR_MARGIN && *g < 0.0;
                if at_lower || at_upper {
                    0.0
                } else {
                    g.abs()
                }
            })
            .fold(0.0, f64::max)
    };
    let interior = |u: &ScalarField| -> bool {
        u.values()
            .iter()
            .zip(lower.iter().zip(upper))
            .all(|(x, (l, h))| *x > l + INTERIOR_MARGIN && *x < h - INTERIOR_MARGIN)
    };

    let start = match &opts.start {
        super::Start::Field(f) => f.clone(),
        _ => interval.upper().clone(),
    };
    let mut u = project(start.into_values());
    let mut f = inst.residual(&u)?;
    let mut energy = inst.energy(&u)?.total;
    let mut recent: VecDeque<f64> = VecDeque::from([energy]);
    let mut history = vec![projected_norm(&u, &f)];
    let mut step = 1.0;

    for it in 0..opts.max_iters {
        let pnorm = *history.last().unwrap();
        let is_interior = interior(&u);
        if pnorm <= opts.residual_tol && (!is_interior || accepts(inst, &f, opts.residual_tol)) {
            if is_interior {
                // Euler–Lagrange: an interior minimizer solves the equation
                assert!(f.sup_norm() <= opts.residual_tol);
            }
            return Ok(SolveReport::finish(inst, u, it, history, Method::Minimization, Termination::Converged));
        }
        let dir = plan.helmholtz_raw(c, f.values());
        let reference = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let slack = 1e-14 * (energy.abs() + 1.0);

        let mut s = step;
        let (next, next_f, next_energy) = loop {
            let trial = project(
                u.values()
                    .iter()
                    .zip(&dir)
                    .map(|(x, d)| x - s * d)
                    .collect(),
            );
            let moved: f64 = trial
                .values()
                .iter()
                .zip(u.values())
                .zip(f.values())
                .map(|((t, x), g)| g * (x - t))
                .sum::<f64>()
                * inst.domain().cell_volume();
            let e_trial = match inst.energy(&trial) {
                Ok(e) => e.total,
                Err(Error::Overflow { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            // ∇I = 2F, so the predicted decrease is 2·<F, u - trial>
            if e_trial.is_finite() && e_trial <= reference - opts.line_search.armijo * 2.0 * moved + slack {
                let tf = inst.residual(&trial)?;
                break (trial, tf, e_trial);
            }
            s *= 0.5;
            if s < opts.line_search.min_step {
                return Ok(SolveReport::finish(
                    inst,
                    u,
                    it,
                    history,
                    Method::Minimization,
                    Termination::LineSearchFailed,
                ));
            }
        };

        // Barzilai–Borwein length in the (-Δ + c) metric
        let du: Vec<f64> = next.values().iter().zip(u.values()).map(|(a, b)| a - b).collect();
        let df: Vec<f64> = next_f.values().iter().zip(f.values()).map(|(a, b)| a - b).collect();
        let mdu = plan.neg_laplacian_raw(&du);
        let num: f64 = du.iter().zip(&mdu).map(|(d, m)| d * (m + c * d)).sum();
        let den: f64 = du.iter().zip(&df).map(|(d, g)| d * g).sum();
        step = if den > 0.0 && num > 0.0 {
            (num / den).clamp(1e-2, 1e2)
        } else {
            1.0
        };

        u = next;
        f = next_f;
        energy = next_energy;
        recent.push_back(energy);
        if recent.len() > MEMORY {
            recent.pop_front();
        }
        history.push(projected_norm(&u, &f));
    }
    let pnorm = *history.last().unwrap();
    let term = if pnorm <= opts.residual_tol && (!interior(&u) || accepts(inst, &f, opts.residual_tol)) {
        Termination::Converged
    } else {
        Termination::BudgetExhausted
    };
    Ok(SolveReport::finish(inst, u, opts.max_iters, history, Method::Minimization, term))
}
