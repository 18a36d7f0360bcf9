use super::{accepts, Method, SolveReport, SolverOptions, Termination};
use crate::error::{Error, Result};
use crate::krylov::gmres;
use crate::problem::ProblemInstance;

const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITERS: usize = 1200;

/// Damped Newton iteration on `F(u) = 0`.
///
/// Each step solves `(-Δ + V) δ = -F(u)` with `V = -(2/n) S e^{2u/n}` by
/// GMRES, right-preconditioned with `(-Δ + c)⁻¹`, then backtracks on
/// `‖F‖_∞` with an Armijo test. Failure modes are reported in the
/// [`Termination`] of a non-converged report; a report is marked converged
/// only when the sup-norm residual is at or below `opts.residual_tol`.
pub fn newton_solve(inst: &ProblemInstance, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let plan = inst.plan();
    let mut u = opts.start.resolve(inst)?;
    let mut history = Vec::new();
    let finish = |u, it, history, term| Ok(SolveReport::finish(inst, u, it, history, Method::Newton, term));

    let mut f = match inst.residual(&u) {
        Ok(f) => f,
        Err(Error::Overflow { max_u, .. }) => {
            return finish(u, 0, history, Termination::BlowUp { max_u });
        }
        Err(e) => return Err(e),
    };
    let mut fnorm = f.sup_norm();
    history.push(fnorm);

    for it in 0..opts.max_iters {
        if accepts(inst, &f, opts.residual_tol) {
            return finish(u, it, history, Termination::Converged);
        }
        let v = inst.linearized_potential(&u)?;
        let c = v.mean().max(1.0);
        let vv = v.values();
        let apply = |x: &[f64]| -> Vec<f64> {
            let mut y = plan.neg_laplacian_raw(x);
            for ((yi, xi), vi) in y.iter_mut().zip(x).zip(vv) {
                *yi += vi * xi;
            }
            y
        };
        let rhs: Vec<f64> = f.values().iter().map(|x| -x).collect();
        let mut delta = vec![0.0; rhs.len()];
        let eta = fnorm.clamp(1e-12, 1e-4);
        let out = gmres(
            apply,
            |r| plan.helmholtz_raw(c, r),
            &rhs,
            &mut delta,
            eta,
            GMRES_RESTART,
            GMRES_MAX_ITERS,
        );
        if !out.converged && !(out.relative_residual < 0.5) {
            return finish(u, it, history, Termination::LinearSolveStagnated);
        }

        let mut step = 1.0;
        let mut accepted = None;
        let mut last_overflow = None;
        while step >= opts.line_search.min_step {
            let trial = u.zip_map_raw(&delta, step);
            match inst.residual(&trial) {
                Ok(ft) => {
                    let tn = ft.sup_norm();
                    if tn <= (1.0 - opts.line_search.armijo * step) * fnorm
                        || (tn <= opts.residual_tol && accepts(inst, &ft, opts.residual_tol))
                    {
                        accepted = Some((trial, ft, tn));
                        break;
                    }
                }
                Err(Error::Overflow { max_u, .. }) => last_overflow = Some(max_u),
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }
        match accepted {
            Some((nu, nf, nn)) => {
                u = nu;
                f = nf;
                fnorm = nn;
                history.push(fnorm);
            }
            None => {
                let term = match last_overflow {
                    Some(max_u) if step < 1.0 => Termination::BlowUp { max_u },
                    _ => Termination::LineSearchFailed,
                };
                return finish(u, it + 1, history, term);
            }
        }
    }
    if accepts(inst, &f, opts.residual_tol) {
        finish(u, opts.max_iters, history, Termination::Converged)
    } else {
        finish(u, opts.max_iters, history, Termination::BudgetExhausted)
    }
}
