//! Critical constants by continuation and bisection.
//!
//! Solvability is decided numerically by [`probe_solvable`]: a verdict, not a
//! proof. On top of it, [`find_alpha_star`] walks `α` downward and bisects,
//! [`ding_liu_lambda_star`] does the same upward in `λ` for `S = g₀ + λ`, and
//! [`limit_family`] collects converged solutions approaching the threshold.

mod family;
mod search;

use serde::Serialize;

use crate::domain::integrate;
use crate::problem::ProblemInstance;
use crate::solvers::{
    monotone_iterate, newton_solve, Method, OrderInterval, SolveReport, SolverOptions, Start, Termination,
};

pub use family::{limit_family, Family, FamilyMember, Sweep};
pub use search::{ding_liu_lambda_star, find_alpha_star, ProbeRecord, ThresholdOptions, ThresholdReport};

/// Largest integral identity defect a solved verdict may carry.
pub const DEFECT_TOL: f64 = 1e-8;

/// Work allowed per engine. A failed verdict needs every engine to fail at
/// each multiplier in turn.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeBudget {
    pub newton_iters: usize,
    pub interval_iters: usize,
    pub residual_tol: f64,
    pub multipliers: Vec<usize>,
}

impl Default for ProbeBudget {
    fn default() -> Self {
        ProbeBudget {
            newton_iters: 60,
            interval_iters: 20_000,
            residual_tol: 1e-10,
            multipliers: vec![1, 4],
        }
    }
}

/// Prior solutions a probe may start from.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProbeHints<'a> {
    /// Newton warm start, typically the nearest solved neighbour.
    pub warm: Option<&'a SolveReport>,
    /// Converged solution at a more negative `α`: enables the monotone engine.
    pub deeper: Option<&'a SolveReport>,
}

/// One engine run inside a probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub engine: Method,
    pub start: &'static str,
    pub multiplier: usize,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub final_residual: f64,
    /// Residual stopped decreasing over the last iterations.
    pub plateau: bool,
    /// Error raised by the engine, or the reason a converged report was refused.
    pub note: Option<String>,
}

impl Attempt {
    pub fn blew_up(&self) -> bool {
        matches!(self.termination, Some(Termination::BlowUp { .. }))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FailureEvidence {
    /// Set when failure follows from the sign of `∫S` alone.
    pub obstruction: Option<String>,
    pub attempts: Vec<Attempt>,
}

#[derive(Debug, Clone)]
pub enum SolvabilityVerdict {
    Solved {
        report: SolveReport,
        /// Budget multiplier that succeeded; above 1 means the first budget was not enough.
        multiplier: usize,
        attempts: Vec<Attempt>,
    },
    Failed(FailureEvidence),
}

impl SolvabilityVerdict {
    pub fn is_solved(&self) -> bool {
        matches!(self, SolvabilityVerdict::Solved { .. })
    }

    pub fn report(&self) -> Option<&SolveReport> {
        match self {
            SolvabilityVerdict::Solved { report, .. } => Some(report),
            SolvabilityVerdict::Failed(_) => None,
        }
    }

    pub fn into_report(self) -> Option<SolveReport> {
        match self {
            SolvabilityVerdict::Solved { report, .. } => Some(report),
            SolvabilityVerdict::Failed(_) => None,
        }
    }

    pub fn attempts(&self) -> &[Attempt] {
        match self {
            SolvabilityVerdict::Solved { attempts, .. } => attempts,
            SolvabilityVerdict::Failed(e) => &e.attempts,
        }
    }
}

pub fn probe_solvable(inst: &ProblemInstance, budget: &ProbeBudget) -> SolvabilityVerdict {
    probe_with(inst, budget, ProbeHints::default())
}

/// Tries Newton from the warm, constant-guess and zero starts, then the
/// monotone engine when a deeper solution provides a super-solution, once per
/// budget multiplier.
///
/// A converged report is only accepted if its integral identity defect is at
/// most [`DEFECT_TOL`] and `∫S e^{2u/n} < 0`.
///
/// Multiplying the equation by `e^{-2u/n}` and integrating gives
/// `∫S < α ∫e^{-2u/n} < 0` for any solution, so `∫S ≥ 0` fails immediately.
pub fn probe_with(inst: &ProblemInstance, budget: &ProbeBudget, hints: ProbeHints<'_>) -> SolvabilityVerdict {
    let int_s = integrate(inst.s());
    if int_s >= 0.0 {
        return SolvabilityVerdict::Failed(FailureEvidence {
            obstruction: Some(format!("integral of S is {int_s:e} >= 0")),
            attempts: Vec::new(),
        });
    }
    let mut starts = Vec::new();
    if let Some(w) = hints.warm {
        if w.solution.same_domain(inst.s()) {
            starts.push(Start::Field(w.solution.clone()));
        }
    }
    starts.push(Start::ConstantGuess);
    starts.push(Start::Zero);

    let mut attempts = Vec::new();
    for &m in &budget.multipliers {
        for start in &starts {
            let opts = SolverOptions {
                max_iters: budget.newton_iters * m,
                residual_tol: budget.residual_tol,
                start: start.clone(),
                ..SolverOptions::default()
            };
            let res = newton_solve(inst, &opts);
            if let Some(report) = record(inst, Method::Newton, start.name(), m, res, &mut attempts) {
                return SolvabilityVerdict::Solved {
                    report,
                    multiplier: m,
                    attempts,
                };
            }
        }
        if let Some(deeper) = hints.deeper {
            let res = OrderInterval::from_warm(inst, deeper).and_then(|interval| {
                let opts = SolverOptions {
                    max_iters: budget.interval_iters * m,
                    residual_tol: budget.residual_tol,
                    ..SolverOptions::default()
                };
                monotone_iterate(inst, &interval, &opts)
            });
            if let Some(report) = record(inst, Method::Monotone, "super-solution", m, res, &mut attempts) {
                return SolvabilityVerdict::Solved {
                    report,
                    multiplier: m,
                    attempts,
                };
            }
        }
    }
    SolvabilityVerdict::Failed(FailureEvidence {
        obstruction: None,
        attempts,
    })
}

fn record(
    inst: &ProblemInstance,
    engine: Method,
    start: &'static str,
    multiplier: usize,
    res: crate::Result<SolveReport>,
    attempts: &mut Vec<Attempt>,
) -> Option<SolveReport> {
    let report = match res {
        Ok(r) => r,
        Err(e) => {
            attempts.push(Attempt {
                engine,
                start,
                multiplier,
                iterations: 0,
                termination: None,
                final_residual: f64::NAN,
                plateau: false,
                note: Some(e.to_string()),
            });
            return None;
        }
    };
    let mut note = None;
    if report.converged {
        match inst.integral_identity_defect(&report.solution) {
            Ok(d) if d.defect <= DEFECT_TOL && d.negative => {}
            Ok(d) => note = Some(format!("rejected: identity defect {:e}", d.defect)),
            Err(e) => note = Some(format!("rejected: {e}")),
        }
    }
    let h = &report.residual_history;
    let plateau = h.len() > 5 && h[h.len() - 1] > 0.9 * h[h.len() - 6];
    let accepted = report.converged && note.is_none();
    attempts.push(Attempt {
        engine,
        start,
        multiplier,
        iterations: report.iterations,
        termination: Some(report.termination),
        final_residual: report.final_residual(),
        plateau,
        note,
    });
    accepted.then_some(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ScalarField, TorusDomain};
    use crate::spectral::SpectralPlan;
    use std::f64::consts::PI;

    fn instance(s: impl Fn(&[f64]) -> f64, alpha: f64) -> ProblemInstance {
        let d = TorusDomain::unit(2, 32).unwrap();
        let p = SpectralPlan::new(&d);
        ProblemInstance::new(&p, ScalarField::from_fn(&d, s), alpha, 1).unwrap()
    }

    #[test]
    fn negative_constant_is_solved() {
        for alpha in [-0.1, -1.0, -7.0] {
            let v = probe_solvable(&instance(|_| -1.0, alpha), &ProbeBudget::default());
            assert!(v.is_solved());
            assert!(v.report().unwrap().converged);
        }
    }

    #[test]
    fn positive_constant_fails_by_obstruction() {
        let v = probe_solvable(&instance(|_| 1.0, -1.0), &ProbeBudget::default());
        match v {
            SolvabilityVerdict::Failed(e) => assert!(e.obstruction.is_some()),
            _ => panic!("solved a sign-obstructed instance"),
        }
    }

    #[test]
    fn sign_changing_near_zero_alpha_is_solved() {
        let v = probe_solvable(&instance(|x| (2.0 * PI * x[0]).sin() - 0.5, -1e-3), &ProbeBudget::default());
        assert!(v.is_solved());
    }

    #[test]
    fn far_below_threshold_fails_with_evidence() {
        let budget = ProbeBudget {
            newton_iters: 20,
            ..ProbeBudget::default()
        };
        let v = probe_solvable(&instance(|x| (2.0 * PI * x[0]).sin() - 0.5, -6.0), &budget);
        match v {
            SolvabilityVerdict::Failed(e) => {
                assert!(e.obstruction.is_none());
                // two cold starts at two budgets
                assert_eq!(e.attempts.len(), 4);
            }
            _ => panic!("solved below the threshold"),
        }
    }
}
