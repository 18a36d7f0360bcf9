//! Solution engines for `F(u) = -Δu + α - S e^{2u/n} = 0`.
//!
//! * [`newton_solve`]: damped Newton–Krylov, the fast path.
//! * [`monotone_iterate`]: order-preserving fixed point iteration inside a
//!   sub/super-solution interval, started from the super-solution.
//! * [`minimize_over_interval`]: projected descent of the energy over the
//!   order interval `X = {u₋ ≤ u ≤ u₊}`.
//!
//! Running out of budget is reported through [`Termination`], not as an
//! error; the threshold search treats it as evidence.

mod minimize;
mod monotone;
mod newton;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::io::write_field;
use crate::domain::ScalarField;
use crate::error::{Error, Result};
use crate::problem::ProblemInstance;

pub use minimize::minimize_over_interval;
pub use monotone::{monotone_constant, monotone_iterate};
pub use newton::newton_solve;

/// Pointwise slack when checking the sign of a sub/super-solution residual.
pub const SIGN_TOL: f64 = 1e-9;

/// Bound on `|mean F(u)| / |α|` for a converged solve. Integrating the
/// equation shows this is the integral identity defect, which stays
/// meaningful as `α → 0⁻` where a sup-norm tolerance alone does not.
pub const MEAN_RESIDUAL_TOL: f64 = 1e-9;

pub(crate) fn accepts(inst: &ProblemInstance, f: &ScalarField, tol: f64) -> bool {
    f.sup_norm() <= tol && f.mean().abs() <= MEAN_RESIDUAL_TOL * inst.alpha().abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    /// Sufficient-decrease factor.
    pub armijo: f64,
    /// Smallest step before declaring failure.
    pub min_step: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            armijo: 1e-4,
            min_step: 2f64.powi(-30),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Zero,
    /// `u ≡ (n/2) ln(α / mean S)`, needs `mean S < 0`.
    ConstantGuess,
    Field(ScalarField),
}

impl Start {
    pub fn name(&self) -> &'static str {
        match self {
            Start::Zero => "zero",
            Start::ConstantGuess => "constant-guess",
            Start::Field(_) => "warm",
        }
    }

    pub fn resolve(&self, inst: &ProblemInstance) -> Result<ScalarField> {
        match self {
            Start::Zero => Ok(ScalarField::zeros(inst.domain())),
            Start::ConstantGuess => {
                let mean = inst.s().mean();
                if mean >= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "constant-guess start needs mean S < 0, got {mean}"
                    )));
                }
                let c = 0.5 * inst.n() as f64 * (inst.alpha() / mean).ln();
                Ok(ScalarField::constant(inst.domain(), c))
            }
            Start::Field(f) => {
                f.check_domain(inst.s())?;
                Ok(f.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Sup-norm residual at which a solve counts as converged.
    pub residual_tol: f64,
    pub line_search: LineSearch,
    /// Overrides the monotonicity constant of [`monotone_iterate`].
    pub monotone_c: Option<f64>,
    pub start: Start,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 100,
            residual_tol: 1e-10,
            line_search: LineSearch::default(),
            monotone_c: None,
            start: Start::Zero,
        }
    }
}

impl SolverOptions {
    /// Budget suited to the linearly convergent interval engines.
    pub fn interval_engines() -> Self {
        SolverOptions {
            max_iters: 50_000,
            ..SolverOptions::default()
        }
    }

    pub fn with_start(mut self, start: Start) -> Self {
        self.start = start;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.residual_tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.max_iters < 1 {
            bad.push("max_iters must be >= 1".to_string());
        }
        if !(self.residual_tol > 0.0) {
            bad.push(format!("residual_tol must be positive, got {}", self.residual_tol));
        }
        if !(self.line_search.armijo > 0.0 && self.line_search.armijo < 1.0) {
            bad.push(format!("armijo factor must lie in (0,1), got {}", self.line_search.armijo));
        }
        if !(self.line_search.min_step > 0.0 && self.line_search.min_step < 1.0) {
            bad.push(format!("min_step must lie in (0,1), got {}", self.line_search.min_step));
        }
        if let Some(c) = self.monotone_c {
            if !(c > 0.0) {
                bad.push(format!("monotone_c must be positive, got {c}"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(bad.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Newton,
    Monotone,
    Minimization,
    /// Field handed in from outside, not produced by an engine.
    Supplied,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Termination {
    Converged,
    BudgetExhausted,
    LineSearchFailed,
    LinearSolveStagnated,
    /// The exponential guard tripped: evidence of blow-up.
    BlowUp { max_u: f64 },
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: ScalarField,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm residual per iteration, starting with the initial field.
    pub residual_history: Vec<f64>,
    pub method: Method,
    pub termination: Termination,
    pub alpha: f64,
    pub energy: Option<f64>,
    /// Smallest eigenvalue of the linearization, filled in by diagnostics.
    pub min_eig: Option<f64>,
}

impl SolveReport {
    pub(crate) fn finish(
        inst: &ProblemInstance,
        solution: ScalarField,
        iterations: usize,
        residual_history: Vec<f64>,
        method: Method,
        termination: Termination,
    ) -> Self {
        let converged = termination == Termination::Converged;
        let energy = inst.energy(&solution).ok().map(|e| e.total);
        SolveReport {
            solution,
            converged,
            iterations,
            residual_history,
            method,
            termination,
            alpha: inst.alpha(),
            energy,
            min_eig: None,
        }
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            converged: self.converged,
            iterations: self.iterations,
            residual_history: self.residual_history.clone(),
            method: self.method,
            termination: self.termination,
            alpha: self.alpha,
            energy: self.energy,
            min_eig: self.min_eig,
            sup_norm: self.solution.sup_norm(),
            solution: None,
        }
    }

    /// Writes `<stem>.report.json` and the solution field `<stem>`.
    pub fn write(&self, stem: &Path) -> Result<()> {
        let bin = write_field(stem, &self.solution, "u")?;
        let mut summary = self.summary();
        summary.solution = bin.file_name().map(|f| f.to_string_lossy().into_owned());
        let path = stem.with_extension("report.json");
        fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&path, e))
    }
}

/// Serializable scalars of a [`SolveReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub converged: bool,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub method: Method,
    pub termination: Termination,
    pub alpha: f64,
    pub energy: Option<f64>,
    pub min_eig: Option<f64>,
    pub sup_norm: f64,
    /// Field file holding the solution, when written to disk.
    pub solution: Option<String>,
}

/// Sub/super-solution pair bounding the set `X` the engines work in.
#[derive(Debug, Clone)]
pub struct OrderInterval {
    lower: ScalarField,
    upper: ScalarField,
}

impl OrderInterval {
    /// Checks `lower ≤ upper`, `F(lower) ≤ 0` and `F(upper) ≥ 0` pointwise.
    pub fn new(inst: &ProblemInstance, lower: ScalarField, upper: ScalarField) -> Result<Self> {
        lower.check_domain(&upper)?;
        if let Some(i) = lower
            .values()
            .iter()
            .zip(upper.values())
            .position(|(l, u)| l > u)
        {
            return Err(Error::OrderInterval(format!(
                "lower exceeds upper at index {i} ({} > {})",
                lower.values()[i],
                upper.values()[i]
            )));
        }
        let rl = inst.residual(&lower)?;
        if rl.max() > SIGN_TOL {
            return Err(Error::OrderInterval(format!(
                "lower is not a sub-solution: max residual {}",
                rl.max()
            )));
        }
        let ru = inst.residual(&upper)?;
        if ru.min() < -SIGN_TOL {
            return Err(Error::OrderInterval(format!(
                "upper is not a super-solution: min residual {}",
                ru.min()
            )));
        }
        Ok(OrderInterval { lower, upper })
    }

    pub fn lower(&self) -> &ScalarField {
        &self.lower
    }

    pub fn upper(&self) -> &ScalarField {
        &self.upper
    }

    pub fn contains(&self, u: &ScalarField, slack: f64) -> bool {
        u.values()
            .iter()
            .zip(self.lower.values().iter().zip(self.upper.values()))
            .all(|(v, (l, h))| *v >= l - slack && *v <= h + slack)
    }

    /// Builds the standard interval: constant sub-solution below a solution
    /// at a more negative `α̃`.
    pub fn from_warm(inst: &ProblemInstance, warm: &SolveReport) -> Result<Self> {
        let lower = build_sub_solution(inst)?;
        let upper = build_super_solution(inst, warm)?;
        OrderInterval::new(inst, lower, upper)
    }
}

/// Constant strict sub-solution `u₋ = (n/2) ln(α / inf S) - 1`.
pub fn build_sub_solution(inst: &ProblemInstance) -> Result<ScalarField> {
    let inf_s = inst.s().min();
    if inf_s >= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "a constant sub-solution needs inf S < 0, got {inf_s}"
        )));
    }
    let c = 0.5 * inst.n() as f64 * (inst.alpha() / inf_s).ln() - 1.0;
    let lower = ScalarField::constant(inst.domain(), c);
    let r = inst.residual(&lower)?;
    if r.max() >= 0.0 {
        return Err(Error::OrderInterval(format!(
            "constant {c} failed the strict sub-solution check (max residual {})",
            r.max()
        )));
    }
    Ok(lower)
}

/// A converged solution at `α̃ < α` is a strict super-solution at `α`, with
/// residual exactly `α - α̃`.
pub fn build_super_solution(inst: &ProblemInstance, warm: &SolveReport) -> Result<ScalarField> {
    if !warm.converged {
        return Err(Error::InvalidArgument("super-solution source did not converge".into()));
    }
    let gap = inst.alpha() - warm.alpha;
    if !(gap > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "super-solution source must sit at a more negative alpha: {} >= {}",
            warm.alpha,
            inst.alpha()
        )));
    }
    let r = inst.residual(&warm.solution)?;
    let slack = warm.final_residual() + SIGN_TOL;
    let worst = r.values().iter().fold(0.0f64, |m, v| m.max((v - gap).abs()));
    if worst > slack || r.min() <= 0.0 {
        return Err(Error::OrderInterval(format!(
            "super-solution gap check failed: expected {gap}, deviation {worst}"
        )));
    }
    Ok(warm.solution.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TorusDomain;
    use crate::spectral::SpectralPlan;

    fn constant_instance(s: f64, alpha: f64, n: u32, pts: usize) -> ProblemInstance {
        let d = TorusDomain::unit(2 * n as usize, pts).unwrap();
        let p = SpectralPlan::new(&d);
        ProblemInstance::new(&p, ScalarField::constant(&d, s), alpha, n).unwrap()
    }

    #[test]
    fn options_validate() {
        assert!(SolverOptions::default().validate().is_ok());
        assert!(SolverOptions::default().with_tol(0.0).validate().is_err());
        assert!(SolverOptions::default().with_max_iters(0).validate().is_err());
    }

    #[test]
    fn sub_solution_closed_form() {
        let inst = constant_instance(-2.0, -2.0, 1, 16);
        let lower = build_sub_solution(&inst).unwrap();
        assert!((lower.max() + 1.0).abs() < 1e-15);
        let r = inst.residual(&lower).unwrap();
        let expect = -2.0 + 2.0 * (-2.0f64).exp();
        assert!((r.max() - expect).abs() < 1e-14);
        assert!(r.max() < 0.0);
    }

    #[test]
    fn sub_solution_for_sign_changing_s() {
        let d = TorusDomain::unit(4, 8).unwrap();
        let p = SpectralPlan::new(&d);
        let s = ScalarField::from_fn(&d, |x| {
            -1.5 - 2.5 * (2.0 * std::f64::consts::PI * x[0]).cos()
        });
        assert!((s.min() + 4.0).abs() < 1e-12);
        let inst = ProblemInstance::new(&p, s, -1.0, 2).unwrap();
        let lower = build_sub_solution(&inst).unwrap();
        // (n/2) ln(α / inf S) - 1 with n = 2
        assert!((lower.max() - ((0.25f64).ln() - 1.0)).abs() < 1e-12);
        assert!(inst.residual(&lower).unwrap().max() < 0.0);
    }

    #[test]
    fn sub_solution_needs_negative_infimum() {
        let inst = constant_instance(0.5, -1.0, 1, 8);
        assert!(build_sub_solution(&inst).is_err());
    }

    fn exact_report(inst: &ProblemInstance) -> SolveReport {
        let c = inst.constant_solution().unwrap();
        let u = ScalarField::constant(inst.domain(), c);
        let r = inst.residual(&u).unwrap().sup_norm();
        SolveReport::finish(inst, u, 0, vec![r], Method::Newton, Termination::Converged)
    }

    #[test]
    fn super_solution_from_deeper_alpha() {
        let inst = constant_instance(-2.0, -2.0, 1, 16);
        let deeper = inst.with_alpha(-2.2).unwrap();
        let warm = exact_report(&deeper);
        let upper = build_super_solution(&inst, &warm).unwrap();
        let r = inst.residual(&upper).unwrap();
        assert!(r.max_abs_diff(&ScalarField::constant(inst.domain(), 0.2)) < 1e-12);

        let same = exact_report(&inst);
        assert!(build_super_solution(&inst, &same).is_err());
        let shallower = exact_report(&inst.with_alpha(-1.0).unwrap());
        assert!(build_super_solution(&inst, &shallower).is_err());
    }

    #[test]
    fn inverted_interval_is_rejected() {
        let inst = constant_instance(-2.0, -2.0, 1, 16);
        let lo = ScalarField::constant(inst.domain(), 0.5);
        let hi = ScalarField::constant(inst.domain(), -0.5);
        assert!(matches!(
            OrderInterval::new(&inst, lo, hi),
            Err(Error::OrderInterval(_))
        ));
    }

    #[test]
    fn start_strategies() {
        let inst = constant_instance(-2.0, -1.0, 1, 8);
        let guess = Start::ConstantGuess.resolve(&inst).unwrap();
        assert!((guess.max() - 0.5 * (0.5f64).ln()).abs() < 1e-15);
        let pos = constant_instance(1.0, -1.0, 1, 8);
        assert!(Start::ConstantGuess.resolve(&pos).is_err());
    }

    #[test]
    fn report_files() {
        let dir = tempfile::tempdir().unwrap();
        let inst = constant_instance(-2.0, -2.0, 1, 8);
        let rep = exact_report(&inst);
        rep.write(&dir.path().join("sol")).unwrap();
        let text = fs::read_to_string(dir.path().join("sol.report.json")).unwrap();
        let back: ReportSummary = serde_json::from_str(&text).unwrap();
        assert!(back.converged);
        assert_eq!(back.solution.as_deref(), Some("sol.field"));
        assert!(dir.path().join("sol.json").exists());
    }
}
