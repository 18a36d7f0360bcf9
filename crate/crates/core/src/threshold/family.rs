use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{probe_with, ProbeHints, ThresholdOptions, ThresholdReport};
use crate::domain::{ScalarField, TorusDomain};
use crate::error::{Error, Result};
use crate::problem::ProblemInstance;
use crate::solvers::{Method, SolveReport, Termination, MEAN_RESIDUAL_TOL};
use crate::spectral::{min_eigenvalue, SpectralPlan, DEFAULT_EIG_TOL};

/// The one-parameter set of instances a threshold search moves through.
#[derive(Debug, Clone)]
pub enum Sweep {
    /// Fixed `S` and `n`, varying `α`.
    Alpha { plan: Arc<SpectralPlan>, s: ScalarField, n: u32 },
    /// `S = g₀ + λ` with `α = s₀` and `n = 1`, varying `λ`.
    Lambda { plan: Arc<SpectralPlan>, g0: ScalarField, s0: f64 },
}

impl Sweep {
    pub fn parameter_name(&self) -> &'static str {
        match self {
            Sweep::Alpha { .. } => "alpha",
            Sweep::Lambda { .. } => "lambda",
        }
    }

    pub fn plan(&self) -> &Arc<SpectralPlan> {
        match self {
            Sweep::Alpha { plan, .. } | Sweep::Lambda { plan, .. } => plan,
        }
    }

    pub fn domain(&self) -> &Arc<TorusDomain> {
        self.plan().domain()
    }

    pub fn instance(&self, p: f64) -> Result<ProblemInstance> {
        match self {
            Sweep::Alpha { plan, s, n } => ProblemInstance::new(plan, s.clone(), p, *n),
            Sweep::Lambda { plan, g0, s0 } => ProblemInstance::new(plan, g0.shift(p), *s0, 1),
        }
    }

    /// True when moving from `a` to `b` approaches the threshold.
    pub(crate) fn toward_threshold(&self, a: f64, b: f64) -> bool {
        match self {
            Sweep::Alpha { .. } => b < a,
            Sweep::Lambda { .. } => b > a,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub parameter: f64,
    pub report: SolveReport,
}

/// Solutions ordered toward the threshold.
#[derive(Debug, Clone)]
pub struct Family {
    pub sweep: Sweep,
    pub members: Vec<FamilyMember>,
    /// First parameter that failed, when the family was cut short.
    pub stopped_at: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberSummary {
    pub parameter: f64,
    pub method: Method,
    pub converged: bool,
    pub sup_norm: f64,
    pub energy: Option<f64>,
    pub defect: Option<f64>,
    pub lambda_min: Option<f64>,
    pub file: Option<String>,
}

impl Family {
    pub fn new(sweep: Sweep) -> Self {
        Family {
            sweep,
            members: Vec::new(),
            stopped_at: None,
        }
    }

    /// Wraps externally supplied fields, e.g. for negative controls.
    pub fn from_fields(sweep: Sweep, fields: Vec<(f64, ScalarField)>) -> Result<Self> {
        let mut fam = Family::new(sweep);
        for (p, u) in fields {
            let inst = fam.sweep.instance(p)?;
            u.check_domain(inst.s())?;
            let (hist, term) = match inst.residual(&u) {
                Ok(f) => {
                    let ok = f.sup_norm() <= 1e-10 && f.mean().abs() <= MEAN_RESIDUAL_TOL * inst.alpha().abs();
                    let term = if ok {
                        Termination::Converged
                    } else {
                        Termination::BudgetExhausted
                    };
                    (vec![f.sup_norm()], term)
                }
                Err(Error::Overflow { max_u, .. }) => (vec![f64::INFINITY], Termination::BlowUp { max_u }),
                Err(e) => return Err(e),
            };
            let report = SolveReport::finish(&inst, u, 0, hist, Method::Supplied, term);
            fam.members.push(FamilyMember { parameter: p, report });
        }
        Ok(fam)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.parameter).collect()
    }

    pub fn instance(&self, i: usize) -> Result<ProblemInstance> {
        self.sweep.instance(self.members[i].parameter)
    }

    pub fn last(&self) -> Option<&FamilyMember> {
        self.members.last()
    }

    /// Fills `min_eig` of every member's report.
    pub fn fill_min_eig(&mut self) -> Result<()> {
        let sweep = &self.sweep;
        self.members.par_iter_mut().try_for_each(|m| {
            if m.report.min_eig.is_none() {
                let inst = sweep.instance(m.parameter)?;
                let v = inst.linearized_potential(&m.report.solution)?;
                m.report.min_eig = Some(min_eigenvalue(inst.plan(), &v, DEFAULT_EIG_TOL)?);
            }
            Ok(())
        })
    }

    pub fn summaries(&self) -> Vec<MemberSummary> {
        self.members
            .iter()
            .map(|m| {
                let defect = self
                    .sweep
                    .instance(m.parameter)
                    .and_then(|i| i.integral_identity_defect(&m.report.solution))
                    .ok()
                    .map(|d| d.defect);
                MemberSummary {
                    parameter: m.parameter,
                    method: m.report.method,
                    converged: m.report.converged,
                    sup_norm: m.report.solution.sup_norm(),
                    energy: m.report.energy,
                    defect,
                    lambda_min: m.report.min_eig,
                    file: None,
                }
            })
            .collect()
    }

    /// One row per member: parameter, `‖u‖_∞`, energy, identity defect, `λ_min`.
    pub fn table_csv(&self) -> String {
        let mut out = format!("{},sup_norm,energy,defect,lambda_min\n", self.sweep.parameter_name());
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for s in self.summaries() {
            let _ = writeln!(
                out,
                "{:e},{:e},{},{},{}",
                s.parameter,
                s.sup_norm,
                opt(s.energy),
                opt(s.defect),
                opt(s.lambda_min)
            );
        }
        out
    }

    /// Writes `<prefix>_NN` field and report files per member into `dir` and
    /// returns the summaries with file names filled in.
    pub fn write_members(&self, dir: &Path, prefix: &str) -> Result<Vec<MemberSummary>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut out = self.summaries();
        for (k, (m, s)) in self.members.iter().zip(out.iter_mut()).enumerate() {
            let stem = dir.join(format!("{prefix}_{k:02}"));
            m.report.write(&stem)?;
            s.file = Some(format!("{prefix}_{k:02}.field"));
        }
        Ok(out)
    }
}

/// Parameters of the limit family.
///
/// Finite threshold: `p_k = p_hi + (p_start - p_hi)·4^{-k}` with
/// `p_start = p_hi / 2`, the last member placed on the solved end of the
/// bracket itself. Unbounded `α★`: `α_k = -2^k`.
pub fn family_schedule(report: &ThresholdReport, count: usize) -> Vec<f64> {
    if report.is_unbounded() {
        return (0..count).map(|k| -(2f64.powi(k as i32))).collect();
    }
    let hi = report.solved;
    let start = hi / 2.0;
    (0..count)
        .map(|k| {
            if k + 1 == count && count > 1 {
                hi
            } else {
                hi + (start - hi) * 0.25f64.powi(k as i32)
            }
        })
        .collect()
}

/// Converged solutions approaching the threshold from the solvable side,
/// each warm-started from its predecessor. A member that fails truncates
/// the family; `stopped_at` records where.
pub fn limit_family(report: &ThresholdReport, count: usize, opts: &ThresholdOptions) -> Result<Family> {
    if count == 0 {
        return Err(Error::InvalidArgument("family count must be at least 1".into()));
    }
    let mut fam = Family::new(report.family.sweep.clone());
    let schedule = family_schedule(report, count);
    let mut warm = nearest(&report.family, schedule[0]).cloned();
    for p in schedule {
        let inst = fam.sweep.instance(p)?;
        let hints = ProbeHints {
            warm: warm.as_ref(),
            deeper: None,
        };
        match probe_with(&inst, &opts.budget, hints).into_report() {
            Some(r) => {
                warm = Some(r.clone());
                fam.members.push(FamilyMember { parameter: p, report: r });
            }
            None => {
                fam.stopped_at = Some(p);
                break;
            }
        }
    }
    fam.fill_min_eig()?;
    Ok(fam)
}

fn nearest(fam: &Family, p: f64) -> Option<&SolveReport> {
    fam.members
        .iter()
        .min_by(|a, b| (a.parameter - p).abs().total_cmp(&(b.parameter - p).abs()))
        .map(|m| &m.report)
}
