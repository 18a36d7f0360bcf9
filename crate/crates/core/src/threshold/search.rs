use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::family::MemberSummary;
use super::{probe_with, Family, FamilyMember, ProbeBudget, ProbeHints, SolvabilityVerdict, Sweep};
use crate::domain::{integrate, ScalarField};
use crate::error::{Error, Result};
use crate::solvers::{Method, SolveReport};
use crate::spectral::SpectralPlan;

/// Allowed `|max g₀|` for the λ search.
pub const MAX_G0_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdOptions {
    /// Target bracket width.
    pub tol: f64,
    pub budget: ProbeBudget,
    /// First `α` of the downward walk.
    pub alpha_start: f64,
    /// Factor applied to `α` per descent step.
    pub growth: f64,
    pub max_steps: usize,
    /// Checkpoints for `S ≤ 0`, where no finite threshold exists.
    pub unbounded_probes: Vec<f64>,
    /// Ambiguous verdicts tolerated before the report is flagged fold-sensitive.
    pub max_ambiguity: usize,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            tol: 1e-3,
            budget: ProbeBudget::default(),
            alpha_start: -1e-2,
            growth: 1.5,
            max_steps: 80,
            unbounded_probes: vec![-1.0, -10.0, -100.0, -1000.0],
            max_ambiguity: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub parameter: f64,
    pub solved: bool,
    pub multiplier: Option<usize>,
    pub engine: Option<Method>,
    pub obstructed: bool,
    pub attempts: usize,
    pub blow_ups: usize,
}

impl ProbeRecord {
    fn new(parameter: f64, v: &SolvabilityVerdict) -> Self {
        let (multiplier, engine, obstructed) = match v {
            SolvabilityVerdict::Solved { report, multiplier, .. } => (Some(*multiplier), Some(report.method), false),
            SolvabilityVerdict::Failed(e) => (None, None, e.obstruction.is_some()),
        };
        ProbeRecord {
            parameter,
            solved: v.is_solved(),
            multiplier,
            engine,
            obstructed,
            attempts: v.attempts().len(),
            blow_ups: v.attempts().iter().filter(|a| a.blew_up()).count(),
        }
    }
}

/// Bracket around a critical constant plus the solved members found on the way.
#[derive(Debug, Clone)]
pub struct ThresholdReport {
    /// Parameter with a converged solution, closest to the threshold.
    pub solved: f64,
    /// Parameter with a failed verdict; `None` when no threshold exists.
    pub failed: Option<f64>,
    /// Width the bisection actually aimed for (doubled once if fold-sensitive).
    pub tol: f64,
    pub fold_sensitive: bool,
    /// Every solved probe, ordered toward the threshold.
    pub family: Family,
    pub probes: Vec<ProbeRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdSummary {
    pub parameter: &'static str,
    pub unbounded: bool,
    pub solved: f64,
    pub failed: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub width: Option<f64>,
    pub tol: f64,
    pub fold_sensitive: bool,
    pub monotone_consistent: bool,
    pub probes: Vec<ProbeRecord>,
    pub members: Vec<MemberSummary>,
}

impl ThresholdReport {
    pub fn is_unbounded(&self) -> bool {
        self.failed.is_none()
    }

    /// Smaller end of the bracket.
    pub fn lower(&self) -> Option<f64> {
        self.failed.map(|f| f.min(self.solved))
    }

    pub fn upper(&self) -> Option<f64> {
        self.failed.map(|f| f.max(self.solved))
    }

    pub fn width(&self) -> f64 {
        self.failed.map_or(f64::INFINITY, |f| (f - self.solved).abs())
    }

    /// Report at the solved end of the bracket.
    pub fn best(&self) -> Option<&SolveReport> {
        self.family.last().map(|m| &m.report)
    }

    /// Solvable parameters form one interval: no solved probe lies beyond a
    /// failed one.
    pub fn monotone_consistent(&self) -> bool {
        let sweep = &self.family.sweep;
        self.probes.iter().filter(|p| p.solved).all(|s| {
            self.probes
                .iter()
                .filter(|p| !p.solved)
                .all(|f| sweep.toward_threshold(s.parameter, f.parameter))
        })
    }

    pub fn summary(&self) -> ThresholdSummary {
        ThresholdSummary {
            parameter: self.family.sweep.parameter_name(),
            unbounded: self.is_unbounded(),
            solved: self.solved,
            failed: self.failed,
            lower: self.lower(),
            upper: self.upper(),
            width: self.failed.map(|_| self.width()),
            tol: self.tol,
            fold_sensitive: self.fold_sensitive,
            monotone_consistent: self.monotone_consistent(),
            probes: self.probes.clone(),
            members: self.family.summaries(),
        }
    }

    /// Writes `threshold.json`, `threshold.csv` and a field file per member.
    pub fn write(&self, dir: &Path) -> Result<ThresholdSummary> {
        let mut summary = self.summary();
        summary.members = self.family.write_members(dir, "member")?;
        let json = dir.join("threshold.json");
        fs::write(&json, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&json, e))?;
        let csv = dir.join("threshold.csv");
        fs::write(&csv, self.family.table_csv()).map_err(|e| Error::io(&csv, e))?;
        Ok(summary)
    }
}

struct Search<'a> {
    sweep: Sweep,
    opts: &'a ThresholdOptions,
    family: Family,
    probes: Vec<ProbeRecord>,
    ambiguities: usize,
}

impl<'a> Search<'a> {
    fn new(sweep: Sweep, opts: &'a ThresholdOptions) -> Self {
        Search {
            family: Family::new(sweep.clone()),
            sweep,
            opts,
            probes: Vec::new(),
            ambiguities: 0,
        }
    }

    /// Probes `p` warm-started from the latest member; solved reports join
    /// the family.
    fn probe(&mut self, p: f64) -> Result<bool> {
        let inst = self.sweep.instance(p)?;
        let warm = self.family.last().map(|m| &m.report);
        let v = probe_with(&inst, &self.opts.budget, ProbeHints { warm, deeper: None });
        self.probes.push(ProbeRecord::new(p, &v));
        match v {
            SolvabilityVerdict::Solved { report, multiplier, .. } => {
                if multiplier > 1 {
                    self.ambiguities += 1;
                }
                self.family.members.push(FamilyMember { parameter: p, report });
                Ok(true)
            }
            SolvabilityVerdict::Failed(_) => Ok(false),
        }
    }

    /// Halves `[solved, failed]` until it is at most `tol` wide.
    fn bisect(mut self, mut solved: f64, mut failed: f64) -> Result<ThresholdReport> {
        let mut tol = self.opts.tol;
        let mut fold_sensitive = false;
        while (failed - solved).abs() > tol {
            let mid = 0.5 * (solved + failed);
            if self.probe(mid)? {
                solved = mid;
            } else {
                failed = mid;
            }
            if !fold_sensitive && self.ambiguities >= self.opts.max_ambiguity {
                fold_sensitive = true;
                tol *= 2.0;
            }
        }
        self.family.fill_min_eig()?;
        Ok(ThresholdReport {
            solved,
            failed: Some(failed),
            tol,
            fold_sensitive,
            family: self.family,
            probes: self.probes,
        })
    }
}

/// Locates `α★ = inf{α < 0 : solvable}` for fixed `S`.
///
/// For `S ≤ 0` there is no finite threshold: the report is unbounded after
/// every checkpoint in `opts.unbounded_probes` is solved. Otherwise `α` walks
/// down geometrically from `opts.alpha_start` until a probe fails, then the
/// last step is bisected.
pub fn find_alpha_star(
    plan: &Arc<SpectralPlan>,
    s: &ScalarField,
    n: u32,
    opts: &ThresholdOptions,
) -> Result<ThresholdReport> {
    let int_s = integrate(s);
    if int_s >= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "the threshold search needs integral of S < 0, got {int_s:e}"
        )));
    }
    if !(opts.tol > 0.0 && opts.alpha_start < 0.0 && opts.growth > 1.0) {
        return Err(Error::InvalidArgument(
            "threshold options need tol > 0, alpha_start < 0, growth > 1".into(),
        ));
    }
    let sweep = Sweep::Alpha {
        plan: Arc::clone(plan),
        s: s.clone(),
        n,
    };
    if s.max() <= 0.0 {
        return unbounded(sweep, opts);
    }

    let mut search = Search::new(sweep, opts);
    let mut alpha = opts.alpha_start;
    let mut retries = 0;
    while !search.probe(alpha)? {
        retries += 1;
        if retries > 3 {
            return Err(Error::Threshold(format!("no solution found near zero (last alpha {alpha:e})")));
        }
        alpha /= 10.0;
    }
    for _ in 0..opts.max_steps {
        let next = alpha * opts.growth;
        if !search.probe(next)? {
            return search.bisect(alpha, next);
        }
        alpha = next;
    }
    Err(Error::Threshold(format!(
        "still solvable at alpha = {alpha:e} after {} steps",
        opts.max_steps
    )))
}

fn unbounded(sweep: Sweep, opts: &ThresholdOptions) -> Result<ThresholdReport> {
    let mut alphas = opts.unbounded_probes.clone();
    alphas.sort_by(|a, b| b.total_cmp(a));
    let verdicts: Vec<_> = alphas
        .par_iter()
        .map(|&a| -> Result<_> {
            let inst = sweep.instance(a)?;
            Ok(probe_with(&inst, &opts.budget, ProbeHints::default()))
        })
        .collect::<Result<_>>()?;
    let mut family = Family::new(sweep);
    let mut probes = Vec::new();
    for (a, v) in alphas.iter().zip(verdicts) {
        probes.push(ProbeRecord::new(*a, &v));
        match v.into_report() {
            Some(report) => family.members.push(FamilyMember { parameter: *a, report }),
            None => {
                return Err(Error::Threshold(format!(
                    "S <= 0 but alpha = {a} was not solved; the unbounded regime could not be confirmed"
                )))
            }
        }
    }
    family.fill_min_eig()?;
    Ok(ThresholdReport {
        solved: *alphas.last().unwrap_or(&f64::NAN),
        failed: None,
        tol: opts.tol,
        fold_sensitive: false,
        family,
        probes,
    })
}

/// Locates `λ★` for `S = g₀ + λ`, `α = s₀`, `n = 1`, where `max g₀ = 0`.
///
/// `λ = 0` is solvable since `g₀ ≤ 0`, and `λ ≥ -mean g₀` is not since then
/// `∫S ≥ 0`; the search steps up by an eighth of that range, then bisects.
/// The final bracket must lie strictly inside `(0, -min g₀)`.
pub fn ding_liu_lambda_star(
    plan: &Arc<SpectralPlan>,
    g0: &ScalarField,
    s0: f64,
    opts: &ThresholdOptions,
) -> Result<ThresholdReport> {
    if !(s0 < 0.0) {
        return Err(Error::InvalidArgument(format!("s0 must be negative, got {s0}")));
    }
    let (lo, hi) = (g0.min(), g0.max());
    if hi - lo <= MAX_G0_TOL {
        return Err(Error::InvalidArgument("g0 must be nonconstant".into()));
    }
    if hi.abs() > MAX_G0_TOL {
        return Err(Error::InvalidArgument(format!("g0 must have max 0, got {hi:e}")));
    }
    let sweep = Sweep::Lambda {
        plan: Arc::clone(plan),
        g0: g0.clone(),
        s0,
    };
    let ceiling = -lo;
    let step = -g0.mean() / 8.0;

    let mut search = Search::new(sweep, opts);
    if !search.probe(0.0)? {
        return Err(Error::Threshold("lambda = 0 was not solved".into()));
    }
    let mut lambda = 0.0;
    let report = loop {
        let next = lambda + step;
        if !search.probe(next)? {
            break search.bisect(lambda, next)?;
        }
        lambda = next;
        if lambda >= ceiling {
            return Err(Error::Threshold(format!("solved at lambda = {lambda} >= -min g0")));
        }
    };
    let (a, b) = (report.lower().unwrap_or(0.0), report.upper().unwrap_or(f64::INFINITY));
    if !(a > 0.0 && b < ceiling) {
        return Err(Error::Threshold(format!(
            "lambda bracket [{a}, {b}] is not inside (0, {ceiling})"
        )));
    }
    Ok(report)
}
