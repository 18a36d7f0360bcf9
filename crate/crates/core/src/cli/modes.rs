use std::sync::Arc;

use serde_json::{json, Value};

use super::config::{Control, Engine, ExperimentConfig, Mode, StartKind};
use super::{named_field, write_text, Outcome};
use crate::diagnostics::{
    apriori_c0_bound, check_lower_bound, family_table, minus_mask, sup_inf_track, AprioriBoundCertificate,
};
use crate::domain::{ball_mask, make_cutoff, superlevel_mask, CutoffSpec, RegionMask, ScalarField, TorusDomain};
use crate::error::{Error, Result};
use crate::problem::ProblemInstance;
use crate::solvers::{
    minimize_over_interval, monotone_iterate, newton_solve, OrderInterval, SolveReport, SolverOptions, Start,
};
use crate::spectral::{min_eigenvalue, SpectralPlan, DEFAULT_EIG_TOL};
use crate::threshold::{
    ding_liu_lambda_star, find_alpha_star, limit_family, Family, ThresholdOptions, ThresholdReport,
};

struct Setup {
    plan: Arc<SpectralPlan>,
    s: ScalarField,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let domain = TorusDomain::new(cfg.d, &cfg.sizes, &cfg.lengths)?;
    let plan = SpectralPlan::new(&domain);
    let s = named_field(&cfg.field, &domain, cfg.mode == Mode::DingLiu)?;
    Ok(Setup { plan, s })
}

fn threshold_options(cfg: &ExperimentConfig) -> ThresholdOptions {
    let mut opts = ThresholdOptions {
        tol: cfg.tol,
        alpha_start: cfg.alpha_start,
        ..ThresholdOptions::default()
    };
    opts.budget.residual_tol = cfg.residual_tol;
    if let Some(m) = cfg.max_iters {
        opts.budget.newton_iters = m;
    }
    opts
}

fn report_json(inst: &ProblemInstance, r: &SolveReport) -> Result<Value> {
    let d = inst.integral_identity_defect(&r.solution)?;
    Ok(json!({
        "method": r.method,
        "converged": r.converged,
        "termination": r.termination,
        "iterations": r.iterations,
        "final_residual": r.final_residual(),
        "sup_norm": r.solution.sup_norm(),
        "energy": r.energy,
        "lambda_min": r.min_eig,
        "defect": d.defect,
        "weighted_integral": d.weighted_integral,
    }))
}

pub(super) fn solve(cfg: &ExperimentConfig) -> Result<Outcome> {
    let Setup { plan, s } = setup(cfg)?;
    let alpha = cfg.alpha.ok_or_else(|| Error::Config(vec!["alpha: required for mode solve".into()]))?;
    let inst = ProblemInstance::new(&plan, s, alpha, cfg.n)?;
    inst.save(&cfg.out.join("instance"))?;
    let start = match cfg.start {
        StartKind::Zero => Start::Zero,
        StartKind::ConstantGuess => Start::ConstantGuess,
    };
    let base = SolverOptions {
        residual_tol: cfg.residual_tol,
        start,
        ..SolverOptions::default()
    };
    let mut report = match cfg.engine {
        Engine::Newton => newton_solve(&inst, &SolverOptions {
            max_iters: cfg.max_iters.unwrap_or(base.max_iters),
            ..base
        })?,
        Engine::Monotone | Engine::Minimize => {
            let deeper_alpha = cfg.alpha_super.unwrap_or(1.5 * alpha);
            let deeper = newton_solve(&inst.with_alpha(deeper_alpha)?, &base)?;
            if !deeper.converged {
                return Err(Error::OrderInterval(format!(
                    "no converged solution at alpha_super = {deeper_alpha} to serve as super-solution"
                )));
            }
            let interval = OrderInterval::from_warm(&inst, &deeper)?;
            let opts = SolverOptions {
                max_iters: cfg.max_iters.unwrap_or(SolverOptions::interval_engines().max_iters),
                ..base
            };
            if cfg.engine == Engine::Monotone {
                monotone_iterate(&inst, &interval, &opts)?
            } else {
                minimize_over_interval(&inst, &interval, &opts)?
            }
        }
    };
    let v = inst.linearized_potential(&report.solution)?;
    report.min_eig = Some(min_eigenvalue(&plan, &v, DEFAULT_EIG_TOL)?);
    report.write(&cfg.out.join("solution"))?;
    let summary = json!({
        "alpha": alpha,
        "n": cfg.n,
        "report": report_json(&inst, &report)?,
    });
    Ok(Outcome::new(report.converged, summary))
}

fn threshold_json(r: &ThresholdReport) -> Value {
    json!({
        "parameter": r.family.sweep.parameter_name(),
        "unbounded": r.is_unbounded(),
        "solved": r.solved,
        "failed": r.failed,
        "lower": r.lower(),
        "upper": r.upper(),
        "width": r.failed.map(|_| r.width()),
        "fold_sensitive": r.fold_sensitive,
        "monotone_consistent": r.monotone_consistent(),
        "probes": r.probes.len(),
        "members": r.family.len(),
        "solved_sup_norm": r.best().map(|b| b.solution.sup_norm()),
    })
}

pub(super) fn threshold(cfg: &ExperimentConfig) -> Result<Outcome> {
    let Setup { plan, s } = setup(cfg)?;
    let report = find_alpha_star(&plan, &s, cfg.n, &threshold_options(cfg))?;
    report.write(&cfg.out)?;
    let ok = report.monotone_consistent();
    Ok(Outcome::new(ok, json!({ "threshold": threshold_json(&report) })))
}

pub(super) fn dingliu(cfg: &ExperimentConfig) -> Result<Outcome> {
    let Setup { plan, s: g0 } = setup(cfg)?;
    let ceiling = -g0.min();
    let opts = threshold_options(cfg);
    let report = match ding_liu_lambda_star(&plan, &g0, cfg.s0, &opts) {
        Ok(r) => r,
        Err(Error::Threshold(msg)) => {
            return Ok(Outcome::new(false, json!({ "ceiling": ceiling, "error": msg })));
        }
        Err(e) => return Err(e),
    };
    report.write(&cfg.out)?;
    let (lo, hi) = (report.lower().unwrap_or(f64::NAN), report.upper().unwrap_or(f64::NAN));
    let inside = lo > 0.0 && hi < ceiling;

    let fam = limit_family(&report, cfg.count, &opts)?;
    fam.write_members(&cfg.out.join("family"), "lambda")?;
    write_text(&cfg.out.join("family.csv"), &fam.table_csv())?;
    // positive part of the first member's S; it only grows with λ
    let first = fam.members.first().map_or(lo, |m| m.parameter);
    let s_first = g0.shift(first);
    let k = superlevel_mask(&s_first, cfg.eps0 * s_first.sup_norm(), "K_plus");
    let track = if k.is_empty() {
        None
    } else {
        Some(sup_inf_track(&fam, &k)?)
    };
    let track_pass = track.as_ref().is_none_or(|t| t.pass);
    let summary = json!({
        "threshold": threshold_json(&report),
        "ceiling": ceiling,
        "inside": inside,
        "family": fam.parameters(),
        "family_stopped_at": fam.stopped_at,
        "sup_inf": track,
    });
    Ok(Outcome::new(inside && track_pass, summary))
}

/// Cutoffs centered at the minimum of `S` and the region `K` on their
/// common plateau, sized to keep supports inside `{S < 0}` and `K` inside
/// `M₋`.
pub(crate) struct AutoRegions {
    pub cutoffs: Vec<CutoffSpec>,
    pub k: RegionMask,
    pub m_minus: RegionMask,
}

pub(crate) fn auto_regions(s: &ScalarField, eps0: f64) -> Result<AutoRegions> {
    let domain = s.domain();
    let m_minus = minus_mask(s, eps0);
    let imin = (0..s.len())
        .min_by(|&a, &b| s.values()[a].total_cmp(&s.values()[b]))
        .unwrap_or(0);
    let center = domain.point(imin);
    let mut x = vec![0.0; domain.dim()];
    let (mut r_neg, mut r_minus) = (f64::INFINITY, f64::INFINITY);
    for i in 0..s.len() {
        domain.point_into(i, &mut x);
        let r = domain.distance(&x, &center);
        if s.values()[i] >= 0.0 {
            r_neg = r_neg.min(r);
        }
        if !m_minus.contains(i) {
            r_minus = r_minus.min(r);
        }
    }
    let r_outer = (0.9 * r_neg).min(0.25 * domain.shortest_period());
    let outers = [r_outer, 0.8 * r_outer];
    let r_k = (0.5 * outers[1]).min(0.9 * r_minus);
    let cutoffs = outers
        .iter()
        .map(|&ro| CutoffSpec::new(center.clone(), 0.5 * ro, ro))
        .collect();
    let k = ball_mask(domain, &center, r_k, "K");
    if k.is_empty() {
        return Err(Error::InvalidArgument("S has no room for a region K inside M_minus".into()));
    }
    Ok(AutoRegions { cutoffs, k, m_minus })
}

fn write_family(cfg: &ExperimentConfig, fam: &Family, regions: &AutoRegions) -> Result<Value> {
    fam.write_members(&cfg.out.join("family"), "alpha")?;
    let table = family_table(fam, &regions.k, &regions.m_minus)?;
    table.write(&cfg.out)?;
    Ok(json!({
        "members": fam.parameters(),
        "stopped_at": fam.stopped_at,
        "pass": table.pass(),
        "verdicts": table.verdicts,
    }))
}

pub(super) fn family(cfg: &ExperimentConfig) -> Result<Outcome> {
    let Setup { plan, s } = setup(cfg)?;
    let opts = threshold_options(cfg);
    let report = find_alpha_star(&plan, &s, cfg.n, &opts)?;
    report.write(&cfg.out)?;
    let fam = limit_family(&report, cfg.count, &opts)?;
    let regions = auto_regions(&s, cfg.eps0)?;
    let table = write_family(cfg, &fam, &regions)?;
    let pass = table["pass"] == json!(true) && fam.stopped_at.is_none();
    Ok(Outcome::new(pass, json!({ "threshold": threshold_json(&report), "family": table })))
}

fn certificates(
    plan: &SpectralPlan,
    s: &ScalarField,
    n: u32,
    alpha_star: f64,
    regions: &AutoRegions,
    fam: &Family,
) -> Result<Vec<(AprioriBoundCertificate, Vec<f64>)>> {
    regions
        .cutoffs
        .iter()
        .map(|spec| {
            let phi = make_cutoff(s.domain(), spec)?;
            let cert = apriori_c0_bound(plan, s, alpha_star, n, &phi, &regions.k)?;
            let margins = cert.margins(fam.members.iter().map(|m| &m.report.solution))?;
            Ok((cert, margins))
        })
        .collect()
}

pub(super) fn diagnose(cfg: &ExperimentConfig) -> Result<Outcome> {
    let Setup { plan, s } = setup(cfg)?;
    let regions = auto_regions(&s, cfg.eps0)?;
    if cfg.control != Control::None {
        return control(cfg, plan, s, &regions);
    }
    let opts = threshold_options(cfg);
    let report = find_alpha_star(&plan, &s, cfg.n, &opts)?;
    report.write(&cfg.out)?;
    let fam = limit_family(&report, cfg.count, &opts)?;
    let table = write_family(cfg, &fam, &regions)?;
    let lower = check_lower_bound(&fam)?;
    let track = sup_inf_track(&fam, &regions.k)?;

    let mut certs_json = Vec::new();
    let mut certs_pass = true;
    if let Some(alpha_star) = report.lower() {
        for (cert, margins) in certificates(&plan, &s, cfg.n, alpha_star, &regions, &fam)? {
            let ok = margins.iter().all(|&m| m >= 0.0);
            certs_pass &= ok;
            certs_json.push(json!({
                "certificate": cert,
                "min_margin": margins.iter().copied().fold(f64::INFINITY, f64::min),
                "pass": ok,
            }));
        }
        write_text(&cfg.out.join("certificates.json"), &serde_json::to_string_pretty(&certs_json)?)?;
    }
    let pass = table["pass"] == json!(true) && lower.pass && track.pass && certs_pass && fam.stopped_at.is_none();
    let summary = json!({
        "threshold": threshold_json(&report),
        "family": table,
        "lower_bound": lower,
        "sup_inf": track,
        "certificates": certs_json,
    });
    Ok(Outcome::new(pass, summary))
}

/// Injected divergent family `u_k = ∓k` in place of computed solutions.
fn control(cfg: &ExperimentConfig, plan: Arc<SpectralPlan>, s: ScalarField, regions: &AutoRegions) -> Result<Outcome> {
    let sign = if cfg.control == Control::DivergeDown { -1.0 } else { 1.0 };
    let fields = (1..=cfg.count)
        .map(|k| (-(k as f64), ScalarField::constant(s.domain(), sign * k as f64)))
        .collect();
    let sweep = crate::threshold::Sweep::Alpha { plan, s, n: cfg.n };
    let fam = Family::from_fields(sweep, fields)?;
    let lower = check_lower_bound(&fam)?;
    let track = sup_inf_track(&fam, &regions.k)?;
    let summary = json!({
        "control": cfg.control.as_str(),
        "lower_bound": lower,
        "sup_inf": track,
    });
    Ok(Outcome::new(lower.pass && track.pass, summary))
}
