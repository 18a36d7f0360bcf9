use std::f64::consts::{E, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, FieldKind, FieldSpec};
use super::{named_field, write_text, Outcome};
use crate::diagnostics::{check_lower_bound, sup_inf_track};
use crate::domain::{RegionMask, ScalarField, TorusDomain};
use crate::error::Result;
use crate::problem::ProblemInstance;
use crate::solvers::{monotone_iterate, newton_solve, OrderInterval, SolverOptions};
use crate::spectral::SpectralPlan;
use crate::threshold::{probe_solvable, Family, ProbeBudget, Sweep};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn instance(d: usize, pts: usize, s: impl Fn(&[f64]) -> f64, alpha: f64, n: u32) -> Result<ProblemInstance> {
    let dom = TorusDomain::unit(d, pts)?;
    let plan = SpectralPlan::new(&dom);
    ProblemInstance::new(&plan, ScalarField::from_fn(&dom, s), alpha, n)
}

fn constant_recovery() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut defect = 0.0f64;
    for (d, pts, s, alpha, n, exact) in [(2, 32, -2.0, -2.0 * 0.6f64.exp(), 1, 0.3), (4, 8, -1.0, -E, 2, 1.0)] {
        let inst = instance(d, pts, |_| s, alpha, n)?;
        let r = newton_solve(&inst, &SolverOptions::default())?;
        if !r.converged {
            return Ok((false, format!("d = {d} did not converge: {:?}", r.termination)));
        }
        worst = worst.max(r.solution.max_abs_diff(&ScalarField::constant(inst.domain(), exact)));
        defect = defect.max(inst.integral_identity_defect(&r.solution)?.defect);
    }
    Ok((worst <= 1e-10 && defect <= 1e-8, format!("max error {worst:e}, max defect {defect:e}")))
}

fn manufactured() -> Result<(bool, String)> {
    let dom = TorusDomain::unit(2, 32)?;
    let plan = SpectralPlan::new(&dom);
    let exact = ScalarField::from_fn(&dom, |x| 0.3 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
    let alpha = -1.0;
    let lap = plan.laplacian(&exact)?;
    let s = lap.zip_map(&exact, |l, u| (-l + alpha) * (-2.0 * u).exp());
    let inst = ProblemInstance::new(&plan, s, alpha, 1)?;
    let r = newton_solve(&inst, &SolverOptions::default())?;
    let err = r.solution.max_abs_diff(&exact);
    Ok((r.converged && err <= 1e-8, format!("error {err:e}")))
}

fn gradient_matches_differences() -> Result<(bool, String)> {
    let inst = instance(2, 16, |x| (2.0 * PI * x[0]).sin() - 0.5, -1.0, 1)?;
    let dom = inst.domain().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = ScalarField::from_fn(&dom, |x| 0.2 * (2.0 * PI * x[1]).cos());
    let g = inst.energy_gradient(&u)?;
    let t = 1e-4;
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let phi = ScalarField::from_fn(&dom, |_| rng.random::<f64>() - 0.5);
        let plus = inst.energy(&u.axpby(1.0, &phi, t))?.total;
        let minus = inst.energy(&u.axpby(1.0, &phi, -t))?.total;
        let fd = (plus - minus) / (2.0 * t);
        let exact = g.dot(&phi);
        worst = worst.max((fd - exact).abs() / exact.abs().max(1e-12));
    }
    Ok((worst <= 1e-5, format!("max relative error {worst:e}")))
}

fn monotone_agrees() -> Result<(bool, String)> {
    let inst = instance(2, 16, |x| (2.0 * PI * x[0]).sin() - 0.5, -1.0, 1)?;
    let deeper = newton_solve(&inst.with_alpha(-1.5)?, &SolverOptions::default())?;
    let interval = OrderInterval::from_warm(&inst, &deeper)?;
    let mono = monotone_iterate(&inst, &interval, &SolverOptions::interval_engines())?;
    let newton = newton_solve(&inst, &SolverOptions::default())?;
    let gap = mono.solution.max_abs_diff(&newton.solution);
    Ok((mono.converged && newton.converged && gap <= 1e-7, format!("sup gap {gap:e}")))
}

fn sign_obstruction() -> Result<(bool, String)> {
    let pos = probe_solvable(&instance(2, 16, |_| 1.0, -1.0, 1)?, &ProbeBudget::default());
    let lam = probe_solvable(&instance(2, 32, |x| (2.0 * PI * x[0]).cos() + 2.0, -1.0, 1)?, &ProbeBudget::default());
    Ok((
        !pos.is_solved() && !lam.is_solved(),
        format!("S = 1 solved: {}, S = g0 + 3 solved: {}", pos.is_solved(), lam.is_solved()),
    ))
}

fn controls_fail() -> Result<(bool, String)> {
    let dom = TorusDomain::unit(2, 16)?;
    let sweep = Sweep::Alpha {
        plan: SpectralPlan::new(&dom),
        s: ScalarField::constant(&dom, -1.0),
        n: 1,
    };
    let fam = |sign: f64| {
        let fields = (1..=8)
            .map(|k| (-(k as f64), ScalarField::constant(&dom, sign * k as f64)))
            .collect();
        Family::from_fields(sweep.clone(), fields)
    };
    let all = RegionMask::new(&dom, vec![true; dom.len()], "M")?;
    let down = check_lower_bound(&fam(-1.0)?)?.pass;
    let up = sup_inf_track(&fam(1.0)?, &all)?.pass;
    Ok((!down && !up, format!("lower bound pass: {down}, sup+inf pass: {up}")))
}

fn random_field_deterministic() -> Result<(bool, String)> {
    let dom = TorusDomain::unit(2, 32)?;
    let spec = FieldSpec {
        kind: FieldKind::Random,
        value: 0.0,
        scale: 1.0,
        offset: 0.0,
        seed: 7,
        decay: 3.0,
        modes: 4,
        file: None,
    };
    let a = named_field(&spec, &dom, true)?;
    let b = named_field(&spec, &dom, true)?;
    let same = a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits());
    Ok((same && a.max() == 0.0, format!("bitwise identical: {same}")))
}

type CheckFn = fn() -> Result<(bool, String)>;

/// Fast invariant checks; each is also covered by the test suite at larger scale.
pub fn run_selftest() -> Vec<SelftestCheck> {
    let checks: [(&'static str, CheckFn); 7] = [
        ("constant_recovery", constant_recovery),
        ("manufactured_solution", manufactured),
        ("gradient_matches_differences", gradient_matches_differences),
        ("monotone_agrees_with_newton", monotone_agrees),
        ("sign_obstruction", sign_obstruction),
        ("negative_controls_fail", controls_fail),
        ("random_field_deterministic", random_field_deterministic),
    ];
    checks
        .iter()
        .map(|(name, f)| {
            let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
            SelftestCheck { name, pass, detail }
        })
        .collect()
}

pub(super) fn selftest(cfg: &ExperimentConfig) -> Result<Outcome> {
    let checks = run_selftest();
    write_text(&cfg.out.join("selftest.json"), &serde_json::to_string_pretty(&checks)?)?;
    let pass = checks.iter().all(|c| c.pass);
    let summary = json!({
        "passed": checks.iter().filter(|c| c.pass).count(),
        "total": checks.len(),
        "checks": checks,
    });
    Ok(Outcome::new(pass, summary))
}
