//! End-to-end acceptance run: one line per criterion, non-zero exit if any fails.

mod common;

use std::f64::consts::{E, PI};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use kwlab::cli::{named_field, run, ExperimentConfig, FieldKind, FieldSpec, RawConfig, EXIT_VERDICT};
use kwlab::diagnostics::{
    apriori_c0_bound, check_lower_bound, family_table, minus_mask, sup_inf_track, DEFAULT_EPS0_FRACTION, STABILITY_TOL,
};
use kwlab::domain::{ball_mask, make_cutoff, CutoffSpec, RegionMask, ScalarField, TorusDomain};
use kwlab::problem::ProblemInstance;
use kwlab::solvers::{minimize_over_interval, monotone_iterate, newton_solve, OrderInterval, SolveReport, SolverOptions};
use kwlab::spectral::{min_eigenvalue, SpectralPlan};
use kwlab::threshold::{
    ding_liu_lambda_star, find_alpha_star, limit_family, probe_solvable, Family, ProbeBudget, Sweep, ThresholdOptions,
    ThresholdReport,
};
use kwlab::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<(bool, String)>;

/// Converged solutions seen anywhere in the run, re-checked by criterion 3.
#[derive(Default)]
struct Ledger {
    solved: Vec<(ProblemInstance, ScalarField)>,
}

impl Ledger {
    fn keep(&mut self, inst: &ProblemInstance, r: &SolveReport) {
        if r.converged {
            self.solved.push((inst.clone(), r.solution.clone()));
        }
    }

    fn keep_family(&mut self, fam: &Family) -> Result<()> {
        for i in 0..fam.len() {
            let inst = fam.instance(i)?;
            self.keep(&inst, &fam.members[i].report);
        }
        Ok(())
    }
}

fn sin_field(dom: &Arc<TorusDomain>) -> ScalarField {
    ScalarField::from_fn(dom, |x| (2.0 * PI * x[0]).sin() - 0.5)
}

fn constant_recovery(ledger: &mut Ledger) -> Check {
    let cases = [(2, 64, -2.0, -2.0 * 0.3f64.exp().powi(2), 1, 0.3), (4, 16, -1.0, -E, 2, 1.0)];
    let mut detail = Vec::new();
    let mut pass = true;
    for (d, pts, s, alpha, n, exact) in cases {
        let start = Instant::now();
        let dom = TorusDomain::unit(d, pts)?;
        let plan = SpectralPlan::new(&dom);
        let inst = ProblemInstance::new(&plan, ScalarField::constant(&dom, s), alpha, n)?;
        let r = newton_solve(&inst, &SolverOptions::default())?;
        let secs = start.elapsed().as_secs_f64();
        let err = r.solution.max_abs_diff(&ScalarField::constant(&dom, exact));
        pass &= r.converged && err <= 1e-10 && secs < 1.0;
        detail.push(format!("n={n} on {pts}^{d}: error {err:.1e} in {secs:.2}s"));
        ledger.keep(&inst, &r);
    }
    Ok((pass, detail.join(", ")))
}

fn manufactured(ledger: &mut Ledger) -> Check {
    let alpha = -1.0;
    let exact = |x: &[f64]| 0.3 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() + 0.1 * (4.0 * PI * x[1]).sin();
    let lap = |x: &[f64]| {
        -8.0 * PI * PI * 0.3 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
            - 16.0 * PI * PI * 0.1 * (4.0 * PI * x[1]).sin()
    };
    let solve = |pts: usize| -> Result<(ProblemInstance, SolveReport)> {
        let dom = TorusDomain::unit(2, pts)?;
        let plan = SpectralPlan::new(&dom);
        let s = ScalarField::from_fn(&dom, |x| (-lap(x) + alpha) * (-2.0 * exact(x)).exp());
        let inst = ProblemInstance::new(&plan, s, alpha, 1)?;
        let r = newton_solve(&inst, &SolverOptions::default())?;
        Ok((inst, r))
    };
    let (fine_inst, fine) = solve(64)?;
    let (coarse_inst, coarse) = solve(32)?;
    let err = fine.solution.max_abs_diff(&ScalarField::from_fn(fine_inst.domain(), exact));
    let mut change = 0.0f64;
    for i in 0..32 {
        for j in 0..32 {
            let a = coarse.solution.values()[i * 32 + j];
            let b = fine.solution.values()[2 * i * 64 + 2 * j];
            change = change.max((a - b).abs());
        }
    }
    ledger.keep(&fine_inst, &fine);
    ledger.keep(&coarse_inst, &coarse);
    Ok((
        fine.converged && coarse.converged && err <= 1e-8 && change <= 1e-6,
        format!("64^2 error {err:.1e}, 32^2 vs 64^2 change {change:.1e}"),
    ))
}

fn integral_identity(ledger: &Ledger) -> Check {
    let mut worst = 0.0f64;
    let mut all_negative = true;
    for (inst, u) in &ledger.solved {
        let d = inst.integral_identity_defect(u)?;
        worst = worst.max(d.defect);
        all_negative &= d.negative;
    }
    Ok((
        worst <= 1e-8 && all_negative && !ledger.solved.is_empty(),
        format!(
            "{} converged solutions, max relative defect {worst:.1e}, all weighted integrals negative: {all_negative}",
            ledger.solved.len()
        ),
    ))
}

fn variational_consistency() -> Check {
    let dom = TorusDomain::unit(2, 32)?;
    let plan = SpectralPlan::new(&dom);
    let inst = ProblemInstance::new(&plan, sin_field(&dom), -1.5, 1)?;
    let u = ScalarField::from_fn(&dom, |x| 0.3 * (2.0 * PI * x[1]).cos() - 0.2 * (2.0 * PI * (x[0] - x[1])).sin());
    let g = inst.energy_gradient(&u)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let t = 1e-4;
    let (mut grad_err, mut hess_err) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let phi = ScalarField::from_fn(&dom, |_| rng.random::<f64>() - 0.5);
        let (up, um) = (u.axpby(1.0, &phi, t), u.axpby(1.0, &phi, -t));
        let fd = (inst.energy(&up)?.total - inst.energy(&um)?.total) / (2.0 * t);
        let exact = g.dot(&phi);
        grad_err = grad_err.max((fd - exact).abs() / exact.abs());
        let fd_h = inst.energy_gradient(&up)?.sub(&inst.energy_gradient(&um)?).scale(0.5 / t);
        let h = inst.hessian_apply(&u, &phi)?;
        hess_err = hess_err.max(fd_h.sub(&h).l2_norm() / h.l2_norm());
    }
    Ok((
        grad_err <= 1e-5 && hess_err <= 1e-5,
        format!("10 directions: gradient rel. error {grad_err:.1e}, hessian rel. error {hess_err:.1e}"),
    ))
}

/// Monotone and minimizer solutions on a chain of α, each using the next
/// deeper Newton solution as super-solution.
fn stability(ledger: &mut Ledger) -> Check {
    let dom = TorusDomain::unit(2, 64)?;
    let plan = SpectralPlan::new(&dom);
    let g_two = named_field(&field_spec(FieldKind::TwoMode), &dom, true)?;
    let instances = [
        (sin_field(&dom), vec![-1.0, -2.0, -3.0, -3.17]),
        (g_two.shift(0.4), vec![-0.5, -1.0, -1.5]),
    ];
    let mut lam_min = f64::INFINITY;
    let mut count = 0;
    let mut all_converged = true;
    for (s, alphas) in instances {
        let base = ProblemInstance::new(&plan, s, alphas[0], 1)?;
        let mut newton = Vec::new();
        let mut warm: Option<ScalarField> = None;
        for &a in &alphas {
            let inst = base.with_alpha(a)?;
            let opts = match &warm {
                Some(w) => SolverOptions::default().with_start(kwlab::solvers::Start::Field(w.clone())),
                None => SolverOptions::default(),
            };
            let r = newton_solve(&inst, &opts)?;
            all_converged &= r.converged;
            warm = Some(r.solution.clone());
            newton.push((inst, r));
        }
        for w in newton.windows(2) {
            let (inst, deeper) = (&w[0].0, &w[1].1);
            let interval = OrderInterval::from_warm(inst, deeper)?;
            for r in [
                monotone_iterate(inst, &interval, &SolverOptions::interval_engines())?,
                minimize_over_interval(inst, &interval, &SolverOptions::interval_engines())?,
            ] {
                all_converged &= r.converged;
                let lam = min_eigenvalue(&plan, &inst.linearized_potential(&r.solution)?, 1e-10)?;
                lam_min = lam_min.min(lam);
                count += 1;
                ledger.keep(inst, &r);
            }
        }
    }
    Ok((
        all_converged && lam_min >= STABILITY_TOL,
        format!("{count} monotone/minimizer solutions, min lambda_min {lam_min:.4e}"),
    ))
}

fn unbounded_probe() -> Check {
    let dom = TorusDomain::unit(2, 64)?;
    let plan = SpectralPlan::new(&dom);
    let fields = [
        ScalarField::constant(&dom, -1.0),
        ScalarField::from_fn(&dom, |x| (2.0 * PI * x[0]).cos() - 1.0),
    ];
    let mut solved = 0;
    let mut total = 0;
    for s in fields {
        for alpha in [-1.0, -10.0, -100.0, -1000.0] {
            let inst = ProblemInstance::new(&plan, s.clone(), alpha, 1)?;
            total += 1;
            if probe_solvable(&inst, &ProbeBudget::default()).is_solved() {
                solved += 1;
            }
        }
    }
    Ok((solved == total, format!("{solved}/{total} probes solved for S = -1 and S = cos - 1")))
}

fn finite_threshold(ledger: &mut Ledger) -> Result<((bool, String), ThresholdReport)> {
    let start = Instant::now();
    let dom = TorusDomain::unit(2, 64)?;
    let plan = SpectralPlan::new(&dom);
    let report = find_alpha_star(&plan, &sin_field(&dom), 1, &ThresholdOptions::default())?;
    ledger.keep_family(&report.family)?;
    let (failed, solved) = common::dense_alpha_star(16, |x, _| (2.0 * PI * x).sin() - 0.5, 1e-3);
    let secs = start.elapsed().as_secs_f64();
    let (lo, hi) = (report.lower().unwrap_or(f64::NAN), report.upper().unwrap_or(f64::NAN));
    let ours = 0.5 * (lo + hi);
    let oracle = 0.5 * (failed + solved);
    let rel = ((ours - oracle) / oracle).abs();
    let pass = report.width() <= 1e-3 && rel <= 0.05 && secs < 60.0;
    Ok((
        (pass, format!("bracket [{lo:.6}, {hi:.6}], dense 16^2 oracle {oracle:.6} (rel. diff {rel:.1e}), {secs:.1}s")),
        report,
    ))
}

fn field_spec(kind: FieldKind) -> FieldSpec {
    FieldSpec {
        kind,
        value: 0.0,
        scale: 1.0,
        offset: 0.0,
        seed: 3,
        decay: 3.0,
        modes: 4,
        file: None,
    }
}

fn ding_liu_containment(ledger: &mut Ledger) -> Check {
    let dom = TorusDomain::unit(2, 64)?;
    let plan = SpectralPlan::new(&dom);
    let mut pass = true;
    let mut detail = Vec::new();
    for kind in [FieldKind::Cos1Shifted, FieldKind::TwoMode, FieldKind::Random] {
        let g0 = named_field(&field_spec(kind), &dom, true)?;
        let ceiling = -g0.min();
        let report = ding_liu_lambda_star(&plan, &g0, -1.0, &ThresholdOptions::default())?;
        ledger.keep_family(&report.family)?;
        let (lo, hi) = (report.lower().unwrap_or(f64::NAN), report.upper().unwrap_or(f64::NAN));
        pass &= lo > 0.0 && hi < ceiling;
        detail.push(format!("{}: [{lo:.4}, {hi:.4}] in (0, {ceiling:.4})", kind.as_str()));
    }
    Ok((pass, detail.join("; ")))
}

/// Cutoffs and K centered at the minimum of `sin(2πx) - 1/2`, which is
/// negative on the slab `|x - 3/4| < 1/3`.
fn regions(dom: &Arc<TorusDomain>) -> Result<(Vec<ScalarField>, RegionMask)> {
    let center = vec![0.75, 0.5];
    let cutoffs = [(0.125, 0.25), (0.1, 0.2)]
        .iter()
        .map(|&(ri, ro)| make_cutoff(dom, &CutoffSpec::new(center.clone(), ri, ro)))
        .collect::<Result<Vec<_>>>()?;
    Ok((cutoffs, ball_mask(dom, &center, 0.08, "K")))
}

fn apriori_bound(report: &ThresholdReport, fam: &Family) -> Check {
    let plan = report.family.sweep.plan().clone();
    let dom = plan.domain().clone();
    let s = sin_field(&dom);
    let alpha_lo = report.lower().unwrap_or(f64::NAN);
    let (cutoffs, k) = regions(&dom)?;
    let mut pass = fam.len() == 8;
    let mut detail = Vec::new();
    for phi in &cutoffs {
        let cert = apriori_c0_bound(&plan, &s, alpha_lo, 1, phi, &k)?;
        let margins = cert.margins(fam.members.iter().map(|m| &m.report.solution))?;
        let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
        pass &= min >= 0.0;
        detail.push(format!("bound {:.4}, min margin {min:.4}", cert.bound_on_sup_u));
    }
    Ok((pass, format!("{} members; {}", fam.len(), detail.join("; "))))
}

fn family_behaviour(fam: &Family) -> Check {
    let dom = fam.sweep.domain().clone();
    let s = sin_field(&dom);
    let (_, k) = regions(&dom)?;
    let m_minus = minus_mask(&s, DEFAULT_EPS0_FRACTION);
    let table = family_table(fam, &k, &m_minus)?;
    let nearest = fam.last().map(|m| m.report.converged).unwrap_or(false);
    let failing: Vec<&str> = table.verdicts.iter().filter(|v| !v.pass).map(|v| v.name).collect();
    Ok((
        fam.len() == 8 && fam.stopped_at.is_none() && nearest && table.pass(),
        format!(
            "{} members down to alpha {:.6}, nearest converged: {nearest}, {} verdicts, failing: {failing:?}",
            fam.len(),
            fam.parameters().last().copied().unwrap_or(f64::NAN),
            table.verdicts.len()
        ),
    ))
}

fn config(pairs: &[(&str, &str)], out: &Path) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::default();
    for (k, v) in pairs {
        raw.set(k, *v);
    }
    raw.set("out", out.to_string_lossy());
    ExperimentConfig::from_raw(&raw)
}

fn negative_controls() -> Check {
    let dom = TorusDomain::unit(2, 16)?;
    let sweep = Sweep::Alpha {
        plan: SpectralPlan::new(&dom),
        s: ScalarField::constant(&dom, -1.0),
        n: 1,
    };
    let injected = |sign: f64| {
        let fields = (1..=8).map(|k| (-(k as f64), ScalarField::constant(&dom, sign * k as f64))).collect();
        Family::from_fields(sweep.clone(), fields)
    };
    let all = RegionMask::new(&dom, vec![true; dom.len()], "M")?;
    let down = check_lower_bound(&injected(-1.0)?)?.pass;
    let up = sup_inf_track(&injected(1.0)?, &all)?.pass;
    let tmp = tempfile::tempdir().map_err(|e| io_err(Path::new("tempdir"), e))?;
    let mut codes = Vec::new();
    for control in ["diverge_down", "diverge_up"] {
        let cfg = config(
            &[("mode", "diagnose"), ("field", "sin1"), ("field_offset", "-0.5"), ("sizes", "32"), ("control", control)],
            &tmp.path().join(control),
        )?;
        codes.push(run(&cfg)?.exit_code);
    }
    Ok((
        !down && !up && codes.iter().all(|&c| c == EXIT_VERDICT),
        format!("lower-bound verdict {down}, sup+inf verdict {up}, runner exit codes {codes:?}"),
    ))
}

fn io_err(path: &Path, source: std::io::Error) -> kwlab::Error {
    kwlab::Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn max_numeric_gap(a: &Value, b: &Value) -> Option<f64> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => Some((x.as_f64()? - y.as_f64()?).abs()),
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            x.iter().zip(y).try_fold(0.0f64, |m, (p, q)| Some(m.max(max_numeric_gap(p, q)?)))
        }
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => x
            .iter()
            .try_fold(0.0f64, |m, (k, p)| Some(m.max(max_numeric_gap(p, y.get(k)?)?))),
        _ => (a == b).then_some(0.0),
    }
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| io_err(Path::new("tempdir"), e))?;
    let mut summaries = Vec::new();
    for run_id in ["a", "b"] {
        let dir = tmp.path().join(run_id);
        let cfg = config(
            &[
                ("mode", "family"),
                ("field", "random"),
                ("field_offset", "-0.2"),
                ("seed", "17"),
                ("sizes", "32"),
                ("count", "4"),
                ("single_thread", "true"),
            ],
            &dir,
        )?;
        run(&cfg)?;
        let text = std::fs::read_to_string(dir.join("summary.json")).map_err(|e| io_err(&dir, e))?;
        summaries.push(serde_json::from_str::<Value>(&text)?);
    }
    let gap = max_numeric_gap(&summaries[0], &summaries[1]);
    Ok((
        gap.is_some_and(|g| g <= 1e-12),
        match gap {
            Some(g) => format!("max scalar difference between two single-thread runs {g:.1e}"),
            None => "summaries differ in structure or text".into(),
        },
    ))
}

fn settle(check: Check) -> (bool, String) {
    check.unwrap_or_else(|e| (false, format!("error: {e}")))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut ledger = Ledger::default();
    let mut results: Vec<(u32, &str, (bool, String))> = vec![
        (1, "exact-solution recovery", settle(constant_recovery(&mut ledger))),
        (2, "manufactured-solution convergence", settle(manufactured(&mut ledger))),
        (4, "variational consistency", settle(variational_consistency())),
        (5, "stability of monotone and minimizer solutions", settle(stability(&mut ledger))),
        (6, "unbounded threshold for S <= 0", settle(unbounded_probe())),
    ];
    let (c7, report) = match finite_threshold(&mut ledger) {
        Ok((c, r)) => (c, Some(r)),
        Err(e) => ((false, format!("error: {e}")), None),
    };
    results.push((7, "finite threshold", c7));
    results.push((8, "threshold containment for S = g0 + lambda", settle(ding_liu_containment(&mut ledger))));
    let family = report.as_ref().map(|r| {
        let mut fam = limit_family(r, 8, &ThresholdOptions::default())?;
        fam.fill_min_eig()?;
        ledger.keep_family(&fam)?;
        Ok(fam)
    });
    let (c9, c10) = match (report, family) {
        (Some(report), Some(Ok(fam))) => (settle(apriori_bound(&report, &fam)), settle(family_behaviour(&fam))),
        (_, Some(Err(e))) => {
            let e: kwlab::Error = e;
            ((false, format!("error: {e}")), (false, format!("error: {e}")))
        }
        _ => ((false, "no threshold report".into()), (false, "no threshold report".into())),
    };
    results.push((9, "a priori C0 bound on the limit family", c9));
    results.push((10, "limit family behaviour", c10));
    results.push((11, "negative controls", settle(negative_controls())));
    results.push((12, "determinism", settle(determinism())));
    results.push((3, "integral identity", settle(integral_identity(&ledger))));
    results.sort_by_key(|r| r.0);

    let failures = results.iter().filter(|r| !r.2 .0).count();
    for (id, name, (pass, detail)) in &results {
        println!("criterion {id:>2} {} {name}: {detail}", if *pass { "PASS" } else { "FAIL" });
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        results.len() - failures,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
