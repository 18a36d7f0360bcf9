use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{sup_plus_inf, Trend};
use crate::domain::{integrate, RegionMask};
use crate::error::{Error, Result};
use crate::solvers::Method;
use crate::spectral::{min_eigenvalue, DEFAULT_EIG_TOL};
use crate::threshold::{Family, DEFECT_TOL};

/// Lowest acceptable `λ_min` at a monotone or minimizer solution.
pub const STABILITY_TOL: f64 = -1e-6;

pub const CSV_COLUMNS: [&str; 8] = [
    "alpha",
    "sup_K_u",
    "inf_M_u",
    "grad_l2",
    "int_exp",
    "lambda_min",
    "sup_plus_inf",
    "defect",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyRow {
    /// `α`, or `λ` for a λ family.
    pub alpha: f64,
    #[serde(rename = "sup_K_u")]
    pub sup_k_u: f64,
    #[serde(rename = "inf_M_u")]
    pub inf_m_u: f64,
    pub grad_l2: f64,
    pub int_exp: f64,
    pub lambda_min: f64,
    pub sup_plus_inf: f64,
    pub defect: f64,
    /// `sup |Δu|` and `sup |∇u|²`, standing in for Hölder norms.
    pub lap_sup: f64,
    pub grad_sup: f64,
    pub method: Method,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyDiagnostics {
    pub parameter: &'static str,
    pub rows: Vec<FamilyRow>,
    pub verdicts: Vec<Verdict>,
}

impl FamilyDiagnostics {
    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.alpha, r.sup_k_u, r.inf_m_u, r.grad_l2, r.int_exp, r.lambda_min, r.sup_plus_inf, r.defect
            );
        }
        out
    }

    /// Writes `family.csv` and `diagnostics.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join("family.csv");
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let json = dir.join("diagnostics.json");
        fs::write(&json, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&json, e))
    }
}

/// Per-member scalars and boundedness verdicts for a family.
///
/// `K` must lie inside `m_minus`. `λ_min` is taken from the member reports
/// when present and computed otherwise.
pub fn family_table(family: &Family, k: &RegionMask, m_minus: &RegionMask) -> Result<FamilyDiagnostics> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty family".into()));
    }
    k.require_subset_of(m_minus)?;
    let rows = family
        .members
        .par_iter()
        .map(|m| -> Result<FamilyRow> {
            let inst = family.sweep.instance(m.parameter)?;
            let u = &m.report.solution;
            let plan = inst.plan();
            let ef = inst.conformal_factor(u)?;
            let lambda_min = match m.report.min_eig {
                Some(v) => v,
                None => min_eigenvalue(plan, &inst.linearized_potential(u)?, DEFAULT_EIG_TOL)?,
            };
            let abs_u = u.map(f64::abs);
            Ok(FamilyRow {
                alpha: m.parameter,
                sup_k_u: k.max_of(&abs_u).ok_or_else(|| Error::InvalidArgument("K is empty".into()))?,
                inf_m_u: u.min(),
                grad_l2: plan.dirichlet_energy(u)?.sqrt(),
                int_exp: integrate(&ef),
                lambda_min,
                sup_plus_inf: sup_plus_inf(u, k)?,
                defect: inst.integral_identity_defect(u)?.defect,
                lap_sup: plan.laplacian(u)?.sup_norm(),
                grad_sup: plan.grad_norm_sq(u)?.sup_norm(),
                method: m.report.method,
                converged: m.report.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let col = |f: fn(&FamilyRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let mut verdicts = Vec::new();
    let mut bounded = |name: &'static str, values: Vec<f64>| {
        let t = Trend::of(&values);
        verdicts.push(Verdict {
            name,
            pass: t.flat(),
            detail: format!("max |x| = {:e}, tail slope = {:e}", t.max_abs, t.slope),
        });
    };
    bounded("sup_K_u_bounded", col(|r| r.sup_k_u));
    bounded("grad_l2_bounded", col(|r| r.grad_l2));
    bounded("int_exp_bounded", col(|r| r.int_exp));
    bounded("laplacian_sup_bounded", col(|r| r.lap_sup));
    bounded("gradient_sup_bounded", col(|r| r.grad_sup));

    let infs = col(|r| r.inf_m_u);
    let t = Trend::of(&infs);
    verdicts.push(Verdict {
        name: "inf_M_u_bounded_below",
        pass: t.not_falling(),
        detail: format!("min = {:e}, tail slope = {:e}", infs.iter().copied().fold(f64::INFINITY, f64::min), t.slope),
    });
    let spi = col(|r| r.sup_plus_inf);
    let t = Trend::of(&spi);
    verdicts.push(Verdict {
        name: "sup_plus_inf_bounded_above",
        pass: t.not_rising(),
        detail: format!("max = {:e}, tail slope = {:e}", spi.iter().copied().fold(f64::NEG_INFINITY, f64::max), t.slope),
    });

    let stable_rows: Vec<&FamilyRow> = rows
        .iter()
        .filter(|r| matches!(r.method, Method::Monotone | Method::Minimization))
        .collect();
    let worst = stable_rows.iter().map(|r| r.lambda_min).fold(f64::INFINITY, f64::min);
    verdicts.push(Verdict {
        name: "second_variation_nonnegative",
        pass: stable_rows.iter().all(|r| r.lambda_min >= STABILITY_TOL),
        detail: format!("{} interval-engine members, min lambda_min = {worst:e}", stable_rows.len()),
    });
    let worst = rows
        .iter()
        .filter(|r| r.converged)
        .map(|r| r.defect)
        .fold(0.0f64, f64::max);
    verdicts.push(Verdict {
        name: "integral_identity",
        pass: rows.iter().all(|r| r.converged && r.defect <= DEFECT_TOL),
        detail: format!("max defect = {worst:e}, all converged = {}", rows.iter().all(|r| r.converged)),
    });

    Ok(FamilyDiagnostics {
        parameter: family.sweep.parameter_name(),
        rows,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ScalarField, TorusDomain};
    use crate::spectral::SpectralPlan;
    use crate::threshold::Sweep;

    #[test]
    fn constant_family_closed_forms() {
        let d = TorusDomain::unit(2, 16).unwrap();
        let s = -2.0;
        let sweep = Sweep::Alpha {
            plan: SpectralPlan::new(&d),
            s: ScalarField::constant(&d, s),
            n: 1,
        };
        let alphas = [-1.0, -2.0, -4.0];
        let fields = alphas
            .iter()
            .map(|&a| (a, ScalarField::constant(&d, 0.5 * (a / s).ln())))
            .collect();
        let fam = Family::from_fields(sweep, fields).unwrap();
        let all = RegionMask::new(&d, vec![true; d.len()], "M").unwrap();
        let t = family_table(&fam, &all, &all).unwrap();
        assert_eq!(t.rows.len(), 3);
        for (r, a) in t.rows.iter().zip(alphas) {
            let u = 0.5 * (a / s).ln();
            assert!((r.sup_k_u - u.abs()).abs() < 1e-14);
            assert!((r.inf_m_u - u).abs() < 1e-14);
            assert!(r.grad_l2 < 1e-12);
            assert!((r.int_exp - a / s).abs() < 1e-12);
            // V = -2 S e^{2u} = -2a, constant
            assert!((r.lambda_min + 2.0 * a).abs() < 1e-8);
            assert!((r.sup_plus_inf - 2.0 * u).abs() < 1e-14);
            assert!(r.defect < 1e-14);
        }
        let csv = t.to_csv();
        assert!(csv.starts_with("alpha,sup_K_u,inf_M_u,grad_l2,int_exp,lambda_min,sup_plus_inf,defect\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn k_outside_m_minus_is_rejected() {
        let d = TorusDomain::unit(2, 16).unwrap();
        let sweep = Sweep::Alpha {
            plan: SpectralPlan::new(&d),
            s: ScalarField::constant(&d, -1.0),
            n: 1,
        };
        let fam = Family::from_fields(sweep, vec![(-1.0, ScalarField::zeros(&d))]).unwrap();
        let all = RegionMask::new(&d, vec![true; d.len()], "K").unwrap();
        let mut half = vec![false; d.len()];
        half[..10].iter_mut().for_each(|b| *b = true);
        let m = RegionMask::new(&d, half, "M_minus").unwrap();
        assert!(family_table(&fam, &all, &m).is_err());
    }
}
