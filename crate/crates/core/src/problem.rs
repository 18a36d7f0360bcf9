//! A single Kazdan–Warner instance `-Δu + α = S e^{2u/n}` and the variational
//! quantities attached to it.
//!
//! The energy is
//!
//! ```text
//! I(u) = ∫ |∇u|² + 2αu - nS e^{2u/n}
//! ```
//!
//! whose L² gradient is `2F(u)` with `F(u) = -Δu + α - S e^{2u/n}`, and whose
//! second variation in direction `φ` is `2∫|∇φ|² - (4/n)∫S e^{2u/n} φ²`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::io::{read_values, write_field};
use crate::domain::{integrate, ScalarField, TorusDomain};
use crate::error::{Error, Result};
use crate::spectral::SpectralPlan;

/// `e^{2u/n}` is only evaluated while `max u ≤ EXP_CAP_PER_HALF_N · n/2`.
pub const EXP_CAP_PER_HALF_N: f64 = 400.0;

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    plan: Arc<SpectralPlan>,
    s: ScalarField,
    alpha: f64,
    n: u32,
    admissible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `∫|∇u|²`
    pub dirichlet: f64,
    /// `∫2αu`
    pub linear: f64,
    /// `-∫nS e^{2u/n}`
    pub exponential: f64,
    pub total: f64,
}

/// Mean-value form of the equation: integrating over the closed torus gives
/// `∫S e^{2u/n} = α·Vol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityDefect {
    /// `|∫S e^{2u/n} - α Vol| / (|α| Vol)`
    pub defect: f64,
    /// `∫S e^{2u/n}`
    pub weighted_integral: f64,
    /// Whether `∫S e^{2u/n} < 0`, which every solution must satisfy.
    pub negative: bool,
}

impl ProblemInstance {
    pub fn new(plan: &Arc<SpectralPlan>, s: ScalarField, alpha: f64, n: u32) -> Result<Self> {
        if !(alpha < 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be negative, got {alpha}")));
        }
        if n != 1 && n != 2 {
            return Err(Error::InvalidArgument(format!("complex dimension must be 1 or 2, got {n}")));
        }
        if plan.domain().dim() != 2 * n as usize {
            return Err(Error::InvalidArgument(format!(
                "complex dimension {n} needs a {}-dimensional grid, got {}",
                2 * n,
                plan.domain().dim()
            )));
        }
        if !(Arc::ptr_eq(s.domain(), plan.domain()) || **s.domain() == **plan.domain()) {
            return Err(Error::DomainMismatch);
        }
        let admissible = integrate(&s) < 0.0;
        Ok(ProblemInstance {
            plan: Arc::clone(plan),
            s,
            alpha,
            n,
            admissible,
        })
    }

    /// Same prescribed function, different `α`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        ProblemInstance::new(&self.plan, self.s.clone(), alpha, self.n)
    }

    pub fn plan(&self) -> &Arc<SpectralPlan> {
        &self.plan
    }

    pub fn domain(&self) -> &Arc<TorusDomain> {
        self.plan.domain()
    }

    pub fn s(&self) -> &ScalarField {
        &self.s
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `2/n`
    pub fn exponent(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// `∫S < 0`, required for a finite-threshold continuation path.
    pub fn admissible(&self) -> bool {
        self.admissible
    }

    pub fn exp_cap(&self) -> f64 {
        EXP_CAP_PER_HALF_N * self.n as f64 / 2.0
    }

    fn check(&self, u: &ScalarField) -> Result<()> {
        u.check_domain(&self.s)
    }

    /// `e^{2u/n}`, refusing to overflow.
    pub fn conformal_factor(&self, u: &ScalarField) -> Result<ScalarField> {
        self.check(u)?;
        let max_u = u.max();
        let cap = self.exp_cap();
        if max_u > cap {
            return Err(Error::Overflow { max_u, cap });
        }
        let e = self.exponent();
        Ok(u.map(|v| (e * v).exp()))
    }

    /// `F(u) = -Δu + α - S e^{2u/n}`.
    pub fn residual(&self, u: &ScalarField) -> Result<ScalarField> {
        let ef = self.conformal_factor(u)?;
        let lap = self.plan.laplacian(u)?;
        let alpha = self.alpha;
        let values = lap
            .values()
            .iter()
            .zip(self.s.values())
            .zip(ef.values())
            .map(|((l, s), e)| -l + alpha - s * e)
            .collect();
        Ok(ScalarField::from_raw(self.domain(), values))
    }

    pub fn energy(&self, u: &ScalarField) -> Result<EnergyBreakdown> {
        let ef = self.conformal_factor(u)?;
        let dirichlet = self.plan.dirichlet_energy(u)?;
        let linear = 2.0 * self.alpha * integrate(u);
        let exponential = -(self.n as f64) * self.s.dot(&ef);
        Ok(EnergyBreakdown {
            dirichlet,
            linear,
            exponential,
            total: dirichlet + linear + exponential,
        })
    }

    /// L² gradient of the energy, `2F(u)`.
    pub fn energy_gradient(&self, u: &ScalarField) -> Result<ScalarField> {
        Ok(self.residual(u)?.scale(2.0))
    }

    /// Potential `V = -(2/n) S e^{2u/n}` of the linearized operator `-Δ + V`.
    pub fn linearized_potential(&self, u: &ScalarField) -> Result<ScalarField> {
        let ef = self.conformal_factor(u)?;
        let e = self.exponent();
        Ok(self.s.zip_map(&ef, |s, x| -e * s * x))
    }

    /// Second variation applied to `φ`: `2(-Δφ - (2/n) S e^{2u/n} φ)`.
    pub fn hessian_apply(&self, u: &ScalarField, phi: &ScalarField) -> Result<ScalarField> {
        self.check(phi)?;
        let v = self.linearized_potential(u)?;
        let lap = self.plan.laplacian(phi)?;
        let values = lap
            .values()
            .iter()
            .zip(v.values())
            .zip(phi.values())
            .map(|((l, vi), p)| 2.0 * (-l + vi * p))
            .collect();
        Ok(ScalarField::from_raw(self.domain(), values))
    }

    pub fn integral_identity_defect(&self, u: &ScalarField) -> Result<IdentityDefect> {
        let ef = self.conformal_factor(u)?;
        let weighted = self.s.dot(&ef);
        let target = self.alpha * self.domain().volume();
        Ok(IdentityDefect {
            defect: (weighted - target).abs() / target.abs(),
            weighted_integral: weighted,
            negative: weighted < 0.0,
        })
    }

    /// Constant solution `(n/2) ln(α/S)` when `S` is a negative constant.
    pub fn constant_solution(&self) -> Option<f64> {
        let (lo, hi) = (self.s.min(), self.s.max());
        (lo == hi && hi < 0.0).then(|| 0.5 * self.n as f64 * (self.alpha / hi).ln())
    }
}

/// On-disk form of an instance; `s` names a field file next to the JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: u32,
    pub alpha: f64,
    #[serde(rename = "S")]
    pub s: String,
    pub lengths: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl ProblemInstance {
    /// Writes `<stem>.json` plus the field `<stem>_S.field`/`.json`.
    pub fn save(&self, stem: &Path) -> Result<PathBuf> {
        let s_stem = PathBuf::from(format!("{}_S", stem.display()));
        let bin = write_field(&s_stem, &self.s, "S")?;
        let file = InstanceFile {
            n: self.n,
            alpha: self.alpha,
            s: bin
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
            lengths: self.domain().lengths().to_vec(),
            sizes: self.domain().sizes().to_vec(),
        };
        let path = stem.with_extension("json");
        fs::write(&path, serde_json::to_string_pretty(&file)?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: InstanceFile = serde_json::from_str(&text)?;
        let domain = TorusDomain::new(file.sizes.len(), &file.sizes, &file.lengths)?;
        let bin = path.parent().unwrap_or(Path::new(".")).join(&file.s);
        let s = read_values(&bin, &domain)?;
        let plan = SpectralPlan::new(&domain);
        ProblemInstance::new(&plan, s, file.alpha, file.n)
    }
}
