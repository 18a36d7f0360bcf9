//! Fourier-spectral operators on the torus.
//!
//! Sign convention: `Δ e^{i⟨ξ,x⟩} = -|ξ|² e^{i⟨ξ,x⟩}` with `ξ_k = 2πk/L` per
//! axis. The Laplacian keeps the Nyquist mode (its symbol is the full
//! `|ξ|²`, so every nonzero frequency has a strictly positive eigenvalue);
//! first derivatives zero it.

mod eigen;

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::domain::{ScalarField, TorusDomain};
use crate::error::{Error, Result};

pub use eigen::{min_eigenpair, min_eigenvalue, EigenPair, DEFAULT_EIG_TOL};

pub struct SpectralPlan {
    domain: Arc<TorusDomain>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// `|ξ|²` per frequency, flat row-major like the grid.
    symbol: Vec<f64>,
    /// First-derivative wavenumbers per axis, Nyquist set to zero.
    derivative: Vec<Vec<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan")
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

fn signed_frequency(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

impl SpectralPlan {
    pub fn new(domain: &Arc<TorusDomain>) -> Arc<Self> {
        let mut planner = FftPlanner::new();
        let forward = domain
            .sizes()
            .iter()
            .map(|&n| planner.plan_fft_forward(n))
            .collect();
        let inverse = domain
            .sizes()
            .iter()
            .map(|&n| planner.plan_fft_inverse(n))
            .collect();

        let mut second = Vec::with_capacity(domain.dim());
        let mut derivative = Vec::with_capacity(domain.dim());
        for (&n, &l) in domain.sizes().iter().zip(domain.lengths()) {
            let base = 2.0 * std::f64::consts::PI / l;
            second.push(
                (0..n)
                    .map(|j| {
                        let xi = base * signed_frequency(j, n) as f64;
                        xi * xi
                    })
                    .collect::<Vec<_>>(),
            );
            derivative.push(
                (0..n)
                    .map(|j| {
                        if j == n / 2 {
                            0.0
                        } else {
                            base * signed_frequency(j, n) as f64
                        }
                    })
                    .collect::<Vec<_>>(),
            );
        }
        let symbol = (0..domain.len())
            .map(|mut idx| {
                let mut s = 0.0;
                for axis in (0..domain.dim()).rev() {
                    let n = domain.sizes()[axis];
                    s += second[axis][idx % n];
                    idx /= n;
                }
                s
            })
            .collect();

        Arc::new(SpectralPlan {
            domain: Arc::clone(domain),
            forward,
            inverse,
            symbol,
            derivative,
        })
    }

    pub fn domain(&self) -> &Arc<TorusDomain> {
        &self.domain
    }

    /// Eigenvalues `|ξ|²` of `-Δ`, one per discrete frequency.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    fn check(&self, f: &ScalarField) -> Result<()> {
        if Arc::ptr_eq(f.domain(), &self.domain) || **f.domain() == *self.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    fn transform(&self, buf: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let sizes = self.domain.sizes();
        let scratch_len = plans
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        for (axis, plan) in plans.iter().enumerate() {
            let n = sizes[axis];
            let stride: usize = sizes[axis + 1..].iter().product();
            if stride == 1 {
                plan.process_with_scratch(buf, &mut scratch);
                continue;
            }
            let outer = buf.len() / (n * stride);
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for o in 0..outer {
                let block = o * n * stride;
                for s in 0..stride {
                    let base = block + s;
                    for (j, c) in line.iter_mut().enumerate() {
                        *c = buf[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, c) in line.iter().enumerate() {
                        buf[base + j * stride] = *c;
                    }
                }
            }
        }
    }

    /// Unnormalized forward DFT of real grid values.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.forward);
        buf
    }

    /// Inverse DFT (normalized) keeping the real part.
    pub fn inverse_real(&self, mut coeffs: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut coeffs, &self.inverse);
        let scale = 1.0 / coeffs.len() as f64;
        coeffs.into_iter().map(|c| c.re * scale).collect()
    }

    /// Applies a real Fourier multiplier.
    pub(crate) fn multiply(&self, values: &[f64], multiplier: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut hat = self.forward(values);
        for (c, &s) in hat.iter_mut().zip(&self.symbol) {
            *c *= multiplier(s);
        }
        self.inverse_real(hat)
    }

    /// `-Δx` on raw grid values.
    pub(crate) fn neg_laplacian_raw(&self, values: &[f64]) -> Vec<f64> {
        self.multiply(values, |s| s)
    }

    /// `(-Δ + c)⁻¹ x` on raw grid values.
    pub(crate) fn helmholtz_raw(&self, c: f64, values: &[f64]) -> Vec<f64> {
        self.multiply(values, |s| 1.0 / (s + c))
    }

    pub fn laplacian(&self, u: &ScalarField) -> Result<ScalarField> {
        self.check(u)?;
        let v = self.multiply(u.values(), |s| -s);
        Ok(ScalarField::from_raw(&self.domain, v))
    }

    /// Spectral partial derivatives, one field per axis.
    pub fn gradient(&self, u: &ScalarField) -> Result<Vec<ScalarField>> {
        self.check(u)?;
        let hat = self.forward(u.values());
        let sizes = self.domain.sizes();
        let d = self.domain.dim();
        let mut out = Vec::with_capacity(d);
        for axis in 0..d {
            let stride: usize = sizes[axis + 1..].iter().product();
            let n = sizes[axis];
            let k = &self.derivative[axis];
            let mut h = hat.clone();
            for (idx, c) in h.iter_mut().enumerate() {
                let xi = k[(idx / stride) % n];
                *c *= Complex64::new(0.0, xi);
            }
            out.push(ScalarField::from_raw(&self.domain, self.inverse_real(h)));
        }
        Ok(out)
    }

    /// Pointwise `|∇u|²`.
    pub fn grad_norm_sq(&self, u: &ScalarField) -> Result<ScalarField> {
        let parts = self.gradient(u)?;
        let mut acc = vec![0.0; self.domain.len()];
        for p in &parts {
            for (a, v) in acc.iter_mut().zip(p.values()) {
                *a += v * v;
            }
        }
        Ok(ScalarField::from_raw(&self.domain, acc))
    }

    /// `∫|∇u|²` of the trigonometric interpolant, computed in Fourier space.
    /// Equals `-∫ u Δu` exactly.
    pub fn dirichlet_energy(&self, u: &ScalarField) -> Result<f64> {
        self.check(u)?;
        let hat = self.forward(u.values());
        let total = self.domain.len() as f64;
        let sum: f64 = hat
            .iter()
            .zip(&self.symbol)
            .map(|(c, s)| s * c.norm_sqr())
            .sum();
        Ok(self.domain.volume() * sum / (total * total))
    }

    /// The unique solution of `(-Δ + c) u = rhs`.
    pub fn helmholtz_solve(&self, c: f64, rhs: &ScalarField) -> Result<ScalarField> {
        self.check(rhs)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Helmholtz constant must be positive, got {c}"
            )));
        }
        Ok(ScalarField::from_raw(
            &self.domain,
            self.helmholtz_raw(c, rhs.values()),
        ))
    }
}
