use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{FieldKind, FieldSpec};
use crate::domain::io::read_field;
use crate::domain::{ScalarField, TorusDomain};
use crate::error::{Error, Result};

/// Samples the field described by `spec`, as `scale · base + offset`.
///
/// With `normalize_max` the result is shifted to have maximum exactly zero.
pub fn named_field(spec: &FieldSpec, domain: &Arc<TorusDomain>, normalize_max: bool) -> Result<ScalarField> {
    let ls = domain.lengths().to_vec();
    let theta = move |x: &[f64], i: usize| 2.0 * PI * x[i] / ls[i];
    let base = match spec.kind {
        FieldKind::Const => ScalarField::constant(domain, spec.value),
        FieldKind::Sin1 => ScalarField::from_fn(domain, |x| theta(x, 0).sin()),
        FieldKind::Cos1 => ScalarField::from_fn(domain, |x| theta(x, 0).cos()),
        FieldKind::Cos1Shifted => ScalarField::from_fn(domain, |x| theta(x, 0).cos() - 1.0),
        FieldKind::TwoMode => ScalarField::from_fn(domain, |x| theta(x, 0).cos() + 0.5 * (2.0 * theta(x, 1)).cos()),
        FieldKind::Random => random_field(domain, spec.seed, spec.decay, spec.modes)?,
        FieldKind::File => {
            let path = spec
                .file
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("file field without a path".into()))?;
            let (f, _) = read_field(&path.with_extension(""))?;
            if **f.domain() != **domain {
                return Err(Error::DomainMismatch);
            }
            ScalarField::new(domain, f.into_values())?
        }
    };
    let mut f = base.map(|v| spec.scale * v + spec.offset);
    if normalize_max {
        let m = f.max();
        f = f.shift(-m);
    }
    Ok(f)
}

/// Real random Fourier series with `|c_k| ∝ (1 + |k|²)^{-p}` over
/// `0 < |k|_∞ ≤ modes`, normalized to unit sup norm.
///
/// Coefficients are drawn in a fixed lattice order from a ChaCha8 stream,
/// so the field depends only on `(seed, p, modes, d)` and the grid.
pub fn random_field(domain: &Arc<TorusDomain>, seed: u64, p: f64, modes: usize) -> Result<ScalarField> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("spectral decay p must exceed 1, got {p}")));
    }
    let d = domain.dim();
    let m = modes as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = 2 * m + 1;
    let mut terms = Vec::new();
    for idx in 0..side.pow(d as u32) {
        let mut rem = idx;
        let k: Vec<i64> = (0..d)
            .map(|_| {
                let c = rem % side - m;
                rem /= side;
                c
            })
            .collect();
        // half lattice: first nonzero component positive
        if k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0) {
            let k2: i64 = k.iter().map(|c| c * c).sum();
            let amp = (1.0 + k2 as f64).powf(-p);
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            terms.push((k, amp * a, amp * b));
        }
    }
    let ls = domain.lengths().to_vec();
    let f = ScalarField::from_fn(domain, |x| {
        terms
            .iter()
            .map(|(k, a, b)| {
                let phase: f64 = k.iter().zip(x).zip(&ls).map(|((&ki, xi), l)| 2.0 * PI * ki as f64 * xi / l).sum();
                a * phase.cos() + b * phase.sin()
            })
            .sum()
    });
    let norm = f.sup_norm();
    if !(norm > 0.0) {
        return Err(Error::InvalidArgument("random field vanished".into()));
    }
    Ok(f.scale(1.0 / norm))
}
