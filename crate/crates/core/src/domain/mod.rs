//! Flat periodic grids, grid functions, region masks and cutoffs.
//!
//! A [`TorusDomain`] is the product of `d` circles `[0, L_i)` sampled at `N_i`
//! equispaced points. Grid values are stored row-major: the last axis varies
//! fastest. Integration is the uniform (trapezoidal) rule, which is
//! spectrally accurate for smooth periodic integrands.

mod cutoff;
mod field;
pub mod io;
mod mask;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cutoff::{make_cutoff, CutoffProfile, CutoffSpec};
pub use field::ScalarField;
pub use mask::{ball_mask, sublevel_mask, superlevel_mask, RegionMask};

/// Smallest admissible number of points per axis.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusDomain {
    sizes: Vec<usize>,
    lengths: Vec<f64>,
}

impl TorusDomain {
    /// Builds a flat torus of grid dimension `d` (2 or 4).
    ///
    /// Sizes must be even and at least [`MIN_POINTS`]; odd sizes have no
    /// Nyquist mode and tiny ones alias everything the spectral operators see.
    pub fn new(d: usize, sizes: &[usize], lengths: &[f64]) -> Result<Arc<Self>> {
        if d != 2 && d != 4 {
            return Err(Error::InvalidDomain(format!(
                "grid dimension must be 2 or 4, got {d}"
            )));
        }
        if sizes.len() != d || lengths.len() != d {
            return Err(Error::InvalidDomain(format!(
                "expected {d} sizes and lengths, got {} and {}",
                sizes.len(),
                lengths.len()
            )));
        }
        for (axis, &n) in sizes.iter().enumerate() {
            if n < MIN_POINTS || n % 2 != 0 {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: size {n} must be even and >= {MIN_POINTS}"
                )));
            }
        }
        for (axis, &l) in lengths.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: period {l} must be positive"
                )));
            }
        }
        Ok(Arc::new(TorusDomain {
            sizes: sizes.to_vec(),
            lengths: lengths.to_vec(),
        }))
    }

    /// Unit-period square torus with `n` points per axis.
    pub fn unit(d: usize, n: usize) -> Result<Arc<Self>> {
        TorusDomain::new(d, &vec![n; d], &vec![1.0; d])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Quadrature weight carried by every grid point.
    pub fn cell_volume(&self) -> f64 {
        self.sizes
            .iter()
            .zip(&self.lengths)
            .map(|(&n, &l)| l / n as f64)
            .product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.sizes[axis] as f64
    }

    pub fn shortest_period(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Writes the coordinates of the point with flat index `index` into `x`.
    pub fn point_into(&self, mut index: usize, x: &mut [f64]) {
        for axis in (0..self.dim()).rev() {
            let n = self.sizes[axis];
            x[axis] = (index % n) as f64 * self.spacing(axis);
            index /= n;
        }
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.point_into(index, &mut x);
        x
    }

    /// Flat index of a multi-index.
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Periodic distance using the minimal image on every axis.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.lengths)
            .map(|((&p, &q), &l)| {
                let mut t = (p - q).rem_euclid(l);
                if t > 0.5 * l {
                    t = l - t;
                }
                t * t
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Uniform-rule integral of a grid function over the torus.
pub fn integrate(f: &ScalarField) -> f64 {
    f.domain().cell_volume() * f.values().iter().sum::<f64>()
}
