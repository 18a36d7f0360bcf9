use std::sync::Arc;

use super::TorusDomain;
use crate::error::{Error, Result};

/// Real-valued grid function on a torus.
///
/// Values are finite on construction; operations that combine finite fields
/// with finite scalars keep them finite, and the places where that can fail
/// (exponentials) are guarded by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    domain: Arc<TorusDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: &Arc<TorusDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, domain has {} points",
                values.len(),
                domain.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at index {i}")));
        }
        Ok(ScalarField {
            domain: Arc::clone(domain),
            values,
        })
    }

    /// Construction without the finiteness scan, for results of operations on
    /// finite inputs.
    pub(crate) fn from_raw(domain: &Arc<TorusDomain>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        ScalarField {
            domain: Arc::clone(domain),
            values,
        }
    }

    pub fn constant(domain: &Arc<TorusDomain>, value: f64) -> Self {
        assert!(value.is_finite(), "constant field value must be finite");
        ScalarField::from_raw(domain, vec![value; domain.len()])
    }

    pub fn zeros(domain: &Arc<TorusDomain>) -> Self {
        ScalarField::constant(domain, 0.0)
    }

    /// Samples `f` at every grid point.
    ///
    /// Panics if `f` returns a non-finite value.
    pub fn from_fn(domain: &Arc<TorusDomain>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; domain.dim()];
        let values = (0..domain.len())
            .map(|i| {
                domain.point_into(i, &mut x);
                let v = f(&x);
                assert!(v.is_finite(), "non-finite sample at {x:?}");
                v
            })
            .collect();
        ScalarField::from_raw(domain, values)
    }

    pub fn domain(&self) -> &Arc<TorusDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_domain(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain
    }

    pub(crate) fn check_domain(&self, other: &ScalarField) -> Result<()> {
        if self.same_domain(other) {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        super::integrate(self) / self.domain.volume()
    }

    /// L² inner product with quadrature weights.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        debug_assert!(self.same_domain(other));
        self.domain.cell_volume()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&v| f(v)).collect();
        ScalarField::from_raw(&self.domain, values)
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(self.same_domain(other));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField::from_raw(&self.domain, values)
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &ScalarField, b: f64) -> Self {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    /// `self + step * delta` for a raw direction.
    pub(crate) fn zip_map_raw(&self, delta: &[f64], step: f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(delta)
            .map(|(a, d)| a + step * d)
            .collect();
        ScalarField::from_raw(&self.domain, values)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn shift(&self, s: f64) -> Self {
        self.map(|v| v + s)
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// Largest pointwise difference `max |self - other|`.
    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}
