//! Feature (linear-term) cost matrices for Fused GW.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense M x N matrix of nonnegative feature distances `c_ip` between source
/// point `i` and target point `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCost<T> {
    values: Array2<T>,
}

impl<T: Scalar> FeatureCost<T> {
    pub fn new(values: Array2<T>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(**v >= T::zero())) {
            return Err(Error::NegativeEntry {
                value: bad.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Entrywise square `C ⊙ C`, the linear-term cost the FGW objective uses.
    pub fn squared(&self) -> Array2<T> {
        self.values.mapv(|c| c * c)
    }

    pub(crate) fn check_dims(&self, m: usize, n: usize) -> Result<()> {
        if self.values.dim() != (m, n) {
            return Err(Error::DimensionMismatch {
                rows: m,
                cols: n,
                got_rows: self.values.dim().0,
                got_cols: self.values.dim().1,
            });
        }
        Ok(())
    }
}
