//! Probability measures on uniform grids.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

/// Weight sums farther than this from 1 are rejected outright.
pub const NORMALIZATION_BAND: f64 = 1e-9;

/// Weight sums closer than this to 1 are accepted without renormalization,
/// which keeps validation idempotent: a renormalized vector sums to 1 within
/// a few ulps and passes through unchanged on a second validation.
const EXACT_BAND: f64 = 1e-13;

/// Nonnegative weights on a grid, normalized to total mass 1.
///
/// Construction validates: weights must be nonnegative, match the grid point
/// count, and sum to 1 within [`NORMALIZATION_BAND`] (benign I/O rounding is
/// renormalized away; genuinely unnormalized data is rejected).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T> {
    weights: Array1<T>,
    grid: Grid<T>,
}

impl<T: Scalar> DiscreteMeasure<T> {
    pub fn new(weights: Vec<T>, grid: impl Into<Grid<T>>) -> Result<Self> {
        Self::from_array(Array1::from_vec(weights), grid.into())
    }

    pub fn from_array(weights: Array1<T>, grid: impl Into<Grid<T>>) -> Result<Self> {
        let grid = grid.into();
        let weights = validate_weights(weights, grid.points())?;
        Ok(Self { weights, grid })
    }

    pub fn weights(&self) -> &Array1<T> {
        &self.weights
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// True if every weight is strictly positive (Sinkhorn then returns a
    /// strictly positive plan).
    pub fn is_strictly_positive(&self) -> bool {
        self.weights.iter().all(|w| *w > T::zero())
    }

    /// Measure with the weight order reversed, on the same grid.
    pub fn reversed(&self) -> Self {
        let mut weights = self.weights.to_vec();
        weights.reverse();
        Self {
            weights: Array1::from_vec(weights),
            grid: self.grid,
        }
    }
}

/// Check the measure invariants and renormalize benign rounding noise.
///
/// Rejects negative weights, a length mismatch against the grid, and sums
/// deviating from 1 by more than [`NORMALIZATION_BAND`].
pub fn validate_measure<T: Scalar>(measure: DiscreteMeasure<T>) -> Result<DiscreteMeasure<T>> {
    DiscreteMeasure::from_array(measure.weights, measure.grid)
}

fn validate_weights<T: Scalar>(mut weights: Array1<T>, expected: usize) -> Result<Array1<T>> {
    if weights.len() != expected {
        return Err(Error::WrongLength {
            expected,
            got: weights.len(),
        });
    }
    for (index, w) in weights.iter().enumerate() {
        if !(*w >= T::zero()) {
            return Err(Error::NegativeWeight {
                index,
                value: w.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let sum: T = weights.iter().copied().sum();
    let deviation = (sum.to_f64().unwrap_or(f64::NAN) - 1.0).abs();
    if !(deviation <= NORMALIZATION_BAND) {
        return Err(Error::NotNormalized {
            sum: sum.to_f64().unwrap_or(f64::NAN),
        });
    }
    if deviation > EXACT_BAND {
        weights.mapv_inplace(|w| w / sum);
    }
    Ok(weights)
}
