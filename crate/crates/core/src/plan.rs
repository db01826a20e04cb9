//! Transport plans (couplings) and their entropy.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense M x N coupling with the marginals it is supposed to satisfy.
///
/// The marginal constraints are checked, not assumed: [`TransportPlan::marginal_violation`]
/// reports the actual worst deviation of the row/column sums from the targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T> {
    values: Array2<T>,
    row_marginal: Array1<T>,
    col_marginal: Array1<T>,
}

impl<T: Scalar> TransportPlan<T> {
    pub fn new(
        values: Array2<T>,
        row_marginal: Array1<T>,
        col_marginal: Array1<T>,
    ) -> Result<Self> {
        let (m, n) = values.dim();
        if row_marginal.len() != m || col_marginal.len() != n {
            return Err(Error::DimensionMismatch {
                rows: row_marginal.len(),
                cols: col_marginal.len(),
                got_rows: m,
                got_cols: n,
            });
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= T::zero())) {
            return Err(Error::NegativeEntry {
                value: bad.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            values,
            row_marginal,
            col_marginal,
        })
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn row_marginal(&self) -> &Array1<T> {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &Array1<T> {
        &self.col_marginal
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn total_mass(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// Worst deviation of the row and column sums from the target marginals
    /// in the max norm.
    pub fn marginal_violation(&self) -> T {
        let rows = self.values.sum_axis(Axis(1));
        let cols = self.values.sum_axis(Axis(0));
        let mut worst = T::zero();
        for (s, t) in rows.iter().zip(self.row_marginal.iter()) {
            worst = worst.max((*s - *t).abs());
        }
        for (s, t) in cols.iter().zip(self.col_marginal.iter()) {
            worst = worst.max((*s - *t).abs());
        }
        worst
    }

    /// Frobenius norm of the entrywise difference to another plan.
    pub fn frobenius_distance(&self, other: &Self) -> T {
        frobenius_diff(&self.values, &other.values)
    }
}

/// `||a - b||_F` for matrices of equal shape.
pub fn frobenius_diff<T: Scalar>(a: &Array2<T>, b: &Array2<T>) -> T {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (*x - *y) * (*x - *y))
        .sum::<T>()
        .sqrt()
}

/// Unnormalized entropy `H(plan) = sum_ip gamma_ip (ln gamma_ip - 1)`.
///
/// Zero entries contribute zero, by the convention `0 (ln 0 - 1) := 0`;
/// serialized plans may round interior entries down to exact zero.
pub fn entropy<T: Scalar>(plan: &TransportPlan<T>) -> Result<T> {
    entropy_of(plan.values())
}

/// Entropy of a raw nonnegative matrix, same convention as [`entropy`].
pub fn entropy_of<T: Scalar>(values: &Array2<T>) -> Result<T> {
    let mut h = T::zero();
    for v in values.iter() {
        if !(*v >= T::zero()) {
            return Err(Error::NegativeEntry {
                value: v.to_f64().unwrap_or(f64::NAN),
            });
        }
        if *v > T::zero() {
            h += *v * (v.ln() - T::one());
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn plan_of(values: Array2<f64>) -> TransportPlan<f64> {
        let rows = values.sum_axis(Axis(1));
        let cols = values.sum_axis(Axis(0));
        TransportPlan::new(values, rows, cols).unwrap()
    }

    #[test]
    fn entropy_of_unit_singleton() {
        let p = plan_of(array![[1.0]]);
        assert_eq!(entropy(&p).unwrap(), -1.0);
    }

    #[test]
    fn entropy_of_uniform_two_by_two() {
        let p = plan_of(array![[0.25, 0.25], [0.25, 0.25]]);
        let h = entropy(&p).unwrap();
        assert!((h - (0.25_f64.ln() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn zero_entries_contribute_nothing() {
        let p = plan_of(array![[0.5, 0.0], [0.0, 0.5]]);
        let h = entropy(&p).unwrap();
        assert!(h.is_finite());
        assert!((h - (0.5_f64.ln() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn negative_entry_is_rejected() {
        let err = entropy_of(&array![[0.5, -0.1]]).unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { .. }));
    }

    #[test]
    fn entropy_is_permutation_invariant() {
        let p = plan_of(array![[0.1, 0.2], [0.3, 0.4]]);
        let permuted = plan_of(array![[0.4, 0.1], [0.2, 0.3]]);
        let a = entropy(&p).unwrap();
        let b = entropy(&permuted).unwrap();
        assert!((a - b).abs() <= 1e-15 * a.abs());
    }

    #[test]
    fn marginal_violation_reports_worst_deviation() {
        let values: Array2<f64> = array![[0.25, 0.25], [0.25, 0.25]];
        let plan = TransportPlan::new(
            values,
            array![0.5, 0.5],
            array![0.6, 0.4], // deliberately off by 0.1
        )
        .unwrap();
        assert!((plan.marginal_violation() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn negative_plan_entry_is_rejected() {
        let err = TransportPlan::new(array![[-0.1]], array![0.0], array![0.0]).unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { .. }));
    }
}
