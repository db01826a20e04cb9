//! Entropic optimal transport by Sinkhorn iteration (Cuturi 2013), in the
//! log domain by default.
//!
//! The regularized problem `min <cost, plan> + eps H(plan)` over couplings
//! of `(u, v)` has the unique solution
//! `plan[i][p] = exp(log_u[i] - cost[i][p]/eps + log_v[p])`, with the dual
//! potentials fixed by alternating marginal projections. In the log domain
//! each projection is a log-sum-exp, so arbitrarily small `eps` never
//! underflows; the plain scaling form is kept behind a switch for
//! comparison and fails with [`Error::NumericalOverflow`] where it would
//! silently produce garbage.
//!
//! Convergence is checked before every sweep on the worst marginal
//! violation of the current plan. The check-first order makes a state whose
//! duals already satisfy the tolerance return unchanged, which the outer
//! mirror-descent loop relies on for warm starts.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::plan::TransportPlan;
use crate::scalar::Scalar;

/// Dual state of one entropic OT problem: the cost matrix, the
/// regularization strength, and the log-domain potentials.
///
/// The recovered plan is `exp(log_u[i] - cost[i][p]/epsilon + log_v[p])`
/// and is strictly positive wherever both marginals are.
#[derive(Debug, Clone)]
pub struct SinkhornState<T> {
    log_kernel: Array2<T>,
    epsilon: T,
    u: Array1<T>,
    v: Array1<T>,
    log_u: Array1<T>,
    log_v: Array1<T>,
}

/// Outcome of one [`SinkhornState::solve`] call.
#[derive(Debug, Clone, Copy)]
pub struct SinkhornRun<T> {
    /// Full sweeps (row update + column update) performed.
    pub sweeps: usize,
    /// Worst marginal violation of the final plan.
    pub violation: T,
    /// Whether the tolerance was met before the sweep cap.
    pub converged: bool,
}

fn ln_or_neg_inf<T: Scalar>(w: T) -> T {
    if w > T::zero() {
        w.ln()
    } else {
        T::neg_infinity()
    }
}

impl<T: Scalar> SinkhornState<T> {
    /// Fresh state with duals initialized from the marginals, so the initial
    /// implied plan at zero cost is exactly the independent coupling
    /// `u v^T`.
    pub fn new(cost: &Array2<T>, epsilon: T, u: Array1<T>, v: Array1<T>) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(Error::ConfigInvalid {
                reason: format!("epsilon must be positive and finite, got {epsilon}"),
            });
        }
        if cost.dim() != (u.len(), v.len()) {
            return Err(Error::DimensionMismatch {
                rows: u.len(),
                cols: v.len(),
                got_rows: cost.dim().0,
                got_cols: cost.dim().1,
            });
        }
        let log_u = u.mapv(ln_or_neg_inf);
        let log_v = v.mapv(ln_or_neg_inf);
        let mut state = Self {
            log_kernel: Array2::zeros(cost.dim()),
            epsilon,
            u,
            v,
            log_u,
            log_v,
        };
        state.set_cost(cost)?;
        Ok(state)
    }

    /// Replace the cost matrix, keeping the dual potentials as a warm start.
    pub fn set_cost(&mut self, cost: &Array2<T>) -> Result<()> {
        if cost.dim() != self.log_kernel.dim() {
            return Err(Error::DimensionMismatch {
                rows: self.log_kernel.dim().0,
                cols: self.log_kernel.dim().1,
                got_rows: cost.dim().0,
                got_cols: cost.dim().1,
            });
        }
        if cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCost);
        }
        let eps = self.epsilon;
        ndarray::Zip::from(&mut self.log_kernel)
            .and(cost)
            .for_each(|k, c| *k = -*c / eps);
        Ok(())
    }

    /// Current implied plan.
    pub fn plan_values(&self) -> Array2<T> {
        let (m, n) = self.log_kernel.dim();
        let ks = self.log_kernel.as_slice().expect("standard layout");
        let mut plan = Array2::zeros((m, n));
        let ps = plan.as_slice_mut().expect("standard layout");
        for i in 0..m {
            let fu = self.log_u[i];
            let krow = &ks[i * n..(i + 1) * n];
            let prow = &mut ps[i * n..(i + 1) * n];
            for p in 0..n {
                prow[p] = (fu + krow[p] + self.log_v[p]).exp();
            }
        }
        plan
    }

    /// Worst marginal violation of the current implied plan.
    pub fn violation(&self) -> T {
        let (m, n) = self.log_kernel.dim();
        let ks = self.log_kernel.as_slice().expect("standard layout");
        let mut worst = T::zero();
        let mut col_sums = vec![T::zero(); n];
        for i in 0..m {
            let fu = self.log_u[i];
            let krow = &ks[i * n..(i + 1) * n];
            let mut row_sum = T::zero();
            for p in 0..n {
                let gamma = (fu + krow[p] + self.log_v[p]).exp();
                row_sum += gamma;
                col_sums[p] += gamma;
            }
            worst = worst.max((row_sum - self.u[i]).abs());
        }
        for (s, t) in col_sums.iter().zip(self.v.iter()) {
            worst = worst.max((*s - *t).abs());
        }
        worst
    }

    /// Run sweeps until the violation is at or below `tol` or `max_iter`
    /// sweeps have been spent. Convergence is tested before each sweep, so a
    /// warm-started state that already satisfies `tol` returns unchanged.
    pub fn solve(&mut self, max_iter: usize, tol: T, log_domain: bool) -> Result<SinkhornRun<T>> {
        if log_domain {
            Ok(self.solve_log(max_iter, tol))
        } else {
            self.solve_plain(max_iter, tol)
        }
    }

    /// Log-domain loop. The row projection already prices the current
    /// plan's row sums, so the convergence test costs nothing extra; the
    /// full two-sided violation is verified once the row side passes.
    fn solve_log(&mut self, max_iter: usize, tol: T) -> SinkhornRun<T> {
        let mut sweeps = 0;
        let mut pending = vec![T::zero(); self.u.len()];
        loop {
            let row_violation = self.row_pass(&mut pending);
            if row_violation <= tol {
                let violation = self.violation();
                if violation <= tol {
                    return SinkhornRun {
                        sweeps,
                        violation,
                        converged: true,
                    };
                }
            }
            if sweeps >= max_iter {
                return SinkhornRun {
                    sweeps,
                    violation: self.violation(),
                    converged: false,
                };
            }
            self.log_u.as_slice_mut().unwrap().copy_from_slice(&pending);
            self.col_pass();
            sweeps += 1;
        }
    }

    /// Row projection: computes the new row potentials into `pending` and
    /// returns the worst row-sum violation of the plan before the update.
    fn row_pass(&self, pending: &mut [T]) -> T {
        let (m, n) = self.log_kernel.dim();
        let ks = self.log_kernel.as_slice().expect("standard layout");
        let mut worst = T::zero();
        for i in 0..m {
            if self.u[i] == T::zero() {
                pending[i] = T::neg_infinity();
                if self.log_u[i] == T::neg_infinity() {
                    continue;
                }
            }
            let krow = &ks[i * n..(i + 1) * n];
            let mut hi = T::neg_infinity();
            for p in 0..n {
                hi = hi.max(krow[p] + self.log_v[p]);
            }
            if hi == T::neg_infinity() {
                pending[i] = T::neg_infinity();
                worst = worst.max(self.u[i]);
                continue;
            }
            let mut sum = T::zero();
            for p in 0..n {
                sum += (krow[p] + self.log_v[p] - hi).exp();
            }
            let row_sum = (self.log_u[i] + hi).exp() * sum;
            worst = worst.max((row_sum - self.u[i]).abs());
            pending[i] = if self.u[i] == T::zero() {
                T::neg_infinity()
            } else {
                self.u[i].ln() - (hi + sum.ln())
            };
        }
        worst
    }

    /// Column projection in two row-major passes: per-column max, then sums.
    fn col_pass(&mut self) {
        let (m, n) = self.log_kernel.dim();
        let ks = self.log_kernel.as_slice().expect("standard layout");
        let mut hi = vec![T::neg_infinity(); n];
        for i in 0..m {
            let fu = self.log_u[i];
            if fu == T::neg_infinity() {
                continue;
            }
            let krow = &ks[i * n..(i + 1) * n];
            for p in 0..n {
                hi[p] = hi[p].max(krow[p] + fu);
            }
        }
        let mut sums = vec![T::zero(); n];
        for i in 0..m {
            let fu = self.log_u[i];
            if fu == T::neg_infinity() {
                continue;
            }
            let krow = &ks[i * n..(i + 1) * n];
            for p in 0..n {
                if hi[p] > T::neg_infinity() {
                    sums[p] += (krow[p] + fu - hi[p]).exp();
                }
            }
        }
        for p in 0..n {
            self.log_v[p] = if self.v[p] == T::zero() || hi[p] == T::neg_infinity() {
                T::neg_infinity()
            } else {
                self.v[p].ln() - (hi[p] + sums[p].ln())
            };
        }
    }

    fn solve_plain(&mut self, max_iter: usize, tol: T) -> Result<SinkhornRun<T>> {
        let mut sweeps = 0;
        loop {
            let violation = self.violation();
            if violation <= tol {
                return Ok(SinkhornRun {
                    sweeps,
                    violation,
                    converged: true,
                });
            }
            if sweeps >= max_iter {
                return Ok(SinkhornRun {
                    sweeps,
                    violation,
                    converged: false,
                });
            }
            self.sweep_plain()?;
            sweeps += 1;
        }
    }

    /// One plain-domain scaling sweep on `K = exp(-cost/eps)`. Fails rather
    /// than propagating overflow or a vanished denominator.
    fn sweep_plain(&mut self) -> Result<()> {
        let (m, n) = self.log_kernel.dim();
        let ks = self.log_kernel.as_slice().expect("standard layout");
        let mut a = self.log_u.mapv(|f| f.exp());
        let mut b = self.log_v.mapv(|g| g.exp());

        for i in 0..m {
            let krow = &ks[i * n..(i + 1) * n];
            let mut denom = T::zero();
            for p in 0..n {
                denom += krow[p].exp() * b[p];
            }
            if self.u[i] > T::zero() && !(denom > T::zero()) {
                return Err(Error::NumericalOverflow);
            }
            a[i] = if self.u[i] > T::zero() {
                self.u[i] / denom
            } else {
                T::zero()
            };
            if !a[i].is_finite() {
                return Err(Error::NumericalOverflow);
            }
        }

        let mut denoms = vec![T::zero(); n];
        for i in 0..m {
            let krow = &ks[i * n..(i + 1) * n];
            for p in 0..n {
                denoms[p] += krow[p].exp() * a[i];
            }
        }
        for p in 0..n {
            if self.v[p] > T::zero() && !(denoms[p] > T::zero()) {
                return Err(Error::NumericalOverflow);
            }
            b[p] = if self.v[p] > T::zero() {
                self.v[p] / denoms[p]
            } else {
                T::zero()
            };
            if !b[p].is_finite() {
                return Err(Error::NumericalOverflow);
            }
        }

        self.log_u = a.mapv(ln_or_neg_inf);
        self.log_v = b.mapv(ln_or_neg_inf);
        Ok(())
    }
}

/// Solve one entropic OT problem from a cold start and package the plan.
///
/// The plan satisfies the marginals of `(u, v)` up to `tol` on convergence;
/// hitting `max_iter` first is reported through the run info, not an error.
pub fn sinkhorn<T: Scalar>(
    cost: &Array2<T>,
    u: &DiscreteMeasure<T>,
    v: &DiscreteMeasure<T>,
    epsilon: T,
    max_iter: usize,
    tol: T,
    log_domain: bool,
) -> Result<(TransportPlan<T>, SinkhornRun<T>)> {
    let mut state = SinkhornState::new(
        cost,
        epsilon,
        u.weights().to_owned(),
        v.weights().to_owned(),
    )?;
    let run = state.solve(max_iter, tol, log_domain)?;
    let plan = TransportPlan::new(
        state.plan_values(),
        u.weights().to_owned(),
        v.weights().to_owned(),
    )?;
    Ok((plan, run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::UniformGrid1D;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn measure(mut weights: Vec<f64>) -> DiscreteMeasure<f64> {
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let g = UniformGrid1D::new(weights.len(), 1.0, 1).unwrap();
        DiscreteMeasure::new(weights, g).unwrap()
    }

    #[test]
    fn zero_cost_uniform_gives_uniform_plan() {
        let u = measure(vec![0.25; 4]);
        let cost = Array2::<f64>::zeros((4, 4));
        let (plan, run) = sinkhorn(&cost, &u, &u, 1.0, 100, 1e-9, true).unwrap();
        assert!(run.converged);
        for v in plan.values().iter() {
            assert!((v - 1.0 / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_cost_general_gives_independent_coupling() {
        let u = measure(vec![0.1, 0.2, 0.3, 0.4]);
        let v = measure(vec![0.7, 0.1, 0.2]);
        let cost = Array2::<f64>::zeros((4, 3));
        let (plan, run) = sinkhorn(&cost, &u, &v, 0.5, 100, 1e-10, true).unwrap();
        assert!(run.converged && run.sweeps == 0);
        for ((i, p), g) in plan.values().indexed_iter() {
            assert!((g - u.weights()[i] * v.weights()[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn two_by_two_closed_form_gibbs() {
        let u = measure(vec![0.5, 0.5]);
        let cost = array![[0.0, 1.0], [1.0, 0.0]];
        let (plan, run) = sinkhorn(&cost, &u, &u, 1.0, 10_000, 1e-12, true).unwrap();
        assert!(run.converged);
        let sigma = 1.0 / (1.0 + (-1.0f64).exp());
        let z = sigma / 2.0;
        let w = (1.0 - sigma) / 2.0;
        let got = plan.values();
        assert!((got[(0, 0)] - z).abs() < 1e-10, "{}", got[(0, 0)]);
        assert!((got[(0, 1)] - w).abs() < 1e-10);
        assert!((got[(1, 0)] - w).abs() < 1e-10);
        assert!((got[(1, 1)] - z).abs() < 1e-10);
    }

    #[test]
    fn marginals_hold_on_random_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let u = measure((0..20).map(|_| 0.1 + rng.random::<f64>()).collect())
            ;
        let v = measure((0..30).map(|_| 0.1 + rng.random::<f64>()).collect());
        let cost = Array2::from_shape_fn((20, 30), |_| rng.random::<f64>());
        let (plan, run) = sinkhorn(&cost, &u, &v, 0.05, 10_000, 1e-9, true).unwrap();
        assert!(run.converged);
        assert!(plan.marginal_violation() <= 1e-9);
        assert!(plan.values().iter().all(|g| *g > 0.0));
    }

    #[test]
    fn plain_and_log_domains_agree_at_moderate_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let u = measure((0..10).map(|_| 0.1 + rng.random::<f64>()).collect());
        let v = measure((0..10).map(|_| 0.1 + rng.random::<f64>()).collect());
        let cost = Array2::from_shape_fn((10, 10), |_| rng.random::<f64>());
        let (p_log, _) = sinkhorn(&cost, &u, &v, 0.5, 10_000, 1e-12, true).unwrap();
        let (p_plain, _) = sinkhorn(&cost, &u, &v, 0.5, 10_000, 1e-12, false).unwrap();
        assert!(p_log.frobenius_distance(&p_plain) <= 1e-10);
    }

    #[test]
    fn plain_domain_overflows_at_tiny_epsilon() {
        // every cost is >= 1, so exp(-cost/eps) underflows to an all-zero
        // kernel row in the plain domain
        let u = measure(vec![0.5, 0.5]);
        let cost = array![[1.0, 2.0], [2.0, 1.0]];
        let err = sinkhorn(&cost, &u, &u, 1e-4, 100, 1e-9, false).unwrap_err();
        assert!(matches!(err, Error::NumericalOverflow));
        // and the log domain shrugs it off
        let (plan, _) = sinkhorn(&cost, &u, &u, 1e-4, 1000, 1e-9, true).unwrap();
        assert!(plan.marginal_violation() <= 1e-9);
    }

    #[test]
    fn non_finite_cost_is_rejected() {
        let u = measure(vec![0.5, 0.5]);
        let cost = array![[0.0, f64::INFINITY], [1.0, 0.0]];
        assert!(matches!(
            sinkhorn(&cost, &u, &u, 1.0, 10, 1e-9, true),
            Err(Error::NonFiniteCost)
        ));
    }

    #[test]
    fn warm_started_state_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let u = measure((0..8).map(|_| 0.1 + rng.random::<f64>()).collect());
        let cost = Array2::from_shape_fn((8, 8), |_| rng.random::<f64>());
        let mut state = SinkhornState::new(
            &cost,
            0.1,
            u.weights().to_owned(),
            u.weights().to_owned(),
        )
        .unwrap();
        let first = state.solve(10_000, 1e-9, true).unwrap();
        assert!(first.converged);
        let plan_a = state.plan_values();
        let second = state.solve(10_000, 1e-9, true).unwrap();
        assert_eq!(second.sweeps, 0);
        let plan_b = state.plan_values();
        for (a, b) in plan_a.iter().zip(plan_b.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn sweep_cap_is_reported_not_fatal() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let u = measure((0..12).map(|_| 0.1 + rng.random::<f64>()).collect());
        let cost = Array2::from_shape_fn((12, 12), |_| rng.random::<f64>());
        let (_, run) = sinkhorn(&cost, &u, &u, 0.01, 2, 1e-14, true).unwrap();
        assert!(!run.converged);
        assert_eq!(run.sweeps, 2);
    }

    #[test]
    fn zero_mass_points_yield_zero_rows() {
        let g = UniformGrid1D::new(3, 1.0, 1).unwrap();
        let u = DiscreteMeasure::new(vec![0.5, 0.0, 0.5], g).unwrap();
        let v = DiscreteMeasure::new(vec![0.25, 0.5, 0.25], g).unwrap();
        let cost = Array2::from_shape_fn((3, 3), |(i, p)| ((i as f64) - (p as f64)).abs());
        let (plan, run) = sinkhorn(&cost, &u, &v, 0.2, 10_000, 1e-10, true).unwrap();
        assert!(run.converged);
        for p in 0..3 {
            assert_eq!(plan.values()[(1, p)], 0.0);
        }
        assert!(plan.marginal_violation() <= 1e-10);
    }
}
