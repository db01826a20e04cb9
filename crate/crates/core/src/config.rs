//! Solver configuration and results.

use crate::error::{Error, Result};
use crate::plan::TransportPlan;
use crate::scalar::Scalar;

/// Parameters of the mirror-descent solvers.
///
/// Defaults follow the reference experiment setup: `tau = epsilon`, ten outer
/// iterations with no objective-based early stop, inner Sinkhorn run to a
/// marginal violation of 1e-9 (capped at 10000 sweeps), log-domain on.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    /// Entropic regularization of the GW objective, `epsilon > 0`.
    pub epsilon: T,
    /// Mirror-descent penalty coefficient, `tau > 0`. Equal to `epsilon` by
    /// default; when they differ the inner cost picks up the extra
    /// `(epsilon - tau) * ln(gamma)` term.
    pub tau: T,
    /// Fused GW trade-off in [0, 1]: 0 is pure feature cost, 1 is pure GW.
    pub theta: T,
    /// Mirror-descent steps to run.
    pub outer_iterations: usize,
    /// Sweep cap for the final inner solve, which always runs to
    /// `sinkhorn_tolerance` so the returned plan is feasible.
    pub sinkhorn_max_iterations: usize,
    /// Sweep budget for the inner solves of the non-final iterations.
    /// Intermediate plans only steer the linearization, so a small budget
    /// (the default is 10, with Sinkhorn stopping earlier at tolerance)
    /// keeps each mirror step as cheap as a bounded number of matrix
    /// passes. `None` runs every inner solve to tolerance.
    pub sinkhorn_sweep_budget: Option<usize>,
    /// Inner convergence threshold on the worst marginal violation.
    pub sinkhorn_tolerance: T,
    /// Log-domain (stabilized) Sinkhorn. The plain scaling form overflows at
    /// small epsilon and is kept only for comparison.
    pub log_domain: bool,
    /// Optional outer stop: halt when the objective changes by less than
    /// this between iterations. Disabled by default.
    pub objective_change_tolerance: Option<T>,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(epsilon: T) -> Self {
        Self {
            epsilon,
            tau: epsilon,
            theta: T::from_config(0.5),
            outer_iterations: 10,
            sinkhorn_max_iterations: 10_000,
            sinkhorn_sweep_budget: Some(10),
            sinkhorn_tolerance: T::from_config(1e-9),
            log_domain: true,
            objective_change_tolerance: None,
        }
    }

    pub fn with_tau(mut self, tau: T) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_theta(mut self, theta: T) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_outer_iterations(mut self, iterations: usize) -> Self {
        self.outer_iterations = iterations;
        self
    }

    pub fn with_sinkhorn_limits(mut self, max_iterations: usize, tolerance: T) -> Self {
        self.sinkhorn_max_iterations = max_iterations;
        self.sinkhorn_tolerance = tolerance;
        self
    }

    pub fn with_sinkhorn_sweep_budget(mut self, budget: Option<usize>) -> Self {
        self.sinkhorn_sweep_budget = budget;
        self
    }

    pub fn with_log_domain(mut self, log_domain: bool) -> Self {
        self.log_domain = log_domain;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) || !self.epsilon.is_finite() {
            return Err(Error::ConfigInvalid {
                reason: format!("epsilon must be positive and finite, got {}", self.epsilon),
            });
        }
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(Error::ConfigInvalid {
                reason: format!("tau must be positive and finite, got {}", self.tau),
            });
        }
        if !(self.theta >= T::zero() && self.theta <= T::one()) {
            return Err(Error::ThetaOutOfRange {
                value: self.theta.to_f64().unwrap_or(f64::NAN),
            });
        }
        if self.outer_iterations == 0 {
            return Err(Error::ConfigInvalid {
                reason: "outer_iterations must be at least 1".into(),
            });
        }
        if self.sinkhorn_max_iterations == 0 {
            return Err(Error::ConfigInvalid {
                reason: "sinkhorn_max_iterations must be at least 1".into(),
            });
        }
        if self.sinkhorn_sweep_budget == Some(0) {
            return Err(Error::ConfigInvalid {
                reason: "sinkhorn_sweep_budget must be at least 1 when set".into(),
            });
        }
        if !(self.sinkhorn_tolerance > T::zero()) {
            return Err(Error::ConfigInvalid {
                reason: format!(
                    "sinkhorn_tolerance must be positive, got {}",
                    self.sinkhorn_tolerance
                ),
            });
        }
        if let Some(tol) = self.objective_change_tolerance {
            if !(tol > T::zero()) {
                return Err(Error::ConfigInvalid {
                    reason: format!("objective_change_tolerance must be positive, got {tol}"),
                });
            }
        }
        Ok(())
    }
}

/// Outcome of a solver run.
#[derive(Debug, Clone)]
pub struct SolveResult<T> {
    pub plan: TransportPlan<T>,
    /// Unregularized objective: `E(plan)` for GW, the fused objective for FGW.
    pub gw_objective: T,
    /// `gw_objective + epsilon * H(plan)`.
    pub entropic_objective: T,
    /// Outer iterations actually performed.
    pub iterations_used: usize,
    /// Worst marginal violation of the returned plan.
    pub marginal_violation: T,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_tau_equals_epsilon() {
        let cfg = SolverConfig::new(0.002);
        assert_eq!(cfg.tau, 0.002);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn validation_rejects_bad_fields() {
        assert!(SolverConfig::new(0.0).validate().is_err());
        assert!(SolverConfig::new(0.1).with_theta(1.5).validate().is_err());
        assert!(SolverConfig::new(0.1).with_theta(-0.1).validate().is_err());
        assert!(SolverConfig::new(0.1)
            .with_outer_iterations(0)
            .validate()
            .is_err());
        assert!(SolverConfig::new(0.1)
            .with_sinkhorn_limits(100, 0.0)
            .validate()
            .is_err());
        assert!(SolverConfig::new(f64::NAN).validate().is_err());
    }
}
