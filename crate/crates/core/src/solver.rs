//! Mirror-descent outer loops for entropic GW and FGW.
//!
//! Each iteration linearizes the quadratic objective at the current plan and
//! solves the resulting entropic OT problem with Sinkhorn:
//!
//! ```text
//! plan <- argmin <grad(plan_prev) + (eps - tau) ln(plan_prev), .> + tau H(.)
//! ```
//!
//! over the coupling polytope, starting from the independent coupling
//! `u v^T`. With the suggested `tau = eps` the extra entropy-gradient term
//! vanishes. Sinkhorn is warm-started from the previous iteration's dual
//! potentials, which leaves the fixed point untouched but cuts the sweep
//! count of later iterations. The gradient step runs through the fast
//! kernels by default; [`GradientMode::Naive`] swaps in the cubic dense
//! baseline so both paths can be compared on identical problems.

use std::time::Instant;

use ndarray::Array2;

use crate::config::{SolveResult, SolverConfig};
use crate::cost::FeatureCost;
use crate::error::Result;
use crate::gradient::GradientWorkspace;
pub use crate::gradient::GradientMode;
use crate::measure::DiscreteMeasure;
use crate::plan::{entropy_of, TransportPlan};
use crate::scalar::Scalar;
use crate::sinkhorn::SinkhornState;

/// Entries below this are floored before the `ln` in the entropy-gradient
/// term of the `tau != eps` path.
const LN_FLOOR: f64 = 1e-300;

/// Per-iteration bookkeeping of a solver run.
#[derive(Debug, Clone)]
pub struct IterationRecord<T> {
    /// Unregularized objective of the plan this iteration produced.
    pub objective: T,
    /// `objective + epsilon * H(plan)`.
    pub entropic_objective: T,
    /// Worst marginal violation of that plan.
    pub marginal_violation: T,
    /// Wall time of the gradient step (triple product and cost assembly).
    pub gradient_seconds: f64,
    /// Wall time of the inner Sinkhorn solve.
    pub sinkhorn_seconds: f64,
    /// Sweeps the inner solve used.
    pub sinkhorn_sweeps: usize,
}

/// Full trace of a solver run.
#[derive(Debug, Clone)]
pub struct MirrorDescentTrace<T> {
    /// Workspace construction time (constant term; dense matrices in naive
    /// mode), reported separately from the iterations.
    pub setup_seconds: f64,
    /// Objective of the initial coupling `u v^T`.
    pub initial_objective: T,
    pub records: Vec<IterationRecord<T>>,
    /// Sweeps the final polish (running the last inner solve to tolerance
    /// past any sweep budget) used; included in the last record's totals.
    pub polish_sweeps: usize,
}

/// Entropic GW: minimize the pairwise distance distortion plus `eps H`.
pub fn entropic_gw<T: Scalar>(
    u: &DiscreteMeasure<T>,
    v: &DiscreteMeasure<T>,
    config: &SolverConfig<T>,
    mode: GradientMode,
) -> Result<(SolveResult<T>, MirrorDescentTrace<T>)> {
    config.validate()?;
    let setup_start = Instant::now();
    let mut ws = GradientWorkspace::gw(u, v)?;
    if mode == GradientMode::Naive {
        ws.materialize_dense(false)?;
    }
    run_mirror_descent(u, v, ws, config, mode, setup_start)
}

/// Entropic FGW with the trade-off `config.theta`: at 1 this reproduces
/// [`entropic_gw`] bit for bit, at 0 it reduces to plain entropic OT on the
/// squared feature costs.
pub fn entropic_fgw<T: Scalar>(
    u: &DiscreteMeasure<T>,
    v: &DiscreteMeasure<T>,
    costs: &FeatureCost<T>,
    config: &SolverConfig<T>,
    mode: GradientMode,
) -> Result<(SolveResult<T>, MirrorDescentTrace<T>)> {
    config.validate()?;
    let setup_start = Instant::now();
    let mut ws = GradientWorkspace::fgw(u, v, costs, config.theta)?;
    if mode == GradientMode::Naive {
        ws.materialize_dense(false)?;
    }
    run_mirror_descent(u, v, ws, config, mode, setup_start)
}

fn run_mirror_descent<T: Scalar>(
    u: &DiscreteMeasure<T>,
    v: &DiscreteMeasure<T>,
    ws: GradientWorkspace<T>,
    config: &SolverConfig<T>,
    mode: GradientMode,
    setup_start: Instant,
) -> Result<(SolveResult<T>, MirrorDescentTrace<T>)> {
    let m = u.len();
    let n = v.len();
    let uw = u.weights();
    let vw = v.weights();

    // initial plan: the independent coupling
    let mut plan = Array2::from_shape_fn((m, n), |(i, p)| uw[i] * vw[p]);
    let setup_seconds = setup_start.elapsed().as_secs_f64();

    let entropy_shift = config.epsilon != config.tau;
    let ln_floor = T::from_config(LN_FLOOR);
    let budget = config
        .sinkhorn_sweep_budget
        .unwrap_or(config.sinkhorn_max_iterations)
        .min(config.sinkhorn_max_iterations);
    let mut state: Option<SinkhornState<T>> = None;
    let mut records: Vec<IterationRecord<T>> = Vec::with_capacity(config.outer_iterations);
    let mut initial_objective = T::zero();
    let mut prev_objective: Option<T> = None;

    for iteration in 0..config.outer_iterations {
        let grad_start = Instant::now();
        let mut cost = ws.gradient(&plan, mode)?;

        // the gradient at the incoming plan prices that plan's objective for
        // free; it belongs to the previous record (or the initial coupling)
        let objective = ws.objective_from_gradient(&cost, &plan);
        let entropic_objective = objective + config.epsilon * entropy_of(&plan)?;
        match records.last_mut() {
            Some(rec) => {
                rec.objective = objective;
                rec.entropic_objective = entropic_objective;
            }
            None => initial_objective = objective,
        }

        if let (Some(tol), Some(prev)) = (config.objective_change_tolerance, prev_objective) {
            if (prev - objective).abs() <= tol {
                break;
            }
        }
        prev_objective = Some(objective);

        if entropy_shift {
            let shift = config.epsilon - config.tau;
            ndarray::Zip::from(&mut cost).and(&plan).for_each(|c, g| {
                *c = *c + shift * g.max(ln_floor).ln();
            });
        }
        let gradient_seconds = grad_start.elapsed().as_secs_f64();

        let sinkhorn_start = Instant::now();
        let run = match state.as_mut() {
            None => {
                let mut s =
                    SinkhornState::new(&cost, config.tau, uw.to_owned(), vw.to_owned())?;
                let run = s.solve(budget, config.sinkhorn_tolerance, config.log_domain)?;
                state = Some(s);
                run
            }
            Some(s) => {
                s.set_cost(&cost)?;
                s.solve(budget, config.sinkhorn_tolerance, config.log_domain)?
            }
        };
        plan = state.as_ref().expect("state set above").plan_values();
        let sinkhorn_seconds = sinkhorn_start.elapsed().as_secs_f64();

        records.push(IterationRecord {
            objective: T::nan(), // filled by the next gradient evaluation
            entropic_objective: T::nan(),
            marginal_violation: run.violation,
            gradient_seconds,
            sinkhorn_seconds,
            sinkhorn_sweeps: run.sweeps,
        });
        let _ = iteration;
    }

    // polish: finish the last inner solve to tolerance so the returned plan
    // is feasible even under a sweep budget (a no-op when already there)
    let mut polish_sweeps = 0;
    if let Some(s) = state.as_mut() {
        let polish_start = Instant::now();
        let run = s.solve(
            config.sinkhorn_max_iterations,
            config.sinkhorn_tolerance,
            config.log_domain,
        )?;
        if run.sweeps > 0 {
            plan = s.plan_values();
        }
        polish_sweeps = run.sweeps;
        if let Some(rec) = records.last_mut() {
            rec.sinkhorn_seconds += polish_start.elapsed().as_secs_f64();
            rec.sinkhorn_sweeps += run.sweeps;
            rec.marginal_violation = run.violation;
        }
    }

    // one final gradient evaluation prices the returned plan
    let final_grad = ws.gradient(&plan, mode)?;
    let gw_objective = ws.objective_from_gradient(&final_grad, &plan);
    let entropic_objective = gw_objective + config.epsilon * entropy_of(&plan)?;
    if let Some(rec) = records.last_mut() {
        rec.objective = gw_objective;
        rec.entropic_objective = entropic_objective;
    } else {
        initial_objective = gw_objective;
    }

    let iterations_used = records.len();
    let plan = TransportPlan::new(plan, uw.to_owned(), vw.to_owned())?;
    let marginal_violation = plan.marginal_violation();
    Ok((
        SolveResult {
            plan,
            gw_objective,
            entropic_objective,
            iterations_used,
            marginal_violation,
        },
        MirrorDescentTrace {
            setup_seconds,
            initial_objective,
            records,
            polish_sweeps,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::UniformGrid1D;
    use crate::sinkhorn::sinkhorn;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_measure(n: usize, seed: u64) -> DiscreteMeasure<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w: Vec<f64> = (0..n).map(|_| rng.random::<f64>().max(1e-12)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let h = if n > 1 { 1.0 / (n as f64 - 1.0) } else { 1.0 };
        DiscreteMeasure::new(w, UniformGrid1D::new(n, h, 1).unwrap()).unwrap()
    }

    fn index_costs(m: usize, n: usize) -> FeatureCost<f64> {
        FeatureCost::new(Array2::from_shape_fn((m, n), |(i, p)| {
            ((i as f64) - (p as f64)).abs()
        }))
        .unwrap()
    }

    #[test]
    fn single_point_problem() {
        let g = UniformGrid1D::new(1, 1.0, 1).unwrap();
        let u = DiscreteMeasure::new(vec![1.0], g).unwrap();
        let cfg = SolverConfig::new(0.1);
        let (res, _) = entropic_gw(&u, &u, &cfg, GradientMode::Fast).unwrap();
        assert_eq!(res.plan.values()[(0, 0)], 1.0);
        assert_eq!(res.gw_objective, 0.0);
    }

    #[test]
    fn objective_descends_over_the_schedule() {
        let u = random_measure(40, 1);
        let v = random_measure(40, 2);
        let cfg = SolverConfig::new(0.01);
        let (res, trace) = entropic_gw(&u, &v, &cfg, GradientMode::Fast).unwrap();
        assert!(res.gw_objective <= trace.initial_objective);
        assert!(res.gw_objective >= 0.0);
        assert!(res.marginal_violation <= cfg.sinkhorn_tolerance);
        assert_eq!(trace.records.len(), 10);
        assert!(trace.records.iter().all(|r| r.objective.is_finite()));
    }

    #[test]
    fn plans_are_strictly_positive() {
        let u = random_measure(15, 3);
        let v = random_measure(15, 4);
        let cfg = SolverConfig::new(0.05);
        let (res, _) = entropic_gw(&u, &v, &cfg, GradientMode::Fast).unwrap();
        assert!(res.plan.values().iter().all(|g| *g > 0.0));
    }

    #[test]
    fn deterministic_across_runs() {
        let u = random_measure(20, 5);
        let v = random_measure(20, 6);
        let cfg = SolverConfig::new(0.02);
        let (a, _) = entropic_gw(&u, &v, &cfg, GradientMode::Fast).unwrap();
        let (b, _) = entropic_gw(&u, &v, &cfg, GradientMode::Fast).unwrap();
        for (x, y) in a.plan.values().iter().zip(b.plan.values().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn fast_and_naive_agree() {
        let u = random_measure(30, 7);
        let v = random_measure(30, 8);
        let cfg = SolverConfig::new(0.01);
        let (fast, _) = entropic_gw(&u, &v, &cfg, GradientMode::Fast).unwrap();
        let (naive, _) = entropic_gw(&u, &v, &cfg, GradientMode::Naive).unwrap();
        assert!(fast.plan.frobenius_distance(&naive.plan) <= 1e-12);
    }

    #[test]
    fn fgw_at_theta_one_matches_gw_bitwise() {
        let u = random_measure(18, 9);
        let v = random_measure(18, 10);
        let costs = index_costs(18, 18);
        let cfg = SolverConfig::new(0.02).with_theta(1.0);
        let (gw, gw_trace) = entropic_gw(&u, &v, &cfg, GradientMode::Fast).unwrap();
        let (fgw, fgw_trace) = entropic_fgw(&u, &v, &costs, &cfg, GradientMode::Fast).unwrap();
        for (a, b) in gw.plan.values().iter().zip(fgw.plan.values().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(gw.gw_objective, fgw.gw_objective);
        for (ra, rb) in gw_trace.records.iter().zip(fgw_trace.records.iter()) {
            assert_eq!(ra.objective, rb.objective);
            assert_eq!(ra.sinkhorn_sweeps, rb.sinkhorn_sweeps);
        }
    }

    #[test]
    fn fgw_at_theta_zero_is_plain_entropic_ot() {
        let u = random_measure(16, 11);
        let v = random_measure(16, 12);
        let costs = index_costs(16, 16);
        let cfg = SolverConfig::new(0.5).with_theta(0.0);
        let (fgw, _) = entropic_fgw(&u, &v, &costs, &cfg, GradientMode::Fast).unwrap();
        let (ot, _) = sinkhorn(
            &costs.squared(),
            &u,
            &v,
            cfg.epsilon,
            cfg.sinkhorn_max_iterations,
            cfg.sinkhorn_tolerance,
            true,
        )
        .unwrap();
        // plan-independent gradient: every iteration past the first is a
        // warm-started no-op, so ten iterations equal the standalone solve
        // bit for bit
        for (a, b) in fgw.plan.values().iter().zip(ot.values().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn reversal_equivariance_at_fixed_iteration_counts() {
        let u = random_measure(25, 13);
        let v = random_measure(25, 14);
        let cfg = SolverConfig::new(0.02).with_sinkhorn_limits(400, 1e-15);
        let (res, _) = entropic_gw(&u, &v, &cfg, GradientMode::Fast).unwrap();
        let (res_rev, _) = entropic_gw(&u.reversed(), &v, &cfg, GradientMode::Fast).unwrap();
        let m = 25;
        let flipped = Array2::from_shape_fn((m, m), |(i, p)| res.plan.values()[(m - 1 - i, p)]);
        let diff = crate::plan::frobenius_diff(res_rev.plan.values(), &flipped);
        assert!(diff <= 1e-10, "diff = {diff}");
    }

    #[test]
    fn tau_not_equal_epsilon_path_runs_and_descends() {
        let u = random_measure(20, 15);
        let v = random_measure(20, 16);
        let cfg = SolverConfig::new(0.02).with_tau(0.05);
        let (res, trace) = entropic_gw(&u, &v, &cfg, GradientMode::Fast).unwrap();
        assert!(res.marginal_violation <= cfg.sinkhorn_tolerance);
        assert!(res.gw_objective <= trace.initial_objective);
        // larger tau takes more cautious steps toward the same fixed point
        let cfg_eq = SolverConfig::new(0.02).with_outer_iterations(40);
        let cfg_ne = SolverConfig::new(0.02).with_tau(0.05).with_outer_iterations(40);
        let (a, _) = entropic_gw(&u, &v, &cfg_eq, GradientMode::Fast).unwrap();
        let (b, _) = entropic_gw(&u, &v, &cfg_ne, GradientMode::Fast).unwrap();
        assert!(
            (a.gw_objective - b.gw_objective).abs() <= 1e-6 * a.gw_objective.abs().max(1e-12),
            "objectives diverged: {} vs {}",
            a.gw_objective,
            b.gw_objective
        );
    }

    #[test]
    fn objective_change_stop_halts_early() {
        let u = random_measure(12, 17);
        let v = random_measure(12, 18);
        let mut cfg = SolverConfig::new(0.05).with_outer_iterations(50);
        cfg.objective_change_tolerance = Some(1e-10);
        let (res, trace) = entropic_gw(&u, &v, &cfg, GradientMode::Fast).unwrap();
        assert!(res.iterations_used < 50);
        assert_eq!(trace.records.len(), res.iterations_used);
    }

    #[test]
    fn entropic_objective_combines_objective_and_entropy() {
        let u = random_measure(10, 19);
        let cfg = SolverConfig::new(0.05);
        let (res, _) = entropic_gw(&u, &u, &cfg, GradientMode::Fast).unwrap();
        let h = crate::plan::entropy(&res.plan).unwrap();
        assert!((res.entropic_objective - (res.gw_objective + cfg.epsilon * h)).abs() < 1e-12);
    }
}
