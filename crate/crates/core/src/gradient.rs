//! GW and FGW gradients and objectives.
//!
//! The gradient of the quadratic distortion `E` over the coupling polytope
//! decomposes into a constant term plus a term linear in the plan
//! (Peyre, Cuturi, Solomon 2016):
//!
//! ```text
//! grad E   = C1 - 4 D_X plan D_Y,      C1[i][p] = 2 (a_i + b_p),
//! a = (D_X ⊙ D_X) u,  b = (D_Y ⊙ D_Y) v,
//! ```
//!
//! and for Fused GW with trade-off theta and feature costs C:
//!
//! ```text
//! grad E_f = C2 - 4 theta D_X plan D_Y,
//! C2 = (1-theta) C ⊙ C + theta C1.
//! ```
//!
//! The constant term is assembled once per problem from two fast
//! `power = 2k` multiplies (no `D ⊙ D` is ever materialized) and reused
//! across all mirror-descent iterations. Objectives are evaluated from the
//! gradient through the homogeneity identity `E = <grad E, plan> / 2`, which
//! holds whenever the plan's marginals are the measures the constant term
//! was built from.

use ndarray::{Array2, ArrayView2};

use crate::cost::FeatureCost;
use crate::dense::naive_triple_product;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::measure::DiscreteMeasure;
use crate::multiply::{apply_distance, triple_product};
use crate::scalar::Scalar;

/// Which path computes the `D_X plan D_Y` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// The recursion kernels; O(N^2) per gradient.
    Fast,
    /// Materialized distance matrices and dense products; O(N^3) per
    /// gradient. The benchmark baseline.
    Naive,
}

/// Per-problem state for gradient assembly: the constant term, the scale of
/// the linear term, and (for FGW) the cached squared feature costs.
#[derive(Debug, Clone)]
pub struct GradientWorkspace<T> {
    constant_term: Array2<T>,
    theta_scale: T,
    theta: T,
    cost_sq: Option<Array2<T>>,
    gx: Grid<T>,
    gy: Grid<T>,
    /// Dense distance matrices, materialized lazily for naive mode.
    dense: Option<(Array2<T>, Array2<T>)>,
}

/// `C1[i][p] = 2 (a_i + b_p)` with `a = (D_X ⊙ D_X) u`, `b = (D_Y ⊙ D_Y) v`,
/// both computed by the fast kernels at doubled power.
pub fn constant_term_gw<T: Scalar>(
    u: &DiscreteMeasure<T>,
    v: &DiscreteMeasure<T>,
) -> Result<Array2<T>> {
    let a = squared_distance_load(u)?;
    let b = squared_distance_load(v)?;
    let two = T::from_config(2.0);
    Ok(Array2::from_shape_fn((a.len(), b.len()), |(i, p)| {
        two * (a[i] + b[p])
    }))
}

/// `(D ⊙ D) w` for a measure, via the doubled-power multiply.
fn squared_distance_load<T: Scalar>(m: &DiscreteMeasure<T>) -> Result<Vec<T>> {
    let weights = m.weights().as_slice().expect("standard layout");
    apply_distance(weights, m.grid(), Some(2 * m.grid().power()))
}

impl<T: Scalar> GradientWorkspace<T> {
    /// Workspace for the plain GW gradient.
    pub fn gw(u: &DiscreteMeasure<T>, v: &DiscreteMeasure<T>) -> Result<Self> {
        let constant_term = constant_term_gw(u, v)?;
        Ok(Self {
            constant_term,
            theta_scale: T::from_config(4.0),
            theta: T::one(),
            cost_sq: None,
            gx: *u.grid(),
            gy: *v.grid(),
            dense: None,
        })
    }

    /// Workspace for the FGW gradient at trade-off `theta`.
    ///
    /// At `theta = 1` every assembled quantity is bit-identical to the GW
    /// workspace; at `theta = 0` the gradient is the plan-independent
    /// `C ⊙ C`.
    pub fn fgw(
        u: &DiscreteMeasure<T>,
        v: &DiscreteMeasure<T>,
        costs: &FeatureCost<T>,
        theta: T,
    ) -> Result<Self> {
        if !(theta >= T::zero() && theta <= T::one()) {
            return Err(Error::ThetaOutOfRange {
                value: theta.to_f64().unwrap_or(f64::NAN),
            });
        }
        costs.check_dims(u.len(), v.len())?;
        let a = squared_distance_load(u)?;
        let b = squared_distance_load(v)?;
        let cost_sq = costs.squared();
        let one_minus = T::one() - theta;
        let two_theta = T::from_config(2.0) * theta;
        let constant_term = Array2::from_shape_fn((a.len(), b.len()), |(i, p)| {
            one_minus * cost_sq[(i, p)] + two_theta * (a[i] + b[p])
        });
        Ok(Self {
            constant_term,
            theta_scale: T::from_config(4.0) * theta,
            theta,
            cost_sq: Some(cost_sq),
            gx: *u.grid(),
            gy: *v.grid(),
            dense: None,
        })
    }

    pub fn constant_term(&self) -> &Array2<T> {
        &self.constant_term
    }

    pub fn dim(&self) -> (usize, usize) {
        self.constant_term.dim()
    }

    /// Materialize the dense distance matrices for naive-mode gradients.
    /// Kept across iterations, exactly like the constant term.
    pub fn materialize_dense(&mut self, force: bool) -> Result<()> {
        if self.dense.is_none() {
            let dx = crate::dense::dense_distance_matrix(&self.gx, force)?;
            let dy = crate::dense::dense_distance_matrix(&self.gy, force)?;
            self.dense = Some((dx, dy));
        }
        Ok(())
    }

    fn check_plan(&self, plan: &ArrayView2<T>) -> Result<()> {
        if plan.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                rows: self.dim().0,
                cols: self.dim().1,
                got_rows: plan.dim().0,
                got_cols: plan.dim().1,
            });
        }
        Ok(())
    }

    /// Assemble the gradient at `plan`: `constant - scale * D_X plan D_Y`.
    pub fn gradient(&self, plan: &Array2<T>, mode: GradientMode) -> Result<Array2<T>> {
        self.check_plan(&plan.view())?;
        let mut linear = match (mode, &self.dense) {
            (GradientMode::Fast, _) => triple_product(plan, &self.gx, &self.gy)?,
            (GradientMode::Naive, Some((dx, dy))) => {
                crate::dense::dense_triple_apply(dx, plan, dy)
            }
            (GradientMode::Naive, None) => {
                naive_triple_product(plan, &self.gx, &self.gy, false)?
            }
        };
        let scale = self.theta_scale;
        ndarray::Zip::from(&mut linear)
            .and(&self.constant_term)
            .for_each(|l, c| *l = *c - scale * *l);
        Ok(linear)
    }

    /// Unregularized objective from an already-assembled gradient:
    /// `E = <grad, plan> / 2` for GW, plus the linear-term correction
    /// `(1-theta) <C ⊙ C, plan> / 2` for FGW.
    pub fn objective_from_gradient(&self, gradient: &Array2<T>, plan: &Array2<T>) -> T {
        let dot: T = gradient
            .iter()
            .zip(plan.iter())
            .map(|(g, p)| *g * *p)
            .sum();
        let half = T::from_config(0.5);
        match &self.cost_sq {
            None => half * dot,
            Some(csq) => {
                let linear: T = csq.iter().zip(plan.iter()).map(|(c, p)| *c * *p).sum();
                half * (dot + (T::one() - self.theta) * linear)
            }
        }
    }
}

/// GW gradient `C1 - 4 D_X plan D_Y` at a plan whose marginals match the
/// measures the workspace was built from.
pub fn gw_gradient<T: Scalar>(
    plan: &Array2<T>,
    ws: &GradientWorkspace<T>,
    mode: GradientMode,
) -> Result<Array2<T>> {
    ws.gradient(plan, mode)
}

/// FGW gradient `C2 - 4 theta D_X plan D_Y`; the workspace must have been
/// built with [`GradientWorkspace::fgw`].
pub fn fgw_gradient<T: Scalar>(
    plan: &Array2<T>,
    ws: &GradientWorkspace<T>,
    mode: GradientMode,
) -> Result<Array2<T>> {
    ws.gradient(plan, mode)
}

/// Quadratic distortion `E(plan)` in O(MN) given the workspace.
pub fn gw_objective<T: Scalar>(
    plan: &Array2<T>,
    ws: &GradientWorkspace<T>,
    mode: GradientMode,
) -> Result<T> {
    let grad = ws.gradient(plan, mode)?;
    Ok(ws.objective_from_gradient(&grad, plan))
}

/// Fused objective `(1-theta) <C ⊙ C, plan> + theta E(plan)`.
pub fn fgw_objective<T: Scalar>(
    plan: &Array2<T>,
    ws: &GradientWorkspace<T>,
    mode: GradientMode,
) -> Result<T> {
    let grad = ws.gradient(plan, mode)?;
    Ok(ws.objective_from_gradient(&grad, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::dense_distance_matrix;
    use crate::grid::UniformGrid1D;
    use ndarray::{Array1, Array2, Axis};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Random strictly positive plan normalized to total mass 1, returned
    /// with measures equal to its actual marginals so the decomposition is
    /// exact at that plan.
    fn feasible_instance(
        m: usize,
        n: usize,
        h: f64,
        k: u32,
        seed: u64,
    ) -> (Array2<f64>, DiscreteMeasure<f64>, DiscreteMeasure<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut plan = Array2::from_shape_fn((m, n), |_| 0.05 + rng.random::<f64>());
        let total: f64 = plan.sum();
        plan.mapv_inplace(|v| v / total);
        let gx = UniformGrid1D::new(m, h, k).unwrap();
        let gy = UniformGrid1D::new(n, h, k).unwrap();
        let u = DiscreteMeasure::from_array(plan.sum_axis(Axis(1)), gx).unwrap();
        let v = DiscreteMeasure::from_array(plan.sum_axis(Axis(0)), gy).unwrap();
        (plan, u, v)
    }

    /// O(M^2 N^2) oracle for the unconstrained gradient entry.
    fn brute_gradient(plan: &Array2<f64>, dx: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
        let (m, n) = plan.dim();
        Array2::from_shape_fn((m, n), |(i, p)| {
            let mut g = 0.0;
            for j in 0..m {
                for q in 0..n {
                    let d = dx[(i, j)] - dy[(p, q)];
                    g += d * d * plan[(j, q)];
                }
            }
            2.0 * g
        })
    }

    /// O(M^2 N^2) oracle for the quadratic distortion.
    fn brute_objective(plan: &Array2<f64>, dx: &Array2<f64>, dy: &Array2<f64>) -> f64 {
        let (m, n) = plan.dim();
        let mut e = 0.0;
        for i in 0..m {
            for j in 0..m {
                for p in 0..n {
                    for q in 0..n {
                        let d = dx[(i, j)] - dy[(p, q)];
                        e += d * d * plan[(i, p)] * plan[(j, q)];
                    }
                }
            }
        }
        e
    }

    fn rel_mat_err(got: &Array2<f64>, want: &Array2<f64>) -> f64 {
        let num = crate::plan::frobenius_diff(got, want);
        let den = want.iter().map(|v| v * v).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    #[test]
    fn constant_term_single_point() {
        let g = UniformGrid1D::new(1, 1.0, 1).unwrap();
        let u = DiscreteMeasure::new(vec![1.0], g).unwrap();
        let c1 = constant_term_gw(&u, &u).unwrap();
        assert_eq!(c1, ndarray::array![[0.0]]);
    }

    #[test]
    fn constant_term_two_point_hand_case() {
        let g = UniformGrid1D::new(2, 1.0, 1).unwrap();
        let u = DiscreteMeasure::new(vec![0.5, 0.5], g).unwrap();
        let c1 = constant_term_gw(&u, &u).unwrap();
        for v in c1.iter() {
            assert_eq!(*v, 2.0);
        }
    }

    #[test]
    fn constant_term_matches_dense_formula() {
        let (_, u, v) = feasible_instance(64, 64, 0.02, 2, 40);
        let c1 = constant_term_gw(&u, &v).unwrap();
        let dx = dense_distance_matrix(u.grid(), false).unwrap();
        let dy = dense_distance_matrix(v.grid(), false).unwrap();
        let dx2 = dx.mapv(|d| d * d);
        let dy2 = dy.mapv(|d| d * d);
        let a = dx2.dot(u.weights());
        let b = dy2.dot(v.weights());
        let want = Array2::from_shape_fn((64, 64), |(i, p)| 2.0 * (a[i] + b[p]));
        assert!(rel_mat_err(&c1, &want) <= 1e-12);
    }

    #[test]
    fn zero_plan_returns_constant_term() {
        let (_, u, v) = feasible_instance(6, 6, 0.5, 1, 41);
        let ws = GradientWorkspace::gw(&u, &v).unwrap();
        let zero = Array2::<f64>::zeros((6, 6));
        let grad = gw_gradient(&zero, &ws, GradientMode::Fast).unwrap();
        assert_eq!(&grad, ws.constant_term());
    }

    #[test]
    fn gradient_matches_brute_force() {
        let (plan, u, v) = feasible_instance(8, 8, 0.25, 1, 42);
        let ws = GradientWorkspace::gw(&u, &v).unwrap();
        let grad = gw_gradient(&plan, &ws, GradientMode::Fast).unwrap();
        let dx = dense_distance_matrix(u.grid(), false).unwrap();
        let dy = dense_distance_matrix(v.grid(), false).unwrap();
        let want = brute_gradient(&plan, &dx, &dy);
        assert!(rel_mat_err(&grad, &want) <= 1e-11, "{}", rel_mat_err(&grad, &want));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (plan, u, v) = feasible_instance(8, 8, 0.25, 1, 43);
        let ws = GradientWorkspace::gw(&u, &v).unwrap();
        let grad = gw_gradient(&plan, &ws, GradientMode::Fast).unwrap();
        let dx = dense_distance_matrix(u.grid(), false).unwrap();
        let dy = dense_distance_matrix(v.grid(), false).unwrap();
        let delta = 1e-6;
        for i in 0..8 {
            for p in 0..8 {
                let mut plus = plan.clone();
                plus[(i, p)] += delta;
                let mut minus = plan.clone();
                minus[(i, p)] -= delta;
                let fd =
                    (brute_objective(&plus, &dx, &dy) - brute_objective(&minus, &dx, &dy))
                        / (2.0 * delta);
                let g = grad[(i, p)];
                assert!(
                    (fd - g).abs() <= 1e-5 * g.abs().max(1.0),
                    "entry ({i},{p}): fd = {fd}, grad = {g}"
                );
            }
        }
    }

    #[test]
    fn naive_mode_matches_fast_mode() {
        let (plan, u, v) = feasible_instance(12, 9, 0.1, 2, 44);
        let ws = GradientWorkspace::gw(&u, &v).unwrap();
        let fast = gw_gradient(&plan, &ws, GradientMode::Fast).unwrap();
        let naive = gw_gradient(&plan, &ws, GradientMode::Naive).unwrap();
        assert!(rel_mat_err(&fast, &naive) <= 1e-12);
    }

    #[test]
    fn fgw_endpoints() {
        let (plan, u, v) = feasible_instance(7, 7, 0.2, 1, 45);
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let costs =
            FeatureCost::new(Array2::from_shape_fn((7, 7), |_| rng.random::<f64>())).unwrap();

        let gw_ws = GradientWorkspace::gw(&u, &v).unwrap();
        let fgw1 = GradientWorkspace::fgw(&u, &v, &costs, 1.0).unwrap();
        let g_gw = gw_gradient(&plan, &gw_ws, GradientMode::Fast).unwrap();
        let g_f1 = fgw_gradient(&plan, &fgw1, GradientMode::Fast).unwrap();
        for (a, b) in g_gw.iter().zip(g_f1.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        let fgw0 = GradientWorkspace::fgw(&u, &v, &costs, 0.0).unwrap();
        let g_f0 = fgw_gradient(&plan, &fgw0, GradientMode::Fast).unwrap();
        assert_eq!(g_f0, costs.squared());
        // plan-independent at theta = 0
        let other = Array2::from_elem((7, 7), 1.0 / 49.0);
        let g_f0b = fgw_gradient(&other, &fgw0, GradientMode::Fast).unwrap();
        assert_eq!(g_f0, g_f0b);
    }

    #[test]
    fn fgw_gradient_matches_brute_force() {
        let (plan, u, v) = feasible_instance(8, 8, 0.25, 1, 47);
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let costs =
            FeatureCost::new(Array2::from_shape_fn((8, 8), |_| rng.random::<f64>())).unwrap();
        let theta = 0.5;
        let ws = GradientWorkspace::fgw(&u, &v, &costs, theta).unwrap();
        let grad = fgw_gradient(&plan, &ws, GradientMode::Fast).unwrap();

        let dx = dense_distance_matrix(u.grid(), false).unwrap();
        let dy = dense_distance_matrix(v.grid(), false).unwrap();
        let quad = brute_gradient(&plan, &dx, &dy);
        let csq = costs.squared();
        let want = Array2::from_shape_fn((8, 8), |(i, p)| {
            (1.0 - theta) * csq[(i, p)] + theta * quad[(i, p)]
        });
        assert!(rel_mat_err(&grad, &want) <= 1e-11);
    }

    #[test]
    fn objective_zero_on_isometric_self_coupling() {
        let g = UniformGrid1D::new(6, 0.3, 2).unwrap();
        let w = Array1::<f64>::from_elem(6, 1.0 / 6.0);
        let u = DiscreteMeasure::from_array(w.clone(), g).unwrap();
        let plan = Array2::from_diag(&w);
        let ws = GradientWorkspace::gw(&u, &u).unwrap();
        let e = gw_objective(&plan, &ws, GradientMode::Fast).unwrap();
        // the homogeneity evaluation cancels `a_i` against the triple
        // product, leaving only rounding residue of the cancellation
        assert!(e.abs() <= 1e-14, "E = {e}");
    }

    #[test]
    fn objective_independent_coupling_two_points() {
        let g = UniformGrid1D::new(2, 1.0, 1).unwrap();
        let u = DiscreteMeasure::new(vec![0.5, 0.5], g).unwrap();
        let plan = Array2::<f64>::from_elem((2, 2), 0.25);
        let ws = GradientWorkspace::gw(&u, &u).unwrap();
        let e = gw_objective(&plan, &ws, GradientMode::Fast).unwrap();
        assert!((e - 0.5).abs() < 1e-14, "E = {e}");
    }

    #[test]
    fn objective_matches_brute_force() {
        let (plan, u, v) = feasible_instance(6, 6, 0.4, 1, 49);
        let ws = GradientWorkspace::gw(&u, &v).unwrap();
        let e = gw_objective(&plan, &ws, GradientMode::Fast).unwrap();
        let dx = dense_distance_matrix(u.grid(), false).unwrap();
        let dy = dense_distance_matrix(v.grid(), false).unwrap();
        let want = brute_objective(&plan, &dx, &dy);
        assert!((e - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn fgw_objective_matches_brute_force() {
        let (plan, u, v) = feasible_instance(6, 6, 0.4, 1, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let costs =
            FeatureCost::new(Array2::from_shape_fn((6, 6), |_| rng.random::<f64>())).unwrap();
        let theta = 0.5;
        let ws = GradientWorkspace::fgw(&u, &v, &costs, theta).unwrap();
        let e = fgw_objective(&plan, &ws, GradientMode::Fast).unwrap();

        let dx = dense_distance_matrix(u.grid(), false).unwrap();
        let dy = dense_distance_matrix(v.grid(), false).unwrap();
        let quad = brute_objective(&plan, &dx, &dy);
        let linear: f64 = costs
            .squared()
            .iter()
            .zip(plan.iter())
            .map(|(c, p)| c * p)
            .sum();
        let want = (1.0 - theta) * linear + theta * quad;
        assert!((e - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn fgw_objective_endpoints() {
        let (plan, u, v) = feasible_instance(5, 5, 0.5, 1, 52);
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let costs =
            FeatureCost::new(Array2::from_shape_fn((5, 5), |_| rng.random::<f64>())).unwrap();

        let ws0 = GradientWorkspace::fgw(&u, &v, &costs, 0.0).unwrap();
        let e0 = fgw_objective(&plan, &ws0, GradientMode::Fast).unwrap();
        let want0: f64 = costs
            .squared()
            .iter()
            .zip(plan.iter())
            .map(|(c, p)| c * p)
            .sum();
        assert!((e0 - want0).abs() <= 1e-14);

        let ws1 = GradientWorkspace::fgw(&u, &v, &costs, 1.0).unwrap();
        let gw_ws = GradientWorkspace::gw(&u, &v).unwrap();
        let e1 = fgw_objective(&plan, &ws1, GradientMode::Fast).unwrap();
        let egw = gw_objective(&plan, &gw_ws, GradientMode::Fast).unwrap();
        assert_eq!(e1, egw);
    }

    #[test]
    fn homogeneity_identity() {
        let (plan, u, v) = feasible_instance(10, 10, 0.1, 1, 54);
        let ws = GradientWorkspace::gw(&u, &v).unwrap();
        let grad = gw_gradient(&plan, &ws, GradientMode::Fast).unwrap();
        let dot: f64 = grad.iter().zip(plan.iter()).map(|(g, p)| g * p).sum();
        let e = gw_objective(&plan, &ws, GradientMode::Fast).unwrap();
        assert!((dot - 2.0 * e).abs() <= 1e-12 * dot.abs().max(1.0));
    }

    #[test]
    fn gradient_reversal_equivariance() {
        let (plan, u, v) = feasible_instance(9, 9, 0.2, 1, 55);
        let ws = GradientWorkspace::gw(&u, &v).unwrap();
        let grad = gw_gradient(&plan, &ws, GradientMode::Fast).unwrap();

        // reverse both index sets
        let rev_plan = Array2::from_shape_fn((9, 9), |(i, p)| plan[(8 - i, 8 - p)]);
        let ur = u.reversed();
        let vr = v.reversed();
        let ws_r = GradientWorkspace::gw(&ur, &vr).unwrap();
        let grad_r = gw_gradient(&rev_plan, &ws_r, GradientMode::Fast).unwrap();
        let want = Array2::from_shape_fn((9, 9), |(i, p)| grad[(8 - i, 8 - p)]);
        assert!(rel_mat_err(&grad_r, &want) <= 1e-12);
    }

    #[test]
    fn theta_out_of_range_is_rejected() {
        let (_, u, v) = feasible_instance(4, 4, 1.0, 1, 56);
        let costs = FeatureCost::new(Array2::zeros((4, 4))).unwrap();
        assert!(matches!(
            GradientWorkspace::fgw(&u, &v, &costs, 1.5),
            Err(Error::ThetaOutOfRange { .. })
        ));
        assert!(matches!(
            GradientWorkspace::fgw(&u, &v, &costs, -0.1),
            Err(Error::ThetaOutOfRange { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (_, u, v) = feasible_instance(4, 5, 1.0, 1, 57);
        let ws = GradientWorkspace::gw(&u, &v).unwrap();
        let bad = Array2::<f64>::zeros((5, 4));
        assert!(matches!(
            gw_gradient(&bad, &ws, GradientMode::Fast),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
