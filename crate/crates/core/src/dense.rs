//! Dense distance matrices and the cubic-time baseline triple product.
//!
//! These materialize what [`crate::multiply`] keeps implicit. They serve as
//! the independent oracle in tests and as the "naive" mode the benchmarks
//! compare against; a size guard protects against accidentally asking for a
//! multi-gigabyte matrix.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

/// Refuse to materialize grids with more points than this unless forced.
pub const MATERIALIZATION_GUARD: usize = 8192;

fn check_guard(points: usize, force: bool) -> Result<()> {
    if points > MATERIALIZATION_GUARD && !force {
        return Err(Error::TooLargeToMaterialize {
            points,
            guard: MATERIALIZATION_GUARD,
        });
    }
    Ok(())
}

/// Entrywise-constructed distance matrix of a grid: `h^k |i-j|^k` (1D) or
/// the Manhattan analogue on the column-major flattened 2D grid.
pub fn dense_distance_matrix<T: Scalar>(grid: &Grid<T>, force: bool) -> Result<Array2<T>> {
    dense_distance_matrix_pow(grid, grid.power(), force)
}

/// [`dense_distance_matrix`] at an arbitrary power (the entrywise power of
/// the unscaled distances times `h^power`), used to cross-check the
/// `power_override` kernel path.
pub fn dense_distance_matrix_pow<T: Scalar>(
    grid: &Grid<T>,
    power: u32,
    force: bool,
) -> Result<Array2<T>> {
    let points = grid.points();
    check_guard(points, force)?;
    let scale = grid.spacing().powi(power as i32);
    let p = power as i32;
    let mat = match grid {
        Grid::Line(_) => Array2::from_shape_fn((points, points), |(i, j)| {
            let d = (i as i64 - j as i64).unsigned_abs() as f64;
            scale * T::from_f64(d.powi(p)).unwrap()
        }),
        Grid::Square(g) => {
            let n = g.side();
            Array2::from_shape_fn((points, points), |(a, b)| {
                // column-major flattening: a = col * n + row
                let (ia, ja) = ((a % n) as i64, (a / n) as i64);
                let (ib, jb) = ((b % n) as i64, (b / n) as i64);
                let d = ((ia - ib).abs() + (ja - jb).abs()) as f64;
                scale * T::from_f64(d.powi(p)).unwrap()
            })
        }
    };
    Ok(mat)
}

/// `dx · plan · dy` as two plain inner-product matrix multiplications (the
/// textbook i-j-k loop, each entry one dot product). This is deliberately
/// the straightforward O(N^3) evaluation the original entropic solvers
/// perform, not a blocked GEMM, so it is a fair dense baseline for the
/// benchmarks.
pub fn dense_triple_apply<T: Scalar>(
    dx: &Array2<T>,
    plan: &Array2<T>,
    dy: &Array2<T>,
) -> Array2<T> {
    let (m, n) = plan.dim();
    debug_assert_eq!(dx.dim(), (m, m));
    debug_assert_eq!(dy.dim(), (n, n));
    let ps = plan.as_slice().expect("standard layout");
    let dxs = dx.as_slice().expect("standard layout");
    let dys = dy.as_slice().expect("standard layout");

    // W = plan · dy, entry (i, q) = <plan row i, dy column q>
    let mut w = vec![T::zero(); m * n];
    for i in 0..m {
        let prow = &ps[i * n..(i + 1) * n];
        for q in 0..n {
            let mut acc = T::zero();
            for p in 0..n {
                acc += prow[p] * dys[p * n + q];
            }
            w[i * n + q] = acc;
        }
    }

    // R = dx · W, entry (i, q) = <dx row i, w column q>
    let mut r = vec![T::zero(); m * n];
    for i in 0..m {
        let dxrow = &dxs[i * m..(i + 1) * m];
        for q in 0..n {
            let mut acc = T::zero();
            for j in 0..m {
                acc += dxrow[j] * w[j * n + q];
            }
            r[i * n + q] = acc;
        }
    }
    Array2::from_shape_vec((m, n), r).expect("shape matches")
}

/// The baseline `D_X plan D_Y` with materialized distance matrices and the
/// straightforward product of [`dense_triple_apply`].
pub fn naive_triple_product<T: Scalar>(
    plan: &Array2<T>,
    gx: &Grid<T>,
    gy: &Grid<T>,
    force: bool,
) -> Result<Array2<T>> {
    let (m, n) = plan.dim();
    if m != gx.points() || n != gy.points() {
        return Err(Error::DimensionMismatch {
            rows: gx.points(),
            cols: gy.points(),
            got_rows: m,
            got_cols: n,
        });
    }
    let dx = dense_distance_matrix(gx, force)?;
    let dy = dense_distance_matrix(gy, force)?;
    Ok(dense_triple_apply(&dx, plan, &dy))
}
