//! Fast multiplication by power-distance matrices on uniform grids.
//!
//! The implied 1D distance matrix `D = h^k [|i-j|^k]` splits as
//! `D = h^k (L + L^T)` with `L` lower triangular and Toeplitz. For
//! `y = L x`, the partial power sums
//!
//! ```text
//! a_{i,r} = sum_{j<i} (i-j)^(r-1) x_j,   r = 1..k+1,   y_i = a_{i,k+1}
//! ```
//!
//! advance by one grid point through a binomial expansion of `(i-j+1)^(r-1)`:
//!
//! ```text
//! a_{i+1,r} = x_i + sum_{s=1}^{r} C(r-1, s-1) a_{i,s}
//! ```
//!
//! so the whole product costs `(N-1) k(k+1)/2` multiplications and
//! `(N-1)(k+1)(k+2)/2` additions instead of O(N^2). `L^T x` runs the same
//! recursion bottom-up. On a square 2D grid the Manhattan power-distance
//! operator expands over a binomial sum of Kronecker products of the 1D
//! pieces, giving O(k^3 n^2) per vector; with k = 1 or 2 in practice both
//! kernels are effectively linear in the point count.
//!
//! The triple products `D_X plan D_Y` used by the solvers apply these
//! kernels to every row and then every column of the plan, for O(k^2 M N)
//! total (1D) without ever materializing a distance matrix.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Grid, UniformGrid1D, UniformGrid2D};
use crate::scalar::Scalar;

/// Triangular table of binomial coefficients `C(r-1, s-1)` for
/// `1 <= s <= r <= max_order`, built by the Pascal identity.
///
/// Entries are stored in the scalar type itself: they are exact integers up
/// to the 2^53 mantissa limit of `f64` (order ~55) and round beyond that,
/// which is irrelevant at the small powers distance matrices use.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomialTable<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> BinomialTable<T> {
    pub fn new(max_order: usize) -> Self {
        assert!(max_order >= 1, "binomial table needs at least one row");
        let mut rows: Vec<Vec<T>> = Vec::with_capacity(max_order);
        rows.push(vec![T::one()]);
        for r0 in 1..max_order {
            let prev = &rows[r0 - 1];
            let mut row = Vec::with_capacity(r0 + 1);
            row.push(T::one());
            for s0 in 1..r0 {
                row.push(prev[s0 - 1] + prev[s0]);
            }
            row.push(T::one());
            rows.push(row);
        }
        Self { rows }
    }

    pub fn max_order(&self) -> usize {
        self.rows.len()
    }

    /// `C(r-1, s-1)`, 1-indexed: `entry(r, s)` for `1 <= s <= r <= max_order`.
    pub fn entry(&self, r: usize, s: usize) -> T {
        self.rows[r - 1][s - 1]
    }

    #[inline]
    pub(crate) fn row(&self, r0: usize) -> &[T] {
        &self.rows[r0]
    }

    /// Overwrite one coefficient. This is a fault-injection hook for the
    /// `verify` command's self-test; it deliberately breaks the Pascal
    /// invariant and must never be used on a table handed to a solver.
    pub fn override_entry(&mut self, r: usize, s: usize, value: T) {
        self.rows[r - 1][s - 1] = value;
    }
}

/// Exact tally of the arithmetic performed by a counted kernel run.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCount {
    pub multiplications: u64,
    pub additions: u64,
}

trait Tally {
    fn mul(&mut self);
    fn add(&mut self);
}

/// Zero-sized tally: compiles to nothing in the uncounted kernels.
struct NoTally;

impl Tally for NoTally {
    #[inline(always)]
    fn mul(&mut self) {}
    #[inline(always)]
    fn add(&mut self) {}
}

impl Tally for OpCount {
    #[inline(always)]
    fn mul(&mut self) {
        self.multiplications += 1;
    }
    #[inline(always)]
    fn add(&mut self) {
        self.additions += 1;
    }
}

/// One accumulator advance: `acc[r0] <- x + sum_{s0<=r0} C(r0,s0) acc[s0]`,
/// evaluated for r0 descending so a single buffer suffices.
#[inline(always)]
fn advance<T: Scalar, C: Tally>(acc: &mut [T], x: T, table: &BinomialTable<T>, tally: &mut C) {
    for r0 in (0..acc.len()).rev() {
        let coeffs = table.row(r0);
        let mut val = x + acc[0];
        tally.add();
        for s0 in 1..=r0 {
            val = val + coeffs[s0] * acc[s0];
            tally.mul();
            tally.add();
        }
        acc[r0] = val;
    }
}

/// `dst = L_k src` (ADD = false) or `dst += L_k src` (ADD = true),
/// where `L_k[i][j] = (i-j)^k` for `j < i`.
fn lower_sweep<T: Scalar, C: Tally, const ADD: bool>(
    src: &[T],
    dst: &mut [T],
    table: &BinomialTable<T>,
    acc: &mut [T],
    tally: &mut C,
) {
    acc.fill(T::zero());
    let n = src.len();
    let k0 = acc.len() - 1;
    for i in 0..n {
        if ADD {
            dst[i] = dst[i] + acc[k0];
        } else {
            dst[i] = acc[k0];
        }
        if i + 1 < n {
            advance(acc, src[i], table, tally);
        }
    }
}

/// `dst = L_k^T src` or `dst += L_k^T src`: the lower sweep run bottom-up,
/// arithmetic mirrored operation for operation.
fn upper_sweep<T: Scalar, C: Tally, const ADD: bool>(
    src: &[T],
    dst: &mut [T],
    table: &BinomialTable<T>,
    acc: &mut [T],
    tally: &mut C,
) {
    acc.fill(T::zero());
    let n = src.len();
    let k0 = acc.len() - 1;
    for i in (0..n).rev() {
        if ADD {
            dst[i] = dst[i] + acc[k0];
        } else {
            dst[i] = acc[k0];
        }
        if i > 0 {
            advance(acc, src[i], table, tally);
        }
    }
}

fn check_power(k: u32) -> Result<()> {
    if k < 1 {
        return Err(Error::ConfigInvalid {
            reason: "distance power must be at least 1".into(),
        });
    }
    Ok(())
}

/// `y_i = sum_{j<i} (i-j)^k x_j`: multiply by the strictly-lower-triangular
/// power-Toeplitz factor in `(N-1) k(k+1)/2` multiplications.
pub fn apply_lower<T: Scalar>(x: &[T], k: u32) -> Result<Vec<T>> {
    let table = BinomialTable::new(k as usize + 1);
    apply_lower_with_table(x, k, &table)
}

/// [`apply_lower`] with a caller-provided coefficient table (reused across
/// many calls, or deliberately corrupted by the verification self-test).
pub fn apply_lower_with_table<T: Scalar>(x: &[T], k: u32, table: &BinomialTable<T>) -> Result<Vec<T>> {
    check_power(k)?;
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    assert!(table.max_order() >= k as usize + 1);
    let mut dst = vec![T::zero(); x.len()];
    let mut acc = vec![T::zero(); k as usize + 1];
    lower_sweep::<_, _, false>(x, &mut dst, table, &mut acc, &mut NoTally);
    Ok(dst)
}

/// [`apply_lower`] plus the exact count of arithmetic performed.
pub fn apply_lower_counted<T: Scalar>(x: &[T], k: u32) -> Result<(Vec<T>, OpCount)> {
    check_power(k)?;
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let table = BinomialTable::new(k as usize + 1);
    let mut dst = vec![T::zero(); x.len()];
    let mut acc = vec![T::zero(); k as usize + 1];
    let mut count = OpCount::default();
    lower_sweep::<_, _, false>(x, &mut dst, &table, &mut acc, &mut count);
    Ok((dst, count))
}

/// `y_i = sum_{j>i} (j-i)^k x_j`: the transposed factor, computed by the
/// mirrored bottom-up recursion. Bit-identical to reversing the input,
/// applying [`apply_lower`] and reversing the output.
pub fn apply_upper<T: Scalar>(x: &[T], k: u32) -> Result<Vec<T>> {
    check_power(k)?;
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let table = BinomialTable::new(k as usize + 1);
    let mut dst = vec![T::zero(); x.len()];
    let mut acc = vec![T::zero(); k as usize + 1];
    upper_sweep::<_, _, false>(x, &mut dst, &table, &mut acc, &mut NoTally);
    Ok(dst)
}

/// Multiply by the implied 1D distance matrix: `h^p (L_p + L_p^T) x`.
///
/// `power_override` substitutes the grid's exponent; the gradient module
/// uses it with `2k` to multiply by the entrywise square `D ⊙ D` without
/// materializing anything, since `(h^k |i-j|^k)^2 = h^{2k} |i-j|^{2k}`.
pub fn apply_distance_1d<T: Scalar>(
    x: &[T],
    grid: &UniformGrid1D<T>,
    power_override: Option<u32>,
) -> Result<Vec<T>> {
    if x.len() != grid.size() {
        return Err(Error::LengthMismatch {
            expected: grid.size(),
            got: x.len(),
        });
    }
    let p = power_override.unwrap_or(grid.power());
    check_power(p)?;
    let table = BinomialTable::new(p as usize + 1);
    let mut dst = vec![T::zero(); x.len()];
    let mut acc = vec![T::zero(); p as usize + 1];
    lower_sweep::<_, _, false>(x, &mut dst, &table, &mut acc, &mut NoTally);
    upper_sweep::<_, _, true>(x, &mut dst, &table, &mut acc, &mut NoTally);
    let scale = grid.spacing().powi(p as i32);
    for d in &mut dst {
        *d = *d * scale;
    }
    Ok(dst)
}

/// Scratch buffers for the 2D kernel, reused across many applications.
struct Apply2dScratch<T> {
    stage: Vec<T>,
    term: Vec<T>,
    acc_rows: Vec<T>,
    lane: Vec<T>,
    acc_small: Vec<T>,
}

impl<T: Scalar> Apply2dScratch<T> {
    fn new(side: usize, p: usize) -> Self {
        Self {
            stage: vec![T::zero(); side * side],
            term: vec![T::zero(); side * side],
            acc_rows: vec![T::zero(); (p + 1) * side],
            lane: vec![T::zero(); side],
            acc_small: vec![T::zero(); p + 1],
        }
    }
}

/// Apply `M_s = D1^{⊙s}` (s >= 1) or the all-ones `J` (s = 0) to every
/// column of the column-major `n x n` buffer `src`, writing `dst`.
/// Columns are contiguous runs of length `n`.
fn stage_columns<T: Scalar>(
    src: &[T],
    dst: &mut [T],
    n: usize,
    s: usize,
    table: &BinomialTable<T>,
    acc: &mut [T],
) {
    if s == 0 {
        for j in 0..n {
            let col = &src[j * n..(j + 1) * n];
            let total: T = col.iter().copied().sum();
            dst[j * n..(j + 1) * n].fill(total);
        }
    } else {
        let acc = &mut acc[..s + 1];
        for j in 0..n {
            let col = &src[j * n..(j + 1) * n];
            let out = &mut dst[j * n..(j + 1) * n];
            lower_sweep::<_, _, false>(col, out, table, acc, &mut NoTally);
            upper_sweep::<_, _, true>(col, out, table, acc, &mut NoTally);
        }
    }
}

/// Apply `M_s` (or `J` for s = 0) to every row of the column-major buffer,
/// batching the recursion across all rows at once: the sweep walks the
/// column slices left to right (then right to left for the transpose part)
/// and each slice updates every row's accumulators elementwise.
fn stage_rows<T: Scalar>(
    src: &[T],
    dst: &mut [T],
    n: usize,
    s: usize,
    table: &BinomialTable<T>,
    acc_rows: &mut [T],
    lane: &mut [T],
) {
    if s == 0 {
        lane.fill(T::zero());
        for j in 0..n {
            let col = &src[j * n..(j + 1) * n];
            for (l, c) in lane.iter_mut().zip(col) {
                *l = *l + *c;
            }
        }
        for j in 0..n {
            dst[j * n..(j + 1) * n].copy_from_slice(lane);
        }
        return;
    }

    let acc_rows = &mut acc_rows[..(s + 1) * n];

    // lower part: dst[:, j] = acc_top, then absorb src[:, j]
    acc_rows.fill(T::zero());
    for j in 0..n {
        let col = &src[j * n..(j + 1) * n];
        let out = &mut dst[j * n..(j + 1) * n];
        out.copy_from_slice(&acc_rows[s * n..(s + 1) * n]);
        if j + 1 < n {
            advance_batched(acc_rows, col, n, s, table);
        }
    }

    // transposed part, mirrored sweep, accumulating into dst
    acc_rows.fill(T::zero());
    for j in (0..n).rev() {
        let col = &src[j * n..(j + 1) * n];
        let out = &mut dst[j * n..(j + 1) * n];
        for (o, a) in out.iter_mut().zip(&acc_rows[s * n..(s + 1) * n]) {
            *o = *o + *a;
        }
        if j > 0 {
            advance_batched(acc_rows, col, n, s, table);
        }
    }
}

/// Elementwise version of [`advance`] over `lane_len` independent recursions.
fn advance_batched<T: Scalar>(
    acc_rows: &mut [T],
    x: &[T],
    lane_len: usize,
    k0: usize,
    table: &BinomialTable<T>,
) {
    for r0 in (0..=k0).rev() {
        let coeffs = table.row(r0);
        // acc[r0] <- x + acc[0] + sum_{1<=s0<r0} C(r0,s0) acc[s0] + acc[r0]
        // (the s0 = r0 coefficient is 1); split_at_mut separates the target
        // row from the rows it reads.
        let (read, write) = acc_rows.split_at_mut(r0 * lane_len);
        let target = &mut write[..lane_len];
        if r0 == 0 {
            for (t, xv) in target.iter_mut().zip(x) {
                *t = *xv + *t;
            }
            continue;
        }
        for ((t, xv), a0) in target.iter_mut().zip(x).zip(&read[..lane_len]) {
            *t = *t + *xv + *a0;
        }
        for s0 in 1..r0 {
            let c = coeffs[s0];
            let row = &read[s0 * lane_len..(s0 + 1) * lane_len];
            for (t, a) in target.iter_mut().zip(row) {
                *t = *t + c * *a;
            }
        }
    }
}

fn apply_distance_2d_into<T: Scalar>(
    x: &[T],
    dst: &mut [T],
    grid: &UniformGrid2D<T>,
    p: u32,
    table: &BinomialTable<T>,
    scratch: &mut Apply2dScratch<T>,
) {
    let n = grid.side();
    let p = p as usize;
    dst.fill(T::zero());
    for r in 0..=p {
        let s_cols = p - r;
        let s_rows = r;
        stage_columns(x, &mut scratch.stage, n, s_cols, table, &mut scratch.acc_small);
        stage_rows(
            &scratch.stage,
            &mut scratch.term,
            n,
            s_rows,
            table,
            &mut scratch.acc_rows,
            &mut scratch.lane,
        );
        let coef = table.entry(p + 1, r + 1);
        for (d, t) in dst.iter_mut().zip(&scratch.term) {
            *d = *d + coef * *t;
        }
    }
    let scale = grid.spacing().powi(p as i32);
    for d in dst.iter_mut() {
        *d = *d * scale;
    }
}

/// Multiply by the implied 2D Manhattan power-distance matrix.
///
/// The length-`n^2` input is read as a column-major `n x n` matrix; the
/// operator expands into a binomial sum of terms that each apply a 1D kernel
/// to the columns and another to the rows, so the whole product costs
/// O(p^3 n^2) element operations. `power_override` as in
/// [`apply_distance_1d`].
pub fn apply_distance_2d<T: Scalar>(
    x: &[T],
    grid: &UniformGrid2D<T>,
    power_override: Option<u32>,
) -> Result<Vec<T>> {
    if x.len() != grid.points() {
        return Err(Error::LengthMismatch {
            expected: grid.points(),
            got: x.len(),
        });
    }
    let p = power_override.unwrap_or(grid.power());
    check_power(p)?;
    let table = BinomialTable::new(p as usize + 1);
    let mut scratch = Apply2dScratch::new(grid.side(), p as usize);
    let mut dst = vec![T::zero(); x.len()];
    apply_distance_2d_into(x, &mut dst, grid, p, &table, &mut scratch);
    Ok(dst)
}

/// Multiply by either grid's implied distance matrix.
pub fn apply_distance<T: Scalar>(
    x: &[T],
    grid: &Grid<T>,
    power_override: Option<u32>,
) -> Result<Vec<T>> {
    match grid {
        Grid::Line(g) => apply_distance_1d(x, g, power_override),
        Grid::Square(g) => apply_distance_2d(x, g, power_override),
    }
}

/// `D_X plan D_Y` without materializing either distance matrix: the target
/// operator is applied to every row of the plan (both matrices are
/// symmetric), then the source operator to every column of the result.
/// Mixed grid kinds are allowed since each side acts independently.
pub fn triple_product<T: Scalar>(
    plan: &Array2<T>,
    gx: &Grid<T>,
    gy: &Grid<T>,
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

    // right factor: rows of the plan are contiguous
    let mut z = Array2::<T>::zeros((m, n));
    apply_to_rows(plan, &mut z, gy);

    // left factor on the columns of z
    let mut out = Array2::<T>::zeros((m, n));
    match gx {
        Grid::Line(g) => {
            let p = g.power() as usize;
            let table = BinomialTable::new(p + 1);
            let zs = z.as_slice().expect("standard layout");
            let os = out.as_slice_mut().expect("standard layout");
            let mut acc_rows = vec![T::zero(); (p + 1) * n];
            columns_lower_upper(zs, os, m, n, p, &table, &mut acc_rows);
        }
        Grid::Square(_) => {
            // transpose, reuse the contiguous row path, transpose back
            let zt = as_transposed(&z);
            let mut ot = Array2::<T>::zeros((n, m));
            apply_to_rows(&zt, &mut ot, gx);
            out.assign(&ot.t());
        }
    }

    let scale = gx.spacing().powi(gx.power() as i32) * gy.spacing().powi(gy.power() as i32);
    out.mapv_inplace(|v| v * scale);
    Ok(out)
}

/// Apply a grid operator (unscaled, power = grid power) to every row.
fn apply_to_rows<T: Scalar>(src: &Array2<T>, dst: &mut Array2<T>, grid: &Grid<T>) {
    let (m, n) = src.dim();
    let ss = src.as_slice().expect("standard layout");
    let ds = dst.as_slice_mut().expect("standard layout");
    match grid {
        Grid::Line(g) => {
            let p = g.power() as usize;
            let table = BinomialTable::new(p + 1);
            let mut acc = vec![T::zero(); p + 1];
            for i in 0..m {
                let row = &ss[i * n..(i + 1) * n];
                let out = &mut ds[i * n..(i + 1) * n];
                lower_sweep::<_, _, false>(row, out, &table, &mut acc, &mut NoTally);
                upper_sweep::<_, _, true>(row, out, &table, &mut acc, &mut NoTally);
            }
        }
        Grid::Square(g) => {
            let p = g.power();
            let table = BinomialTable::new(p as usize + 1);
            let mut scratch = Apply2dScratch::new(g.side(), p as usize);
            // unscaled: divide the per-application scale back out would lose
            // bits, so run the core and skip the h^p factor by using a
            // unit-spacing twin of the grid.
            let unit = UniformGrid2D::new(g.side(), T::one(), p).expect("valid grid");
            for i in 0..m {
                let row = &ss[i * n..(i + 1) * n];
                let out = &mut ds[i * n..(i + 1) * n];
                apply_distance_2d_into(row, out, &unit, p, &table, &mut scratch);
            }
        }
    }
}

/// Batched lower + upper sweeps down the rows: applies the 1D operator to
/// every column of `src` at once through strided-free row arithmetic, so no
/// transpose of the matrix is ever formed.
fn columns_lower_upper<T: Scalar>(
    src: &[T],
    dst: &mut [T],
    m: usize,
    n: usize,
    k0: usize,
    table: &BinomialTable<T>,
    acc_rows: &mut [T],
) {
    acc_rows.fill(T::zero());
    for i in 0..m {
        dst[i * n..(i + 1) * n].copy_from_slice(&acc_rows[k0 * n..(k0 + 1) * n]);
        if i + 1 < m {
            advance_batched(acc_rows, &src[i * n..(i + 1) * n], n, k0, table);
        }
    }
    acc_rows.fill(T::zero());
    for i in (0..m).rev() {
        let out = &mut dst[i * n..(i + 1) * n];
        for (o, a) in out.iter_mut().zip(&acc_rows[k0 * n..(k0 + 1) * n]) {
            *o = *o + *a;
        }
        if i > 0 {
            advance_batched(acc_rows, &src[i * n..(i + 1) * n], n, k0, table);
        }
    }
}

fn as_transposed<T: Scalar>(a: &Array2<T>) -> Array2<T> {
    let mut t = Array2::<T>::zeros((a.ncols(), a.nrows()));
    t.assign(&a.t());
    t
}

/// `D_X plan D_Y` for two 1D grids, in O(k^2 M N) element operations.
pub fn triple_product_1d<T: Scalar>(
    plan: &Array2<T>,
    gx: &UniformGrid1D<T>,
    gy: &UniformGrid1D<T>,
) -> Result<Array2<T>> {
    triple_product(plan, &Grid::Line(*gx), &Grid::Line(*gy))
}

/// `D_X plan D_Y` for two square 2D grids, in O(k^3 N^2) element operations
/// for N = n^2 plan rows.
pub fn triple_product_2d<T: Scalar>(
    plan: &Array2<T>,
    gx: &UniformGrid2D<T>,
    gy: &UniformGrid2D<T>,
) -> Result<Array2<T>> {
    triple_product(plan, &Grid::Square(*gx), &Grid::Square(*gy))
}
