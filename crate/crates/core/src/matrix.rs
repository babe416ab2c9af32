//! Finite two-player zero-sum matrix games.
//!
//! The row player maximizes. [`minimax_value`] solves the standard LP
//! reformulation with a dense tableau simplex under Bland's rule;
//! [`support_enumeration`] is a brute-force cross-check for small games.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Largest matrix dimension accepted by [`support_enumeration`].
pub const ENUMERATION_MAX_DIM: usize = 5;

const MAX_PIVOTS: usize = 10_000;

/// Dense row-major payoff matrix, payoffs to the row player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix needs at least one row and one column".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn constant(rows: usize, cols: usize, value: T) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols).map(<[T]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn min_entry(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_entry(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// `M y`: expected payoff of each row against the column mix `y`.
    pub fn row_payoffs(&self, y: &[T]) -> Vec<T> {
        self.data.chunks(self.cols).map(|r| dot(r, y)).collect()
    }

    /// `xᵀ M`: expected payoff of each column against the row mix `x`.
    pub fn col_payoffs(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (r, &xi) in self.data.chunks(self.cols).zip(x) {
            for (o, &m) in out.iter_mut().zip(r) {
                *o += xi * m;
            }
        }
        out
    }

    fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(|r| r.iter().map(|x| x.as_f64()).collect()).collect()
    }
}

/// Value and optimal mixed strategies of a matrix game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxSolution<T> {
    pub value: T,
    pub row_strategy: Vec<T>,
    pub col_strategy: Vec<T>,
    /// `max_i (M y)_i − min_j (xᵀ M)_j`, the duality gap of the returned pair.
    pub gap: T,
}

/// Saddle-point gap of a strategy pair.
pub fn saddle_gap<T: Scalar>(m: &Matrix<T>, x: &[T], y: &[T]) -> T {
    let upper = m.row_payoffs(y).into_iter().fold(T::neg_infinity(), T::max);
    let lower = m.col_payoffs(x).into_iter().fold(T::infinity(), T::min);
    upper - lower
}

/// Bilinear form `xᵀ M y`.
pub fn expected_payoff<T: Scalar>(m: &Matrix<T>, x: &[T], y: &[T]) -> Result<T> {
    if x.len() != m.rows() || y.len() != m.cols() {
        return Err(Error::Dimension(format!(
            "strategies of length {}/{} for a {}x{} matrix",
            x.len(),
            y.len(),
            m.rows(),
            m.cols()
        )));
    }
    Ok(dot(x, &m.row_payoffs(y)))
}

/// Exact minimax value of `m` by linear programming.
///
/// The matrix is affinely rescaled to entries in `[1, 2]`, which makes the
/// column player's LP `max Σy s.t. M'y ≤ 1, y ≥ 0` feasible at the slack basis
/// and bounded. The row strategy is read off the slack reduced costs.
pub fn minimax_value<T: Scalar>(m: &Matrix<T>, tol: T) -> Result<MinimaxSolution<T>> {
    if !(tol > T::zero()) {
        return Err(Error::Parameter("tolerance must be positive".into()));
    }
    let (rows, cols) = (m.rows(), m.cols());
    let lo = m.min_entry();
    let range = m.max_entry() - lo;
    if range == T::zero() {
        return Ok(MinimaxSolution {
            value: lo,
            row_strategy: unit(rows, 0),
            col_strategy: unit(cols, 0),
            gap: T::zero(),
        });
    }

    let width = cols + rows + 1;
    let rhs = width - 1;
    let mut tab = vec![T::zero(); (rows + 1) * width];
    for i in 0..rows {
        for j in 0..cols {
            tab[i * width + j] = (m.get(i, j) - lo) / range + T::one();
        }
        tab[i * width + cols + i] = T::one();
        tab[i * width + rhs] = T::one();
    }
    let obj = rows * width;
    for j in 0..cols {
        tab[obj + j] = T::one();
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();
    let eps = T::epsilon() * T::lit(1024.0);

    let mut pivots = 0;
    // Bland: lowest-index improving column.
    while let Some(enter) = (0..cols + rows).find(|&j| tab[obj + j] > eps) {
        let mut leave: Option<(usize, T)> = None;
        for i in 0..rows {
            let a = tab[i * width + enter];
            if a > eps {
                let ratio = tab[i * width + rhs] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((l, best)) => {
                        let tie = (ratio - best).abs() <= eps * (T::one() + best.abs());
                        if ratio < best && !tie || tie && basis[i] < basis[l] {
                            Some((i, ratio))
                        } else {
                            Some((l, best))
                        }
                    }
                };
            }
        }
        let Some((prow, _)) = leave else {
            return Err(solver_error(m, "unbounded LP"));
        };
        pivot(&mut tab, width, rows + 1, prow, enter);
        basis[prow] = enter;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(solver_error(m, "pivot cap exceeded"));
        }
    }

    let mut y = vec![T::zero(); cols];
    for (i, &b) in basis.iter().enumerate() {
        if b < cols {
            y[b] = tab[i * width + rhs].max(T::zero());
        }
    }
    let mut x: Vec<T> = (0..rows).map(|i| (-tab[obj + cols + i]).max(T::zero())).collect();
    let total = -tab[obj + rhs];
    if !(total > T::zero()) {
        return Err(solver_error(m, "degenerate optimum"));
    }
    normalize(&mut x).ok_or_else(|| solver_error(m, "empty row strategy"))?;
    normalize(&mut y).ok_or_else(|| solver_error(m, "empty column strategy"))?;

    let value = (T::one() / total - T::one()) * range + lo;
    let gap = saddle_gap(m, &x, &y).max(T::zero());
    if gap > tol {
        return Err(solver_error(m, &format!("saddle gap {gap:e} exceeds tolerance")));
    }
    Ok(MinimaxSolution { value, row_strategy: x, col_strategy: y, gap })
}

/// Brute-force solution by enumerating square supports.
///
/// Every matrix game has an extreme optimal pair supported on a square
/// nonsingular submatrix, so checking each `k×k` support's indifference
/// system against the full saddle conditions always finds one.
pub fn support_enumeration<T: Scalar>(m: &Matrix<T>) -> Result<MinimaxSolution<T>> {
    let (rows, cols) = (m.rows(), m.cols());
    if rows > ENUMERATION_MAX_DIM || cols > ENUMERATION_MAX_DIM {
        return Err(Error::Parameter(format!(
            "support enumeration limited to {ENUMERATION_MAX_DIM}x{ENUMERATION_MAX_DIM}, got {rows}x{cols}"
        )));
    }
    let scale = m.min_entry().abs().max(m.max_entry().abs());
    let eps = T::epsilon().sqrt() * T::lit(1e-2) * (T::one() + scale);

    let mut best: Option<MinimaxSolution<T>> = None;
    for k in 1..=rows.min(cols) {
        for row_set in subsets(rows, k) {
            for col_set in subsets(cols, k) {
                let Some(cand) = solve_support(m, &row_set, &col_set, eps) else {
                    continue;
                };
                if best.as_ref().is_none_or(|b| cand.gap < b.gap) {
                    best = Some(cand);
                }
            }
        }
    }
    best.ok_or_else(|| solver_error(m, "no support pair satisfies the saddle conditions"))
}

fn solve_support<T: Scalar>(
    m: &Matrix<T>,
    row_set: &[usize],
    col_set: &[usize],
    eps: T,
) -> Option<MinimaxSolution<T>> {
    let k = row_set.len();
    // Row mix x on row_set: Σ_i x_i M[i][j] − v = 0 for j in col_set, Σ x = 1.
    let mut a = vec![T::zero(); (k + 1) * (k + 1)];
    let mut b = vec![T::zero(); k + 1];
    for (r, &j) in col_set.iter().enumerate() {
        for (c, &i) in row_set.iter().enumerate() {
            a[r * (k + 1) + c] = m.get(i, j);
        }
        a[r * (k + 1) + k] = -T::one();
    }
    for c in 0..k {
        a[k * (k + 1) + c] = T::one();
    }
    b[k] = T::one();
    let xs = gauss_solve(a, b, k + 1)?;

    let mut a = vec![T::zero(); (k + 1) * (k + 1)];
    let mut b = vec![T::zero(); k + 1];
    for (r, &i) in row_set.iter().enumerate() {
        for (c, &j) in col_set.iter().enumerate() {
            a[r * (k + 1) + c] = m.get(i, j);
        }
        a[r * (k + 1) + k] = -T::one();
    }
    for c in 0..k {
        a[k * (k + 1) + c] = T::one();
    }
    b[k] = T::one();
    let ys = gauss_solve(a, b, k + 1)?;

    if xs[..k].iter().chain(&ys[..k]).any(|&p| p < -eps) {
        return None;
    }
    let mut x = vec![T::zero(); m.rows()];
    let mut y = vec![T::zero(); m.cols()];
    for (c, &i) in row_set.iter().enumerate() {
        x[i] = xs[c].max(T::zero());
    }
    for (c, &j) in col_set.iter().enumerate() {
        y[j] = ys[c].max(T::zero());
    }
    normalize(&mut x)?;
    normalize(&mut y)?;
    let value = xs[k];
    if (value - ys[k]).abs() > eps {
        return None;
    }
    let lower = m.col_payoffs(&x).into_iter().fold(T::infinity(), T::min);
    let upper = m.row_payoffs(&y).into_iter().fold(T::neg_infinity(), T::max);
    if lower < value - eps || upper > value + eps {
        return None;
    }
    Some(MinimaxSolution { value, row_strategy: x, col_strategy: y, gap: (upper - lower).max(T::zero()) })
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn gauss_solve<T: Scalar>(mut a: Vec<T>, mut b: Vec<T>, n: usize) -> Option<Vec<T>> {
    let scale = a.iter().fold(T::zero(), |s, x| s.max(x.abs()));
    let tiny = T::epsilon() * T::lit(1e3) * (T::one() + scale);
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap())?;
        if a[p * n + col].abs() <= tiny {
            return None;
        }
        if p != col {
            for c in 0..n {
                a.swap(p * n + c, col * n + c);
            }
            b.swap(p, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != T::zero() {
                for c in col..n {
                    let v = a[col * n + c];
                    a[r * n + c] -= f * v;
                }
                let v = b[col];
                b[r] -= f * v;
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let s: T = (r + 1..n).map(|c| a[r * n + c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn subsets(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..1 << n)
        .filter(move |mask| mask.count_ones() as usize == k)
        .map(move |mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect())
}

fn pivot<T: Scalar>(tab: &mut [T], width: usize, height: usize, prow: usize, pcol: usize) {
    let p = tab[prow * width + pcol];
    for c in 0..width {
        tab[prow * width + c] /= p;
    }
    for r in 0..height {
        if r == prow {
            continue;
        }
        let f = tab[r * width + pcol];
        if f == T::zero() {
            continue;
        }
        for c in 0..width {
            let v = tab[prow * width + c];
            tab[r * width + c] -= f * v;
        }
    }
}

fn normalize<T: Scalar>(p: &mut [T]) -> Option<()> {
    let s: T = p.iter().copied().sum();
    if !(s > T::zero()) {
        return None;
    }
    p.iter_mut().for_each(|x| *x /= s);
    Some(())
}

fn unit<T: Scalar>(n: usize, i: usize) -> Vec<T> {
    let mut v = vec![T::zero(); n];
    v[i] = T::one();
    v
}

fn solver_error<T: Scalar>(m: &Matrix<T>, reason: &str) -> Error {
    Error::Solver { reason: reason.to_string(), matrix: m.to_f64_rows() }
}
