//! Finite truncations of a model, solved densely. Used as a reference for the leading
//! window of `G`; the truncated blocks lose mass in their last rows and are not augmented.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::models::QbdModel;

/// Leading `n x n` blocks `[A_-1, A_0, A_1]`.
#[derive(Clone, Debug)]
pub struct TruncatedModel {
    pub n: usize,
    pub blocks: [Mat<f64>; 3],
}

/// Smallest margin between `n` and the width of the model's structure.
pub const TRUNCATION_MARGIN: usize = 10;

/// Leading `n x n` blocks of `model`.
///
/// `n` must exceed the symbol supports and correction widths by [`TRUNCATION_MARGIN`].
pub fn truncate(model: &QbdModel, n: usize) -> Result<TruncatedModel> {
    let need = model
        .blocks()
        .iter()
        .map(|a| {
            let s = a.symbol();
            let support = if s.is_empty() { 0 } else { (s.hi() - s.lo()) as usize + 1 };
            let (r, c) = a.correction().dims();
            support + r.max(c)
        })
        .max()
        .unwrap_or(0)
        + TRUNCATION_MARGIN;
    if n < need {
        return Err(Error::InvalidParameter(format!("truncation size {n} is below {need}")));
    }
    let [am1, a0, a1] = model.blocks();
    Ok(TruncatedModel { n, blocks: [am1.window(n), a0.window(n), a1.window(n)] })
}

impl TruncatedModel {
    /// Wraps explicit square blocks of equal size.
    pub fn from_dense(blocks: [Mat<f64>; 3]) -> Result<Self> {
        let n = blocks[0].nrows();
        if blocks.iter().any(|b| b.nrows() != n || b.ncols() != n) || n == 0 {
            return Err(Error::InvalidParameter("blocks must be square of one common size".into()));
        }
        Ok(Self { n, blocks })
    }

    /// `||A_1 X^2 + (A_0 - I) X + A_-1||_inf`.
    pub fn residual(&self, x: MatRef<'_, f64>) -> f64 {
        let [am1, a0, a1] = &self.blocks;
        let l = a1 * (x * x) + a0 * x - x + am1;
        inf_norm(l.as_ref())
    }
}

/// Converged dense solution with its iteration count and residual.
#[derive(Clone, Debug)]
pub struct DenseSolution {
    pub g: Mat<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub fn inf_norm(a: MatRef<'_, f64>) -> f64 {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Nonzeros of a banded block, row by row.
struct Sparse(Vec<Vec<(usize, f64)>>);

impl Sparse {
    fn new(a: MatRef<'_, f64>) -> Self {
        Sparse((0..a.nrows()).map(|i| (0..a.ncols()).filter(|&j| a[(i, j)] != 0.0).map(|j| (j, a[(i, j)])).collect()).collect())
    }

    fn mul(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        let mut out = Mat::zeros(self.0.len(), x.ncols());
        for c in 0..x.ncols() {
            let col = x.col(c);
            for (i, row) in self.0.iter().enumerate() {
                out[(i, c)] = row.iter().map(|&(j, v)| v * col[j]).sum();
            }
        }
        out
    }
}

/// `F3` from zero: `X_{k+1} = (I - A_0 - A_1 X_k)^-1 A_-1`.
///
/// Since `L(X_{k+1}) = A_1 (X_{k+1} - X_k) X_{k+1}`, iteration stops once
/// `||A_1|| ||X_{k+1} - X_k|| ||X_{k+1}||` is at most `eps`.
pub fn dense_solve(tm: &TruncatedModel, eps: f64, max_iter: usize) -> Result<DenseSolution> {
    let [am1, a0, a1] = &tm.blocks;
    let a1_sparse = Sparse::new(a1.as_ref());
    let a1_norm = inf_norm(a1.as_ref());
    let base = Mat::<f64>::identity(tm.n, tm.n) - a0;
    let mut x = Mat::<f64>::zeros(tm.n, tm.n);
    let mut bound = f64::INFINITY;
    for k in 1..=max_iter {
        let m = &base - a1_sparse.mul(x.as_ref());
        let next = m.partial_piv_lu().solve(am1);
        bound = a1_norm * inf_norm((&next - &x).as_ref()) * inf_norm(next.as_ref());
        x = next;
        if bound <= eps {
            let residual = tm.residual(x.as_ref());
            return Ok(DenseSolution { g: x, iterations: k, residual });
        }
    }
    Err(Error::MaxIterExceeded { iterations: max_iter, residual: bound })
}

/// Logarithmic reduction for the same minimal solution, with quadratic convergence.
///
/// Starting from `B_-1 = (I - A_0)^-1 A_-1`, `B_1 = (I - A_0)^-1 A_1`, each step sets
/// `B_-1 <- (I - U)^-1 B_-1^2`, `B_1 <- (I - U)^-1 B_1^2` with `U = B_-1 B_1 + B_1 B_-1`, and adds
/// `T B_-1` to `G`, where `T` is the product of the previous `B_1`. Stops when that update
/// has norm at most `eps`.
pub fn dense_log_reduction(tm: &TruncatedModel, eps: f64, max_iter: usize) -> Result<DenseSolution> {
    let [am1, a0, a1] = &tm.blocks;
    let id = Mat::<f64>::identity(tm.n, tm.n);
    let lu = (&id - a0).partial_piv_lu();
    let mut down = lu.solve(am1);
    let mut up = lu.solve(a1);
    let mut g = down.clone();
    let mut t = up.clone();
    for k in 1..=max_iter {
        let u = &down * &up + &up * &down;
        let lu = (&id - u).partial_piv_lu();
        down = lu.solve(&down * &down);
        up = lu.solve(&up * &up);
        let step = &t * &down;
        let size = inf_norm(step.as_ref());
        g += step;
        if size <= eps {
            let residual = tm.residual(g.as_ref());
            return Ok(DenseSolution { g, iterations: k, residual });
        }
        t = &t * &up;
    }
    Err(Error::MaxIterExceeded { iterations: max_iter, residual: f64::NAN })
}

/// Largest entrywise difference of the leading `k x k` blocks.
pub fn window_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>, k: usize) -> f64 {
    let mut d: f64 = 0.0;
    for j in 0..k {
        for i in 0..k {
            d = d.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    d
}
