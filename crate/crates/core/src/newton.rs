//! Newton's iteration `X_{k+1} = X_k - Z_k` where `Z_k` solves
//! `(A_1 X_k + A_0 - I) Z_k + A_1 Z_k X_k = L(X_k)`.
//!
//! The Sylvester equation is solved through `Z = -sum_i S^i V X^i` with
//! `S = (I - A_0 - A_1 X)^-1 A_1` and `V = (I - A_0 - A_1 X)^-1 L(X)`.

use crate::conditioning::constants;
use crate::error::{Error, Result};
use crate::fixedpoint::{l_of, solve, FpConfig, SolveReport, Start, StopReason, Variant, DEFAULT_EPS_RESIDUAL};
use crate::models::QbdModel;
use crate::qtmat::{neumann_inverse, Correction, QtMatrix, ITERATION_TOL};

/// Number of `F3` steps used by [`fixed_point_warm_start`].
pub const WARM_START_STEPS: usize = 15;

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonConfig {
    pub eps_residual: f64,
    pub max_iter: usize,
    pub sylvester_tol: f64,
    pub compress_tol: f64,
    pub warm_start: Option<QtMatrix>,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            eps_residual: DEFAULT_EPS_RESIDUAL,
            max_iter: 50,
            sylvester_tol: DEFAULT_EPS_RESIDUAL / 100.0,
            compress_tol: ITERATION_TOL,
            warm_start: None,
        }
    }
}

impl NewtonConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eps_residual > 0.0 && self.sylvester_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !(self.compress_tol >= 0.0) {
            return Err(Error::InvalidParameter("compress_tol must be nonnegative".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SylvesterSolution {
    pub z: QtMatrix,
    /// Number of series terms summed.
    pub terms: usize,
    /// `||(A_1 X + A_0 - I) Z + A_1 Z X - rhs||_inf`.
    pub residual: f64,
}

/// Largest number of doublings tried in [`sylvester_series`].
pub const MAX_DOUBLINGS: usize = 60;

/// Solves `(A_1 X + A_0 - I) Z + A_1 Z X = rhs`.
///
/// The series is summed by doubling, `Z_2n = Z_n + S^n Z_n X^n`. Since
/// `Z = sum_j S^(jn) Z_n X^(jn)`, the neglected tail is at most `||Z_n|| q / (1 - q)` for any
/// `q >= ||S^n|| ||X^n||` below one. Summing stops once this is at most `tol`; the result is
/// checked by substitution against `10 tol`.
///
/// Once the symbol of `S^n` has vanished, `S^n` is a correction with `c` columns and only
/// the leading rows of `X^n` enter `S^n Z_n X^n`; from then on only those rows are kept.
/// This matters when `X` is close to a stochastic matrix: the correction of `X^n` then
/// grows about linearly in `n` while its leading rows stay narrow.
pub fn sylvester_series(model: &QbdModel, x: &QtMatrix, rhs: &QtMatrix, tol: f64) -> Result<SylvesterSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let itol = (tol / 10.0).max(1e-17);
    let m = model.a_0.add(&model.a_1.mul(x)).scale(-1.0).shift(1.0);
    let m_inv = neumann_inverse(&m, itol)?;
    let mut sp = m_inv.mul(&model.a_1).compress(itol);
    let mut xp = x.clone();
    let mut sum = m_inv.mul(rhs).compress(itol);
    let mut terms = 1;
    let mut doublings = 0;
    let done = |q: f64, sum: &QtMatrix| q < 1.0 && sum.inf_norm() * q / (1.0 - q) <= tol;
    let check = |q: f64, doublings: usize| {
        if doublings == MAX_DOUBLINGS {
            Err(Error::NotContraction { norm: q })
        } else {
            Ok(())
        }
    };
    loop {
        let q = sp.inf_norm() * xp.inf_norm();
        if done(q, &sum) {
            return finish(model, x, rhs, sum, terms, tol);
        }
        check(q, doublings)?;
        if sp.symbol().is_zero() && !sp.correction().is_empty() {
            break;
        }
        let step = sp.mul(&sum).mul(&xp);
        sum = sum.add(&step).compress(itol);
        sp = sp.mul(&sp).compress(itol);
        xp = xp.mul(&xp).compress(itol);
        terms *= 2;
        doublings += 1;
    }

    // S^n is a pure correction from here on
    let x_bound = xp.inf_norm();
    let need = sum.leading_rows(sp.correction().cols()).cols().max(1);
    let mut rows = 4 * need + 8 * xp.symbol().hi().max(0) as usize;
    loop {
        let stage = BlockStage { c: sp.correction().clone(), sum: sum.clone(), x_bound, terms, doublings };
        match stage.run(&xp, rows, itol, tol)? {
            Some((sum, terms)) => return finish(model, x, rhs, sum, terms, tol),
            None if rows < MAX_BLOCK_ROWS => rows *= 2,
            None => return Err(Error::SeriesBlockExhausted { rows }),
        }
    }
}

/// Largest number of leading rows of `X^n` kept by [`sylvester_series`].
pub const MAX_BLOCK_ROWS: usize = 1 << 14;

/// Doubling state once `S^n` has no Toeplitz part.
struct BlockStage {
    c: Correction,
    sum: QtMatrix,
    x_bound: f64,
    terms: usize,
    doublings: usize,
}

impl BlockStage {
    /// Continues the doubling on the leading `rows` rows of `X^n`. Returns `None` when the
    /// rows known exactly stop covering the columns the products read.
    fn run(mut self, xp: &QtMatrix, rows: usize, itol: f64, tol: f64) -> Result<Option<(QtMatrix, usize)>> {
        let mut y = xp.leading_rows(rows);
        // rows of `y` that are exact rows of X^n; rows past `y.rows()` are zero
        let mut valid = rows;
        loop {
            let lead = self.sum.leading_rows(self.c.cols());
            if lead.cols() > valid {
                return Ok(None);
            }
            let step = self.c.matmul(&lead.matmul(&y));
            self.sum = self.sum.add(&QtMatrix::from_correction(step)).compress(itol);
            self.c = self.c.matmul(&self.c);
            self.c.compress(itol);
            // row r of Y^2 is exact when row r of Y reads only exact rows
            let exact = (0..y.rows()).find(|&r| last_nonzero(y.row(r)).is_some_and(|j| j >= valid)).unwrap_or(valid);
            y = y.head_rows(exact).matmul(&y);
            y.compress(itol);
            valid = exact;
            self.x_bound *= self.x_bound;
            self.terms *= 2;
            self.doublings += 1;
            let q = self.c.inf_norm() * self.x_bound;
            if q < 1.0 && self.sum.inf_norm() * q / (1.0 - q) <= tol {
                return Ok(Some((self.sum, self.terms)));
            }
            if self.doublings == MAX_DOUBLINGS {
                return Err(Error::NotContraction { norm: q });
            }
        }
    }
}

fn last_nonzero(row: &[f64]) -> Option<usize> {
    row.iter().rposition(|&v| v != 0.0)
}

fn finish(model: &QbdModel, x: &QtMatrix, rhs: &QtMatrix, sum: QtMatrix, terms: usize, tol: f64) -> Result<SylvesterSolution> {
    let z = sum.scale(-1.0);
    let lhs = model.a_1.mul(x).add(&model.a_0).shift(-1.0).mul(&z).add(&model.a_1.mul(&z).mul(x));
    let residual = lhs.sub(rhs).inf_norm();
    let bound = 10.0 * tol;
    if residual > bound {
        return Err(Error::BackSubstitutionFailed { residual, bound });
    }
    Ok(SylvesterSolution { z, terms, residual })
}

/// `WARM_START_STEPS` steps of `F3` from zero.
pub fn fixed_point_warm_start(model: &QbdModel) -> Result<QtMatrix> {
    let mut cfg = FpConfig::new(Variant::F3, Start::Zero);
    cfg.max_iter = WARM_START_STEPS;
    cfg.eps_residual = f64::MIN_POSITIVE;
    Ok(solve(model, &cfg, None)?.solution)
}

/// Newton's iteration from `cfg.warm_start`, or from zero.
pub fn newton_solve(model: &QbdModel, cfg: &NewtonConfig) -> Result<SolveReport> {
    newton_observed(model, cfg, |_, _| {})
}

/// As [`newton_solve`], calling `observe(k, X_k)` on every iterate including the start.
pub fn newton_observed(
    model: &QbdModel,
    cfg: &NewtonConfig,
    mut observe: impl FnMut(usize, &QtMatrix),
) -> Result<SolveReport> {
    cfg.validate()?;
    let mut x = cfg.warm_start.clone().unwrap_or_else(QtMatrix::zero);
    let mut residuals = Vec::new();
    let mut dims = Vec::new();
    let mut step_norms = Vec::new();
    let mut terms = Vec::new();
    let mut checks = Vec::new();
    let mut stop_reason = StopReason::MaxIterExceeded;
    for k in 0.. {
        observe(k, &x);
        let l = l_of(model, &x);
        let res = l.inf_norm();
        residuals.push(res);
        dims.push(x.correction().dims());
        if res <= cfg.eps_residual {
            stop_reason = StopReason::Converged;
            break;
        }
        if k == cfg.max_iter {
            break;
        }
        let step = sylvester_series(model, &x, &l, cfg.sylvester_tol)?;
        step_norms.push(step.z.inf_norm());
        terms.push(step.terms);
        checks.push(step.residual);
        x = x.sub(&step.z).compress(cfg.compress_tol);
    }
    Ok(SolveReport {
        iterations: residuals.len() - 1,
        solution: x,
        residuals,
        correction_dims_history: dims,
        stop_reason,
        rate_constants: constants(model),
        h_norms: None,
        step_norms,
        sylvester_terms: terms,
        sylvester_residuals: checks,
    })
}
