//! Fixed-point iterations for `G`:
//!
//! - `F1(X) = A_-1 + A_0 X + A_1 X^2`
//! - `F2(X) = (I - A_0)^-1 (A_-1 + A_1 X^2)`
//! - `F3(X) = (I - A_0 - A_1 X)^-1 A_-1`
//!
//! Each runs either on whole QT matrices or, when the start is built on `T(g)`, on the
//! correction `E` of `X = T(g) + E` only.

use crate::conditioning::{constants, RateConstants};
use crate::error::{Error, Result};
use crate::laurent::LaurentSeries;
use crate::models::QbdModel;
use crate::qtmat::{neumann_inverse, Correction, QtMatrix, ITERATION_TOL};
use crate::symbolsolve::trimmed_symbol;

/// Residual target used by the reference experiments.
pub const DEFAULT_EPS_RESIDUAL: f64 = 5e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    F1,
    F2,
    F3,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::F1, Variant::F2, Variant::F3];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Whole,
    CorrectionOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Start {
    Zero,
    Identity,
    ToeplitzOnly,
    ToeplitzStochastic,
}

impl Start {
    pub const ALL: [Start; 4] = [Start::Zero, Start::Identity, Start::ToeplitzOnly, Start::ToeplitzStochastic];

    fn needs_symbol(self) -> bool {
        matches!(self, Start::ToeplitzOnly | Start::ToeplitzStochastic)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FpConfig {
    pub variant: Variant,
    pub mode: Mode,
    pub start: Start,
    pub eps_residual: f64,
    pub max_iter: usize,
    pub compress_tol: f64,
    /// Also evaluate `||H_1||, ||H_2||, ||H_3||` at the final iterate.
    pub compute_h_norms: bool,
}

impl FpConfig {
    pub fn new(variant: Variant, start: Start) -> Self {
        Self {
            variant,
            mode: Mode::Whole,
            start,
            eps_residual: DEFAULT_EPS_RESIDUAL,
            max_iter: 5000,
            compress_tol: ITERATION_TOL,
            compute_h_norms: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps_residual > 0.0) {
            return Err(Error::InvalidParameter("eps_residual must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if !(self.compress_tol >= 0.0) {
            return Err(Error::InvalidParameter("compress_tol must be nonnegative".into()));
        }
        if self.mode == Mode::CorrectionOnly && !self.start.needs_symbol() {
            return Err(Error::InvalidParameter(
                "correction-only iterations need a start of the form T(g) + E".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterExceeded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub solution: QtMatrix,
    /// `residuals[k] = ||L(X_k)||_inf` for `k = 0..=iterations`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Correction dimensions of `X_k`, aligned with `residuals`.
    pub correction_dims_history: Vec<(usize, usize)>,
    pub stop_reason: StopReason,
    pub rate_constants: RateConstants,
    /// `||H_1||, ||H_2||, ||H_3||` at the final iterate, when requested.
    pub h_norms: Option<[f64; 3]>,
    /// Newton only: `||Z_k||_inf` per step.
    pub step_norms: Vec<f64>,
    /// Newton only: number of series terms used by each Sylvester solve.
    pub sylvester_terms: Vec<usize>,
    /// Newton only: back-substitution residual of each Sylvester solve.
    pub sylvester_residuals: Vec<f64>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().unwrap_or(&f64::INFINITY)
    }

    pub fn converged(&self) -> bool {
        self.stop_reason == StopReason::Converged
    }
}

/// `L(X) = A_1 X^2 + (A_0 - I) X + A_-1`.
pub fn l_of(model: &QbdModel, x: &QtMatrix) -> QtMatrix {
    let b = model.a_0.add(&model.a_1.mul(x)).shift(-1.0);
    model.a_m1.add(&b.mul(x))
}

/// `||L(X)||_inf`.
pub fn residual(model: &QbdModel, x: &QtMatrix) -> f64 {
    l_of(model, x).inf_norm()
}

/// Starting matrix; `g_hat` is needed for the Toeplitz starts.
pub fn make_start(model: &QbdModel, start: Start, g_hat: Option<&LaurentSeries>, tol: f64) -> Result<QtMatrix> {
    let _ = model;
    match start {
        Start::Zero => Ok(QtMatrix::zero()),
        Start::Identity => Ok(QtMatrix::identity()),
        Start::ToeplitzOnly | Start::ToeplitzStochastic => {
            let g = g_hat.ok_or_else(|| Error::InvalidParameter("this start needs the symbol g".into()))?;
            let t = QtMatrix::toeplitz(trimmed_symbol(g, tol));
            if start == Start::ToeplitzOnly {
                return Ok(t);
            }
            Ok(QtMatrix::new(t.symbol().clone(), stochastic_column(t.symbol(), tol)))
        }
    }
}

/// Column `v` with `v_i = 1 - (row sum i of T(g))`, cut after the last entry above `tol`.
fn stochastic_column(g: &LaurentSeries, tol: f64) -> Correction {
    let t = QtMatrix::toeplitz(g.clone());
    let reach = (-g.lo()).max(0) as usize + 1;
    let mut v = t.row_sums_defect(reach);
    while v.last().is_some_and(|x| x.abs() < tol.max(f64::MIN_POSITIVE)) {
        v.pop();
    }
    Correction::from_vec(v.len(), if v.is_empty() { 0 } else { 1 }, v)
}

/// Whole-matrix stepper with the inverse of `I - A_0` cached for `F2`.
struct WholeStepper<'a> {
    model: &'a QbdModel,
    variant: Variant,
    tol: f64,
    inv0: Option<QtMatrix>,
}

impl<'a> WholeStepper<'a> {
    fn new(model: &'a QbdModel, variant: Variant, tol: f64) -> Result<Self> {
        let inv0 = match variant {
            Variant::F2 => Some(neumann_inverse(&model.a_0.scale(-1.0).shift(1.0), inner_tol(tol))?),
            _ => None,
        };
        Ok(Self { model, variant, tol, inv0 })
    }

    /// Returns `F(X)` and `||L(X)||`.
    fn advance(&self, x: &QtMatrix) -> Result<(QtMatrix, f64)> {
        let m = self.model;
        let (mut next, res) = match self.variant {
            Variant::F1 => {
                let b = m.a_0.add(&m.a_1.mul(x));
                let next = m.a_m1.add(&b.mul(x));
                let res = next.sub(x).inf_norm();
                (next, res)
            }
            Variant::F2 => {
                let xx = x.mul(x);
                let p = m.a_m1.add(&m.a_1.mul(&xx));
                let res = p.add(&m.a_0.mul(x)).sub(x).inf_norm();
                (self.inv0.as_ref().unwrap().mul(&p), res)
            }
            Variant::F3 => {
                let mm = m.a_0.add(&m.a_1.mul(x)).scale(-1.0).shift(1.0);
                let res = m.a_m1.sub(&mm.mul(x)).inf_norm();
                let inv = neumann_inverse(&mm, inner_tol(self.tol))?;
                (inv.mul(&m.a_m1), res)
            }
        };
        next.compress_in_place(self.tol);
        Ok((next, res))
    }
}

fn inner_tol(tol: f64) -> f64 {
    tol.max(1e-16)
}

/// One application of `F1`, `F2` or `F3` to a whole QT matrix.
pub fn step_whole(model: &QbdModel, x: &QtMatrix, variant: Variant, compress_tol: f64) -> Result<QtMatrix> {
    Ok(WholeStepper::new(model, variant, compress_tol)?.advance(x)?.0)
}

/// Quantities fixed once `g` is known, for the correction-only recurrences.
#[derive(Clone, Debug)]
pub struct CorrectionPrecomp {
    pub variant: Variant,
    /// `T(g)` with `g` trimmed by [`trimmed_symbol`].
    pub tg: QtMatrix,
    /// Symbol of `A_1 T(g)^2 + (A_0 - I) T(g) + A_-1`; zero up to the accuracy of `g`.
    pub symbol_residual: LaurentSeries,
    /// Correction `F` of the same matrix.
    pub f: Correction,
    /// `F1`: `S = A_0 + A_1 T(g)`. `F2`: `S_hat = (I - A_0)^-1 A_1`. `F3`: `V_hat = (I - A_1 T(g) - A_0)^-1 A_1`.
    pub s: QtMatrix,
    /// `F2`: `S_tilde = (I - A_0)^-1 F`. `F3`: `V_tilde = (I - A_1 T(g) - A_0)^-1 F`. Unused for `F1`.
    pub s_tilde: QtMatrix,
    tol: f64,
}

impl CorrectionPrecomp {
    pub fn new(model: &QbdModel, variant: Variant, g_hat: &LaurentSeries, tol: f64) -> Result<Self> {
        let tg = QtMatrix::toeplitz(trimmed_symbol(g_hat, tol));
        let w = l_of(model, &tg);
        let (symbol_residual, f) = w.into_parts();
        let fq = QtMatrix::from_correction(f.clone());
        let itol = inner_tol(tol);
        let (s, s_tilde) = match variant {
            Variant::F1 => (model.a_0.add(&model.a_1.mul(&tg)), QtMatrix::zero()),
            Variant::F2 => {
                let inv = neumann_inverse(&model.a_0.scale(-1.0).shift(1.0), itol)?;
                (inv.mul(&model.a_1), inv.mul(&fq))
            }
            Variant::F3 => {
                let n = model.a_0.add(&model.a_1.mul(&tg)).scale(-1.0).shift(1.0);
                let inv = neumann_inverse(&n, itol)?;
                (inv.mul(&model.a_1), inv.mul(&fq))
            }
        };
        Ok(Self {
            variant,
            tg,
            symbol_residual,
            f,
            s: s.compress(tol),
            s_tilde: s_tilde.compress(tol),
            tol,
        })
    }

    pub fn whole(&self, e: &Correction) -> QtMatrix {
        QtMatrix::new(self.tg.symbol().clone(), e.clone())
    }
}

/// One step of the correction recurrence; returns the next correction and `||L(T(g) + E)||`.
pub fn step_correction(model: &QbdModel, e: &Correction, pre: &CorrectionPrecomp) -> Result<(Correction, f64)> {
    let eq = QtMatrix::from_correction(e.clone());
    let x = pre.whole(e);
    let fq = QtMatrix::from_correction(pre.f.clone());
    let rq = QtMatrix::toeplitz(pre.symbol_residual.clone());
    let (next, res) = match pre.variant {
        Variant::F1 => {
            // E' = F + (A_1 E + S) E + A_1 E T(g)
            let inner = model.a_1.mul(&eq).add(&pre.s);
            let next = fq.add(&inner.mul(&eq)).add(&model.a_1.mul(&eq.mul(&pre.tg)));
            // L(T(g) + E) = T(r) + E' - E
            let res = rq.add(&next).sub(&eq).inf_norm();
            (next, res)
        }
        Variant::F2 => {
            // Q = (T(g) + E) E + E T(g);  E' = S_hat Q + S_tilde
            let q = x.mul(&eq).add(&eq.mul(&pre.tg));
            let phi = fq.add(&model.a_0.mul(&eq)).add(&model.a_1.mul(&q));
            let res = rq.add(&phi).sub(&eq).inf_norm();
            (pre.s.mul(&q).add(&pre.s_tilde), res)
        }
        Variant::F3 => {
            // E' = V_hat E (I - A_1 (T(g) + E) - A_0)^-1 A_-1 + V_tilde
            let mm = model.a_0.add(&model.a_1.mul(&x)).scale(-1.0).shift(1.0);
            let res = model.a_m1.sub(&mm.mul(&x)).inf_norm();
            let xn = neumann_inverse(&mm, inner_tol(pre.tol))?.mul(&model.a_m1);
            (pre.s.mul(&eq.mul(&xn)).add(&pre.s_tilde), res)
        }
    };
    // the symbol of `next` is roundoff; the recurrence only carries the correction
    let (_, mut corr) = next.into_parts();
    corr.compress(pre.tol);
    Ok((corr, res))
}

/// Runs the configured iteration until `||L(X_k)|| <= eps_residual` or `max_iter` steps.
pub fn solve(model: &QbdModel, cfg: &FpConfig, g_hat: Option<&LaurentSeries>) -> Result<SolveReport> {
    solve_observed(model, cfg, g_hat, |_, _| {})
}

/// As [`solve`], calling `observe(k, X_k)` on every iterate including the start.
pub fn solve_observed(
    model: &QbdModel,
    cfg: &FpConfig,
    g_hat: Option<&LaurentSeries>,
    mut observe: impl FnMut(usize, &QtMatrix),
) -> Result<SolveReport> {
    cfg.validate()?;
    let start = make_start(model, cfg.start, g_hat, cfg.compress_tol)?;
    let mut residuals = Vec::new();
    let mut dims = Vec::new();
    let mut stop_reason = StopReason::MaxIterExceeded;
    let solution = match cfg.mode {
        Mode::Whole => {
            let stepper = WholeStepper::new(model, cfg.variant, cfg.compress_tol)?;
            let mut x = start;
            let mut k = 0;
            loop {
                observe(k, &x);
                let (next, res) = stepper.advance(&x)?;
                residuals.push(res);
                dims.push(x.correction().dims());
                if res <= cfg.eps_residual {
                    stop_reason = StopReason::Converged;
                    break;
                }
                if k == cfg.max_iter {
                    break;
                }
                x = next;
                k += 1;
            }
            x
        }
        Mode::CorrectionOnly => {
            let pre = CorrectionPrecomp::new(model, cfg.variant, g_hat.unwrap(), cfg.compress_tol)?;
            let mut e = start.into_parts().1;
            let mut k = 0;
            loop {
                observe(k, &pre.whole(&e));
                let (next, res) = step_correction(model, &e, &pre)?;
                residuals.push(res);
                dims.push(e.dims());
                if res <= cfg.eps_residual {
                    stop_reason = StopReason::Converged;
                    break;
                }
                if k == cfg.max_iter {
                    break;
                }
                e = next;
                k += 1;
            }
            pre.whole(&e)
        }
    };
    let h_norms = if cfg.compute_h_norms { Some(h_norms(model, &solution, cfg.compress_tol)?) } else { None };
    Ok(SolveReport {
        iterations: residuals.len() - 1,
        solution,
        residuals,
        correction_dims_history: dims,
        stop_reason,
        rate_constants: constants(model),
        h_norms,
        step_norms: Vec::new(),
        sylvester_terms: Vec::new(),
        sylvester_residuals: Vec::new(),
    })
}

/// `||A_0 + A_1 + A_1 G||`, `||(I - A_0)^-1 (A_1 + A_1 G)||`, `||(I - A_0 - A_1 G)^-1 A_1||`.
pub fn h_norms(model: &QbdModel, g: &QtMatrix, tol: f64) -> Result<[f64; 3]> {
    let a1g = model.a_1.mul(g);
    let a1_plus = model.a_1.add(&a1g);
    let h1 = model.a_0.add(&a1_plus).inf_norm();
    let itol = inner_tol(tol);
    let inv0 = neumann_inverse(&model.a_0.scale(-1.0).shift(1.0), itol)?;
    let h2 = inv0.mul(&a1_plus).inf_norm();
    let w = model.a_0.add(&a1g).scale(-1.0).shift(1.0);
    let h3 = neumann_inverse(&w, itol)?.mul(&model.a_1).inf_norm();
    Ok([h1, h2, h3])
}
