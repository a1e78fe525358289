//! Conditioning constants and first-order perturbation bounds for `G`.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fixedpoint::{SolveReport, StopReason};
use crate::laurent::{interpolate_roots_of_unity, LaurentSeries};
use crate::models::{jackson, JacksonParams, QbdModel, FLIPPED_CASES};
use crate::newton::{newton_solve, NewtonConfig};
use crate::qtmat::{neumann_inverse, QtMatrix};
use crate::symbolsolve::{compute_symbol, symbol_at_stage, SymbolResult};

/// Contraction and conditioning constants read off the symbols at `z = 1`.
///
/// The full constants need the drift condition on both the interior and the boundary;
/// when it fails they are `None` and only the interior quantities are available.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateConstants {
    /// `min(a_-1(1), b_-1(1))`.
    pub theta: Option<f64>,
    /// `max(a_1(1)/a_-1(1), b_1(1)/b_-1(1))`.
    pub gamma: Option<f64>,
    /// `1 - min(a_-1(1) - a_1(1), b_-1(1) - b_1(1))`.
    pub sigma: Option<f64>,
    /// `min(gamma, sigma)`.
    pub tau: Option<f64>,
    /// `a_1(1) / a_-1(1)`.
    pub interior_gamma: f64,
    /// `1 - (a_-1(1) - a_1(1))`.
    pub interior_sigma: f64,
}

/// Values of `a_-1, a_1, b_-1, b_1` at one.
fn values_at_one(model: &QbdModel) -> (f64, f64, f64, f64) {
    (
        model.interior[0].value_at_one(),
        model.interior[2].value_at_one(),
        model.boundary[0].value_at_one(),
        model.boundary[2].value_at_one(),
    )
}

pub fn constants(model: &QbdModel) -> RateConstants {
    let (am, ap, bm, bp) = values_at_one(model);
    let holds = am > ap && bm > bp;
    let theta = am.min(bm);
    let gamma = (ap / am).max(bp / bm);
    let sigma = 1.0 - (am - ap).min(bm - bp);
    RateConstants {
        theta: holds.then_some(theta),
        gamma: holds.then_some(gamma),
        sigma: holds.then_some(sigma),
        tau: holds.then_some(gamma.min(sigma)),
        interior_gamma: ap / am,
        interior_sigma: 1.0 - (am - ap),
    }
}

/// `(theta, gamma, sigma, tau)`, requiring `A_-1 1 > A_1 1`.
pub fn checked_constants(model: &QbdModel) -> Result<(f64, f64, f64, f64)> {
    let c = constants(model);
    match (c.theta, c.gamma, c.sigma, c.tau) {
        (Some(t), Some(g), Some(s), Some(u)) => Ok((t, g, s, u)),
        _ => {
            let (am, ap, bm, bp) = values_at_one(model);
            Err(Error::DriftViolation(format!(
                "a_-1(1) = {am}, a_1(1) = {ap}, b_-1(1) = {bm}, b_1(1) = {bp}"
            )))
        }
    }
}

/// Conditioning constants of a model with a solved `G`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditioningReport {
    pub theta: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub tau: f64,
    /// `1 / (theta (1 - gamma))`.
    pub cond_upper: f64,
    /// `1 / (a_-1(1) - a_1(1))`.
    pub toeplitz_cond: f64,
    /// `||W^-1|| / (1 - ||W^-1 A_1||)` with `W = I - A_0 - A_1 G`.
    pub cond_estimate: f64,
}

/// `W^-1` for `W = I - A_0 - A_1 G`.
pub fn w_inverse(model: &QbdModel, g: &QtMatrix) -> Result<QtMatrix> {
    let w = model.a_0.add(&model.a_1.mul(g)).scale(-1.0).shift(1.0);
    neumann_inverse(&w, INVERSE_TOL)
}

const INVERSE_TOL: f64 = 1e-16;

/// `1 / (theta (1 - gamma))`, the upper bound on the conditioning of `G`.
pub fn cond_upper(model: &QbdModel) -> Result<f64> {
    let (theta, gamma, _, _) = checked_constants(model)?;
    Ok(1.0 / (theta * (1.0 - gamma)))
}

/// `1 / (a_-1(1) - a_1(1))`, the conditioning of the Toeplitz part.
pub fn toeplitz_cond(model: &QbdModel) -> Result<f64> {
    checked_constants(model)?;
    let (am, ap, _, _) = values_at_one(model);
    Ok(1.0 / (am - ap))
}

pub fn conditioning_report(model: &QbdModel, g: &QtMatrix) -> Result<ConditioningReport> {
    let (theta, gamma, sigma, tau) = checked_constants(model)?;
    let w_inv = w_inverse(model, g)?;
    let r = w_inv.mul(&model.a_1).inf_norm();
    Ok(ConditioningReport {
        theta,
        gamma,
        sigma,
        tau,
        cond_upper: cond_upper(model)?,
        toeplitz_cond: toeplitz_cond(model)?,
        cond_estimate: w_inv.inf_norm() / (1.0 - r),
    })
}

/// Symbol perturbations `[delta_-1, delta_0, delta_1]`.
pub type SymbolDeltas = [LaurentSeries; 3];

/// First-order bound on `||delta_g||_w`: `(||delta_1||_w + ||delta_0||_w + ||delta_-1||_w) / (a_-1(1) - a_1(1))`.
pub fn toeplitz_bound(model: &QbdModel, deltas: &SymbolDeltas) -> Result<f64> {
    Ok(toeplitz_cond(model)? * deltas.iter().map(LaurentSeries::wiener_norm).sum::<f64>())
}

/// First-order change of `g`, `(delta_1 g^2 + delta_0 g + delta_-1) / (1 - 2 a_1 g - a_0)`,
/// interpolated on the `2n` points `symbol` was computed on.
pub fn first_order_delta_g(model: &QbdModel, deltas: &SymbolDeltas, symbol: &SymbolResult) -> Result<LaurentSeries> {
    checked_constants(model)?;
    let m = 2 * symbol.n;
    let g = symbol.g_hat.sample_roots_of_unity(m);
    let [_, a0, a1] = &model.interior;
    let (v0, v1) = (a0.sample_roots_of_unity(m), a1.sample_roots_of_unity(m));
    let d: Vec<Vec<Complex64>> = deltas.iter().map(|s| s.sample_roots_of_unity(m)).collect();
    let values: Vec<Complex64> = (0..m)
        .map(|i| {
            let num = d[2][i] * g[i] * g[i] + d[1][i] * g[i] + d[0][i];
            num / (1.0 - 2.0 * v1[i] * g[i] - v0[i])
        })
        .collect();
    interpolate_roots_of_unity(&values)
}

/// Relative perturbations of `lambda1, lambda2, mu1, mu2`, uniform in `[1e-8, 2e-8]`.
pub fn random_relative_perturbations(seed: u64) -> [f64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::array::from_fn(|_| rng.random_range(1e-8..=2e-8))
}

/// `params` with `lambda_i (1 + eps^lambda_i)` and `mu_i (1 + eps^mu_i)`, in the order
/// `lambda1, lambda2, mu1, mu2`.
pub fn perturb_params(params: &JacksonParams, rel: [f64; 4]) -> JacksonParams {
    JacksonParams {
        lambda1: params.lambda1 * (1.0 + rel[0]),
        lambda2: params.lambda2 * (1.0 + rel[1]),
        mu1: params.mu1 * (1.0 + rel[2]),
        mu2: params.mu2 * (1.0 + rel[3]),
        ..*params
    }
}

/// Measured changes and their first-order bounds for one perturbation draw.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationResult {
    pub relative: [f64; 4],
    /// `||g_pert - g||_w` on the common interpolation stage.
    pub delta_g: f64,
    /// Bound on `||delta_g||_w` from [`toeplitz_bound`].
    pub delta_g_bound: f64,
    /// `||delta_g||_w` predicted by [`first_order_delta_g`].
    pub delta_g_first_order: f64,
    /// `||G_pert - G||_inf`.
    pub delta_big_g: f64,
    /// `(||Delta_A_-1|| + ||Delta_A_0|| + ||Delta_A_1||) / (theta (1 - gamma))`.
    pub delta_big_g_bound: f64,
    /// `||W^-1|| ||Delta_A|| / (1 - ||W^-1 A_1||)` with `Delta_A = Delta_A_1 G^2 + Delta_A_0 G + Delta_A_-1`.
    pub delta_big_g_estimate: f64,
}

/// Solved Jackson case that perturbation draws are compared against.
#[derive(Clone, Debug)]
pub struct PerturbationBase {
    pub case: usize,
    pub model: QbdModel,
    pub symbol: SymbolResult,
    pub g: QtMatrix,
    pub report: ConditioningReport,
    params: JacksonParams,
    flipped: bool,
}

/// Symbol tolerance of the perturbation runs.
pub const SYMBOL_EPS: f64 = 1e-14;

impl PerturbationBase {
    /// Solves Jackson case `case` (flipped where needed) by Newton's method.
    pub fn new(case: usize) -> Result<Self> {
        let params = JacksonParams::case(case)?;
        let flipped = FLIPPED_CASES.contains(&case);
        let model = jackson(&params, flipped)?;
        let symbol = compute_symbol(&model, SYMBOL_EPS)?;
        let g = solved(newton_solve(&model, &NewtonConfig::default())?)?;
        let report = conditioning_report(&model, &g)?;
        Ok(Self { case, model, symbol, g, report, params, flipped })
    }

    /// Perturbs the rates by `rel` and measures the change in `g` and `G`.
    pub fn run(&self, rel: [f64; 4]) -> Result<PerturbationResult> {
        let model = jackson(&perturb_params(&self.params, rel), self.flipped)?;
        let symbol = symbol_at_stage(&model, self.symbol.n)?;
        let deltas: SymbolDeltas = std::array::from_fn(|i| model.interior[i].sub(&self.model.interior[i]));
        let first = first_order_delta_g(&self.model, &deltas, &self.symbol)?;
        let cfg = NewtonConfig { warm_start: Some(self.g.clone()), ..NewtonConfig::default() };
        let g = solved(newton_solve(&model, &cfg)?)?;

        let da: Vec<QtMatrix> = model.blocks().iter().zip(self.model.blocks()).map(|(p, b)| p.sub(b)).collect();
        let delta_a = da[2].mul(&self.g).mul(&self.g).add(&da[1].mul(&self.g)).add(&da[0]);
        let w_inv = w_inverse(&self.model, &self.g)?;
        let r = w_inv.mul(&self.model.a_1).inf_norm();
        Ok(PerturbationResult {
            relative: rel,
            delta_g: symbol.g_hat.sub(&self.symbol.g_hat).wiener_norm(),
            delta_g_bound: toeplitz_bound(&self.model, &deltas)?,
            delta_g_first_order: first.wiener_norm(),
            delta_big_g: g.sub(&self.g).inf_norm(),
            delta_big_g_bound: self.report.cond_upper * da.iter().map(QtMatrix::inf_norm).sum::<f64>(),
            delta_big_g_estimate: w_inv.inf_norm() * delta_a.inf_norm() / (1.0 - r),
        })
    }
}

fn solved(report: SolveReport) -> Result<QtMatrix> {
    match report.stop_reason {
        StopReason::Converged => Ok(report.solution),
        _ => Err(Error::MaxIterExceeded {
            iterations: report.iterations,
            residual: *report.residuals.last().unwrap(),
        }),
    }
}

/// One draw of the rate perturbation experiment on Jackson case `case`.
pub fn perturb_experiment(case: usize, seed: u64) -> Result<(ConditioningReport, PerturbationResult)> {
    let base = PerturbationBase::new(case)?;
    let res = base.run(random_relative_perturbations(seed))?;
    Ok((base.report, res))
}
