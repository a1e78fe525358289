//! The symbol `g(z)` of the Toeplitz part of `G`, by evaluation and interpolation at
//! roots of unity.
//!
//! For each `|z| = 1`, `g(z)` is the root of minimum modulus of
//! `a_1(z) x^2 + (a_0(z) - 1) x + a_-1(z) = 0`. The interpolant `g_hat` on `m = 2n`
//! points overestimates every coefficient by at most `(g''(1) - g_hat''(1)) / (2n)`, which
//! gives the stopping rule.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::laurent::{interpolate_roots_of_unity, LaurentSeries};
use crate::models::QbdModel;

/// Largest `n` (half the number of interpolation points) tried before giving up.
pub const MAX_HALF_POINTS: usize = 1 << 22;

/// Relative modulus gap below which two roots count as tied.
pub const ROOT_TIE_TOL: f64 = 1e-10;

/// Outer coefficients of `g_hat` below this modulus are FFT rounding, not signal.
pub const NOISE_FLOOR: f64 = 1e-16;

/// Rounding level of an interpolated symbol: a few ulps of its Wiener norm, at least [`NOISE_FLOOR`].
pub fn noise_floor(g: &LaurentSeries) -> f64 {
    (8.0 * f64::EPSILON * g.wiener_norm()).max(NOISE_FLOOR)
}

const DRIFT_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolResult {
    pub g_hat: LaurentSeries,
    /// Half the number of interpolation points at exit.
    pub n: usize,
    /// `g''(1) - g_hat''(1)`, clamped at zero.
    pub delta_m: f64,
    pub g1: f64,
    pub gp1: f64,
    pub gpp1: f64,
    /// Set when `delta_m / m` stopped decreasing before reaching `eps`; `g_hat` is then
    /// the stage with the smallest bound.
    pub roundoff_limited: bool,
}

impl SymbolResult {
    /// Upper bound on `g_hat_j - g_j` for every stored coefficient.
    pub fn coefficient_error_bound(&self) -> f64 {
        self.delta_m / (2 * self.n) as f64
    }
}

/// Root of minimum modulus of `a1 x^2 + (a0 - 1) x + am1 = 0`.
///
/// Roots within relative modulus `tie_tol` of each other are resolved toward the
/// smaller principal argument.
pub fn min_modulus_root(am1: Complex64, a0: Complex64, a1: Complex64, tie_tol: f64) -> Result<Complex64> {
    let b = a0 - 1.0;
    if a1.norm() < 1e-300 {
        if b.norm() < 1e-300 {
            return Err(Error::DegenerateEquation);
        }
        return Ok(-am1 / b);
    }
    let sq = (b * b - 4.0 * a1 * am1).sqrt();
    let (dp, dm) = (-b + sq, -b - sq);
    let d = if dp.norm() >= dm.norm() { dp } else { dm };
    if d.norm() == 0.0 {
        // b = 0 and am1 = 0: double root at zero
        return Ok(Complex64::default());
    }
    let small = 2.0 * am1 / d;
    let large = d / (2.0 * a1);
    let (ms, ml) = (small.norm(), large.norm());
    if ml - ms <= tie_tol * ml && large.arg() < small.arg() {
        return Ok(large);
    }
    Ok(small)
}

/// `g(1)`, `g'(1)` and `g''(1)` from the derivatives of the functional equation at `z = 1`.
pub fn derivatives_at_one(model: &QbdModel) -> Result<(f64, f64, f64)> {
    let [am1, a0, a1] = &model.interior;
    let v = |s: &LaurentSeries, k: u32| if k == 0 { s.value_at_one() } else { s.derivative(k).value_at_one() };
    let (m, m1, m2) = (v(am1, 0), v(am1, 1), v(am1, 2));
    let (z, z1, z2) = (v(a0, 0), v(a0, 1), v(a0, 2));
    let (p, p1, p2) = (v(a1, 0), v(a1, 1), v(a1, 2));
    let g = if p > 0.0 { (m / p).min(1.0) } else { 1.0 };
    let denominator = 1.0 - 2.0 * p * g - z;
    if denominator <= DRIFT_FLOOR {
        return Err(Error::NullDrift { denominator });
    }
    let gp = (p1 * g * g + z1 * g + m1) / denominator;
    let gpp = (m2 + z2 * g + p2 * g * g + 2.0 * p * gp * gp + 2.0 * gp * (2.0 * g * p1 + z1)) / denominator;
    Ok((g, gp, gpp))
}

/// `g_hat` with rounding noise trimmed from both ends, then tails of mass `<= tol` dropped.
pub fn trimmed_symbol(g_hat: &LaurentSeries, tol: f64) -> LaurentSeries {
    let mut g = g_hat.clone();
    g.trim_below(noise_floor(g_hat));
    g.truncate_tails(tol);
    g
}

/// Interpolant of `g` on `2n` roots of unity.
pub fn interpolate_at(model: &QbdModel, n: usize) -> Result<LaurentSeries> {
    let m = 2 * n;
    let [am1, a0, a1] = &model.interior;
    let (vm, v0, v1) = (am1.sample_roots_of_unity(m), a0.sample_roots_of_unity(m), a1.sample_roots_of_unity(m));
    let roots = (0..m)
        .map(|i| min_modulus_root(vm[i], v0[i], v1[i], ROOT_TIE_TOL))
        .collect::<Result<Vec<_>>>()?;
    interpolate_roots_of_unity(&roots)
}

fn second_derivative_at_one(g: &LaurentSeries) -> f64 {
    g.terms().map(|(i, c)| (i * (i - 1)) as f64 * c).sum()
}

/// Doubles the number of points from `n = 4` until `delta_m / m <= eps`.
///
/// In exact arithmetic `delta_m / m` decreases with `n`. Rounding in `g_hat''(1)` grows
/// like `n^2`, so if the bound stops decreasing the previous stage is returned with
/// `roundoff_limited` set.
pub fn compute_symbol(model: &QbdModel, eps: f64) -> Result<SymbolResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let (g1, gp1, gpp1) = derivatives_at_one(model)?;
    let mut n = 4;
    let mut prev: Option<SymbolResult> = None;
    loop {
        let g_hat = interpolate_at(model, n)?;
        let delta_m = (gpp1 - second_derivative_at_one(&g_hat)).max(0.0);
        let cur = SymbolResult { g_hat, n, delta_m, g1, gp1, gpp1, roundoff_limited: false };
        let bound = cur.coefficient_error_bound();
        if bound <= eps {
            return Ok(cur);
        }
        if let Some(mut p) = prev.take() {
            if bound >= p.coefficient_error_bound() {
                p.roundoff_limited = true;
                return Ok(p);
            }
        }
        prev = Some(cur);
        n *= 2;
        if n > MAX_HALF_POINTS {
            return Err(Error::MaxPointsExceeded { max_points: 2 * MAX_HALF_POINTS });
        }
    }
}

/// `g_hat` on the same `2n` points as a previous run, for perturbation comparisons.
pub fn symbol_at_stage(model: &QbdModel, n: usize) -> Result<SymbolResult> {
    let (g1, gp1, gpp1) = derivatives_at_one(model)?;
    let g_hat = interpolate_at(model, n)?;
    let delta_m = (gpp1 - second_derivative_at_one(&g_hat)).max(0.0);
    Ok(SymbolResult { g_hat, n, delta_m, g1, gp1, gpp1, roundoff_limited: false })
}
