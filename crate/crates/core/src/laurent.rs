//! Finitely supported Laurent series `f(z) = sum_i f_i z^i` with real coefficients.
//!
//! These are the symbols of the Toeplitz parts of every matrix in the crate.
//! The Wiener norm `||f||_w = sum_i |f_i|` is always finite here because the
//! support is finite.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral;

/// Relative size of a tail that arithmetic is allowed to drop.
const ARITH_TRIM: f64 = 1e-15;


#[derive(Clone, Debug, PartialEq, Default)]
pub struct LaurentSeries {
    lo: i64,
    coeffs: Vec<f64>,
}

impl LaurentSeries {
    /// Builds the series `sum_k coeffs[k] z^(lo + k)`, stripping exact zeros at both ends.
    pub fn new(lo: i64, coeffs: Vec<f64>) -> Self {
        let mut s = Self { lo, coeffs };
        s.strip_zeros();
        s
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::new(0, vec![c])
    }

    pub fn monomial(exponent: i64, c: f64) -> Self {
        Self::new(exponent, vec![c])
    }

    /// Builds a series from `(exponent, coefficient)` pairs; repeated exponents add up.
    pub fn from_terms(terms: &[(i64, f64)]) -> Self {
        let Some(lo) = terms.iter().map(|t| t.0).min() else {
            return Self::zero();
        };
        let hi = terms.iter().map(|t| t.0).max().unwrap();
        let mut coeffs = vec![0.0; (hi - lo + 1) as usize];
        for &(e, c) in terms {
            coeffs[(e - lo) as usize] += c;
        }
        Self::new(lo, coeffs)
    }

    fn strip_zeros(&mut self) {
        let Some(first) = self.coeffs.iter().position(|&c| c != 0.0) else {
            self.lo = 0;
            self.coeffs.clear();
            return;
        };
        let last = self.coeffs.iter().rposition(|&c| c != 0.0).unwrap();
        self.coeffs.truncate(last + 1);
        self.coeffs.drain(..first);
        self.lo += first as i64;
    }

    /// Smallest stored exponent (0 for the zero series).
    pub fn lo(&self) -> i64 {
        self.lo
    }

    /// Largest stored exponent (`lo - 1` for the zero series).
    pub fn hi(&self) -> i64 {
        self.lo + self.coeffs.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `z^exponent` (zero outside the support).
    pub fn coeff(&self, exponent: i64) -> f64 {
        let k = exponent - self.lo;
        if k < 0 {
            return 0.0;
        }
        self.coeffs.get(k as usize).copied().unwrap_or(0.0)
    }

    /// Iterator over `(exponent, coefficient)` pairs of the stored range.
    pub fn terms(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.coeffs.iter().enumerate().map(move |(k, &c)| (self.lo + k as i64, c))
    }

    pub fn wiener_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// `f(1)`, the plain coefficient sum.
    pub fn value_at_one(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// Evaluates the series at a point of the unit circle.
    ///
    /// Positive and negative powers are each summed by Horner's rule.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        assert!(
            (z.norm() - 1.0).abs() <= 1e-12,
            "eval expects |z| = 1, got |z| = {}",
            z.norm()
        );
        let mut pos = Complex64::default();
        let e0 = self.lo.max(0);
        if self.hi() >= e0 {
            for e in (e0..=self.hi()).rev() {
                pos = pos * z + self.coeff(e);
            }
            pos *= z.powi(e0 as i32);
        }
        let mut neg = Complex64::default();
        let w = z.conj();
        let d0 = (-self.hi()).max(1);
        if -self.lo >= d0 {
            for d in (d0..=-self.lo).rev() {
                neg = neg * w + self.coeff(-d);
            }
            neg *= w.powi(d0 as i32);
        }
        pos + neg
    }

    /// Coefficientwise `self * c`.
    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.lo, self.coeffs.iter().map(|x| x * c).collect())
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        if self.is_zero() {
            return other.scale(sign);
        }
        if other.is_zero() {
            return self.clone();
        }
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let mut coeffs = vec![0.0; (hi - lo + 1) as usize];
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs[(self.lo - lo) as usize + k] += c;
        }
        for (k, c) in other.coeffs.iter().enumerate() {
            coeffs[(other.lo - lo) as usize + k] += sign * c;
        }
        let mut out = Self::new(lo, coeffs);
        out.trim_relative(ARITH_TRIM);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, -1.0)
    }

    /// Exact product (coefficient convolution); the support is the Minkowski sum.
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let coeffs = spectral::convolve(&self.coeffs, &other.coeffs);
        let mut out = Self::new(self.lo + other.lo, coeffs);
        out.trim_relative(ARITH_TRIM);
        out
    }

    /// First or second derivative with respect to `z`.
    pub fn derivative(&self, order: u32) -> Self {
        assert!(order == 1 || order == 2, "derivative order must be 1 or 2");
        let mut terms = Vec::with_capacity(self.len());
        for (e, c) in self.terms() {
            let factor = if order == 1 { e as f64 } else { (e * (e - 1)) as f64 };
            terms.push((e - order as i64, factor * c));
        }
        Self::from_terms(&terms)
    }

    /// Drops the largest end segments whose absolute sum stays below `rel * ||self||_w`.
    fn trim_relative(&mut self, rel: f64) {
        let tol = rel * self.wiener_norm();
        if tol > 0.0 {
            self.truncate_tails(tol);
        }
    }

    /// Removes coefficients from both ends, smallest end first, while the total removed
    /// mass stays `<= tol`. Returns the removed mass.
    pub fn truncate_tails(&mut self, tol: f64) -> f64 {
        let mut dropped = 0.0;
        let (mut start, mut end) = (0usize, self.coeffs.len());
        while start < end {
            let left = self.coeffs[start].abs();
            let right = self.coeffs[end - 1].abs();
            let (take_left, mass) = if left <= right { (true, left) } else { (false, right) };
            if dropped + mass > tol {
                break;
            }
            dropped += mass;
            if take_left {
                start += 1;
            } else {
                end -= 1;
            }
        }
        self.coeffs.truncate(end);
        self.coeffs.drain(..start);
        self.lo += start as i64;
        self.strip_zeros();
        dropped
    }

    /// Removes coefficients of modulus `<= threshold` from both ends. Returns the removed mass.
    pub fn trim_below(&mut self, threshold: f64) -> f64 {
        let start = self.coeffs.iter().position(|c| c.abs() > threshold).unwrap_or(self.coeffs.len());
        let end = self.coeffs.iter().rposition(|c| c.abs() > threshold).map_or(start, |i| i + 1);
        let dropped = self.coeffs[..start].iter().chain(&self.coeffs[end..]).map(|c| c.abs()).sum();
        self.coeffs.truncate(end);
        self.coeffs.drain(..start);
        self.lo += start as i64;
        self.strip_zeros();
        dropped
    }

    /// Keeps only exponents in `lo..=hi`.
    pub fn restrict(&self, lo: i64, hi: i64) -> Self {
        if self.is_zero() || hi < lo {
            return Self::zero();
        }
        let a = lo.max(self.lo);
        let b = hi.min(self.hi());
        if b < a {
            return Self::zero();
        }
        let s = (a - self.lo) as usize;
        let e = (b - self.lo) as usize;
        Self::new(a, self.coeffs[s..=e].to_vec())
    }

    /// Sum of the coefficients with exponent `<= exponent`.
    pub fn lower_tail_sum(&self, exponent: i64) -> f64 {
        self.terms().take_while(|(e, _)| *e <= exponent).map(|(_, c)| c).sum()
    }

    /// Values at `w^i`, `i = 0..m`, with `w = exp(2 pi i / m)`.
    pub fn sample_roots_of_unity(&self, m: usize) -> Vec<Complex64> {
        spectral::sample_roots_of_unity(self.lo, &self.coeffs, m)
    }

    /// Text form: a `lo k` header line followed by `k` coefficients, one per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {}", self.lo, self.coeffs.len()).unwrap();
        for c in &self.coeffs {
            writeln!(s, "{c:.16e}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what}")))
        };
        let lo: i64 = next("lo")?
            .parse()
            .map_err(|e| Error::Parse(format!("bad lo: {e}")))?;
        let k: usize = next("count")?
            .parse()
            .map_err(|e| Error::Parse(format!("bad count: {e}")))?;
        let mut coeffs = Vec::with_capacity(k);
        for _ in 0..k {
            let c: f64 = next("coefficient")?
                .parse()
                .map_err(|e| Error::Parse(format!("bad coefficient: {e}")))?;
            coeffs.push(c);
        }
        Ok(Self::new(lo, coeffs))
    }
}

/// Recovers the Laurent polynomial `sum_{j=-n+1..n} c_j z^j` taking the given values at
/// `w^i`, `i = 0..m`, `m = 2n`, `w = exp(2 pi i / m)`.
///
/// FFT slot `j` holds exponent `j` for `j <= n` and exponent `j - m` above that.
/// Imaginary parts are dropped; callers interpolate real symbols, so they are roundoff.
pub fn interpolate_roots_of_unity(values: &[Complex64]) -> Result<LaurentSeries> {
    let m = values.len();
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::SizeNotPowerOfTwo(m));
    }
    let n = m / 2;
    let slots = spectral::dft_coefficients(values);
    let mut coeffs = Vec::with_capacity(m);
    // exponents -n+1 ..= n
    for e in -(n as i64) + 1..=n as i64 {
        let slot = e.rem_euclid(m as i64) as usize;
        coeffs.push(slots[slot].re);
    }
    Ok(LaurentSeries::new(-(n as i64) + 1, coeffs))
}

impl Add for &LaurentSeries {
    type Output = LaurentSeries;
    fn add(self, rhs: Self) -> LaurentSeries {
        LaurentSeries::add(self, rhs)
    }
}

impl Sub for &LaurentSeries {
    type Output = LaurentSeries;
    fn sub(self, rhs: Self) -> LaurentSeries {
        LaurentSeries::sub(self, rhs)
    }
}

impl Mul for &LaurentSeries {
    type Output = LaurentSeries;
    fn mul(self, rhs: Self) -> LaurentSeries {
        LaurentSeries::mul(self, rhs)
    }
}

impl Neg for &LaurentSeries {
    type Output = LaurentSeries;
    fn neg(self) -> LaurentSeries {
        self.scale(-1.0)
    }
}
