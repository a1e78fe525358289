//! Semi-infinite quasi-Toeplitz matrices `A = T(f) + E`.
//!
//! `T(f)` is the Toeplitz matrix with entries `f_{j-i}` and `E` is a correction
//! supported in a finite leading block. Indices are zero-based in the API: entry
//! `(i, j)` is row `i + 1`, column `j + 1` of the mathematical matrix.
//!
//! Products use the identity `T(u) T(v) = T(uv) - H(u-) H(v+)`, where the Hankel
//! product gives a correction with entries `-sum_{k>=0} u_{-(i+k)} v_{j+k}`.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use faer::{Accum, Mat, MatMut, MatRef, Par};

use crate::error::{Error, Result};
use crate::laurent::LaurentSeries;
use crate::spectral;

/// Compression tolerance used inside iterations.
pub const ITERATION_TOL: f64 = 1e-15;

/// Compression tolerance used for final outputs.
pub const OUTPUT_TOL: f64 = 1e-13;

/// Symbols shorter than this are applied by direct row updates instead of FFTs.
const SHORT_SYMBOL: usize = 48;

/// Dense row-major block holding the non-Toeplitz part of a QT matrix.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Correction {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Correction {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "correction data has the wrong length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut c = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            c.row_mut(i)[..r.len()].copy_from_slice(r);
        }
        c
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.rows && j < self.cols {
            self.data[i * self.cols + j]
        } else {
            0.0
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.data, self.rows, self.cols)
    }

    /// Row absolute sums `v_i = sum_j |e_ij|`.
    pub fn row_abs_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().map(|x| x.abs()).sum()).collect()
    }

    pub fn inf_norm(&self) -> f64 {
        self.row_abs_sums().into_iter().fold(0.0, f64::max)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * c).collect() }
    }

    fn resize(&mut self, rows: usize, cols: usize) {
        if rows == self.rows && cols == self.cols {
            return;
        }
        let mut data = vec![0.0; rows * cols];
        let keep_r = rows.min(self.rows);
        let keep_c = cols.min(self.cols);
        for i in 0..keep_r {
            data[i * cols..i * cols + keep_c].copy_from_slice(&self.row(i)[..keep_c]);
        }
        *self = Self { rows, cols, data };
    }

    /// `self += c * other`, growing `self` to the union of both windows.
    pub fn add_scaled(&mut self, other: &Correction, c: f64) {
        if other.is_empty() {
            return;
        }
        let rows = self.rows.max(other.rows);
        let cols = self.cols.max(other.cols);
        self.resize(rows, cols);
        for i in 0..other.rows {
            let dst = &mut self.data[i * cols..i * cols + other.cols];
            for (d, s) in dst.iter_mut().zip(other.row(i)) {
                *d += c * s;
            }
        }
    }

    /// `sum_k c_k E_k` over the union of the windows, allocated once.
    pub fn sum(terms: &[(&Correction, f64)]) -> Correction {
        let rows = terms.iter().map(|t| t.0.rows).max().unwrap_or(0);
        let cols = terms.iter().map(|t| t.0.cols).max().unwrap_or(0);
        let live: Vec<_> = terms.iter().filter(|t| !t.0.is_empty()).collect();
        if live.is_empty() {
            return Correction::empty();
        }
        if live.len() == 1 && live[0].0.dims() == (rows, cols) {
            let (e, c) = live[0];
            return if *c == 1.0 { (*e).clone() } else { e.scale(*c) };
        }
        let mut out = Correction::zeros(rows, cols);
        for (e, c) in live {
            for i in 0..e.rows {
                let dst = &mut out.data[i * cols..i * cols + e.cols];
                for (d, s) in dst.iter_mut().zip(e.row(i)) {
                    *d += c * s;
                }
            }
        }
        out
    }

    /// Rows `0..k`.
    pub fn head_rows(&self, k: usize) -> Correction {
        let k = k.min(self.rows);
        if k == 0 {
            return Self::empty();
        }
        Self { rows: k, cols: self.cols, data: self.data[..k * self.cols].to_vec() }
    }

    /// Product of two corrections; only `min(self.cols, other.rows)` inner terms are nonzero.
    pub fn matmul(&self, other: &Correction) -> Correction {
        let inner = self.cols.min(other.rows);
        if self.rows == 0 || other.cols == 0 || inner == 0 {
            return Correction::empty();
        }
        let mut out = Correction::zeros(self.rows, other.cols);
        let lhs = MatRef::from_row_major_slice_with_stride(&self.data, self.rows, inner, self.cols);
        let rhs = MatRef::from_row_major_slice(&other.data[..inner * other.cols], inner, other.cols);
        let dst = MatMut::from_row_major_slice_mut(&mut out.data, self.rows, other.cols);
        faer::linalg::matmul::matmul(dst, Accum::Replace, lhs, rhs, 1.0, Par::Seq);
        out
    }

    /// Drops trailing rows with absolute sum `<= tol`, then trailing columns whose
    /// suffix mass in every remaining row stays `<= tol`. Each row loses at most `tol`.
    pub fn compress(&mut self, tol: f64) {
        let sums = self.row_abs_sums();
        let mut rows = self.rows;
        while rows > 0 && sums[rows - 1] <= tol {
            rows -= 1;
        }
        let mut cols = self.cols;
        let mut suffix = vec![0.0; rows];
        'outer: while cols > 0 {
            let j = cols - 1;
            for (i, s) in suffix.iter_mut().enumerate() {
                let next = *s + self.data[i * self.cols + j].abs();
                if next > tol {
                    break 'outer;
                }
                *s = next;
            }
            cols -= 1;
        }
        if rows == 0 || cols == 0 {
            *self = Self::empty();
        } else {
            self.resize(rows, cols);
        }
    }
}

/// Semi-infinite matrix `T(symbol) + correction`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct QtMatrix {
    symbol: LaurentSeries,
    correction: Correction,
}

impl QtMatrix {
    pub fn new(symbol: LaurentSeries, correction: Correction) -> Self {
        Self { symbol, correction }
    }

    pub fn toeplitz(symbol: LaurentSeries) -> Self {
        Self { symbol, correction: Correction::empty() }
    }

    pub fn from_correction(correction: Correction) -> Self {
        Self { symbol: LaurentSeries::zero(), correction }
    }

    pub fn identity() -> Self {
        Self::toeplitz(LaurentSeries::constant(1.0))
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn symbol(&self) -> &LaurentSeries {
        &self.symbol
    }

    pub fn correction(&self) -> &Correction {
        &self.correction
    }

    pub fn into_parts(self) -> (LaurentSeries, Correction) {
        (self.symbol, self.correction)
    }

    /// Entry `(i, j)`, zero-based.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.symbol.coeff(j as i64 - i as i64) + self.correction.get(i, j)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { symbol: self.symbol.scale(c), correction: self.correction.scale(c) }
    }

    pub fn add(&self, other: &Self) -> Self {
        let correction = Correction::sum(&[(&self.correction, 1.0), (&other.correction, 1.0)]);
        Self { symbol: self.symbol.add(&other.symbol), correction }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let correction = Correction::sum(&[(&self.correction, 1.0), (&other.correction, -1.0)]);
        Self { symbol: self.symbol.sub(&other.symbol), correction }
    }

    /// Adds `c` to the diagonal.
    pub fn shift(&self, c: f64) -> Self {
        Self { symbol: self.symbol.add(&LaurentSeries::constant(c)), correction: self.correction.clone() }
    }

    /// Product `self * other`.
    ///
    /// The correction of the result collects the Hankel term of the two symbols, the
    /// Toeplitz-times-correction cross terms and the correction product. Only exact
    /// zeros are stripped; callers compress at their working tolerance.
    pub fn mul(&self, other: &Self) -> Self {
        let u = &self.symbol;
        let v = &other.symbol;
        let mut correction = Correction::sum(&[
            (&hankel_product(u, v), 1.0),
            (&toeplitz_times_correction(u, &other.correction), 1.0),
            (&correction_times_toeplitz(&self.correction, v), 1.0),
            (&self.correction.matmul(&other.correction), 1.0),
        ]);
        correction.compress(0.0);
        Self { symbol: u.mul(v), correction }
    }

    /// `sup_i sum_j |a_ij|`, exact.
    ///
    /// Rows past both the correction and the reach of the negative symbol
    /// coefficients all have sum `||f||_w`.
    pub fn inf_norm(&self) -> f64 {
        let f = &self.symbol;
        let wn = f.wiener_norm();
        let profile = RowProfile::new(f, |c| c.abs());
        let e = &self.correction;
        let explicit = e.rows().max((-f.lo()).max(0) as usize);
        let mut best = if f.is_zero() { 0.0 } else { wn };
        for i in 0..explicit {
            best = best.max(self.row_sum_with(i, &profile, |x| x.abs()));
        }
        best
    }

    fn row_sum_with(&self, i: usize, profile: &RowProfile, map: impl Fn(f64) -> f64) -> f64 {
        let e = &self.correction;
        let cols = e.cols();
        let mut total = 0.0;
        if i < e.rows() {
            let row = e.row(i);
            for (j, x) in row.iter().enumerate() {
                total += map(self.symbol.coeff(j as i64 - i as i64) + x);
            }
        } else {
            // columns covered by the correction window but with zero correction
            total += profile.range(-(i as i64), cols as i64 - 1 - i as i64);
        }
        // columns beyond the correction window: exponents >= cols - i
        total + profile.range(cols as i64 - i as i64, i64::MAX)
    }

    /// Signed row sums of rows `0..k`.
    pub fn row_sums(&self, k: usize) -> Vec<f64> {
        let profile = RowProfile::new(&self.symbol, |c| c);
        (0..k).map(|i| self.row_sum_with(i, &profile, |x| x)).collect()
    }

    /// `1 - (row sum)` for rows `0..k`.
    pub fn row_sums_defect(&self, k: usize) -> Vec<f64> {
        self.row_sums(k).into_iter().map(|s| 1.0 - s).collect()
    }

    /// Leading `k x k` block as a dense matrix.
    pub fn window(&self, k: usize) -> Mat<f64> {
        Mat::from_fn(k, k, |i, j| self.entry(i, j))
    }

    /// Rows `0..k` as a dense block wide enough to hold every nonzero entry.
    pub fn leading_rows(&self, k: usize) -> Correction {
        let f = &self.symbol;
        let e = &self.correction;
        let reach = if f.is_zero() { 0 } else { (k as i64 + f.hi()).max(0) as usize };
        let cols = reach.max(if k > 0 { e.cols() } else { 0 });
        let mut out = Correction::zeros(k, cols);
        for i in 0..k {
            let row = out.row_mut(i);
            for (ex, c) in f.terms() {
                let j = i as i64 + ex;
                if j >= 0 && (j as usize) < cols {
                    row[j as usize] += c;
                }
            }
            if i < e.rows() {
                for (d, s) in row.iter_mut().zip(e.row(i)) {
                    *d += s;
                }
            }
        }
        out.compress(0.0);
        out
    }

    /// Drops symbol tails and trailing correction rows/columns; the result differs
    /// from `self` by at most `2 tol` in the infinity norm.
    pub fn compress(&self, tol: f64) -> Self {
        let mut out = self.clone();
        out.compress_in_place(tol);
        out
    }

    pub fn compress_in_place(&mut self, tol: f64) {
        if tol > 0.0 {
            self.symbol.truncate_tails(tol);
        }
        self.correction.compress(tol);
    }

    /// Text dump: symbol block, then `rows cols` and the correction rows.
    pub fn to_text(&self) -> String {
        let mut s = self.symbol.to_text();
        let e = &self.correction;
        writeln!(s, "{} {}", e.rows(), e.cols()).unwrap();
        for i in 0..e.rows() {
            let line: Vec<String> = e.row(i).iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty dump".into()))?;
        let count: usize = header
            .split_whitespace()
            .nth(1)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad symbol header".into()))?;
        let mut sym_text = String::from(header);
        sym_text.push('\n');
        for _ in 0..count {
            sym_text.push_str(lines.next().ok_or_else(|| Error::Parse("truncated symbol".into()))?);
            sym_text.push('\n');
        }
        let symbol = LaurentSeries::from_text(&sym_text)?;
        let dims: Vec<usize> = lines
            .next()
            .ok_or_else(|| Error::Parse("missing correction header".into()))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| Error::Parse(format!("bad correction header: {e}"))))
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(Error::Parse("correction header needs rows and cols".into()));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = lines.next().ok_or_else(|| Error::Parse("truncated correction".into()))?;
            for t in line.split_whitespace() {
                data.push(t.parse().map_err(|e| Error::Parse(format!("bad entry: {e}")))?);
            }
        }
        if data.len() != rows * cols {
            return Err(Error::Parse("correction entry count mismatch".into()));
        }
        Ok(Self::new(symbol, Correction::from_vec(rows, cols, data)))
    }
}

/// Prefix sums of mapped symbol coefficients, for row sums over exponent ranges.
struct RowProfile {
    lo: i64,
    prefix: Vec<f64>,
}

impl RowProfile {
    fn new(f: &LaurentSeries, map: impl Fn(f64) -> f64) -> Self {
        let mut prefix = Vec::with_capacity(f.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &c in f.coeffs() {
            acc += map(c);
            prefix.push(acc);
        }
        Self { lo: f.lo(), prefix }
    }

    /// Sum over exponents in `a..=b`.
    fn range(&self, a: i64, b: i64) -> f64 {
        let n = self.prefix.len() as i64 - 1;
        let s = (a.max(self.lo) - self.lo).clamp(0, n);
        let e = (b.min(self.lo + n - 1) - self.lo + 1).clamp(0, n);
        if e <= s {
            0.0
        } else {
            self.prefix[e as usize] - self.prefix[s as usize]
        }
    }
}

/// Correction of `T(u) T(v) - T(uv)`: entries `-sum_{k>=0} u_{-(i+k)} v_{j+k}` (one-based).
pub(crate) fn hankel_product(u: &LaurentSeries, v: &LaurentSeries) -> Correction {
    let rows = (-u.lo()).max(0) as usize;
    let cols = v.hi().max(0) as usize;
    if rows == 0 || cols == 0 || u.is_zero() || v.is_zero() {
        return Correction::empty();
    }
    let mut c = Correction::zeros(rows, cols);
    // C[r][s] = C[r+1][s+1] - u_{-(r+1)} v_{s+1}, filled from the bottom-right.
    for r in (0..rows).rev() {
        let ur = u.coeff(-(r as i64) - 1);
        for s in (0..cols).rev() {
            let below = if r + 1 < rows && s + 1 < cols { c.data[(r + 1) * cols + s + 1] } else { 0.0 };
            c.data[r * cols + s] = below - ur * v.coeff(s as i64 + 1);
        }
    }
    c
}

/// `T(u) E`, a correction with `rows(E) - lo(u)` rows.
pub(crate) fn toeplitz_times_correction(u: &LaurentSeries, e: &Correction) -> Correction {
    if u.is_zero() || e.is_empty() {
        return Correction::empty();
    }
    let r = e.rows() as i64;
    let out_rows = (r - u.lo()).max(0) as usize;
    if out_rows == 0 {
        return Correction::empty();
    }
    let cols = e.cols();
    let mut out = Correction::zeros(out_rows, cols);
    if u.len() <= SHORT_SYMBOL {
        // row i receives u_{j-i} * row j
        for i in 0..out_rows as i64 {
            let j0 = (i + u.lo()).max(0);
            let j1 = (i + u.hi()).min(r - 1);
            if j1 < j0 {
                continue;
            }
            let dst = i as usize * cols;
            for j in j0..=j1 {
                let c = u.coeff(j - i);
                if c == 0.0 {
                    continue;
                }
                let src = e.row(j as usize);
                for (d, s) in out.data[dst..dst + cols].iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
        return out;
    }
    let gemm = (out_rows * e.rows() * cols) as f64 / GEMM_SPEEDUP;
    if gemm < fft_cost(e.rows() + u.len(), cols) {
        let block = toeplitz_block(u, out_rows, e.rows());
        gemm_into(&mut out, block.as_ref(), e.as_mat());
        return out;
    }
    // column-wise: out_p = sum_q u_{q-p} e_q is a convolution with the reversed symbol
    let kernel: Vec<f64> = u.coeffs().iter().rev().copied().collect();
    let mut conv = spectral::PairConvolver::new(&kernel, e.rows());
    let hi = u.hi();
    // output row p reads convolution index p + hi
    let p0 = (-hi).max(0) as usize;
    for j in (0..cols).step_by(2) {
        let two = j + 1 < cols;
        let res = conv.run(|buf| {
            for (i, c) in buf.iter_mut().take(e.rows()).enumerate() {
                let row = &e.data[i * cols..];
                c.re = row[j];
                if two {
                    c.im = row[j + 1];
                }
            }
        });
        let p1 = out_rows.min((res.len() as i64 - hi).max(0) as usize);
        for p in p0..p1 {
            let c = res[(p as i64 + hi) as usize];
            let dst = &mut out.data[p * cols + j..];
            dst[0] = c.re;
            if two {
                dst[1] = c.im;
            }
        }
    }
    out
}

/// `E T(v)`, a correction with `cols(E) + hi(v)` columns.
pub(crate) fn correction_times_toeplitz(e: &Correction, v: &LaurentSeries) -> Correction {
    if v.is_zero() || e.is_empty() {
        return Correction::empty();
    }
    let c = e.cols() as i64;
    let out_cols = (c + v.hi()).max(0) as usize;
    if out_cols == 0 {
        return Correction::empty();
    }
    // only exponents in [1 - c, out_cols - 1] can land in a column >= 0
    let vr = v.restrict(1 - c, out_cols as i64 - 1);
    if vr.is_zero() {
        return Correction::empty();
    }
    let rows = e.rows();
    let mut out = Correction::zeros(rows, out_cols);
    if vr.len() <= SHORT_SYMBOL {
        for i in 0..rows {
            let src = e.row(i);
            let dst = &mut out.data[i * out_cols..(i + 1) * out_cols];
            for (ex, coef) in vr.terms() {
                if coef == 0.0 {
                    continue;
                }
                // column p = q + ex
                let q0 = (-ex).max(0);
                let q1 = (c - 1).min(out_cols as i64 - 1 - ex);
                if q1 < q0 {
                    continue;
                }
                let (q0, q1) = (q0 as usize, q1 as usize);
                let p0 = (q0 as i64 + ex) as usize;
                for (d, s) in dst[p0..p0 + (q1 - q0 + 1)].iter_mut().zip(&src[q0..=q1]) {
                    *d += coef * s;
                }
            }
        }
        return out;
    }
    let gemm = (rows * e.cols() * out_cols) as f64 / GEMM_SPEEDUP;
    if gemm < fft_cost(e.cols() + vr.len(), rows) {
        let block = toeplitz_block(&vr, e.cols(), out_cols);
        gemm_into(&mut out, e.as_mat(), block.as_ref());
        return out;
    }
    let refs: Vec<&[f64]> = (0..rows).map(|i| e.row(i)).collect();
    let convs = spectral::convolve_batch(vr.coeffs(), &refs);
    let lo = vr.lo();
    for (i, conv) in convs.iter().enumerate() {
        let dst = &mut out.data[i * out_cols..(i + 1) * out_cols];
        for (p, d) in dst.iter_mut().enumerate() {
            let idx = p as i64 - lo;
            if idx >= 0 && (idx as usize) < conv.len() {
                *d = conv[idx as usize];
            }
        }
    }
    out
}

/// Rough cost units: one unit per multiply-add in the direct loops.
fn fft_cost(len: usize, count: usize) -> f64 {
    let size = len.next_power_of_two() as f64;
    // two signals share a transform; forward and inverse per pair
    3.0 * size * size.log2() * count.div_ceil(2) as f64
}

/// faer runs dense products far faster per multiply-add than the other kernels.
const GEMM_SPEEDUP: f64 = 12.0;

fn gemm_into(out: &mut Correction, lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) {
    let (r, c) = out.dims();
    let dst = MatMut::from_row_major_slice_mut(&mut out.data, r, c);
    faer::linalg::matmul::matmul(dst, Accum::Replace, lhs, rhs, 1.0, Par::Seq);
}

/// Dense block of `T(f)` covering rows `0..rows` and columns `0..cols`.
fn toeplitz_block(f: &LaurentSeries, rows: usize, cols: usize) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(rows, cols);
    for (e, c) in f.terms() {
        if c == 0.0 {
            continue;
        }
        // entries (i, i + e)
        let i0 = (-e).max(0) as usize;
        for i in i0..rows {
            let j = i as i64 + e;
            if j >= cols as i64 {
                break;
            }
            m[(i, j as usize)] = c;
        }
    }
    m
}

/// Doublings [`neumann_inverse`] tries before a power of `B` has norm below one.
pub const MAX_NEUMANN_DOUBLINGS: usize = 24;

/// Largest correction block, in entries, a power of `B` may reach during [`neumann_inverse`].
pub const MAX_NEUMANN_ENTRIES: usize = 1 << 24;

/// `M^{-1}` for `M = I - B` with `||B||_inf <= 1` and `||B^n||_inf < 1` for some power of two
/// `n`, by the doubling form of the Neumann series
/// `S_2n = sum_{i < 2n} B^i = (I + B^n) S_n`.
///
/// Since `M^{-1} = S_n sum_j B^(jn)`, once `q = ||B^n||_inf < 1` the discarded tail
/// `B^n M^{-1}` is at most `q ||S_n||_inf / (1 - q)`; doubling stops when this is at most `tol`.
/// Every partial product is compressed at `tol / 10`.
pub fn neumann_inverse(m: &QtMatrix, tol: f64) -> Result<QtMatrix> {
    let b = QtMatrix::identity().sub(m);
    let norm = b.inf_norm();
    if norm > 1.0 + 1e-12 {
        return Err(Error::NotContraction { norm });
    }
    let inner_tol = tol / 10.0;
    let tail = |q: f64, s: f64| q < 1.0 - 1e-12 && q * s / (1.0 - q) <= tol;
    let mut sum = QtMatrix::identity();
    let mut power = b;
    let mut power_norm = norm;
    for _ in 0..MAX_NEUMANN_DOUBLINGS {
        if tail(power_norm, sum.inf_norm()) {
            return Ok(sum);
        }
        let step = power.mul(&sum);
        sum = sum.add(&step);
        sum.compress_in_place(inner_tol);
        // ||B^2n|| <= q^2, which may already be enough
        if tail(power_norm * power_norm, sum.inf_norm()) {
            return Ok(sum);
        }
        power = power.mul(&power);
        power.compress_in_place(inner_tol);
        power_norm = power.inf_norm();
        let (r, c) = power.correction().dims();
        if r * c > MAX_NEUMANN_ENTRIES {
            return Err(Error::CorrectionTooLarge { entries: r * c, limit: MAX_NEUMANN_ENTRIES });
        }
    }
    Err(Error::NotContraction { norm: power_norm })
}

impl Add for &QtMatrix {
    type Output = QtMatrix;
    fn add(self, rhs: Self) -> QtMatrix {
        QtMatrix::add(self, rhs)
    }
}

impl Sub for &QtMatrix {
    type Output = QtMatrix;
    fn sub(self, rhs: Self) -> QtMatrix {
        QtMatrix::sub(self, rhs)
    }
}

impl Mul for &QtMatrix {
    type Output = QtMatrix;
    fn mul(self, rhs: Self) -> QtMatrix {
        QtMatrix::mul(self, rhs)
    }
}

impl Neg for &QtMatrix {
    type Output = QtMatrix;
    fn neg(self) -> QtMatrix {
        self.scale(-1.0)
    }
}
