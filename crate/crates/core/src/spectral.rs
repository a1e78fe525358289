//! FFT plumbing shared by the symbol solver and the matrix products.
//!
//! Sign convention: samples are taken at `w^i` with `w = exp(2 pi i / m)`, so
//! evaluation is an unnormalized inverse DFT and interpolation is a forward
//! DFT scaled by `1/m`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn inverse_plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

fn use_fft(sig_len: usize, kernel_len: usize, signals: usize) -> bool {
    let short = sig_len.min(kernel_len);
    if short < 48 {
        return false;
    }
    let size = (sig_len + kernel_len - 1).next_power_of_two();
    let log = size.trailing_zeros() as usize;
    // direct: sig*kernel per signal; fft: roughly 6 size log(size) per pair of signals
    let direct = sig_len * kernel_len * signals;
    let fft = 3 * size * log * signals.max(2) + 6 * size * log;
    fft < direct
}

fn direct_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (o, &bj) in out[i..i + b.len()].iter_mut().zip(b) {
            *o += ai * bj;
        }
    }
}

/// Full linear convolution; the result has length `a.len() + b.len() - 1`.
pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    convolve_batch(a, &[b]).pop().unwrap()
}

/// Convolves each signal with `kernel`. All signals must have the same length.
pub(crate) fn convolve_batch(kernel: &[f64], signals: &[&[f64]]) -> Vec<Vec<f64>> {
    if signals.is_empty() {
        return Vec::new();
    }
    let n = signals[0].len();
    debug_assert!(signals.iter().all(|s| s.len() == n));
    if n == 0 || kernel.is_empty() {
        return vec![Vec::new(); signals.len()];
    }
    let out_len = n + kernel.len() - 1;
    if !use_fft(n, kernel.len(), signals.len()) {
        return signals
            .iter()
            .map(|s| {
                let mut out = vec![0.0; out_len];
                direct_into(s, kernel, &mut out);
                out
            })
            .collect();
    }

    let size = out_len.next_power_of_two();
    let fwd = forward_plan(size);
    let inv = inverse_plan(size);
    let mut scratch = vec![Complex64::default(); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];

    let mut khat: Vec<Complex64> = kernel.iter().map(|&k| Complex64::new(k, 0.0)).collect();
    khat.resize(size, Complex64::default());
    fwd.process_with_scratch(&mut khat, &mut scratch);
    let scale = 1.0 / size as f64;

    // Two real signals ride in one complex transform: (x + i y) * k = x*k + i y*k for real k.
    let mut results = Vec::with_capacity(signals.len());
    let mut buf = vec![Complex64::default(); size];
    for pair in signals.chunks(2) {
        buf.iter_mut().for_each(|c| *c = Complex64::default());
        for (c, &x) in buf.iter_mut().zip(pair[0]) {
            c.re = x;
        }
        if let Some(second) = pair.get(1) {
            for (c, &y) in buf.iter_mut().zip(*second) {
                c.im = y;
            }
        }
        fwd.process_with_scratch(&mut buf, &mut scratch);
        for (c, k) in buf.iter_mut().zip(&khat) {
            *c *= k;
        }
        inv.process_with_scratch(&mut buf, &mut scratch);
        results.push(buf[..out_len].iter().map(|c| c.re * scale).collect());
        if pair.len() == 2 {
            results.push(buf[..out_len].iter().map(|c| c.im * scale).collect());
        }
    }
    results
}

/// Repeated convolution with one kernel, two real signals per complex transform.
pub(crate) struct PairConvolver {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    khat: Vec<Complex64>,
    scratch: Vec<Complex64>,
    buf: Vec<Complex64>,
}

impl PairConvolver {
    /// Transform size fits convolutions of `kernel` with signals of length `sig_len`.
    pub(crate) fn new(kernel: &[f64], sig_len: usize) -> Self {
        let size = (sig_len + kernel.len() - 1).next_power_of_two();
        let fwd = forward_plan(size);
        let inv = inverse_plan(size);
        let scratch = vec![Complex64::default(); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
        let scale = 1.0 / size as f64;
        let mut khat: Vec<Complex64> = kernel.iter().map(|&k| Complex64::new(k * scale, 0.0)).collect();
        khat.resize(size, Complex64::default());
        let mut me = Self { fwd, inv, khat, scratch, buf: vec![Complex64::default(); size] };
        me.fwd.process_with_scratch(&mut me.khat, &mut me.scratch);
        me
    }

    /// `fill` writes the first signal into the real parts and the second into the
    /// imaginary parts of a zeroed buffer; the returned slice holds both convolutions
    /// the same way.
    pub(crate) fn run(&mut self, fill: impl FnOnce(&mut [Complex64])) -> &[Complex64] {
        self.buf.iter_mut().for_each(|c| *c = Complex64::default());
        fill(&mut self.buf);
        self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (c, k) in self.buf.iter_mut().zip(&self.khat) {
            *c *= k;
        }
        self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
        &self.buf
    }
}

/// Values `sum_j c_j w^{i j}` for `i = 0..m`, where `coeffs[k]` is the coefficient of
/// exponent `lo + k`.
pub(crate) fn sample_roots_of_unity(lo: i64, coeffs: &[f64], m: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::default(); m];
    let mi = m as i64;
    for (k, &c) in coeffs.iter().enumerate() {
        let slot = (lo + k as i64).rem_euclid(mi) as usize;
        buf[slot].re += c;
    }
    inverse_plan(m).process(&mut buf);
    buf
}

/// Coefficients `(1/m) sum_i v_i w^{-i j}` for slots `j = 0..m`.
pub(crate) fn dft_coefficients(values: &[Complex64]) -> Vec<Complex64> {
    let m = values.len();
    let mut buf = values.to_vec();
    forward_plan(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    #[test]
    fn fft_batch_matches_naive() {
        let kernel: Vec<f64> = (0..300).map(|i| ((i * 37 % 11) as f64) / 7.0 - 0.5).collect();
        let sigs: Vec<Vec<f64>> = (0..5)
            .map(|s| (0..200).map(|i| ((i * (s + 3)) % 13) as f64 * 0.1).collect())
            .collect();
        let refs: Vec<&[f64]> = sigs.iter().map(|s| s.as_slice()).collect();
        let got = convolve_batch(&kernel, &refs);
        for (g, s) in got.iter().zip(&sigs) {
            let want = naive(s, &kernel);
            for (x, y) in g.iter().zip(&want) {
                assert!((x - y).abs() < 1e-11, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn sample_then_interpolate_is_identity() {
        let coeffs = [0.25, 0.5, 0.125, 0.125];
        let v = sample_roots_of_unity(-1, &coeffs, 8);
        let c = dft_coefficients(&v);
        assert!((c[7].re - 0.25).abs() < 1e-15);
        assert!((c[0].re - 0.5).abs() < 1e-15);
        assert!((c[2].re - 0.125).abs() < 1e-15);
    }
}
