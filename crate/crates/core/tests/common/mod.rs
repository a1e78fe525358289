#![allow(dead_code)]

use qtqme::{Correction, LaurentSeries, QtMatrix};

/// Leading `n x n` block as nested rows, built entry by entry.
pub fn dense(a: &QtMatrix, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| a.entry(i, j)).collect()).collect()
}

pub fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for (l, &x) in a[i].iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += x * b[l][j];
            }
        }
    }
    out
}

pub fn max_abs_diff_window(a: &[Vec<f64>], b: &[Vec<f64>], k: usize) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            d = d.max((a[i][j] - b[i][j]).abs());
        }
    }
    d
}

/// Small deterministic pseudo-random stream for building test inputs.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64) / ((1u64 << 53) as f64)
    }

    pub fn signed(&mut self) -> f64 {
        2.0 * self.next() - 1.0
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next() * n as f64) as usize % n.max(1)
    }
}

pub fn random_series(rng: &mut Lcg, max_neg: i64, max_pos: i64) -> LaurentSeries {
    let lo = -(rng.below(max_neg as usize + 1) as i64);
    let hi = rng.below(max_pos as usize + 1) as i64;
    LaurentSeries::new(lo, (lo..=hi).map(|_| rng.signed()).collect())
}

pub fn random_qt(rng: &mut Lcg, max_neg: i64, max_pos: i64, max_rows: usize, max_cols: usize) -> QtMatrix {
    let rows = rng.below(max_rows + 1);
    let cols = rng.below(max_cols + 1);
    let data = (0..rows * cols).map(|_| 0.5 * rng.signed()).collect();
    QtMatrix::new(random_series(rng, max_neg, max_pos), Correction::from_vec(rows, cols, data))
}
