//! Quasi-birth-death models with quasi-Toeplitz blocks.
//!
//! Every model here has nearest-neighbour transitions: `A_i = T(a_i) + e1 [b_i0 - a_i0, b_i1 - a_i1]`
//! with interior symbols `a_i(z) = a_{i,-1}/z + a_{i,0} + a_{i,1} z` and boundary
//! symbols `b_i(z) = b_{i,0} + b_{i,1} z`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::laurent::LaurentSeries;
use crate::qtmat::{Correction, QtMatrix};

const STOCHASTIC_TOL: f64 = 1e-14;

/// Rates and routing probabilities of the two-node Jackson network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacksonParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub p: f64,
    pub q: f64,
}

/// The ten standard parameter sets, indexed 1..=10.
pub const JACKSON_CASES: [JacksonParams; 10] = [
    jp(1.0, 0.0, 1.5, 2.0, 1.0, 0.0),
    jp(1.0, 0.0, 2.0, 1.5, 1.0, 0.0),
    jp(0.0, 1.0, 1.5, 2.0, 0.0, 1.0),
    jp(0.0, 1.0, 2.0, 1.5, 0.0, 1.0),
    jp(1.0, 1.0, 2.0, 2.0, 0.1, 0.8),
    jp(1.0, 1.0, 2.0, 2.0, 0.8, 0.1),
    jp(1.0, 1.0, 2.0, 2.0, 0.4, 0.4),
    jp(1.0, 1.0, 10.0, 10.0, 0.5, 0.5),
    jp(1.0, 5.0, 10.0, 15.0, 0.4, 0.9),
    jp(5.0, 1.0, 15.0, 10.0, 0.9, 0.4),
];

/// Cases whose drift condition only holds after exchanging levels and phases.
pub const FLIPPED_CASES: [usize; 3] = [2, 6, 10];

const fn jp(lambda1: f64, lambda2: f64, mu1: f64, mu2: f64, p: f64, q: f64) -> JacksonParams {
    JacksonParams { lambda1, lambda2, mu1, mu2, p, q }
}

impl JacksonParams {
    pub fn case(k: usize) -> Result<Self> {
        if !(1..=10).contains(&k) {
            return Err(Error::InvalidParameter(format!("Jackson case must be 1..=10, got {k}")));
        }
        Ok(JACKSON_CASES[k - 1])
    }

    /// Parameters of the problem with levels and phases exchanged.
    pub fn swapped(&self) -> Self {
        jp(self.lambda2, self.lambda1, self.mu2, self.mu1, self.q, self.p)
    }
}

/// Which constructor produced a model; used for flipping and reporting.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelFamily {
    Jackson { params: JacksonParams, flipped: bool },
    IdleServer { lambda1: f64, lambda2: f64, mu1: f64, mu2: f64 },
    Rwqp { h: [[f64; 3]; 3], y: [[f64; 2]; 3] },
    Custom,
}

/// Coefficients `A_-1, A_0, A_1` with their interior and boundary symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct QbdModel {
    pub a_m1: QtMatrix,
    pub a_0: QtMatrix,
    pub a_1: QtMatrix,
    /// Interior symbols `a_-1, a_0, a_1`.
    pub interior: [LaurentSeries; 3],
    /// Boundary symbols `b_-1, b_0, b_1`.
    pub boundary: [LaurentSeries; 3],
    pub family: ModelFamily,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DriftReport {
    pub interior_ok: bool,
    pub boundary_ok: bool,
    pub flipped_recommended: bool,
}

impl DriftReport {
    pub fn holds(&self) -> bool {
        self.interior_ok && self.boundary_ok
    }
}

impl QbdModel {
    /// Builds a model from interior symbols (exponents -1..=1) and boundary symbols
    /// (exponents 0..=1), checking nonnegativity and row stochasticity.
    pub fn from_symbols(interior: [LaurentSeries; 3], boundary: [LaurentSeries; 3], family: ModelFamily) -> Result<Self> {
        for (name, s) in ["a_-1", "a_0", "a_1"].iter().zip(&interior) {
            check_series(name, s, -1)?;
        }
        for (name, s) in ["b_-1", "b_0", "b_1"].iter().zip(&boundary) {
            check_series(name, s, 0)?;
        }
        let total_a: f64 = interior.iter().map(|s| s.value_at_one()).sum();
        let total_b: f64 = boundary.iter().map(|s| s.value_at_one()).sum();
        if (total_a - 1.0).abs() > STOCHASTIC_TOL || (total_b - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidParameter(format!(
                "model is not stochastic: interior sum {total_a}, boundary sum {total_b}"
            )));
        }
        let block = |a: &LaurentSeries, b: &LaurentSeries| {
            let row = vec![b.coeff(0) - a.coeff(0), b.coeff(1) - a.coeff(1)];
            let mut c = Correction::from_rows(&[row]);
            c.compress(0.0);
            QtMatrix::new(a.clone(), c)
        };
        Ok(Self {
            a_m1: block(&interior[0], &boundary[0]),
            a_0: block(&interior[1], &boundary[1]),
            a_1: block(&interior[2], &boundary[2]),
            interior,
            boundary,
            family,
        })
    }

    pub fn blocks(&self) -> [&QtMatrix; 3] {
        [&self.a_m1, &self.a_0, &self.a_1]
    }

    pub fn drift_check(&self) -> DriftReport {
        let (interior_ok, boundary_ok) = drift_flags(self);
        let flipped_recommended = !(interior_ok && boundary_ok)
            && self.flip().map(|m| m.drift_check_plain()).unwrap_or(false);
        DriftReport { interior_ok, boundary_ok, flipped_recommended }
    }

    fn drift_check_plain(&self) -> bool {
        let (i, b) = drift_flags(self);
        i && b
    }

    /// The model with levels and phases exchanged (Jackson networks only).
    pub fn flip(&self) -> Result<Self> {
        match &self.family {
            ModelFamily::Jackson { params, flipped } => jackson(params, !flipped),
            _ => Err(Error::InvalidParameter("only Jackson models can be flipped".into())),
        }
    }
}

fn drift_flags(m: &QbdModel) -> (bool, bool) {
    let v = |s: &LaurentSeries| s.value_at_one();
    (v(&m.interior[0]) > v(&m.interior[2]), v(&m.boundary[0]) > v(&m.boundary[2]))
}

fn check_series(name: &str, s: &LaurentSeries, lo: i64) -> Result<()> {
    if !s.is_zero() && (s.lo() < lo || s.hi() > 1) {
        return Err(Error::InvalidParameter(format!("{name} must have exponents in {lo}..=1")));
    }
    if s.coeffs().iter().any(|&c| !(c >= 0.0)) {
        return Err(Error::InvalidParameter(format!("{name} has a negative or non-finite coefficient")));
    }
    Ok(())
}

fn series(terms: &[(i64, f64)]) -> LaurentSeries {
    LaurentSeries::from_terms(terms)
}

fn check_rates(rates: &[(&str, f64)]) -> Result<()> {
    for &(name, r) in rates {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be a finite nonnegative rate, got {r}")));
        }
    }
    Ok(())
}

/// Uniformized two-node Jackson network; `flipped` exchanges levels and phases.
pub fn jackson(params: &JacksonParams, flipped: bool) -> Result<QbdModel> {
    let JacksonParams { lambda1, lambda2, mu1, mu2, p, q } = if flipped { params.swapped() } else { *params };
    check_rates(&[("lambda1", lambda1), ("lambda2", lambda2), ("mu1", mu1), ("mu2", mu2)])?;
    for (name, x) in [("p", p), ("q", q)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {x}")));
        }
    }
    let total = lambda1 + lambda2 + mu1 + mu2;
    if total <= 0.0 {
        return Err(Error::InvalidParameter("all rates are zero".into()));
    }
    let alpha = 1.0 / total;
    let interior = [
        series(&[(0, alpha * (1.0 - q) * mu2), (1, alpha * q * mu2)]),
        series(&[(-1, alpha * (1.0 - p) * mu1), (0, 1.0 - alpha * total), (1, alpha * lambda1)]),
        series(&[(-1, alpha * p * mu1), (0, alpha * lambda2)]),
    ];
    let boundary = [
        interior[0].clone(),
        series(&[(0, 1.0 - alpha * (lambda1 + lambda2 + mu2)), (1, alpha * lambda1)]),
        series(&[(0, alpha * lambda2)]),
    ];
    QbdModel::from_symbols(interior, boundary, ModelFamily::Jackson { params: *params, flipped })
}

/// Jackson case `k` of the reference table, flipped for the cases that need it.
pub fn jackson_case(k: usize) -> Result<QbdModel> {
    jackson(&JacksonParams::case(k)?, FLIPPED_CASES.contains(&k))
}

/// Two queues where an idle server assists the other one.
///
/// The uniformization rate is the largest diagonal magnitude, which is
/// `lambda1 + lambda2 + 2 mu1` on the boundary row and `lambda1 + lambda2 + mu1 + mu2` elsewhere.
pub fn idle_server(lambda1: f64, lambda2: f64, mu1: f64, mu2: f64) -> Result<QbdModel> {
    check_rates(&[("lambda1", lambda1), ("lambda2", lambda2), ("mu1", mu1), ("mu2", mu2)])?;
    if mu1 <= 0.0 || mu2 <= 0.0 {
        return Err(Error::InvalidParameter("service rates must be positive".into()));
    }
    let load = lambda1 / mu1 + lambda2 / mu2;
    if load >= 2.0 {
        return Err(Error::ErgodicityViolation { load });
    }
    let base = lambda1 + lambda2;
    let alpha = 1.0 / (base + 2.0 * mu1).max(base + mu1 + mu2);
    let interior = [
        series(&[(0, alpha * mu1)]),
        series(&[(-1, alpha * mu2), (0, 1.0 - alpha * (base + mu1 + mu2)), (1, alpha * lambda2)]),
        series(&[(0, alpha * lambda1)]),
    ];
    let boundary = [
        series(&[(0, 2.0 * alpha * mu1)]),
        series(&[(0, 1.0 - alpha * (base + 2.0 * mu1)), (1, alpha * lambda2)]),
        series(&[(0, alpha * lambda1)]),
    ];
    QbdModel::from_symbols(interior, boundary, ModelFamily::IdleServer { lambda1, lambda2, mu1, mu2 })
}

/// Random walk in the quarter plane.
///
/// Rows of `h` and `y` are read top to bottom as level steps `+1, 0, -1`; columns of `h`
/// are phase steps `-1, 0, +1` and columns of `y` are phase steps `0, +1`.
pub fn rwqp(h: [[f64; 3]; 3], y: [[f64; 2]; 3]) -> Result<QbdModel> {
    let all = h.iter().flatten().chain(y.iter().flatten());
    if all.clone().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter("stencil entries must be finite and nonnegative".into()));
    }
    let sh: f64 = h.iter().flatten().sum();
    let sy: f64 = y.iter().flatten().sum();
    if (sh - 1.0).abs() > STOCHASTIC_TOL || (sy - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidParameter(format!("stencils must sum to 1 (H: {sh}, Y: {sy})")));
    }
    // level step -1 is the bottom row
    let a = |row: &[f64; 3]| series(&[(-1, row[0]), (0, row[1]), (1, row[2])]);
    let b = |row: &[f64; 2]| series(&[(0, row[0]), (1, row[1])]);
    let interior = [a(&h[2]), a(&h[1]), a(&h[0])];
    let boundary = [b(&y[2]), b(&y[1]), b(&y[0])];
    QbdModel::from_symbols(interior, boundary, ModelFamily::Rwqp { h, y })
}

/// The quarter-plane walk whose drift condition fails only in the first component.
pub fn rwqp_example() -> QbdModel {
    let n = 1.0 / 9.0;
    let t = 1.0 / 3.0;
    rwqp(
        [[n, 0.0, n], [2.0 * n, 0.0, 0.0], [2.0 * n, 2.0 * n, n]],
        [[t, t], [0.0, t], [0.0, 0.0]],
    )
    .expect("example stencils are valid")
}

/// Parses a model description made of `key=value` lines.
///
/// `family=jackson` takes `case` or `lambda1 lambda2 mu1 mu2 p q` plus an optional `flipped`;
/// `family=idle` takes `lambda1 lambda2 mu1 mu2`; `family=rwqp` takes rows `h_up h_mid h_down`
/// (three numbers each) and `y_up y_mid y_down` (two numbers each). Numbers may be written
/// as fractions such as `1/9`. Blank lines and `#` comments are ignored; unknown keys are errors.
pub fn parse_model_spec(text: &str) -> Result<QbdModel> {
    let mut kv = BTreeMap::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got `{line}`")))?;
        if kv.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Parse(format!("duplicate key `{}`", k.trim())));
        }
    }
    let family = kv.remove("family").ok_or_else(|| Error::Parse("missing `family`".into()))?;
    let model = match family.as_str() {
        "jackson" => {
            let flipped = kv.remove("flipped").map(|v| parse_bool(&v)).transpose()?;
            if let Some(case) = kv.remove("case") {
                let k: usize = case.parse().map_err(|e| Error::Parse(format!("bad case: {e}")))?;
                let params = JacksonParams::case(k)?;
                jackson(&params, flipped.unwrap_or(FLIPPED_CASES.contains(&k)))?
            } else {
                let mut take = |key: &str| take_number(&mut kv, key);
                let params = JacksonParams {
                    lambda1: take("lambda1")?,
                    lambda2: take("lambda2")?,
                    mu1: take("mu1")?,
                    mu2: take("mu2")?,
                    p: take("p")?,
                    q: take("q")?,
                };
                jackson(&params, flipped.unwrap_or(false))?
            }
        }
        "idle" => {
            let mut take = |key: &str| take_number(&mut kv, key);
            idle_server(take("lambda1")?, take("lambda2")?, take("mu1")?, take("mu2")?)?
        }
        "rwqp" => {
            let mut h = [[0.0; 3]; 3];
            let mut y = [[0.0; 2]; 3];
            for (i, key) in ["h_up", "h_mid", "h_down"].iter().enumerate() {
                h[i] = take_row::<3>(&mut kv, key)?;
            }
            for (i, key) in ["y_up", "y_mid", "y_down"].iter().enumerate() {
                y[i] = take_row::<2>(&mut kv, key)?;
            }
            rwqp(h, y)?
        }
        other => return Err(Error::Parse(format!("unknown family `{other}`"))),
    };
    if let Some(key) = kv.keys().next() {
        return Err(Error::Parse(format!("unknown key `{key}` for family {family}")));
    }
    Ok(model)
}

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Parse(format!("bad boolean `{v}`"))),
    }
}

fn parse_number(s: &str) -> Result<f64> {
    let bad = |e: std::num::ParseFloatError| Error::Parse(format!("bad number `{s}`: {e}"));
    match s.split_once('/') {
        Some((a, b)) => Ok(a.trim().parse::<f64>().map_err(bad)? / b.trim().parse::<f64>().map_err(bad)?),
        None => s.trim().parse().map_err(bad),
    }
}

fn take_number(kv: &mut BTreeMap<String, String>, key: &str) -> Result<f64> {
    let v = kv.remove(key).ok_or_else(|| Error::Parse(format!("missing `{key}`")))?;
    parse_number(&v)
}

fn take_row<const N: usize>(kv: &mut BTreeMap<String, String>, key: &str) -> Result<[f64; N]> {
    let v = kv.remove(key).ok_or_else(|| Error::Parse(format!("missing `{key}`")))?;
    let nums: Vec<f64> = v.split_whitespace().map(parse_number).collect::<Result<_>>()?;
    nums.try_into()
        .map_err(|_| Error::Parse(format!("`{key}` needs {N} numbers")))
}
