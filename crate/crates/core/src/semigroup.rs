//! Multiplier semigroups `T(t) sum a_m f_m = sum exp(-2^m t) a_m f_m` and
//! their action on Rademacher sums.
//!
//! Times of the form `t = ln2 * 2^{-b}` are kept symbolic ([`Time::DyadicLog`])
//! so that `exp(-2^m t) = 2^{-2^{m-b}}` is evaluated with base-2 arithmetic;
//! for `m >= b` the result is an exact power of two.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::bases::BasisMap;
use crate::error::{Error, Result};
use crate::spaces::{CoeffVec, SparseVec};

/// Natural-log threshold past which `exp(-x)` is reported as exactly zero.
pub const UNDERFLOW_EXPONENT: f64 = 745.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Time {
    Real(f64),
    /// `ln2 * 2^{-b}`.
    DyadicLog(i32),
}

impl Time {
    pub fn value(&self) -> f64 {
        match *self {
            Time::Real(t) => t,
            Time::DyadicLog(b) => LN_2 * pow2i(-(b as i64)),
        }
    }

    /// `self * t`, staying dyadic when `t` is a power of two.
    pub fn scaled(self, t: f64) -> Result<Time> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::OutOfRange(format!(
                "time must be finite and >= 0, got {t}"
            )));
        }
        Ok(match self {
            _ if t == 0.0 => Time::Real(0.0),
            Time::DyadicLog(b) => match exact_log2(t) {
                Some(j) => Time::DyadicLog(b - j),
                None => Time::Real(self.value() * t),
            },
            Time::Real(q) => Time::Real(q * t),
        })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Time::Real(t) if !(t.is_finite() && t >= 0.0) => Err(Error::OutOfRange(format!(
                "time must be finite and >= 0, got {t}"
            ))),
            _ => Ok(()),
        }
    }

    /// `Time::DyadicLog(b)` when `t` is exactly `ln2 * 2^{-b}` in floating
    /// point, otherwise `Time::Real(t)`.
    pub fn recognize(t: f64) -> Time {
        if t > 0.0 {
            if let Some(j) = exact_log2(t / LN_2) {
                if LN_2 * pow2i(j as i64) == t {
                    return Time::DyadicLog(-j);
                }
            }
        }
        Time::Real(t)
    }
}

impl From<f64> for Time {
    fn from(t: f64) -> Self {
        Time::Real(t)
    }
}

/// `2^k` as a double, exact whenever representable (subnormals included).
pub fn pow2i(k: i64) -> f64 {
    if k > 1023 {
        f64::INFINITY
    } else if k >= -1022 {
        f64::from_bits(((k + 1023) as u64) << 52)
    } else if k >= -1074 {
        f64::from_bits(1u64 << (k + 1074))
    } else {
        0.0
    }
}

fn exact_log2(t: f64) -> Option<i32> {
    if t > 0.0 && t.is_normal() && t.to_bits() & ((1u64 << 52) - 1) == 0 {
        Some(((t.to_bits() >> 52) as i32) - 1023)
    } else {
        None
    }
}

/// `exp(-2^m t)`.
pub fn diag_coeff(m: u32, t: Time) -> Result<f64> {
    t.validate()?;
    Ok(match t {
        Time::DyadicLog(b) => {
            let d = m as i64 - b as i64;
            if d >= 11 {
                // 2^{-2^11} is below the smallest subnormal
                0.0
            } else if d >= 0 {
                pow2i(-(1i64 << d))
            } else {
                (-pow2i(d)).exp2()
            }
        }
        Time::Real(t) => {
            if t == 0.0 {
                1.0
            } else if m as f64 * LN_2 + t.ln() > UNDERFLOW_EXPONENT.ln() {
                0.0
            } else {
                (-(pow2i(m as i64) * t)).exp()
            }
        }
    })
}

/// `d(t) = exp(-2^m t) - exp(-2^{m+1} t)` on `[0, 1]`.
pub fn d_eval(m: u32, t: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::OutOfRange("m must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("t = {t} is outside [0, 1]")));
    }
    let t = Time::recognize(t);
    Ok(diag_coeff(m, t)? - diag_coeff(m + 1, t)?)
}

/// `(t0, d(t0))` with `t0 = ln2 / 2^m`, where `d` peaks at exactly 1/4.
pub fn d_max(m: u32) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::OutOfRange("m must be at least 1".into()));
    }
    let t0 = Time::DyadicLog(m as i32);
    Ok((t0.value(), diag_coeff(m, t0)? - diag_coeff(m + 1, t0)?))
}

/// The semigroup generated by `-A`, `A f_m = 2^m f_m`.
#[derive(Debug, Clone)]
pub struct MultiplierSemigroup {
    basis: BasisMap,
}

impl MultiplierSemigroup {
    pub fn new(basis: BasisMap) -> Self {
        // gamma_m = 2^m: positive and strictly increasing for m >= 1
        Self { basis }
    }

    pub fn basis(&self) -> &BasisMap {
        &self.basis
    }

    /// `gamma_m = 2^m`.
    pub fn gamma(&self, m: u32) -> f64 {
        pow2i(m as i64)
    }

    pub fn apply(&self, t: Time, x: &CoeffVec) -> Result<CoeffVec> {
        t.validate()?;
        if t == Time::Real(0.0) {
            return Ok(x.clone());
        }
        let a = self.basis.analyze(x)?;
        let scaled: Vec<f64> = a
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &c)| Ok(c * diag_coeff(i as u32 + 1, t)?))
            .collect::<Result<_>>()?;
        self.basis.synthesize(&CoeffVec::from_raw(scaled))
    }

    pub fn apply_sparse(&self, t: Time, x: &SparseVec) -> Result<SparseVec> {
        t.validate()?;
        if t == Time::Real(0.0) {
            return Ok(x.clone());
        }
        let a = self.basis.analyze_sparse(x)?;
        let scaled = a
            .entries()
            .iter()
            .map(|&(m, c)| Ok((m, c * diag_coeff(m as u32, t)?)))
            .collect::<Result<Vec<_>>>()?;
        self.basis
            .synthesize_sparse(&SparseVec::from_pairs(scaled)?)
    }
}

/// The sequence `(q_n)` in `(0, 1)` used by the associated semigroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QSchedule {
    /// `q_n = ln2 / 2^{2n-1}`.
    C0Style(usize),
    /// `q_n = ln2 / 2^n`.
    GeomStyle(usize),
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QKind {
    C0Style,
    GeomStyle,
}

pub fn make_q_schedule(kind: QKind, n: usize) -> Result<QSchedule> {
    if n == 0 {
        return Err(Error::OutOfRange(
            "schedule length must be at least 1".into(),
        ));
    }
    Ok(match kind {
        QKind::C0Style => QSchedule::C0Style(n),
        QKind::GeomStyle => QSchedule::GeomStyle(n),
    })
}

impl QSchedule {
    pub fn custom(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::OutOfRange(
                "schedule length must be at least 1".into(),
            ));
        }
        if let Some(q) = values.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return Err(Error::OutOfRange(format!("q = {q} is not in (0, 1)")));
        }
        Ok(QSchedule::Custom(values))
    }

    pub fn len(&self) -> usize {
        match self {
            QSchedule::C0Style(n) | QSchedule::GeomStyle(n) => *n,
            QSchedule::Custom(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `q_n` as a time (1-based).
    pub fn time(&self, n: usize) -> Result<Time> {
        if n == 0 || n > self.len() {
            return Err(Error::IndexOutOfRange {
                index: n,
                len: self.len(),
            });
        }
        let exponent = |e: usize| {
            i32::try_from(e).map_err(|_| Error::Overflow(format!("dyadic exponent {e}")))
        };
        Ok(match self {
            QSchedule::C0Style(_) => Time::DyadicLog(exponent(2 * n - 1)?),
            QSchedule::GeomStyle(_) => Time::DyadicLog(exponent(n)?),
            QSchedule::Custom(v) => Time::Real(v[n - 1]),
        })
    }

    pub fn values(&self) -> Vec<f64> {
        (1..=self.len())
            .map(|n| self.time(n).expect("in range").value())
            .collect()
    }

    pub fn label(&self) -> &'static str {
        match self {
            QSchedule::C0Style(_) => "ln2/2^(2n-1)",
            QSchedule::GeomStyle(_) => "ln2/2^n",
            QSchedule::Custom(_) => "custom",
        }
    }
}

/// A finite Rademacher sum `sum_{n <= N} r_n (x) x_n`; all terms share one
/// dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RadElement {
    dim: usize,
    terms: Vec<CoeffVec>,
}

impl RadElement {
    pub fn new(terms: Vec<CoeffVec>) -> Result<Self> {
        let first = terms.first().ok_or(Error::EmptyVector)?;
        let dim = first.dim();
        if let Some(bad) = terms.iter().find(|t| t.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Self { dim, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of Rademacher terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Term `n` (1-based).
    pub fn term(&self, n: usize) -> &CoeffVec {
        &self.terms[n - 1]
    }

    pub fn terms(&self) -> &[CoeffVec] {
        &self.terms
    }
}

/// `sum_n r_n (x) T(q_n t) x_n`.
pub fn apply_associated(
    sg: &MultiplierSemigroup,
    q: &QSchedule,
    t: f64,
    r: &RadElement,
) -> Result<RadElement> {
    if q.len() < r.len() {
        return Err(Error::ScheduleTooShort {
            len: q.len(),
            needed: r.len(),
        });
    }
    let terms = r
        .terms()
        .iter()
        .enumerate()
        .map(|(i, x)| sg.apply(q.time(i + 1)?.scaled(t)?, x))
        .collect::<Result<Vec<_>>>()?;
    RadElement::new(terms)
}
