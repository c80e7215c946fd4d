//! Norms in `Rad(X)`, Khintchine ratios, and Rademacher functions on dyadic
//! grids.
//!
//! Expectations over Rademacher signs are taken over `{-1, 1}^N` directly.
//! In exact mode every sign pattern is visited; the pattern with bit `n - 1`
//! set gives `r_n = -1`. Each coordinate of `sum_n eps_n x_n` and the final
//! average are correctly rounded sums ([`ExactSum`]), so the result does not
//! depend on the order of the terms, on negating a term, or on how the
//! patterns are split across threads. Patterns are processed in chunks of
//! 4096 on the rayon pool.
//!
//! Monte-Carlo mode draws the signs of sample `s` from outputs
//! `s*N .. s*N + N - 1` of the SplitMix64 stream of the seed (see
//! [`crate::rng`]), so every sample is reproducible in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::semigroup::{pow2i, RadElement};
use crate::spaces::{norm_slice, CoeffVec, SpaceSpec};
use crate::summation::{ExactSum, Neumaier};

/// Most Rademacher terms exact mode will enumerate (2^24 patterns).
pub const EXACT_CAP: usize = 24;
/// Deepest dyadic grid a [`DyadicStep`] may use.
pub const MAX_LEVEL: u32 = 26;

const CHUNK_BITS: usize = 12;
const MC_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RadMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadNormConfig {
    /// `q` in `(E ||sum r_n x_n||^q)^{1/q}`.
    pub exponent: f64,
    pub mode: RadMode,
}

impl RadNormConfig {
    pub fn exact() -> Self {
        Self {
            exponent: 1.0,
            mode: RadMode::Exact,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            exponent: 1.0,
            mode: RadMode::MonteCarlo { samples, seed },
        }
    }

    pub fn with_exponent(mut self, exponent: f64) -> Self {
        self.exponent = exponent;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exponent.is_finite() && self.exponent >= 1.0) {
            return Err(Error::InvalidExponent(self.exponent));
        }
        if let RadMode::MonteCarlo { samples: 0, .. } = self.mode {
            return Err(Error::OutOfRange(
                "Monte-Carlo needs at least one sample".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadNorm {
    pub value: f64,
    /// Zero in exact mode; NaN for a single Monte-Carlo sample.
    pub stderr: f64,
}

/// Nonzero `(term, value)` pairs per coordinate.
fn columns(r: &RadElement) -> Vec<Vec<(usize, f64)>> {
    (0..r.dim())
        .map(|i| {
            r.terms()
                .iter()
                .enumerate()
                .filter_map(|(n, x)| {
                    let v = x.as_slice()[i];
                    (v != 0.0).then_some((n, v))
                })
                .collect()
        })
        .collect()
}

/// `||sum_n eps_n x_n||^q` with `eps_n = -1` where `flip(n)` holds.
fn signed_power(
    cols: &[Vec<(usize, f64)>],
    flip: impl Fn(usize) -> bool,
    y: &mut [f64],
    acc: &mut ExactSum,
    space: &SpaceSpec,
    exponent: f64,
) -> f64 {
    for (slot, col) in y.iter_mut().zip(cols) {
        acc.clear();
        for &(n, v) in col {
            acc.add(if flip(n) { -v } else { v });
        }
        *slot = acc.value();
    }
    let nrm = norm_slice(y, space);
    if exponent == 1.0 {
        nrm
    } else {
        nrm.powf(exponent)
    }
}

pub fn rad_norm(r: &RadElement, space: &SpaceSpec, cfg: &RadNormConfig) -> Result<RadNorm> {
    space.validate()?;
    cfg.validate()?;
    let q = cfg.exponent;
    let cols = columns(r);
    let n = r.len();
    let dim = r.dim();
    match cfg.mode {
        RadMode::Exact => {
            if n > EXACT_CAP {
                return Err(Error::ExactCapExceeded { n, cap: EXACT_CAP });
            }
            let chunk_bits = CHUNK_BITS.min(n);
            let chunks = 1u64 << (n - chunk_bits);
            let sums: Vec<ExactSum> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut y = vec![0.0; dim];
                    let mut coord = ExactSum::new();
                    let mut total = ExactSum::new();
                    let start = c << chunk_bits;
                    for pattern in start..start + (1u64 << chunk_bits) {
                        total.add(signed_power(
                            &cols,
                            |t| (pattern >> t) & 1 == 1,
                            &mut y,
                            &mut coord,
                            space,
                            q,
                        ));
                    }
                    total
                })
                .collect();
            let mut total = ExactSum::new();
            for s in &sums {
                total.merge(s);
            }
            let mean = total.value() * pow2i(-(n as i64));
            Ok(RadNorm {
                value: root(mean, q),
                stderr: 0.0,
            })
        }
        RadMode::MonteCarlo { samples, seed } => {
            let chunks = samples.div_ceil(MC_CHUNK);
            let values: Vec<Vec<f64>> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut y = vec![0.0; dim];
                    let mut coord = ExactSum::new();
                    let mut signs = vec![false; n];
                    let lo = c * MC_CHUNK;
                    let hi = (lo + MC_CHUNK).min(samples);
                    (lo..hi)
                        .map(|s| {
                            let mut g = SplitMix64::at(seed, (s as u64).wrapping_mul(n as u64));
                            for flip in signs.iter_mut() {
                                *flip = g.next_sign() < 0.0;
                            }
                            signed_power(&cols, |t| signs[t], &mut y, &mut coord, space, q)
                        })
                        .collect()
                })
                .collect();
            let all: Vec<f64> = values.into_iter().flatten().collect();
            let mean = all.iter().copied().collect::<ExactSum>().value() / samples as f64;
            let stderr_mean = if samples > 1 {
                let ss: ExactSum = all.iter().map(|v| (v - mean) * (v - mean)).collect();
                (ss.value() / (samples - 1) as f64 / samples as f64).sqrt()
            } else {
                f64::NAN
            };
            let value = root(mean, q);
            let stderr = if q == 1.0 {
                stderr_mean
            } else if mean > 0.0 {
                stderr_mean * mean.powf(1.0 / q - 1.0) / q
            } else {
                0.0
            };
            Ok(RadNorm { value, stderr })
        }
    }
}

fn root(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        x
    } else {
        x.powf(1.0 / q)
    }
}

/// `E|sum a_k r_k| / ||a||_2` (or the configured moment in place of the
/// first). At most 1 in exact mode with exponent 1.
pub fn khintchine_ratio(a: &CoeffVec, cfg: &RadNormConfig) -> Result<f64> {
    if a.is_zero() {
        return Err(Error::ZeroVector);
    }
    let terms = a
        .as_slice()
        .iter()
        .map(|&v| CoeffVec::from_raw(vec![v]))
        .collect();
    let r = RadElement::new(terms)?;
    let avg = rad_norm(&r, &SpaceSpec::SupC0, cfg)?.value;
    Ok(avg / norm_slice(a.as_slice(), &SpaceSpec::Lp(2.0)))
}

/// A step function on the dyadic intervals `[i 2^{-J}, (i+1) 2^{-J})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicStep {
    level: u32,
    values: Vec<f64>,
}

impl DyadicStep {
    pub fn new(level: u32, values: Vec<f64>) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::OutOfRange(format!(
                "level {level} exceeds {MAX_LEVEL}"
            )));
        }
        if values.len() != 1usize << level {
            return Err(Error::DimensionMismatch {
                expected: 1 << level,
                found: values.len(),
            });
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: i + 1,
                value: v,
            });
        }
        Ok(Self { level, values })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The same function on the finer grid of level `level`.
    pub fn refined(&self, level: u32) -> Result<Self> {
        if level < self.level {
            return Err(Error::OutOfRange(format!(
                "cannot refine level {} to {level}",
                self.level
            )));
        }
        let shift = level - self.level;
        let values = (0..1usize << level)
            .map(|i| self.values[i >> shift])
            .collect();
        Self::new(level, values)
    }
}

/// `r_k(w) = sign sin(2^k pi w)` at grid level `level`.
pub fn rademacher_sign(k: u32, level: u32) -> Result<DyadicStep> {
    if k == 0 || k > level {
        return Err(Error::OutOfRange(format!(
            "r_{k} is not representable at level {level}"
        )));
    }
    let values = (0..1usize << level).map(|i| sign_at(k, level, i)).collect();
    DyadicStep::new(level, values)
}

#[inline]
fn sign_at(k: u32, level: u32, i: usize) -> f64 {
    if (i >> (level - k)).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `int_0^1 f r_k`.
pub fn rademacher_coefficient(f: &DyadicStep, k: u32) -> Result<f64> {
    if k == 0 || k > f.level {
        return Err(Error::OutOfRange(format!(
            "r_{k} is not representable at level {}",
            f.level
        )));
    }
    let s: ExactSum = f
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v * sign_at(k, f.level, i))
        .collect();
    Ok(s.value() * pow2i(-(f.level as i64)))
}

/// `P_n f = sum_{k <= n} r_k int_0^1 f r_k`.
pub fn dyadic_project_pn(f: &DyadicStep, n: u32) -> Result<DyadicStep> {
    if n > f.level {
        return Err(Error::OutOfRange(format!(
            "P_{n} needs level >= {n}, the function has level {}",
            f.level
        )));
    }
    let coeffs = (1..=n)
        .map(|k| rademacher_coefficient(f, k))
        .collect::<Result<Vec<_>>>()?;
    let level = f.level;
    let values = (0..1usize << level)
        .map(|i| {
            coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * sign_at(j as u32 + 1, level, i))
                .collect::<ExactSum>()
                .value()
        })
        .collect();
    DyadicStep::new(level, values)
}

/// `(int_0^1 |f|^p)^{1/p}`.
pub fn lp_step_norm(f: &DyadicStep, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    let s: Neumaier = f.values.iter().map(|v| v.abs().powf(p)).collect();
    Ok((s.value() * pow2i(-(f.level as i64))).powf(1.0 / p))
}

/// `sum_k a_k r_k` on the grid of level `level >= len(a)`.
pub fn rademacher_sum_step(a: &[f64], level: u32) -> Result<DyadicStep> {
    if a.len() > level as usize {
        return Err(Error::OutOfRange(format!(
            "{} Rademacher terms need level >= {}",
            a.len(),
            a.len()
        )));
    }
    let values = (0..1usize << level)
        .map(|i| {
            a.iter()
                .enumerate()
                .map(|(k, c)| c * sign_at(k as u32 + 1, level, i))
                .collect::<ExactSum>()
                .value()
        })
        .collect();
    DyadicStep::new(level, values)
}

/// Extremes of `||sum a_k r_k||_{L^p} / ||a||_2` over seeded Gaussian `a` of
/// length `n`: the measured two-sided Khintchine constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KhintchineRange {
    pub min: f64,
    pub max: f64,
}

impl KhintchineRange {
    /// Smallest `C` with every observed ratio in `[1/C, C]`.
    pub fn constant(&self) -> f64 {
        self.max.max(1.0 / self.min)
    }
}

pub fn khintchine_range(p: f64, n: usize, trials: usize, seed: u64) -> Result<KhintchineRange> {
    if n == 0 || trials == 0 {
        return Err(Error::OutOfRange("need n >= 1 and trials >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut range = KhintchineRange {
        min: f64::INFINITY,
        max: 0.0,
    };
    for _ in 0..trials {
        let a: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let f = rademacher_sum_step(&a, n as u32)?;
        let ratio = lp_step_norm(&f, p)? / norm_slice(&a, &SpaceSpec::Lp(2.0));
        range.min = range.min.min(ratio);
        range.max = range.max.max(ratio);
    }
    Ok(range)
}

/// Largest `||P_n f||_p / ||f||_p` over seeded Gaussian step functions of the
/// given level: a lower bound for the norm of `P_n` on `L^p`.
pub fn projection_norm_lb(p: f64, n: u32, level: u32, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::OutOfRange("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let values = (0..1usize << level)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let f = DyadicStep::new(level, values)?;
        let pf = dyadic_project_pn(&f, n)?;
        best = best.max(lp_step_norm(&pf, p)? / lp_step_norm(&f, p)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn cv(v: &[f64]) -> CoeffVec {
        CoeffVec::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sign_patterns() {
        assert_eq!(rademacher_sign(1, 1).unwrap().values(), &[1.0, -1.0]);
        assert_eq!(
            rademacher_sign(2, 2).unwrap().values(),
            &[1.0, -1.0, 1.0, -1.0]
        );
        assert_eq!(
            rademacher_sign(1, 2).unwrap().values(),
            &[1.0, 1.0, -1.0, -1.0]
        );
        assert!(rademacher_sign(3, 2).is_err());
        assert!(rademacher_sign(0, 2).is_err());
    }

    #[test]
    fn sign_matches_sine_at_interval_midpoints() {
        let level = 6;
        for k in 1..=level {
            let r = rademacher_sign(k, level).unwrap();
            for (i, v) in r.values().iter().enumerate() {
                let w = (i as f64 + 0.5) / 64.0;
                let s = (2f64.powi(k as i32) * std::f64::consts::PI * w)
                    .sin()
                    .signum();
                assert_eq!(*v, s, "k = {k}, i = {i}");
            }
        }
    }

    #[test]
    fn rad_norm_examples() {
        let e1 = RadElement::new(vec![cv(&[1.0, 0.0])]).unwrap();
        let exact = RadNormConfig::exact();
        assert_eq!(
            rad_norm(&e1, &SpaceSpec::Lp(1.0), &exact).unwrap().value,
            1.0
        );
        let two = RadElement::new(vec![cv(&[1.0]), cv(&[1.0])]).unwrap();
        let r = rad_norm(&two, &SpaceSpec::Lp(1.0), &exact).unwrap();
        assert_eq!((r.value, r.stderr), (1.0, 0.0));
    }

    #[test]
    fn c0_summing_differences_have_unit_norm() {
        for n in 1..=12 {
            let terms = (1..=n)
                .map(|m| CoeffVec::unit(2 * m, 2 * n).unwrap())
                .collect();
            let r = RadElement::new(terms).unwrap();
            let v = rad_norm(&r, &SpaceSpec::SupC0, &RadNormConfig::exact()).unwrap();
            assert_eq!(v.value, 1.0);
        }
    }

    #[test]
    fn rad_norm_errors() {
        let terms = vec![cv(&[1.0]); EXACT_CAP + 1];
        let r = RadElement::new(terms).unwrap();
        assert!(matches!(
            rad_norm(&r, &SpaceSpec::SupC0, &RadNormConfig::exact()),
            Err(Error::ExactCapExceeded { n: 25, cap: 24 })
        ));
        assert!(rad_norm(&r, &SpaceSpec::SupC0, &RadNormConfig::monte_carlo(0, 1)).is_err());
        assert!(rad_norm(
            &r,
            &SpaceSpec::SupC0,
            &RadNormConfig::exact().with_exponent(0.5)
        )
        .is_err());
    }

    #[test]
    fn second_moment_of_scalar_sum_is_l2_norm() {
        let r = RadElement::new(vec![cv(&[3.0]), cv(&[4.0])]).unwrap();
        let cfg = RadNormConfig::exact().with_exponent(2.0);
        assert_eq!(rad_norm(&r, &SpaceSpec::SupC0, &cfg).unwrap().value, 5.0);
    }

    #[test]
    fn khintchine_examples() {
        let exact = RadNormConfig::exact();
        assert_eq!(khintchine_ratio(&cv(&[1.0]), &exact).unwrap(), 1.0);
        let r2 = khintchine_ratio(&cv(&[1.0, 1.0]), &exact).unwrap();
        assert!((r2 - FRAC_1_SQRT_2).abs() <= f64::EPSILON);
        assert_eq!(
            khintchine_ratio(&cv(&[1.0, 1.0, 1.0, 1.0]), &exact).unwrap(),
            0.75
        );
        assert!(matches!(
            khintchine_ratio(&cv(&[0.0, 0.0]), &exact),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn projection_examples() {
        let r1 = rademacher_sign(1, 3).unwrap();
        assert_eq!(dyadic_project_pn(&r1, 1).unwrap(), r1);
        let indicator = DyadicStep::new(1, vec![1.0, 0.0]).unwrap();
        let p = dyadic_project_pn(&indicator, 1).unwrap();
        assert_eq!(p.values(), &[0.5, -0.5]);
        let r2 = rademacher_sign(2, 2).unwrap();
        assert_eq!(dyadic_project_pn(&r2, 1).unwrap().values(), &[0.0; 4]);
        assert!(dyadic_project_pn(&r2, 3).is_err());
    }

    #[test]
    fn lp_step_norm_examples() {
        let r1 = rademacher_sign(1, 1).unwrap();
        for p in [1.0, 1.5, 2.0, 7.0] {
            assert_eq!(lp_step_norm(&r1, p).unwrap(), 1.0);
        }
        let f = DyadicStep::new(1, vec![2.0, 0.0]).unwrap();
        assert_eq!(lp_step_norm(&f, 2.0).unwrap(), 2f64.sqrt());
        let s = rademacher_sum_step(&[1.0, 1.0], 2).unwrap();
        assert_eq!(s.values(), &[2.0, 0.0, 0.0, -2.0]);
        assert_eq!(lp_step_norm(&s, 1.0).unwrap(), 1.0);
        assert!(lp_step_norm(&s, 0.5).is_err());
    }

    #[test]
    fn step_validation() {
        assert!(DyadicStep::new(2, vec![1.0; 3]).is_err());
        assert!(DyadicStep::new(1, vec![1.0, f64::NAN]).is_err());
        let f = DyadicStep::new(1, vec![1.0, 2.0]).unwrap();
        assert_eq!(f.refined(2).unwrap().values(), &[1.0, 1.0, 2.0, 2.0]);
        assert!(f.refined(0).is_err());
    }
}
