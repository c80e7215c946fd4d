//! Finite checks around the blow-up witnesses: the peak of `d(t)`, the
//! permutation table, the non-equivalence witnesses, zero insertion, the
//! unconditionality probe and Khintchine ratios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{is_b_value, make_permutation_pi, unconditional_constant_lb, BasisMap};
use crate::error::{Error, Result};
use crate::rademacher::{khintchine_ratio, RadNormConfig};
use crate::semigroup::{d_eval, d_max};
use crate::spaces::{
    dyadic_block, insert_zeros, norm, partial_sum_norms, witness_lower, witness_upper, CoeffVec,
    SpaceSpec,
};
use crate::summation::Neumaier;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub m: u32,
    pub t0: f64,
    pub value: f64,
    /// Largest `d(t)` seen on the scan grid.
    pub grid_max: f64,
    pub grid_argmax: f64,
}

/// `d_max(m)` next to a scan of `d` over `t = 0` and `grid_points`
/// log-spaced times from `t0 / 4096` to 1.
pub fn lemma_max_scan(ms: &[u32], grid_points: usize) -> Result<Vec<LemmaRow>> {
    if grid_points < 2 {
        return Err(Error::OutOfRange(
            "the scan needs at least two grid points".into(),
        ));
    }
    ms.iter()
        .map(|&m| {
            let (t0, value) = d_max(m)?;
            let lo = (t0 / 4096.0).ln();
            let mut grid_max = d_eval(m, 0.0)?;
            let mut grid_argmax = 0.0;
            for j in 0..grid_points {
                let t = (lo * (1.0 - j as f64 / (grid_points - 1) as f64))
                    .exp()
                    .min(1.0);
                let d = d_eval(m, t)?;
                if d > grid_max {
                    grid_max = d;
                    grid_argmax = t;
                }
            }
            Ok(LemmaRow {
                m,
                t0,
                value,
                grid_max,
                grid_argmax,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiRow {
    pub m: usize,
    pub pi: usize,
    /// Whether `pi(m)` is the first even number of its block.
    pub is_b: bool,
}

/// `pi(m)` for the even `m <= 2K`.
pub fn pi_table(k: usize) -> Result<Vec<PiRow>> {
    if k == 0 {
        return Err(Error::OutOfRange("K must be at least 1".into()));
    }
    Ok(make_permutation_pi(k)
        .even_pairs()
        .map(|(m, pi)| PiRow {
            m,
            pi,
            is_b: is_b_value(pi),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonequivRow {
    /// Partial sums are taken at the end of block `B_{2^n}`.
    pub n: u32,
    pub checkpoint: usize,
    pub lp_norm: f64,
    pub xp_norm: f64,
    pub lp_power: f64,
    pub xp_power: f64,
    /// For `p < 2` the closed-form `X^p` norm, for `p > 2` a lower bound for it.
    pub xp_reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonequivReport {
    pub p: f64,
    pub n_max: u32,
    /// `"l^p"` or `"X^p"`.
    pub diverging: String,
    /// For `p > 2`, an upper bound for every `l^p` partial norm.
    pub lp_bound: Option<f64>,
    pub rows: Vec<NonequivRow>,
}

/// Partial norms of a sequence that is bounded in one of `l^p`, `X^p` and
/// unbounded in the other.
pub fn run_nonequivalence(p: f64, n_max: u32) -> Result<NonequivReport> {
    if p == 2.0 {
        return Err(Error::OutOfRange(
            "p = 2: X^2 and l^2 coincide, the unit vector bases are equivalent".into(),
        ));
    }
    SpaceSpec::lp(p)?;
    if p == 1.0 {
        return Err(Error::OutOfRange(
            "non-equivalence is checked for p > 1".into(),
        ));
    }
    let lower = p < 2.0;
    let seq = if lower {
        witness_lower(p, n_max)?
    } else {
        witness_upper(p, n_max)?
    };
    let checkpoints = (1..=n_max)
        .map(|n| Ok(dyadic_block(n)?.1))
        .collect::<Result<Vec<_>>>()?;
    let lp = partial_sum_norms(&seq, &SpaceSpec::Lp(p), &checkpoints)?;
    let xp = partial_sum_norms(&seq, &SpaceSpec::BlockXp(p), &checkpoints)?;
    let mut closed = Neumaier::new();
    let rows = (1..=n_max)
        .zip(checkpoints)
        .zip(lp.iter().zip(&xp))
        .map(|((n, checkpoint), (&lp_norm, &xp_norm))| {
            let xp_reference = if lower {
                closed.add(2f64.powf(n as f64 * (p / 2.0 - 1.0)));
                closed.value().powf(1.0 / p)
            } else {
                (n as f64 * 2f64.powf(-p / 2.0)).powf(1.0 / p)
            };
            NonequivRow {
                n,
                checkpoint,
                lp_norm,
                xp_norm,
                lp_power: lp_norm.powf(p),
                xp_power: xp_norm.powf(p),
                xp_reference,
            }
        })
        .collect();
    Ok(NonequivReport {
        p,
        n_max,
        diverging: if lower { "l^p" } else { "X^p" }.to_string(),
        lp_bound: (!lower).then(|| zeta_upper(p / 2.0).powf(1.0 / p)),
        rows,
    })
}

/// An upper bound for `zeta(s)`, `s > 1`, within about `1e-6 s` of the value.
fn zeta_upper(s: f64) -> f64 {
    const TERMS: u32 = 1_000_000;
    let head: Neumaier = (1..=TERMS).map(|j| (j as f64).powf(-s)).collect();
    head.value() + (TERMS as f64).powf(1.0 - s) / (s - 1.0)
}

/// `3 C^p` with `C = 1` for `p <= 2` and `C = 3^{1/2 - 1/p}` above.
pub fn zero_insertion_bound(p: f64) -> f64 {
    let c: f64 = if p <= 2.0 {
        1.0
    } else {
        3f64.powf(0.5 - 1.0 / p)
    };
    3.0 * c.powf(p)
}

/// `||b||^p / ||a||^p` in `X^p`, where `b` places `a_k` at `phi[k-1]`.
pub fn zero_insertion_ratio(a: &CoeffVec, phi: &[usize], p: f64) -> Result<f64> {
    let space = SpaceSpec::block_xp(p)?;
    if a.is_zero() {
        return Err(Error::ZeroVector);
    }
    let b = insert_zeros(a, phi)?;
    Ok((norm(&b, &space)? / norm(a, &space)?).powf(p))
}

/// A strictly increasing map `1..=len -> N` with all gaps (including the
/// first value) in `{1, 2}`.
pub fn random_gap_map(len: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut pos = 0;
    (0..len)
        .map(|_| {
            pos += rng.gen_range(1..=2);
            pos
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroInsertionReport {
    pub p: f64,
    pub trials: usize,
    pub bound: f64,
    pub max_ratio: f64,
    pub violations: usize,
}

/// Random Gaussian `a` of length `1..=64` and random gap maps.
pub fn run_zero_insertion_check(p: f64, trials: usize, seed: u64) -> Result<ZeroInsertionReport> {
    SpaceSpec::block_xp(p)?;
    if trials == 0 {
        return Err(Error::OutOfRange("trials must be at least 1".into()));
    }
    let bound = zero_insertion_bound(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    let mut done = 0;
    while done < trials {
        let len = rng.gen_range(1..=64);
        let a: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let phi = random_gap_map(len, &mut rng);
        let a = CoeffVec::new(a)?;
        if a.is_zero() {
            continue;
        }
        let r = zero_insertion_ratio(&a, &phi, p)?;
        max_ratio = max_ratio.max(r);
        if r > bound {
            violations += 1;
        }
        done += 1;
    }
    Ok(ZeroInsertionReport {
        p,
        trials,
        bound,
        max_ratio,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    /// Number of basis vectors `2K`.
    pub dim: usize,
    pub ambient_dim: usize,
    pub estimate: f64,
}

/// Unconditional-constant lower bounds for FPrime in `X^p`, `1 < p <= 2`.
pub fn run_fprime_unconditional_probe(
    p: f64,
    dims: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<ProbeRow>> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::OutOfRange(format!(
            "the FPrime probe needs 1 < p <= 2, got {p}"
        )));
    }
    if let Some(d) = dims.iter().find(|d| **d < 2 || **d % 2 == 1) {
        return Err(Error::OutOfRange(format!(
            "dimension {d} is not a positive even number"
        )));
    }
    let space = SpaceSpec::BlockXp(p);
    dims.par_iter()
        .map(|&dim| {
            let basis = BasisMap::fprime(dim / 2)?;
            Ok(ProbeRow {
                dim,
                ambient_dim: basis.ambient_dim(),
                estimate: unconditional_constant_lb(&basis, &space, trials, seed)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KhintchineRow {
    pub n: usize,
    pub trials: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// `E|sum a_k r_k| / ||a||_2` over seeded Gaussian `a` of each length in `ns`.
pub fn khintchine_scan(
    ns: &[usize],
    trials: usize,
    seed: u64,
    cfg: &RadNormConfig,
) -> Result<Vec<KhintchineRow>> {
    if trials == 0 {
        return Err(Error::OutOfRange("trials must be at least 1".into()));
    }
    ns.iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::OutOfRange("N must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n as u64);
            let vectors: Vec<Vec<f64>> = (0..trials)
                .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let ratios = vectors
                .into_par_iter()
                .map(|a| khintchine_ratio(&CoeffVec::new(a)?, cfg))
                .collect::<Result<Vec<_>>>()?;
            Ok(KhintchineRow {
                n,
                trials,
                min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
                max_ratio: ratios.iter().copied().fold(0.0, f64::max),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lemma_scan_peaks_at_quarter() {
        for row in lemma_max_scan(&[1, 5, 20], 2000).unwrap() {
            assert_eq!(row.value, 0.25);
            assert!(row.grid_max <= 0.25);
            assert!(row.grid_max > 0.249);
        }
    }

    #[test]
    fn pi_table_rows() {
        let rows = pi_table(16).unwrap();
        assert_eq!(rows.len(), 16);
        let pi = |m: usize| rows.iter().find(|r| r.m == m).unwrap().pi;
        assert_eq!((pi(2), pi(6), pi(10)), (2, 4, 8));
        assert_eq!((pi(4), pi(8), pi(12)), (6, 10, 14));
        assert!(rows.iter().all(|r| r.is_b == (r.m % 4 == 2)));
    }

    #[test]
    fn nonequivalence_lower_side() {
        let r = run_nonequivalence(1.5, 8).unwrap();
        assert_eq!(r.diverging, "l^p");
        for row in &r.rows {
            assert_relative_eq!(row.lp_power, row.n as f64, max_relative = 1e-12);
            assert_relative_eq!(row.xp_norm, row.xp_reference, max_relative = 1e-12);
        }
    }

    #[test]
    fn nonequivalence_upper_side() {
        let r = run_nonequivalence(3.0, 8).unwrap();
        assert_eq!(r.diverging, "X^p");
        let bound = r.lp_bound.unwrap();
        assert!(bound < 1.378 && bound > 1.376);
        for row in &r.rows {
            assert!(row.lp_norm <= bound);
            assert!(row.xp_norm >= row.xp_reference);
        }
        assert!(run_nonequivalence(2.0, 8).is_err());
    }

    #[test]
    fn zero_insertion_examples() {
        let a = CoeffVec::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(zero_insertion_ratio(&a, &[1, 2, 3], 1.0).unwrap(), 1.0);
        let r = zero_insertion_ratio(&a, &[1, 3, 5], 1.0).unwrap();
        assert_relative_eq!(r, 6.0 / (1.0 + 13f64.sqrt()), max_relative = 1e-14);
        assert_relative_eq!(
            zero_insertion_bound(3.0),
            3.0 * 3f64.powf(0.5),
            max_relative = 1e-14
        );
        let rep = run_zero_insertion_check(1.5, 200, 7).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.max_ratio >= 1.0);
    }

    #[test]
    fn gap_maps_have_small_gaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in [1, 5, 50] {
            let phi = random_gap_map(len, &mut rng);
            assert!(crate::spaces::max_gap(&phi) <= 2);
            assert_eq!(phi.len(), len);
        }
    }

    #[test]
    fn probe_rejects_large_p() {
        assert!(run_fprime_unconditional_probe(3.0, &[4], 1, 0).is_err());
        assert!(run_fprime_unconditional_probe(1.5, &[3], 1, 0).is_err());
        let rows = run_fprime_unconditional_probe(2.0, &[8], 2, 0).unwrap();
        assert!(rows[0].estimate >= 1.0);
    }

    #[test]
    fn khintchine_ratios_at_most_one() {
        let rows = khintchine_scan(&[1, 3, 6], 50, 11, &RadNormConfig::exact()).unwrap();
        assert_eq!(rows[0].min_ratio, 1.0);
        for r in &rows {
            assert!(r.max_ratio <= 1.0 + 1e-15);
            assert!(r.min_ratio >= std::f64::consts::FRAC_1_SQRT_2 - 1e-12);
        }
    }
}
