//! Sequence-space norms at finite truncation.
//!
//! Three norms are supported on finitely supported real sequences: the sup
//! norm of `c0`, the `l^p` norm, and the norm of the block space
//! `X^p = (sum_k ||x|_{B_k}||_2^p)^{1/p}` whose blocks
//! `B_k = [(k-1)k/2 + 1, k(k+1)/2]` have length `k`. A vector of length `dim`
//! stands for the infinite sequence padded with zeros; a block cut off by
//! `dim` is normed as the shorter block.
//!
//! All accumulations use [`Neumaier`] summation in ascending index order.
//! [`SparseVec`] norms visit the same nonzero entries in the same order, and
//! adding an exact zero leaves a Neumaier accumulator untouched, so sparse and
//! dense norms of the same sequence agree bit for bit.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summation::Neumaier;

/// Largest dense dimension the witness constructors will allocate.
pub const MAX_DENSE_DIM: usize = 1 << 27;

/// A finite real coefficient vector, indexed from 1.
///
/// Entries past `dim` are zero. Equality is semantic: two vectors that differ
/// only by trailing zeros compare equal.
#[derive(Debug, Clone)]
pub struct CoeffVec(Vec<f64>);

impl CoeffVec {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some((i, &v)) = entries.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: i + 1,
                value: v,
            });
        }
        Ok(Self(entries))
    }

    /// Wraps entries produced by finite arithmetic on valid vectors.
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        debug_assert!(!entries.is_empty());
        debug_assert!(entries.iter().all(|v| v.is_finite()));
        Self(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_raw(vec![0.0; dim.max(1)])
    }

    /// The standard unit vector `e_m` in dimension `dim`.
    pub fn unit(m: usize, dim: usize) -> Result<Self> {
        if m == 0 || m > dim {
            return Err(Error::IndexOutOfRange { index: m, len: dim });
        }
        let mut v = vec![0.0; dim];
        v[m - 1] = 1.0;
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Entry `m` (1-based); zero beyond `dim`.
    ///
    /// # Panics
    /// If `m == 0`.
    #[inline]
    pub fn get(&self, m: usize) -> f64 {
        assert!(m >= 1, "coefficient vectors are 1-indexed");
        self.0.get(m - 1).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// The first `n` entries (at least one).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.clamp(1, self.dim());
        Self(self.0[..n].to_vec())
    }

    /// Zero-padded (or truncated) copy of length `dim`.
    pub fn resized(&self, dim: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(dim.max(1), 0.0);
        Self(v)
    }

    pub fn nnz(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_raw(self.0.iter().map(|v| v * c).collect())
    }

    pub fn add(&self, other: &CoeffVec) -> Self {
        let dim = self.dim().max(other.dim());
        Self::from_raw((1..=dim).map(|m| self.get(m) + other.get(m)).collect())
    }

    pub fn sub(&self, other: &CoeffVec) -> Self {
        let dim = self.dim().max(other.dim());
        Self::from_raw((1..=dim).map(|m| self.get(m) - other.get(m)).collect())
    }

    /// Largest absolute entrywise difference, over the longer of the two supports.
    pub fn max_abs_diff(&self, other: &CoeffVec) -> f64 {
        let dim = self.dim().max(other.dim());
        (1..=dim)
            .map(|m| (self.get(m) - other.get(m)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_sparse(&self) -> SparseVec {
        SparseVec::from_sorted(
            self.0
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i + 1, *v))
                .collect(),
        )
    }
}

impl PartialEq for CoeffVec {
    fn eq(&self, other: &Self) -> bool {
        let dim = self.dim().max(other.dim());
        (1..=dim).all(|m| self.get(m) == other.get(m))
    }
}

impl TryFrom<Vec<f64>> for CoeffVec {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        CoeffVec::new(v)
    }
}

/// A sequence given by its nonzero entries, sorted by 1-based index.
///
/// Used where positions run far past anything worth allocating densely.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    entries: Vec<(usize, f64)>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from arbitrary `(index, value)` pairs; values at a repeated
    /// index are added in the order given.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        for &(i, v) in &pairs {
            if i == 0 {
                return Err(Error::IndexOutOfRange { index: 0, len: 0 });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i, value: v });
            }
        }
        pairs.sort_by_key(|(i, _)| *i);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some((j, w)) if *j == i => *w += v,
                _ => entries.push((i, v)),
            }
        }
        Ok(Self { entries })
    }

    pub(crate) fn from_sorted(entries: Vec<(usize, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        Self { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn max_index(&self) -> usize {
        self.entries.last().map(|(i, _)| *i).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add(&self, other: &SparseVec) -> SparseVec {
        let mut pairs = self.entries.clone();
        pairs.extend_from_slice(&other.entries);
        SparseVec::from_pairs(pairs).expect("sums of valid sparse vectors are valid")
    }

    pub fn scaled(&self, c: f64) -> SparseVec {
        SparseVec::from_sorted(self.entries.iter().map(|&(i, v)| (i, v * c)).collect())
    }

    pub fn to_dense(&self, dim: usize) -> Result<CoeffVec> {
        let dim = dim.max(self.max_index()).max(1);
        if dim > MAX_DENSE_DIM {
            return Err(Error::OutOfRange(format!(
                "dense dimension {dim} exceeds {MAX_DENSE_DIM}"
            )));
        }
        let mut v = vec![0.0; dim];
        for &(i, x) in &self.entries {
            v[i - 1] = x;
        }
        Ok(CoeffVec::from_raw(v))
    }
}

/// Which norm governs a coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpaceSpec {
    SupC0,
    Lp(f64),
    BlockXp(f64),
}

impl SpaceSpec {
    pub fn lp(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Self::Lp(p))
    }

    pub fn block_xp(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Self::BlockXp(p))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpaceSpec::SupC0 => Ok(()),
            SpaceSpec::Lp(p) | SpaceSpec::BlockXp(p) => check_exponent(p),
        }
    }

    pub fn exponent(&self) -> Option<f64> {
        match *self {
            SpaceSpec::SupC0 => None,
            SpaceSpec::Lp(p) | SpaceSpec::BlockXp(p) => Some(p),
        }
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceSpec::SupC0 => write!(f, "c0"),
            SpaceSpec::Lp(p) => write!(f, "l^{p}"),
            SpaceSpec::BlockXp(p) => write!(f, "X^{p}"),
        }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

pub fn norm(v: &CoeffVec, space: &SpaceSpec) -> Result<f64> {
    space.validate()?;
    Ok(norm_slice(v.as_slice(), space))
}

/// Norm of a raw slice (entry `i` is coordinate `i + 1`). The space must be
/// valid and the entries finite.
pub(crate) fn norm_slice(xs: &[f64], space: &SpaceSpec) -> f64 {
    match *space {
        SpaceSpec::SupC0 => xs.iter().fold(0.0, |m, v| f64::max(m, v.abs())),
        SpaceSpec::Lp(p) => lp_from_terms(xs.iter().copied(), p),
        SpaceSpec::BlockXp(p) => {
            let mut outer = Neumaier::new();
            let mut k = 1usize;
            let mut lo = 0usize;
            while lo < xs.len() {
                let hi = (lo + k).min(xs.len());
                let block: Neumaier = xs[lo..hi].iter().map(|v| v * v).collect();
                outer.add(pow_norm(block.value().sqrt(), p));
                lo += k;
                k += 1;
            }
            root(outer.value(), p)
        }
    }
}

pub fn norm_sparse(v: &SparseVec, space: &SpaceSpec) -> Result<f64> {
    space.validate()?;
    let e = v.entries();
    Ok(match *space {
        SpaceSpec::SupC0 => e.iter().fold(0.0, |m, (_, v)| f64::max(m, v.abs())),
        SpaceSpec::Lp(p) => lp_from_terms(e.iter().map(|(_, v)| *v), p),
        SpaceSpec::BlockXp(p) => {
            let mut outer = Neumaier::new();
            let mut idx = 0;
            while idx < e.len() {
                let k = block_of(e[idx].0);
                let (_, hi) = block_bounds(k)?;
                let mut block = Neumaier::new();
                while idx < e.len() && e[idx].0 <= hi {
                    block.add(e[idx].1 * e[idx].1);
                    idx += 1;
                }
                outer.add(pow_norm(block.value().sqrt(), p));
            }
            root(outer.value(), p)
        }
    })
}

fn lp_from_terms(xs: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p == 1.0 {
        xs.map(f64::abs).collect::<Neumaier>().value()
    } else if p == 2.0 {
        xs.map(|v| v * v).collect::<Neumaier>().value().sqrt()
    } else {
        let acc: Neumaier = xs.map(|v| v.abs().powf(p)).collect();
        acc.value().powf(1.0 / p)
    }
}

#[inline]
pub(crate) fn pow_norm(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

#[inline]
pub(crate) fn root(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x.sqrt()
    } else {
        x.powf(1.0 / p)
    }
}

/// `(lo, hi)` of block `B_k = [(k-1)k/2 + 1, k(k+1)/2]`.
pub fn block_bounds(k: usize) -> Result<(usize, usize)> {
    if k == 0 {
        return Err(Error::OutOfRange("blocks are numbered from 1".into()));
    }
    let overflow = || Error::Overflow(format!("bounds of block B_{k}"));
    let hi = k
        .checked_add(1)
        .and_then(|k1| k.checked_mul(k1))
        .map(|x| x / 2)
        .ok_or_else(overflow)?;
    let lo = hi - k + 1;
    Ok((lo, hi))
}

/// The block number `k` with `i` in `B_k`.
pub fn block_of(i: usize) -> usize {
    assert!(i >= 1, "sequence positions start at 1");
    // smallest k with k(k+1)/2 >= i
    let i128 = i as u128;
    let mut k = (((8.0 * i as f64 + 1.0).sqrt() - 1.0) / 2.0).ceil() as u128;
    while k * (k + 1) / 2 < i128 {
        k += 1;
    }
    while k > 1 && (k - 1) * k / 2 >= i128 {
        k -= 1;
    }
    k as usize
}

/// `(lo, hi)` of the dyadic block `B_{2^n}`.
pub fn dyadic_block(n: u32) -> Result<(usize, usize)> {
    let k = 1usize
        .checked_shl(n)
        .filter(|_| n < usize::BITS)
        .ok_or_else(|| Error::Overflow(format!("2^{n}")))?;
    block_bounds(k)
}

fn dense_dim_for_dyadic(n_max: u32) -> Result<usize> {
    let (_, hi) = dyadic_block(n_max)?;
    if hi > MAX_DENSE_DIM {
        return Err(Error::OutOfRange(format!(
            "n_max = {n_max} needs dimension {hi}, above {MAX_DENSE_DIM}"
        )));
    }
    Ok(hi)
}

/// Sequence with `x_k = 2^{-n/p}` on each `B_{2^n}`, `1 <= n <= n_max`.
///
/// Its `l^p` norm diverges (every block contributes 1 to the p-th power)
/// while its `X^p` norm stays bounded for `p < 2`.
pub fn witness_lower(p: f64, n_max: u32) -> Result<CoeffVec> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::OutOfRange(format!(
            "witness_lower needs 1 < p < 2, got {p}"
        )));
    }
    if n_max == 0 {
        return Err(Error::OutOfRange("n_max must be at least 1".into()));
    }
    let dim = dense_dim_for_dyadic(n_max)?;
    let mut v = vec![0.0; dim];
    for n in 1..=n_max {
        let (lo, hi) = dyadic_block(n)?;
        let x = 2f64.powf(-(n as f64) / p);
        v[lo - 1..hi].fill(x);
    }
    Ok(CoeffVec::from_raw(v))
}

/// The stream `1/sqrt(j)` written into the positions of `B_{2^1}, B_{2^2}, ...`
/// in increasing order.
///
/// Each dyadic block carries squared `l^2` mass at least 1/2, so the `X^p`
/// norm diverges while the `l^p` norm stays bounded for `p > 2`.
pub fn witness_upper(p: f64, n_max: u32) -> Result<CoeffVec> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "witness_upper needs p > 2, got {p}"
        )));
    }
    if n_max == 0 {
        return Err(Error::OutOfRange("n_max must be at least 1".into()));
    }
    let dim = dense_dim_for_dyadic(n_max)?;
    let mut v = vec![0.0; dim];
    let mut j = 0usize;
    for n in 1..=n_max {
        let (lo, hi) = dyadic_block(n)?;
        for slot in &mut v[lo - 1..hi] {
            j += 1;
            *slot = 1.0 / (j as f64).sqrt();
        }
    }
    Ok(CoeffVec::from_raw(v))
}

/// Places `a_k` at position `phi[k-1]` and zeros elsewhere.
pub fn insert_zeros(a: &CoeffVec, phi: &[usize]) -> Result<CoeffVec> {
    if phi.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: phi.len(),
        });
    }
    if phi[0] == 0 {
        return Err(Error::NonMonotone(1));
    }
    if let Some(k) = phi.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotone(k + 2));
    }
    let dim = *phi.last().expect("phi is non-empty");
    if dim > MAX_DENSE_DIM {
        return Err(Error::OutOfRange(format!("phi reaches {dim}")));
    }
    let mut b = vec![0.0; dim];
    for (k, &pos) in phi.iter().enumerate() {
        b[pos - 1] = a.as_slice()[k];
    }
    Ok(CoeffVec::from_raw(b))
}

/// `sup_k phi(k+1) - phi(k)`, with `phi(0) = 0`.
pub fn max_gap(phi: &[usize]) -> usize {
    std::iter::once(0)
        .chain(phi.iter().copied())
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| w[1].saturating_sub(w[0]))
        .max()
        .unwrap_or(0)
}

/// Norm of `seq` truncated after each checkpoint.
pub fn partial_sum_norms(
    seq: &CoeffVec,
    space: &SpaceSpec,
    checkpoints: &[usize],
) -> Result<Vec<f64>> {
    space.validate()?;
    let mut prev = 0;
    for &c in checkpoints {
        if c == 0 || c > seq.dim() {
            return Err(Error::IndexOutOfRange {
                index: c,
                len: seq.dim(),
            });
        }
        if c <= prev {
            return Err(Error::Invalid(
                "checkpoints must be strictly increasing".into(),
            ));
        }
        prev = c;
    }
    Ok(checkpoints
        .iter()
        .map(|&c| norm_slice(&seq.as_slice()[..c], space))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cv(v: &[f64]) -> CoeffVec {
        CoeffVec::new(v.to_vec()).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(
            norm(&cv(&[1.0, -2.0, 0.5]), &SpaceSpec::SupC0).unwrap(),
            2.0
        );
        assert_eq!(
            norm(&cv(&[3.0, 4.0, 0.0]), &SpaceSpec::BlockXp(2.0)).unwrap(),
            5.0
        );
        assert_eq!(
            norm(&cv(&[3.0, 4.0, 0.0]), &SpaceSpec::BlockXp(1.0)).unwrap(),
            7.0
        );
        assert_eq!(
            norm(&cv(&[1.0, 1.0, 1.0]), &SpaceSpec::Lp(1.0)).unwrap(),
            3.0
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            CoeffVec::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 2, .. })
        ));
        assert!(matches!(CoeffVec::new(vec![]), Err(Error::EmptyVector)));
        assert!(SpaceSpec::lp(0.5).is_err());
        assert!(norm(&cv(&[1.0]), &SpaceSpec::BlockXp(0.9)).is_err());
        assert!(SpaceSpec::block_xp(f64::INFINITY).is_err());
    }

    #[test]
    fn semantic_equality_ignores_trailing_zeros() {
        assert_eq!(cv(&[1.0, 2.0]), cv(&[1.0, 2.0, 0.0, 0.0]));
        assert_ne!(cv(&[1.0, 2.0]), cv(&[1.0, 2.0, 0.0, 1e-300]));
    }

    #[test]
    fn block_bounds_examples_and_overflow() {
        assert_eq!(block_bounds(1).unwrap(), (1, 1));
        assert_eq!(block_bounds(3).unwrap(), (4, 6));
        assert_eq!(block_bounds(4).unwrap(), (7, 10));
        assert!(matches!(block_bounds(usize::MAX), Err(Error::Overflow(_))));
        assert!(block_bounds(0).is_err());
        assert!(dyadic_block(64).is_err());
    }

    #[test]
    fn block_bounds_tile_the_naturals() {
        let mut prev_hi = 0;
        for k in 1..=1_000_000 {
            let (lo, hi) = block_bounds(k).unwrap();
            assert_eq!(lo, prev_hi + 1);
            assert_eq!(hi - lo + 1, k);
            prev_hi = hi;
        }
    }

    #[test]
    fn block_of_inverts_bounds() {
        for k in (1..5000).chain([1 << 20, (1 << 31) + 7]) {
            let (lo, hi) = block_bounds(k).unwrap();
            assert_eq!(block_of(lo), k);
            assert_eq!(block_of(hi), k);
            assert_eq!(block_of(hi + 1), k + 1);
        }
    }

    #[test]
    fn witness_lower_small_case() {
        let w = witness_lower(1.5, 1).unwrap();
        assert_eq!(w.dim(), 3);
        assert_eq!(w.get(1), 0.0);
        let x = 2f64.powf(-2.0 / 3.0);
        assert_eq!(w.get(2), x);
        assert_eq!(w.get(3), x);
        assert_relative_eq!(x, 0.63, epsilon = 0.005);
        assert!(witness_lower(2.0, 3).is_err());
        assert!(witness_lower(1.0, 3).is_err());
        assert!(witness_lower(1.5, 0).is_err());
    }

    #[test]
    fn witness_upper_small_case() {
        let w = witness_upper(3.0, 1).unwrap();
        assert_eq!(w, cv(&[0.0, 1.0, 1.0 / 2f64.sqrt()]));
        assert!(witness_upper(2.0, 3).is_err());
        assert!(witness_upper(1.5, 3).is_err());
    }

    #[test]
    fn insert_zeros_examples() {
        let a = cv(&[1.0, 2.0, 3.0]);
        let b = insert_zeros(&a, &[1, 3, 5]).unwrap();
        assert_eq!(b, cv(&[1.0, 0.0, 2.0, 0.0, 3.0]));
        assert_eq!(b.dim(), 5);
        assert_eq!(insert_zeros(&a, &[1, 2, 3]).unwrap(), a);
        assert_eq!(norm(&b, &SpaceSpec::BlockXp(1.0)).unwrap(), 6.0);
        assert_eq!(max_gap(&[1, 3, 5]), 2);
        assert!(matches!(
            insert_zeros(&a, &[1, 3, 3]),
            Err(Error::NonMonotone(3))
        ));
        assert!(matches!(
            insert_zeros(&a, &[2, 1, 3]),
            Err(Error::NonMonotone(2))
        ));
        assert!(insert_zeros(&a, &[1, 2]).is_err());
    }

    #[test]
    fn partial_sums_example_and_errors() {
        let ones = cv(&[1.0, 1.0, 1.0]);
        assert_eq!(
            partial_sum_norms(&ones, &SpaceSpec::Lp(1.0), &[1, 2, 3]).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert!(partial_sum_norms(&ones, &SpaceSpec::Lp(1.0), &[2, 1]).is_err());
        assert!(partial_sum_norms(&ones, &SpaceSpec::Lp(1.0), &[4]).is_err());
    }

    #[test]
    fn sparse_and_dense_norms_agree_bitwise() {
        let dense = witness_upper(3.0, 5).unwrap();
        let sparse = dense.to_sparse();
        for space in [
            SpaceSpec::SupC0,
            SpaceSpec::Lp(1.0),
            SpaceSpec::Lp(3.0),
            SpaceSpec::BlockXp(1.5),
            SpaceSpec::BlockXp(3.0),
        ] {
            let a = norm(&dense, &space).unwrap();
            let b = norm_sparse(&sparse, &space).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "{space}");
        }
    }

    #[test]
    fn sparse_pairs_merge_duplicates() {
        let s = SparseVec::from_pairs(vec![(5, 1.0), (2, 3.0), (5, -0.5)]).unwrap();
        assert_eq!(s.entries(), &[(2, 3.0), (5, 0.5)]);
        assert!(SparseVec::from_pairs(vec![(0, 1.0)]).is_err());
    }
}
