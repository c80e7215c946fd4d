//! The `X^p` witness for `p > 2`: a coefficient sequence whose expansion in
//! the even vectors `e_{pi(2m)}` stays bounded while its odd partner
//! `sum a_m e_{2m-1}` diverges.
//!
//! The support is `m = 2k + 1` for `k` in
//! `S_n = {k >= 1 : 4k + 1 in B_{2^n}}` with `a_m = |S_n|^{-1/2}`. On the
//! odd side `e_{2m-1} = e_{4k+1}` fills block `B_{2^n}` with squared mass
//! exactly 1. On the even side `pi(4k + 2) = b_k` puts one coefficient in
//! each block `B_{k+2}`, so the even sum behaves like an `l^p` sequence and
//! its p-th power is `sum_n |S_n|^{1 - p/2}`.
//!
//! All terms of the Rademacher sums below have pairwise disjoint supports,
//! so their averages equal the plain norm of the sum. Tables have one row
//! per support index `m`.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GrowthRow, GrowthTable, TableMeta};
use crate::bases::BasisMap;
use crate::error::{Error, Result};
use crate::rademacher::RadMode;
use crate::semigroup::{make_q_schedule, MultiplierSemigroup, QKind};
use crate::spaces::{block_of, dyadic_block, pow_norm, root, SpaceSpec, SparseVec};
use crate::summation::ExactSum;

/// Largest dyadic block index a witness may cover.
pub const MAX_WITNESS_N: u32 = 22;
/// The even-side series is summed exactly up to this block index.
const SERIES_END: u32 = 60;

/// `(k_lo, k_hi)` with `S_n = {k_lo, ..., k_hi}`.
pub fn xp_support(n: u32) -> Result<(usize, usize)> {
    let (lo, hi) = dyadic_block(n)?;
    let k_lo = (lo - 1).div_ceil(4).max(1);
    let k_hi = (hi - 1) / 4;
    if k_lo > k_hi {
        return Err(Error::OutOfRange(format!("S_{n} is empty")));
    }
    Ok((k_lo, k_hi))
}

/// `|S_n|` for `1 <= n <= 60`, in exact integer arithmetic.
pub fn support_size(n: u32) -> Result<u128> {
    if n == 0 || n > SERIES_END {
        return Err(Error::OutOfRange(format!(
            "n = {n} is outside 1..={SERIES_END}"
        )));
    }
    let k = 1u128 << n;
    let hi = k * (k + 1) / 2;
    let lo = hi - k + 1;
    let k_lo = (lo - 1).div_ceil(4).max(1);
    let k_hi = (hi - 1) / 4;
    Ok(k_hi.saturating_sub(k_lo) + u128::from(k_hi >= k_lo))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessTerm {
    /// Support index `m = 2k + 1`.
    pub m: usize,
    pub coeff: f64,
    /// The dyadic block `B_{2^n}` holding `e_{2m-1}`.
    pub n: u32,
}

fn check_range(p: f64, n_lo: u32, n_hi: u32) -> Result<()> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "the X^p witness needs p > 2, got {p}"
        )));
    }
    if n_lo > n_hi {
        return Err(Error::OutOfRange(format!(
            "empty block range {n_lo}..={n_hi}"
        )));
    }
    if n_hi > MAX_WITNESS_N {
        return Err(Error::OutOfRange(format!(
            "block index {n_hi} exceeds {MAX_WITNESS_N}"
        )));
    }
    Ok(())
}

pub(crate) fn witness_terms(p: f64, n_lo: u32, n_hi: u32) -> Result<Vec<WitnessTerm>> {
    check_range(p, n_lo, n_hi)?;
    let mut terms = Vec::new();
    for n in n_lo..=n_hi {
        let (k_lo, k_hi) = xp_support(n)?;
        let coeff = 1.0 / ((k_hi - k_lo + 1) as f64).sqrt();
        terms.extend((k_lo..=k_hi).map(|k| WitnessTerm {
            m: 2 * k + 1,
            coeff,
            n,
        }));
    }
    Ok(terms)
}

/// `(a_m)` indexed by `m`, covering the blocks `B_{2^n}` for `n_lo <= n <= n_hi`.
pub fn xp_witness_sequence(p: f64, n_lo: u32, n_hi: u32) -> Result<SparseVec> {
    let terms = witness_terms(p, n_lo, n_hi)?;
    SparseVec::from_pairs(terms.iter().map(|t| (t.m, t.coeff)).collect())
}

/// `(n, m)` where `m` is the last support index of block `B_{2^n}`.
pub fn xp_block_ends(n_lo: u32, n_hi: u32) -> Result<Vec<(u32, usize)>> {
    (n_lo..=n_hi)
        .map(|n| Ok((n, 2 * xp_support(n)?.1 + 1)))
        .collect()
}

/// The limit of the even-side norms `||sum_{m <= N} a_m e_{pi(2m)}||`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvenSideLimit {
    /// Partial sums of `sum_{n >= n_start} |S_n|^{1 - p/2}` up to `n = 60`.
    pub partial_powers: Vec<f64>,
    /// Upper bound for the remaining terms `n > 60`.
    pub tail_bound: f64,
    /// Upper bound for the limiting norm.
    pub value: f64,
}

impl EvenSideLimit {
    /// Size of the last exactly summed term.
    pub fn last_increment(&self) -> f64 {
        match self.partial_powers.as_slice() {
            [.., a, b] => b - a,
            [b] => *b,
            [] => 0.0,
        }
    }
}

pub fn even_side_limit(p: f64, n_start: u32) -> Result<EvenSideLimit> {
    check_range(p, n_start, n_start)?;
    let mut acc = ExactSum::new();
    let mut partial_powers = Vec::new();
    for n in n_start..=SERIES_END {
        let s = support_size(n)? as f64;
        acc.add(s.powf(1.0 - p / 2.0));
        partial_powers.push(acc.value());
    }
    // |S_n| >= 2^{n-3} for n >= 3, so the tail is below a geometric series
    let r = 2f64.powf(1.0 - p / 2.0);
    let tail_bound = 2f64.powf((SERIES_END as f64 - 2.0) * (1.0 - p / 2.0)) / (1.0 - r);
    let total = partial_powers.last().copied().unwrap_or(0.0) + tail_bound;
    Ok(EvenSideLimit {
        partial_powers,
        tail_bound,
        value: root(total, p),
    })
}

/// Lower bound for the `X^p` blow-up ratio after `blocks` covered blocks,
/// given the even-side limit `even_limit`.
pub fn xp_ratio_lower_bound(p: f64, blocks: usize, even_limit: f64) -> f64 {
    ((blocks as f64).powf(1.0 / p) - even_limit) / (4.0 * even_limit)
}

/// Number of covered blocks after which the ratio provably exceeds `bound`.
pub fn blocks_needed_for_ratio(p: f64, bound: f64, even_limit: f64) -> f64 {
    ((4.0 * bound + 1.0) * even_limit).powf(p).ceil()
}

/// Running `X^p` norm of a sparse vector that grows one entry at a time.
struct BlockPowerSum {
    p: f64,
    blocks: HashMap<usize, (ExactSum, f64)>,
    total: ExactSum,
}

impl BlockPowerSum {
    fn new(p: f64) -> Self {
        Self {
            p,
            blocks: HashMap::new(),
            total: ExactSum::new(),
        }
    }

    fn add(&mut self, index: usize, value: f64) {
        let (sq, power) = self
            .blocks
            .entry(block_of(index))
            .or_insert_with(|| (ExactSum::new(), 0.0));
        sq.add(value * value);
        let new = pow_norm(sq.value().sqrt(), self.p);
        self.total.add(-*power);
        self.total.add(new);
        *power = new;
    }

    fn norm(&self) -> f64 {
        root(self.total.value(), self.p)
    }
}

fn disjoint(parts: &[SparseVec]) -> Result<()> {
    let mut seen = HashSet::new();
    for part in parts {
        for &(i, _) in part.entries() {
            if !seen.insert(i) {
                return Err(Error::Invariant(format!(
                    "Rademacher terms share coordinate {i}"
                )));
            }
        }
    }
    Ok(())
}

/// One row per term; term `j` adds `even[j]` to the input and `image[j]` to
/// the output.
fn disjoint_rows(
    p: f64,
    terms: &[WitnessTerm],
    even: &[SparseVec],
    image: &[SparseVec],
) -> Result<Vec<GrowthRow>> {
    disjoint(even)?;
    disjoint(image)?;
    let mut input = BlockPowerSum::new(p);
    let mut output = BlockPowerSum::new(p);
    let mut rows = Vec::with_capacity(terms.len());
    for ((t, x), y) in terms.iter().zip(even).zip(image) {
        for &(i, v) in x.entries() {
            input.add(i, v);
        }
        for &(i, v) in y.entries() {
            output.add(i, v);
        }
        rows.push(GrowthRow::new(t.m, input.norm(), output.norm(), 0.0));
    }
    Ok(rows)
}

struct Witness {
    terms: Vec<WitnessTerm>,
    basis: BasisMap,
    even: Vec<SparseVec>,
}

fn witness(p: f64, n_lo: u32, n_hi: u32) -> Result<Witness> {
    let terms = witness_terms(p, n_lo, n_hi)?;
    let k_max = terms.last().expect("ranges are non-empty").m;
    let basis = BasisMap::fprime(k_max)?;
    let perm = basis.permutation().expect("FPrime is permuted");
    let even = terms
        .iter()
        .map(|t| {
            let pos = perm.apply(2 * t.m).expect("2m <= 2K is tabulated");
            SparseVec::from_pairs(vec![(pos, t.coeff)])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Witness { terms, basis, even })
}

fn xp_meta(experiment: &str, p: f64, schedule: &str, n_lo: u32, n_hi: u32) -> Result<TableMeta> {
    let mut meta = TableMeta::new(
        experiment,
        SpaceSpec::BlockXp(p).to_string(),
        schedule,
        &RadMode::Exact,
    );
    meta.p = Some(p);
    meta.extra.push(("n_first".into(), n_lo as f64));
    meta.extra.push(("n_last".into(), n_hi as f64));
    meta.extra
        .push(("even_side_limit".into(), even_side_limit(p, n_lo)?.value));
    Ok(meta)
}

/// FPrime semigroup on `X^p`, input `sum_m a_m e_{pi(2m)} (x) r_m`, times
/// `q_m = ln2 / 2^{2m-1}` at `t = 1`. Each image is
/// `(a_m / 4)(e_{pi(2m)} - e_{2m-1})`.
pub fn run_xp_blowup(p: f64, n_lo: u32, n_hi: u32) -> Result<GrowthTable> {
    let w = witness(p, n_lo, n_hi)?;
    let k_max = w.basis.len() / 2;
    let q = make_q_schedule(QKind::C0Style, k_max)?;
    let sg = MultiplierSemigroup::new(w.basis);
    let image = w
        .terms
        .par_iter()
        .zip(&w.even)
        .map(|(t, x)| sg.apply_sparse(q.time(t.m)?, x))
        .collect::<Result<Vec<_>>>()?;
    let rows = disjoint_rows(p, &w.terms, &w.even, &image)?;
    let mut meta = xp_meta("xp-blowup", p, q.label(), n_lo, n_hi)?;
    meta.extra.push(("t".into(), 1.0));
    GrowthTable::new(meta, rows)
}

/// FPrime on `X^p` is not an R-basis: the partial-sum projections map the
/// bounded `sum_m r_m a_m e_{pi(2m)}` to `-sum_m r_m a_m e_{2m-1}`, using
/// `P_{2m-1} e_{pi(2m)} = -e_{2m-1}`.
pub fn run_rbasis_witness(p: f64, n_lo: u32, n_hi: u32) -> Result<GrowthTable> {
    let w = witness(p, n_lo, n_hi)?;
    let image = w
        .terms
        .par_iter()
        .zip(&w.even)
        .map(|(t, x)| Ok(w.basis.project_sparse(x, 2 * t.m - 1)?.scaled(-1.0)))
        .collect::<Result<Vec<_>>>()?;
    let rows = disjoint_rows(p, &w.terms, &w.even, &image)?;
    let meta = xp_meta("rbasis", p, "-", n_lo, n_hi)?;
    GrowthTable::new(meta, rows)
}

/// Whether `P_{2m-1} e_{pi(2m)} = -e_{2m-1}` holds exactly for `m <= m_max`.
pub fn projection_identity_holds(m_max: usize) -> Result<bool> {
    let basis = BasisMap::fprime(m_max)?;
    let perm = basis.permutation().expect("FPrime is permuted");
    for m in 1..=m_max {
        let x = SparseVec::from_pairs(vec![(perm.apply(2 * m).expect("tabulated"), 1.0)])?;
        let y = basis.project_sparse(&x, 2 * m - 1)?;
        let nonzero: Vec<_> = y.entries().iter().filter(|(_, v)| *v != 0.0).collect();
        if nonzero != [&(2 * m - 1, -1.0)] {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::norm_sparse;
    use approx::assert_relative_eq;

    #[test]
    fn support_examples() {
        assert!(xp_support(1).is_err());
        assert_eq!(xp_support(2).unwrap(), (2, 2));
        assert_eq!(xp_support(3).unwrap(), (7, 8));
        for n in 2..=MAX_WITNESS_N {
            let (lo, hi) = xp_support(n).unwrap();
            assert_eq!(support_size(n).unwrap(), (hi - lo + 1) as u128);
        }
        assert_eq!(support_size(1).unwrap(), 0);
    }

    #[test]
    fn odd_side_has_unit_mass_per_block() {
        let terms = witness_terms(3.0, 3, 8).unwrap();
        for n in 3..=8 {
            let mass: f64 = terms
                .iter()
                .filter(|t| t.n == n)
                .map(|t| t.coeff * t.coeff)
                .sum();
            assert_relative_eq!(mass, 1.0, max_relative = 1e-12);
            let (lo, hi) = dyadic_block(n).unwrap();
            assert!(terms
                .iter()
                .filter(|t| t.n == n)
                .all(|t| (lo..=hi).contains(&(2 * t.m - 1))));
        }
    }

    #[test]
    fn witness_rejects_bad_parameters() {
        assert!(xp_witness_sequence(2.0, 3, 8).is_err());
        assert!(xp_witness_sequence(3.0, 1, 3).is_err());
        assert!(xp_witness_sequence(3.0, 5, 4).is_err());
        assert!(xp_witness_sequence(3.0, 3, MAX_WITNESS_N + 1).is_err());
    }

    #[test]
    fn xp_rows_match_direct_norms() {
        let p = 3.0;
        let t = run_xp_blowup(p, 3, 5).unwrap();
        let terms = witness_terms(p, 3, 5).unwrap();
        let perm = crate::bases::make_permutation_pi(terms.last().unwrap().m);
        for (row, j) in t.rows.iter().zip(0..) {
            let head = &terms[..=j];
            let mut pairs = Vec::new();
            let mut even = Vec::new();
            for w in head {
                let pos = perm.apply(2 * w.m).unwrap();
                pairs.push((pos, w.coeff / 4.0));
                pairs.push((2 * w.m - 1, -w.coeff / 4.0));
                even.push((pos, w.coeff));
            }
            let out = norm_sparse(
                &SparseVec::from_pairs(pairs).unwrap(),
                &SpaceSpec::BlockXp(p),
            )
            .unwrap();
            let inp = norm_sparse(
                &SparseVec::from_pairs(even).unwrap(),
                &SpaceSpec::BlockXp(p),
            )
            .unwrap();
            assert_relative_eq!(row.output_norm, out, max_relative = 1e-13);
            assert_relative_eq!(row.input_norm, inp, max_relative = 1e-13);
        }
    }

    #[test]
    fn rbasis_output_is_block_count_root() {
        let p = 3.0;
        let t = run_rbasis_witness(p, 3, 6).unwrap();
        for (c, (_, m)) in xp_block_ends(3, 6).unwrap().into_iter().enumerate() {
            let row = t.row(m).unwrap();
            assert_relative_eq!(
                row.output_norm,
                ((c + 1) as f64).powf(1.0 / p),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn even_limit_bounds_partial_sums() {
        let lim = even_side_limit(3.0, 3).unwrap();
        assert!(lim.partial_powers.windows(2).all(|w| w[1] > w[0]));
        assert!(lim.last_increment() < 1e-6);
        assert!(lim.tail_bound < 1e-6);
        let t = run_xp_blowup(3.0, 3, 6).unwrap();
        assert!(t.inputs().iter().all(|&v| v <= lim.value));
    }

    #[test]
    fn projection_identity() {
        assert!(projection_identity_holds(50).unwrap());
    }
}
