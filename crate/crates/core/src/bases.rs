//! Schauder bases of sequence spaces as explicit coordinate maps.
//!
//! Every basis here is a triangular (or permuted-triangular) perturbation of
//! the unit vectors, so `analyze` has an O(dim) closed form:
//!
//! | basis      | `f_m` in unit vectors                         |
//! |------------|-----------------------------------------------|
//! | Standard   | `e_m`                                         |
//! | Summing    | `s_m = e_1 + ... + e_m`                       |
//! | Difference | `e_1`, then `e_m - e_{m-1}`                   |
//! | FPrime     | `e_m` (m odd), `e_{pi(m)} + e_{m-1}` (m even) |
//! | FSecond    | `e_m + e_{pi(m+1)}` (m odd), `e_{pi(m)}` (m even) |
//!
//! `pi` is the permutation of the even numbers from [`make_permutation_pi`].
//! For the permuted bases the number of basis vectors (`len`) and the ambient
//! dimension differ: `f'_m` for `m <= 2K` reaches coordinates up to
//! `max pi(2k)`, which grows quadratically in `K`.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spaces::{block_bounds, block_of, norm_slice, CoeffVec, SpaceSpec, SparseVec};
use crate::summation::Neumaier;

/// Supports up to this size are searched over every sign pattern.
pub const EXHAUSTIVE_SUPPORT: usize = 20;

/// The permutation `pi` of the even numbers, tabulated on `2, 4, ..., 2K`.
///
/// `pi(4k + 2) = b_k`, the first even number of block `B_{k+2}` (the blocks
/// `B_2, B_3, ...` are the ones that contain an even number), and `pi(4k)` is
/// the smallest even number that is neither some `b_j` nor already used.
/// Odd arguments are fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct Permutation {
    evens: Vec<usize>,
}

/// `b_k`, the first even number in the `(k+1)`-th block that contains one.
pub fn b_value(k: usize) -> Result<usize> {
    let (lo, _) = block_bounds(k + 2)?;
    Ok(if lo % 2 == 0 { lo } else { lo + 1 })
}

/// Whether the even number `e` is the first even entry of its block.
pub fn is_b_value(e: usize) -> bool {
    debug_assert!(e.is_multiple_of(2) && e > 0);
    let (lo, _) = block_bounds(block_of(e)).expect("block of a valid index");
    e == lo || e == lo + 1
}

pub fn make_permutation_pi(k_max: usize) -> Permutation {
    let mut evens = Vec::with_capacity(k_max);
    // the min-rule only ever takes non-b evens, in increasing order
    let mut next_free = 2usize;
    for j in 1..=k_max {
        let m = 2 * j;
        if m % 4 == 2 {
            evens.push(b_value((m - 2) / 4).expect("b_k fits in usize"));
        } else {
            while is_b_value(next_free) {
                next_free += 2;
            }
            evens.push(next_free);
            next_free += 2;
        }
    }
    Permutation { evens }
}

impl Permutation {
    /// `K`: the table covers the evens `2..=2K`.
    pub fn k(&self) -> usize {
        self.evens.len()
    }

    /// `pi(m)`, or `None` for an even `m` beyond the table.
    pub fn apply(&self, m: usize) -> Option<usize> {
        if m == 0 {
            None
        } else if m % 2 == 1 {
            Some(m)
        } else {
            self.evens.get(m / 2 - 1).copied()
        }
    }

    /// `(m, pi(m))` for the tabulated evens.
    pub fn even_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.evens
            .iter()
            .enumerate()
            .map(|(j, &v)| (2 * (j + 1), v))
    }

    pub fn max_image(&self) -> usize {
        self.evens.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Standard,
    Summing,
    Difference,
    FPrime,
    FSecond,
}

/// A basis `(f_m)_{m <= len}` of a subspace of `R^ambient`.
#[derive(Debug, Clone)]
pub struct BasisMap {
    kind: BasisKind,
    len: usize,
    ambient: usize,
    perm: Option<Arc<Permutation>>,
    // image of pi on the tabulated evens -> argument
    inverse: Option<Arc<HashMap<usize, usize>>>,
}

impl BasisMap {
    pub fn standard(dim: usize) -> Result<Self> {
        Self::simple(BasisKind::Standard, dim)
    }

    pub fn summing(dim: usize) -> Result<Self> {
        Self::simple(BasisKind::Summing, dim)
    }

    pub fn difference(dim: usize) -> Result<Self> {
        Self::simple(BasisKind::Difference, dim)
    }

    fn simple(kind: BasisKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyVector);
        }
        Ok(Self {
            kind,
            len: dim,
            ambient: dim,
            perm: None,
            inverse: None,
        })
    }

    /// `f'_1, ..., f'_{2K}` with the smallest ambient dimension that holds them.
    pub fn fprime(k_max: usize) -> Result<Self> {
        Self::permuted(BasisKind::FPrime, k_max, None)
    }

    pub fn fsecond(k_max: usize) -> Result<Self> {
        Self::permuted(BasisKind::FSecond, k_max, None)
    }

    /// Like [`BasisMap::fprime`] but in a caller-chosen ambient dimension;
    /// fails if some `pi(m)` does not fit.
    pub fn fprime_in(k_max: usize, ambient: usize) -> Result<Self> {
        Self::permuted(BasisKind::FPrime, k_max, Some(ambient))
    }

    pub fn fsecond_in(k_max: usize, ambient: usize) -> Result<Self> {
        Self::permuted(BasisKind::FSecond, k_max, Some(ambient))
    }

    fn permuted(kind: BasisKind, k_max: usize, ambient: Option<usize>) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::OutOfRange("K must be at least 1".into()));
        }
        let perm = make_permutation_pi(k_max);
        let needed = perm.max_image().max(2 * k_max);
        let ambient = match ambient {
            Some(dim) => {
                if let Some((m, v)) = perm.even_pairs().find(|(_, v)| *v > dim) {
                    return Err(Error::DomainClosure { m, value: v, dim });
                }
                if dim < 2 * k_max {
                    return Err(Error::DomainClosure {
                        m: 2 * k_max - 1,
                        value: 2 * k_max - 1,
                        dim,
                    });
                }
                dim
            }
            None => needed,
        };
        let inverse: HashMap<usize, usize> = perm.even_pairs().map(|(m, v)| (v, m)).collect();
        Ok(Self {
            kind,
            len: 2 * k_max,
            ambient,
            perm: Some(Arc::new(perm)),
            inverse: Some(Arc::new(inverse)),
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Number of basis vectors.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Dimension of the space of standard coordinates.
    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn permutation(&self) -> Option<&Permutation> {
        self.perm.as_deref()
    }

    fn pi(&self, m: usize) -> usize {
        self.perm
            .as_ref()
            .and_then(|p| p.apply(m))
            .expect("pi is tabulated on every even index of the basis")
    }

    fn check_index(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.len {
            Err(Error::IndexOutOfRange {
                index: m,
                len: self.len,
            })
        } else {
            Ok(())
        }
    }

    /// Nonzero standard coordinates of `f_m`, in increasing index order.
    pub fn basis_vector_entries(&self, m: usize) -> Result<Vec<(usize, f64)>> {
        self.check_index(m)?;
        Ok(match self.kind {
            BasisKind::Standard => vec![(m, 1.0)],
            BasisKind::Summing => (1..=m).map(|i| (i, 1.0)).collect(),
            BasisKind::Difference if m == 1 => vec![(1, 1.0)],
            BasisKind::Difference => vec![(m - 1, -1.0), (m, 1.0)],
            BasisKind::FPrime if m % 2 == 1 => vec![(m, 1.0)],
            BasisKind::FPrime => sorted_pair(m - 1, self.pi(m)),
            BasisKind::FSecond if m % 2 == 1 => sorted_pair(m, self.pi(m + 1)),
            BasisKind::FSecond => vec![(self.pi(m), 1.0)],
        })
    }

    pub fn basis_vector(&self, m: usize) -> Result<CoeffVec> {
        let mut v = vec![0.0; self.ambient];
        for (i, x) in self.basis_vector_entries(m)? {
            v[i - 1] = x;
        }
        Ok(CoeffVec::from_raw(v))
    }

    /// Standard coordinates of `sum_m a_m f_m`.
    pub fn synthesize(&self, a: &CoeffVec) -> Result<CoeffVec> {
        if a.dim() > self.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                found: a.dim(),
            });
        }
        let n = self.len;
        let a = |m: usize| a.get(m);
        let mut x = vec![0.0; self.ambient];
        match self.kind {
            BasisKind::Standard => (1..=n).for_each(|m| x[m - 1] = a(m)),
            BasisKind::Summing => {
                let mut tail = Neumaier::new();
                for i in (1..=n).rev() {
                    tail.add(a(i));
                    x[i - 1] = tail.value();
                }
            }
            BasisKind::Difference => (1..=n).for_each(|i| x[i - 1] = a(i) - a(i + 1)),
            BasisKind::FPrime => {
                for k in 1..=n / 2 {
                    x[2 * k - 2] = a(2 * k - 1) + a(2 * k);
                    x[self.pi(2 * k) - 1] = a(2 * k);
                }
                if n % 2 == 1 {
                    x[n - 1] = a(n);
                }
            }
            BasisKind::FSecond => {
                for k in 1..=n / 2 {
                    x[2 * k - 2] = a(2 * k - 1);
                    x[self.pi(2 * k) - 1] = a(2 * k - 1) + a(2 * k);
                }
            }
        }
        Ok(CoeffVec::from_raw(x))
    }

    /// Basis coordinates of `x`, for `x` in the span of the basis.
    ///
    /// Standard coordinates outside the span (even positions not hit by `pi`)
    /// are ignored.
    pub fn analyze(&self, x: &CoeffVec) -> Result<CoeffVec> {
        if x.dim() > self.ambient {
            return Err(Error::DimensionMismatch {
                expected: self.ambient,
                found: x.dim(),
            });
        }
        let n = self.len;
        let x = |i: usize| x.get(i);
        let mut a = vec![0.0; n];
        match self.kind {
            BasisKind::Standard => (1..=n).for_each(|m| a[m - 1] = x(m)),
            BasisKind::Summing => {
                (1..=n).for_each(|m| a[m - 1] = if m == n { x(m) } else { x(m) - x(m + 1) })
            }
            BasisKind::Difference => {
                let mut tail = Neumaier::new();
                for m in (1..=n).rev() {
                    tail.add(x(m));
                    a[m - 1] = tail.value();
                }
            }
            BasisKind::FPrime => {
                for k in 1..=n / 2 {
                    let even = x(self.pi(2 * k));
                    a[2 * k - 1] = even;
                    a[2 * k - 2] = x(2 * k - 1) - even;
                }
                if n % 2 == 1 {
                    a[n - 1] = x(n);
                }
            }
            BasisKind::FSecond => {
                for k in 1..=n / 2 {
                    let odd = x(2 * k - 1);
                    a[2 * k - 2] = odd;
                    a[2 * k - 1] = x(self.pi(2 * k)) - odd;
                }
            }
        }
        Ok(CoeffVec::from_raw(a))
    }

    /// [`BasisMap::synthesize`] for sparse coefficient vectors.
    pub fn synthesize_sparse(&self, a: &SparseVec) -> Result<SparseVec> {
        if a.max_index() > self.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                found: a.max_index(),
            });
        }
        if matches!(self.kind, BasisKind::Summing | BasisKind::Difference) {
            return Ok(self.synthesize(&a.to_dense(self.len)?)?.to_sparse());
        }
        let mut pairs = Vec::with_capacity(2 * a.len());
        for &(m, c) in a.entries() {
            for (i, x) in self.basis_vector_entries(m)? {
                pairs.push((i, c * x));
            }
        }
        SparseVec::from_pairs(pairs)
    }

    /// [`BasisMap::analyze`] for sparse vectors; never touches the ambient
    /// dimension densely for the permuted bases.
    pub fn analyze_sparse(&self, x: &SparseVec) -> Result<SparseVec> {
        if x.max_index() > self.ambient {
            return Err(Error::DimensionMismatch {
                expected: self.ambient,
                found: x.max_index(),
            });
        }
        match self.kind {
            BasisKind::Standard => Ok(x.clone()),
            BasisKind::Summing | BasisKind::Difference => {
                Ok(self.analyze(&x.to_dense(self.ambient)?)?.to_sparse())
            }
            BasisKind::FPrime | BasisKind::FSecond => {
                let inverse = self
                    .inverse
                    .as_ref()
                    .expect("permuted basis has an inverse");
                let n = self.len;
                let mut odd: HashMap<usize, f64> = HashMap::new();
                let mut even: HashMap<usize, f64> = HashMap::new();
                for &(i, v) in x.entries() {
                    if i % 2 == 1 && i <= n {
                        odd.insert(i, v);
                    } else if i % 2 == 0 {
                        if let Some(&m) = inverse.get(&i) {
                            even.insert(m, v);
                        }
                    }
                }
                let mut pairs = Vec::new();
                let pairs_k: std::collections::BTreeSet<usize> = odd
                    .keys()
                    .map(|i| i.div_ceil(2))
                    .chain(even.keys().map(|m| m / 2))
                    .collect();
                for k in pairs_k {
                    let xo = odd.get(&(2 * k - 1)).copied().unwrap_or(0.0);
                    if 2 * k > n {
                        // trailing odd basis vector of an odd-length FPrime
                        pairs.push((2 * k - 1, xo));
                        continue;
                    }
                    let xe = even.get(&(2 * k)).copied().unwrap_or(0.0);
                    match self.kind {
                        BasisKind::FPrime => {
                            pairs.push((2 * k - 1, xo - xe));
                            pairs.push((2 * k, xe));
                        }
                        _ => {
                            pairs.push((2 * k - 1, xo));
                            pairs.push((2 * k, xe - xo));
                        }
                    }
                }
                pairs.retain(|(_, v)| *v != 0.0);
                SparseVec::from_pairs(pairs)
            }
        }
    }

    /// `P_N x = sum_{m <= N} a_m f_m` where `a` are the coordinates of `x`.
    pub fn project(&self, x: &CoeffVec, n: usize) -> Result<CoeffVec> {
        self.check_index(n)?;
        let a = self.analyze(x)?;
        let head = CoeffVec::from_raw(a.as_slice()[..n].to_vec());
        self.synthesize(&head)
    }

    pub fn project_sparse(&self, x: &SparseVec, n: usize) -> Result<SparseVec> {
        self.check_index(n)?;
        let a = self.analyze_sparse(x)?;
        let head = SparseVec::from_pairs(
            a.entries()
                .iter()
                .copied()
                .filter(|(m, _)| *m <= n)
                .collect(),
        )?;
        self.synthesize_sparse(&head)
    }
}

fn sorted_pair(i: usize, j: usize) -> Vec<(usize, f64)> {
    if i < j {
        vec![(i, 1.0), (j, 1.0)]
    } else {
        vec![(j, 1.0), (i, 1.0)]
    }
}

/// Lower bound for the unconditional constant of `basis` in `space`:
/// the largest `||sum eps_m a_m f_m|| / ||sum a_m f_m||` found.
///
/// The coefficient vectors tried are `2 * trials` seeded Gaussian samples,
/// half of them with alternating signs `(-1)^m |g_m|`. For each, the sign
/// search is exhaustive when the support has at most
/// [`EXHAUSTIVE_SUPPORT`] entries, and otherwise runs single-flip hill
/// climbing from the all-plus pattern, from `sign(a)`, and from seeded random
/// patterns. Every reported ratio is recomputed from scratch, never taken
/// from the incremental search state. The result is at least 1.
pub fn unconditional_constant_lb(
    basis: &BasisMap,
    space: &SpaceSpec,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    space.validate()?;
    if trials == 0 {
        return Err(Error::OutOfRange("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 1.0f64;
    for t in 0..2 * trials {
        let alternating = t % 2 == 1;
        let a: Vec<f64> = (1..=basis.len())
            .map(|m| {
                let g: f64 = rng.sample(StandardNormal);
                if alternating {
                    if m % 2 == 0 {
                        g.abs()
                    } else {
                        -g.abs()
                    }
                } else {
                    g
                }
            })
            .collect();
        if let Some(r) = best_sign_ratio(basis, space, &a, &mut rng)? {
            best = best.max(r);
        }
    }
    Ok(best)
}

/// Best ratio over sign patterns for one coefficient vector; `None` if
/// `sum a_m f_m = 0`.
pub fn best_sign_ratio(
    basis: &BasisMap,
    space: &SpaceSpec,
    a: &[f64],
    rng: &mut impl Rng,
) -> Result<Option<f64>> {
    let base = evaluate_signed(basis, space, a, &vec![1.0; a.len()])?;
    if base == 0.0 {
        return Ok(None);
    }
    let support: Vec<usize> = (0..a.len()).filter(|&i| a[i] != 0.0).collect();
    let columns: Vec<Vec<(usize, f64)>> = (1..=a.len())
        .map(|m| basis.basis_vector_entries(m))
        .collect::<Result<_>>()?;

    let mut tracker = NormTracker::new(basis.ambient_dim(), *space);
    let mut signs = vec![1.0; a.len()];
    for &i in &support {
        tracker.apply(&columns[i], a[i]);
    }
    tracker.resync();

    let best_signs = if support.len() <= EXHAUSTIVE_SUPPORT {
        exhaustive(&support, &columns, a, &mut signs, &mut tracker)
    } else {
        let mut starts: Vec<Vec<f64>> = vec![
            vec![1.0; a.len()],
            a.iter()
                .map(|v| if *v < 0.0 { -1.0 } else { 1.0 })
                .collect(),
        ];
        for _ in 0..4 {
            starts.push(
                (0..a.len())
                    .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                    .collect(),
            );
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for start in starts {
            let (value, found) =
                hill_climb(&support, &columns, a, &start, space, basis.ambient_dim());
            if best.as_ref().is_none_or(|(v, _)| value > *v) {
                best = Some((value, found));
            }
        }
        best.expect("at least one start").1
    };
    let top = evaluate_signed(basis, space, a, &best_signs)?;
    Ok(Some((top / base).max(1.0)))
}

fn evaluate_signed(basis: &BasisMap, space: &SpaceSpec, a: &[f64], signs: &[f64]) -> Result<f64> {
    let signed: Vec<f64> = a.iter().zip(signs).map(|(x, s)| x * s).collect();
    let y = basis.synthesize(&CoeffVec::from_raw(signed))?;
    Ok(norm_slice(y.as_slice(), space))
}

fn exhaustive(
    support: &[usize],
    columns: &[Vec<(usize, f64)>],
    a: &[f64],
    signs: &mut [f64],
    tracker: &mut NormTracker,
) -> Vec<f64> {
    // the first support sign stays +1: ||-y|| = ||y||
    let free = &support[support.len().min(1)..];
    let mut best_value = tracker.value();
    let mut best = signs.to_vec();
    let total = 1u64 << free.len();
    for step in 1..total {
        // Gray code: flip the bit that changes between step-1 and step
        let bit = step.trailing_zeros() as usize;
        let i = free[bit];
        tracker.apply(&columns[i], -2.0 * signs[i] * a[i]);
        signs[i] = -signs[i];
        let v = tracker.value();
        if v > best_value {
            best_value = v;
            best.copy_from_slice(signs);
        }
    }
    best
}

fn hill_climb(
    support: &[usize],
    columns: &[Vec<(usize, f64)>],
    a: &[f64],
    start: &[f64],
    space: &SpaceSpec,
    ambient: usize,
) -> (f64, Vec<f64>) {
    let mut signs = start.to_vec();
    let mut tracker = NormTracker::new(ambient, *space);
    for &i in support {
        tracker.apply(&columns[i], signs[i] * a[i]);
    }
    tracker.resync();
    let mut current = tracker.value();
    for _pass in 0..50 {
        let mut improved = false;
        for &i in support {
            tracker.apply(&columns[i], -2.0 * signs[i] * a[i]);
            let v = tracker.value();
            if v > current * (1.0 + 1e-12) {
                signs[i] = -signs[i];
                current = v;
                improved = true;
            } else {
                tracker.apply(&columns[i], 2.0 * signs[i] * a[i]);
            }
        }
        tracker.resync();
        current = tracker.value();
        if !improved {
            break;
        }
    }
    (current, signs)
}

/// Incrementally maintained norm of a vector under sparse rank-one updates.
struct NormTracker {
    y: Vec<f64>,
    space: SpaceSpec,
    // Lp: sum |y_i|^p; BlockXp: per-block squared mass and sum of mass^{p/2}
    total: f64,
    blocks: Vec<f64>,
}

impl NormTracker {
    fn new(dim: usize, space: SpaceSpec) -> Self {
        let nblocks = if dim == 0 { 0 } else { block_of(dim) };
        Self {
            y: vec![0.0; dim],
            space,
            total: 0.0,
            blocks: vec![0.0; nblocks],
        }
    }

    fn apply(&mut self, column: &[(usize, f64)], scale: f64) {
        for &(i, c) in column {
            let old = self.y[i - 1];
            let new = old + scale * c;
            self.y[i - 1] = new;
            match self.space {
                SpaceSpec::SupC0 => {}
                SpaceSpec::Lp(p) => self.total += new.abs().powf(p) - old.abs().powf(p),
                SpaceSpec::BlockXp(p) => {
                    let k = block_of(i) - 1;
                    let before = self.blocks[k];
                    let after = (before + new * new - old * old).max(0.0);
                    self.blocks[k] = after;
                    self.total += after.powf(p / 2.0) - before.powf(p / 2.0);
                }
            }
        }
    }

    fn resync(&mut self) {
        match self.space {
            SpaceSpec::SupC0 => {}
            SpaceSpec::Lp(p) => {
                self.total = self
                    .y
                    .iter()
                    .map(|v| v.abs().powf(p))
                    .collect::<Neumaier>()
                    .value();
            }
            SpaceSpec::BlockXp(p) => {
                let mut total = Neumaier::new();
                for (k, slot) in self.blocks.iter_mut().enumerate() {
                    let (lo, hi) = block_bounds(k + 1).expect("block within dim");
                    let hi = hi.min(self.y.len());
                    *slot = self.y[lo - 1..hi]
                        .iter()
                        .map(|v| v * v)
                        .collect::<Neumaier>()
                        .value();
                    total.add(slot.powf(p / 2.0));
                }
                self.total = total.value();
            }
        }
    }

    fn value(&self) -> f64 {
        match self.space {
            SpaceSpec::SupC0 => norm_slice(&self.y, &self.space),
            SpaceSpec::Lp(p) | SpaceSpec::BlockXp(p) => self.total.max(0.0).powf(1.0 / p),
        }
    }
}
