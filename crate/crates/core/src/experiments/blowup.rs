//! Blow-up of the associated Rademacher averages in `c_0` and `l^1`.

use rayon::prelude::*;

use super::{check_cap, normalize_ns, GrowthRow, GrowthTable, TableMeta};
use crate::bases::BasisMap;
use crate::error::{Error, Result};
use crate::rademacher::{rad_norm, RadMode, RadNormConfig};
use crate::semigroup::{
    apply_associated, diag_coeff, make_q_schedule, MultiplierSemigroup, QKind, RadElement,
};
use crate::spaces::{CoeffVec, SpaceSpec};

/// Summing basis of `c_0`, `x_N = sum_{m <= N} (s_{2m} - s_{2m-1}) (x) r_m`
/// and `q_m = ln2 / 2^{2m-1}` at `t = 1`.
///
/// In exact mode the input norm must come out as exactly 1.
pub fn run_c0_blowup(ns: &[usize], cfg: &RadNormConfig) -> Result<GrowthTable> {
    let ns = normalize_ns(ns)?;
    check_cap(&ns, cfg)?;
    let space = SpaceSpec::SupC0;
    let rows = ns
        .par_iter()
        .map(|&n| {
            let dim = 2 * n;
            let sg = MultiplierSemigroup::new(BasisMap::summing(dim)?);
            let q = make_q_schedule(QKind::C0Style, n)?;
            let terms = (1..=n)
                .map(|m| CoeffVec::unit(2 * m, dim))
                .collect::<Result<Vec<_>>>()?;
            let x = RadElement::new(terms)?;
            let input = rad_norm(&x, &space, cfg)?;
            if cfg.mode == RadMode::Exact && input.value != 1.0 {
                return Err(Error::Invariant(format!(
                    "c0 input norm at N = {n} is {}, expected 1",
                    input.value
                )));
            }
            let y = apply_associated(&sg, &q, 1.0, &x)?;
            let output = rad_norm(&y, &space, cfg)?;
            Ok(GrowthRow::new(n, input.value, output.value, output.stderr))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut meta = TableMeta::new("c0-blowup", space.to_string(), "ln2/2^(2n-1)", &cfg.mode);
    meta.extra.push(("t".into(), 1.0));
    GrowthTable::new(meta, rows)
}

/// Difference basis of `l^1`, `x_N = sum_{n <= N} r_n (x) e_N` and
/// `q_n = ln2 / 2^n` at `t = 1`.
///
/// Each row also carries the lower bound
/// `sum_{m < N} E|sum_n (exp(-2^m q_n) - exp(-2^{m+1} q_n)) r_n|`, which is
/// the part of the output norm carried by the coordinates `1..N-1`.
pub fn run_l1_blowup(ns: &[usize], cfg: &RadNormConfig) -> Result<GrowthTable> {
    let ns = normalize_ns(ns)?;
    check_cap(&ns, cfg)?;
    let space = SpaceSpec::Lp(1.0);
    let rows = ns
        .par_iter()
        .map(|&n| {
            let sg = MultiplierSemigroup::new(BasisMap::difference(n)?);
            let q = make_q_schedule(QKind::GeomStyle, n)?;
            let x = RadElement::new(vec![CoeffVec::unit(n, n)?; n])?;
            let input = rad_norm(&x, &space, cfg)?;
            let y = apply_associated(&sg, &q, 1.0, &x)?;
            let output = rad_norm(&y, &space, cfg)?;
            let mut row = GrowthRow::new(n, input.value, output.value, output.stderr);
            row.lower_bound = Some(l1_proof_bound(n, &q, cfg)?);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut meta = TableMeta::new("l1-blowup", space.to_string(), "ln2/2^n", &cfg.mode);
    meta.extra.push(("t".into(), 1.0));
    GrowthTable::new(meta, rows)
}

fn l1_proof_bound(n: usize, q: &crate::semigroup::QSchedule, cfg: &RadNormConfig) -> Result<f64> {
    if n == 1 {
        return Ok(0.0);
    }
    let terms = (1..=n)
        .map(|j| {
            let t = q.time(j)?;
            let v = (1..n as u32)
                .map(|m| Ok(diag_coeff(m, t)? - diag_coeff(m + 1, t)?))
                .collect::<Result<Vec<_>>>()?;
            CoeffVec::new(v)
        })
        .collect::<Result<Vec<_>>>()?;
    // the l^1 norm splits into the coordinate-wise expectations
    Ok(rad_norm(&RadElement::new(terms)?, &SpaceSpec::Lp(1.0), cfg)?.value)
}
