//! Scenario runners that build the blow-up witnesses and the finite checks
//! around them, and the growth tables they produce.

mod blowup;
mod checks;
mod xp;

pub use blowup::{run_c0_blowup, run_l1_blowup};
pub use checks::{
    khintchine_scan, lemma_max_scan, pi_table, random_gap_map, run_fprime_unconditional_probe,
    run_nonequivalence, run_zero_insertion_check, zero_insertion_bound, zero_insertion_ratio,
    KhintchineRow, LemmaRow, NonequivReport, NonequivRow, PiRow, ProbeRow, ZeroInsertionReport,
};
pub use xp::{
    blocks_needed_for_ratio, even_side_limit, projection_identity_holds, run_rbasis_witness,
    run_xp_blowup, support_size, xp_block_ends, xp_ratio_lower_bound, xp_support,
    xp_witness_sequence, EvenSideLimit, WitnessTerm,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rademacher::{RadMode, RadNormConfig};

/// Relative tolerance for `ratio == output / input` in a table.
pub const RATIO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub input_norm: f64,
    pub output_norm: f64,
    pub ratio: f64,
    pub stderr: f64,
    /// A proven lower bound for `output_norm`, when the experiment has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
}

impl GrowthRow {
    pub fn new(n: usize, input_norm: f64, output_norm: f64, stderr: f64) -> Self {
        Self {
            n,
            input_norm,
            output_norm,
            ratio: output_norm / input_norm,
            stderr,
            lower_bound: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub experiment: String,
    pub space: String,
    pub schedule: String,
    pub mode: String,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub p: Option<f64>,
    /// Named scalars specific to the experiment.
    #[serde(default)]
    pub extra: Vec<(String, f64)>,
}

impl TableMeta {
    pub fn new(experiment: &str, space: String, schedule: &str, mode: &RadMode) -> Self {
        let (mode_label, seed, samples) = match *mode {
            RadMode::Exact => ("exact", None, None),
            RadMode::MonteCarlo { samples, seed } => ("mc", Some(seed), Some(samples)),
        };
        Self {
            experiment: experiment.to_string(),
            space,
            schedule: schedule.to_string(),
            mode: mode_label.to_string(),
            seed,
            samples,
            p: None,
            extra: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub meta: TableMeta,
    pub rows: Vec<GrowthRow>,
}

impl GrowthTable {
    /// Checks that rows are strictly sorted by `N` and that every ratio is
    /// `output / input`.
    pub fn new(meta: TableMeta, rows: Vec<GrowthRow>) -> Result<Self> {
        if let Some(w) = rows.windows(2).find(|w| w[1].n <= w[0].n) {
            return Err(Error::Invariant(format!(
                "rows are not sorted by N ({} then {})",
                w[0].n, w[1].n
            )));
        }
        for r in &rows {
            let expected = r.output_norm / r.input_norm;
            if (r.ratio - expected).abs() > RATIO_TOL * expected.abs() {
                return Err(Error::Invariant(format!(
                    "ratio {} at N = {} differs from output/input = {expected}",
                    r.ratio, r.n
                )));
            }
        }
        Ok(Self { meta, rows })
    }

    pub fn ns(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.n).collect()
    }

    pub fn inputs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.input_norm).collect()
    }

    pub fn outputs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.output_norm).collect()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ratio).collect()
    }

    pub fn row(&self, n: usize) -> Option<&GrowthRow> {
        self.rows
            .binary_search_by_key(&n, |r| r.n)
            .ok()
            .map(|i| &self.rows[i])
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.meta
            .extra
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
    }
}

/// Least-squares slope of `log(ratio)` against `log(N)`.
pub fn fit_growth(table: &GrowthTable) -> Result<f64> {
    let xs: Vec<f64> = table.rows.iter().map(|r| r.n as f64).collect();
    fit_loglog(&xs, &table.ratios())
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::OutOfRange(
            "a growth fit needs at least two rows".into(),
        ));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::OutOfRange(format!(
            "a log-log fit needs positive finite values, got {v}"
        )));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::OutOfRange(
            "a growth fit needs at least two distinct N".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Sorted, deduplicated `N` values, all at least 1.
fn normalize_ns(ns: &[usize]) -> Result<Vec<usize>> {
    if ns.is_empty() {
        return Err(Error::OutOfRange("the list of N is empty".into()));
    }
    if ns.contains(&0) {
        return Err(Error::OutOfRange("N must be at least 1".into()));
    }
    let mut v = ns.to_vec();
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

fn check_cap(ns: &[usize], cfg: &RadNormConfig) -> Result<()> {
    cfg.validate()?;
    if let RadMode::Exact = cfg.mode {
        let n = *ns.last().expect("non-empty");
        if n > crate::rademacher::EXACT_CAP {
            return Err(Error::ExactCapExceeded {
                n,
                cap: crate::rademacher::EXACT_CAP,
            });
        }
    }
    Ok(())
}
