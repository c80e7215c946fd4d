//! Command-line front end: one subcommand per experiment, each writing a
//! CSV or JSON table.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use crate::error::Error;
use crate::experiments::{self, fit_loglog};
use crate::rademacher::RadNormConfig;
use crate::report::{self, num, Format, Provenance, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_EXACT_CAP: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_INVARIANT: i32 = 6;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error (unknown subcommand or flag, malformed value, --seed missing in mc mode)
  3  invalid parameter (p, N, dimensions or ranges outside their domain)
  4  exact mode asked for more than 24 Rademacher terms
  5  I/O failure while reading or writing a file
  6  a computed result violated a checked invariant (the table is still written)";

#[derive(Debug, Parser)]
#[command(
    name = "rbound",
    version,
    about = "Finite certificates that Rademacher averages of multiplier semigroups blow up",
    after_help = EXIT_CODES
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// How Rademacher averages are computed: every sign pattern, or sampled.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Number of Monte-Carlo samples.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub samples: usize,
    /// Random seed; required with --mode mc, defaults to 0 for randomized checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; without it the table goes to <out-dir>/<command>.<format>
    /// or to standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Default output directory.
    #[arg(long, global = true, env = "RBOUND_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Peak of d(t) = exp(-2^m t) - exp(-2^{m+1} t): exactly 1/4 at t = ln2/2^m.
    LemmaMax {
        /// Values of m, e.g. 1..20 or 1,2,5.
        #[arg(long = "m", default_value = "1..20", value_parser = parse_usize_list)]
        m: UsizeList,
        /// Points of the log-spaced scan over (0, 1].
        #[arg(long, default_value_t = 20_000)]
        grid: usize,
    },
    /// Summing basis of c0: unit-norm Rademacher sums whose images under the
    /// associated semigroup grow without bound.
    C0Blowup {
        #[arg(long = "N", default_value = "1..12", value_parser = parse_usize_list)]
        n: UsizeList,
    },
    /// Difference basis of l^1: the associated images grow linearly in N.
    L1Blowup {
        #[arg(long = "N", default_value = "1..12", value_parser = parse_usize_list)]
        n: UsizeList,
    },
    /// Permuted basis of X^p (p > 2): bounded inputs whose images diverge.
    XpBlowup {
        #[arg(long, default_value_t = 3.0)]
        p: f64,
        /// Consecutive dyadic block indices n covered by the witness.
        #[arg(long = "n", default_value = "3..8", value_parser = parse_usize_list)]
        n: UsizeList,
    },
    /// Permuted basis of X^p (p > 2) is not an R-basis: partial-sum
    /// projections map a bounded sum to a divergent one.
    Rbasis {
        #[arg(long, default_value_t = 3.0)]
        p: f64,
        #[arg(long = "n", default_value = "3..8", value_parser = parse_usize_list)]
        n: UsizeList,
    },
    /// The unit vectors of X^p and l^p are not equivalent for p != 2.
    Nonequiv {
        #[arg(long)]
        p: f64,
        /// Number of dyadic blocks B_{2^n} in the witness.
        #[arg(long, default_value_t = 8)]
        n_max: u32,
    },
    /// The permutation pi of the even numbers on 2, 4, ..., 2K.
    PiTable {
        #[arg(long = "K", default_value_t = 16)]
        k: usize,
    },
    /// Inserting zeros with gaps at most 2 changes X^p norms by at most 3C^p.
    ZeroInsertion {
        #[arg(long, default_value = "1,1.5,2,3", value_parser = parse_f64_list)]
        p: F64List,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Khintchine ratios E|sum a_k r_k| / ||a||_2 for random a.
    Khintchine {
        #[arg(long = "N", default_value = "1..12", value_parser = parse_usize_list)]
        n: UsizeList,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// The permuted basis of X^p is unconditional for 1 < p <= 2: searched
    /// sign-change ratios stay bounded as the dimension grows.
    FprimeProbe {
        #[arg(long, default_value_t = 1.5)]
        p: f64,
        /// Numbers of basis vectors (even).
        #[arg(long, default_value = "64,256,1024", value_parser = parse_usize_list)]
        dims: UsizeList,
        #[arg(long, default_value_t = 4)]
        trials: usize,
    },
    /// Log-log growth exponent of the ratio column of a growth table (CSV).
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::LemmaMax { .. } => "lemma-max",
            Command::C0Blowup { .. } => "c0-blowup",
            Command::L1Blowup { .. } => "l1-blowup",
            Command::XpBlowup { .. } => "xp-blowup",
            Command::Rbasis { .. } => "rbasis",
            Command::Nonequiv { .. } => "nonequiv",
            Command::PiTable { .. } => "pi-table",
            Command::ZeroInsertion { .. } => "zero-insertion",
            Command::Khintchine { .. } => "khintchine",
            Command::FprimeProbe { .. } => "fprime-probe",
            Command::Fit { .. } => "fit",
        }
    }
}

/// A comma-separated list argument.
#[derive(Debug, Clone, PartialEq)]
pub struct UsizeList(pub Vec<usize>);

impl std::ops::Deref for UsizeList {
    type Target = Vec<usize>;

    fn deref(&self) -> &Vec<usize> {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct F64List(pub Vec<f64>);

impl std::ops::Deref for F64List {
    type Target = Vec<f64>;

    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

/// Parses `3`, `1..20` (inclusive) and comma-separated mixtures of both.
pub fn parse_usize_list(s: &str) -> Result<UsizeList, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let a: usize = a
                .trim()
                .parse()
                .map_err(|_| format!("bad range start in {part:?}"))?;
            let b: usize = b
                .trim()
                .parse()
                .map_err(|_| format!("bad range end in {part:?}"))?;
            if a > b {
                return Err(format!("empty range {part:?}"));
            }
            out.extend(a..=b);
        } else {
            out.push(
                part.parse()
                    .map_err(|_| format!("{part:?} is not a non-negative integer"))?,
            );
        }
    }
    Ok(UsizeList(out))
}

pub fn parse_f64_list(s: &str) -> Result<F64List, String> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("{v:?} is not a number"))
        })
        .collect::<Result<_, _>>()
        .map(F64List)
}

fn list_value(v: &[usize]) -> Value {
    Value::from(
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(","),
    )
}

/// A failure together with the table computed before it was detected.
struct Failure {
    error: Error,
    partial: Option<Box<(Provenance, Table)>>,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Self {
            error,
            partial: None,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ExactCapExceeded { .. } => EXIT_EXACT_CAP,
        Error::Io(_) => EXIT_IO,
        Error::Invariant(_) => EXIT_INVARIANT,
        _ => EXIT_INVALID,
    }
}

fn block_range(n: &[usize]) -> Result<(u32, u32), Error> {
    let lo = *n
        .first()
        .ok_or_else(|| Error::OutOfRange("empty block range".into()))?;
    if n.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::OutOfRange(
            "block indices must be consecutive".into(),
        ));
    }
    let hi = *n.last().expect("non-empty");
    let conv = |v: usize| u32::try_from(v).map_err(|_| Error::OutOfRange(format!("n = {v}")));
    Ok((conv(lo)?, conv(hi)?))
}

fn rad_config(g: &GlobalArgs) -> RadNormConfig {
    match g.mode {
        ModeArg::Exact => RadNormConfig::exact(),
        ModeArg::Mc => RadNormConfig::monte_carlo(g.samples, g.seed.unwrap_or(0)),
    }
}

fn with_mode(mut prov: Provenance, g: &GlobalArgs) -> Provenance {
    prov = prov.with(
        "mode",
        if g.mode == ModeArg::Exact {
            "exact"
        } else {
            "mc"
        },
    );
    if g.mode == ModeArg::Mc {
        prov = prov
            .with("samples", g.samples)
            .with("seed", g.seed.unwrap_or(0));
    }
    prov
}

fn dispatch(cmd: &Command, g: &GlobalArgs) -> Result<(Provenance, Table), Failure> {
    let prov = Provenance::new(cmd.name());
    let seed = g.seed.unwrap_or(0);
    Ok(match cmd {
        Command::LemmaMax { m, grid } => {
            let ms = m
                .iter()
                .map(|&v| u32::try_from(v).map_err(|_| Error::OutOfRange(format!("m = {v}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let rows = experiments::lemma_max_scan(&ms, *grid)?;
            let mut table = Table::new(&["m", "t0", "d_max", "grid_max", "grid_argmax"]);
            let mut bad = None;
            for r in &rows {
                if (r.value - 0.25).abs() > 1e-12 || r.grid_max > r.value + 1e-12 {
                    bad.get_or_insert(r.m);
                }
                table.push(vec![
                    r.m.into(),
                    num(r.t0),
                    num(r.value),
                    num(r.grid_max),
                    num(r.grid_argmax),
                ]);
            }
            let prov = prov.with("m", list_value(m)).with("grid", *grid);
            if let Some(m) = bad {
                return Err(Failure {
                    error: Error::Invariant(format!("the peak of d at m = {m} is not 1/4")),
                    partial: Some(Box::new((prov, table))),
                });
            }
            (prov, table)
        }
        Command::C0Blowup { n } => {
            let t = experiments::run_c0_blowup(n, &rad_config(g))?;
            (with_mode(prov.with("N", list_value(n)), g), Table::from(&t))
        }
        Command::L1Blowup { n } => {
            let t = experiments::run_l1_blowup(n, &rad_config(g))?;
            (with_mode(prov.with("N", list_value(n)), g), Table::from(&t))
        }
        Command::XpBlowup { p, n } => {
            let (lo, hi) = block_range(n)?;
            let t = experiments::run_xp_blowup(*p, lo, hi)?;
            (
                prov.with("p", num(*p)).with("n", list_value(n)),
                Table::from(&t),
            )
        }
        Command::Rbasis { p, n } => {
            let (lo, hi) = block_range(n)?;
            let t = experiments::run_rbasis_witness(*p, lo, hi)?;
            (
                prov.with("p", num(*p)).with("n", list_value(n)),
                Table::from(&t),
            )
        }
        Command::Nonequiv { p, n_max } => {
            let r = experiments::run_nonequivalence(*p, *n_max)?;
            let mut table = Table::new(&[
                "n",
                "checkpoint",
                "lp_norm",
                "xp_norm",
                "lp_power",
                "xp_power",
                "xp_reference",
            ]);
            for row in &r.rows {
                table.push(vec![
                    row.n.into(),
                    row.checkpoint.into(),
                    num(row.lp_norm),
                    num(row.xp_norm),
                    num(row.lp_power),
                    num(row.xp_power),
                    num(row.xp_reference),
                ]);
            }
            let table = table
                .meta("p", num(r.p))
                .meta("diverging", r.diverging.as_str())
                .meta("lp_bound", r.lp_bound.map_or(Value::Null, num));
            (prov.with("p", num(*p)).with("n_max", *n_max), table)
        }
        Command::PiTable { k } => {
            let mut table = Table::new(&["m", "pi", "is_b"]);
            for r in experiments::pi_table(*k)? {
                table.push(vec![r.m.into(), r.pi.into(), r.is_b.into()]);
            }
            (prov.with("K", *k), table)
        }
        Command::ZeroInsertion { p, trials } => {
            let mut table = Table::new(&["p", "trials", "bound", "max_ratio", "violations"]);
            let mut violations = 0;
            for &pv in p.iter() {
                let r = experiments::run_zero_insertion_check(pv, *trials, seed)?;
                violations += r.violations;
                table.push(vec![
                    num(r.p),
                    r.trials.into(),
                    num(r.bound),
                    num(r.max_ratio),
                    r.violations.into(),
                ]);
            }
            let p_list: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            let prov = prov
                .with("p", p_list.join(","))
                .with("trials", *trials)
                .with("seed", seed);
            if violations > 0 {
                return Err(Failure {
                    error: Error::Invariant(format!(
                        "{violations} zero-insertion bound violations"
                    )),
                    partial: Some(Box::new((prov, table))),
                });
            }
            (prov, table)
        }
        Command::Khintchine { n, trials } => {
            let cfg = rad_config(g);
            let rows = experiments::khintchine_scan(n, *trials, seed, &cfg)?;
            let mut table = Table::new(&["N", "trials", "min_ratio", "max_ratio"]);
            for r in &rows {
                table.push(vec![
                    r.n.into(),
                    r.trials.into(),
                    num(r.min_ratio),
                    num(r.max_ratio),
                ]);
            }
            let prov = with_mode(prov, g)
                .with("N", list_value(n))
                .with("trials", *trials)
                .with("vector_seed", seed);
            (prov, table)
        }
        Command::FprimeProbe { p, dims, trials } => {
            let rows = experiments::run_fprime_unconditional_probe(*p, dims, *trials, seed)?;
            let mut table = Table::new(&["dim", "ambient_dim", "estimate"]);
            for r in &rows {
                table.push(vec![r.dim.into(), r.ambient_dim.into(), num(r.estimate)]);
            }
            let hi = rows.iter().map(|r| r.estimate).fold(f64::MIN, f64::max);
            let lo = rows.iter().map(|r| r.estimate).fold(f64::MAX, f64::min);
            let table = table.meta("max_over_min", num(hi / lo));
            let prov = prov
                .with("p", num(*p))
                .with("dims", list_value(dims))
                .with("trials", *trials)
                .with("seed", seed);
            (prov, table)
        }
        Command::Fit { input } => {
            let rows = report::read_growth_csv(input)?;
            let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
            let slope = fit_loglog(&xs, &ys)?;
            let mut table = Table::new(&["rows", "slope"]);
            table.push(vec![rows.len().into(), num(slope)]);
            (prov.with("input", input.display().to_string()), table)
        }
    })
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let g = &cli.global;
    if g.mode == ModeArg::Mc && g.seed.is_none() {
        eprintln!("error: --seed is required with --mode mc");
        return EXIT_USAGE;
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(g.threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_INVALID;
        }
    };
    let format = match g.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let (result, table, prov) = match pool.install(|| dispatch(&cli.command, g)) {
        Ok((prov, table)) => (Ok(()), table, prov),
        Err(Failure {
            error,
            partial: Some(partial),
        }) => {
            let (prov, table) = *partial;
            (Err(error), table, prov)
        }
        Err(Failure {
            error,
            partial: None,
        }) => {
            eprintln!("error: {error}");
            return exit_code(&error);
        }
    };
    if let Err(e) = emit(&cli, &table, &prov, format) {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn emit(cli: &Cli, table: &Table, prov: &Provenance, format: Format) -> Result<(), Error> {
    let text = table.render(prov, format)?;
    let g = &cli.global;
    let path = g.out.clone().or_else(|| {
        g.out_dir
            .as_ref()
            .map(|d| d.join(format!("{}.{}", cli.command.name(), format.extension())))
    });
    match path {
        Some(path) => report::write_file(&path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
