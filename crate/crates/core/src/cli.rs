//! Command-line front end: `eval`, `gen-tables`, `verify-machin`,
//! `find-machin` and `bench`.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elementary::{self, EvalContext};
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPoint;
use crate::machin::{self, MachinFormula};
use crate::relations::{
    generate_table_with, table_precision, Basis, BasisKind, Scaling, Selection, TableOptions,
    DEFAULT_COEFF_LIMIT,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

const BITS_PER_DIGIT: f64 = std::f64::consts::LOG2_10;

#[derive(Parser, Debug)]
#[command(
    name = "multiprime",
    version,
    about = "Multi-prime argument reduction for elementary functions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a function to a number of decimal digits
    Eval(EvalArgs),
    /// Generate a relation table
    GenTables(GenArgs),
    /// Check the built-in Machin-like formulas
    VerifyMachin(VerifyArgs),
    /// Search for a Machin-like formula over a prime set
    FindMachin(FindArgs),
    /// Time table-driven evaluation against the reference path
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Atan,
}

impl Func {
    fn kind(self) -> BasisKind {
        match self {
            Func::Exp | Func::Log => BasisKind::Log,
            _ => BasisKind::Atan,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub func: Func,
    /// Decimal literal or `sqrt2-1`
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    #[arg(long, default_value_t = 50)]
    pub digits: usize,
    /// Primes in the basis; 0 uses the reference path
    #[arg(long, default_value_t = elementary::DEFAULT_N)]
    pub n: usize,
    /// Restrict the context to one basis
    #[arg(long)]
    pub kind: Option<BasisKind>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub kind: BasisKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long = "c", default_value_t = 10.0)]
    pub c: f64,
    #[arg(long)]
    pub r: u64,
    #[arg(long, default_value_t = DEFAULT_COEFF_LIMIT)]
    pub coeff_limit: i64,
    /// Row taken from each reduced basis
    #[arg(long, value_enum, default_value = "first")]
    pub selection: SelectionArg,
    /// Column scaling of the lattice
    #[arg(long, value_enum, default_value = "binary")]
    pub scaling: ScalingArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SelectionArg {
    First,
    Smallest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    Binary,
    Decimal,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub kind: Option<BasisKind>,
    /// Only this row
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub bits: u64,
    /// Replace the row's arguments, e.g. `7,19`
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<u128>>,
}

#[derive(Args, Debug)]
pub struct FindArgs {
    #[arg(long)]
    pub kind: BasisKind,
    /// Primes (log) or Gaussian prime norms (atan)
    #[arg(long, value_delimiter = ',', required = true)]
    pub primes: Vec<u64>,
    #[arg(long)]
    pub x_max: u128,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "exp")]
    pub func: Func,
    #[arg(long, value_delimiter = ',', default_value = "1000,10000")]
    pub digits: Vec<usize>,
    /// Basis sizes; 0 is the reference path
    #[arg(long, value_delimiter = ',', default_value = "0,13")]
    pub n: Vec<usize>,
    /// Distinct random inputs timed per row
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Write the CSV here instead of after the text table
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Parse `args` (program name first) and run; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let res = match cli.command {
        Command::Eval(a) => cmd_eval(&a, out),
        Command::GenTables(a) => cmd_gen_tables(&a, out),
        Command::VerifyMachin(a) => cmd_verify_machin(&a, out),
        Command::FindMachin(a) => cmd_find_machin(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
    };
    match res {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_NUMERIC,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Numeric(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_NUMERIC
        }
        Err(CliError::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_NUMERIC
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(Error),
    Io(std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(m) => CliError::Usage(m),
            e => CliError::Numeric(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult = std::result::Result<bool, CliError>;

/// Working bits for `digits` decimals.
pub fn digits_to_bits(digits: usize) -> u64 {
    (digits as f64 * BITS_PER_DIGIT).ceil() as u64 + 16
}

/// A decimal literal, or `sqrt2-1`.
pub fn parse_x(text: &str, bits: u64) -> Result<FixedPoint> {
    match text.trim() {
        "sqrt2-1" => {
            let two = FixedPoint::from_int(2, 0);
            Ok(two
                .sqrt(bits + 8)?
                .sub(&FixedPoint::one(0))
                .round_frac_bits(bits))
        }
        t => FixedPoint::from_decimal(t, bits),
    }
}

/// `value` with exactly `digits` decimals.
pub fn format_decimal(value: &FixedPoint, digits: usize) -> String {
    let s = value.to_decimal(digits);
    if s == "0" && digits > 0 {
        format!("0.{}", "0".repeat(digits))
    } else {
        s
    }
}

/// Evaluate through `ctx`, or through the reference path when `ctx` is `None`.
pub fn evaluate(
    func: Func,
    x: &FixedPoint,
    bits: u64,
    ctx: Option<&EvalContext>,
) -> Result<FixedPoint> {
    match ctx {
        Some(c) => match func {
            Func::Exp => c.exp(x, bits),
            Func::Log => c.log(x, bits),
            Func::Cos => Ok(c.cos_sin(x, bits)?.0),
            Func::Sin => Ok(c.cos_sin(x, bits)?.1),
            Func::Tan => c.tan(x, bits),
            Func::Atan => c.atan(x, bits),
        },
        None => match func {
            Func::Exp => elementary::reference_exp_full(x, bits),
            Func::Log => elementary::reference_log(x, bits),
            Func::Cos => Ok(elementary::reference_cos_sin(x, bits)?.0),
            Func::Sin => Ok(elementary::reference_cos_sin(x, bits)?.1),
            Func::Tan => {
                let (c, s) = elementary::reference_cos_sin(x, bits + 8)?;
                if c.log2_abs() < -((bits / 2) as f64) {
                    return Err(Error::NearPole);
                }
                s.div(&c, bits)
            }
            Func::Atan => elementary::reference_atan(x, bits),
        },
    }
}

fn context_for(
    func: Func,
    n: usize,
    kind: Option<BasisKind>,
    b_max: u64,
) -> Result<Option<EvalContext>> {
    if n == 0 {
        return Ok(None);
    }
    EvalContext::new(kind.unwrap_or(func.kind()), n, b_max).map(Some)
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> CliResult {
    let bits = digits_to_bits(a.digits);
    let x = parse_x(&a.x, bits + 64)?;
    let ctx = context_for(a.func, a.n, a.kind, bits + 16)?;
    let v = evaluate(a.func, &x, bits, ctx.as_ref())?;
    writeln!(out, "{}", format_decimal(&v, a.digits))?;
    Ok(true)
}

pub fn cmd_gen_tables(a: &GenArgs, out: &mut dyn Write) -> CliResult {
    if a.n < 2 {
        return Err(CliError::Usage("--n must be at least 2".into()));
    }
    let basis = Basis::first(a.kind, a.n);
    let opts = TableOptions {
        scaling: match a.scaling {
            ScalingArg::Binary => Scaling::Binary,
            ScalingArg::Decimal => Scaling::Decimal,
        },
        selection: match a.selection {
            SelectionArg::First => Selection::FirstVector,
            SelectionArg::Smallest => Selection::SmallestEpsilon,
        },
        ..TableOptions::default()
    };
    let values = machin::basis_values(&basis, table_precision(a.c, a.r))?;
    let t = generate_table_with(&basis, &values, a.c, a.r, a.coeff_limit, &opts)?;
    writeln!(out, "{}", basis.describe())?;
    writeln!(out, "relations: {}", t.relations.len())?;
    if let Some(last) = t.relations.last() {
        writeln!(out, "smallest eps: {:+.2e} (i={})", last.epsilon, last.step)?;
        writeln!(out, "max r: {}", t.depth_bits().floor())?;
    }
    if t.truncated {
        writeln!(out, "stopped at the coefficient limit {}", a.coeff_limit)?;
    }
    if let Some(p) = &a.out {
        fs::write(p, t.to_text())?;
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(true)
}

/// Result of checking one formula against independently computed basis values.
#[derive(Clone, Debug)]
pub struct MachinCheck {
    pub kind: BasisKind,
    pub n: usize,
    /// `log2` of the largest `|basis - M series|`; `None` if `M` could not be built.
    pub err_log2: Option<f64>,
    pub mu: f64,
    pub printed_mu: Option<f64>,
    pub passed: bool,
}

/// Check `x` as a formula for the first `n` primes of `kind` at `bits`.
pub fn check_machin(
    kind: BasisKind,
    n: usize,
    x: &[u128],
    bits: u64,
    printed_mu: Option<f64>,
) -> MachinCheck {
    let basis = Basis::first(kind, n);
    let mu = machin::lehmer_measure(x);
    let err_log2 = MachinFormula::new(basis.clone(), x.to_vec()).ok().map(|f| {
        let got = machin::eval_basis(&f, bits);
        got.iter()
            .enumerate()
            .map(|(i, v)| {
                let want = independent_value(&basis, i, bits + 16);
                v.sub(&want).log2_abs()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let mu_ok = match printed_mu {
        Some(p) if p.is_finite() => (mu - p).abs() < 5e-6,
        Some(_) => mu.is_infinite(),
        None => true,
    };
    let passed = err_log2.is_some_and(|e| e < -(bits as f64) + 10.0) && mu_ok;
    MachinCheck {
        kind,
        n,
        err_log2,
        mu,
        printed_mu,
        passed,
    }
}

fn independent_value(basis: &Basis, i: usize, bits: u64) -> FixedPoint {
    match basis.kind() {
        BasisKind::Log => {
            elementary::reference_log(&FixedPoint::from_int(basis.primes()[i], 0), bits)
        }
        BasisKind::Atan => {
            let (a, b) = basis.gaussian()[i];
            elementary::reference_atan(&FixedPoint::from_int(b, bits + 8).div_int(a as i64), bits)
        }
    }
    .expect("positive arguments")
}

pub fn cmd_verify_machin(a: &VerifyArgs, out: &mut dyn Write) -> CliResult {
    let rows: Vec<_> = machin::table_rows()
        .iter()
        .filter(|r| a.kind.is_none_or(|k| k == r.kind) && a.n.is_none_or(|n| n == r.n))
        .collect();
    if rows.is_empty() {
        return Err(CliError::Usage("no built-in formula matches".into()));
    }
    if a.x.is_some() && rows.len() != 1 {
        return Err(CliError::Usage("--x needs --kind and --n".into()));
    }
    let mut all = true;
    for r in rows {
        let (x, printed) = match &a.x {
            Some(x) => (x.clone(), None),
            None => (r.x.clone(), Some(r.printed_mu)),
        };
        let c = check_machin(r.kind, r.n, &x, a.bits, printed);
        all &= c.passed;
        let err = c
            .err_log2
            .map_or("singular".to_string(), |e| format!("2^{e:.1}"));
        let pm = c
            .printed_mu
            .map_or(String::new(), |p| format!(" printed={p:.5}"));
        writeln!(
            out,
            "{:<4} n={:<2} {} err={} mu={:.5}{}",
            r.kind.name(),
            r.n,
            if c.passed { "PASS" } else { "FAIL" },
            err,
            c.mu,
            pm
        )?;
    }
    Ok(all)
}

/// Basis from a list of primes (log) or Gaussian prime norms (atan).
pub fn basis_from_list(kind: BasisKind, list: &[u64]) -> Result<Basis> {
    match kind {
        BasisKind::Log => Basis::log(list.to_vec()),
        BasisKind::Atan => {
            let g = list
                .iter()
                .map(|&q| {
                    (1..)
                        .take_while(|b| 2 * b * b <= q)
                        .find_map(|b| {
                            let a = ((q - b * b) as f64).sqrt().round() as u64;
                            (a * a + b * b == q).then_some((a, b))
                        })
                        .ok_or_else(|| Error::Domain(format!("{q} is not a Gaussian prime norm")))
                })
                .collect::<Result<Vec<_>>>()?;
            Basis::atan(g)
        }
    }
}

pub fn cmd_find_machin(a: &FindArgs, out: &mut dyn Write) -> CliResult {
    let basis = basis_from_list(a.kind, &a.primes)?;
    let cands = machin::find_candidates(&basis, a.x_max);
    let f = machin::find_formula(&basis, &cands)?;
    let text = f.to_text();
    write!(out, "{text}")?;
    writeln!(out, "mu={:.5}", f.lehmer_measure())?;
    writeln!(out, "candidates: {}", cands.len())?;
    if let Some(p) = &a.out {
        fs::write(p, &text)?;
    }
    Ok(true)
}

/// One benchmark row. Times are wall-clock seconds on the current machine.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub func: &'static str,
    pub digits: usize,
    pub bits: u64,
    pub n: usize,
    pub precompute_s: f64,
    pub first_s: f64,
    pub repeat_s: f64,
    /// Mean reduction depth in bits, when the table path ran.
    pub achieved_r: Option<f64>,
    pub speedup: f64,
}

pub const CSV_HEADER: &str = "func,digits,bits,n,precompute_s,first_s,repeat_s,r,speedup";

impl BenchReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{},{:.3}",
            self.func,
            self.digits,
            self.bits,
            self.n,
            self.precompute_s,
            self.first_s,
            self.repeat_s,
            self.achieved_r.map_or(String::new(), |r| format!("{r:.1}")),
            self.speedup
        )
    }
}

fn bench_input(func: Func, rng: &mut ChaCha8Rng) -> FixedPoint {
    let v: f64 = rng.gen_range(f64::EPSILON..2.0);
    // tan and cos are awkward near pi/2; keep the protocol but avoid the pole
    let v = if func == Func::Tan && (v - std::f64::consts::FRAC_PI_2).abs() < 1e-3 {
        v + 0.01
    } else {
        v
    };
    FixedPoint::from_f64(v, 60)
}

fn achieved_r(func: Func, ctx: &EvalContext, x: &FixedPoint, bits: u64) -> Option<f64> {
    let tr = match func {
        Func::Exp => ctx.exp_traced(x, bits).ok()?.1,
        Func::Sin | Func::Cos => ctx.cos_sin_traced(x, bits).ok()?.1,
        _ => None,
    };
    tr.map(|t| t.achieved_r)
}

/// Time `func` at every `digits x n` pair. Rows with `n = 0` use the reference path.
pub fn bench(
    func: Func,
    digits: &[usize],
    ns: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<BenchReport>> {
    let mut rows = Vec::new();
    for &d in digits {
        let bits = digits_to_bits(d);
        let mut group: Vec<BenchReport> = Vec::new();
        for &n in ns {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = Instant::now();
            let ctx = context_for(func, n, None, bits)?;
            let precompute_s = if n == 0 {
                0.0
            } else {
                t.elapsed().as_secs_f64()
            };
            let x0 = bench_input(func, &mut rng);
            let t = Instant::now();
            evaluate(func, &x0, bits, ctx.as_ref())?;
            let first_s = t.elapsed().as_secs_f64();
            let xs: Vec<FixedPoint> = (0..repeats.max(1))
                .map(|_| bench_input(func, &mut rng))
                .collect();
            let t = Instant::now();
            for x in &xs {
                evaluate(func, x, bits, ctx.as_ref())?;
            }
            let repeat_s = t.elapsed().as_secs_f64() / xs.len() as f64;
            let rs: Vec<f64> = ctx
                .as_ref()
                .map(|c| {
                    xs.iter()
                        .filter_map(|x| achieved_r(func, c, x, bits))
                        .collect()
                })
                .unwrap_or_default();
            let achieved_r = (!rs.is_empty()).then(|| rs.iter().sum::<f64>() / rs.len() as f64);
            group.push(BenchReport {
                func: func.name(),
                digits: d,
                bits,
                n,
                precompute_s,
                first_s,
                repeat_s,
                achieved_r,
                speedup: 1.0,
            });
        }
        let base = match group.iter().find(|r| r.n == 0) {
            Some(r) => r.repeat_s,
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let _ = bench_input(func, &mut rng);
                let xs: Vec<FixedPoint> = (0..repeats.max(1))
                    .map(|_| bench_input(func, &mut rng))
                    .collect();
                let t = Instant::now();
                for x in &xs {
                    evaluate(func, x, bits, None)?;
                }
                t.elapsed().as_secs_f64() / xs.len() as f64
            }
        };
        for r in &mut group {
            r.speedup = base / r.repeat_s;
        }
        rows.extend(group);
    }
    Ok(rows)
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> CliResult {
    if a.digits.is_empty() || a.n.is_empty() {
        return Err(CliError::Usage("empty --digits or --n".into()));
    }
    let rows = bench(a.func, &a.digits, &a.n, a.repeats, a.seed)?;
    writeln!(
        out,
        "# timings are wall-clock seconds and depend on the hardware"
    )?;
    writeln!(
        out,
        "{:<5} {:>8} {:>3} {:>11} {:>11} {:>11} {:>7} {:>8}",
        "func", "digits", "n", "precomp", "first", "repeat", "r", "speedup"
    )?;
    for r in &rows {
        writeln!(
            out,
            "{:<5} {:>8} {:>3} {:>11.6} {:>11.6} {:>11.6} {:>7} {:>8.2}",
            r.func,
            r.digits,
            r.n,
            r.precompute_s,
            r.first_s,
            r.repeat_s,
            r.achieved_r.map_or("-".to_string(), |v| format!("{v:.1}")),
            r.speedup
        )?;
    }
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    match &a.csv {
        Some(p) => fs::write(p, csv)?,
        None => write!(out, "\n{csv}")?,
    }
    Ok(true)
}
