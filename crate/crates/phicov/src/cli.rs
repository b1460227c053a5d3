//! Command-line entry point: ratio reports, instance solving and generation,
//! and the built-in family benchmark.
//!
//! Every command writes its primary artifact to stdout; the global `--out`
//! flag additionally writes the identical bytes to a file. All output is
//! deterministic given argv and seeds: floats print via Rust's shortest
//! round-trip formatting (or a fixed decimal count where noted), lines end
//! with LF, and nothing depends on wall-clock time or locale.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baseline;
use crate::counting::{CountingFunction, DEFAULT_HORIZON};
use crate::instance::{self, Constraint};
use crate::poisson::{closed_form_ratio, concavity_ratio};
use crate::relax;
use crate::round;
use crate::{Error, Result};

/// Per-evaluation precision for the benchmark's ratio scans; the scan result
/// is then accurate to twice this, far below every row tolerance.
pub const BENCH_EPS: f64 = 1e-8;
/// Benchmark tolerance for rows with an exact closed-form reference.
pub const CLOSED_FORM_TOL: f64 = 1e-7;
/// Benchmark tolerance for rows whose reference is quoted to four decimals.
pub const FOUR_DECIMAL_TOL: f64 = 5e-5;
/// Benchmark tolerance for the power row against its own series evaluation.
pub const SERIES_TOL: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(
    name = "phicov",
    version,
    about = "Solver and analysis toolkit for phi-weighted maximum coverage"
)]
struct Cli {
    /// Fallback RNG seed for commands that sample (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; must be >= 1. Present for interface stability: all
    /// current code paths are sequential and deterministic.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Also write the command's stdout artifact to this file, byte for byte.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the Poisson concavity ratio of a counting function.
    Ratio(RatioArgs),
    /// Solve a coverage instance from a JSON file.
    Solve(SolveArgs),
    /// Generate a seeded random instance as JSON.
    Gen(GenArgs),
    /// Check the built-in families against their reference ratios.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct RatioArgs {
    /// Counting-function descriptor, e.g. threshold:l=2, pav, geo:p=0.1,
    /// geo-cap:p=0.1,l=5, power:d=0.5, custom:0,1,1.5;tail=0.25.
    #[arg(long)]
    phi: String,

    /// Per-evaluation precision in (1e-9, 0.1]; the reported ratio is
    /// accurate to twice this value.
    #[arg(long)]
    eps: f64,

    /// Set count used for the curvature-style reference bound
    /// (default: one past the function's linear tail start).
    #[arg(long)]
    m: Option<usize>,

    /// Write the scanned (x, alpha_x) curve as CSV to this path.
    #[arg(long)]
    curve_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,

    /// Counting-function descriptor; overrides the instance file's phi.
    #[arg(long)]
    phi: Option<String>,

    /// Solving strategy.
    #[arg(long, value_enum, default_value_t = Method::LpPipage)]
    method: Method,

    /// Write the rounding objective trajectory as CSV (lp-pipage only).
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Write the relaxation in its plain-text row format to this path.
    #[arg(long)]
    lp_dump: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Chord relaxation solved by simplex, then pipage rounding.
    #[value(name = "lp-pipage")]
    LpPipage,
    /// Best marginal gain per step, smallest index on ties.
    Greedy,
    /// Full enumeration of constraint bases (small instances only).
    Exact,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Generator parameters as key=value pairs: n=<elements>, m=<sets>,
    /// density=<membership probability>, seed=<u64, optional>.
    #[arg(long)]
    random: String,

    /// Counting-function descriptor stored in the instance file.
    #[arg(long, default_value = "pav")]
    phi: String,

    /// Cardinality bound stored in the instance (default: max(1, m/4)).
    #[arg(long)]
    k: Option<usize>,

    /// Smallest element weight.
    #[arg(long, default_value_t = 1.0)]
    wmin: f64,

    /// Largest element weight.
    #[arg(long, default_value_t = 1.0)]
    wmax: f64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Benchmark suite to run.
    #[arg(value_parser = ["table1"])]
    suite: String,
}

/// Parses argv, runs the selected command, and maps failures to exit codes:
/// 0 success, 1 benchmark tolerance failure, 2 usage or input errors.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    if cli.threads == 0 {
        return Err(Error::Domain("--threads must be >= 1".into()));
    }
    let (artifact, code) = match &cli.command {
        Command::Ratio(args) => cmd_ratio(args)?,
        Command::Solve(args) => cmd_solve(args)?,
        Command::Gen(args) => cmd_gen(args, cli.seed)?,
        Command::Bench(args) => cmd_bench(args)?,
    };
    if let Some(path) = &cli.out {
        std::fs::write(path, &artifact)?;
    }
    print!("{artifact}");
    Ok(code)
}

fn cmd_ratio(args: &RatioArgs) -> Result<(String, i32)> {
    let phi = CountingFunction::parse(&args.phi)?;
    let report = concavity_ratio(&phi, args.eps, args.m)?;
    if let Some(path) = &args.curve_out {
        let mut csv = String::from("x,alpha_x\n");
        for (x, alpha_x) in &report.curve {
            writeln!(csv, "{x},{alpha_x}").expect("writing to a string cannot fail");
        }
        std::fs::write(path, csv)?;
    }
    let artifact = format!(
        "alpha {:.7}\nargmin {}\ncurvature_ratio {:.7}\n",
        report.alpha, report.argmin_x, report.curvature_ratio
    );
    Ok((artifact, 0))
}

fn cmd_solve(args: &SolveArgs) -> Result<(String, i32)> {
    if args.trace.is_some() && args.method != Method::LpPipage {
        return Err(Error::Domain(
            "--trace records the rounding trajectory and requires --method lp-pipage".into(),
        ));
    }
    let loaded = instance::load_instance(&args.instance)?;
    let phi = match &args.phi {
        Some(spec) => CountingFunction::parse(spec)?
            .with_horizon(DEFAULT_HORIZON.max(loaded.instance.m() + 2))?,
        None => loaded.phi.clone(),
    };
    if let Some(path) = &args.lp_dump {
        let model = relax::build_lp(&loaded.instance, &phi, &loaded.constraint)?;
        std::fs::write(path, relax::dump_lp(&model))?;
    }

    let mut artifact = String::new();
    match args.method {
        Method::LpPipage => {
            let result = round::solve(&loaded.instance, &phi, &loaded.constraint)?;
            if let Some(path) = &args.trace {
                let mut csv = String::from("step,f\n");
                for (step, f) in result.f_trace.iter().enumerate() {
                    writeln!(csv, "{step},{f}").expect("writing to a string cannot fail");
                }
                std::fs::write(path, csv)?;
            }
            writeln!(artifact, "method {}", result.method_tag).unwrap();
            writeln!(artifact, "selected {}", join_indices(&result.selection.selected)).unwrap();
            writeln!(artifact, "value {}", result.selection.value).unwrap();
            writeln!(artifact, "lp_objective {}", result.lp_objective).unwrap();
            writeln!(artifact, "multilinear_at_lp {}", result.multilinear_at_lp).unwrap();
            writeln!(artifact, "certified_ratio_bound {}", result.certified_ratio_bound).unwrap();
            writeln!(
                artifact,
                "certified_value_bound {}",
                result.certified_ratio_bound * result.lp_objective
            )
            .unwrap();
        }
        Method::Greedy | Method::Exact => {
            let (tag, selection) = match args.method {
                Method::Greedy => {
                    ("greedy", baseline::greedy(&loaded.instance, &phi, &loaded.constraint)?)
                }
                _ => ("exact", baseline::exact(&loaded.instance, &phi, &loaded.constraint)?),
            };
            writeln!(artifact, "method {tag}").unwrap();
            writeln!(artifact, "selected {}", join_indices(&selection.selected)).unwrap();
            writeln!(artifact, "value {}", selection.value).unwrap();
        }
    }
    Ok((artifact, 0))
}

fn cmd_gen(args: &GenArgs, global_seed: Option<u64>) -> Result<(String, i32)> {
    let spec = parse_random_spec(&args.random)?;
    let seed = spec.seed.or(global_seed).unwrap_or(0);
    // Reject typo'd descriptors before they land in a saved file.
    CountingFunction::parse_with_horizon(&args.phi, DEFAULT_HORIZON.max(spec.m + 2))?;
    let inst = instance::random_instance(spec.n, spec.m, spec.density, (args.wmin, args.wmax), seed)?;
    let k = args.k.unwrap_or_else(|| (spec.m / 4).max(1));
    let constraint = Constraint::Cardinality { k };
    constraint.validate(inst.m())?;
    let json = instance::instance_to_json(&inst, &constraint, &args.phi, Some(seed))?;
    Ok((json, 0))
}

struct RandomSpec {
    n: usize,
    m: usize,
    density: f64,
    seed: Option<u64>,
}

fn parse_random_spec(text: &str) -> Result<RandomSpec> {
    let mut n = None;
    let mut m = None;
    let mut density = None;
    let mut seed = None;
    for field in text.split(',') {
        let (key, value) = field.split_once('=').ok_or_else(|| {
            Error::Parse(format!("--random expects key=value pairs, got '{field}'"))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::Parse(format!("--random {key}: '{value}' is not {what}"));
        match key {
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad("a positive integer"))?),
            "m" => m = Some(value.parse::<usize>().map_err(|_| bad("a positive integer"))?),
            "density" => density = Some(value.parse::<f64>().map_err(|_| bad("a number"))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("an unsigned integer"))?),
            other => {
                return Err(Error::Parse(format!(
                    "unknown --random key '{other}' (expected n, m, density, seed)"
                )));
            }
        }
    }
    let require = |opt: Option<usize>, name: &str| {
        opt.ok_or_else(|| Error::Parse(format!("--random is missing '{name}='")))
    };
    Ok(RandomSpec {
        n: require(n, "n")?,
        m: require(m, "m")?,
        density: density.ok_or_else(|| Error::Parse("--random is missing 'density='".into()))?,
        seed,
    })
}

/// How a benchmark row's reference value is obtained and judged.
enum Reference {
    /// Exact closed form of the family; compared within `CLOSED_FORM_TOL`.
    ClosedForm,
    /// Value quoted to four decimals by truncation: the quoted figure only
    /// promises the true ratio lies in `[v, v + 1e-4)`, so the row passes
    /// iff the computed ratio falls within `FOUR_DECIMAL_TOL` of that
    /// window's midpoint. The difference column still reports the raw
    /// distance to the quoted figure.
    FourDecimal(f64),
    /// The family's own series evaluation; compared within `SERIES_TOL`.
    Series,
}

fn cmd_bench(args: &BenchArgs) -> Result<(String, i32)> {
    debug_assert_eq!(args.suite, "table1");
    let rows: [(&str, Reference); 8] = [
        ("threshold:l=1", Reference::ClosedForm),
        ("threshold:l=2", Reference::ClosedForm),
        ("threshold:l=3", Reference::ClosedForm),
        ("pav", Reference::FourDecimal(0.7965)),
        ("pav-cap:l=3", Reference::FourDecimal(0.7910)),
        ("geo:p=0.1", Reference::ClosedForm),
        ("geo-cap:p=0.1,l=5", Reference::FourDecimal(0.8470)),
        ("power:d=0.5", Reference::Series),
    ];

    let mut csv = String::from("family,computed_alpha,reference_alpha,difference,argmin_x,tolerance,status\n");
    let mut all_ok = true;
    for (spec, reference) in rows {
        let phi = CountingFunction::parse(spec)?;
        let report = concavity_ratio(&phi, BENCH_EPS, None)?;
        let (shown_reference, tolerance, ok) = match reference {
            Reference::ClosedForm | Reference::Series => {
                let value = closed_form_ratio(phi.family()).ok_or_else(|| {
                    Error::Invariant(format!("no closed form for benchmark family {spec}"))
                })?;
                let tol = match reference {
                    Reference::Series => SERIES_TOL,
                    _ => CLOSED_FORM_TOL,
                };
                (value.to_string(), tol, (report.alpha - value).abs() <= tol)
            }
            Reference::FourDecimal(value) => {
                let midpoint = value + FOUR_DECIMAL_TOL;
                let ok = (report.alpha - midpoint).abs() <= FOUR_DECIMAL_TOL;
                (format!("{value:.4}"), FOUR_DECIMAL_TOL, ok)
            }
        };
        let quoted: f64 = shown_reference.parse().expect("reference column is a float");
        let difference = (report.alpha - quoted).abs();
        writeln!(
            csv,
            "{},{},{shown_reference},{difference},{},{tolerance},{}",
            csv_field(spec),
            report.alpha,
            report.argmin_x,
            if ok { "ok" } else { "fail" }
        )
        .expect("writing to a string cannot fail");
        all_ok &= ok;
    }
    Ok((csv, if all_ok { 0 } else { 1 }))
}

fn join_indices(indices: &[usize]) -> String {
    indices.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Double-quotes a CSV field when it contains a comma (family descriptors
/// like `geo-cap:p=0.1,l=5`); none of the emitted fields contain quotes or
/// newlines, so no further escaping is needed.
fn csv_field(field: &str) -> String {
    if field.contains(',') {
        format!("\"{field}\"")
    } else {
        field.to_string()
    }
}
