//! `tvd`: distances between n-fold product distributions, the bounds that
//! cap their growth, and the sweeps that probe those bounds.
//!
//! Exit codes: 0 on success, 2 when a requested bound does not apply
//! because the minimum differing probability is zero, 1 on validation or
//! input errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;

use tvd_core::bounds::BoundReport;
use tvd_core::chain::{chain_bound_assembly, two_point_chain};
use tvd_core::derivative::TwoPointFamily;
use tvd_core::dist::Distribution;
use tvd_core::error::Error;
use tvd_core::exact::{
    brute_force_distance_guarded, exact_distance_guarded, two_point_distance_pair,
    type_class_distance_guarded, EngineKind, ProductQuery, DEFAULT_GUARD,
};
use tvd_core::experiments::{
    constant_probe, growth_sweep, path_integral_check, tightness_probe, write_csv,
};
use tvd_core::field::Field;
use tvd_core::sampling::mc_distance_sharded;

#[derive(Parser)]
#[command(name = "tvd", version, about = "Variational distance between product distributions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    /// Exact big-rational arithmetic.
    Rational,
    /// f64 with log-domain products.
    Float,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Two-point engine when applicable, else type classes.
    Auto,
    BruteForce,
    TypeClass,
    TwoPoint,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact distance delta(P^n, Q^n) for a pair file.
    Dist {
        /// JSON file: {"p": {"probs": [...]}, "q": {"probs": [...]}}.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long, value_enum, default_value = "rational")]
        backend: Backend,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
        /// Ceiling on enumerated outcomes or type classes.
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: u64,
    },
    /// Every applicable bound for a pair, plus the exact distance when an
    /// engine can produce one. Exits 2 when the square-root bounds do not
    /// apply (minimum differing probability is zero).
    Bound {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long, value_enum, default_value = "rational")]
        backend: Backend,
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: u64,
    },
    /// Two-point chain from P to Q, printed as JSON.
    Chain {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "rational")]
        backend: Backend,
        /// Also assemble per-step bounds for this n (requires a positive
        /// minimum differing probability).
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: u64,
    },
    /// Exact distance and all bounds for every n up to n-max.
    Sweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n_max: u64,
        #[arg(long, value_enum, default_value = "float")]
        backend: Backend,
        #[arg(long, value_enum, default_value = "csv")]
        out: OutFormat,
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: u64,
    },
    /// How close the first square-root bound comes to the exact distance
    /// for a two-point pair with the given minimum probability.
    Tightness {
        #[arg(long)]
        pbar: f64,
        #[arg(long)]
        n_max: u64,
        #[arg(long, value_enum, default_value = "csv")]
        out: OutFormat,
    },
    /// Scan for the largest constant the second square-root bound needs.
    Constant {
        #[arg(long)]
        n_max: u64,
        #[arg(long, value_enum, default_value = "csv")]
        out: OutFormat,
    },
    /// Distance between two members of a two-point family against the
    /// upper Riemann sum of the derivative bound along the path.
    Pathint {
        /// Pair file; the pair must differ at exactly two labels, and the
        /// path runs from P's value to Q's value at the first of them.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 64)]
        grid: u32,
    },
    /// Seeded Monte Carlo estimate of delta(P^n, Q^n).
    Mc {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        /// Mandatory for reproducibility.
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        shards: u32,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::PbarNotPositive => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load_pair<F: Field>(path: &PathBuf) -> Result<(Distribution<F>, Distribution<F>), Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::BadInput {
        what: format!("{}: {e}", path.display()),
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::BadInput {
        what: format!("{}: {e}", path.display()),
    })?;
    let p = value.get("p").ok_or_else(|| Error::BadInput {
        what: "missing \"p\"".into(),
    })?;
    let q = value.get("q").ok_or_else(|| Error::BadInput {
        what: "missing \"q\"".into(),
    })?;
    Ok((Distribution::from_json(p)?, Distribution::from_json(q)?))
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.cmd {
        Cmd::Dist {
            input,
            n,
            backend,
            method,
            guard,
        } => match backend {
            Backend::Rational => run_dist::<BigRational>(&input, n, method, guard),
            Backend::Float => run_dist::<f64>(&input, n, method, guard),
        },
        Cmd::Bound {
            input,
            n,
            backend,
            guard,
        } => match backend {
            Backend::Rational => run_bound::<BigRational>(&input, n, guard),
            Backend::Float => run_bound::<f64>(&input, n, guard),
        },
        Cmd::Chain {
            input,
            backend,
            n,
            guard,
        } => match backend {
            Backend::Rational => run_chain::<BigRational>(&input, n, guard),
            Backend::Float => run_chain::<f64>(&input, n, guard),
        },
        Cmd::Sweep {
            input,
            n_max,
            backend,
            out,
            guard,
        } => match backend {
            Backend::Rational => run_sweep::<BigRational>(&input, n_max, out, guard),
            Backend::Float => run_sweep::<f64>(&input, n_max, out, guard),
        },
        Cmd::Tightness { pbar, n_max, out } => {
            let probe = tightness_probe(pbar, n_max)?;
            emit(&probe.rows, out)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Constant { n_max, out } => {
            let probe = constant_probe(n_max)?;
            emit(&probe.rows, out)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Pathint { input, n, grid } => {
            let (p, q) = load_pair::<f64>(&input)?;
            let (fam, t_to) = TwoPointFamily::from_pair(&p, &q)?;
            let t_from = fam.t0();
            let check = path_integral_check(&fam, t_from, t_to, n, grid)?;
            let payload = serde_json::json!({
                "n": n,
                "grid": grid,
                "t_from": t_from,
                "t_to": t_to,
                "distance": check.distance,
                "integral": check.integral,
                "proof_bound": check.proof_bound,
                "dominated": check.distance <= check.integral,
            });
            println!("{}", serde_json::to_string_pretty(&payload).expect("json"));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Mc {
            input,
            n,
            samples,
            seed,
            shards,
        } => {
            let (p, q) = load_pair::<f64>(&input)?;
            let query = ProductQuery::new(p, q, n)?;
            let est = mc_distance_sharded(&query, samples, seed, shards)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&est).expect("json")
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_dist<F: Field>(
    input: &PathBuf,
    n: u64,
    method: Method,
    guard: u64,
) -> Result<ExitCode, Error> {
    let (p, q) = load_pair::<F>(input)?;
    let query = ProductQuery::new(p.clone(), q.clone(), n)?;
    let (value, engine) = match method {
        Method::Auto => exact_distance_guarded(&query, guard)?,
        Method::BruteForce => (
            brute_force_distance_guarded(&query, guard)?,
            EngineKind::BruteForce,
        ),
        Method::TypeClass => (
            type_class_distance_guarded(&query, guard)?,
            EngineKind::TypeClass,
        ),
        Method::TwoPoint => (two_point_distance_pair(&p, &q, n)?, EngineKind::TwoPoint),
    };
    let payload = serde_json::json!({
        "n": n,
        "engine": engine.as_str(),
        "distance": value.as_f64(),
        "distance_exact": value.to_json(),
    });
    println!("{}", serde_json::to_string_pretty(&payload).expect("json"));
    Ok(ExitCode::SUCCESS)
}

fn run_bound<F: Field>(input: &PathBuf, n: u64, guard: u64) -> Result<ExitCode, Error> {
    let (p, q) = load_pair::<F>(input)?;
    let query = ProductQuery::new(p.clone(), q.clone(), n)?;
    let exact = match exact_distance_guarded(&query, guard) {
        Ok((d, engine)) => Some((d.as_f64(), engine)),
        Err(Error::TooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    let report = BoundReport::compute(&p, &q, n, exact);
    let applicable = report.sqrt_applicable;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("json")
    );
    Ok(if applicable {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn run_chain<F: Field>(input: &PathBuf, n: Option<u64>, guard: u64) -> Result<ExitCode, Error> {
    let (p, q) = load_pair::<F>(input)?;
    match n {
        None => {
            let chain = two_point_chain(&p, &q);
            println!(
                "{}",
                serde_json::to_string_pretty(&chain.to_json()).expect("json")
            );
        }
        Some(n) => {
            let asm = chain_bound_assembly(&p, &q, n, guard)?;
            let payload = serde_json::json!({
                "chain": asm.chain.to_json(),
                "report": asm.report,
                "per_step_bounds": asm.per_step_bounds,
                "sum_of_step_bounds": asm.sum_of_step_bounds,
                "product_step_distances": asm.product_step_distances,
                "product_distance": asm.product_distance,
            });
            println!("{}", serde_json::to_string_pretty(&payload).expect("json"));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_sweep<F: Field>(
    input: &PathBuf,
    n_max: u64,
    out: OutFormat,
    guard: u64,
) -> Result<ExitCode, Error> {
    let (p, q) = load_pair::<F>(input)?;
    let rows = growth_sweep(&p, &q, n_max, guard)?;
    emit(&rows, out)?;
    Ok(ExitCode::SUCCESS)
}

fn emit<T: serde::Serialize>(rows: &[T], out: OutFormat) -> Result<(), Error> {
    match out {
        OutFormat::Csv => write_csv(rows, std::io::stdout().lock()),
        OutFormat::Json => {
            println!(
                "{}",
                serde_json::to_string_pretty(rows).map_err(|e| Error::Io(e.to_string()))?
            );
            Ok(())
        }
    }
}
