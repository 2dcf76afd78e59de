//! Command-line driver: generate benchmark instances, solve them with any of
//! the four methods, compute optimality gaps against the discrete lower
//! bound, sweep γ and support parameters, and run out-of-sample simulations.
//!
//! Errors print as machine-readable JSON on stderr with a non-zero exit.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use drbp::flp::{self, DemandLaw, FacilityConfig};
use drbp::instance::BilevelInstance;
use drbp::io;
use drbp::moments::MomentAmbiguity;
use drbp::report::{self, Method, SolveConfig};
use drbp::{DrbpError, Result};

#[derive(Parser)]
#[command(
    name = "drbp",
    about = "pessimistic distributionally robust bilevel solver and benchmark harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonSolveArgs {
    /// Instance file (drbp-v1 JSON)
    #[arg(long)]
    instance: PathBuf,
    /// Override gamma1 from the file
    #[arg(long)]
    gamma1: Option<f64>,
    /// Override gamma2 from the file
    #[arg(long)]
    gamma2: Option<f64>,
    /// Relative convergence tolerance of the cutting-plane loop
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Big-M constant for the optimality cuts and McCormick rows
    #[arg(long = "bigM", default_value_t = 1e6)]
    big_m: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance with one method; emits a JSON report
    Solve {
        #[command(flatten)]
        common: CommonSolveArgs,
        #[arg(long, default_value = "sdp")]
        method: Method,
    },
    /// Optimality gaps of the continuous methods against the discrete lower
    /// bound; emits CSV
    Gap {
        #[command(flatten)]
        common: CommonSolveArgs,
        /// Comma-separated methods to compare
        #[arg(long, default_value = "sdp,iacop,milpcut", value_delimiter = ',')]
        methods: Vec<Method>,
        /// Fresh scenario draws appended to the in-sample points
        #[arg(long, default_value_t = 10)]
        scenarios: usize,
        /// Benchmark preset the instance was generated from (for demand draws)
        #[arg(long, default_value_t = 0)]
        preset: usize,
        /// Draw objectives randomly in the preset
        #[arg(long, default_value_t = false)]
        random_objectives: bool,
    },
    /// Profit sweep over gamma grids and/or support lower bounds; emits CSV
    Sweep {
        /// Benchmark preset: 0 = eight-location default, 1..=10 = random settings
        #[arg(long, default_value_t = 0)]
        preset: usize,
        #[arg(long, default_value_t = false)]
        random_objectives: bool,
        /// In-sample demand draws used for the moment estimates
        #[arg(long, default_value_t = 10)]
        samples: usize,
        /// Defaults to 0,1,1.5 (constraint-only) or 0,0.2,0.5 (random objectives)
        #[arg(long, value_delimiter = ',')]
        gamma1: Option<Vec<f64>>,
        /// Defaults to 1,2 (constraint-only) or 1,3 (random objectives)
        #[arg(long, value_delimiter = ',')]
        gamma2: Option<Vec<f64>>,
        /// Optional support lower bounds (one cell per value)
        #[arg(long = "support-lb", value_delimiter = ',')]
        support_lb: Vec<f64>,
        #[arg(long, default_value = "sdp")]
        method: Method,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long = "bigM", default_value_t = 1e6)]
        big_m: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Out-of-sample simulation of a fixed leader decision; emits CSV
    Oos {
        #[arg(long)]
        instance: PathBuf,
        /// Leader decision as a 0/1 string, e.g. 00110000
        #[arg(long)]
        x: String,
        /// Demand law: uniform:lo:hi or truncnormal:mean:std:lo:hi
        #[arg(long, default_value = "uniform:30:240")]
        law: String,
        /// Samples per replication
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        replications: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Benchmark preset used to regenerate the config (0 = eight-location)
        #[arg(long, default_value_t = 0)]
        preset: usize,
        #[arg(long, default_value_t = false)]
        random_objectives: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a benchmark instance file (drbp-v1 JSON)
    Gen {
        /// 0 = eight-location default, 1..=10 = random benchmark settings
        #[arg(long, default_value_t = 0)]
        preset: usize,
        /// Draw C, V nonzero
        #[arg(long, default_value_t = false)]
        random_objectives: bool,
        /// In-sample demand draws for the moment estimates
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 0.0)]
        gamma1: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma2: f64,
        /// Emit a scenario-domain file instead of the polyhedral support
        #[arg(long, default_value_t = false)]
        scenarios: bool,
        /// External coordinates CSV (id,x,y) replacing the preset layout
        #[arg(long)]
        coords: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn preset_config(preset: usize, random_objectives: bool, seed: u64) -> Result<FacilityConfig> {
    if preset == 0 {
        let mut cfg = flp::eight_city_config();
        cfg.random_objectives = random_objectives;
        cfg.rng_seed = seed;
        Ok(cfg)
    } else {
        flp::benchmark_setting(preset, random_objectives, seed)
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => println!("{content}"),
    }
    Ok(())
}

fn load(path: &PathBuf) -> Result<(BilevelInstance, MomentAmbiguity)> {
    let text = std::fs::read_to_string(path)?;
    io::read_problem(&text)
}

fn override_gammas(
    amb: MomentAmbiguity,
    gamma1: Option<f64>,
    gamma2: Option<f64>,
) -> Result<MomentAmbiguity> {
    match (gamma1, gamma2) {
        (None, None) => Ok(amb),
        (g1, g2) => MomentAmbiguity::new(
            amb.mu0.clone(),
            amb.sigma0.clone(),
            g1.unwrap_or(amb.gamma1),
            g2.unwrap_or(amb.gamma2),
            amb.domain.clone(),
        ),
    }
}

fn parse_law(spec: &str) -> Result<DemandLaw> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| DrbpError::Invalid(format!("bad number {s:?} in law {spec:?}")))
    };
    match parts.as_slice() {
        ["uniform", lo, hi] => Ok(DemandLaw::Uniform { lo: num(lo)?, hi: num(hi)? }),
        ["truncnormal", mean, std, lo, hi] => Ok(DemandLaw::TruncatedNormal {
            mean: num(mean)?,
            std: num(std)?,
            lo: num(lo)?,
            hi: num(hi)?,
        }),
        _ => Err(DrbpError::Invalid(format!(
            "law must be uniform:lo:hi or truncnormal:mean:std:lo:hi, got {spec:?}"
        ))),
    }
}

fn parse_x(bits: &str, d: usize) -> Result<DVector<f64>> {
    let vals: Vec<f64> = bits
        .chars()
        .filter(|c| !c.is_whitespace() && *c != ',')
        .map(|c| match c {
            '0' => Ok(0.0),
            '1' => Ok(1.0),
            other => Err(DrbpError::Invalid(format!("x must be 0/1 bits, got {other:?}"))),
        })
        .collect::<Result<_>>()?;
    if vals.len() != d {
        return Err(DrbpError::Invalid(format!(
            "x has {} bits, instance has d = {d}",
            vals.len()
        )));
    }
    Ok(DVector::from_vec(vals))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { common, method } => {
            let (inst, amb) = load(&common.instance)?;
            let amb = override_gammas(amb, common.gamma1, common.gamma2)?;
            let cfg = SolveConfig {
                method,
                epsilon: common.eps,
                big_m: common.big_m,
                seed: common.seed,
            };
            let rep = report::solve(&inst, &amb, &cfg)?;
            emit(&common.out, &serde_json::to_string_pretty(&rep)?)
        }
        Command::Gap { common, methods, scenarios, preset, random_objectives } => {
            let (inst, amb) = load(&common.instance)?;
            let amb = override_gammas(amb, common.gamma1, common.gamma2)?;
            let cfg = preset_config(preset, random_objectives, common.seed)?;
            let solve_cfg = SolveConfig {
                method: Method::Sdp,
                epsilon: common.eps,
                big_m: common.big_m,
                seed: common.seed,
            };
            // In-sample scenario seed matches `gen`, so the discrete set
            // contains the points behind (mu0, sigma0) plus fresh draws.
            let in_sample = flp::sample_demands(&cfg, 10, common.seed)?;
            let records =
                report::compute_gaps(&inst, &amb, &cfg, &methods, &in_sample, scenarios, &solve_cfg)?;
            emit(&common.out, &report::gaps_csv(&records))
        }
        Command::Sweep {
            preset,
            random_objectives,
            samples,
            gamma1,
            gamma2,
            support_lb,
            method,
            eps,
            big_m,
            seed,
            out,
        } => {
            let cfg = preset_config(preset, random_objectives, seed)?;
            let solve_cfg = SolveConfig { method, epsilon: eps, big_m, seed };
            // default grids follow the benchmark protocol per uncertainty kind
            let gamma1 = gamma1.unwrap_or_else(|| {
                if random_objectives { vec![0.0, 0.2, 0.5] } else { vec![0.0, 1.0, 1.5] }
            });
            let gamma2 = gamma2.unwrap_or_else(|| {
                if random_objectives { vec![1.0, 3.0] } else { vec![1.0, 2.0] }
            });
            let lbs: Vec<Option<f64>> = if support_lb.is_empty() {
                vec![None]
            } else {
                support_lb.iter().map(|&v| Some(v)).collect()
            };
            let cells = report::sweep(&cfg, samples, &gamma1, &gamma2, &lbs, &solve_cfg)?;
            emit(&out, &report::sweep_csv(&cells))
        }
        Command::Oos {
            instance,
            x,
            law,
            n,
            replications,
            seed,
            preset,
            random_objectives,
            out,
        } => {
            let (inst, _) = load(&instance)?;
            let cfg = preset_config(preset, random_objectives, seed)?;
            let x = parse_x(&x, inst.d)?;
            let law = parse_law(&law)?;
            let rows = report::out_of_sample(&inst, &cfg, &x, &law, n, replications, seed)?;
            emit(&out, &report::oos_csv(&rows, &law))
        }
        Command::Gen {
            preset,
            random_objectives,
            samples,
            gamma1,
            gamma2,
            scenarios,
            coords,
            seed,
            out,
        } => {
            let mut cfg = preset_config(preset, random_objectives, seed)?;
            if let Some(path) = coords {
                let text = std::fs::read_to_string(&path)?;
                cfg.coords = flp::coords_from_csv(&text)?;
            }
            let inst = flp::to_bilevel(&cfg)?;
            let amb = flp::ambiguity_from_samples(&cfg, samples, gamma1, gamma2, seed)?;
            let amb = if scenarios {
                amb.with_scenarios(flp::sample_demands(&cfg, samples, seed)?)?
            } else {
                amb
            };
            emit(&out, &io::write_problem(&inst, &amb)?)
        }
    }
}

fn main() {
    if let Ok(threads) = std::env::var("DRBP_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let msg = serde_json::json!({ "error": e.to_string() });
        eprintln!("{msg}");
        std::process::exit(1);
    }
}
