//! `oplearn`: command-line driver for the operator-learning laboratory.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oplearn::encoders::{projection_error, Encoder, NodalEncoder, SpectralEncoder};
use oplearn::experiments::{fit_rate, run_experiment};
use oplearn::grid::NormKind;
use oplearn::io::{grid_function_container, grid_function_from_container, Container};
use oplearn::network::{budget_from_theorem, BudgetInputs};
use oplearn::pde::{estimate_operator_lipschitz, Operator, SolutionOperator};
use oplearn::seeds;
use oplearn::structures::{
    burgers_decomposition, linear_decomposition, transport_decomposition, verify_chain, BlockChain,
};

use config::Config;

#[derive(Parser)]
#[command(name = "oplearn", version, about = "Operator learning experiments from a single config file")]
struct Cli {
    /// Cap on worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the configured operator to a stored grid function.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print the architecture budget for every sample size in the sweep.
    Budget {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the full sweep and write JSON, CSV and plot data.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the operator's low-complexity decomposition against its solver.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Projection error of the spectral encoder over a range of degrees.
    EncodeSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        degrees: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Draw one input from the configured sampler and store it.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Errors grouped by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Exit 2.
    Config(String),
    /// Exit 4.
    Io(String),
    /// Exit 1.
    Runtime(String),
}

impl From<oplearn::Error> for Failure {
    fn from(e: oplearn::Error) -> Self {
        use oplearn::Error as E;
        match e {
            E::InvalidArgument(_) | E::Unsupported(_) | E::DimensionMismatch { .. } | E::OutOfDomain { .. } => {
                Failure::Config(e.to_string())
            }
            E::Io(_) | E::Format(_) | E::Json(_) => Failure::Io(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        // only fails if a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let outcome = match cli.command {
        Command::Solve { config, input, output } => solve(&config, &input, &output),
        Command::Budget { config } => budget(&config),
        Command::Run { config, output } => run(&config, output),
        Command::Verify { config, trials } => verify(&config, trials),
        Command::EncodeSweep {
            config,
            degrees,
            trials,
        } => encode_sweep(&config, &degrees, trials),
        Command::Sample { config, output, seed } => sample(&config, &output, seed),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let (code, msg) = match f {
                Failure::Config(m) => (2, m),
                Failure::Io(m) => (4, m),
                Failure::Runtime(m) => (1, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn norms(cfg: &Config) -> (NormKind, NormKind) {
    cfg.sweep
        .as_ref()
        .map(|s| (s.input_norm, s.norm))
        .unwrap_or((NormKind::L2, NormKind::L2))
}

fn solve(path: &Path, input: &Path, output: &Path) -> Result<u8, Failure> {
    let cfg = Config::load(path)?;
    let op = Operator::new(cfg.operator()?)?;
    let container = Container::load(input).map_err(|e| io_error(input, e))?;
    let u = grid_function_from_container(&container).map_err(|e| io_error(input, e))?;
    let v = op.apply(&u)?;
    grid_function_container(&v).save(output).map_err(|e| io_error(output, e))?;
    let (x, y) = norms(&cfg);
    println!("operator: {}", op.id());
    match op.analytic_lipschitz(x, y) {
        Some(b) => println!("analytic Lipschitz bound: {b:.6e}"),
        None => println!("analytic Lipschitz bound: none"),
    }
    if let Some(spec) = &cfg.sampler {
        let sampler = spec.build(op.input_grid())?;
        let pairs = cfg.sweep.as_ref().map_or(32, |s| s.lipschitz_pairs);
        let r = estimate_operator_lipschitz(&op, sampler.as_ref(), pairs, x, y, cfg.seed)?;
        println!(
            "estimated Lipschitz constant: {:.6e} ({} pairs, {} skipped)",
            r.estimate, r.pairs_used, r.skipped
        );
    }
    println!("wrote {}", output.display());
    Ok(0)
}

fn budget(path: &Path) -> Result<u8, Failure> {
    let cfg = Config::load(path)?;
    let spec = cfg.operator()?;
    let enc = cfg.encoder()?;
    let d_x = enc.input.build(&spec.input_grid)?.encoded_dim();
    let d_y = enc.output.build(&spec.output_grid)?.encoded_dim();
    let b = cfg.budget()?;
    println!("theorem {}  d_X={d_x}  d_Y={d_y}", b.theorem);
    println!("{:>8} {:>6} {:>6} {:>8} {:>12} {:>12} {:>6}", "n", "L", "p", "K", "kappa", "M", "Lp");
    let fmt_opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    for &n in &cfg.sweep()?.ns {
        let inputs = BudgetInputs {
            theorem: b.theorem,
            n,
            d_x,
            d_y,
            d0: b.d0,
            d_max: b.d_max,
            l_max: b.l_max,
            blocks: b.blocks,
            encoder_lipschitz: b.encoder_lipschitz.unwrap_or(1.0),
            output_radius: b.output_radius.unwrap_or(1.0),
            c_l: b.c_l,
            c_p: b.c_p,
        };
        let a = budget_from_theorem(&inputs)?;
        println!(
            "{:>8} {:>6} {:>6} {:>8} {:>12} {:>12.6} {:>6}",
            n,
            a.depth,
            a.width,
            fmt_opt(a.nonzeros.map(|k| k.to_string())),
            fmt_opt(a.weight_bound.map(|k| format!("{k:.6}"))),
            a.clamp,
            fmt_opt(a.lp.map(|k| k.to_string())),
        );
    }
    Ok(0)
}

fn ensure_writable(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let probe = dir.join(".oplearn-write-test");
    std::fs::write(&probe, b"").map_err(|e| io_error(dir, e))?;
    let _ = std::fs::remove_file(probe);
    Ok(())
}

fn run(path: &Path, output: Option<PathBuf>) -> Result<u8, Failure> {
    let cfg = Config::load(path)?.experiment()?;
    let dir = output.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    ensure_writable(&dir)?;
    let res = run_experiment(&cfg)?;
    res.write(&dir).map_err(|e| io_error(&dir, e))?;
    println!("{:>8} {:>12} {:>12} {:>12}", "n", "mean", "median", "train");
    for p in &res.points {
        println!("{:>8} {:>12.4e} {:>12.4e} {:>12.4e}", p.n, p.mean, p.median, p.train_loss);
    }
    if let Some(fit) = res.fit {
        println!(
            "fitted slope {:.4} ± {:.4} (predicted {:.4})",
            fit.slope, fit.stderr, res.predicted_exponent
        );
    }
    for f in &res.failures {
        eprintln!("trial failure at n={} trial={}: {}", f.n, f.trial, f.error);
    }
    println!("results written to {}", dir.display());
    Ok(if res.is_complete() { 0 } else { 3 })
}

fn verify(path: &Path, trials: usize) -> Result<u8, Failure> {
    let cfg = Config::load(path)?;
    let op = Operator::new(cfg.operator()?)?;
    let sampler = cfg.sampler()?.build(op.input_grid())?;
    let (_, y_norm) = norms(&cfg);
    let nodal_x = NodalEncoder::new(op.input_grid());
    let nodal_y = NodalEncoder::new(op.output_grid());
    let (chain, enc_x, enc_y, y_norm, check): (BlockChain, Box<dyn Encoder>, Box<dyn Encoder>, NormKind, Check) =
        match &op {
            Operator::Poisson(_) | Operator::Heat(_) => {
                let enc = cfg.encoder()?;
                let ex = enc.input.build(op.input_grid())?;
                let ey = enc.output.build(op.output_grid())?;
                let chain = linear_decomposition(&op, ex.as_ref(), ey.as_ref())?;
                (chain, ex, ey, y_norm, Check::MeanRelative(0.02))
            }
            Operator::Transport(t) => {
                let h = op.input_grid().spacing();
                let chain = transport_decomposition(t)?;
                (chain, Box::new(nodal_x), Box::new(nodal_y), NormKind::Linf, Check::MaxAbsolute(h * h))
            }
            Operator::Burgers(b) => {
                let chain = burgers_decomposition(b)?;
                (chain, Box::new(nodal_x), Box::new(nodal_y), NormKind::Linf, Check::MaxAbsolute(1e-6))
            }
            Operator::Elliptic(_) => {
                return Err(Failure::Config(
                    "verify supports poisson, heat, transport, burgers; elliptic has no low-complexity decomposition"
                        .into(),
                ))
            }
        };
    let r = verify_chain(&chain, &op, enc_x.as_ref(), enc_y.as_ref(), sampler.as_ref(), trials, y_norm, cfg.seed)?;
    println!("operator: {}  blocks: {}  d_max: {}  l_max: {}", op.id(), chain.blocks.len(), chain.d_max, chain.l_max);
    println!(
        "discrepancy over {} inputs: max {:.3e}  mean {:.3e}  max relative {:.3e}  mean relative {:.3e}",
        r.trials, r.max_discrepancy, r.mean_discrepancy, r.max_relative, r.mean_relative
    );
    let (pass, what) = match check {
        Check::MeanRelative(t) => (r.mean_relative <= t, format!("mean relative <= {t:e}")),
        Check::MaxAbsolute(t) => (r.max_discrepancy <= t, format!("max discrepancy <= {t:e}")),
    };
    println!("{} ({what})", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { 0 } else { 1 })
}

enum Check {
    MeanRelative(f64),
    MaxAbsolute(f64),
}

fn encode_sweep(path: &Path, degrees: &[usize], trials: usize) -> Result<u8, Failure> {
    let cfg = Config::load(path)?;
    let grid = cfg.operator()?.input_grid.clone();
    let sampler = cfg.sampler()?.build(&grid)?;
    let (x_norm, _) = norms(&cfg);
    if degrees.is_empty() {
        return Err(Failure::Config("--degrees needs at least one value".into()));
    }
    println!("{:>8} {:>8} {:>14}", "degree", "d_X", "error");
    let mut dims = Vec::new();
    let mut errs = Vec::new();
    for &r in degrees {
        let enc = SpectralEncoder::for_grid(&grid, r)?.codec(&grid)?;
        let e = projection_error(sampler.as_ref(), &enc, trials, x_norm, cfg.seed)?;
        println!("{:>8} {:>8} {:>14.6e}", r, enc.encoded_dim(), e);
        dims.push(enc.encoded_dim());
        errs.push(e);
    }
    if dims.len() >= 2 && errs.iter().all(|&e| e > 0.0) {
        let fit = fit_rate(&dims, &errs)?;
        println!("slope vs d_X: {:.4} ± {:.4}", fit.slope, fit.stderr);
    }
    Ok(0)
}

fn sample(path: &Path, output: &Path, seed: Option<u64>) -> Result<u8, Failure> {
    let cfg = Config::load(path)?;
    let grid = cfg.operator()?.input_grid.clone();
    let sampler = cfg.sampler()?.build(&grid)?;
    let u = sampler.draw(&mut seeds::rng(seed.unwrap_or(cfg.seed)))?;
    grid_function_container(&u).save(output).map_err(|e| io_error(output, e))?;
    println!("wrote {} ({} values)", output.display(), u.values().len());
    Ok(0)
}
