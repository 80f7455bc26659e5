use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pitdn::harness::{self, ExperimentConfig, HarnessError};
use pitdn::loss::{Method, NetField};
use pitdn::net::ParamVector;
use pitdn::problems::{ProblemKind, ProblemSpec};
use pitdn::reference::{burgers_fd_solve, burgers_min_nt, certified_burgers};

#[derive(Parser)]
#[command(name = "pitdn", version, about = "Time-derivative networks for 1D evolution equations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one network and write metrics, history, grids and a checkpoint.
    Train {
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        method: Option<Method>,
        /// Flat TOML config; flags given on the command line win.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        log_every: usize,
    },
    /// Finite-difference reference solutions.
    Reference {
        #[command(subcommand)]
        which: RefCmd,
    },
    /// Numerical checks; prints a JSON report and exits nonzero on failure.
    Check {
        which: CheckKind,
        /// Trained time-derivative checkpoint (equivalence only).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Problem of the checkpoint; read from a neighbouring metrics.json if absent.
        #[arg(long)]
        problem: Option<String>,
        /// Final training loss; read from metrics.json if absent.
        #[arg(long)]
        final_loss: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train both methods on one collocation set and print a table.
    Compare {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        log_every: usize,
    },
}

#[derive(Subcommand)]
enum RefCmd {
    Burgers {
        #[arg(long, default_value_t = 2048)]
        nx: usize,
        /// Time steps; the smallest stable count if absent.
        #[arg(long)]
        nt: Option<usize>,
        #[arg(long)]
        nu: Option<f64>,
        /// Run the three-grid refinement study starting from this nx and keep
        /// the finest grid.
        #[arg(long)]
        certify: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Quadrature,
    Propagation,
    Wirtinger,
    Gradients,
    Equivalence,
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig, HarnessError> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn report<T: Serialize>(value: &T, passed: bool) -> Result<bool, HarnessError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    println!("{}", if passed { "PASS" } else { "FAIL" });
    Ok(passed)
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.cmd {
        Cmd::Train {
            problem,
            method,
            config,
            seed,
            out,
            log_every,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(p) = problem {
                cfg.problem = p;
            }
            if let Some(m) = method {
                cfg.method = m;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.out_dir = Some(out.clone());
            cfg.log_every = log_every;
            let r = harness::run_experiment(&cfg)?;
            let m = &r.metrics;
            println!(
                "{} {} seed {}: rel_l2 {:.4e}  rel_linf {:.4e}  loss {:.3e}  {} iters ({:?})  {:.1}s",
                m.problem,
                m.method.as_str(),
                m.seed,
                m.rel_l2,
                m.rel_linf,
                m.final_loss.total,
                m.iterations_used,
                m.termination,
                m.train_seconds
            );
            println!("wrote {}", out.display());
            Ok(true)
        }
        Cmd::Reference {
            which: RefCmd::Burgers {
                nx,
                nt,
                nu,
                certify,
                out,
            },
        } => {
            let mut spec = ProblemSpec::burgers(0.01 / std::f64::consts::PI);
            if let (Some(v), ProblemKind::Burgers { nu }) = (nu, &mut spec.kind) {
                *nu = v;
            }
            let ProblemKind::Burgers { nu } = spec.kind else { unreachable!() };
            let t_end = spec.domain.t_end;
            if certify {
                let (sol, rep) = certified_burgers(nu, t_end, nx)?;
                sol.save(&out, Some(&rep))?;
                println!("{}", serde_json::to_string_pretty(&rep)?);
                println!("wrote nx = {} to {}", sol.nx(), out.display());
                Ok(rep.passed)
            } else {
                let nt = nt.unwrap_or_else(|| burgers_min_nt(nx, nu, t_end, 4));
                let sol = burgers_fd_solve(nx, nt, nu, t_end)?;
                sol.save(&out, None)?;
                println!("nx {nx}, nt {nt}: wrote {}", out.display());
                Ok(true)
            }
        }
        Cmd::Check {
            which,
            checkpoint,
            problem,
            final_loss,
            seed,
        } => match which {
            CheckKind::Quadrature => {
                let c = harness::check_quadrature()?;
                for q in &c {
                    eprintln!("{}", q.summary());
                }
                let ok = c.iter().all(|q| q.passed);
                report(&c, ok)
            }
            CheckKind::Propagation => {
                let c = harness::check_propagation(seed)?;
                report(&c, c.passed)
            }
            CheckKind::Wirtinger => {
                let horizon = match problem {
                    Some(p) => ProblemSpec::by_name(&p)?.domain.t_end,
                    None => 1.0,
                };
                let c = harness::check_wirtinger(horizon)?;
                report(&c, c.passed)
            }
            CheckKind::Gradients => {
                let c = harness::check_gradients(seed)?;
                report(&c, c.passed)
            }
            CheckKind::Equivalence => {
                let path = checkpoint.ok_or_else(|| HarnessError::Config("--checkpoint is required".into()))?;
                let params = ParamVector::load(&path)?;
                let metrics = harness::sibling_metrics(&path);
                if let Some(m) = &metrics {
                    if m.method != Method::Pitdn {
                        return Err(HarnessError::Config("equivalence applies to time-derivative checkpoints".into()));
                    }
                }
                let name = problem
                    .or_else(|| metrics.as_ref().map(|m| m.problem.clone()))
                    .ok_or_else(|| HarnessError::Config("--problem is required without metrics.json".into()))?;
                let loss = final_loss
                    .or_else(|| metrics.as_ref().map(|m| m.final_loss.total))
                    .ok_or_else(|| HarnessError::Config("--final-loss is required without metrics.json".into()))?;
                let cfg = metrics.map(|m| m.config).unwrap_or_default();
                let spec = ProblemSpec::by_name(&name)?;
                let c = harness::check_equivalence(&NetField::new(&params)?, &spec, &cfg.quadrature(), loss)?;
                report(&c, c.passed)
            }
        },
        Cmd::Compare {
            problem,
            config,
            seed,
            out,
            log_every,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            cfg.problem = problem;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.log_every = log_every;
            std::fs::create_dir_all(&out)?;
            let c = harness::compare(&cfg, Some(&out))?;
            print!("{}", c.table());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
