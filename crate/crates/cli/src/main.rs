use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracchemo::comparison::constants;
use fracchemo::eigen::{assemble_restricted, drifted_principal_eigen, principal_eigenpair};
use fracchemo::harness::{run_suite, sweep, sweep_summary, CheckKind, ExperimentConfig};
use fracchemo::kernels::{kernel_mass, tabulate, KernelSpec};
use fracchemo::regime::{classify, DEFAULT_EQ_TOL};
use fracchemo::Error;

#[derive(Parser)]
#[command(
    name = "fracchemo",
    version,
    about = "Fractional attraction-repulsion chemotaxis simulator and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment config (`fracchemo-config v1`).
    #[arg(long, visible_alias = "params")]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured simulation and checks.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Directory for CSVs and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print which hypotheses hold, C0, equilibrium and speed bounds.
    Classify {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Exact equality tests instead of 1e-12 relative.
        #[arg(long)]
        strict: bool,
        /// Write the inequality table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print M, H, C0 per case, the equilibrium and M1 as CSV.
    Constants {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Fit the front rate and write the trace.
    Speed {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Comma-separated alpha values; one trace file per value.
        #[arg(long, value_delimiter = ',')]
        alpha_grid: Vec<f64>,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
    },
    /// Principal eigenvalue of the restricted Dirichlet problem on (-l, l).
    Eigen {
        #[arg(long)]
        l: f64,
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        /// Drift coefficient; with --abar also prints the drifted eigenvalue.
        #[arg(long, allow_hyphen_values = true)]
        c: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        abar: Option<f64>,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        xi: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t0: f64,
    },
    /// Fractional heat kernel utilities.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Run one simulation per value of a config key.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Key to vary, e.g. `k` or `params.b`.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
}

#[derive(Subcommand)]
enum KernelAction {
    /// Tabulate K_t on a radial grid as `x,K` CSV.
    Tabulate {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 10.0)]
        xmax: f64,
        #[arg(long, default_value_t = 101)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mass of K_t with the tail beyond `radius` from its asymptotic expansion.
    Mass {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 400.0)]
        radius: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

enum Failure {
    Checks,
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Parameter(_) | Error::Parse(_) | Error::Grid(_) => {
                Failure::Config(e)
            }
            _ => Failure::Runtime(e),
        }
    }
}

fn load(cfg: &ConfigArg) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(&cfg.config).map_err(|e| match e {
        Error::Io(io) => Failure::Config(Error::Parse(format!("{}: {io}", cfg.config.display()))),
        e => Failure::from(e),
    })
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Runtime(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { cfg, out } => {
            let c = load(&cfg)?;
            let r = run_suite(&c, out.as_deref())?;
            print!("{}", r.report());
            if !r.all_passed() {
                return Err(Failure::Checks);
            }
        }
        Command::Classify { cfg, strict, out } => {
            let c = load(&cfg)?;
            let v = classify(&c.params, c.initial_field()?.sup(), strict);
            print!("{}", v.render_text());
            if let Some(o) = out {
                fs::write(o, v.render_csv()).map_err(|e| Failure::Runtime(e.into()))?;
            }
        }
        Command::Constants { cfg } => {
            let c = load(&cfg)?;
            let k = constants(&c.params, c.initial_field()?.sup(), DEFAULT_EQ_TOL);
            let mut s = String::from("name,value\n");
            s.push_str(&format!("M,{}\nH,{}\n", k.m, k.h));
            for (case, v) in &k.c0 {
                s.push_str(&format!("C0_{case},{v}\n"));
            }
            let e = k.equilibrium;
            s.push_str(&format!(
                "u_star,{}\nv_star,{}\nw_star,{}\nM1,{}\n",
                e.u, e.v, e.w, k.m1
            ));
            print!("{s}");
        }
        Command::Speed {
            cfg,
            alpha_grid,
            out,
        } => {
            let mut base = load(&cfg)?;
            if !base.checks.contains(&CheckKind::Speed) {
                base.checks.push(CheckKind::Speed);
            }
            let alphas = if alpha_grid.is_empty() {
                vec![base.params.alpha]
            } else {
                alpha_grid
            };
            let mut failed = false;
            for &alpha in &alphas {
                let c = base.with_override("alpha", &alpha.to_string())?;
                let r = run_suite(&c, None)?;
                let target = if alphas.len() == 1 {
                    out.clone()
                } else {
                    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
                    out.with_file_name(format!("{stem}_alpha{alpha}.csv"))
                };
                let level = c
                    .stepper
                    .level
                    .unwrap_or(0.5 * r.verdict.asymptotics.equilibrium.u);
                let mut s = String::from("t,R,level\n");
                for x in &r.samples {
                    s.push_str(&format!("{},{},{}\n", x.t, x.r_level, level));
                }
                s.push_str("rate,r2,lower,upper\n");
                let (rate, r2) = r.fit.map_or((f64::NAN, f64::NAN), |f| (f.rate, f.r2));
                s.push_str(&format!(
                    "{rate},{r2},{},{}\n",
                    r.verdict.speed_lower, r.verdict.speed_upper
                ));
                write_or_print(Some(&target), &s)?;
                for ch in &r.checks {
                    println!("alpha {alpha}: {}: {} ({})", ch.kind, ch.status, ch.detail);
                }
                failed |= !r.all_passed();
            }
            if failed {
                return Err(Failure::Checks);
            }
        }
        Command::Eigen {
            l,
            n,
            alpha,
            c,
            abar,
            xi,
            t0,
        } => {
            let op = assemble_restricted(l, n, alpha).map_err(Failure::Config)?;
            let e = principal_eigenpair(&op)?;
            println!("lambda1 = {}", e.lambda);
            println!("lambda2 = {}", e.second);
            println!("relative_gap = {}", e.relative_gap());
            if let Some(abar) = abar {
                let v = drifted_principal_eigen(&op, c.unwrap_or(0.0), xi, abar, t0)?;
                println!("drifted = {v}");
            }
        }
        Command::Kernel { action } => match action {
            KernelAction::Tabulate {
                alpha,
                dim,
                t,
                xmax,
                n,
                out,
            } => {
                let spec = KernelSpec::new(alpha, dim, t).map_err(Failure::Config)?;
                let mut s = String::from("x,K\n");
                for (x, k) in tabulate(&spec, xmax, n)? {
                    s.push_str(&format!("{x},{k}\n"));
                }
                write_or_print(out.as_deref(), &s)?;
            }
            KernelAction::Mass {
                alpha,
                dim,
                t,
                radius,
                tol,
            } => {
                let spec = KernelSpec::new(alpha, dim, t).map_err(Failure::Config)?;
                let m = kernel_mass(&spec, radius, tol)?;
                println!(
                    "ball = {}\ntail = {}\nremainder = {:e}\ntotal = {}",
                    m.ball, m.tail, m.remainder, m.total
                );
            }
        },
        Command::Sweep {
            cfg,
            axis,
            values,
            out,
            workers,
        } => {
            let c = load(&cfg)?;
            let entries = sweep(&c, &axis, &values, out.as_deref(), workers)?;
            print!("{}", sweep_summary(&entries));
            if entries.iter().any(|e| !e.record.all_passed()) {
                return Err(Failure::Checks);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
    }
}
