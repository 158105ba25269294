use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fredholm_cli::report::{render_report, Format};
use fredholm_cli::runner::{compare_fd, FdCompare};
use fredholm_cli::{registry, run_example, run_problem, CliError, Overrides, ReportBundle, RunOptions};

#[derive(Parser)]
#[command(name = "fredholm", version, about = "Fredholm neural network solvers for integral equations, BVPs and the Laplace equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a JSON config file.
    Solve {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run a bundled example with its pinned settings.
    Example {
        name: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// List the bundled examples.
    List,
    /// Validate every bundled example config.
    SelfTest,
    /// Finite-difference reference solution of the disc problem, compared
    /// with the exact and the boundary-integral network solutions.
    CompareFd {
        #[arg(long, default_value_t = 200)]
        nr: usize,
        #[arg(long, default_value_t = 200)]
        ntheta: usize,
        /// Dirichlet data in `phi`.
        #[arg(long, default_value = "1 + cos(2*phi)")]
        boundary: String,
        /// Exact solution in `r`, `phi`, `x`, `y`.
        #[arg(long, default_value = "x^2 - y^2 + 1")]
        exact: String,
        /// Also solve at half resolution and report the error ratio.
        #[arg(long)]
        refine: bool,
        #[arg(long, default_value_t = 2000)]
        theta_n: usize,
        #[arg(long, default_value_t = 15)]
        layers: usize,
        #[arg(long, default_value_t = fredholm_core::laplace::DEFAULT_KAPPA)]
        kappa: f64,
        #[command(flatten)]
        output: OutputFlags,
    },
}

#[derive(Args)]
struct RunFlags {
    /// Number of grid nodes (θ-nodes for the disc problem).
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    /// left, midpoint or closed.
    #[arg(long)]
    scheme: Option<String>,
    /// `a:b:n`; the disc problem takes `ra:rb:nr,pa:pb:np`.
    #[arg(long)]
    queries: Option<String>,
    /// Append an error-vs-layers table for M = 1..=Mmax.
    #[arg(long, value_name = "MMAX")]
    sweep: Option<usize>,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Args)]
struct OutputFlags {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Sequential execution and no timings in the output.
    #[arg(long)]
    deterministic: bool,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            grid: self.grid,
            layers: self.layers,
            kappa: self.kappa,
            scheme: self.scheme.clone(),
            queries: self.queries.clone(),
            sweep: self.sweep,
        }
    }
}

fn emit(bundle: &ReportBundle, output: &OutputFlags) -> Result<(), CliError> {
    let format: Format = output.format.parse()?;
    if let Some(text) = render_report(bundle, format, output.out.as_deref())? {
        std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e))?;
    }
    if let Some(err) = bundle.metadata.max_abs_err {
        eprintln!("max abs_err = {err:.3e}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config, flags } => {
            let opts = RunOptions {
                deterministic: flags.output.deterministic,
            };
            let bundle = run_problem(&config, &flags.overrides(), opts)?;
            emit(&bundle, &flags.output)
        }
        Command::Example { name, flags } => {
            let opts = RunOptions {
                deterministic: flags.output.deterministic,
            };
            let bundle = run_example(&name, &flags.overrides(), opts)?;
            emit(&bundle, &flags.output)
        }
        Command::List => {
            for name in registry::names() {
                println!("{name:<14}{}", registry::description(name)?);
            }
            Ok(())
        }
        Command::SelfTest => {
            let mut failed = 0;
            for (name, result) in registry::self_test() {
                match result {
                    Ok(_) => println!("ok    {name}"),
                    Err(e) => {
                        failed += 1;
                        println!("FAIL  {name}: {e}");
                    }
                }
            }
            if failed > 0 {
                return Err(CliError::Validation(format!("{failed} registry entries failed validation")));
            }
            Ok(())
        }
        Command::CompareFd {
            nr,
            ntheta,
            boundary,
            exact,
            refine,
            theta_n,
            layers,
            kappa,
            output,
        } => {
            let cfg = FdCompare {
                boundary,
                exact: Some(exact),
                nr,
                ntheta,
                refine,
                theta_n,
                layers,
                kappa,
            };
            let bundle = compare_fd(&cfg, RunOptions { deterministic: output.deterministic })?;
            for (k, v) in &bundle.metadata.extra {
                eprintln!("{k} = {v:.6e}");
            }
            emit(&bundle, &output)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
