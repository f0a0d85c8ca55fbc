//! Batch interface to the resonance toolkit: mode tables, growth
//! functions, counting curves, worst-case angles, and the verification
//! suites, rendered as CSV or JSON.
//!
//! Exit codes: 0 success, 1 verification failure, 2 bad input or config,
//! 3 resource guard tripped, 4 precision exhausted.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use reslab::cli::{
    self, cmd_bound, cmd_lambda, cmd_modes, cmd_resonances, cmd_verify, cmd_worstcase,
    exit_code_for, parse_config, Format, OutputTable, ResonanceSource,
};
use reslab::cusp::ValidatedGroup;
use reslab::{Error, Result};

#[derive(Parser)]
#[command(name = "reslab", version, about = "resonance counting toolkit", max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; when absent the table goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table format; defaults to the --out extension, then CSV.
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate cusp Fourier modes up to degree and frequency caps.
    Modes {
        /// Cusp model configuration (JSON).
        config: PathBuf,
        /// Largest mode degree to include.
        #[arg(long, default_value_t = 8)]
        m_max: u32,
        /// Largest frequency parameter to include.
        #[arg(long, default_value_t = 10.0)]
        b_max: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Tabulate the growth function of each cusp with witnesses.
    Lambda {
        /// Cusp model configuration (JSON).
        config: PathBuf,
        /// Comma-separated arguments u > 0.
        #[arg(long, value_delimiter = ',', required = true)]
        u_grid: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// List resonances of the model space, or cusp pole lattices from a
    /// configuration.
    Resonances {
        /// Cusp model configuration (JSON); mutually exclusive with --n.
        config: Option<PathBuf>,
        /// Boundary dimension of the model space.
        #[arg(long, conflicts_with = "config")]
        n: Option<u32>,
        /// Count resonances in the closed ball of this radius.
        #[arg(long = "R")]
        r: f64,
        /// Frequency cutoff per unit distance for lattice candidates.
        #[arg(long, default_value_t = 1.0)]
        c_bound: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate the resonance counting bound over a radius grid.
    Bound {
        /// Cusp model configuration (JSON).
        config: PathBuf,
        /// Comma-separated radii R > 1.
        #[arg(long, value_delimiter = ',', required = true)]
        r_grid: Vec<f64>,
        /// Leading constant of the bound.
        #[arg(long = "C", default_value_t = 1.0)]
        c: f64,
        /// Require every cusp to pass the power-law growth check first.
        #[arg(long)]
        diophantine: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the numerical verification suites.
    Verify {
        /// One of coefficients, beta, bessel, fkernel, resolvent, all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Grid density multiplier.
        #[arg(long, default_value_t = 1.0)]
        grid_scale: f64,
        /// Report file; when absent the report goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a worst-case rotation angle and audit its design table.
    Worstcase {
        /// Denominator of the base rational angle.
        #[arg(long, default_value_t = 1)]
        q: u32,
        /// Number of doubly exponential refinement levels.
        #[arg(long, default_value_t = 3)]
        depth: u32,
        /// Translation length of the cusp model.
        #[arg(long, default_value_t = 1.0)]
        ell: f64,
        /// Working precision for the exact angle arithmetic.
        #[arg(long, default_value_t = 4096)]
        precision_bits: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn read_groups(path: &PathBuf) -> Result<Vec<ValidatedGroup>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::OffDomain {
        what: format!("cannot read config {}: {e}", path.display()),
    })?;
    let (_, groups, _) = parse_config(&text)?;
    Ok(groups)
}

fn read_config_n(path: &PathBuf) -> Result<(u32, Vec<ValidatedGroup>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::OffDomain {
        what: format!("cannot read config {}: {e}", path.display()),
    })?;
    let (cfg, groups, _) = parse_config(&text)?;
    Ok((cfg.dimension_n, groups))
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::OffDomain {
            what: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_table(table: &OutputTable, output: &OutputArgs) -> Result<()> {
    let format = match output.format.as_deref() {
        Some("json") => Format::Json,
        Some(_) => Format::Csv,
        None => output
            .out
            .as_ref()
            .and_then(|p| Format::from_extension(&p.to_string_lossy()))
            .unwrap_or(Format::Csv),
    };
    emit(&table.render(format)?, output.out.as_ref())
}

/// Returns the process exit code: verification failures map to 1.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Modes { config, m_max, b_max, output } => {
            let groups = read_groups(&config)?;
            emit_table(&cmd_modes(&groups, m_max, b_max)?, &output)?;
            Ok(0)
        }
        Command::Lambda { config, u_grid, output } => {
            let groups = read_groups(&config)?;
            emit_table(&cmd_lambda(&groups, &u_grid)?, &output)?;
            Ok(0)
        }
        Command::Resonances { config, n, r, c_bound, output } => {
            let table = match (config, n) {
                (None, Some(n)) => cmd_resonances(&ResonanceSource::Free { n }, r)?,
                (Some(path), None) => {
                    let groups = read_groups(&path)?;
                    cmd_resonances(&ResonanceSource::Cusps { groups: &groups, c_bound }, r)?
                }
                _ => {
                    return Err(Error::OffDomain {
                        what: "pass exactly one of a config file or --n".into(),
                    })
                }
            };
            emit_table(&table, &output)?;
            Ok(0)
        }
        Command::Bound { config, r_grid, c, diophantine, output } => {
            let (n, groups) = read_config_n(&config)?;
            emit_table(&cmd_bound(&groups, n, &r_grid, c, diophantine)?, &output)?;
            Ok(0)
        }
        Command::Verify { suite, grid_scale, out } => {
            let reports = cmd_verify(&suite, grid_scale)?;
            emit(&cli::verify_report_json(&reports), out.as_ref())?;
            Ok(if reports.iter().all(|r| r.passed) { 0 } else { 1 })
        }
        Command::Worstcase { q, depth, ell, precision_bits, output } => {
            emit_table(&cmd_worstcase(q, depth, ell, precision_bits)?, &output)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
