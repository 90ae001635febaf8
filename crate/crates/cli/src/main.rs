use clap::{Args, Parser, Subcommand};
use expmix::commands;
use expmix::report::Report;
use expmix::spec::parse_grid;
use expmix::suite::verify_all_report;

/// Checks for exponential and mixture arc connectivity, Orlicz norms, and
/// divergence finiteness on densities over the unit interval.
#[derive(Parser)]
#[command(name = "expmix", version, disable_help_subcommand = true)]
struct Cli {
    /// Emit the report as JSON instead of plain text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the Luxemburg norm of a variable under a density.
    Norm {
        /// Variable spec, e.g. "logx" or "steps 0:0.5:1,0.5:1:-1".
        #[arg(long)]
        u: String,
        /// Density spec, e.g. "uniform" or "beta beta=2".
        #[arg(long, default_value = "uniform")]
        p: String,
        /// Young function name.
        #[arg(long, default_value = "cosh_minus_one")]
        phi: String,
        /// Relative tolerance for the norm bracket.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Decide whether two densities are connected by an open arc.
    Arc {
        #[command(subcommand)]
        which: ArcCommand,
    },
    /// Cross-check the equivalent membership conditions for a pair.
    Model {
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Compute both relative entropies and the finiteness equivalence.
    Divergence {
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Run the one-sided singular family checks.
    Counterexample {
        /// Largest k in the exponent grid eps = 2^0 .. 2^-k.
        #[arg(long, default_value_t = 20)]
        eps_pow_max: u32,
        /// Number of terms for the entropy series and its direct check.
        #[arg(long, default_value_t = 10_000)]
        series_terms: u64,
    },
    /// Restrict a density to the information available up to time t.
    Restrict {
        /// Density spec.
        #[arg(long)]
        p: String,
        /// Cut point in (0, 1).
        #[arg(long)]
        t: f64,
    },
    /// Scan restriction connectivity over a grid of cut points.
    StabilityScan {
        /// Density spec.
        #[arg(long)]
        p: String,
        /// Comma-separated cut points, e.g. "0.25,0.5,0.75".
        #[arg(long)]
        grid: String,
    },
    /// Approximate a target density by clamped mixture iterates.
    Closure {
        #[command(subcommand)]
        which: ClosureCommand,
    },
    /// Run every built-in verification bundle and report per-check results.
    VerifyAll,
}

#[derive(Subcommand)]
enum ArcCommand {
    /// Exponential arc connectivity.
    ExpCheck {
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Mixture arc connectivity.
    MixCheck {
        #[command(flatten)]
        pair: PairArgs,
    },
}

#[derive(Subcommand)]
enum ClosureCommand {
    /// Build iterates q_n and report normalizers and l1 errors.
    Approx {
        /// Center density spec.
        #[arg(long)]
        density: String,
        /// Simple target density spec, e.g. "steps 0:0.5:2,0.5:1:0".
        #[arg(long)]
        target: String,
        /// Largest iterate index.
        #[arg(long)]
        n_max: u64,
    },
}

#[derive(Args)]
struct PairArgs {
    /// Reference density spec.
    #[arg(long)]
    p: String,
    /// Comparison density spec.
    #[arg(long)]
    q: String,
}

fn build_report(command: Command) -> Result<Report, String> {
    match command {
        Command::Norm { u, p, phi, tol } => commands::norm_report(&u, &p, &phi, tol),
        Command::Arc { which } => match which {
            ArcCommand::ExpCheck { pair } => commands::arc_report(true, &pair.p, &pair.q),
            ArcCommand::MixCheck { pair } => commands::arc_report(false, &pair.p, &pair.q),
        },
        Command::Model { pair } => commands::model_report(&pair.p, &pair.q),
        Command::Divergence { pair } => commands::divergence_report(&pair.p, &pair.q),
        Command::Counterexample { eps_pow_max, series_terms } => {
            commands::counterexample_report(eps_pow_max, series_terms)
        }
        Command::Restrict { p, t } => commands::restrict_report(&p, t),
        Command::StabilityScan { p, grid } => {
            let ts = parse_grid(&grid)?;
            commands::stability_report(&p, &ts)
        }
        Command::Closure { which } => match which {
            ClosureCommand::Approx { density, target, n_max } => {
                commands::closure_report(&density, &target, n_max)
            }
        },
        Command::VerifyAll => Ok(verify_all_report()),
    }
}

fn main() {
    let cli = Cli::parse();
    let json = cli.json;
    match build_report(cli.command) {
        Ok(report) => {
            if json {
                print!("{}", report.render_json());
            } else {
                print!("{}", report.render_text());
            }
            std::process::exit(if report.pass { 0 } else { 1 });
        }
        Err(message) => {
            eprintln!("error: {message}");
            std::process::exit(2);
        }
    }
}
