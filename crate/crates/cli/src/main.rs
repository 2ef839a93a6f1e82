//! `gapprob`: batch front-end for gap-probability tabulation and checks.
//!
//! Exit status 0 means every check passed, 1 that a check failed (the
//! report is still written) and 2 a configuration or numerical error.

mod args;
mod commands;
mod output;
mod selftest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use args::{
    EndpointArg, EnsembleArg, EnsembleOpts, FdOpts, Grid, OutputOpts, PrecisionOpts, WindowOpts,
};

#[derive(Debug, Parser)]
#[command(name = "gapprob", version, about = "Gap probabilities of the Gaussian and Laguerre unitary ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Truncated moments mu_0 .. mu_count of the weight on (a, b).
    Moments {
        #[command(flatten)]
        ensemble: EnsembleOpts,
        #[command(flatten)]
        precision: PrecisionOpts,
        #[command(flatten)]
        window: WindowOpts,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Norms and recurrence coefficients, cross-checked against the
    /// quadrature construction.
    Recurrence {
        #[command(flatten)]
        ensemble: EnsembleOpts,
        #[command(flatten)]
        precision: PrecisionOpts,
        #[command(flatten)]
        window: WindowOpts,
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        /// Quadrature nodes for the cross-check.
        #[arg(long, default_value_t = 64)]
        nodes: usize,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Ladder compatibility identities at one window.
    Compat {
        #[command(flatten)]
        ensemble: EnsembleOpts,
        #[command(flatten)]
        precision: PrecisionOpts,
        #[command(flatten)]
        window: WindowOpts,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// ln D_n, ln Prob, H_n and p1(n) on an (a, b) grid.
    Surface {
        #[command(flatten)]
        ensemble: EnsembleOpts,
        #[command(flatten)]
        precision: PrecisionOpts,
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        a_grid: Grid,
        #[arg(long, allow_hyphen_values = true)]
        b_grid: Grid,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Gaussian master PDE residual at one window.
    PdeGue {
        #[arg(long, default_value_t = 80)]
        digits: u32,
        #[command(flatten)]
        window: WindowOpts,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        fd: FdOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Laguerre master PDE residual at one window.
    PdeLue {
        #[arg(long, default_value_t = 80)]
        digits: u32,
        #[arg(long)]
        alpha: f64,
        #[command(flatten)]
        window: WindowOpts,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        fd: FdOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Toda equations for the recurrence coefficients.
    Toda {
        #[command(flatten)]
        ensemble: EnsembleOpts,
        #[command(flatten)]
        precision: PrecisionOpts,
        #[command(flatten)]
        window: WindowOpts,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        fd: FdOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Sigma-form residual of a one-sided reduction, or of an edge profile
    /// when --kind names a Painleve II form.
    SigmaOde {
        #[command(flatten)]
        ensemble: EnsembleOpts,
        #[command(flatten)]
        precision: PrecisionOpts,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, value_enum, default_value = "b")]
        free: EndpointArg,
        /// piv, pv, pii-gue-f, pii-gue-g, pii-lue-f or pii-lue-g.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[command(flatten)]
        fd: FdOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Tracy-Widom F2 on an even grid.
    Tw {
        #[arg(long, allow_hyphen_values = true)]
        smin: f64,
        #[arg(long, allow_hyphen_values = true)]
        smax: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Edge profiles f, g and the limiting PDE residual.
    ScalingLimit {
        #[arg(long, value_enum, default_value = "gue")]
        ensemble: EnsembleArg,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true, default_value = "-4:4:17")]
        x_grid: Grid,
        #[arg(long, allow_hyphen_values = true, default_value = "-4:4:17")]
        y_grid: Grid,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Factorization of the joint edge probabilities as n grows.
    Independence {
        #[arg(long, value_enum, default_value = "gue")]
        ensemble: EnsembleArg,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value = "4,8,16", value_parser = args::parse_list)]
        n_list: std::vec::Vec<usize>,
        #[arg(long, allow_hyphen_values = true, default_value = "-2:2:5")]
        x_grid: Grid,
        #[arg(long, allow_hyphen_values = true, default_value = "-2:2:5")]
        y_grid: Grid,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Monte Carlo estimate of Prob(n, a, b) against the Hankel route.
    Mc {
        #[command(flatten)]
        ensemble: EnsembleOpts,
        #[command(flatten)]
        window: WindowOpts,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Direct n-fold quadrature of the joint density (n <= 3).
    QuadOracle {
        #[command(flatten)]
        ensemble: EnsembleOpts,
        #[command(flatten)]
        precision: PrecisionOpts,
        #[command(flatten)]
        window: WindowOpts,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        nodes: usize,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Fast subset of the verification suite.
    Selftest {
        /// Multiplies every tolerance; 0 makes every check fail.
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
        #[command(flatten)]
        output: OutputOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gapprob: {e}");
            ExitCode::from(2)
        }
    }
}
