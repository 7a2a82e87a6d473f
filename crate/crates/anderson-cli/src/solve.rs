//! `anderson solve <problem>`: run one accelerated solve and emit the
//! per-iteration trace as CSV.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;

use anderson::aa::{aa_solve, AaConfig, FixedPointProblem, SolveResult};
use anderson::linsolve::{PcgConfig, Preconditioner};
use anderson::problems::{BratuProblem, Grid2D, HeatProblem, HeatTerm, MixtureProblem};
use anderson::vector::{DistVector, Phase, ReductionLedger};

use crate::output::emit;
use crate::CliError;

#[derive(Args)]
pub struct SolveArgs {
    /// Problem: heat1 | heat2 | bratu | em
    pub problem: String,
    /// Orthogonalization kernel: mgs | icwy | cgs2 | dcgs2
    #[arg(long, default_value = "mgs")]
    pub method: String,
    /// Acceleration window depth
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    /// Convergence tolerance on the update norm
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Interior grid points per dimension (PDE problems)
    #[arg(long, default_value_t = 128)]
    pub grid: usize,
    /// Bratu parameter
    #[arg(long, default_value_t = 6.7)]
    pub lambda: f64,
    /// Simulated shard count
    #[arg(long, default_value_t = 1)]
    pub shards: usize,
    /// Sample seed (em). The mixture has several EM stationary points; the
    /// draw decides which basin the accelerated iteration lands in.
    #[arg(long, default_value_t = 12345)]
    pub seed: u64,
    /// Mixture sample count (em)
    #[arg(long, default_value_t = 100_000)]
    pub em_samples: usize,
    /// Replicated global vector length (em)
    #[arg(long, default_value_t = 3000)]
    pub em_length: usize,
    /// Inner linear-solve relative tolerance (PDE problems)
    #[arg(long, default_value_t = 1e-10)]
    pub pcg_tol: f64,
    /// Output file; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format (csv)
    #[arg(long, default_value = "csv")]
    pub format: String,
}

pub fn run(args: SolveArgs) -> Result<ExitCode, CliError> {
    if args.format != "csv" {
        return Err(format!("solve emits csv only, not `{}`", args.format).into());
    }
    let method = args.method.parse()?;
    let config = AaConfig::new(args.m, args.tol, args.max_iters, method);
    let pcg = PcgConfig {
        rel_tol: args.pcg_tol,
        max_iters: 200_000,
        preconditioner: Preconditioner::Jacobi,
    };

    let (result, header) = match args.problem.as_str() {
        "heat1" | "heat2" => {
            let term = if args.problem == "heat1" {
                HeatTerm::Term1
            } else {
                HeatTerm::Term2
            };
            let problem = HeatProblem::new(Grid2D::square(args.grid)?, term, pcg, args.shards)?;
            let x0 = DistVector::zeros(problem.layout());
            let header = format!(
                "# anderson solve problem={} method={} m={} tol={:e} max_iters={} grid={} shards={} pcg_tol={:e}",
                args.problem, method, args.m, args.tol, args.max_iters, args.grid, args.shards, args.pcg_tol
            );
            (run_problem(&problem, &config, &x0)?, header)
        }
        "bratu" => {
            let problem =
                BratuProblem::new(Grid2D::square(args.grid)?, args.lambda, pcg, args.shards)?;
            let x0 = DistVector::zeros(problem.layout());
            let header = format!(
                "# anderson solve problem=bratu method={} m={} tol={:e} max_iters={} grid={} lambda={} shards={} pcg_tol={:e}",
                method, args.m, args.tol, args.max_iters, args.grid, args.lambda, args.shards, args.pcg_tol
            );
            (run_problem(&problem, &config, &x0)?, header)
        }
        "em" => {
            let problem = MixtureProblem::new(
                [0.3, 0.3, 0.4],
                [1.0, 1.0, 1.0],
                [0.0, 0.5, 1.0],
                args.em_samples,
                args.em_length,
                args.shards,
                args.seed,
            )?;
            let x0 = problem.initial_guess();
            let header = format!(
                "# anderson solve problem=em method={} m={} tol={:e} max_iters={} samples={} length={} shards={} seed={}",
                method, args.m, args.tol, args.max_iters, args.em_samples, args.em_length, args.shards, args.seed
            );
            (run_problem(&problem, &config, &x0)?, header)
        }
        other => {
            return Err(format!(
                "unknown problem `{other}` (expected heat1|heat2|bratu|em)"
            )
            .into())
        }
    };

    let csv = render_csv(&header, &result);
    emit(args.out.as_deref(), &csv)?;
    Ok(if result.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn run_problem(
    problem: &dyn FixedPointProblem,
    config: &AaConfig,
    x0: &DistVector,
) -> Result<SolveResult, CliError> {
    let mut ledger = ReductionLedger::new();
    Ok(aa_solve(problem, config, x0, &mut ledger)?)
}

fn render_csv(header: &str, result: &SolveResult) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    out.push_str(
        "row,iteration,update_norm,window,qradd,qrdelete,lsp_rhs,norm_check,other,converged,diverged,x_min,x_max,x_mean\n",
    );
    for rec in &result.history {
        let _ = writeln!(
            out,
            "iter,{},{:e},{},{},{},{},{},{},,,,,",
            rec.iteration,
            rec.update_norm,
            rec.window,
            rec.ledger.count(Phase::QrAdd),
            rec.ledger.count(Phase::QrDelete),
            rec.ledger.count(Phase::LspRhs),
            rec.ledger.count(Phase::NormCheck),
            rec.ledger.count(Phase::Other),
        );
    }
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &v in result.x.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    let mean = sum / result.x.len() as f64;
    let last = result.history.last();
    let final_ledger = last.map(|r| r.ledger.clone()).unwrap_or_default();
    let _ = writeln!(
        out,
        "final,{},,,{},{},{},{},{},{},{},{:e},{:e},{:e}",
        result.iterations,
        final_ledger.count(Phase::QrAdd),
        final_ledger.count(Phase::QrDelete),
        final_ledger.count(Phase::LspRhs),
        final_ledger.count(Phase::NormCheck),
        final_ledger.count(Phase::Other),
        result.converged,
        result.diverged,
        lo,
        hi,
        mean,
    );
    out
}
