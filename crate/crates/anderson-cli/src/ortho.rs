//! `anderson ortho`: loss-of-orthogonality sweep over condition numbers.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Args;

use anderson::qr::{
    loss_of_orthogonality, make_ortho_test_matrix, OrthMethod, OrthoTestMatrix, QrFactorization,
};
use anderson::vector::{ReductionLedger, ShardLayout};

use crate::output::emit;
use crate::CliError;

#[derive(Args)]
pub struct OrthoArgs {
    /// Test matrix rows
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Test matrix columns (window size)
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    #[arg(long, default_value_t = 4)]
    pub shards: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: String,
}

pub fn run(args: OrthoArgs) -> Result<ExitCode, CliError> {
    if args.format != "csv" {
        return Err(format!("ortho emits csv only, not `{}`", args.format).into());
    }
    let layout = Arc::new(ShardLayout::new(args.n, args.shards)?);
    let mut csv = String::new();
    let _ = writeln!(
        csv,
        "# anderson ortho n={} m={} shards={} seed={}",
        args.n, args.m, args.shards, args.seed
    );
    csv.push_str("kappa,method,n,m,loss_of_orthogonality,loo_over_eps\n");

    for &kappa in &[1e1, 1e3, 1e6, 1e9] {
        let spec = OrthoTestMatrix::new(args.n, args.m, kappa);
        let cols = make_ortho_test_matrix(&spec, &layout, args.seed)?;
        for method in OrthMethod::ALL {
            let mut fac = QrFactorization::new(&layout, args.m, method);
            let mut ledger = ReductionLedger::new();
            for col in &cols {
                fac.qradd(col.clone(), &mut ledger)?;
            }
            let loo = loss_of_orthogonality(fac.columns());
            let _ = writeln!(
                csv,
                "{kappa:e},{method},{},{},{loo:e},{:e}",
                args.n,
                args.m,
                loo / spec.eps
            );
        }
    }

    emit(args.out.as_deref(), &csv)?;
    Ok(ExitCode::SUCCESS)
}
