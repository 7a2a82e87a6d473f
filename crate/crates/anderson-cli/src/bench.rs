//! `anderson bench`: measured reduction counts for window fill and recycle
//! iterations, next to the analytic model's predictions.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;

use anderson::aa::measure_sync_profile;
use anderson::perf::{recycle_syncs, startup_syncs};
use anderson::qr::OrthMethod;

use crate::output::emit;
use crate::CliError;

#[derive(Args)]
pub struct BenchArgs {
    /// Phase to measure: startup | recycle | both
    #[arg(long, default_value = "both")]
    pub phase: String,
    /// Window depths (comma separated)
    #[arg(long, value_delimiter = ',', default_value = "2,5,10,15,20")]
    pub m: Vec<usize>,
    /// Vector length for the synthetic runs
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub shards: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: String,
}

pub fn run(args: BenchArgs) -> Result<ExitCode, CliError> {
    if args.format != "csv" {
        return Err(format!("bench emits csv only, not `{}`", args.format).into());
    }
    let (do_startup, do_recycle) = match args.phase.as_str() {
        "startup" => (true, false),
        "recycle" => (false, true),
        "both" => (true, true),
        other => return Err(format!("unknown phase `{other}` (startup|recycle|both)").into()),
    };

    let mut csv = String::new();
    let _ = writeln!(
        csv,
        "# anderson bench phase={} n={} shards={} seed={}",
        args.phase, args.n, args.shards, args.seed
    );
    csv.push_str("phase,method,m,n,shards,measured_qradd,measured_qrdelete,measured_total,model_syncs,match\n");

    for &m in &args.m {
        for method in OrthMethod::ALL {
            let profile = measure_sync_profile(method, m, args.n, args.shards, args.seed)?;
            if do_startup {
                let model = startup_syncs(method, m);
                let measured = profile.startup_total();
                let _ = writeln!(
                    csv,
                    "startup,{method},{m},{},{},{},{},{measured},{model},{}",
                    args.n,
                    args.shards,
                    profile.startup_qradd,
                    profile.startup_qrdelete,
                    measured == model
                );
            }
            if do_recycle && m >= 2 {
                let model = recycle_syncs(method, m, true);
                let measured = profile.recycle_total();
                let _ = writeln!(
                    csv,
                    "recycle,{method},{m},{},{},{},{},{measured},{model},{}",
                    args.n,
                    args.shards,
                    profile.recycle_qradd,
                    profile.recycle_qrdelete,
                    measured == model
                );
            }
        }
    }

    emit(args.out.as_deref(), &csv)?;
    Ok(ExitCode::SUCCESS)
}
