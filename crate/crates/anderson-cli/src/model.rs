//! `anderson model`: tabulate predicted times and crossover depths, with an
//! optional SVG plot of time versus shard count.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;

use anderson::perf::{crossover_m, predict_time, recycle_syncs, startup_syncs, CostParams, IterPhase};
use anderson::qr::OrthMethod;

use crate::output::{emit, line_plot, Series};
use crate::CliError;

#[derive(Args)]
pub struct ModelArgs {
    /// Phase to price: startup | recycle | both
    #[arg(long, default_value = "both")]
    pub phase: String,
    /// Window depths (comma separated)
    #[arg(long, value_delimiter = ',', default_value = "2,5,10,15,20")]
    pub m: Vec<usize>,
    /// Shard counts (comma separated)
    #[arg(long, value_delimiter = ',', default_value = "1,4,16,64,256,1024,4096")]
    pub shards: Vec<usize>,
    /// Global vector length
    #[arg(long, default_value_t = 1_048_576)]
    pub n: usize,
    /// Per-shard arithmetic throughput, flops/s
    #[arg(long, default_value_t = 1e9)]
    pub flop_rate: f64,
    /// Reduction latency intercept, seconds
    #[arg(long, default_value_t = 10e-6)]
    pub latency_base: f64,
    /// Reduction latency slope per log2(p), seconds
    #[arg(long, default_value_t = 5e-6)]
    pub latency_log2: f64,
    /// Window depth used for the SVG plot
    #[arg(long, default_value_t = 10)]
    pub plot_m: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv for the table, svg for the plot
    #[arg(long, default_value = "csv")]
    pub format: String,
}

pub fn run(args: ModelArgs) -> Result<ExitCode, CliError> {
    let phases: Vec<IterPhase> = match args.phase.as_str() {
        "startup" => vec![IterPhase::Startup],
        "recycle" => vec![IterPhase::Recycle],
        "both" => vec![IterPhase::Startup, IterPhase::Recycle],
        other => return Err(format!("unknown phase `{other}` (startup|recycle|both)").into()),
    };
    let params = CostParams {
        latency_base: args.latency_base,
        latency_log2: args.latency_log2,
        flop_rate: args.flop_rate,
        n: args.n,
    };

    match args.format.as_str() {
        "csv" => {
            let csv = render_table(&args, &params, &phases);
            emit(args.out.as_deref(), &csv)?;
        }
        "svg" => {
            let svg = render_plot(&args, &params, phases[0]);
            emit(args.out.as_deref(), &svg)?;
        }
        other => return Err(format!("unknown format `{other}` (csv|svg)").into()),
    }
    Ok(ExitCode::SUCCESS)
}

fn render_table(args: &ModelArgs, params: &CostParams, phases: &[IterPhase]) -> String {
    let mut csv = String::new();
    let _ = writeln!(
        csv,
        "# anderson model n={} flop_rate={:e} latency_base={:e} latency_log2={:e}",
        args.n, args.flop_rate, args.latency_base, args.latency_log2
    );
    csv.push_str("kind,phase,method,m,shards,syncs,predicted_seconds,crossover_vs_mgs\n");
    for &phase in phases {
        for &m in &args.m {
            if phase == IterPhase::Recycle && m < 2 {
                continue;
            }
            for method in OrthMethod::ALL {
                let syncs = match phase {
                    IterPhase::Startup => startup_syncs(method, m),
                    IterPhase::Recycle => recycle_syncs(method, m, false),
                };
                for &p in &args.shards {
                    let t = predict_time(params, p, method, m, phase);
                    let _ = writeln!(
                        csv,
                        "time,{},{method},{m},{p},{syncs},{t:e},",
                        phase.name()
                    );
                }
            }
        }
        for method in [OrthMethod::Icwy, OrthMethod::Cgs2, OrthMethod::Dcgs2] {
            let p = *args.shards.last().unwrap_or(&1024);
            let cross = crossover_m(params, p, method, OrthMethod::Mgs, phase);
            let cross = cross.map_or(String::new(), |m| m.to_string());
            let _ = writeln!(csv, "crossover,{},{method},,{p},,,{cross}", phase.name());
        }
    }
    csv
}

fn render_plot(args: &ModelArgs, params: &CostParams, phase: IterPhase) -> String {
    let series: Vec<Series> = OrthMethod::ALL
        .iter()
        .map(|&method| Series {
            label: method.name().to_string(),
            points: args
                .shards
                .iter()
                .map(|&p| {
                    let t = predict_time(params, p, method, args.plot_m, phase);
                    ((p as f64).log2(), t.log10())
                })
                .collect(),
        })
        .collect();
    line_plot(
        &format!(
            "predicted {} time, m = {}, n = {}",
            phase.name(),
            args.plot_m,
            args.n
        ),
        "log2(shards)",
        "log10(seconds)",
        &series,
    )
}
