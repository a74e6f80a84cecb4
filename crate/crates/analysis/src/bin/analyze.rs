use std::path::PathBuf;

use anyhow::Context;
use bodyprompt_analysis::{build_report, load_records, read_ratings};
use clap::Parser;

/// Tabulates coded session records and computes agreement and correlations.
#[derive(Debug, Parser)]
#[command(name = "analyze")]
struct Args {
    /// Session records CSV.
    #[arg(long)]
    records: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Add a permutation p-value to every correlation.
    #[arg(long)]
    permutation_p: bool,
    /// Seed for the permutation resampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    /// Optional long-format ratings CSV (variable,subject,rater,category).
    #[arg(long)]
    ratings: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let records = load_records(&args.records).with_context(|| format!("reading {}", args.records.display()))?;
    let ratings = match &args.ratings {
        Some(p) => read_ratings(std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?)
            .with_context(|| format!("reading {}", p.display()))?,
        None => Vec::new(),
    };
    let report = build_report(&records, &ratings, args.permutation_p.then_some((args.resamples, args.seed)));
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", args.out.display()))?;

    println!("{} records", report.tabulation.n);
    for row in &report.tabulation.context_table {
        println!("  {} {:>3}  {:?} {:?} {:?}", row.code, row.participants, row.booth, row.strategy, row.participation);
    }
    for a in &report.agreement {
        match (a.kappa, a.reference_kappa) {
            (Some(k), Some(r)) => println!("kappa {:<18} {k:.3} (reference {r:.2})", a.variable),
            (Some(k), None) => println!("kappa {:<18} {k:.3}", a.variable),
            _ => println!("kappa {:<18} n/a: {}", a.variable, a.error.as_deref().unwrap_or("")),
        }
    }
    for c in report.correlations.iter().filter(|c| c.significant) {
        let r = c.result.as_ref().expect("significant pairs have a result");
        println!("rho({}, {}) = {:.3}, p = {:.4}", c.trait_name, c.choice, r.rho, r.p_value);
    }
    println!("report written to {}", args.out.display());
    Ok(())
}
