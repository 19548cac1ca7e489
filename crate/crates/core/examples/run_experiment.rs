//! Runs an experiment file end to end and summarises the written reports.
//!
//! ```text
//! cargo run --release --example run_experiment [experiment.json] [out-dir]
//! ```

use std::path::PathBuf;

use netslice::orchestrator::{load_config, run_experiment, violation_cdf, write_cdf_csv};

fn main() -> netslice::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/two_slice_baseline.json")));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("netslice-runs"));

    let mut config = load_config(&path)?;
    if config.iterations.is_none() {
        config.iterations = Some(20);
    }
    let cells = run_experiment(&config, &out)?;
    let reports: Vec<PathBuf> = cells.iter().map(|c| c.dir.join("report.csv")).collect();
    for cell in &cells {
        let last = cell.report.rows.last();
        println!(
            "{:<28} final violation rate {:.3}, lambda {:.3}",
            cell.dir.display(),
            last.map_or(0.0, |r| r.violation_rate),
            last.map_or(0.0, |r| r.lambda)
        );
    }
    let tables = violation_cdf(&reports)?;
    write_cdf_csv(&out.join("violation_cdf.csv"), &tables)?;
    println!("wrote {}", out.join("violation_cdf.csv").display());
    Ok(())
}
