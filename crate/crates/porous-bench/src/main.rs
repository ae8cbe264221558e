use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use porous_bench::config::read_json;
use porous_bench::{compare, gen_geometry, load_summaries, render, run, write_table};
use porous_bench::{GeometrySource, Scenario, ScenarioConfig, SolverList};

#[derive(Parser)]
#[command(name = "porous-bench", version, about = "Stokes flow through porous channels: scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Packs random pores into a channel and writes the geometry file.
    GenGeometry {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solves a scenario with every solver entry and writes the results.
    Run {
        #[arg(long)]
        geometry: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        solver: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulates the summaries found in the given run directories.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// CSV output path.
        #[arg(long, default_value = "table.csv")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenGeometry { spec, seed, out } => {
            read_json(&spec).and_then(|spec| gen_geometry(&spec, seed, &out))
        }
        Command::Run { geometry, scenario, solver, out } => (|| {
            let scenario: Scenario = read_json(&scenario)?;
            let solvers: SolverList = read_json(&solver)?;
            let cfg = ScenarioConfig {
                geometry: GeometrySource::File(geometry),
                scenario,
                solvers: solvers.into_vec(),
                out_dir: out,
            };
            let summary = run(&cfg)?;
            let rows = compare(&[(summary.label.clone().unwrap_or_else(|| "run".into()), summary)])?;
            print!("{}", render(&rows));
            Ok(())
        })(),
        Command::Compare { dirs, out } => (|| {
            let rows = compare(&load_summaries(&dirs)?)?;
            print!("{}", render(&rows));
            write_table(&out, &rows)
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
