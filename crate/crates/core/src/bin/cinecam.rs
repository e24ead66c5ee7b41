use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use cinecam_core::harness::{bench_csv, benchmark_with, run_scenario, write_report, BenchSweep, World};
use cinecam_core::{Error, Result, Scenario};

/// Multi-camera aerial cinematography planner.
#[derive(Parser)]
#[command(name = "cinecam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Cap on worker threads used for table building and smoothing.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the run report.
    Run {
        scenario: PathBuf,
        /// Report directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the scenario's run.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Plan once at t = 0 and write the plan with per-term costs.
    Plan {
        scenario: PathBuf,
        #[arg(long, default_value = "plan.json")]
        out: PathBuf,
    },
    /// Time the greedy planner over a sweep of lattices.
    Bench {
        /// Sweep file; the default sweep covers the eight reference lattices.
        sweep: Option<PathBuf>,
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
        /// Override the sweep's world seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a reference scenario listing every option with its default.
    Init {
        #[arg(long, default_value = "scenario.json")]
        out: PathBuf,
    },
}

fn defaults_help() -> String {
    format!(
        "Units are metres, seconds and radians; angle keys ending in _deg take degrees.\n\
         Defaults (as written by `cinecam init`):\n{}\n\n\
         Exit codes: 0 success, 1 I/O error, 2 configuration error, 3 numeric error, 4 size limit.",
        Scenario::reference().to_json()
    )
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
    }
    std::fs::write(path, body).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn execute(cli: Cli) -> Result<()> {
    let say = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    match cli.command {
        Command::Run { scenario, out, seed } => {
            let mut s = Scenario::load(&scenario)?;
            if let Some(seed) = seed {
                s.run.seed = seed;
            }
            let report = run_scenario(&s)?;
            write_report(&report, &out)?;
            say(format!(
                "{} cycles, planning {:.3} ± {:.3} ms, min clearance {:.3} m, min separation {:.3} m; report in {}",
                report.cycles.len(),
                report.timing.mean_ms,
                report.timing.std_ms,
                report.audit.min_clearance,
                report.audit.min_separation,
                out.display()
            ));
        }
        Command::Plan { scenario, out } => {
            let s = Scenario::load(&scenario)?;
            let world = World::build(&s)?;
            let (plan, _) = world.plan(&s.uav_positions(), 0.0)?;
            let dump = plan.dump(&world.lattice, 0.0);
            write_file(&out, &serde_json::to_string_pretty(&dump).expect("plan serializes"))?;
            say(format!("total cost {:.6}; plan in {}", plan.total_cost(), out.display()));
        }
        Command::Bench { sweep, out, seed } => {
            let mut sw = match &sweep {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                        path: path.display().to_string(),
                        source: e,
                    })?;
                    BenchSweep::from_json(&text, &path.display().to_string())?
                }
                None => BenchSweep::default(),
            };
            if let Some(seed) = seed {
                sw.seed = seed;
            }
            let rows = benchmark_with(&sw, |r| {
                say(format!(
                    "{:?} T={} n={}: {} computed states, {:.3} ± {:.3} ms",
                    r.state_space, r.horizon_steps, r.n_uavs, r.computed_states, r.mean_ms, r.std_ms
                ))
            })?;
            write_file(&out, &bench_csv(&rows))?;
        }
        Command::Init { out } => {
            write_file(&out, &Scenario::reference().to_json())?;
            say(format!("reference scenario in {}", out.display()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = Cli::command().after_long_help(defaults_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
