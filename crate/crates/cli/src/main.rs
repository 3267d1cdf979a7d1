//! `pfc-sim`: command-line front end for the power-factor correction simulator.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 runtime range error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pfc_core::bank::{size_binary_bank, Connection};
use pfc_core::{report, sim, Error, Execution, Mode, ScenarioConfig, SupplySpec};

/// Directory used for output files when `--out` is not given.
const OUT_DIR_ENV: &str = "PFC_SIM_OUT_DIR";

#[derive(Parser)]
#[command(name = "pfc-sim", version, about = "PLC-driven power-factor correction simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write one CSV row per scan.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write relay switching events.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Tabulate operating points over a range of load currents.
    Sweep {
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long)]
        compensate: bool,
        #[arg(long, default_value = "greedy", conflicts_with = "scenario")]
        mode: Mode,
        /// Base scenario supplying supply, motor, bank and controller settings.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Dump voltage/current waveforms with comparator and XOR outputs.
    Waveforms {
        #[arg(long)]
        current: f64,
        #[arg(long, default_value_t = 20_000.0)]
        fs: f64,
        #[arg(long, default_value_t = 2)]
        cycles: usize,
        #[arg(long)]
        compensated: bool,
        #[arg(long, default_value = "greedy", conflicts_with = "scenario")]
        mode: Mode,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Size a binary-weighted capacitor bank.
    SizeBank {
        #[arg(long)]
        qmax: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value = "star")]
        connection: Connection,
        #[arg(long, default_value_t = 400.0)]
        voltage: f64,
        #[arg(long, default_value_t = 50.0)]
        frequency: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Sim(Error),
    Io(String),
    PartialSweep(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Sim(e)
    }
}

fn emit(text: &str, out: Option<&Path>, default_name: &str) -> Result<(), Failure> {
    let target = match out {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(OUT_DIR_ENV).map(|dir| PathBuf::from(dir).join(default_name)),
    };
    match target {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Failure::Io(format!("{}: {e}", parent.display())))?;
            }
            std::fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn base_config(scenario: Option<&Path>, mode: Mode) -> Result<ScenarioConfig, Failure> {
    match scenario {
        Some(path) => Ok(ScenarioConfig::from_path(path)?),
        None => Ok(ScenarioConfig::for_mode(mode)),
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { scenario, out, events } => {
            let cfg = ScenarioConfig::from_path(&scenario)?;
            let trace = sim::run_scenario(&cfg)?;
            let stem = scenario.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            emit(&report::records_csv(&trace.records), out.as_deref(), &format!("{stem}.csv"))?;
            if let Some(path) = events {
                emit(&report::events_csv(&trace.events), Some(&path), "")?;
            }
            Ok(())
        }
        Command::Sweep {
            from,
            to,
            step,
            compensate,
            mode,
            scenario,
            out,
            sequential,
        } => {
            let base = base_config(scenario.as_deref(), mode)?;
            base.validate()?;
            let currents = sim::current_range(from, to, step);
            let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
            let rows = sim::sweep(&currents, compensate, &base, exec);
            emit(&report::sweep_csv(&currents, &rows), out.as_deref(), "sweep.csv")?;
            let failed = rows.iter().filter(|r| r.is_err()).count();
            if failed > 0 {
                return Err(Failure::PartialSweep(failed));
            }
            Ok(())
        }
        Command::Waveforms {
            current,
            fs,
            cycles,
            compensated,
            mode,
            scenario,
            out,
        } => {
            let cfg = base_config(scenario.as_deref(), mode)?;
            cfg.validate()?;
            let w = sim::dump_waveforms(current, fs, cycles, compensated, &cfg)?;
            let name = format!("waveforms_{}A{}.csv", report::fmt_sig(current), if compensated { "_corrected" } else { "" });
            emit(&report::waveforms_csv(&w), out.as_deref(), &name)
        }
        Command::SizeBank {
            qmax,
            steps,
            connection,
            voltage,
            frequency,
            out,
        } => {
            let supply = SupplySpec::new(voltage, frequency)
                .map_err(|e| Error::Validation { path: "supply".into(), message: e.to_string() })?;
            let units = size_binary_bank(qmax, steps, &supply, connection)
                .map_err(|e| Error::Validation { path: "size-bank".into(), message: e.to_string() })?;
            emit(&report::bank_csv(&units, &supply), out.as_deref(), "bank.csv")
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Sim(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_runtime() { 3 } else { 2 })
        }
        Err(Failure::PartialSweep(n)) => {
            eprintln!("error: {n} sweep row(s) failed; see the error column");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
