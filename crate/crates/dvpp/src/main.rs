use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dvpp::scenario::validate;
use dvpp::{bode, montecarlo, parse_scenario, run, verify, DvppError, Scenario};

#[derive(Parser)]
#[command(
    name = "dvpp",
    version,
    about = "Dynamic virtual power plant synthesis and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the scenario's events and write the selected channels.
    Run {
        file: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        tend: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check participation, DC-gain and aggregation conditions.
    Verify { file: PathBuf },
    /// Frequency responses of the specification, the aggregate and every factor.
    Bode {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        wmin: f64,
        #[arg(long, default_value_t = 1e3)]
        wmax: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the homogeneous design over sampled R/X plants.
    Montecarlo {
        file: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<Scenario, DvppError> {
    let text = fs::read_to_string(path)?;
    Ok(parse_scenario(&text)?)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), DvppError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn execute(cli: Cli) -> Result<bool, DvppError> {
    match cli.command {
        Command::Run { file, dt, tend, out } => {
            let mut sc = load(&file)?;
            if let Some(dt) = dt {
                sc.system.dt = dt;
            }
            if let Some(t) = tend {
                sc.system.t_end = t;
            }
            validate(&sc).map_err(|e| DvppError::Scenario(e.into()))?;
            let res = run(&sc)?;
            let ts = res.selected(&sc.outputs)?;
            match out {
                Some(dir) => {
                    write(&dir, "timeseries.csv", &ts.to_csv())?;
                    write(&dir, "metrics.txt", &res.report.to_string())?;
                }
                None => print!("{}", ts.to_csv()),
            }
            eprint!("{}", res.report);
            Ok(res.report.passed())
        }
        Command::Verify { file } => {
            let report = verify(&load(&file)?)?;
            print!("{}", report.conditions());
            Ok(report.passed())
        }
        Command::Bode {
            file,
            wmin,
            wmax,
            points,
            out,
        } => {
            let csv = bode(&load(&file)?, wmin, wmax, points)?;
            match out {
                Some(dir) => write(&dir, "bode.csv", &csv)?,
                None => print!("{csv}"),
            }
            Ok(true)
        }
        Command::Montecarlo {
            file,
            samples,
            seed,
            out,
        } => {
            let res = montecarlo(&load(&file)?, samples, seed)?;
            let summary = res.summary_csv();
            match out {
                Some(dir) => {
                    write(&dir, "summary.csv", &summary)?;
                    write(&dir, "baseline.csv", &res.baseline.to_csv())?;
                    for s in &res.samples {
                        write(&dir, &format!("sample_{:03}.csv", s.index), &s.series.to_csv())?;
                    }
                }
                None => print!("{summary}"),
            }
            Ok(res.samples.iter().all(|s| s.stable))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
