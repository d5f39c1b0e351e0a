use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ahumpc::dataset::{read_samples, SplitDataset};
use ahumpc::fos::{extract_params, FosParams, DEFAULT_DELAY_MIN};
use ahumpc::mapper::{actuate, ProtectionPolicy, TargetForm, DEFAULT_EPSILON};
use ahumpc::plant::ActuatorMode;
use ahumpc::report;
use ahumpc::routine::{self, DATASETS_DIR};
use ahumpc::scenario::ScenarioConfig;
use ahumpc::surrogate::{train, TrainConfig};
use ahumpc::telemetry::ControllerKind;
use ahumpc::Direction;

#[derive(Parser)]
#[command(
    name = "ahumpc",
    version,
    about = "Learned thermal models and MPC for a central air handling unit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ControllerArg {
    Mpc,
    Manual,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Increasing,
    Decreasing,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Increasing => Direction::Increasing,
            DirectionArg::Decreasing => Direction::Decreasing,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end and write its stores and reports.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the scenario's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        controller: Option<ControllerArg>,
        #[arg(long)]
        days: Option<u32>,
        /// Also write the final training window's datasets.
        #[arg(long)]
        export_datasets: bool,
    },
    /// Train surrogate models offline on exported datasets.
    Train {
        /// Directory holding `<direction>_{train,val,test}.jsonl`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Scenario whose `[surrogate]` section configures training.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Train one direction only.
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
    },
    /// Fit a first-order model to a `minute,temperature` CSV curve.
    ExtractFos {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        #[arg(long, default_value_t = DEFAULT_DELAY_MIN)]
        delay: f64,
    },
    /// Map one fractional action to an ON duration.
    Map {
        #[arg(long)]
        u: f64,
        #[arg(long)]
        kp_inc: f64,
        #[arg(long)]
        tau_inc: f64,
        #[arg(long)]
        kp_dec: f64,
        #[arg(long)]
        tau_dec: f64,
        #[arg(long)]
        t_init: f64,
        #[arg(long, default_value_t = DEFAULT_DELAY_MIN)]
        delay: f64,
        #[arg(long, default_value_t = 30.0)]
        sampling: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        /// Motor protection threshold, minutes.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        analog: bool,
        /// Read the curves as absolute plateaus instead of shifting them to
        /// start at `--t-init`.
        #[arg(long)]
        from_state: bool,
        /// Temperature the curves were fitted from; defaults to `--t-init`.
        #[arg(long)]
        fit_temp: Option<f64>,
    },
    /// Compare two run directories' energy use.
    Compare {
        /// The controller under evaluation, usually the MPC run.
        #[arg(long)]
        candidate: PathBuf,
        /// The reference, usually the clock-controlled run.
        #[arg(long)]
        baseline: PathBuf,
        /// Directory for `comparison.txt`, `comparison.csv` and `comparison.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export CSV series and text tables of one run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
        /// Defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            scenario,
            seed,
            out,
            controller,
            days,
            export_datasets,
        } => simulate(&scenario, seed, out, controller, days, export_datasets),
        Command::Train {
            data,
            out,
            scenario,
            seed,
            direction,
        } => train_offline(&data, &out, scenario.as_deref(), seed, direction),
        Command::ExtractFos {
            curve,
            direction,
            delay,
        } => {
            let trace = report::read_curve_csv(&curve)?;
            let p = extract_params(&trace, direction.into(), delay)
                .with_context(|| format!("fitting {}", curve.display()))?;
            println!("{}", serde_json::to_string_pretty(&p)?);
            Ok(())
        }
        Command::Map {
            u,
            kp_inc,
            tau_inc,
            kp_dec,
            tau_dec,
            t_init,
            delay,
            sampling,
            epsilon,
            threshold,
            analog,
            from_state,
            fit_temp,
        } => {
            if !(0.0..=1.0).contains(&u) {
                bail!("--u must lie in [0, 1], got {u}");
            }
            let fit = fit_temp.unwrap_or(t_init);
            let inc = FosParams::new(kp_inc, tau_inc, delay, fit)?;
            let dec = FosParams::new(kp_dec, tau_dec, delay, fit)?;
            let policy = ProtectionPolicy { threshold };
            policy.validate(sampling)?;
            let mode = if analog {
                ActuatorMode::Analog
            } else {
                ActuatorMode::Binary
            };
            let form = if from_state {
                TargetForm::State
            } else {
                TargetForm::Rest
            };
            let a = actuate(u, mode, &inc, &dec, t_init, sampling, epsilon, policy, form)?;
            println!("{}", serde_json::to_string_pretty(&a)?);
            Ok(())
        }
        Command::Compare {
            candidate,
            baseline,
            out,
        } => {
            let r = report::compare(&candidate, &baseline)?;
            let text = report::format_energy_report(&r);
            print!("{text}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                std::fs::write(dir.join("comparison.txt"), &text)?;
                std::fs::write(dir.join("comparison.json"), serde_json::to_string_pretty(&r)? + "\n")?;
                report::write_comparison_csv(&dir.join("comparison.csv"), &r)?;
            }
            Ok(())
        }
        Command::Report { run, out } => {
            let out = out.unwrap_or_else(|| run.clone());
            for p in report::export_run(&run, &out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn simulate(
    path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    controller: Option<ControllerArg>,
    days: Option<u32>,
    export_datasets: bool,
) -> Result<()> {
    let mut cfg = ScenarioConfig::load(path).with_context(|| format!("loading scenario {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(c) = controller {
        cfg.controller = match c {
            ControllerArg::Mpc => ControllerKind::Mpc,
            ControllerArg::Manual => ControllerKind::Manual,
        };
    }
    if let Some(d) = days {
        cfg.days = d;
    }
    cfg.validate()?;
    let out = match out.or_else(|| cfg.output_dir.clone()) {
        Some(o) => o,
        None => bail!("no output directory: pass --out or set output_dir in the scenario"),
    };
    let summary = routine::run(&cfg, &out, export_datasets)?;
    let e = &summary.energy;
    println!(
        "{} run: {} days, {:.2} h on, {:.2} kWh",
        cfg.controller.as_str(),
        cfg.days,
        e.on_hours,
        e.kwh
    );
    if let Some(t) = e.tracking {
        println!("occupied-hour mean |AIT - setpoint|: {:.3} C", t.mean_abs_error);
    }
    if summary.ait_gaps + summary.solver_failures + summary.inexact_maps > 0 {
        println!(
            "AIT gaps {}, solver caps {}, inexact mappings {}",
            summary.ait_gaps, summary.solver_failures, summary.inexact_maps
        );
    }
    println!("outputs in {}", out.display());
    Ok(())
}

fn load_split(dir: &Path, direction: Direction) -> Result<SplitDataset> {
    let read = |split: &str| {
        let p = dir.join(format!("{}_{split}.jsonl", direction.as_str()));
        read_samples(&p).with_context(|| format!("reading {}", p.display()))
    };
    Ok(SplitDataset {
        train: read("train")?,
        val: read("val")?,
        test: read("test")?,
    })
}

fn train_offline(
    data: &Path,
    out: &Path,
    scenario: Option<&Path>,
    seed: u64,
    direction: Option<DirectionArg>,
) -> Result<()> {
    let config = match scenario {
        Some(p) => ScenarioConfig::load(p)?.surrogate,
        None => TrainConfig::default(),
    };
    // Accept either the datasets directory or a run directory containing it.
    let data = if data.join(DATASETS_DIR).is_dir() {
        data.join(DATASETS_DIR)
    } else {
        data.to_path_buf()
    };
    let directions = match direction {
        Some(d) => vec![d.into()],
        None => vec![Direction::Increasing, Direction::Decreasing],
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let (mut inc, mut dec) = (None, None);
    for d in directions {
        let split = load_split(&data, d)?;
        let (model, metrics) = train(&split, d, &config, seed, None)?;
        let path = out.join(format!("{}.json", d.as_str()));
        model.save(&path)?;
        println!("{} -> {}", d.as_str(), path.display());
        match d {
            Direction::Increasing => inc = Some(metrics),
            Direction::Decreasing => dec = Some(metrics),
        }
    }
    let table = report::format_metrics_rows(&[("offline".to_string(), inc.as_ref(), dec.as_ref())]);
    print!("{table}");
    std::fs::write(out.join("metrics.txt"), table)?;
    Ok(())
}
