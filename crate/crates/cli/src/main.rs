//! Command-line harness: train, evaluate, compare, estimate-rates,
//! fit-levels.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 runtime contract
//! violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::{rand_core::SeedableRng, ChaCha12Rng};
use serde::Serialize;

use ev_station::error::Error;
use ev_station::exogenous::{fit_levels, load_hourly_series, HourlySeries, SeriesUnit};
use ev_station::harness::{
    compare, derive_seeds, estimate_arrival_rates, evaluate_policy, train_run, ExperimentConfig,
};
use ev_station::learner::QTable;
use ev_station::policies::PolicyKind;

#[derive(Parser)]
#[command(
    name = "ev-station",
    about = "EV charging station revenue simulator and Q-learning controller",
    version
)]
struct Cli {
    /// Experiment configuration (TOML). Built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configuration's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyName {
    Random,
    Myopic,
    Learned,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum UnitName {
    /// Kilowatt-hours (renewable generation data).
    Kwh,
    /// Euro per kilowatt-hour (grid price data).
    EurPerKwh,
}

#[derive(Subcommand)]
enum Command {
    /// Train the controller; writes qtable.evq and train_trace.csv.
    Train,
    /// Evaluate one policy over the configured evaluation days; writes
    /// incomes.csv. Uses the same derived seeds as `compare`, so incomes
    /// match the corresponding `compare` column.
    Evaluate {
        #[arg(long)]
        policy: PolicyName,
        /// Q-table snapshot (required for --policy learned).
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Train, then evaluate learned/random/myopic on paired realizations;
    /// writes report.json, incomes.csv and qtable.evq.
    Compare,
    /// Estimate hourly arrival rates from an arrival log CSV with header
    /// `day,hour` (one row per arrival); writes rates.json.
    EstimateRates {
        #[arg(long)]
        log: PathBuf,
    },
    /// Fit discretization levels to a `day,hour,value` CSV; writes
    /// levels.json.
    FitLevels {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        unit: UnitName,
        #[arg(long, default_value_t = 2)]
        levels: usize,
        /// Convert values to SOC-point units (per this battery capacity in
        /// kWh) before fitting, matching the experiment pipeline.
        #[arg(long)]
        battery_capacity_kwh: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Parse { .. } | Error::Data(_) | Error::Io(_) => 3,
        Error::Domain(_) | Error::Contract(_) => 4,
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn write_artifact(out_dir: &Path, name: &str, content: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(name);
    std::fs::write(&path, content)?;
    Ok(path)
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Train => {
            let config = load_config(&cli)?;
            let outcome = train_run(&config)?;
            let table_path = write_artifact(&cli.out, "qtable.evq", &outcome.table.to_snapshot())?;
            let mut trace = String::from("episode,income_eur\n");
            for (i, income) in outcome.episode_incomes.iter().enumerate() {
                trace.push_str(&format!("{i},{income}\n"));
            }
            let trace_path = write_artifact(&cli.out, "train_trace.csv", &trace)?;
            println!(
                "trained {} episodes, {} state-action pairs stored",
                outcome.episode_incomes.len(),
                outcome.table.len()
            );
            println!(
                "wrote {} and {}",
                table_path.display(),
                trace_path.display()
            );
            Ok(())
        }
        Command::Evaluate { policy, table } => {
            let config = load_config(&cli)?;
            let policy = match policy {
                PolicyName::Random => PolicyKind::Random,
                PolicyName::Myopic => PolicyKind::Myopic,
                PolicyName::Learned => {
                    let path = table.as_ref().ok_or_else(|| {
                        Error::config("--policy learned requires --table <snapshot>".to_string())
                    })?;
                    PolicyKind::Learned(QTable::load(path)?)
                }
            };
            let seeds = derive_seeds(config.master_seed);
            let setup = ev_station::harness::build_exogenous(&config)?;
            let eval_obs =
                &setup.schedule[config.training.days * 24..][..config.evaluation.days * 24];
            let mut arrivals_rng = ChaCha12Rng::seed_from_u64(seeds.eval_arrivals);
            let plan = ev_station::harness::arrival_plan(
                &config.customers,
                config.station.ttl_max,
                config.evaluation.days * 24,
                &mut arrivals_rng,
            )?;
            let decision_seed = match policy {
                PolicyKind::Random => seeds.decide_random,
                PolicyKind::Myopic => seeds.decide_myopic,
                PolicyKind::Learned(_) => seeds.decide_learned,
            };
            let mut rng = ChaCha12Rng::seed_from_u64(decision_seed);
            let daily = evaluate_policy(&config.station, &policy, eval_obs, &plan, &mut rng)?;
            let mut csv = String::from("day,policy,income_eur\n");
            for (day, income) in daily.iter().enumerate() {
                csv.push_str(&format!("{day},{},{income}\n", policy.name()));
            }
            let path = write_artifact(&cli.out, "incomes.csv", &csv)?;
            println!(
                "{} policy: total income {:.4} EUR over {} days",
                policy.name(),
                daily.iter().sum::<f64>(),
                daily.len()
            );
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Compare => {
            let config = load_config(&cli)?;
            let outcome = compare(&config)?;
            let report_path = write_artifact(&cli.out, "report.json", &outcome.report.to_json()?)?;
            let csv_path = write_artifact(&cli.out, "incomes.csv", &outcome.report.incomes_csv())?;
            let table_path = write_artifact(&cli.out, "qtable.evq", &outcome.table.to_snapshot())?;
            for (name, income) in &outcome.report.policies {
                println!("{name:>8}: {:.4} EUR", income.total);
            }
            match outcome.report.uplift_learned_vs_random {
                Some(uplift) => println!("uplift learned/random: {uplift:.4}"),
                None => println!("uplift learned/random: undefined (random total <= 0)"),
            }
            println!(
                "wrote {}, {} and {}",
                report_path.display(),
                csv_path.display(),
                table_path.display()
            );
            Ok(())
        }
        Command::EstimateRates { log } => {
            let events = read_arrival_log(log)?;
            let rates = estimate_arrival_rates(&events)?;
            #[derive(Serialize)]
            struct Rates {
                lambda: Vec<f64>,
            }
            let json = serde_json::to_string_pretty(&Rates {
                lambda: rates.to_vec(),
            })
            .expect("rates serialize");
            let path = write_artifact(&cli.out, "rates.json", &json)?;
            println!("{json}");
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::FitLevels {
            input,
            unit,
            levels,
            battery_capacity_kwh,
        } => {
            let unit = match unit {
                UnitName::Kwh => SeriesUnit::KilowattHours,
                UnitName::EurPerKwh => SeriesUnit::EurPerKilowattHour,
            };
            let mut series: HourlySeries = load_hourly_series(input, unit)?;
            if let Some(capacity) = battery_capacity_kwh {
                series = series.to_soc_units(*capacity)?;
            }
            let codec = fit_levels(&series, *levels)
                .map_err(|e| Error::data(format!("cannot fit levels: {e}")))?;
            #[derive(Serialize)]
            struct Levels<'a> {
                unit: SeriesUnit,
                thresholds: &'a [f64],
                level_values: &'a [f64],
            }
            let json = serde_json::to_string_pretty(&Levels {
                unit: series.unit(),
                thresholds: codec.thresholds(),
                level_values: codec.level_values(),
            })
            .expect("levels serialize");
            let path = write_artifact(&cli.out, "levels.json", &json)?;
            println!("{json}");
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn read_arrival_log(path: &Path) -> Result<Vec<(u32, u8)>, Error> {
    #[derive(serde::Deserialize)]
    struct LogRow {
        day: u32,
        hour: u8,
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(1, format!("cannot open {}: {e}", path.display())))?;
    let mut events = Vec::new();
    for (i, record) in reader.deserialize::<LogRow>().enumerate() {
        let row = record.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        events.push((row.day, row.hour));
    }
    Ok(events)
}
