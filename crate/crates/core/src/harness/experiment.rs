//! Experiment orchestration: deterministic seed derivation, exogenous data
//! assembly, rate estimation, paired evaluation, and the train/compare
//! entry points behind the CLI.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::domain::{ExogenousObservation, StationState, Vehicle};
use crate::env::{
    enumerate_actions, sample_arrival_count, sample_vehicle, step_with_arrivals, CustomerModel,
    EnvConfig,
};
use crate::error::{Error, Result};
use crate::exogenous::{
    encode_observation, eur_per_kwh_to_eur_per_point, fit_levels_from_values, kwh_to_points,
    load_hourly_series, normalize_wind, solar_profile, synthetic_price, synthetic_wind, LevelCodec,
    SeriesUnit,
};
use crate::harness::config::ExperimentConfig;
use crate::harness::report::{PolicyIncome, RunReport};
use crate::learner::{train, QTable, TrainOutcome};
use crate::policies::PolicyKind;

/// Sub-seeds for every random stream of a run, drawn from the master seed
/// in a fixed order so that each stream is independent of the others'
/// consumption.
#[derive(Debug, Clone, Copy)]
pub struct DerivedSeeds {
    pub wind: u64,
    pub price: u64,
    pub train: u64,
    pub eval_arrivals: u64,
    pub decide_random: u64,
    pub decide_myopic: u64,
    pub decide_learned: u64,
}

pub fn derive_seeds(master_seed: u64) -> DerivedSeeds {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    DerivedSeeds {
        wind: rng.random(),
        price: rng.random(),
        train: rng.random(),
        eval_arrivals: rng.random(),
        decide_random: rng.random(),
        decide_myopic: rng.random(),
        decide_learned: rng.random(),
    }
}

/// Exogenous signals prepared for a run: the per-hour observations over all
/// training and evaluation days, plus the fitted codecs.
#[derive(Debug, Clone)]
pub struct ExogenousSetup {
    pub schedule: Vec<ExogenousObservation>,
    pub codec_r: LevelCodec,
    pub codec_p: LevelCodec,
}

/// Assembles wind + solar and price signals (from files when configured,
/// seeded synthetic otherwise), fits the level codecs on the training-day
/// range, and encodes every hour. Evaluation days never influence the
/// codecs; their values clamp to the fitted extremes.
pub fn build_exogenous(config: &ExperimentConfig) -> Result<ExogenousSetup> {
    build_exogenous_for_days(config, config.total_days())
}

pub fn build_exogenous_for_days(
    config: &ExperimentConfig,
    total_days: usize,
) -> Result<ExogenousSetup> {
    let seeds = derive_seeds(config.master_seed);
    let wind = match &config.data.wind_csv {
        Some(path) => load_hourly_series(path, SeriesUnit::KilowattHours)?,
        None => synthetic_wind(total_days, seeds.wind)?,
    };
    let wind = normalize_wind(&wind, config.data.wind_turbine_count)?;
    let price = match &config.data.price_csv {
        Some(path) => load_hourly_series(path, SeriesUnit::EurPerKilowattHour)?,
        None => synthetic_price(total_days, seeds.price)?,
    };
    for (name, series) in [("wind", &wind), ("price", &price)] {
        if series.days() < total_days {
            return Err(Error::data(format!(
                "{name} data covers {} days, the run needs {total_days}",
                series.days()
            )));
        }
    }
    let solar = solar_profile(
        config.data.solar_annual_kwh,
        config.data.solar_peak_hour,
        config.data.solar_sigma_hours,
    )?;

    let hours = total_days * 24;
    let r_kwh: Vec<f64> = (0..hours)
        .map(|t| wind.value(t / 24, t % 24) + solar[t % 24])
        .collect();
    let p_kwh: Vec<f64> = (0..hours).map(|t| price.value(t / 24, t % 24)).collect();

    let capacity = config.battery_capacity_kwh;
    let fit_hours = if config.training.days > 0 {
        (config.training.days * 24).min(hours)
    } else {
        hours
    };
    let r_points: Vec<f64> = r_kwh[..fit_hours]
        .iter()
        .map(|v| kwh_to_points(*v, capacity))
        .collect();
    let p_points: Vec<f64> = p_kwh[..fit_hours]
        .iter()
        .map(|v| eur_per_kwh_to_eur_per_point(*v, capacity))
        .collect();
    let codec_r = fit_levels_from_values(&r_points, config.data.renewable_levels)
        .map_err(|e| Error::data(format!("renewable discretization failed: {e}")))?;
    let codec_p = fit_levels_from_values(&p_points, config.data.price_levels)
        .map_err(|e| Error::data(format!("price discretization failed: {e}")))?;

    let schedule = (0..hours)
        .map(|t| encode_observation(&codec_r, &codec_p, r_kwh[t], p_kwh[t], capacity))
        .collect();
    Ok(ExogenousSetup {
        schedule,
        codec_r,
        codec_p,
    })
}

/// Poisson maximum-likelihood estimate of the hourly arrival rates from a
/// log of (day, hour) arrival events: events at each hour divided by the
/// number of days observed (first through last logged day).
pub fn estimate_arrival_rates(arrival_log: &[(u32, u8)]) -> Result<[f64; 24]> {
    if arrival_log.is_empty() {
        return Err(Error::domain("arrival log is empty".to_string()));
    }
    let mut counts = [0u64; 24];
    let mut min_day = u32::MAX;
    let mut max_day = 0u32;
    for &(day, hour) in arrival_log {
        if hour > 23 {
            return Err(Error::domain(format!("arrival hour {hour} out of range")));
        }
        counts[usize::from(hour)] += 1;
        min_day = min_day.min(day);
        max_day = max_day.max(day);
    }
    let days = f64::from(max_day - min_day + 1);
    let mut rates = [0.0f64; 24];
    for (r, c) in rates.iter_mut().zip(counts) {
        *r = c as f64 / days;
    }
    Ok(rates)
}

/// Pre-draws the arriving vehicles for `steps` evaluation steps starting at
/// hour 0, so several policies can be evaluated against identical customer
/// realizations. Entry `t` holds the arrivals admitted while advancing into
/// step `t + 1`'s hour.
pub fn arrival_plan<R: Rng + ?Sized>(
    model: &CustomerModel,
    ttl_max: u8,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<Vec<Vehicle>>> {
    (0..steps)
        .map(|t| {
            let hour = ((t + 1) % 24) as u8;
            let count = sample_arrival_count(rng, model.lambda[usize::from(hour)])?;
            Ok((0..count)
                .map(|_| sample_vehicle(rng, hour, model, ttl_max))
                .collect())
        })
        .collect()
}

/// Runs one policy over a fixed observation slice and arrival plan with no
/// learning, returning the 24-step income sum of every day. The station
/// starts empty at hour 0.
pub fn evaluate_policy<R: Rng + ?Sized>(
    cfg: &EnvConfig,
    policy: &PolicyKind,
    obs: &[ExogenousObservation],
    plan: &[Vec<Vehicle>],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if obs.len() != plan.len() || obs.is_empty() || !obs.len().is_multiple_of(24) {
        return Err(Error::domain(format!(
            "evaluation needs matching whole-day schedules, got {} observations and {} arrival entries",
            obs.len(),
            plan.len()
        )));
    }
    let days = obs.len() / 24;
    let mut state = StationState::empty(cfg.m, 0);
    let mut daily = Vec::with_capacity(days);
    for day in 0..days {
        let mut income = 0.0;
        for hour in 0..24 {
            let t = day * 24 + hour;
            let o = obs[t];
            let next_o = obs[(t + 1) % obs.len()];
            let actions = enumerate_actions(&state, cfg.k);
            let chosen = policy.decide(&state, &o, &actions, cfg.expenses_mode, rng)?;
            let tr = step_with_arrivals(cfg, &state, &actions[chosen], &o, &next_o, &plan[t])?;
            income += tr.reward;
            state = tr.next_state;
        }
        daily.push(income);
    }
    Ok(daily)
}

/// Standalone evaluation entry point: simulates `eval_days` after the
/// configured training window, drawing the arrival realizations and any
/// policy randomness from `rng`.
pub fn run_evaluation<R: Rng + ?Sized>(
    policy: &PolicyKind,
    config: &ExperimentConfig,
    eval_days: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    config.validate()?;
    if eval_days == 0 {
        return Err(Error::domain(
            "evaluation needs at least one day".to_string(),
        ));
    }
    let setup = build_exogenous_for_days(config, config.training.days + eval_days)?;
    let eval_obs = &setup.schedule[config.training.days * 24..][..eval_days * 24];
    let plan = arrival_plan(
        &config.customers,
        config.station.ttl_max,
        eval_days * 24,
        rng,
    )?;
    evaluate_policy(&config.station, policy, eval_obs, &plan, rng)
}

/// Trains a fresh table per the configuration. The exogenous setup is built
/// over all configured days so the codecs (and therefore the state keys)
/// match a subsequent evaluation exactly.
pub fn train_run(config: &ExperimentConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if config.training.days == 0 {
        return Ok(TrainOutcome {
            table: QTable::new(config.schedules().q0),
            episode_incomes: Vec::new(),
        });
    }
    let seeds = derive_seeds(config.master_seed);
    let setup = build_exogenous(config)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seeds.train);
    train(
        &config.station,
        &config.customers,
        &setup.schedule[..config.training.days * 24],
        &config.schedules(),
        config.training.days,
        config.training.repetitions,
        &mut rng,
    )
}

/// Everything `compare` produces: the report plus the trained table and the
/// training income trace.
#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub report: RunReport,
    pub table: QTable,
    pub episode_incomes: Vec<f64>,
}

/// Trains per the configuration, then evaluates the learned, random and
/// myopic policies on identical evaluation days and identical arrival
/// realizations, so income differences reflect decisions only.
pub fn compare(config: &ExperimentConfig) -> Result<CompareOutcome> {
    config.validate()?;
    let started = Instant::now();
    let seeds = derive_seeds(config.master_seed);
    let setup = build_exogenous(config)?;

    let trained = if config.training.days > 0 {
        let mut rng = ChaCha12Rng::seed_from_u64(seeds.train);
        train(
            &config.station,
            &config.customers,
            &setup.schedule[..config.training.days * 24],
            &config.schedules(),
            config.training.days,
            config.training.repetitions,
            &mut rng,
        )?
    } else {
        TrainOutcome {
            table: QTable::new(config.schedules().q0),
            episode_incomes: Vec::new(),
        }
    };

    let eval_obs = &setup.schedule[config.training.days * 24..][..config.evaluation.days * 24];
    let mut arrivals_rng = ChaCha12Rng::seed_from_u64(seeds.eval_arrivals);
    let plan = arrival_plan(
        &config.customers,
        config.station.ttl_max,
        config.evaluation.days * 24,
        &mut arrivals_rng,
    )?;

    let runs = [
        (PolicyKind::Random, seeds.decide_random),
        (PolicyKind::Myopic, seeds.decide_myopic),
        (
            PolicyKind::Learned(trained.table.clone()),
            seeds.decide_learned,
        ),
    ];
    let mut policies = BTreeMap::new();
    for (policy, seed) in runs {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let daily = evaluate_policy(&config.station, &policy, eval_obs, &plan, &mut rng)?;
        policies.insert(policy.name().to_string(), PolicyIncome::from_daily(daily));
    }

    let random_total = policies["random"].total;
    let uplift = (random_total > 0.0).then(|| policies["learned"].total / random_total);
    let report = RunReport {
        config_digest: config.digest(),
        seed: config.master_seed,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        policies,
        uplift_learned_vs_random: uplift,
    };
    Ok(CompareOutcome {
        report,
        table: trained.table,
        episode_incomes: trained.episode_incomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{EvaluationConfig, TrainingConfig};

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            training: TrainingConfig {
                days: 4,
                repetitions: 2,
            },
            evaluation: EvaluationConfig { days: 2 },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn rate_estimation_matches_the_sample_mean() {
        let mut log = Vec::new();
        for day in 0..3u32 {
            let events = [3, 1, 2][day as usize];
            for _ in 0..events {
                log.push((day, 9u8));
            }
        }
        let rates = estimate_arrival_rates(&log).unwrap();
        assert_eq!(rates[9], 2.0);
        assert_eq!(rates[3], 0.0);
    }

    #[test]
    fn rate_estimation_single_day() {
        let log: Vec<(u32, u8)> = (0..24).map(|h| (0u32, h as u8)).collect();
        let rates = estimate_arrival_rates(&log).unwrap();
        assert!(rates.iter().all(|r| *r == 1.0));
    }

    #[test]
    fn rate_estimation_rejects_empty_and_bad_hours() {
        assert!(estimate_arrival_rates(&[]).is_err());
        assert!(estimate_arrival_rates(&[(0, 24)]).is_err());
    }

    #[test]
    fn evaluation_with_no_customers_earns_nothing_without_renewable() {
        let mut config = tiny_config();
        config.customers.lambda = vec![0.0; 24];
        let setup = build_exogenous(&config).unwrap();
        // strip renewable income by zeroing the representative values
        let obs: Vec<_> = setup.schedule[config.training.days * 24..][..48]
            .iter()
            .map(|o| ExogenousObservation {
                r_points: 0.0,
                ..*o
            })
            .collect();
        let plan = vec![Vec::new(); 48];
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let daily =
            evaluate_policy(&config.station, &PolicyKind::Random, &obs, &plan, &mut rng).unwrap();
        assert_eq!(daily, vec![0.0, 0.0]);
    }

    #[test]
    fn run_evaluation_is_seed_deterministic() {
        let config = tiny_config();
        let run = |seed: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            run_evaluation(&PolicyKind::Random, &config, 2, &mut rng).unwrap()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn compare_produces_three_totals_and_pairs_realizations() {
        let outcome = compare(&tiny_config()).unwrap();
        let report = &outcome.report;
        assert_eq!(report.policies.len(), 3);
        for name in ["random", "myopic", "learned"] {
            let income = &report.policies[name];
            assert_eq!(income.per_day.len(), 2);
            assert_eq!(income.total, income.per_day.iter().sum::<f64>());
        }
        assert_eq!(report.seed, 1);
        assert_eq!(report.config_digest, tiny_config().digest());
    }

    #[test]
    fn compare_with_zero_training_days_still_reports() {
        let mut config = tiny_config();
        config.training.days = 0;
        let outcome = compare(&config).unwrap();
        assert!(outcome.table.is_empty());
        assert!(outcome.episode_incomes.is_empty());
        assert_eq!(outcome.report.policies.len(), 3);
    }

    #[test]
    fn compare_is_reproducible() {
        let config = tiny_config();
        let a = compare(&config).unwrap();
        let b = compare(&config).unwrap();
        assert_eq!(a.report.policies, b.report.policies);
        assert_eq!(a.report.incomes_csv(), b.report.incomes_csv());
        assert_eq!(a.table.to_snapshot(), b.table.to_snapshot());
    }

    #[test]
    fn short_data_files_are_a_data_error() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "day,hour,value").unwrap();
        for h in 0..24 {
            writeln!(f, "0,{h},1.{h}").unwrap();
        }
        f.flush().unwrap();
        let mut config = tiny_config();
        config.data.wind_csv = Some(f.path().to_path_buf());
        match build_exogenous(&config) {
            Err(Error::Data(msg)) => assert!(msg.contains("wind")),
            other => panic!("expected data error, got {other:?}"),
        }
    }
}
