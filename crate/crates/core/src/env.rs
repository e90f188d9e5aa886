//! The station MDP: customer generation, admission, action enumeration,
//! reward, and state transition.
//!
//! Everything here is value-in/value-out; one explicitly threaded generator
//! drives all sampling, so identical seeds give identical trajectories.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::domain::{
    charge_price, ChargeAction, ExogenousObservation, StationState, UserType, Vehicle, TTL_LIMIT,
};
use crate::error::{Error, Result};

/// How the expenses term treats surplus renewable energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpensesMode {
    /// `p * (sum(u) - r)` verbatim; surplus renewable makes expenses
    /// negative (implicitly sold at the grid price).
    Literal,
    /// `max(0, p * (sum(u) - r))`; surplus renewable is discarded.
    Clamped,
}

/// Station-level parameters of the MDP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Parking places.
    pub m: usize,
    /// Supply slots: at most this many vehicles charge in one hour.
    pub k: usize,
    /// Largest admissible time-to-leave in hours.
    pub ttl_max: u8,
    pub expenses_mode: ExpensesMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            m: 5,
            k: 3,
            ttl_max: 12,
            expenses_mode: ExpensesMode::Literal,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.m < self.k {
            return Err(Error::config(format!(
                "station needs m >= k >= 1, got m={} k={}",
                self.m, self.k
            )));
        }
        if self.m > 10 {
            return Err(Error::config(format!(
                "state encoding supports at most 10 parking places, got m={}",
                self.m
            )));
        }
        if self.ttl_max < 1 || self.ttl_max > TTL_LIMIT {
            return Err(Error::config(format!(
                "ttl_max must be in 1..={TTL_LIMIT}, got {}",
                self.ttl_max
            )));
        }
        Ok(())
    }
}

/// Stochastic customer population: hourly arrival rates, initial-SOC and
/// user-type mixes, and hour-dependent parking-duration parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CustomerModel {
    /// Poisson arrival rate per hour of day.
    pub lambda: Vec<f64>,
    /// Categorical weights over initial SOC {0, 10, ..., 90}.
    pub soc_weights: Vec<f64>,
    /// Mean parking duration (hours) by arrival hour.
    pub ttl_mean: Vec<f64>,
    /// Duration standard deviation by arrival hour.
    pub ttl_std: Vec<f64>,
    /// The customer types present at this station, ordered by id.
    pub types: Vec<UserType>,
    /// Categorical weights over `types`.
    pub type_weights: Vec<f64>,
}

impl Default for CustomerModel {
    /// A commuter pattern: arrival peaks at hours 8 and 17, long stays for
    /// morning arrivals, short stays before the evening, mostly low initial
    /// SOC, and an even medium/rich mix.
    fn default() -> Self {
        CustomerModel {
            lambda: vec![
                0.03, 0.03, 0.03, 0.03, 0.05, 0.1, // 0-5
                0.3, 0.6, 0.9, 0.6, 0.35, 0.3, // 6-11
                0.35, 0.3, 0.3, 0.35, 0.6, 0.9, // 12-17
                0.6, 0.35, 0.2, 0.1, 0.06, 0.03, // 18-23
            ],
            soc_weights: vec![0.45, 0.30, 0.15, 0.10, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            ttl_mean: vec![
                5.0, 5.0, 5.0, 5.0, 5.0, 6.0, // 0-5
                8.0, 8.0, 8.0, 8.0, 6.0, 5.0, // 6-11
                5.0, 5.0, 5.0, 4.0, 3.0, 3.0, // 12-17
                3.0, 3.0, 6.0, 7.0, 7.0, 7.0, // 18-23
            ],
            ttl_std: vec![1.0; 24],
            types: vec![
                UserType {
                    id: 0,
                    max_price: 2.4,
                },
                UserType {
                    id: 1,
                    max_price: 3.6,
                },
            ],
            type_weights: vec![0.5, 0.5],
        }
    }
}

impl CustomerModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v, n) in [
            ("lambda", &self.lambda, 24),
            ("ttl_mean", &self.ttl_mean, 24),
            ("ttl_std", &self.ttl_std, 24),
            ("soc_weights", &self.soc_weights, 10),
        ] {
            if v.len() != n {
                return Err(Error::config(format!(
                    "customer model {name} must have {n} entries, got {}",
                    v.len()
                )));
            }
        }
        if self.lambda.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::config(
                "arrival rates must be finite and >= 0".to_string(),
            ));
        }
        if self.ttl_std.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::config("ttl_std entries must be > 0".to_string()));
        }
        if self.types.is_empty() || self.types.len() > 4 {
            return Err(Error::config(
                "state encoding supports 1..=4 user types".to_string(),
            ));
        }
        for (i, ty) in self.types.iter().enumerate() {
            if usize::from(ty.id) != i {
                return Err(Error::config(
                    "user types must be listed in id order 0, 1, ...".to_string(),
                ));
            }
            if !ty.max_price.is_finite() || ty.max_price <= 0.0 {
                return Err(Error::config("user type max_price must be > 0".to_string()));
            }
        }
        if self.type_weights.len() != self.types.len() {
            return Err(Error::config(
                "type_weights must match the number of user types".to_string(),
            ));
        }
        for (name, w) in [
            ("soc_weights", &self.soc_weights),
            ("type_weights", &self.type_weights),
        ] {
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::config(format!("{name} must be finite and >= 0")));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::config(format!("{name} must sum to 1, got {total}")));
            }
        }
        Ok(())
    }
}

/// One (state, action, reward, next state) record.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: StationState,
    pub obs: ExogenousObservation,
    pub action: ChargeAction,
    pub reward: f64,
    pub next_state: StationState,
    pub next_obs: ExogenousObservation,
}

/// Draws the number of arrivals for an hour with rate `lambda_h`.
pub fn sample_arrival_count<R: Rng + ?Sized>(rng: &mut R, lambda_h: f64) -> Result<u32> {
    if !lambda_h.is_finite() || lambda_h < 0.0 {
        return Err(Error::domain(format!(
            "arrival rate must be finite and >= 0, got {lambda_h}"
        )));
    }
    if lambda_h == 0.0 {
        return Ok(0);
    }
    let poisson = Poisson::new(lambda_h)
        .map_err(|e| Error::domain(format!("poisson rate {lambda_h}: {e}")))?;
    Ok(poisson.sample(rng) as u32)
}

fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        x -= w;
        if x < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Draws one arriving vehicle for the given hour: SOC from the categorical
/// mix, TTL from the hour's normal distribution rounded and clamped to
/// `[1, ttl_max]`, type from the type mix.
pub fn sample_vehicle<R: Rng + ?Sized>(
    rng: &mut R,
    hour: u8,
    model: &CustomerModel,
    ttl_max: u8,
) -> Vehicle {
    let h = usize::from(hour % 24);
    let soc = 10 * sample_categorical(rng, &model.soc_weights) as u8;
    let normal = Normal::new(model.ttl_mean[h], model.ttl_std[h]).expect("validated ttl_std");
    let ttl = normal.sample(rng).round().clamp(1.0, f64::from(ttl_max)) as u8;
    let ty = model.types[sample_categorical(rng, &model.type_weights)];
    Vehicle {
        ttl,
        soc,
        user_type: ty,
        completed: false,
    }
}

/// Fills vacant places with newcomers first-come first-served; the overflow
/// is rejected and discarded. Returns the re-canonicalized state and the
/// rejection count.
pub fn admit(state: &StationState, newcomers: &[Vehicle]) -> (StationState, usize) {
    let mut vehicles: Vec<Vehicle> = state.occupied().map(|(_, v)| *v).collect();
    let room = state.num_slots() - vehicles.len();
    let admitted = newcomers.len().min(room);
    vehicles.extend_from_slice(&newcomers[..admitted]);
    let next = StationState::from_vehicles(state.num_slots(), state.hour_of_day, vehicles)
        .expect("capacity respected");
    (next, newcomers.len() - admitted)
}

/// Nonzero charge choices for a slot: 10 (normal) and `100 - soc` (fast),
/// collapsed to one entry when they coincide at soc 90. Vacant and
/// completed slots have no choices.
fn slot_choices(slot: &Option<Vehicle>) -> Vec<u8> {
    match slot {
        Some(v) if !v.completed && v.soc < 100 => {
            let full = 100 - v.soc;
            if full == 10 {
                vec![10]
            } else {
                vec![10, full]
            }
        }
        _ => Vec::new(),
    }
}

/// All feasible charge vectors: every entry 0, 10, or fast-charge, at most
/// `k` nonzero entries, zeros on vacant and completed slots.
///
/// The order is deterministic (lexicographic with 0 < 10 < fast per slot,
/// all-zero action first); the learner keys actions by their index here.
pub fn enumerate_actions(state: &StationState, k: usize) -> Vec<ChargeAction> {
    let m = state.num_slots();
    let choices: Vec<Vec<u8>> = state.slots.iter().map(slot_choices).collect();
    let mut out = Vec::with_capacity(action_count(state, k));
    let mut current = vec![0u8; m];

    fn recurse(
        choices: &[Vec<u8>],
        slot: usize,
        nonzero_left: usize,
        current: &mut Vec<u8>,
        out: &mut Vec<ChargeAction>,
    ) {
        if slot == choices.len() {
            out.push(ChargeAction { u: current.clone() });
            return;
        }
        current[slot] = 0;
        recurse(choices, slot + 1, nonzero_left, current, out);
        if nonzero_left > 0 {
            for &c in &choices[slot] {
                current[slot] = c;
                recurse(choices, slot + 1, nonzero_left - 1, current, out);
            }
            current[slot] = 0;
        }
    }

    recurse(&choices, 0, k, &mut current, &mut out);
    out
}

/// Size of [`enumerate_actions`] without materializing it.
pub fn action_count(state: &StationState, k: usize) -> usize {
    // ways[j] = assignments over the slots seen so far with j nonzero entries
    let mut ways = vec![0usize; k + 1];
    ways[0] = 1;
    for slot in &state.slots {
        let c = slot_choices(slot).len();
        for j in (1..=k).rev() {
            ways[j] += ways[j - 1] * c;
        }
    }
    ways.iter().sum()
}

/// Checks that `action` is one of the feasible vectors for `state`
/// (membership in [`enumerate_actions`], verified structurally).
pub fn validate_action(state: &StationState, action: &ChargeAction, k: usize) -> Result<()> {
    if action.u.len() != state.num_slots() {
        return Err(Error::domain(format!(
            "action has {} entries for a {}-slot station",
            action.u.len(),
            state.num_slots()
        )));
    }
    if action.nonzero_count() > k {
        return Err(Error::domain(format!(
            "action has {} nonzero entries, at most {k} allowed",
            action.nonzero_count()
        )));
    }
    for (i, (slot, &u)) in state.slots.iter().zip(&action.u).enumerate() {
        let ok = u == 0 || slot_choices(slot).contains(&u);
        if !ok {
            return Err(Error::domain(format!(
                "slot {i}: charge {u} is not feasible"
            )));
        }
    }
    Ok(())
}

/// The station's profit for taking `action` in `state` under `obs`:
/// charging incomes minus the cost of grid energy beyond the renewable
/// supply.
pub fn reward(
    state: &StationState,
    action: &ChargeAction,
    obs: &ExogenousObservation,
    mode: ExpensesMode,
) -> Result<f64> {
    validate_action(state, action, usize::MAX)?;
    let mut incomes = 0.0;
    for (i, v) in state.occupied() {
        let u = action.u[i];
        if u > 0 {
            incomes += charge_price(v.user_type, f64::from(v.soc), f64::from(v.soc + u))?;
        }
    }
    let drawn = f64::from(action.total_points()) - obs.r_points;
    let expenses = match mode {
        ExpensesMode::Literal => obs.p_eur_per_point * drawn,
        ExpensesMode::Clamped => (obs.p_eur_per_point * drawn).max(0.0),
    };
    Ok(incomes - expenses)
}

/// Applies the charge vector: SOC grows by the allocation, and a vehicle
/// reaching exactly 100 has its SOC nullified to 0 and is flagged
/// completed. TTLs are untouched; canonical order is restored.
pub fn apply_action(state: &StationState, action: &ChargeAction) -> Result<StationState> {
    validate_action(state, action, usize::MAX)?;
    let mut next = state.clone();
    for (slot, &u) in next.slots.iter_mut().zip(&action.u) {
        if let Some(v) = slot {
            let charged = v.soc + u;
            debug_assert!(charged <= 100);
            if charged == 100 {
                v.soc = 0;
                v.completed = true;
            } else {
                v.soc = charged;
            }
        }
    }
    next.canonicalize();
    Ok(next)
}

/// Moves the clock one hour: every TTL decreases by 1, vehicles at 0 leave,
/// and the hour's arrivals are admitted into the vacancies first-come
/// first-served. Returns the new state and the rejection count.
pub fn advance_time(state: &StationState, arrivals: &[Vehicle]) -> (StationState, usize) {
    let survivors: Vec<Vehicle> = state
        .occupied()
        .filter(|(_, v)| v.ttl > 1)
        .map(|(_, v)| Vehicle {
            ttl: v.ttl - 1,
            ..*v
        })
        .collect();
    let aged =
        StationState::from_vehicles(state.num_slots(), (state.hour_of_day + 1) % 24, survivors)
            .expect("capacity respected");
    admit(&aged, arrivals)
}

/// One decision step with the arrivals supplied by the caller: reward, then
/// charging, then the hour advance that admits the arrivals.
pub fn step_with_arrivals(
    cfg: &EnvConfig,
    state: &StationState,
    action: &ChargeAction,
    obs: &ExogenousObservation,
    next_obs: &ExogenousObservation,
    arrivals: &[Vehicle],
) -> Result<Transition> {
    validate_action(state, action, cfg.k)?;
    let r = reward(state, action, obs, cfg.expenses_mode)?;
    let charged = apply_action(state, action)?;
    let (next_state, _rejected) = advance_time(&charged, arrivals);
    Ok(Transition {
        state: state.clone(),
        obs: *obs,
        action: action.clone(),
        reward: r,
        next_state,
        next_obs: *next_obs,
    })
}

/// One decision step, sampling the next hour's arrivals from the customer
/// model. Vehicles arriving during hour t become chargeable at hour t+1.
pub fn step<R: Rng + ?Sized>(
    cfg: &EnvConfig,
    model: &CustomerModel,
    state: &StationState,
    action: &ChargeAction,
    obs: &ExogenousObservation,
    next_obs: &ExogenousObservation,
    rng: &mut R,
) -> Result<Transition> {
    let next_hour = (state.hour_of_day + 1) % 24;
    let count = sample_arrival_count(rng, model.lambda[usize::from(next_hour)])?;
    let arrivals: Vec<Vehicle> = (0..count)
        .map(|_| sample_vehicle(rng, next_hour, model, cfg.ttl_max))
        .collect();
    step_with_arrivals(cfg, state, action, obs, next_obs, &arrivals)
}
