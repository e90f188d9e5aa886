//! Tabular Q-learning over the encoded station state: action selection,
//! value update, exploration/learning-rate schedules, and the training loop.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ChargeAction, ExogenousObservation, StationState};
use crate::env::{action_count, enumerate_actions, step, CustomerModel, EnvConfig, Transition};
use crate::error::{Error, Result};

/// Magic string heading every Q-table snapshot.
pub const QTABLE_MAGIC: &str = "EVQTAB1";

/// Compact injective encoding of (hour, canonical slots, r level, p level).
///
/// Layout, least significant first: hour (5 bits), r_level (4), p_level (4),
/// then 11 bits per slot: ttl (4, 0 = vacant), soc/10 (4), type id (2),
/// completed (1). A u128 therefore holds stations of up to 10 places.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(u128);

impl StateKey {
    pub fn raw(self) -> u128 {
        self.0
    }

    /// Builds a key from raw bits; used by snapshot loading and by tests
    /// that drive the update rule on synthetic MDPs.
    pub fn from_raw(raw: u128) -> Self {
        StateKey(raw)
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:x}", self.0)
    }
}

/// Encodes a canonical state plus the discretized exogenous observation.
/// Two states with the same canonical content always encode equally.
pub fn encode_state(state: &StationState, obs: &ExogenousObservation) -> Result<StateKey> {
    if !state.is_canonical() {
        return Err(Error::contract(
            "encode_state requires a canonical station state".to_string(),
        ));
    }
    if state.num_slots() > 10 {
        return Err(Error::contract(format!(
            "state encoding supports at most 10 slots, got {}",
            state.num_slots()
        )));
    }
    if obs.r_level > 15 || obs.p_level > 15 {
        return Err(Error::contract(
            "observation level index exceeds 15".to_string(),
        ));
    }
    let mut key = u128::from(state.hour_of_day % 24)
        | u128::from(obs.r_level) << 5
        | u128::from(obs.p_level) << 9;
    for (i, slot) in state.slots.iter().enumerate() {
        let bits = match slot {
            None => 0u128,
            Some(v) => {
                if v.ttl == 0 || v.ttl > 15 || v.soc > 100 || v.soc % 10 != 0 {
                    return Err(Error::contract(format!("unencodable vehicle {v:?}")));
                }
                if v.user_type.id > 3 {
                    return Err(Error::contract(format!(
                        "state encoding supports type ids 0..=3, got {}",
                        v.user_type.id
                    )));
                }
                u128::from(v.ttl)
                    | u128::from(v.soc / 10) << 4
                    | u128::from(v.user_type.id) << 8
                    | u128::from(v.completed) << 10
            }
        };
        key |= bits << (13 + 11 * i);
    }
    Ok(StateKey(key))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QEntry {
    q: f64,
    visits: u32,
}

/// Sparse state-action value table. Absent entries read as the initial
/// value `q0` with zero visits; only updated pairs are materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    entries: HashMap<(StateKey, u32), QEntry>,
    q0: f64,
}

impl QTable {
    pub fn new(q0: f64) -> Self {
        QTable {
            entries: HashMap::new(),
            q0,
        }
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, state: StateKey, action: u32) -> f64 {
        self.entries.get(&(state, action)).map_or(self.q0, |e| e.q)
    }

    pub fn visits(&self, state: StateKey, action: u32) -> u32 {
        self.entries.get(&(state, action)).map_or(0, |e| e.visits)
    }

    /// Greatest value over action indices `0..n_actions` of a state.
    pub fn max_over(&self, state: StateKey, n_actions: usize) -> f64 {
        debug_assert!(n_actions > 0, "every state has at least the no-op action");
        (0..n_actions as u32)
            .map(|a| self.get(state, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the greatest value over `0..n_actions`, lowest index on ties.
    pub fn argmax_over(&self, state: StateKey, n_actions: usize) -> usize {
        let mut best = 0;
        let mut best_q = f64::NEG_INFINITY;
        for a in 0..n_actions {
            let q = self.get(state, a as u32);
            if q > best_q {
                best_q = q;
                best = a;
            }
        }
        best
    }

    /// Moves one entry toward `target` by the learning rate and increments
    /// its visit count. Returns the new value.
    pub fn update_toward(&mut self, state: StateKey, action: u32, target: f64, beta: f64) -> f64 {
        let entry = self.entries.entry((state, action)).or_insert(QEntry {
            q: self.q0,
            visits: 0,
        });
        entry.q = (1.0 - beta) * entry.q + beta * target;
        entry.visits += 1;
        entry.q
    }

    /// Renders the snapshot: magic line, `q0` line, then one
    /// `<state-key-hex> <action> <q> <visits>` record per entry, sorted so
    /// identical tables serialize to identical bytes.
    pub fn to_snapshot(&self) -> String {
        let mut records: Vec<(&(StateKey, u32), &QEntry)> = self.entries.iter().collect();
        records.sort_by_key(|(k, _)| **k);
        let mut out = String::with_capacity(32 + records.len() * 32);
        out.push_str(QTABLE_MAGIC);
        out.push('\n');
        out.push_str(&format!("q0 {}\n", self.q0));
        for ((state, action), e) in records {
            out.push_str(&format!("{state} {action} {} {}\n", e.q, e.visits));
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, line)) if line.trim() == QTABLE_MAGIC => {}
            other => {
                return Err(Error::parse(
                    1,
                    format!("expected {QTABLE_MAGIC} header, got {other:?}"),
                ))
            }
        }
        let q0 = match lines.next() {
            Some((_, line)) => {
                let mut parts = line.split_whitespace();
                if parts.next() != Some("q0") {
                    return Err(Error::parse(2, "expected `q0 <value>` line".to_string()));
                }
                parts
                    .next()
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::parse(2, "malformed q0 value".to_string()))?
            }
            None => return Err(Error::parse(2, "missing q0 line".to_string())),
        };
        let mut table = QTable::new(q0);
        for (i, line) in lines {
            let row = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(key), Some(action), Some(q), Some(visits)) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::parse(row, format!("malformed record: {line}")));
            };
            let key = u128::from_str_radix(key, 16)
                .map_err(|e| Error::parse(row, format!("bad state key: {e}")))?;
            let action: u32 = action
                .parse()
                .map_err(|e| Error::parse(row, format!("bad action index: {e}")))?;
            let q: f64 = q
                .parse()
                .map_err(|e| Error::parse(row, format!("bad q value: {e}")))?;
            let visits: u32 = visits
                .parse()
                .map_err(|e| Error::parse(row, format!("bad visit count: {e}")))?;
            table
                .entries
                .insert((StateKey::from_raw(key), action), QEntry { q, visits });
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_snapshot())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_snapshot(&text)
    }
}

/// Exploration and learning-rate schedules, both linear in the global step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedules {
    pub epsilon0: f64,
    pub epsilon_min: f64,
    pub beta0: f64,
    pub beta_min: f64,
    /// Steps over which both schedules decay from their initial to their
    /// minimum value; they stay at the minimum beyond.
    pub t_total: u64,
    /// Discount factor; 1 reproduces the undiscounted update.
    pub gamma: f64,
    /// Initial value of unvisited state-action pairs.
    pub q0: f64,
}

impl Default for Schedules {
    fn default() -> Self {
        Schedules {
            epsilon0: 0.9,
            epsilon_min: 0.02,
            beta0: 0.5,
            beta_min: 0.01,
            t_total: 190 * 40 * 24,
            gamma: 0.95,
            q0: 0.0,
        }
    }
}

impl Schedules {
    pub fn validate(&self) -> Result<()> {
        for (name, lo, hi) in [
            ("epsilon", self.epsilon_min, self.epsilon0),
            ("beta", self.beta_min, self.beta0),
        ] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
                return Err(Error::config(format!("{name} bounds must lie in [0, 1]")));
            }
            if lo > hi {
                return Err(Error::config(format!("{name}_min must not exceed {name}0")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if self.t_total == 0 {
            return Err(Error::config("t_total must be >= 1".to_string()));
        }
        if !self.q0.is_finite() {
            return Err(Error::config("q0 must be finite".to_string()));
        }
        Ok(())
    }
}

fn linear_at(t: u64, start: f64, end: f64, t_total: u64) -> f64 {
    if t >= t_total {
        end
    } else {
        start + (end - start) * t as f64 / t_total as f64
    }
}

/// Exploration probability at global step `t`.
pub fn epsilon_at(t: u64, s: &Schedules) -> f64 {
    linear_at(t, s.epsilon0, s.epsilon_min, s.t_total)
}

/// Learning rate at global step `t`.
pub fn beta_at(t: u64, s: &Schedules) -> f64 {
    linear_at(t, s.beta0, s.beta_min, s.t_total)
}

/// Epsilon-greedy selection over the enumerated feasible actions: with
/// probability `1 - epsilon` the greedy index (lowest index on ties),
/// otherwise a uniform draw. Consumes no randomness when `epsilon` is 0, so
/// the greedy policy is a pure function of the table.
pub fn select_action<R: Rng + ?Sized>(
    table: &QTable,
    state: &StationState,
    obs: &ExogenousObservation,
    actions: &[ChargeAction],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if actions.is_empty() {
        return Err(Error::domain(
            "cannot select from an empty action set".to_string(),
        ));
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..actions.len()));
    }
    let key = encode_state(state, obs)?;
    Ok(table.argmax_over(key, actions.len()))
}

/// Index of `action` within the deterministic enumeration order of its
/// state; this index is the action's key in the Q-table.
pub fn action_index(state: &StationState, action: &ChargeAction, k: usize) -> Result<u32> {
    enumerate_actions(state, k)
        .iter()
        .position(|a| a == action)
        .map(|i| i as u32)
        .ok_or_else(|| Error::domain("action is not feasible for this state".to_string()))
}

/// One Q-learning update from a transition:
/// `q <- (1-beta) q + beta (reward + gamma * max_a' Q(next, a'))`.
pub fn q_update(
    table: &mut QTable,
    tr: &Transition,
    beta: f64,
    gamma: f64,
    k: usize,
) -> Result<f64> {
    let state_key = encode_state(&tr.state, &tr.obs)?;
    let action = action_index(&tr.state, &tr.action, k)?;
    let next_key = encode_state(&tr.next_state, &tr.next_obs)?;
    let next_best = table.max_over(next_key, action_count(&tr.next_state, k));
    let target = tr.reward + gamma * next_best;
    Ok(table.update_toward(state_key, action, target, beta))
}

/// Output of [`train`]: the learned table plus the income of every episode
/// (one simulated day) in training order.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub table: QTable,
    pub episode_incomes: Vec<f64>,
}

/// Runs `repetitions` passes over `days` simulated days. Each day is one
/// episode of 24 select/step/update iterations; the exogenous observations
/// are replayed by day index from `obs_schedule` (day-major, one per hour)
/// while customer stochastics are resampled every pass. The station starts
/// empty at the beginning of each pass and carries over between days within
/// a pass.
pub fn train<R: Rng + ?Sized>(
    cfg: &EnvConfig,
    model: &CustomerModel,
    obs_schedule: &[ExogenousObservation],
    schedules: &Schedules,
    days: usize,
    repetitions: usize,
    rng: &mut R,
) -> Result<TrainOutcome> {
    if days == 0 || repetitions == 0 {
        return Err(Error::domain(
            "training needs days >= 1 and repetitions >= 1".to_string(),
        ));
    }
    if obs_schedule.len() < days * 24 {
        return Err(Error::domain(format!(
            "observation schedule covers {} hours, {} required",
            obs_schedule.len(),
            days * 24
        )));
    }
    cfg.validate()?;
    model.validate()?;
    schedules.validate()?;

    let mut table = QTable::new(schedules.q0);
    let mut episode_incomes = Vec::with_capacity(days * repetitions);
    let mut t_global: u64 = 0;
    // Running bound for the contraction sanity check: with rewards in
    // [-R, R] and gamma < 1, every stored q must stay within
    // max(|q0|, R / (1 - gamma)).
    let mut reward_abs_max = 0.0f64;

    for _rep in 0..repetitions {
        let mut state = StationState::empty(cfg.m, 0);
        for day in 0..days {
            let mut day_income = 0.0;
            for hour in 0..24 {
                let step_idx = day * 24 + hour;
                let obs = obs_schedule[step_idx];
                let next_obs = obs_schedule[(step_idx + 1) % (days * 24)];
                let actions = enumerate_actions(&state, cfg.k);
                let eps = epsilon_at(t_global, schedules);
                let chosen = select_action(&table, &state, &obs, &actions, eps, rng)?;
                let tr = step(cfg, model, &state, &actions[chosen], &obs, &next_obs, rng)?;
                let beta = beta_at(t_global, schedules);
                let new_q = q_update(&mut table, &tr, beta, schedules.gamma, cfg.k)?;

                reward_abs_max = reward_abs_max.max(tr.reward.abs());
                if schedules.gamma < 1.0 {
                    let bound = schedules
                        .q0
                        .abs()
                        .max(reward_abs_max / (1.0 - schedules.gamma));
                    assert!(
                        new_q.abs() <= bound + 1e-9,
                        "q {new_q} escaped the contraction bound {bound}"
                    );
                }

                day_income += tr.reward;
                state = tr.next_state;
                t_global += 1;
            }
            episode_incomes.push(day_income);
        }
    }
    Ok(TrainOutcome {
        table,
        episode_incomes,
    })
}
