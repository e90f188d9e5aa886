//! Baseline and learned decision policies behind one uniform contract:
//! (state, observation, feasible actions, rng) -> chosen action index.

use rand::Rng;

use crate::domain::{ChargeAction, ExogenousObservation, StationState};
use crate::env::{reward, ExpensesMode};
use crate::error::{Error, Result};
use crate::learner::{encode_state, QTable};

/// Uniform draw over the feasible actions.
pub fn random_policy<R: Rng + ?Sized>(actions: &[ChargeAction], rng: &mut R) -> Result<usize> {
    if actions.is_empty() {
        return Err(Error::domain(
            "cannot pick from an empty action set".to_string(),
        ));
    }
    Ok(rng.random_range(0..actions.len()))
}

/// Greedy maximization of the immediate reward; lowest index on ties.
pub fn myopic_policy(
    state: &StationState,
    obs: &ExogenousObservation,
    actions: &[ChargeAction],
    mode: ExpensesMode,
) -> Result<usize> {
    if actions.is_empty() {
        return Err(Error::domain(
            "cannot pick from an empty action set".to_string(),
        ));
    }
    let mut best = 0;
    let mut best_reward = f64::NEG_INFINITY;
    for (i, action) in actions.iter().enumerate() {
        let r = reward(state, action, obs, mode)?;
        if r > best_reward {
            best_reward = r;
            best = i;
        }
    }
    Ok(best)
}

/// Greedy exploitation of a frozen table: argmax of the stored values over
/// the feasible actions, lowest index on ties. Pure; consumes no
/// randomness.
pub fn learned_policy(
    table: &QTable,
    state: &StationState,
    obs: &ExogenousObservation,
    actions: &[ChargeAction],
) -> Result<usize> {
    if actions.is_empty() {
        return Err(Error::domain(
            "cannot pick from an empty action set".to_string(),
        ));
    }
    let key = encode_state(state, obs)?;
    Ok(table.argmax_over(key, actions.len()))
}

/// A decision policy selectable by name.
#[derive(Debug)]
pub enum PolicyKind {
    Random,
    Myopic,
    Learned(QTable),
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::Myopic => "myopic",
            PolicyKind::Learned(_) => "learned",
        }
    }

    /// Picks the index of the action to take among `actions`.
    pub fn decide<R: Rng + ?Sized>(
        &self,
        state: &StationState,
        obs: &ExogenousObservation,
        actions: &[ChargeAction],
        mode: ExpensesMode,
        rng: &mut R,
    ) -> Result<usize> {
        match self {
            PolicyKind::Random => random_policy(actions, rng),
            PolicyKind::Myopic => myopic_policy(state, obs, actions, mode),
            PolicyKind::Learned(table) => learned_policy(table, state, obs, actions),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{UserType, Vehicle};
    use crate::env::enumerate_actions;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rich() -> UserType {
        UserType {
            id: 1,
            max_price: 3.6,
        }
    }

    fn obs(r_points: f64, p_eur_per_point: f64) -> ExogenousObservation {
        ExogenousObservation {
            r_level: 0,
            p_level: 0,
            r_points,
            p_eur_per_point,
        }
    }

    #[test]
    fn random_policy_is_uniform() {
        let state = StationState::from_vehicles(
            2,
            0,
            vec![
                Vehicle::new(3, 0, rich(), 12).unwrap(),
                Vehicle::new(5, 90, rich(), 12).unwrap(),
            ],
        )
        .unwrap();
        let actions = enumerate_actions(&state, 1);
        assert_eq!(actions.len(), 4);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let n = 10_000;
        let mut counts = vec![0usize; actions.len()];
        for _ in 0..n {
            counts[random_policy(&actions, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 0.25).abs() < 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn random_policy_single_action() {
        let actions = vec![ChargeAction::zero(3)];
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert_eq!(random_policy(&actions, &mut rng).unwrap(), 0);
        assert!(random_policy(&[], &mut rng).is_err());
    }

    #[test]
    fn empty_station_yields_the_noop_for_every_policy() {
        let state = StationState::empty(4, 9);
        let actions = enumerate_actions(&state, 2);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let o = obs(0.0, 0.02);
        for policy in [
            PolicyKind::Random,
            PolicyKind::Myopic,
            PolicyKind::Learned(QTable::new(0.0)),
        ] {
            let i = policy
                .decide(&state, &o, &actions, ExpensesMode::Literal, &mut rng)
                .unwrap();
            assert_eq!(actions[i], ChargeAction::zero(4));
        }
    }

    #[test]
    fn myopic_fast_charges_when_profitable() {
        let state =
            StationState::from_vehicles(1, 0, vec![Vehicle::new(3, 0, rich(), 12).unwrap()])
                .unwrap();
        let actions = enumerate_actions(&state, 1); // zero, 10, 100
                                                    // cheap grid: full charge nets 3.6 - 0.005*100 = 3.1, the best option
        let i = myopic_policy(&state, &obs(0.0, 0.005), &actions, ExpensesMode::Literal).unwrap();
        assert_eq!(actions[i].u, vec![100]);
        // ruinous grid price: every charge loses money
        let i = myopic_policy(&state, &obs(0.0, 0.08), &actions, ExpensesMode::Literal).unwrap();
        assert_eq!(actions[i].u, vec![0]);
    }

    #[test]
    fn learned_policy_follows_the_table_and_is_pure() {
        let state =
            StationState::from_vehicles(2, 3, vec![Vehicle::new(4, 10, rich(), 12).unwrap()])
                .unwrap();
        let actions = enumerate_actions(&state, 1);
        let o = obs(0.0, 0.02);
        let empty = QTable::new(0.0);
        assert_eq!(learned_policy(&empty, &state, &o, &actions).unwrap(), 0);

        let mut table = QTable::new(0.0);
        let key = encode_state(&state, &o).unwrap();
        table.update_toward(key, 2, 4.0, 1.0);
        for _ in 0..5 {
            assert_eq!(learned_policy(&table, &state, &o, &actions).unwrap(), 2);
        }
    }

    #[test]
    fn every_policy_returns_a_feasible_index() {
        let state = StationState::from_vehicles(
            3,
            12,
            vec![
                Vehicle::new(2, 20, rich(), 12).unwrap(),
                Vehicle::new(6, 80, rich(), 12).unwrap(),
            ],
        )
        .unwrap();
        let actions = enumerate_actions(&state, 2);
        let o = obs(4.0, 0.01);
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for policy in [
            PolicyKind::Random,
            PolicyKind::Myopic,
            PolicyKind::Learned(QTable::new(0.0)),
        ] {
            for _ in 0..20 {
                let i = policy
                    .decide(&state, &o, &actions, ExpensesMode::Literal, &mut rng)
                    .unwrap();
                assert!(i < actions.len());
            }
        }
    }
}
