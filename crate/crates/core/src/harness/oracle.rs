//! Exact Q-function solver for small explicit MDPs, used as an independent
//! reference for the tabular learner.

use crate::error::{Error, Result};

/// A finite MDP given by explicit transition lists.
#[derive(Debug, Clone)]
pub struct ExplicitMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transitions[s][a]` lists `(probability, next_state, reward)`.
    pub transitions: Vec<Vec<Vec<(f64, usize, f64)>>>,
}

impl ExplicitMdp {
    pub fn validate(&self) -> Result<()> {
        if self.transitions.len() != self.n_states {
            return Err(Error::domain(
                "transition table must cover every state".to_string(),
            ));
        }
        for (s, per_action) in self.transitions.iter().enumerate() {
            if per_action.len() != self.n_actions {
                return Err(Error::domain(format!("state {s} must list every action")));
            }
            for (a, outcomes) in per_action.iter().enumerate() {
                let total: f64 = outcomes.iter().map(|(p, _, _)| *p).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::domain(format!(
                        "transition probabilities for ({s}, {a}) sum to {total}"
                    )));
                }
                for (p, next, _) in outcomes {
                    if *p < 0.0 || *next >= self.n_states {
                        return Err(Error::domain(format!(
                            "bad outcome ({p}, {next}) for ({s}, {a})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Iterates the Bellman optimality operator on Q until the sup-norm change
/// drops below `tol`, returning the exact optimal Q indexed `[state][action]`.
pub fn value_iteration_oracle(mdp: &ExplicitMdp, gamma: f64, tol: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::domain(format!(
            "value iteration requires gamma in [0, 1), got {gamma}"
        )));
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::domain(format!("tolerance must be > 0, got {tol}")));
    }
    mdp.validate()?;

    let mut q = vec![vec![0.0f64; mdp.n_actions]; mdp.n_states];
    for iteration in 0.. {
        if iteration > 10_000_000 {
            return Err(Error::contract(
                "value iteration failed to converge within the iteration cap".to_string(),
            ));
        }
        let best: Vec<f64> = q
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let mut delta = 0.0f64;
        for (row, per_action) in q.iter_mut().zip(&mdp.transitions) {
            for (value, outcomes) in row.iter_mut().zip(per_action) {
                let backed_up: f64 = outcomes
                    .iter()
                    .map(|(p, next, r)| p * (r + gamma * best[*next]))
                    .sum();
                delta = delta.max((backed_up - *value).abs());
                *value = backed_up;
            }
        }
        if delta < tol {
            break;
        }
    }
    Ok(q)
}
