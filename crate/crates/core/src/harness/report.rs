//! Run reports: per-policy evaluation incomes in JSON and flat CSV form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyIncome {
    pub per_day: Vec<f64>,
    pub total: f64,
}

impl PolicyIncome {
    pub fn from_daily(per_day: Vec<f64>) -> Self {
        let total = per_day.iter().sum();
        PolicyIncome { per_day, total }
    }
}

/// Outcome of one `compare` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_digest: String,
    pub seed: u64,
    pub wall_clock_secs: f64,
    /// Per-policy evaluation incomes, keyed by policy name.
    pub policies: BTreeMap<String, PolicyIncome>,
    /// learned total / random total; absent when the random total is not
    /// positive.
    pub uplift_learned_vs_random: Option<f64>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self).expect("report serializes"))
    }

    /// Flat per-day incomes, one row per (day, policy), policies in name
    /// order. Rendering is deterministic: identical reports give identical
    /// bytes.
    pub fn incomes_csv(&self) -> String {
        let mut out = String::from("day,policy,income_eur\n");
        for (name, income) in &self.policies {
            for (day, v) in income.per_day.iter().enumerate() {
                out.push_str(&format!("{day},{name},{v}\n"));
            }
        }
        out
    }
}
