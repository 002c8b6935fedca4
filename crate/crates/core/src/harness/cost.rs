//! USD accounting from token counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ledger::LedgerRow;
use crate::types::TokenUsage;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CostError {
    #[error("no price configured for model `{0}`")]
    MissingPrice(String),
}

/// Prices in USD per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPrice {
    pub input: f64,
    pub output: f64,
    /// Billed at the output rate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinking: Option<f64>,
}

impl ModelPrice {
    pub fn cost(&self, t: &TokenUsage) -> f64 {
        let thinking = self.thinking.unwrap_or(self.output);
        (t.input as f64 * self.input + t.output as f64 * self.output + t.thinking as f64 * thinking) / 1e6
    }
}

/// Model name to price, e.g. `[claude-x] input = 3.0 output = 15.0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceTable(pub BTreeMap<String, ModelPrice>);

impl PriceTable {
    pub fn with(mut self, model: impl Into<String>, price: ModelPrice) -> Self {
        self.0.insert(model.into(), price);
        self
    }

    pub fn get(&self, model: &str) -> Option<&ModelPrice> {
        self.0.get(model)
    }

    pub fn cost(&self, model: &str, tokens: &TokenUsage) -> Result<f64, CostError> {
        self.get(model)
            .map(|p| p.cost(tokens))
            .ok_or_else(|| CostError::MissingPrice(model.to_string()))
    }

    /// Unpriced models count as free; `cost_report` is the strict path.
    pub fn cost_or_zero(&self, model: &str, tokens: &TokenUsage) -> f64 {
        self.cost(model, tokens).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub per_task: BTreeMap<String, f64>,
    pub per_model: BTreeMap<String, f64>,
    pub total_usd: f64,
    pub samples: usize,
    pub mean_per_sample: f64,
}

/// Re-prices every recorded call; fails on the first unpriced model.
pub fn cost_report(rows: &[LedgerRow], prices: &PriceTable) -> Result<CostReport, CostError> {
    let mut per_task: BTreeMap<String, f64> = BTreeMap::new();
    let mut per_model: BTreeMap<String, f64> = BTreeMap::new();
    let mut total = 0.0;
    for row in rows {
        let task = per_task.entry(row.task_id.clone()).or_default();
        for u in row.iterations.iter().flat_map(|i| i.usage.iter()) {
            let c = prices.cost(&u.model, &u.tokens)?;
            *task += c;
            *per_model.entry(u.model.clone()).or_default() += c;
            total += c;
        }
    }
    let samples = rows.len();
    Ok(CostReport {
        per_task,
        per_model,
        total_usd: total,
        samples,
        mean_per_sample: if samples == 0 { 0.0 } else { total / samples as f64 },
    })
}
