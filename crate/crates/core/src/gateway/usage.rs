use std::ops::AddAssign;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

/// Watt-hours per token.
pub fn energy_per_token() -> Decimal {
    Decimal::new(6, 5)
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("token counts must be nonnegative, got {0}")]
pub struct NegativeTokens(pub i64);

/// Prices in currency units per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rates {
    pub input_per_million: Decimal,
    pub output_per_million: Decimal,
}

impl Default for Rates {
    /// Public gpt-4o-mini list prices in USD; configuration, not ground truth.
    fn default() -> Self {
        Rates {
            input_per_million: Decimal::new(15, 2),
            output_per_million: Decimal::new(60, 2),
        }
    }
}

pub fn estimate_cost(input_tokens: i64, output_tokens: i64, rates: &Rates) -> Result<Decimal, NegativeTokens> {
    for n in [input_tokens, output_tokens] {
        if n < 0 {
            return Err(NegativeTokens(n));
        }
    }
    let million = Decimal::from(1_000_000);
    Ok((Decimal::from(input_tokens) * rates.input_per_million
        + Decimal::from(output_tokens) * rates.output_per_million)
        / million)
}

pub fn estimate_energy(total_tokens: i64) -> Result<Decimal, NegativeTokens> {
    if total_tokens < 0 {
        return Err(NegativeTokens(total_tokens));
    }
    Ok(Decimal::from(total_tokens) * energy_per_token())
}

/// Accumulated model usage. Cost and energy are derived from the token
/// counts, so they always agree with the rates in force.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageStats {
    pub calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Seconds spent waiting on the model.
    pub wall_time: Decimal,
    pub cost: Decimal,
    pub energy: Decimal,
}

impl UsageStats {
    pub fn for_call(input_tokens: u64, output_tokens: u64, latency_ms: u64, rates: &Rates) -> UsageStats {
        let (i, o) = (input_tokens as i64, output_tokens as i64);
        UsageStats {
            calls: 1,
            input_tokens,
            output_tokens,
            wall_time: Decimal::new(latency_ms as i64, 3),
            cost: estimate_cost(i, o, rates).expect("unsigned counts"),
            energy: estimate_energy(i + o).expect("unsigned counts"),
        }
    }

    pub fn total_tokens(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

impl AddAssign for UsageStats {
    fn add_assign(&mut self, rhs: Self) {
        self.calls += rhs.calls;
        self.input_tokens += rhs.input_tokens;
        self.output_tokens += rhs.output_tokens;
        self.wall_time += rhs.wall_time;
        self.cost += rhs.cost;
        self.energy += rhs.energy;
    }
}

impl std::iter::Sum for UsageStats {
    fn sum<I: Iterator<Item = UsageStats>>(iter: I) -> Self {
        let mut total = UsageStats::default();
        for u in iter {
            total += u;
        }
        total
    }
}
