//! Deterministic response strategies `D(b|y, lambda)` over round-structured alphabets.

use crate::error::{Error, Result};
use crate::history;

/// Default ceiling on the number of enumerated strategies.
pub const DEFAULT_STRATEGY_CAP: usize = 1_000_000;

/// Maps every input history to one output history.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicStrategy {
    /// `table[y]` is the output history for input history `y`.
    pub table: Vec<usize>,
    pub causal: bool,
}

impl DeterministicStrategy {
    pub fn output(&self, y: usize) -> usize {
        self.table[y]
    }

    /// `D(b|y)`.
    pub fn indicator(&self, b: usize, y: usize) -> bool {
        self.table[y] == b
    }
}

/// True when the first `i` output rounds depend only on the first `i` input rounds.
pub fn is_causal(table: &[usize], rounds: usize) -> bool {
    let k = table.len();
    for i in 1..rounds {
        for y in 0..k {
            for y2 in 0..k {
                if history::prefix(y, rounds, i) == history::prefix(y2, rounds, i)
                    && history::prefix(table[y], rounds, i) != history::prefix(table[y2], rounds, i)
                {
                    return false;
                }
            }
        }
    }
    true
}

/// Number of strategies without materializing them.
pub fn strategy_count(rounds: usize, causal: bool) -> u128 {
    let k = 1u128 << rounds;
    if causal {
        // one free bit per (round i, input prefix of length i)
        let bits: u32 = (1..=rounds).map(|i| 1u32 << i).sum();
        1u128.checked_shl(bits).unwrap_or(u128::MAX)
    } else {
        k.checked_pow(k as u32).unwrap_or(u128::MAX)
    }
}

/// Every deterministic strategy for `rounds` binary rounds, in a fixed order.
pub fn enumerate_strategies(rounds: usize, causal: bool, cap: usize) -> Result<Vec<DeterministicStrategy>> {
    if rounds == 0 || rounds > 6 {
        return Err(Error::Parameter { name: "rounds", value: rounds as f64, range: "1..=6" });
    }
    let count = strategy_count(rounds, causal);
    if count > cap as u128 {
        return Err(Error::TooManyStrategies { count, cap });
    }
    let k = 1usize << rounds;
    let count = count as usize;
    let mut out = Vec::with_capacity(count);
    if causal {
        for lambda in 0..count {
            // bits of lambda assign f_i(prefix) round by round
            let mut table = vec![0usize; k];
            let mut shift = 0;
            for i in 1..=rounds {
                let width = 1usize << i;
                for (y, slot) in table.iter_mut().enumerate() {
                    let p = history::prefix(y, rounds, i);
                    let bit = (lambda >> (shift + p)) & 1;
                    *slot = history::push(*slot, bit as u8);
                }
                shift += width;
            }
            out.push(DeterministicStrategy { table, causal: true });
        }
    } else {
        for lambda in 0..count {
            let mut table = vec![0usize; k];
            let mut rest = lambda;
            for slot in table.iter_mut() {
                *slot = rest % k;
                rest /= k;
            }
            let causal = is_causal(&table, rounds);
            out.push(DeterministicStrategy { table, causal });
        }
    }
    Ok(out)
}
