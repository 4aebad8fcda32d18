//! Error statistics.

use super::constellation::{Partition, N_SYMBOLS};
use serde::{Deserialize, Serialize};

/// Aggregated bit and symbol error counts. Merging is associative and
/// order independent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BerCounts {
    pub total_bits: u64,
    pub bit_errors: u64,
    pub total_symbols: u64,
    pub symbol_errors: u64,
    pub erasures: u64,
    /// Transmissions per symbol index (position 0 is index 1).
    pub per_symbol_sent: [u64; N_SYMBOLS],
    /// Symbol errors per transmitted index.
    pub per_symbol_errors: [u64; N_SYMBOLS],
    pub per_symbol_bit_errors: [u64; N_SYMBOLS],
    /// Symbol errors per partition S1..S4.
    pub per_partition_errors: [u64; 4],
    pub per_partition_bit_errors: [u64; 4],
}

impl Default for BerCounts {
    fn default() -> Self {
        Self {
            total_bits: 0,
            bit_errors: 0,
            total_symbols: 0,
            symbol_errors: 0,
            erasures: 0,
            per_symbol_sent: [0; N_SYMBOLS],
            per_symbol_errors: [0; N_SYMBOLS],
            per_symbol_bit_errors: [0; N_SYMBOLS],
            per_partition_errors: [0; 4],
            per_partition_bit_errors: [0; 4],
        }
    }
}

impl BerCounts {
    /// Records one detected symbol. `tx_index` is 1-based.
    pub fn record(&mut self, tx_index: u8, bit_errors: u32, symbol_error: bool, erased: bool) {
        let i = tx_index as usize - 1;
        let p = Partition::of_index(tx_index).position();
        self.total_bits += 4;
        self.total_symbols += 1;
        self.bit_errors += bit_errors as u64;
        self.per_symbol_sent[i] += 1;
        self.per_symbol_bit_errors[i] += bit_errors as u64;
        self.per_partition_bit_errors[p] += bit_errors as u64;
        if symbol_error {
            self.symbol_errors += 1;
            self.per_symbol_errors[i] += 1;
            self.per_partition_errors[p] += 1;
        }
        if erased {
            self.erasures += 1;
        }
    }

    pub fn merge(&mut self, other: &BerCounts) {
        self.total_bits += other.total_bits;
        self.bit_errors += other.bit_errors;
        self.total_symbols += other.total_symbols;
        self.symbol_errors += other.symbol_errors;
        self.erasures += other.erasures;
        let add = |a: &mut [u64], b: &[u64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.per_symbol_sent, &other.per_symbol_sent);
        add(&mut self.per_symbol_errors, &other.per_symbol_errors);
        add(&mut self.per_symbol_bit_errors, &other.per_symbol_bit_errors);
        add(&mut self.per_partition_errors, &other.per_partition_errors);
        add(&mut self.per_partition_bit_errors, &other.per_partition_bit_errors);
    }

    pub fn ber(&self) -> f64 {
        if self.total_bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.total_bits as f64
        }
    }

    /// Checks that the per-symbol and per-partition tallies add up.
    pub fn is_consistent(&self) -> bool {
        let s = |a: &[u64]| a.iter().sum::<u64>();
        s(&self.per_symbol_sent) == self.total_symbols
            && s(&self.per_symbol_errors) == self.symbol_errors
            && s(&self.per_partition_errors) == self.symbol_errors
            && s(&self.per_symbol_bit_errors) == self.bit_errors
            && s(&self.per_partition_bit_errors) == self.bit_errors
            && self.total_bits == 4 * self.total_symbols
            && self.erasures <= self.symbol_errors
            && self.bit_errors <= self.total_bits
    }

    pub fn report(&self) -> BerReport {
        BerReport {
            ber: self.ber(),
            counts: self.clone(),
        }
    }
}

/// Counts plus the derived bit error ratio, as serialized to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub ber: f64,
    #[serde(flatten)]
    pub counts: BerCounts,
}
