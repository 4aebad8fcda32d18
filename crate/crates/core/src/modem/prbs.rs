//! PRBS11 generator, `x¹¹ + x⁹ + 1`.

use super::ModemError;

pub const PRBS11_PERIOD: usize = 2047;

/// Fibonacci LFSR over 11 bits.
#[derive(Debug, Clone)]
pub struct Prbs11 {
    state: u16,
}

impl Prbs11 {
    pub fn new(seed: u16) -> Result<Self, ModemError> {
        if seed == 0 || seed > 0x7FF {
            return Err(ModemError::InvalidSeed(seed as u64));
        }
        Ok(Self { state: seed })
    }
}

impl Iterator for Prbs11 {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        let bit = ((self.state >> 10) ^ (self.state >> 8)) & 1;
        self.state = ((self.state << 1) | bit) & 0x7FF;
        Some(bit as u8)
    }
}

/// First `n` bits of the PRBS11 sequence started from `seed`.
pub fn prbs11(seed: u16, n: usize) -> Result<Vec<u8>, ModemError> {
    Ok(Prbs11::new(seed)?.take(n).collect())
}
