//! Shared inputs for the criterion benchmarks.

use ragfir_core::QuantizedFilter;

const LOWPASS64: &str = include_str!("../../core/fixtures/lowpass64.txt");

/// The 64-tap low-pass fixture.
pub fn lowpass64() -> QuantizedFilter {
    QuantizedFilter::parse(LOWPASS64).expect("fixture parses")
}

/// Deterministic pseudo-random 12-bit samples.
pub fn samples(len: usize) -> Vec<i64> {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    (0..len)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 4095) as i64 - 2047
        })
        .collect()
}
