//! Shared fixtures for the benchmarks.

use macex_core::code::{generate_codebooks, time_sharing_sequence, CodebookPair};
use macex_core::{Channel, InputLaw};

pub fn uniform_law() -> InputLaw {
    InputLaw::uniform(1, 2, 2).expect("valid law")
}

/// A binary MAC with unequal rows.
pub fn noisy_mac() -> Channel {
    Channel::new(2, 2, 2, vec![vec![0.9, 0.1], vec![0.35, 0.65], vec![0.2, 0.8], vec![0.6, 0.4]]).expect("valid channel")
}

pub fn code(n: usize, m_x: usize, m_y: usize, seed: u64) -> CodebookPair {
    let law = uniform_law();
    let u = time_sharing_sequence(&law, n).expect("even n");
    generate_codebooks(&law, &u, m_x, m_y, seed).expect("code fits")
}
