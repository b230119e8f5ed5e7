//! Counter-based random numbers. Every draw is a pure function of
//! `(seed, row, variable, k)`, so generation order and thread count never
//! change a sample.

use std::f64::consts::PI;

const K1: u64 = 0x9E37_79B9_7F4A_7C15;
const K2: u64 = 0xD1B5_4A32_D192_ED03;
const K3: u64 = 0xAEF1_7502_108E_F2D9;
const K4: u64 = 0xF1357AEA2E62A9C5;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn hash(seed: u64, row: u64, variable: u64, k: u64) -> u64 {
    let mut h = mix64(seed.wrapping_add(K1));
    h = mix64(h ^ row.wrapping_mul(K2).wrapping_add(K1));
    h = mix64(h ^ variable.wrapping_mul(K3).wrapping_add(K2));
    mix64(h ^ k.wrapping_mul(K4).wrapping_add(K3))
}

/// Seed for a child stream, e.g. replication `index` of an experiment.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    hash(master, index, u64::MAX, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    pub seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn bits(&self, row: u64, variable: u64, k: u64) -> u64 {
        hash(self.seed, row, variable, k)
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&self, row: u64, variable: u64, k: u64) -> f64 {
        ((self.bits(row, variable, k) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller on two counter draws.
    pub fn normal(&self, row: u64, variable: u64) -> f64 {
        let u1 = self.uniform(row, variable, 0);
        let u2 = self.uniform(row, variable, 1);
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    pub fn bernoulli(&self, row: u64, variable: u64, p: f64) -> f64 {
        if self.uniform(row, variable, 2) < p {
            1.0
        } else {
            0.0
        }
    }

    /// A permutation of `0..n` obtained by sorting hashed keys.
    pub fn permutation(&self, n: usize, variable: u64) -> Vec<usize> {
        let mut keyed: Vec<(u64, usize)> = (0..n)
            .map(|i| (self.bits(i as u64, variable, 0), i))
            .collect();
        keyed.sort_unstable();
        keyed.into_iter().map(|(_, i)| i).collect()
    }
}
