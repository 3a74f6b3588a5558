use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::numeric::Scalar;

/// Parameter initialization schemes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    FanIn(usize),
    Normal { std: f64 },
    Constant(f64),
}

impl Init {
    pub const EMBEDDING: Init = Init::Normal { std: 0.01 };
    pub const ZEROS: Init = Init::Constant(0.0);
    pub const ONES: Init = Init::Constant(1.0);
}

/// 64-bit FNV-1a over the path, folded with the run seed through splitmix64.
pub fn derive_seed(seed: u64, path: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in path.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Initial values as a pure function of `(seed, path, numel, init)`.
pub fn init_values<T: Scalar>(seed: u64, path: &str, numel: usize, init: Init) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, path));
    match init {
        Init::FanIn(fan_in) => {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            (0..numel).map(|_| T::lit(dist.sample(&mut rng))).collect()
        }
        Init::Normal { std } => {
            let dist = Normal::new(0.0, std).expect("positive std");
            (0..numel).map(|_| T::lit(dist.sample(&mut rng))).collect()
        }
        Init::Constant(c) => vec![T::lit(c); numel],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_pure_in_seed_and_path() {
        let a: Vec<f64> = init_values(7, "tower.0.w", 32, Init::FanIn(8));
        let b: Vec<f64> = init_values(7, "tower.0.w", 32, Init::FanIn(8));
        let c: Vec<f64> = init_values(7, "tower.1.w", 32, Init::FanIn(8));
        let d: Vec<f64> = init_values(8, "tower.0.w", 32, Init::FanIn(8));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        let bound = 1.0 / 8f64.sqrt();
        assert!(a.iter().all(|v| v.abs() <= bound));
    }
}
