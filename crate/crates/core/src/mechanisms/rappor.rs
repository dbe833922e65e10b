//! Bloom-filter hashing for one-time RAPPOR.

use crate::error::{Error, Result};

/// `h` seeded multiply-shift hashes onto `k` buckets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RapporHash {
    pub k: usize,
    pub h: usize,
    pub seed: u64,
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 33)).wrapping_mul(0xff51_afd7_ed55_8ccd);
    z = (z ^ (z >> 33)).wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    z ^ (z >> 33)
}

impl RapporHash {
    pub fn new(k: usize, h: usize, seed: u64) -> Self {
        Self { k, h, seed }
    }

    /// Bucket of `item` under the `j`-th hash.
    pub fn bucket(&self, item: f64, j: usize) -> usize {
        let key = item.to_bits()
            ^ mix(self
                .seed
                .wrapping_add((j as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)));
        ((u128::from(mix(key)) * self.k as u128) >> 64) as usize
    }

    /// Set bits of the item's Bloom filter, packed into words.
    pub fn filter(&self, item: f64) -> Vec<u64> {
        let mut words = vec![0u64; self.k.div_ceil(64)];
        for j in 0..self.h {
            let b = self.bucket(item, j);
            words[b / 64] |= 1 << (b % 64);
        }
        words
    }
}

/// Bloom-filter positions of `item`, sorted and deduplicated.
pub fn bloom_positions(hash: &RapporHash, item: f64) -> Vec<usize> {
    let mut v: Vec<usize> = (0..hash.h).map(|j| hash.bucket(item, j)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// First seed at or after `start` under which both items hash to `h` distinct
/// buckets and the two filters are disjoint, so the pair differs in `2h` bits.
pub fn collision_free_seed(k: usize, h: usize, a: f64, b: f64, start: u64) -> Result<u64> {
    if k < 2 * h {
        return Err(Error::InvalidParameter("k must be at least 2h".into()));
    }
    for seed in start..start.saturating_add(100_000) {
        let hash = RapporHash::new(k, h, seed);
        let pa = bloom_positions(&hash, a);
        let pb = bloom_positions(&hash, b);
        if pa.len() == h && pb.len() == h && pa.iter().all(|x| !pb.contains(x)) {
            return Ok(seed);
        }
    }
    Err(Error::NoSolution(
        "no collision-free hash seed found".into(),
    ))
}
