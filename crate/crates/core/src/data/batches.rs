use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};

/// Seeded permutation of `0..n`.
///
/// Fisher-Yates from the back: for `i = n-1 .. 1`, swap `i` with
/// `j = (u * (i + 1)) >> 64`, where `u` is the next SplitMix64 output.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = ((u128::from(rng.next_u64()) * (i as u128 + 1)) >> 64) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Shuffles `0..item_count` with `seed` and cuts it into consecutive batches;
/// the final short batch is kept.
pub fn make_batches(item_count: usize, batch_size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    Ok(shuffled_indices(item_count, seed)
        .chunks(batch_size)
        .map(<[usize]>::to_vec)
        .collect())
}
