//! Unit-scale random instances for tests, benchmarks and oracle checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelSet;
use crate::linalg::{cn_matrix, cn_vector, CMat, CVec};
use crate::system::AirFcParams;

/// i.i.d. `CN(0, 1)` hops for relay groups of the given sizes, `n` antennas at
/// both ends, and an optional direct link.
pub fn random_chain(group_sizes: &[usize], n: usize, direct: bool, seed: u64) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hops = vec![cn_matrix(group_sizes[0], n, &mut rng)];
    for w in group_sizes.windows(2) {
        hops.push(cn_matrix(w[1], w[0], &mut rng));
    }
    hops.push(cn_matrix(n, group_sizes[group_sizes.len() - 1], &mut rng));
    let h0 = direct.then(|| cn_matrix(n, n, &mut rng));
    ChannelSet::new(h0, hops, 28e9, seed).expect("chain-compatible by construction")
}

pub fn random_gains(ch: &ChannelSet, seed: u64) -> Vec<CVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ch.group_sizes()
        .iter()
        .map(|&k| cn_vector(k, &mut rng))
        .collect()
}

pub fn random_params(ch: &ChannelSet, width: usize, seed: u64) -> AirFcParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AirFcParams {
        precoder: cn_matrix(ch.n_t(), width, &mut rng),
        combiner: cn_matrix(width, ch.n_r(), &mut rng),
        gains: random_gains(ch, seed ^ 0x9e37_79b9_7f4a_7c15),
    }
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMat {
    cn_matrix(rows, cols, &mut ChaCha8Rng::seed_from_u64(seed))
}
