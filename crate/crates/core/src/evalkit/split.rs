use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Frame-level train/test partition; both index lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded random 50/50 split of `n` frames. With an odd count the test
/// half gets the extra frame.
pub fn split_50_50(n: usize, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = idx[..n / 2].to_vec();
    let mut test = idx[n / 2..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}
