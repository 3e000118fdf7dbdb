use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Parts of a panel that draw from separate, non-overlapping positions of a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Component {
    State = 1,
    SecondState = 2,
    Loadings = 3,
    Factors = 4,
    Errors = 5,
    StateNoise = 6,
}

/// Counter-based generator for (seed, replication, component).
pub fn substream(seed: u64, rep: u64, component: Component) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng.set_word_pos((component as u128) << 48);
    rng
}

/// SplitMix64 finalizer, used to derive independent seeds for table cells.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
