use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Portable, seedable random stream. ChaCha output is fixed by the algorithm,
/// so the same seed gives the same draws on every platform.
pub type DetRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> DetRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child stream for a named sub-task of a seeded run.
pub fn derive_rng(seed: u64, stream: u64) -> DetRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
