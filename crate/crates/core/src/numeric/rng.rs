use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent, reproducible RNG stream for work item `index` of kind `tag`.
///
/// Streams are derived from the master seed alone, so results do not depend
/// on evaluation order or thread count.
pub fn stream(master: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(master ^ splitmix(tag)));
    rng.set_stream(index);
    rng
}

pub fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
