//! Seed derivation and counter-based bit streams.
//!
//! Every random quantity in a run flows from one 64-bit master seed through
//! documented, collision-free derivations, so that a run is reproducible
//! bit-for-bit and the two stations stay statistically independent.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Used both as a seed-derivation mix and as the
/// counter-based generator behind the per-slot setting bits.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for the substream identified by `salt`.
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    splitmix64(master ^ salt.wrapping_mul(GOLDEN))
}

/// Random-access uniform u64 for an indexed counter stream.
pub fn counter_u64(seed: u64, index: i64) -> u64 {
    splitmix64(seed.wrapping_add((index as u64).wrapping_mul(GOLDEN)))
}

/// Random-access uniform draw in [0, 1) for an indexed counter stream.
pub fn counter_unit(seed: u64, index: i64) -> f64 {
    (counter_u64(seed, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivations_are_stable_and_distinct() {
        assert_eq!(derive_seed(42, 1), derive_seed(42, 1));
        assert_ne!(derive_seed(42, 1), derive_seed(42, 2));
        assert_ne!(derive_seed(42, 1), derive_seed(43, 1));
    }

    #[test]
    fn counter_unit_is_uniform_enough() {
        let n = 100_000;
        let mean: f64 = (0..n).map(|i| counter_unit(7, i)).sum::<f64>() / n as f64;
        // 3 sigma of a U(0,1) mean over 1e5 samples is ~0.0027
        assert!((mean - 0.5).abs() < 0.004, "mean = {mean}");
        let negatives: f64 =
            (-(n as i64)..0).map(|i| counter_unit(7, i)).sum::<f64>() / n as f64;
        assert!((negatives - 0.5).abs() < 0.004);
    }
}
