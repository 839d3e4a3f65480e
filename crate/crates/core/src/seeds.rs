//! Deterministic seed derivation.
//!
//! Experiments draw every random stream from one master seed so a whole batch
//! is reproducible and can be fanned out to workers without coordinating RNG
//! state. Derived seeds come from the SplitMix64 finalizer, which scatters
//! consecutive counters across the u64 space.

/// Derive an independent seed from `master` and a counter or stream tag.
pub fn mix(master: u64, counter: u64) -> u64 {
    let mut z = master ^ counter.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
