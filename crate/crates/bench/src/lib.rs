//! Shared fixtures for the criterion benches.

use floquet_core::{generate_instance, GenerationParams, InstanceRecord, LatticeSpec, Model};

/// Seeded open-chain Ising instance with cutoff `m`.
pub fn ising_chain(n: usize, m: usize, seed: u64) -> InstanceRecord {
    generate_instance(
        &GenerationParams::new(LatticeSpec::chain(n, false), Model::Ising, m),
        seed,
    )
    .expect("valid bench instance")
}
