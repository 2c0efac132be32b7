//! Deterministic random streams keyed by (phase, step, electron, walker).
//!
//! Every random draw in the engine comes from its own ChaCha stream whose
//! seed encodes the full logical coordinate of the draw. Parallel scheduling
//! therefore cannot perturb results: the same master seed always produces
//! bit-identical ensembles regardless of thread count or task order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which engine phase is drawing; keeps the stream spaces disjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamPhase {
    /// Initial walker placement.
    Init,
    /// Walker refresh during imaginary-time relaxation.
    Relax,
}

impl StreamPhase {
    fn tag(self) -> u32 {
        match self {
            StreamPhase::Init => 0x494e4954,  // "INIT"
            StreamPhase::Relax => 0x52454c58, // "RELX"
        }
    }
}

/// The stream for one logical draw coordinate.
pub fn walker_stream(
    master_seed: u64,
    phase: StreamPhase,
    step: u64,
    electron: usize,
    walker: usize,
) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&step.to_le_bytes());
    seed[16..20].copy_from_slice(&(electron as u32).to_le_bytes());
    seed[20..24].copy_from_slice(&(walker as u32).to_le_bytes());
    seed[24..28].copy_from_slice(&phase.tag().to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}
