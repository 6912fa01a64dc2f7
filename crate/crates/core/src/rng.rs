use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Offsets added to the global seed for each pipeline stage.
pub mod stage {
    pub const SIMULATE: u64 = 1;
    pub const PRETRAIN: u64 = 2;
    pub const FINETUNE: u64 = 3;
    pub const PAIRS: u64 = 4;
    pub const RANK: u64 = 5;
    pub const TSNE: u64 = 6;
}

pub fn stage_seed(global: u64, offset: u64) -> u64 {
    global.wrapping_add(offset)
}
