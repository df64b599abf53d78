use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Root seed of a simulation run.
///
/// Every stochastic stage draws from its own ChaCha20 stream: the key is
/// derived from the seed and the stream id is the [`Stage`] number. Turning
/// one stage's noise off therefore never changes what another stage draws.
/// Independent runs (grid cells, trials) use [`RngSeed::derive`], which mixes
/// a tag into the seed with SplitMix64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

/// Random-stream identifiers, one per stochastic stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Prbs,
    TxNoise,
    LaserPhase,
    RxNoise,
    WeightInit,
    Dropout,
    BatchOrder,
    Other(u32),
}

impl Stage {
    fn stream_id(self) -> u64 {
        match self {
            Stage::Prbs => 1,
            Stage::TxNoise => 2,
            Stage::LaserPhase => 3,
            Stage::RxNoise => 4,
            Stage::WeightInit => 5,
            Stage::Dropout => 6,
            Stage::BatchOrder => 7,
            Stage::Other(n) => 0x1_0000_0000 | n as u64,
        }
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSeed {
    /// The random stream owned by `stage`.
    pub fn stream(self, stage: Stage) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.0);
        rng.set_stream(stage.stream_id());
        rng
    }

    /// A statistically independent child seed for `tag`.
    pub fn derive(self, tag: u64) -> RngSeed {
        RngSeed(splitmix64(self.0 ^ splitmix64(tag)))
    }
}

impl From<u64> for RngSeed {
    fn from(s: u64) -> Self {
        RngSeed(s)
    }
}
