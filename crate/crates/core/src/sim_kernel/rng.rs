use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A run seed narrowed to one named sub-stream.
///
/// Each stream is keyed by hashing `(seed, stream_id)`, so adding or removing
/// a node never shifts the randomness seen by any other node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeed {
    pub seed: u64,
    pub stream_id: String,
}

impl RunSeed {
    pub fn new(seed: u64, stream_id: impl Into<String>) -> Self {
        RunSeed {
            seed,
            stream_id: stream_id.into(),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(b"ecsim/stream/v1");
        h.update(self.seed.to_le_bytes());
        h.update(self.stream_id.as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

pub type StreamRng = ChaCha8Rng;
