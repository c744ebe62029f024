use std::io::{BufWriter, Write};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::{Payload, SimTime};
use crate::canonical;

/// One canonical JSONL line (without the trailing newline).
pub fn trace_line<P: Payload>(t: SimTime, seq: u64, target: &str, payload: &P) -> Vec<u8> {
    let mut obj = Map::new();
    obj.insert("t".into(), Value::from(t.millis()));
    obj.insert("seq".into(), Value::from(seq));
    obj.insert("target".into(), Value::from(target));
    obj.insert("kind".into(), Value::from(payload.kind()));
    obj.insert("payload".into(), payload.payload_value());
    let mut out = Vec::with_capacity(256);
    canonical::write_value(&Value::Object(obj), &mut out);
    out
}

/// Hashes every trace line and optionally streams it to a writer.
pub struct TraceRecorder {
    out: Option<BufWriter<Box<dyn Write + Send>>>,
    hasher: Sha256,
}

impl Default for TraceRecorder {
    fn default() -> Self {
        TraceRecorder::new(None)
    }
}

impl TraceRecorder {
    pub fn new(out: Option<Box<dyn Write + Send>>) -> Self {
        TraceRecorder {
            out: out.map(BufWriter::new),
            hasher: Sha256::new(),
        }
    }

    pub fn record<P: Payload>(
        &mut self,
        t: SimTime,
        seq: u64,
        target: &str,
        payload: &P,
    ) -> std::io::Result<()> {
        let mut line = trace_line(t, seq, target, payload);
        line.push(b'\n');
        self.hasher.update(&line);
        if let Some(out) = self.out.as_mut() {
            out.write_all(&line)?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        match self.out.as_mut() {
            Some(out) => out.flush(),
            None => Ok(()),
        }
    }

    /// First 64 bits of the SHA-256 over every line written so far.
    pub fn hash(&self) -> u64 {
        let digest = self.hasher.clone().finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

/// The same 64-bit hash computed over a finished trace file's bytes.
pub fn hash_bytes(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
