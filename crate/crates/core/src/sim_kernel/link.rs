use serde::{Deserialize, Serialize};

use super::KernelError;

/// Static point-to-point link with a fixed propagation latency and bandwidth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkModel {
    pub name: String,
    pub latency_ms: u64,
    pub bandwidth_kbps: u64,
}

impl LinkModel {
    pub fn new(name: impl Into<String>, latency_ms: u64, bandwidth_kbps: u64) -> Result<Self, KernelError> {
        let link = LinkModel {
            name: name.into(),
            latency_ms,
            bandwidth_kbps,
        };
        link.check()?;
        Ok(link)
    }

    pub fn check(&self) -> Result<(), KernelError> {
        if self.bandwidth_kbps == 0 {
            return Err(KernelError::InvalidLink {
                name: self.name.clone(),
                reason: "bandwidth_kbps must be positive".into(),
            });
        }
        Ok(())
    }

    /// Transmission time of `size_bytes` in whole milliseconds, rounded up.
    ///
    /// One kbps moves exactly one bit per millisecond.
    pub fn transmission_ms(&self, size_bytes: u64) -> u64 {
        (size_bytes * 8).div_ceil(self.bandwidth_kbps)
    }

    /// `latency + ceil(bits / kbps)`.
    pub fn delivery_delay(&self, size_bytes: u64) -> u64 {
        self.latency_ms + self.transmission_ms(size_bytes)
    }
}
