use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::*;
use crate::canonical;

pub const WIRE_VERSION: u64 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("decode error at byte {offset}: {message}")]
pub struct DecodeError {
    pub offset: usize,
    pub message: String,
}

impl DecodeError {
    fn from_json(bytes: &[u8], err: &serde_json::Error) -> Self {
        let offset = if err.is_eof() {
            bytes.len()
        } else {
            byte_offset(bytes, err.line(), err.column())
        };
        DecodeError {
            offset,
            message: err.to_string(),
        }
    }
}

/// serde_json reports 1-based line/column; convert to a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start = bytes
        .iter()
        .enumerate()
        .filter(|(_, b)| **b == b'\n')
        .nth(line.saturating_sub(2))
        .map(|(i, _)| i + 1)
        .filter(|_| line > 1)
        .unwrap_or(0);
    (line_start + column.saturating_sub(1)).min(bytes.len())
}

/// Canonical key-sorted JSON of any wire value.
pub fn encode<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    canonical::to_vec(value)
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, DecodeError> {
    serde_json::from_slice(bytes).map_err(|e| DecodeError::from_json(bytes, &e))
}

/// Any protocol message, tagged by type for mixed streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "body")]
pub enum Message {
    SensorFrame(SensorFrame),
    InteractionEvent(InteractionEvent),
    FusedRecord(FusedRecord),
    RiskAssessment(RiskAssessment),
    EmergencyAlert(EmergencyAlert),
    ExpertRecommendation(ExpertRecommendation),
    TherapyCommand(TherapyCommand),
    ResourcePlan(ResourcePlan),
    SessionRecord(SessionRecord),
}

impl Message {
    pub fn type_name(&self) -> &'static str {
        match self {
            Message::SensorFrame(_) => "SensorFrame",
            Message::InteractionEvent(_) => "InteractionEvent",
            Message::FusedRecord(_) => "FusedRecord",
            Message::RiskAssessment(_) => "RiskAssessment",
            Message::EmergencyAlert(_) => "EmergencyAlert",
            Message::ExpertRecommendation(_) => "ExpertRecommendation",
            Message::TherapyCommand(_) => "TherapyCommand",
            Message::ResourcePlan(_) => "ResourcePlan",
            Message::SessionRecord(_) => "SessionRecord",
        }
    }

    /// Envelope bytes: `{"body":…,"type":…,"v":1}`.
    pub fn encode(&self) -> Vec<u8> {
        let mut value = canonical::to_value(self);
        if let Value::Object(map) = &mut value {
            map.insert("v".into(), Value::from(WIRE_VERSION));
        }
        let mut out = Vec::new();
        canonical::write_value(&value, &mut out);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Message, DecodeError> {
        let mut value: Value =
            serde_json::from_slice(bytes).map_err(|e| DecodeError::from_json(bytes, &e))?;
        let version = value
            .as_object_mut()
            .and_then(|m| m.remove("v"))
            .and_then(|v| v.as_u64());
        if version != Some(WIRE_VERSION) {
            return Err(DecodeError {
                offset: 0,
                message: format!("expected \"v\":{WIRE_VERSION}"),
            });
        }
        serde_json::from_value(value).map_err(|e| DecodeError {
            offset: 0,
            message: e.to_string(),
        })
    }

    /// Size used for link-delay accounting.
    pub fn wire_size(&self) -> u64 {
        self.encode().len() as u64
    }

    pub fn violations(&self, ctx: &ValidationContext) -> Vec<Violation> {
        match self {
            Message::SensorFrame(m) => m.violations(ctx),
            Message::InteractionEvent(m) => m.violations(ctx),
            Message::FusedRecord(m) => m.violations(ctx),
            Message::RiskAssessment(m) => m.violations(ctx),
            Message::EmergencyAlert(m) => m.violations(ctx),
            Message::ExpertRecommendation(m) => m.violations(ctx),
            Message::TherapyCommand(m) => m.violations(ctx),
            Message::ResourcePlan(m) => m.violations(ctx),
            Message::SessionRecord(m) => m.violations(ctx),
        }
    }
}

impl Validate for Message {
    fn violations(&self, ctx: &ValidationContext) -> Vec<Violation> {
        Message::violations(self, ctx)
    }
}
