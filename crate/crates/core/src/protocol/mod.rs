//! Wire vocabulary shared by sensors, edge robots, cloud servers and the gateway.
//!
//! Every message is an immutable value with a single canonical encoding:
//! key-sorted JSON. Message size on a link is the encoded byte length.

mod codec;
mod messages;
mod sensor;
mod stage;
mod validate;

pub use codec::{decode, encode, DecodeError, Message, WIRE_VERSION};
pub use messages::*;
pub use sensor::{Interval, PhysicalBounds, SensorKind};
pub use stage::{CognitiveStage, HumorStyle, Modality, TherapyStage};
pub use validate::{RiskThresholds, Validate, ValidationContext, ValidationResult, Violation};
