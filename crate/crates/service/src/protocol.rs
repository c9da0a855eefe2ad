//! Binary frame messages and text control messages.

use serde::{Deserialize, Serialize};

use posemap_core::ActionLabel;

pub const FRAME_MAGIC: &[u8; 4] = b"PMFR";
/// Bytes of the fixed body fields before the payload.
pub const BODY_FIXED: usize = 4 + 1 + 1 + 2 + 4 + 24 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    #[default]
    Points,
    Splats,
}

impl PayloadKind {
    /// Floats per point.
    pub fn stride(self) -> usize {
        match self {
            PayloadKind::Points => 3,
            PayloadKind::Splats => posemap_core::splat::CHANNELS,
        }
    }

    fn code(self) -> u8 {
        match self {
            PayloadKind::Points => 0,
            PayloadKind::Splats => 1,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(PayloadKind::Points),
            1 => Some(PayloadKind::Splats),
            _ => None,
        }
    }
}

/// One stepped frame as sent to clients.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMessage {
    pub round: u32,
    pub action: ActionLabel,
    pub kind: PayloadKind,
    /// Actions replaced before they could be stepped, over the session's lifetime.
    pub dropped: u32,
    pub world_root: [f64; 3],
    pub payload: Vec<f32>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("frame message too short ({0} bytes)")]
    Short(usize),
    #[error("bad frame magic")]
    Magic,
    #[error("declared body length {declared} but {actual} bytes follow")]
    Length { declared: usize, actual: usize },
    #[error("unknown action token {0}")]
    Action(u8),
    #[error("unknown payload kind {0}")]
    Kind(u8),
    #[error("{count} points of stride {stride} do not fit a {bytes}-byte payload")]
    Payload { count: usize, stride: usize, bytes: usize },
}

impl FrameMessage {
    pub fn point_count(&self) -> usize {
        self.payload.len() / self.kind.stride()
    }

    /// `PMFR` | u32 body length | u32 round | u8 action | u8 kind | u16 reserved | u32 dropped |
    /// f64 x3 world root | u32 point count | f32 payload, all little-endian.
    pub fn encode(&self) -> Vec<u8> {
        let body = BODY_FIXED + 4 * self.payload.len();
        let mut out = Vec::with_capacity(8 + body);
        out.extend_from_slice(FRAME_MAGIC);
        out.extend_from_slice(&(body as u32).to_le_bytes());
        out.extend_from_slice(&self.round.to_le_bytes());
        out.push(self.action.token());
        out.push(self.kind.code());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&self.dropped.to_le_bytes());
        for c in self.world_root {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&(self.point_count() as u32).to_le_bytes());
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        if bytes.len() < 8 + BODY_FIXED {
            return Err(DecodeError::Short(bytes.len()));
        }
        if &bytes[0..4] != FRAME_MAGIC {
            return Err(DecodeError::Magic);
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let declared = u32_at(4) as usize;
        if declared != bytes.len() - 8 {
            return Err(DecodeError::Length { declared, actual: bytes.len() - 8 });
        }
        let round = u32_at(8);
        let action = ActionLabel::from_token(bytes[12]).map_err(|_| DecodeError::Action(bytes[12]))?;
        let kind = PayloadKind::from_code(bytes[13]).ok_or(DecodeError::Kind(bytes[13]))?;
        let dropped = u32_at(16);
        let world_root = [0, 1, 2].map(|k| f64::from_le_bytes(bytes[20 + 8 * k..28 + 8 * k].try_into().unwrap()));
        let count = u32_at(44) as usize;
        let data = &bytes[48..];
        if data.len() != count * kind.stride() * 4 {
            return Err(DecodeError::Payload { count, stride: kind.stride(), bytes: data.len() });
        }
        let payload = data.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { round, action, kind, dropped, world_root, payload })
    }
}

/// Inbound control message, e.g. `{"a":"W"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionMessage {
    pub a: ActionLabel,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(kind: PayloadKind) -> FrameMessage {
        let n = 7 * kind.stride();
        FrameMessage {
            round: 42,
            action: ActionLabel::Left,
            kind,
            dropped: 3,
            world_root: [1.5, -0.25, 1e-300],
            payload: (0..n).map(|i| i as f32 * 0.37 - 1.0).collect(),
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        for kind in [PayloadKind::Points, PayloadKind::Splats] {
            let m = sample(kind);
            let bytes = m.encode();
            let back = FrameMessage::decode(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.encode(), bytes);
            assert_eq!(back.point_count(), 7);
        }
    }

    #[test]
    fn rejects_inconsistent_payload() {
        let mut bytes = sample(PayloadKind::Points).encode();
        bytes[44] = 8;
        assert!(matches!(FrameMessage::decode(&bytes), Err(DecodeError::Payload { .. })));
        let bytes = sample(PayloadKind::Points).encode();
        assert!(matches!(FrameMessage::decode(&bytes[..bytes.len() - 4]), Err(DecodeError::Length { .. })));
        assert!(FrameMessage::decode(b"PMFR").is_err());
    }

    #[test]
    fn control_messages() {
        let m: ActionMessage = serde_json::from_str(r#"{"a":"W"}"#).unwrap();
        assert_eq!(m.a, ActionLabel::Forward);
        let idle: ActionMessage = serde_json::from_str(r#"{"a":"I"}"#).unwrap();
        assert_eq!(idle.a, ActionLabel::Idle);
        assert!(serde_json::from_str::<ActionMessage>(r#"{"a":"X"}"#).is_err());
    }
}
