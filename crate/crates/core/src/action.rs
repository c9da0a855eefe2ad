use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One of the five discrete key-press controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ActionLabel {
    Forward,
    Left,
    Backward,
    Right,
    Idle,
}

impl ActionLabel {
    pub const ALL: [ActionLabel; 5] = [
        ActionLabel::Forward,
        ActionLabel::Left,
        ActionLabel::Backward,
        ActionLabel::Right,
        ActionLabel::Idle,
    ];

    /// Single-byte on-disk token: `W`, `A`, `S`, `D` or `0`.
    pub fn token(self) -> u8 {
        match self {
            ActionLabel::Forward => b'W',
            ActionLabel::Left => b'A',
            ActionLabel::Backward => b'S',
            ActionLabel::Right => b'D',
            ActionLabel::Idle => b'0',
        }
    }

    pub fn from_token(token: u8) -> Result<Self, Error> {
        match token {
            b'W' => Ok(ActionLabel::Forward),
            b'A' => Ok(ActionLabel::Left),
            b'S' => Ok(ActionLabel::Backward),
            b'D' => Ok(ActionLabel::Right),
            b'0' => Ok(ActionLabel::Idle),
            other => Err(Error::UnknownAction(String::from_utf8_lossy(&[other]).into_owned())),
        }
    }

    /// Dense index in `0..5`, used as the conditioning token id.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self, Error> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::UnknownAction(format!("index {index}")))
    }

    /// Desired ground-plane travel direction `(x, z)`, `None` for idle.
    pub fn direction(self) -> Option<[f64; 2]> {
        match self {
            ActionLabel::Forward => Some([0.0, 1.0]),
            ActionLabel::Backward => Some([0.0, -1.0]),
            ActionLabel::Left => Some([-1.0, 0.0]),
            ActionLabel::Right => Some([1.0, 0.0]),
            ActionLabel::Idle => None,
        }
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.token() as char)
    }
}

impl From<ActionLabel> for String {
    fn from(a: ActionLabel) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for ActionLabel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl FromStr for ActionLabel {
    type Err = Error;

    /// Accepts the disk tokens plus `I` and the long names.
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "W" | "w" | "forward" | "Forward" => Ok(ActionLabel::Forward),
            "A" | "a" | "left" | "Left" => Ok(ActionLabel::Left),
            "S" | "s" | "backward" | "Backward" => Ok(ActionLabel::Backward),
            "D" | "d" | "right" | "Right" => Ok(ActionLabel::Right),
            "0" | "I" | "i" | "idle" | "Idle" => Ok(ActionLabel::Idle),
            other => Err(Error::UnknownAction(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_five_distinct_tokens() {
        let mut tokens: Vec<u8> = ActionLabel::ALL.iter().map(|a| a.token()).collect();
        tokens.sort();
        tokens.dedup();
        assert_eq!(tokens.len(), 5);
        for a in ActionLabel::ALL {
            assert_eq!(ActionLabel::from_token(a.token()).unwrap(), a);
            assert_eq!(ActionLabel::from_index(a.index()).unwrap(), a);
        }
    }

    #[test]
    fn rejects_unknown() {
        assert!(matches!(ActionLabel::from_token(b'X'), Err(Error::UnknownAction(_))));
        assert!("Q".parse::<ActionLabel>().is_err());
        assert!(ActionLabel::from_index(5).is_err());
    }
}
