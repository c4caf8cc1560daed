use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the two imaging domains being matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    A,
    B,
}

impl Modality {
    pub fn other(self) -> Modality {
        match self {
            Modality::A => Modality::B,
            Modality::B => Modality::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Modality::A => 0,
            Modality::B => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::A => "A",
            Modality::B => "B",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Modality::A),
            "B" => Ok(Modality::B),
            other => Err(format!("unknown modality `{other}` (expected A or B)")),
        }
    }
}

/// Face half. Right-half jets are stored in the mirrored orientation order so
/// both halves share one feature frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Half {
    Left,
    Right,
}

impl Half {
    pub const BOTH: [Half; 2] = [Half::Left, Half::Right];

    pub fn index(self) -> usize {
        match self {
            Half::Left => 0,
            Half::Right => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Half::Left => "left",
            Half::Right => "right",
        }
    }
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Half {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Half::Left),
            "right" => Ok(Half::Right),
            other => Err(format!("unknown half `{other}` (expected left or right)")),
        }
    }
}
