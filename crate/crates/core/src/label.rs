use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stance of an opinion toward the target "climate change / global warming is
/// a serious concern". Discriminants follow the ordinal response coding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Disagree = 1,
    Neutral = 2,
    Agree = 3,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown stance label {0:?}")]
pub struct ParseStanceError(pub String);

impl Stance {
    /// Index order used for every length-3 array in the crate.
    pub const ALL: [Stance; 3] = [Stance::Disagree, Stance::Neutral, Stance::Agree];

    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_index(i: usize) -> Option<Stance> {
        Self::ALL.get(i).copied()
    }

    pub fn from_response(code: u8) -> Option<Stance> {
        match code {
            1 => Some(Stance::Disagree),
            2 => Some(Stance::Neutral),
            3 => Some(Stance::Agree),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Disagree => "disagree",
            Stance::Neutral => "neutral",
            Stance::Agree => "agree",
        }
    }

    pub fn opposite(self) -> Stance {
        match self {
            Stance::Agree => Stance::Disagree,
            Stance::Disagree => Stance::Agree,
            Stance::Neutral => Stance::Neutral,
        }
    }

    /// Argmax over a distribution indexed by [`Stance::index`]. Ties go to
    /// agree, then neutral, then disagree.
    pub fn argmax(dist: &[f64; 3]) -> Stance {
        let mut best = Stance::Agree;
        for s in [Stance::Neutral, Stance::Disagree] {
            if dist[s.index()] > dist[best.index()] {
                best = s;
            }
        }
        best
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stance {
    type Err = ParseStanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "agree" | "3" => Ok(Stance::Agree),
            "neutral" | "2" => Ok(Stance::Neutral),
            "disagree" | "1" => Ok(Stance::Disagree),
            other => Err(ParseStanceError(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_tie_prefers_agree_then_neutral() {
        assert_eq!(Stance::argmax(&[0.3, 0.35, 0.35]), Stance::Agree);
        assert_eq!(Stance::argmax(&[0.4, 0.4, 0.2]), Stance::Neutral);
        assert_eq!(Stance::argmax(&[0.5, 0.25, 0.25]), Stance::Disagree);
    }

    #[test]
    fn parse_accepts_codes_and_names() {
        assert_eq!("Agree".parse::<Stance>().unwrap(), Stance::Agree);
        assert_eq!("1".parse::<Stance>().unwrap(), Stance::Disagree);
        assert!("maybe".parse::<Stance>().is_err());
    }
}
