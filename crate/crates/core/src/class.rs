use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const NUM_CLASSES: usize = 7;

/// Motion classes. `NoMovement` is the rest class that rejection falls back to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
#[repr(u8)]
pub enum Class {
    NoMovement = 0,
    WristFlexion = 1,
    WristExtension = 2,
    WristPronation = 3,
    WristSupination = 4,
    HandClose = 5,
    HandOpen = 6,
}

impl Class {
    pub const ALL: [Class; NUM_CLASSES] = [
        Class::NoMovement,
        Class::WristFlexion,
        Class::WristExtension,
        Class::WristPronation,
        Class::WristSupination,
        Class::HandClose,
        Class::HandOpen,
    ];

    pub const NM: Class = Class::NoMovement;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Class> {
        Class::ALL.get(i).copied()
    }

    pub fn abbrev(self) -> &'static str {
        match self {
            Class::NoMovement => "NM",
            Class::WristFlexion => "WF",
            Class::WristExtension => "WE",
            Class::WristPronation => "WP",
            Class::WristSupination => "WS",
            Class::HandClose => "HC",
            Class::HandOpen => "HO",
        }
    }

    pub fn is_rest(self) -> bool {
        self == Class::NoMovement
    }
}

impl TryFrom<u8> for Class {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Class::from_index(v as usize).ok_or_else(|| format!("class id {v} out of range 0..{NUM_CLASSES}"))
    }
}

impl From<Class> for u8 {
    fn from(c: Class) -> u8 {
        c as u8
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

impl FromStr for Class {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(i) = s.parse::<u8>() {
            return Class::try_from(i);
        }
        Class::ALL
            .iter()
            .copied()
            .find(|c| c.abbrev().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown class {s:?}"))
    }
}
