use std::fmt;

use crate::error::{Error, Result};

/// Retinopathy severity on the five-point clinical scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiagnosisGrade(u8);

impl DiagnosisGrade {
    pub const COUNT: usize = 5;
    pub const NAMES: [&'static str; Self::COUNT] = ["no DR", "mild", "moderate", "severe", "proliferative"];

    pub fn new(value: u8) -> Result<Self> {
        if (value as usize) < Self::COUNT {
            Ok(Self(value))
        } else {
            Err(Error::Data(format!("diagnosis grade {value} outside 0..=4")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self.index()]
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..Self::COUNT as u8).map(Self)
    }
}

impl fmt::Display for DiagnosisGrade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<i64> for DiagnosisGrade {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        u8::try_from(v)
            .map_err(|_| Error::Data(format!("diagnosis grade {v} outside 0..=4")))
            .and_then(Self::new)
    }
}
