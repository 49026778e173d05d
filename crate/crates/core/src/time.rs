//! Clock times at minute resolution.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MINUTES_PER_DAY: u16 = 24 * 60;

/// A time of day, stored as minutes after midnight (`0..1440`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeOfDay(u16);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid time of day `{0}`, expected HH:MM")]
pub struct InvalidTime(pub String);

impl TimeOfDay {
    pub fn new(hour: u16, minute: u16) -> Option<Self> {
        (hour < 24 && minute < 60).then_some(Self(hour * 60 + minute))
    }

    pub fn from_minutes(minutes: u16) -> Option<Self> {
        (minutes < MINUTES_PER_DAY).then_some(Self(minutes))
    }

    /// Wraps any signed minute count onto the 24 hour clock.
    pub fn from_minutes_wrapping(minutes: i64) -> Self {
        Self(minutes.rem_euclid(MINUTES_PER_DAY as i64) as u16)
    }

    pub fn minutes(self) -> u16 {
        self.0
    }

    pub fn hour(self) -> u16 {
        self.0 / 60
    }

    pub fn minute(self) -> u16 {
        self.0 % 60
    }

    /// Fractional hours after midnight, e.g. 09:30 -> 9.5.
    pub fn hours(self) -> f64 {
        f64::from(self.0) / 60.0
    }
}

impl FromStr for TimeOfDay {
    type Err = InvalidTime;

    /// Accepts `H:MM` or `HH:MM`; the hour must be 0-23 and the minute 00-59.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || InvalidTime(s.to_string());
        let (h, m) = s.trim().split_once(':').ok_or_else(err)?;
        let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
        if !digits(h) || h.len() > 2 || !digits(m) || m.len() != 2 {
            return Err(err());
        }
        let hour: u16 = h.parse().map_err(|_| err())?;
        let minute: u16 = m.parse().map_err(|_| err())?;
        Self::new(hour, minute).ok_or_else(err)
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.hour(), self.minute())
    }
}

impl Serialize for TimeOfDay {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeOfDay {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_padded_and_single_digit_hours() {
        assert_eq!(
            "07:15".parse::<TimeOfDay>().unwrap(),
            TimeOfDay::new(7, 15).unwrap()
        );
        assert_eq!(
            "7:15".parse::<TimeOfDay>().unwrap(),
            TimeOfDay::new(7, 15).unwrap()
        );
        assert_eq!("23:59".parse::<TimeOfDay>().unwrap().minutes(), 1439);
    }

    #[test]
    fn rejects_out_of_range_and_malformed() {
        for bad in [
            "24:00", "12:60", "1:5", "123:00", "", ":30", "12-30", "ab:cd", "12:3x", "-1:30",
        ] {
            assert!(bad.parse::<TimeOfDay>().is_err(), "{bad} should not parse");
        }
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(h in 0u16..24, m in 0u16..60) {
            let t = TimeOfDay::new(h, m).unwrap();
            prop_assert_eq!(t.to_string().parse::<TimeOfDay>().unwrap(), t);
        }

        #[test]
        fn never_coerces_invalid(h in 24u16..100, m in 0u16..100) {
            let text = format!("{h:02}:{m:02}");
            prop_assert!(text.parse::<TimeOfDay>().is_err());
        }
    }
}
