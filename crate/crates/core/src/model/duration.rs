//! Millisecond durations as written in expressions and policy windows.

use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

/// Result of normalizing a duration literal to integer milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParsedDuration {
    pub ms: u64,
    /// The literal did not denote a whole number of milliseconds.
    pub rounded: bool,
}

fn unit_ms(unit: &str) -> Option<Decimal> {
    Some(Decimal::from(match unit {
        "ms" => 1u64,
        "s" => 1_000,
        "m" => 60_000,
        "h" => 3_600_000,
        "d" => 86_400_000,
        "w" => 604_800_000,
        _ => return None,
    }))
}

/// Parses `<decimal><unit>` with unit one of `ms`, `s`, `m`, `h`, `d`, `w`.
/// Conversion is exact decimal arithmetic, rounded to the nearest ms.
pub fn parse_duration(text: &str) -> Option<ParsedDuration> {
    let text = text.trim();
    let split = text.find(|c: char| c.is_ascii_alphabetic())?;
    let (number, unit) = text.split_at(split);
    if number.is_empty() || !number.chars().all(|c| c.is_ascii_digit() || c == '.') {
        return None;
    }
    let value = Decimal::from_str(number).ok()?;
    let exact = value.checked_mul(unit_ms(unit)?)?;
    let rounded = exact.round();
    Some(ParsedDuration {
        ms: rounded.to_u64()?,
        rounded: rounded != exact,
    })
}

/// Compact rendering using the largest unit that divides evenly, the form
/// Prometheus range selectors accept (`5m`, `1h`, `3d`).
pub fn format_duration(ms: u64) -> String {
    const UNITS: [(u64, &str); 5] = [
        (604_800_000, "w"),
        (86_400_000, "d"),
        (3_600_000, "h"),
        (60_000, "m"),
        (1_000, "s"),
    ];
    if ms == 0 {
        return "0s".to_string();
    }
    for (size, unit) in UNITS {
        if ms % size == 0 {
            return format!("{}{unit}", ms / size);
        }
    }
    format!("{ms}ms")
}
