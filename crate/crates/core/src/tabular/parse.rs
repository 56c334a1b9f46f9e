//! Value parsers shared by ingestion and the standardization procedures.

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

/// Parses a plain decimal number. Surrounding whitespace is ignored and
/// non-finite results are rejected.
pub fn parse_number(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    // Rust accepts "inf"/"nan" spellings; those are never valid cell numbers.
    if s.bytes().any(|b| b.is_ascii_alphabetic() && b != b'e' && b != b'E') {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a number written with a digit-group separator, e.g. `1,234.5`
/// with `group = ','` and `decimal = '.'`.
///
/// Grouping must be regular: a leading group of one to three digits followed
/// by groups of exactly three. Ungrouped integer parts are accepted as well.
pub fn parse_grouped_number(raw: &str, group: char, decimal: char) -> Option<f64> {
    if group == decimal {
        return None;
    }
    let s = raw.trim();
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match body.split_once(decimal) {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    if int_part.is_empty() {
        return None;
    }
    let groups: Vec<&str> = int_part.split(group).collect();
    let all_digits = |g: &str| !g.is_empty() && g.bytes().all(|b| b.is_ascii_digit());
    if groups.len() > 1 {
        if !(all_digits(groups[0]) && groups[0].len() <= 3) {
            return None;
        }
        if !groups[1..].iter().all(|g| g.len() == 3 && all_digits(g)) {
            return None;
        }
    } else if !all_digits(int_part) {
        return None;
    }
    let mut text = String::with_capacity(s.len());
    text.push_str(sign);
    text.extend(groups.iter().flat_map(|g| g.chars()));
    if let Some(frac) = frac_part {
        if !all_digits(frac) {
            return None;
        }
        text.push('.');
        text.push_str(frac);
    }
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn parse_bool(raw: &str) -> Option<bool> {
    let s = raw.trim();
    if s.eq_ignore_ascii_case("true") {
        Some(true)
    } else if s.eq_ignore_ascii_case("false") {
        Some(false)
    } else {
        None
    }
}

/// Named timestamp layouts accepted by type hints and `date_to_iso`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum TimestampPattern {
    #[serde(rename = "iso")]
    Iso,
    #[serde(rename = "YYYY-MM-DD")]
    YearMonthDay,
    #[serde(rename = "YYYY/MM/DD")]
    YearMonthDaySlash,
    #[serde(rename = "DD/MM/YYYY")]
    DayMonthYearSlash,
    #[serde(rename = "MM/DD/YYYY")]
    MonthDayYearSlash,
    #[serde(rename = "DD-MM-YYYY")]
    DayMonthYearDash,
    #[serde(rename = "DD.MM.YYYY")]
    DayMonthYearDot,
    #[serde(rename = "YYYY-MM-DD HH:MM:SS")]
    DateTimeSpace,
    #[serde(rename = "YYYY-MM-DDTHH:MM:SS")]
    DateTimeT,
}

impl TimestampPattern {
    fn layout(self) -> Option<(&'static str, bool)> {
        use TimestampPattern::*;
        Some(match self {
            Iso => return None,
            YearMonthDay => ("%Y-%m-%d", false),
            YearMonthDaySlash => ("%Y/%m/%d", false),
            DayMonthYearSlash => ("%d/%m/%Y", false),
            MonthDayYearSlash => ("%m/%d/%Y", false),
            DayMonthYearDash => ("%d-%m-%Y", false),
            DayMonthYearDot => ("%d.%m.%Y", false),
            DateTimeSpace => ("%Y-%m-%d %H:%M:%S", true),
            DateTimeT => ("%Y-%m-%dT%H:%M:%S", true),
        })
    }

    /// Parses `raw` into seconds since the Unix epoch (UTC).
    pub fn parse(self, raw: &str) -> Option<i64> {
        let s = raw.trim();
        match self.layout() {
            None => parse_iso_timestamp(s),
            Some((fmt, true)) => NaiveDateTime::parse_from_str(s, fmt)
                .ok()
                .map(|dt| dt.and_utc().timestamp()),
            Some((fmt, false)) => NaiveDate::parse_from_str(s, fmt)
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
                .map(|dt| dt.and_utc().timestamp()),
        }
    }
}

fn parse_iso_timestamp(s: &str) -> Option<i64> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0).map(|dt| dt.and_utc().timestamp());
    }
    let s = s.strip_suffix('Z').unwrap_or(s);
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .ok()
        .map(|dt| dt.and_utc().timestamp())
}

/// Renders epoch seconds as ISO 8601: a bare date at midnight, otherwise a
/// full UTC date-time.
pub fn render_timestamp(secs: i64) -> String {
    match DateTime::from_timestamp(secs, 0) {
        Some(dt) if secs.rem_euclid(86_400) == 0 => dt.format("%Y-%m-%d").to_string(),
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => secs.to_string(),
    }
}
