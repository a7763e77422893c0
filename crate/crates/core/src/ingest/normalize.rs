use chrono::NaiveDate;
use serde_json::Value;

use super::IngestError;

/// Field order of a non-ISO date value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DateOrder {
    MonthDayYear,
    DayMonthYear,
    YearMonthDay,
}

impl DateOrder {
    fn formats(self) -> &'static [&'static str] {
        match self {
            DateOrder::MonthDayYear => &["%m/%d/%Y", "%m-%d-%Y", "%m.%d.%Y"],
            DateOrder::DayMonthYear => &["%d/%m/%Y", "%d-%m-%Y", "%d.%m.%Y"],
            DateOrder::YearMonthDay => &["%Y/%m/%d", "%Y.%m.%d"],
        }
    }
}

/// Cleaning rules for one source path. Whitespace trimming and collapsing
/// always apply to strings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalizeRules {
    pub lowercase: bool,
    pub date: Option<DateOrder>,
}

impl NormalizeRules {
    /// Parses rule names: `lowercase`, `date`, `date:mdy`, `date:dmy`, `date:ymd`.
    pub fn parse(names: &[String]) -> Result<Self, String> {
        let mut rules = NormalizeRules::default();
        for name in names {
            match name.as_str() {
                "trim" | "collapse" => {}
                "lowercase" => rules.lowercase = true,
                "date" | "date:ymd" => rules.date = Some(DateOrder::YearMonthDay),
                "date:mdy" => rules.date = Some(DateOrder::MonthDayYear),
                "date:dmy" => rules.date = Some(DateOrder::DayMonthYear),
                other => return Err(other.to_string()),
            }
        }
        Ok(rules)
    }
}

/// Collapses internal whitespace runs into one space and trims the ends.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Applies, in order: trim, whitespace collapse, optional lowercase,
/// optional ISO-8601 date coercion. Non-string scalars pass through unless a
/// date rule is requested.
pub fn normalize(value: &Value, rules: &NormalizeRules, path: &str) -> Result<Value, IngestError> {
    let text = match value {
        Value::String(s) => s.clone(),
        Value::Number(_) | Value::Bool(_) if rules.date.is_none() => return Ok(value.clone()),
        Value::Number(n) => n.to_string(),
        other => {
            return Err(IngestError::NotScalar {
                path: path.to_string(),
                found: other.to_string(),
            })
        }
    };
    let mut text = collapse_whitespace(&text);
    if rules.lowercase {
        text = text.to_lowercase();
    }
    if let Some(order) = rules.date {
        text = coerce_date(&text, order).ok_or_else(|| IngestError::Normalization {
            path: path.to_string(),
            value: text.clone(),
            reason: "unparseable date".to_string(),
        })?;
    }
    Ok(Value::String(text))
}

/// ISO dates (and date-times) are always accepted regardless of `order`.
pub fn coerce_date(text: &str, order: DateOrder) -> Option<String> {
    let iso_part = text.split('T').next().unwrap_or(text);
    let parsed = NaiveDate::parse_from_str(iso_part, "%Y-%m-%d").ok().or_else(|| {
        order
            .formats()
            .iter()
            .find_map(|fmt| NaiveDate::parse_from_str(text, fmt).ok())
    })?;
    Some(parsed.format("%Y-%m-%d").to_string())
}
