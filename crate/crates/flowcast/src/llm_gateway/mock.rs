//! Deterministic offline stand-in for the remote model.
//!
//! The mock recognizes which template a prompt was rendered from, recovers
//! the placeholder values from the rendered text, and answers by fixed rules:
//! a small date/time grammar for time structuring, first-N-token truncation
//! for summaries, keyword lookup for classification, and Jaccard similarity
//! of normalized token sets for relevance. Identical `(prompt, rules)` pairs
//! always yield identical answers.

use chrono::{Datelike, NaiveDate, NaiveTime, Weekday};
use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::text::{jaccard, normalized_token_set, truncate_tokens};

const UNPARSEABLE_TIME: &str = "Unable to extract sessions from the provided time description.";

/// Rules driving the mock gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRuleSet {
    /// Ordered `(event type name, keywords)` pairs; earlier entries win ties.
    pub keyword_map: Vec<(String, Vec<String>)>,
    /// Jaccard threshold at or above which a post counts as related.
    pub relevance_threshold: f64,
    /// Fallback token budget for summaries when the prompt states none.
    pub echo_budget: usize,
}

impl Default for MockRuleSet {
    fn default() -> Self {
        let kw = |words: &[&str]| words.iter().map(|w| w.to_string()).collect::<Vec<_>>();
        Self {
            keyword_map: vec![
                ("concert".into(), kw(&["concert", "演唱会", "演唱會", "音乐会", "live", "tour", "singer", "band", "orchestra"])),
                ("exhibition".into(), kw(&["exhibition", "展览", "展覽", "expo", "art fair", "gallery", "博览", "biennale"])),
                ("sports".into(), kw(&["sports", "match", "race", "marathon", "馬拉松", "马拉松", "比赛", "比賽", "tournament", "championship", "rugby", "sevens"])),
                ("fireworks".into(), kw(&["fireworks", "烟花", "煙花", "pyrotechnic", "烟火"])),
                ("fair".into(), kw(&["fair", "市集", "bazaar", "flea market", "carnival"])),
                ("performance".into(), kw(&["performance", "演出", "theatre", "theater", "drama", "dance", "ballet", "舞台"])),
                ("religious".into(), kw(&["religious", "temple", "佛诞", "廟會", "庙会", "procession", "pilgrimage"])),
            ],
            relevance_threshold: 0.15,
            echo_budget: 120,
        }
    }
}

impl MockRuleSet {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=1.0).contains(&self.relevance_threshold) {
            return Err(GatewayError::InvalidConfig(
                "relevance_threshold must be within [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn keywords_for(&self, type_name: &str) -> &[String] {
        self.keyword_map
            .iter()
            .find(|(name, _)| name.eq_ignore_ascii_case(type_name))
            .map(|(_, kws)| kws.as_slice())
            .unwrap_or(&[])
    }
}

/// Deterministic answer for a rendered prompt.
pub(super) fn answer(prompt: &str, rules: &MockRuleSet) -> String {
    if prompt.starts_with("Below is the raw description of an event's hosting time") {
        answer_time(prompt)
    } else if prompt.starts_with("Please summarize the event information") {
        answer_summary(prompt, rules)
    } else if prompt.starts_with("Below is a description of an event that occurred in") {
        answer_classify(prompt, rules)
    } else if prompt.starts_with("Below, you will find a description of an event") {
        answer_relevance(prompt, rules)
    } else {
        "I cannot answer that request.".to_string()
    }
}

static P1_FIELDS: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?s)event ID: (.*?), and event time: (.*?)\.\n\nYour task").unwrap()
});

fn answer_time(prompt: &str) -> String {
    let Some(caps) = P1_FIELDS.captures(prompt) else {
        return UNPARSEABLE_TIME.to_string();
    };
    let event_id = caps.get(1).unwrap().as_str().trim();
    let raw_time = caps.get(2).unwrap().as_str().trim();
    match structure_time_text(raw_time) {
        Some(sessions) if !sessions.is_empty() => sessions
            .iter()
            .enumerate()
            .map(|(i, (date, start, end))| {
                format!(
                    "{event_id} | {} | {} {} | {} {}",
                    i + 1,
                    date.format("%Y-%m-%d"),
                    start.format("%H:%M:%S"),
                    date.format("%Y-%m-%d"),
                    end.format("%H:%M:%S"),
                )
            })
            .collect::<Vec<_>>()
            .join("\n"),
        _ => UNPARSEABLE_TIME.to_string(),
    }
}

/// Parse a constrained event-time grammar into `(date, start, end)` rows.
///
/// Supported shapes, after dropping parentheticals like "(Sat-Sun)":
/// comma-separated segments of `D Mon YYYY`, `D1-D2 Mon YYYY`, or
/// `Every Wkd D1-D2 Mon YYYY`, with one optional trailing clock range such as
/// `8:00 pm - 8:10 pm` or `19:00-21:00` applying to every segment.
fn structure_time_text(raw: &str) -> Option<Vec<(NaiveDate, NaiveTime, NaiveTime)>> {
    let normalized: String = raw
        .chars()
        .map(|c| match c {
            '\u{2013}' | '\u{2014}' | '~' => '-',
            c => c,
        })
        .collect();
    let no_paren = strip_parentheticals(&normalized);
    let (clock, rest) = extract_clock_range(&no_paren);
    let (start_time, end_time) = clock.unwrap_or((
        NaiveTime::from_hms_opt(0, 0, 0).unwrap(),
        NaiveTime::from_hms_opt(23, 59, 59).unwrap(),
    ));
    let mut dates: Vec<NaiveDate> = Vec::new();
    for segment in rest.split(',') {
        let segment = segment.trim().trim_matches(|c: char| c == '.' || c == ';');
        if segment.is_empty() {
            continue;
        }
        dates.extend(parse_date_segment(segment)?);
    }
    if dates.is_empty() {
        return None;
    }
    dates.sort();
    dates.dedup();
    Some(dates.into_iter().map(|d| (d, start_time, end_time)).collect())
}

fn strip_parentheticals(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '(' | '（' => depth += 1,
            ')' | '）' => depth = depth.saturating_sub(1),
            c if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

static CLOCK_RANGE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"(?i)(\d{1,2}):(\d{2})(?::(\d{2}))?\s*(am|pm)?\s*-\s*(\d{1,2}):(\d{2})(?::(\d{2}))?\s*(am|pm)?",
    )
    .unwrap()
});

/// Find one clock range, return it plus the text with the range removed.
fn extract_clock_range(text: &str) -> (Option<(NaiveTime, NaiveTime)>, String) {
    let Some(caps) = CLOCK_RANGE.captures(text) else {
        return (None, text.to_string());
    };
    let get_num = |i: usize| caps.get(i).map(|m| m.as_str().parse::<u32>().unwrap());
    let meridian = |i: usize| caps.get(i).map(|m| m.as_str().to_ascii_lowercase());
    let end_mer = meridian(8);
    // "8:00 - 8:10 pm" style: the first time inherits the second's meridian.
    let start_mer = meridian(4).or_else(|| end_mer.clone());
    let start = build_time(get_num(1).unwrap(), get_num(2).unwrap(), get_num(3), start_mer);
    let end = build_time(get_num(5).unwrap(), get_num(6).unwrap(), get_num(7), end_mer);
    let all = caps.get(0).unwrap();
    let mut stripped = String::with_capacity(text.len());
    stripped.push_str(&text[..all.start()]);
    stripped.push_str(&text[all.end()..]);
    match (start, end) {
        (Some(s), Some(e)) => (Some((s, e)), stripped),
        _ => (None, text.to_string()),
    }
}

fn build_time(hour: u32, minute: u32, second: Option<u32>, meridian: Option<String>) -> Option<NaiveTime> {
    let hour = match meridian.as_deref() {
        Some("am") if hour == 12 => 0,
        Some("pm") if hour < 12 => hour + 12,
        _ => hour,
    };
    NaiveTime::from_hms_opt(hour, minute, second.unwrap_or(0))
}

static SEG_EVERY: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?i)^every\s+([a-z]{3,9})\s+(\d{1,2})\s*-\s*(\d{1,2})\s+([a-z]{3,9})\s+(\d{4})$")
        .unwrap()
});
static SEG_RANGE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i)^(\d{1,2})\s*-\s*(\d{1,2})\s+([a-z]{3,9})\s+(\d{4})$").unwrap());
static SEG_SINGLE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i)^(\d{1,2})\s+([a-z]{3,9})\s+(\d{4})$").unwrap());

fn parse_date_segment(segment: &str) -> Option<Vec<NaiveDate>> {
    if let Some(caps) = SEG_EVERY.captures(segment) {
        let weekday = parse_weekday(&caps[1])?;
        let (d1, d2) = (caps[2].parse::<u32>().ok()?, caps[3].parse::<u32>().ok()?);
        let month = parse_month(&caps[4])?;
        let year = caps[5].parse::<i32>().ok()?;
        let mut dates = Vec::new();
        for day in d1..=d2 {
            let date = NaiveDate::from_ymd_opt(year, month, day)?;
            if date.weekday() == weekday {
                dates.push(date);
            }
        }
        return (!dates.is_empty()).then_some(dates);
    }
    if let Some(caps) = SEG_RANGE.captures(segment) {
        let (d1, d2) = (caps[1].parse::<u32>().ok()?, caps[2].parse::<u32>().ok()?);
        let month = parse_month(&caps[3])?;
        let year = caps[4].parse::<i32>().ok()?;
        if d2 < d1 {
            return None;
        }
        return (d1..=d2).map(|d| NaiveDate::from_ymd_opt(year, month, d)).collect();
    }
    if let Some(caps) = SEG_SINGLE.captures(segment) {
        let day = caps[1].parse::<u32>().ok()?;
        let month = parse_month(&caps[2])?;
        let year = caps[3].parse::<i32>().ok()?;
        return Some(vec![NaiveDate::from_ymd_opt(year, month, day)?]);
    }
    None
}

fn parse_month(name: &str) -> Option<u32> {
    const MONTHS: [&str; 12] = [
        "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
    ];
    let lower = name.to_ascii_lowercase();
    MONTHS.iter().position(|m| lower.starts_with(m)).map(|i| i as u32 + 1)
}

fn parse_weekday(name: &str) -> Option<Weekday> {
    let lower = name.to_ascii_lowercase();
    let days = [
        ("mon", Weekday::Mon),
        ("tue", Weekday::Tue),
        ("wed", Weekday::Wed),
        ("thu", Weekday::Thu),
        ("fri", Weekday::Fri),
        ("sat", Weekday::Sat),
        ("sun", Weekday::Sun),
    ];
    days.iter().find(|(prefix, _)| lower.starts_with(prefix)).map(|(_, d)| *d)
}

static P2_FIELDS: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?s)web page: (.*?)\.\n\nRequirements are as follows:").unwrap());
static P2_BUDGET: Lazy<Regex> = Lazy::new(|| Regex::new(r"within (\d+) tokens").unwrap());

fn answer_summary(prompt: &str, rules: &MockRuleSet) -> String {
    let description = P2_FIELDS
        .captures(prompt)
        .map(|c| c.get(1).unwrap().as_str().trim().to_string())
        .unwrap_or_default();
    let budget = P2_BUDGET
        .captures(prompt)
        .and_then(|c| c[1].parse::<usize>().ok())
        .unwrap_or(rules.echo_budget);
    truncate_tokens(&description, budget)
}

static P3_FIELDS: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"(?s)called (.*?)\. Please match the events into the following categories: (.*?)\.\n\nOnly provide",
    )
    .unwrap()
});

fn answer_classify(prompt: &str, rules: &MockRuleSet) -> String {
    let Some(caps) = P3_FIELDS.captures(prompt) else {
        return "unknown".to_string();
    };
    let text = caps.get(1).unwrap().as_str().to_lowercase();
    let categories: Vec<String> = caps
        .get(2)
        .unwrap()
        .as_str()
        .split(',')
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty())
        .collect();
    let mut best: Option<(&str, usize)> = None;
    for (type_name, keywords) in &rules.keyword_map {
        if !categories.iter().any(|c| c.eq_ignore_ascii_case(type_name)) {
            continue;
        }
        let score = keywords.iter().filter(|kw| text.contains(&kw.to_lowercase())).count();
        if score > 0 && best.is_none_or(|(_, s)| score > s) {
            best = Some((type_name, score));
        }
    }
    match best {
        Some((name, _)) => name.to_string(),
        None => categories
            .iter()
            .find(|c| c.eq_ignore_ascii_case("performance"))
            .cloned()
            .unwrap_or_else(|| categories.first().cloned().unwrap_or_else(|| "unknown".into())),
    }
}

static P4_LINE: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?m)^- (Title|Type|Content|Hashtags): (.*)$").unwrap());

fn answer_relevance(prompt: &str, rules: &MockRuleSet) -> String {
    let Some((event_part, post_part)) = prompt.split_once("Social Media Post Details:") else {
        return "No".to_string();
    };
    let post_part = post_part.split("Criteria for Relevance:").next().unwrap_or(post_part);
    let mut event_text = String::new();
    let mut event_type = String::new();
    for caps in P4_LINE.captures_iter(event_part) {
        match &caps[1] {
            "Title" => {
                event_text.push_str(&caps[2]);
                event_text.push(' ');
            }
            "Type" => event_type = caps[2].to_string(),
            _ => {}
        }
    }
    for kw in rules.keywords_for(event_type.trim()) {
        event_text.push(' ');
        event_text.push_str(kw);
    }
    event_text.push(' ');
    event_text.push_str(&event_type);

    let mut post_text = String::new();
    for caps in P4_LINE.captures_iter(post_part) {
        if matches!(&caps[1], "Title" | "Content" | "Hashtags") {
            post_text.push_str(&caps[2]);
            post_text.push(' ');
        }
    }
    let similarity = jaccard(&normalized_token_set(&event_text), &normalized_token_set(&post_text));
    if similarity >= rules.relevance_threshold {
        "Yes".to_string()
    } else {
        "No".to_string()
    }
}
