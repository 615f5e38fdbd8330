//! Structured events, the prompt pipeline that produces them, and the
//! heuristic filter that keeps only events likely to draw cross-city
//! visitors.

use std::collections::BTreeSet;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::llm_gateway::{render, Gateway, GatewayError, TemplateId};
use crate::text::count_tokens;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("model output does not follow the 4-column session table: {detail}\n--- raw output ---\n{output}")]
    UnparseableTime { detail: String, output: String },
    #[error("model output is not one of the predefined event types: {output:?}")]
    Classification { output: String },
    #[error("{0} must be non-empty")]
    EmptyInput(&'static str),
    #[error("invalid event data: {0}")]
    Invalid(String),
}

/// Where a raw event record was scraped from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceTag {
    DedicatedSite,
    TourismBoard,
    MegaEvents,
    SportsList,
}

/// An event as scraped: free-text time, venue, and description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub event_id: String,
    pub title: String,
    pub raw_time_text: String,
    pub venue_text: String,
    pub raw_description: String,
    pub source: SourceTag,
}

/// One dated occurrence of an event. `sub_id` is 1-based and consecutive
/// within an event, in chronological order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSession {
    pub event_id: String,
    pub sub_id: usize,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Concert,
    Exhibition,
    Sports,
    Fireworks,
    Fair,
    Performance,
    Religious,
}

impl EventType {
    pub const ALL: [EventType; 7] = [
        EventType::Concert,
        EventType::Exhibition,
        EventType::Sports,
        EventType::Fireworks,
        EventType::Fair,
        EventType::Performance,
        EventType::Religious,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EventType::Concert => "concert",
            EventType::Exhibition => "exhibition",
            EventType::Sports => "sports",
            EventType::Fireworks => "fireworks",
            EventType::Fair => "fair",
            EventType::Performance => "performance",
            EventType::Religious => "religious",
        }
    }

    pub fn parse(name: &str) -> Option<EventType> {
        let trimmed = name.trim();
        Self::ALL.iter().copied().find(|t| t.name().eq_ignore_ascii_case(trimmed))
    }

    /// The predefined list as it appears in the classification prompt.
    pub fn prompt_list() -> String {
        Self::ALL.iter().map(|t| t.name()).collect::<Vec<_>>().join(", ")
    }
}

/// A fully structured event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event_id: String,
    pub title: String,
    pub event_type: EventType,
    pub summary: String,
    pub venue: String,
    pub sessions: Vec<EventSession>,
    #[serde(default)]
    pub source: Option<SourceTag>,
}

impl Event {
    pub fn n_sessions(&self) -> usize {
        self.sessions.len()
    }

    /// Check the structural invariants: sessions non-empty, each well-formed
    /// (start <= end), consecutive sub ids from 1, chronological order.
    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.event_id.trim().is_empty() {
            return Err(CatalogError::EmptyInput("event_id"));
        }
        if self.sessions.is_empty() {
            return Err(CatalogError::Invalid(format!("event {} has no sessions", self.event_id)));
        }
        for (i, s) in self.sessions.iter().enumerate() {
            if s.end < s.start {
                return Err(CatalogError::Invalid(format!(
                    "event {} session {} ends before it starts",
                    self.event_id,
                    i + 1
                )));
            }
            if s.sub_id != i + 1 {
                return Err(CatalogError::Invalid(format!(
                    "event {} sub ids are not consecutive from 1",
                    self.event_id
                )));
            }
        }
        for pair in self.sessions.windows(2) {
            if (pair[1].start, pair[1].sub_id) <= (pair[0].start, pair[0].sub_id) {
                return Err(CatalogError::Invalid(format!(
                    "event {} sessions are not in chronological order",
                    self.event_id
                )));
            }
        }
        Ok(())
    }
}

/// Validate a whole catalog: per-event invariants plus unique ids.
pub fn validate_catalog(events: &[Event]) -> Result<(), CatalogError> {
    let mut seen = BTreeSet::new();
    for event in events {
        event.validate()?;
        if !seen.insert(event.event_id.as_str()) {
            return Err(CatalogError::Invalid(format!("duplicate event id {}", event.event_id)));
        }
    }
    Ok(())
}

/// The three event-filtering heuristics: type allow-list, session cap, and
/// venue whitelist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRules {
    pub allowed_types: BTreeSet<EventType>,
    pub max_sessions: usize,
    /// Exact venue match after NFC normalization and case folding.
    /// An empty whitelist disables the venue rule.
    pub venue_whitelist: BTreeSet<String>,
}

impl Default for FilterRules {
    fn default() -> Self {
        Self {
            allowed_types: [
                EventType::Concert,
                EventType::Exhibition,
                EventType::Sports,
                EventType::Fireworks,
            ]
            .into_iter()
            .collect(),
            max_sessions: 30,
            venue_whitelist: BTreeSet::new(),
        }
    }
}

fn normalize_venue(venue: &str) -> String {
    venue.trim().nfc().collect::<String>().to_lowercase()
}

/// Structure a raw time description into chronologically ordered sessions.
///
/// The model must answer with one `id | sub id | start | end` line per
/// session ("YYYY-MM-DD hh:mm:ss" datetimes). Any deviation is an error that
/// carries the raw output; nothing is guessed.
pub fn structure_sessions(
    raw: &RawEvent,
    gateway: &dyn Gateway,
) -> Result<Vec<EventSession>, CatalogError> {
    if raw.raw_time_text.trim().is_empty() {
        return Err(CatalogError::EmptyInput("raw_time_text"));
    }
    let prompt = render(
        TemplateId::P1Time,
        &[("event ID", raw.event_id.as_str()), ("raw time description", raw.raw_time_text.as_str())],
    )?;
    let output = gateway.complete(&prompt)?;
    parse_session_table(&raw.event_id, &output)
}

fn parse_session_table(event_id: &str, output: &str) -> Result<Vec<EventSession>, CatalogError> {
    let err = |detail: String| CatalogError::UnparseableTime { detail, output: output.to_string() };
    let mut sessions = Vec::new();
    for (line_no, line) in output.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        // A single header row and a markdown rule line are tolerated.
        if line_no == 0 && lower.contains("start time") {
            continue;
        }
        if line.chars().all(|c| matches!(c, '-' | '|' | ':' | ' ')) {
            continue;
        }
        let cells: Vec<&str> = line.split('|').map(str::trim).collect();
        if cells.len() != 4 {
            return Err(err(format!("line {} has {} columns, expected 4", line_no + 1, cells.len())));
        }
        if cells[0] != event_id {
            return Err(err(format!("line {} id {:?} does not match event {:?}", line_no + 1, cells[0], event_id)));
        }
        let _declared_sub: usize = cells[1]
            .parse()
            .map_err(|_| err(format!("line {} sub id {:?} is not a positive integer", line_no + 1, cells[1])))?;
        let parse_dt = |cell: &str| {
            NaiveDateTime::parse_from_str(cell, "%Y-%m-%d %H:%M:%S")
                .map_err(|_| err(format!("line {} has malformed datetime {:?}", line_no + 1, cell)))
        };
        let start = parse_dt(cells[2])?;
        let end = parse_dt(cells[3])?;
        if end < start {
            return Err(err(format!("line {} ends before it starts", line_no + 1)));
        }
        sessions.push(EventSession { event_id: event_id.to_string(), sub_id: 0, start, end });
    }
    if sessions.is_empty() {
        return Err(err("no session rows found".into()));
    }
    Ok(renumber_sessions(sessions))
}

/// Sort by (start, end) and assign consecutive sub ids from 1.
pub fn renumber_sessions(mut sessions: Vec<EventSession>) -> Vec<EventSession> {
    sessions.sort_by_key(|s| (s.start, s.end));
    for (i, session) in sessions.iter_mut().enumerate() {
        session.sub_id = i + 1;
    }
    sessions
}

/// Summarize a raw description within `token_budget` tokens (whitespace/CJK
/// token proxy). The budget is enforced by truncation after completion.
pub fn summarize_description(
    raw_description: &str,
    gateway: &dyn Gateway,
    token_budget: usize,
    language: &str,
) -> Result<String, CatalogError> {
    if raw_description.trim().is_empty() {
        return Err(CatalogError::EmptyInput("raw_description"));
    }
    let budget_text = token_budget.to_string();
    let prompt = render(
        TemplateId::P2Summary,
        &[
            ("raw event description", raw_description),
            ("token usage", budget_text.as_str()),
            ("language", language),
        ],
    )?;
    let summary = gateway.complete(&prompt)?;
    let summary = if count_tokens(&summary) > token_budget {
        crate::text::truncate_tokens(&summary, token_budget)
    } else {
        summary.trim().to_string()
    };
    if summary.is_empty() {
        return Err(CatalogError::EmptyInput("summary"));
    }
    Ok(summary)
}

/// Classify an event from its title and summary into one of the predefined
/// types. Unrecognized model output is an error, never a coercion.
pub fn classify(
    title: &str,
    summary: &str,
    gateway: &dyn Gateway,
) -> Result<EventType, CatalogError> {
    if summary.trim().is_empty() {
        return Err(CatalogError::EmptyInput("summary"));
    }
    let type_list = EventType::prompt_list();
    let prompt = render(
        TemplateId::P3Classify,
        &[
            ("study area", "the study area"),
            ("event title", title),
            ("summarized event description", summary),
            ("predefined event types", type_list.as_str()),
        ],
    )?;
    let output = gateway.complete(&prompt)?;
    EventType::parse(&output).ok_or(CatalogError::Classification { output })
}

/// Keep events whose type is allowed, whose session count is within the cap,
/// and whose venue is whitelisted (skipped when the whitelist is empty).
/// Input order is preserved.
pub fn filter_events(events: &[Event], rules: &FilterRules) -> Vec<Event> {
    let whitelist: BTreeSet<String> =
        rules.venue_whitelist.iter().map(|v| normalize_venue(v)).collect();
    events
        .iter()
        .filter(|e| {
            rules.allowed_types.contains(&e.event_type)
                && e.sessions.len() <= rules.max_sessions
                && (whitelist.is_empty() || whitelist.contains(&normalize_venue(&e.venue)))
        })
        .cloned()
        .collect()
}
