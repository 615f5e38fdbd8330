//! Social-media popularity: engagement counting, top-post selection,
//! promotional vs. experience splits, and word-of-mouth redistribution
//! across event sessions.
//!
//! Word-of-mouth generated between consecutive sessions is spread evenly
//! over the remaining sessions: with `N` sessions, the engagement collected
//! between session `n'` and `n'+1` contributes `WOM_{n'} / (N - n')` to each
//! of sessions `n'+1 ..= N`. Internally the redistribution is kept as exact
//! integer numerators over a common denominator so the conservation law
//! `Σ WOMP = Σ WOM` can be checked without floating-point slack.

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_catalog::{Event, EventSession, EventType};

#[derive(Debug, Error)]
pub enum PopularityError {
    #[error("operation requires an exhibition, got {0:?}")]
    TypeMismatch(EventType),
    #[error("event has no sessions")]
    NoSessions,
}

/// A social-media post with engagement counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: String,
    pub author_id: String,
    pub title: String,
    pub content: String,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default)]
    pub geotags: Vec<String>,
    pub created_at: NaiveDateTime,
    pub likes: u64,
    pub collects: u64,
}

/// Per-event popularity: overall, promotional, and per-session word-of-mouth.
///
/// `wom_per_session` is aligned with sub ids (index 0 = session 1, always 0);
/// `wom_raw` holds the `N-1` inter-session engagement sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityMetrics {
    pub event_id: String,
    pub overall: f64,
    pub promotional: f64,
    pub wom_per_session: Vec<f64>,
    pub wom_raw: Vec<f64>,
}

/// Post selection parameters: top-g cap and the pre-event temporal threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub top_g: usize,
    pub temporal_threshold_days: i64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { top_g: 100, temporal_threshold_days: 60 }
    }
}

impl SelectionConfig {
    pub fn temporal_threshold(&self) -> Duration {
        Duration::days(self.temporal_threshold_days)
    }
}

/// Likes plus collects.
pub fn engagement(post: &Post) -> u64 {
    post.likes + post.collects
}

/// At most `top_g` posts sorted by likes descending; ties broken by
/// collects descending, then created_at ascending, then post id ascending.
pub fn select_top_posts(posts: &[Post], cfg: &SelectionConfig) -> Vec<Post> {
    let mut sorted: Vec<Post> = posts.to_vec();
    sorted.sort_by(|a, b| {
        b.likes
            .cmp(&a.likes)
            .then(b.collects.cmp(&a.collects))
            .then(a.created_at.cmp(&b.created_at))
            .then(a.post_id.cmp(&b.post_id))
    });
    sorted.truncate(cfg.top_g);
    sorted
}

/// Promotional and per-window experience posts.
#[derive(Debug, Clone, PartialEq)]
pub struct PostSplit {
    /// Posts within the threshold window before the first session.
    pub promotional: Vec<Post>,
    /// `experience[i]` holds posts between session `i+1` and session `i+2`
    /// (window `n' = i+1`); empty when sessions overlap.
    pub experience: Vec<Vec<Post>>,
}

/// Assign posts to the promotional window or one inter-session window.
///
/// Promotional: `first_start - threshold <= created < first_start`.
/// Window `n'`: `end(n') <= created < start(n'+1)` (empty if the sessions
/// overlap). Posts outside every window are dropped, so each retained post
/// lands in exactly one bucket.
pub fn split_pre_post(posts: &[Post], sessions: &[EventSession], cfg: &SelectionConfig) -> PostSplit {
    assert!(!sessions.is_empty(), "sessions must be non-empty");
    let first_start = sessions[0].start;
    let promo_open = first_start - cfg.temporal_threshold();
    let n = sessions.len();
    let mut split = PostSplit { promotional: Vec::new(), experience: vec![Vec::new(); n.saturating_sub(1)] };
    for post in posts {
        let t = post.created_at;
        if t >= promo_open && t < first_start {
            split.promotional.push(post.clone());
            continue;
        }
        for i in 0..n.saturating_sub(1) {
            if t >= sessions[i].end && t < sessions[i + 1].start {
                split.experience[i].push(post.clone());
                break;
            }
        }
    }
    split
}

/// Exact word-of-mouth redistribution: `womp_n = numerators[n-1] / denominator`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WomRedistribution {
    pub numerators: Vec<u128>,
    pub denominator: u128,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm_upto(n: u128) -> u128 {
    (1..=n).fold(1u128, |acc, k| acc / gcd(acc, k) * k)
}

/// Redistribute inter-session engagement sums over later sessions, exactly.
///
/// `wom[i]` is the engagement between session `i+1` and `i+2`; the result has
/// one numerator per session, the first always zero.
pub fn wom_redistribute(wom: &[u64]) -> WomRedistribution {
    let n_sessions = wom.len() + 1;
    if n_sessions == 1 {
        return WomRedistribution { numerators: vec![0], denominator: 1 };
    }
    let denominator = lcm_upto((n_sessions - 1) as u128);
    let mut numerators = vec![0u128; n_sessions];
    for (idx, &w) in wom.iter().enumerate() {
        let window = idx + 1; // n'
        let share = w as u128 * (denominator / (n_sessions - window) as u128);
        for num in numerators.iter_mut().skip(window) {
            *num += share;
        }
    }
    numerators[0] = 0;
    WomRedistribution { numerators, denominator }
}

/// Word-of-mouth popularity per session as floats; `[0.0]` for single-session
/// events.
pub fn wom_popularity(wom: &[u64]) -> Vec<f64> {
    let r = wom_redistribute(wom);
    r.numerators.iter().map(|&n| n as f64 / r.denominator as f64).collect()
}

/// Full metrics for one event from its relevance-filtered posts.
///
/// `cutoff`, when set, drops posts created at or after it before anything
/// else happens, so popularity can be measured as of a forecast origin.
pub fn compute_metrics(
    event: &Event,
    related_posts: &[Post],
    cfg: &SelectionConfig,
    cutoff: Option<NaiveDateTime>,
) -> Result<PopularityMetrics, PopularityError> {
    if event.sessions.is_empty() {
        return Err(PopularityError::NoSessions);
    }
    let visible: Vec<Post> = match cutoff {
        Some(c) => related_posts.iter().filter(|p| p.created_at < c).cloned().collect(),
        None => related_posts.to_vec(),
    };
    let selected = select_top_posts(&visible, cfg);

    let first_start = event.sessions[0].start;
    let last_end = event.sessions.last().unwrap().end;
    let overall_open = first_start - cfg.temporal_threshold();
    let overall_close = last_end + cfg.temporal_threshold();
    let overall: u64 = selected
        .iter()
        .filter(|p| p.created_at >= overall_open && p.created_at < overall_close)
        .map(engagement)
        .sum();

    let split = split_pre_post(&selected, &event.sessions, cfg);
    let promotional: u64 = split.promotional.iter().map(engagement).sum();
    let wom_raw: Vec<u64> =
        split.experience.iter().map(|w| w.iter().map(engagement).sum()).collect();
    let wom_per_session = wom_popularity(&wom_raw);

    Ok(PopularityMetrics {
        event_id: event.event_id.clone(),
        overall: overall as f64,
        promotional: promotional as f64,
        wom_per_session,
        wom_raw: wom_raw.iter().map(|&w| w as f64).collect(),
    })
}

/// What to aggregate per day and event type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateKind {
    Count,
    Overall,
    Promotional,
    Wom,
}

/// Sum a popularity measure over events of `event_type` active on `date`.
///
/// Count / overall / promotional contribute once per event with a session
/// that day; wom sums the word-of-mouth popularity of exactly the session(s)
/// held that day.
pub fn daily_type_aggregate(
    events: &[Event],
    metrics: &[PopularityMetrics],
    date: NaiveDate,
    event_type: EventType,
    kind: AggregateKind,
) -> f64 {
    let metric_for = |id: &str| metrics.iter().find(|m| m.event_id == id);
    let mut total = 0.0;
    for event in events.iter().filter(|e| e.event_type == event_type) {
        let todays: Vec<&EventSession> =
            event.sessions.iter().filter(|s| s.start.date() == date).collect();
        if todays.is_empty() {
            continue;
        }
        match kind {
            AggregateKind::Count => total += 1.0,
            AggregateKind::Overall => {
                total += metric_for(&event.event_id).map_or(0.0, |m| m.overall);
            }
            AggregateKind::Promotional => {
                total += metric_for(&event.event_id).map_or(0.0, |m| m.promotional);
            }
            AggregateKind::Wom => {
                if let Some(m) = metric_for(&event.event_id) {
                    for s in todays {
                        total += m.wom_per_session.get(s.sub_id - 1).copied().unwrap_or(0.0);
                    }
                }
            }
        }
    }
    total
}

/// Split an exhibition's word-of-mouth popularity at the fourth calendar day.
///
/// `early` sums sessions starting within the first four calendar days from
/// the first session's date; `late` is the remainder.
pub fn exhibition_wom_split(
    event: &Event,
    womp: &[f64],
) -> Result<(f64, f64), PopularityError> {
    if event.event_type != EventType::Exhibition {
        return Err(PopularityError::TypeMismatch(event.event_type));
    }
    if event.sessions.is_empty() {
        return Err(PopularityError::NoSessions);
    }
    let first_date = event.sessions[0].start.date();
    let boundary = first_date + Duration::days(4);
    let mut early = 0.0;
    let mut late = 0.0;
    for session in &event.sessions {
        let value = womp.get(session.sub_id - 1).copied().unwrap_or(0.0);
        if session.start.date() < boundary {
            early += value;
        } else {
            late += value;
        }
    }
    Ok((early, late))
}
