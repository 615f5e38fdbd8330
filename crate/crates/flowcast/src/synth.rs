//! Deterministic synthetic corpus with planted, recoverable event effects.
//!
//! One seed produces the whole bundle: calendar, weather, events, posts,
//! relevance labels, flows, and a ground-truth decomposition that sums to
//! the emitted flow exactly. Effect coefficients enter only the flow
//! arithmetic, never the random draws, so changing a coefficient moves
//! flows without disturbing anything else.
//!
//! Post timing keeps one-step-ahead features leak-free: promotional posts
//! end the day before an event's first session, and experience posts land
//! late in the evening of the session they follow.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_catalog::{Event, EventSession, EventType};
use crate::features::{holiday_features, CalendarContext, HolidaySpan, WeatherRecord};
use crate::io::{FlowRow, RelevanceRecord};
use crate::popularity::{daily_type_aggregate, wom_popularity, AggregateKind, PopularityMetrics, Post};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
}

/// Event types that get generated, in a fixed order.
const GENERATED_TYPES: [EventType; 4] =
    [EventType::Concert, EventType::Exhibition, EventType::Sports, EventType::Fireworks];

/// Entry-point segments with their share of the base flow, of promotional
/// effects, and of word-of-mouth effects.
const SEGMENTS: [(&str, f64, f64, f64); 3] = [
    ("metro", 0.40, 0.50, 0.60),
    ("hsr", 0.35, 0.40, 0.30),
    ("airport", 0.25, 0.10, 0.10),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_days: usize,
    pub seed: u64,
    pub start_date: NaiveDate,
    /// Monday..Sunday base arrivals.
    pub weekly_base: [f64; 7],
    /// Flow multiplier adds this per remaining holiday day.
    pub holiday_uplift: f64,
    pub school_uplift: f64,
    /// Expected events per week by type.
    pub events_per_week: BTreeMap<EventType, f64>,
    /// Log-normal parameters of per-post engagement.
    pub engagement_log_mean: f64,
    pub engagement_log_sigma: f64,
    /// Flow gained per unit of promotional popularity on a session day.
    pub beta_promo: BTreeMap<EventType, f64>,
    /// Flow gained per unit of word-of-mouth popularity on a session day.
    pub beta_wom: BTreeMap<EventType, f64>,
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_days: 440,
            seed: 7,
            start_date: NaiveDate::from_ymd_opt(2023, 3, 1).unwrap(),
            weekly_base: [19000.0, 18500.0, 18800.0, 19200.0, 20500.0, 23500.0, 22500.0],
            holiday_uplift: 0.30,
            school_uplift: 0.12,
            events_per_week: [
                (EventType::Concert, 1.2),
                (EventType::Exhibition, 0.8),
                (EventType::Sports, 0.6),
                (EventType::Fireworks, 0.25),
            ]
            .into_iter()
            .collect(),
            engagement_log_mean: 4.3,
            engagement_log_sigma: 0.9,
            beta_promo: [
                (EventType::Concert, 4.0),
                (EventType::Exhibition, 0.8),
                (EventType::Sports, 0.5),
                (EventType::Fireworks, 2.0),
            ]
            .into_iter()
            .collect(),
            beta_wom: [
                (EventType::Concert, 3.0),
                (EventType::Exhibition, 1.5),
                (EventType::Sports, 0.8),
            ]
            .into_iter()
            .collect(),
            noise_sigma: 600.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_days < 30 {
            return Err(SynthError::ConfigInvalid("n_days must be >= 30".into()));
        }
        if self.noise_sigma < 0.0 || self.noise_sigma.is_nan() {
            return Err(SynthError::ConfigInvalid("noise_sigma must be >= 0".into()));
        }
        if self.events_per_week.values().any(|&r| r < 0.0) {
            return Err(SynthError::ConfigInvalid("event rates must be >= 0".into()));
        }
        if self.engagement_log_sigma < 0.0 {
            return Err(SynthError::ConfigInvalid("engagement_log_sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn end_date(&self) -> NaiveDate {
        self.start_date + Duration::days(self.n_days as i64 - 1)
    }
}

/// Per-day additive decomposition; the components sum to `flow` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthDay {
    pub date: NaiveDate,
    pub base: f64,
    pub holiday: f64,
    pub promo: BTreeMap<EventType, f64>,
    pub wom: BTreeMap<EventType, f64>,
    pub noise: f64,
    pub flow: f64,
}

impl GroundTruthDay {
    /// Canonical component sum used by the decomposition identity.
    pub fn component_sum(&self) -> f64 {
        let mut total = self.base + self.holiday;
        for v in self.promo.values() {
            total += v;
        }
        for v in self.wom.values() {
            total += v;
        }
        total + self.noise
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub beta_promo: BTreeMap<EventType, f64>,
    pub beta_wom: BTreeMap<EventType, f64>,
    pub days: Vec<GroundTruthDay>,
    /// Planted per-event popularity the pipeline should reproduce.
    pub planted: Vec<PopularityMetrics>,
}

/// Everything the generator emits, in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub events: Vec<Event>,
    pub posts: Vec<Post>,
    pub relevance: Vec<RelevanceRecord>,
    pub flows: Vec<FlowRow>,
    pub weather: Vec<WeatherRecord>,
    pub public_holidays: Vec<HolidaySpan>,
    pub school_holidays: Vec<HolidaySpan>,
    pub ground_truth: GroundTruth,
}

impl SynthCorpus {
    /// The total ("all") flow series.
    pub fn flow_series(&self) -> BTreeMap<NaiveDate, f64> {
        self.flows
            .iter()
            .filter(|r| r.segment.as_deref() == Some("all"))
            .map(|r| (r.date, r.arrivals))
            .collect()
    }

    pub fn calendar(&self) -> CalendarContext {
        CalendarContext::new(self.public_holidays.clone(), self.school_holidays.clone())
            .expect("generated spans are valid")
    }

    pub fn write(&self, paths: &CorpusPaths) -> Result<(), crate::io::IoError> {
        crate::io::write_events(&paths.events, &self.events)?;
        crate::io::write_posts(&paths.posts, &self.posts)?;
        crate::io::write_relevance(&paths.relevance, &self.relevance)?;
        crate::io::write_flows(&paths.flows, &self.flows)?;
        crate::io::write_weather(&paths.weather, &self.weather)?;
        crate::io::write_holidays(&paths.holidays, &self.public_holidays, &self.school_holidays)?;
        crate::io::write_json(&paths.ground_truth, &self.ground_truth)?;
        Ok(())
    }
}

/// Output locations for one corpus.
#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub events: std::path::PathBuf,
    pub posts: std::path::PathBuf,
    pub relevance: std::path::PathBuf,
    pub flows: std::path::PathBuf,
    pub weather: std::path::PathBuf,
    pub holidays: std::path::PathBuf,
    pub ground_truth: std::path::PathBuf,
}

impl CorpusPaths {
    pub fn in_dir(dir: &std::path::Path) -> Self {
        Self {
            events: dir.join("events.json"),
            posts: dir.join("posts.jsonl"),
            relevance: dir.join("relevance.csv"),
            flows: dir.join("flows.csv"),
            weather: dir.join("weather.csv"),
            holidays: dir.join("holidays.csv"),
            ground_truth: dir.join("ground_truth.json"),
        }
    }
}

fn public_holidays_for_year(year: i32) -> Vec<HolidaySpan> {
    let d = |m: u32, day: u32| NaiveDate::from_ymd_opt(year, m, day).unwrap();
    vec![
        HolidaySpan { name: format!("new-year-{year}"), start: d(1, 1), end: d(1, 1) },
        HolidaySpan { name: format!("spring-festival-{year}"), start: d(2, 10), end: d(2, 16) },
        HolidaySpan { name: format!("qingming-{year}"), start: d(4, 4), end: d(4, 6) },
        HolidaySpan { name: format!("labor-day-{year}"), start: d(5, 1), end: d(5, 5) },
        HolidaySpan { name: format!("dragon-boat-{year}"), start: d(6, 8), end: d(6, 10) },
        HolidaySpan { name: format!("national-day-{year}"), start: d(9, 29), end: d(10, 5) },
        HolidaySpan { name: format!("christmas-{year}"), start: d(12, 25), end: d(12, 25) },
    ]
}

fn school_holidays_for_year(year: i32) -> Vec<HolidaySpan> {
    let d = |m: u32, day: u32| NaiveDate::from_ymd_opt(year, m, day).unwrap();
    vec![
        HolidaySpan { name: format!("winter-vacation-{year}"), start: d(1, 22), end: d(2, 19) },
        HolidaySpan { name: format!("summer-vacation-{year}"), start: d(7, 9), end: d(8, 31) },
    ]
}

struct EventProfile {
    title_stem: &'static str,
    venue: &'static str,
    summary_stem: &'static str,
    start_time: NaiveTime,
    end_time: NaiveTime,
    session_gap_days: i64,
    mean_extra_sessions: f64,
    max_sessions: usize,
}

fn profile(event_type: EventType) -> EventProfile {
    let t = |h: u32, m: u32| NaiveTime::from_hms_opt(h, m, 0).unwrap();
    match event_type {
        EventType::Concert => EventProfile {
            title_stem: "Star Voices 演唱会 live tour",
            venue: "Harbour Coliseum",
            summary_stem: "A major pop concert 演唱会 with a full live band",
            start_time: t(19, 0),
            end_time: t(22, 0),
            session_gap_days: 1,
            mean_extra_sessions: 2.0,
            max_sessions: 6,
        },
        EventType::Exhibition => EventProfile {
            title_stem: "Harbour Art 展览 exhibition",
            venue: "Convention Centre",
            summary_stem: "An art exhibition 展览 of contemporary works",
            start_time: t(10, 0),
            end_time: t(18, 0),
            session_gap_days: 1,
            mean_extra_sessions: 5.0,
            max_sessions: 12,
        },
        EventType::Sports => EventProfile {
            title_stem: "City Cup 比赛 sports match",
            venue: "Grand Stadium",
            summary_stem: "A sports tournament 比赛 with visiting teams",
            start_time: t(14, 0),
            end_time: t(17, 0),
            session_gap_days: 2,
            mean_extra_sessions: 2.0,
            max_sessions: 6,
        },
        EventType::Fireworks => EventProfile {
            title_stem: "Harbour 烟花 fireworks display",
            venue: "Victoria Harbour",
            summary_stem: "A festival fireworks 烟花 display over the water",
            start_time: t(20, 0),
            end_time: t(20, 10),
            session_gap_days: 1,
            mean_extra_sessions: 0.0,
            max_sessions: 1,
        },
        _ => unreachable!("only the four generated types have profiles"),
    }
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).unwrap().sample(rng) as usize
}

/// Generate the full corpus for `cfg`. Identical configs yield identical
/// corpora.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = cfg.start_date;
    let end = cfg.end_date();

    // Calendar: fixed spans clipped to a margin around the corpus range.
    let mut public = Vec::new();
    let mut school = Vec::new();
    for year in start.year() - 1..=end.year() + 1 {
        public.extend(public_holidays_for_year(year));
        school.extend(school_holidays_for_year(year));
    }
    let margin = Duration::days(366);
    public.retain(|s| s.end >= start - margin && s.start <= end + margin);
    school.retain(|s| s.end >= start && s.start <= end);
    let calendar = CalendarContext::new(public.clone(), school.clone())?;

    // Events.
    let mut events: Vec<Event> = Vec::new();
    let n_weeks = cfg.n_days.div_ceil(7);
    let mut counters: BTreeMap<EventType, usize> = BTreeMap::new();
    for week in 0..n_weeks {
        for ty in GENERATED_TYPES {
            let rate = cfg.events_per_week.get(&ty).copied().unwrap_or(0.0);
            let count = poisson(&mut rng, rate);
            for _ in 0..count {
                let profile = profile(ty);
                let seq = counters.entry(ty).or_insert(0);
                *seq += 1;
                let seq = *seq;
                // First session needs room for promotional posts before it.
                let offset = rng.gen_range(0..7) as i64;
                let first_day = start + Duration::days((week * 7) as i64 + offset);
                if first_day < start + Duration::days(2) || first_day > end {
                    continue;
                }
                let extra = poisson(&mut rng, profile.mean_extra_sessions);
                let mut n_sessions = (1 + extra).min(profile.max_sessions);
                // Clip the run to the corpus range.
                while n_sessions > 1
                    && first_day + Duration::days(profile.session_gap_days * (n_sessions as i64 - 1))
                        > end
                {
                    n_sessions -= 1;
                }
                let event_id = format!("{}-{seq:03}", ty.name());
                let sessions: Vec<EventSession> = (0..n_sessions)
                    .map(|k| {
                        let day = first_day + Duration::days(profile.session_gap_days * k as i64);
                        EventSession {
                            event_id: event_id.clone(),
                            sub_id: k + 1,
                            start: NaiveDateTime::new(day, profile.start_time),
                            end: NaiveDateTime::new(day, profile.end_time),
                        }
                    })
                    .collect();
                events.push(Event {
                    event_id: event_id.clone(),
                    title: format!("{} #{seq}", profile.title_stem),
                    event_type: ty,
                    summary: format!("{} (edition {seq}).", profile.summary_stem),
                    venue: profile.venue.to_string(),
                    sessions,
                    source: None,
                });
            }
        }
    }

    // Posts and planted popularity.
    let engagement_dist = LogNormal::new(cfg.engagement_log_mean, cfg.engagement_log_sigma)
        .map_err(|e| SynthError::ConfigInvalid(e.to_string()))?;
    let draw_engagement = |rng: &mut ChaCha8Rng| -> u64 { 1 + engagement_dist.sample(rng) as u64 };
    let mut posts = Vec::new();
    let mut relevance = Vec::new();
    let mut planted = Vec::new();
    for event in &events {
        let first_start = event.sessions[0].start;
        let n = event.sessions.len();
        let mut post_seq = 0;
        let push_post = |rng: &mut ChaCha8Rng,
                             posts: &mut Vec<Post>,
                             relevance: &mut Vec<RelevanceRecord>,
                             created_at: NaiveDateTime,
                             text: String,
                             related: bool,
                             seq: &mut usize|
         -> u64 {
            *seq += 1;
            let engagement = draw_engagement(rng);
            let likes = engagement * 4 / 5;
            let collects = engagement - likes;
            let post_id = format!("p-{}-{seq:03}", event.event_id);
            posts.push(Post {
                post_id: post_id.clone(),
                author_id: format!("u{:05}", rng.gen_range(0..30000)),
                title: text.clone(),
                content: if related {
                    format!("{text} — {}", event.summary)
                } else {
                    text.clone()
                },
                hashtags: if related {
                    vec![event.title.clone(), event.event_type.name().to_string()]
                } else {
                    vec!["美食".into(), "週末".into()]
                },
                geotags: vec![],
                created_at,
                likes,
                collects,
            });
            relevance.push(RelevanceRecord {
                event_id: event.event_id.clone(),
                post_id,
                related: related as u8,
            });
            if related {
                engagement
            } else {
                0
            }
        };

        // Promotional posts, strictly before the first session day.
        let mut promotional = 0u64;
        let n_promo = 3 + poisson(&mut rng, 4.0);
        for _ in 0..n_promo {
            let days_before = 1 + rng.gen_range(0..54) as i64;
            let time = NaiveTime::from_hms_opt(10 + rng.gen_range(0..10), rng.gen_range(0..60), 0).unwrap();
            let created = NaiveDateTime::new(first_start.date() - Duration::days(days_before), time);
            promotional += push_post(
                &mut rng,
                &mut posts,
                &mut relevance,
                created,
                format!("不要错过 {}", event.title),
                true,
                &mut post_seq,
            );
        }

        // Experience posts in each inter-session window, on the session's
        // own evening.
        let mut wom_raw: Vec<u64> = vec![0; n.saturating_sub(1)];
        for (window, value) in wom_raw.iter_mut().enumerate() {
            let n_exp = poisson(&mut rng, 3.0);
            for _ in 0..n_exp {
                let session = &event.sessions[window];
                let time =
                    NaiveTime::from_hms_opt(22, 30 + rng.gen_range(0..29), 0).unwrap();
                let created = NaiveDateTime::new(session.start.date(), time);
                *value += push_post(
                    &mut rng,
                    &mut posts,
                    &mut relevance,
                    created,
                    format!("现场体验分享 {}", event.title),
                    true,
                    &mut post_seq,
                );
            }
        }

        // A few after-the-fact posts; they only count toward overall.
        let mut tail = 0u64;
        for _ in 0..poisson(&mut rng, 2.0) {
            let last = event.sessions.last().unwrap();
            let time = NaiveTime::from_hms_opt(22, 30 + rng.gen_range(0..29), 0).unwrap();
            let created = NaiveDateTime::new(last.start.date(), time);
            tail += push_post(
                &mut rng,
                &mut posts,
                &mut relevance,
                created,
                format!("回顾 {}", event.title),
                true,
                &mut post_seq,
            );
        }

        // Unrelated noise posts.
        if rng.gen_bool(0.7) {
            let day = start + Duration::days(rng.gen_range(0..cfg.n_days) as i64);
            let time = NaiveTime::from_hms_opt(12, rng.gen_range(0..60), 0).unwrap();
            push_post(
                &mut rng,
                &mut posts,
                &mut relevance,
                NaiveDateTime::new(day, time),
                "茶餐厅 weekend brunch 推荐".to_string(),
                false,
                &mut post_seq,
            );
        }

        let wom_per_session = wom_popularity(&wom_raw);
        let overall = promotional + wom_raw.iter().sum::<u64>() + tail;
        planted.push(PopularityMetrics {
            event_id: event.event_id.clone(),
            overall: overall as f64,
            promotional: promotional as f64,
            wom_per_session,
            wom_raw: wom_raw.iter().map(|&w| w as f64).collect(),
        });
    }

    // Weather (no planted effect on flows).
    let mut weather = Vec::new();
    for i in 0..cfg.n_days {
        let date = start + Duration::days(i as i64);
        let dry = rng.gen_bool(0.7);
        let rainfall_mm = if dry {
            0.0
        } else {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            ((-u.ln()) * 12.0 * 10.0).round() / 10.0
        };
        let doy = date.ordinal() as f64;
        let seasonal = 24.0 + 8.0 * ((doy - 120.0) / 365.0 * std::f64::consts::TAU).sin();
        let jitter: f64 = Normal::new(0.0, 1.5).unwrap().sample(&mut rng);
        let tmax_c = ((seasonal + jitter) * 10.0).round() / 10.0;
        let typhoon = rng.gen_bool(0.015);
        weather.push(WeatherRecord { date, rainfall_mm, tmax_c, typhoon });
    }

    // Flows with exact decomposition; noise drawn before coefficients apply.
    let noise_dist = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| SynthError::ConfigInvalid(e.to_string()))?;
    let mut flows = Vec::new();
    let mut days = Vec::new();
    for i in 0..cfg.n_days {
        let date = start + Duration::days(i as i64);
        let noise_draw = if cfg.noise_sigma > 0.0 { noise_dist.sample(&mut rng) } else { 0.0 };
        let dow = date.weekday().num_days_from_monday() as usize;
        let base = cfg.weekly_base[dow];
        let hol = holiday_features(date, &calendar)?;
        let uplift = cfg.holiday_uplift * hol.holidays_remaining as f64
            + cfg.school_uplift * hol.school_holiday as u8 as f64;
        let holiday_term = base * uplift;
        let mut promo_terms = BTreeMap::new();
        for ty in GENERATED_TYPES {
            let beta = cfg.beta_promo.get(&ty).copied().unwrap_or(0.0);
            let value =
                daily_type_aggregate(&events, &planted, date, ty, AggregateKind::Promotional);
            promo_terms.insert(ty, beta * value);
        }
        let mut wom_terms = BTreeMap::new();
        for ty in [EventType::Concert, EventType::Exhibition, EventType::Sports] {
            let beta = cfg.beta_wom.get(&ty).copied().unwrap_or(0.0);
            let value = daily_type_aggregate(&events, &planted, date, ty, AggregateKind::Wom);
            wom_terms.insert(ty, beta * value);
        }
        let deterministic = base
            + holiday_term
            + promo_terms.values().sum::<f64>()
            + wom_terms.values().sum::<f64>();
        let flow = (deterministic + noise_draw).round().max(0.0);

        // Segment split, each rounded; "all" is their exact sum.
        let mut total = 0.0;
        let event_total: f64 =
            promo_terms.values().sum::<f64>() + wom_terms.values().sum::<f64>();
        let base_total = flow - event_total;
        for (name, base_share, promo_share, _) in SEGMENTS {
            let value = (base_total * base_share + event_total * promo_share).round().max(0.0);
            flows.push(FlowRow { date, arrivals: value, segment: Some(name.to_string()) });
            total += value;
        }
        flows.push(FlowRow { date, arrivals: total, segment: Some("all".to_string()) });

        let mut day = GroundTruthDay {
            date,
            base,
            holiday: holiday_term,
            promo: promo_terms,
            wom: wom_terms,
            noise: 0.0,
            flow: total,
        };
        // Noise absorbs rounding so the components sum exactly to the flow.
        day.noise = total - (day.component_sum() - day.noise);
        days.push(day);
    }

    Ok(SynthCorpus {
        events,
        posts,
        relevance,
        flows,
        weather,
        public_holidays: public,
        school_holidays: school,
        ground_truth: GroundTruth {
            beta_promo: cfg.beta_promo.clone(),
            beta_wom: cfg.beta_wom.clone(),
            days,
            planted,
        },
    })
}
