//! Day-indexed design matrices for the five feature sets.
//!
//! Every row describes one day: six day-of-week dummies, five holiday
//! features, three weather variables, the weighted-moving-average changing
//! rate of flows (computed from strictly earlier days), and — depending on
//! the feature set — per-type event counts or popularity aggregates. The
//! target is the day's flow.

pub mod calendar;
pub mod trend;

pub use calendar::{dow_dummies, holiday_features, CalendarContext, HolidayFeatures, HolidaySpan};
pub use trend::{changing_rate, wma};

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_catalog::{Event, EventType};
use crate::matrix::Matrix;
use crate::popularity::{daily_type_aggregate, AggregateKind, PopularityMetrics};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("insufficient history: need {needed} values, have {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("changing rate undefined: previous moving average is zero")]
    DegenerateBaseline,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{input} is missing {} date(s), first {:?}", missing.len(), missing.first())]
    CoverageGap { input: String, missing: Vec<NaiveDate> },
    #[error("date {0} is outside the calendar coverage")]
    CalendarOutOfRange(NaiveDate),
    #[error("overlapping calendar spans: {0}")]
    OverlappingSpans(String),
    #[error("invalid calendar span: {0}")]
    InvalidSpan(String),
    #[error("calendar has no public holiday spans")]
    EmptyCalendar,
    #[error("invalid range: start {0} after end {1}")]
    InvalidRange(NaiveDate, NaiveDate),
}

/// Daily weather snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub date: NaiveDate,
    pub rainfall_mm: f64,
    pub tmax_c: f64,
    pub typhoon: bool,
}

/// The five feature-set configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    /// Holidays, weather, and trend only.
    FS1,
    /// FS1 plus per-type event counts.
    FS2,
    /// FS1 plus per-type overall popularity.
    FS3,
    /// FS1 plus per-type promotional popularity.
    FS4,
    /// FS1 plus promotional and word-of-mouth popularity.
    FS5,
}

/// Event-type order used for all per-type columns.
pub const FEATURE_EVENT_TYPES: [EventType; 4] =
    [EventType::Concert, EventType::Exhibition, EventType::Sports, EventType::Fireworks];

/// Word-of-mouth columns cover multi-session-prone types only; fireworks are
/// excluded.
pub const WOM_EVENT_TYPES: [EventType; 3] =
    [EventType::Concert, EventType::Exhibition, EventType::Sports];

/// Column name of the trend feature (the only column derived from flows).
pub const TREND_COLUMN: &str = "wma_changing_rate";

impl FeatureSet {
    pub const ALL: [FeatureSet; 5] =
        [FeatureSet::FS1, FeatureSet::FS2, FeatureSet::FS3, FeatureSet::FS4, FeatureSet::FS5];

    pub fn name(&self) -> &'static str {
        match self {
            FeatureSet::FS1 => "FS1",
            FeatureSet::FS2 => "FS2",
            FeatureSet::FS3 => "FS3",
            FeatureSet::FS4 => "FS4",
            FeatureSet::FS5 => "FS5",
        }
    }

    pub fn parse(name: &str) -> Option<FeatureSet> {
        Self::ALL.iter().copied().find(|fs| fs.name().eq_ignore_ascii_case(name.trim()))
    }

    /// Deterministic column order: day-of-week, holiday, weather, trend,
    /// then the set-specific event columns.
    pub fn column_names(&self) -> Vec<String> {
        let mut cols: Vec<String> = vec![
            "dow_mon".into(),
            "dow_wed".into(),
            "dow_thu".into(),
            "dow_fri".into(),
            "dow_sat".into(),
            "dow_sun".into(),
            "holidays_remaining".into(),
            "day_before_holiday".into(),
            "week_near_holiday".into(),
            "days_to_nearest_holiday".into(),
            "school_holiday".into(),
            "rainfall_mm".into(),
            "tmax_c".into(),
            "typhoon".into(),
            TREND_COLUMN.into(),
        ];
        let per_type = |prefix: &str| {
            FEATURE_EVENT_TYPES.iter().map(move |t| format!("{prefix}_{}", t.name())).collect::<Vec<_>>()
        };
        match self {
            FeatureSet::FS1 => {}
            FeatureSet::FS2 => cols.extend(per_type("count")),
            FeatureSet::FS3 => cols.extend(per_type("overall")),
            FeatureSet::FS4 => cols.extend(per_type("promo")),
            FeatureSet::FS5 => {
                cols.extend(per_type("promo"));
                cols.extend(WOM_EVENT_TYPES.iter().map(|t| format!("wom_{}", t.name())));
            }
        }
        cols
    }

    pub fn n_columns(&self) -> usize {
        match self {
            FeatureSet::FS1 => 15,
            FeatureSet::FS2 | FeatureSet::FS3 | FeatureSet::FS4 => 19,
            FeatureSet::FS5 => 22,
        }
    }
}

/// A day-indexed design matrix with its target vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature_set: FeatureSet,
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<String>,
    pub values: Matrix,
    pub target: Vec<f64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.n_cols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Source data for matrix assembly.
pub struct AssemblyInputs<'a> {
    pub flows: &'a BTreeMap<NaiveDate, f64>,
    pub weather: &'a BTreeMap<NaiveDate, WeatherRecord>,
    pub calendar: &'a CalendarContext,
    pub events: &'a [Event],
    pub metrics: &'a [PopularityMetrics],
}

/// Assemble the design matrix for `range` (inclusive).
///
/// Flows must cover the range plus `wma_window + 1` days before its start;
/// the trend column for day `t` uses flows through day `t - 1` only, so
/// later flow values can never influence earlier rows.
pub fn assemble(
    range: (NaiveDate, NaiveDate),
    inputs: &AssemblyInputs<'_>,
    feature_set: FeatureSet,
    wma_window: usize,
) -> Result<FeatureMatrix, FeatureError> {
    let (start, end) = range;
    if end < start {
        return Err(FeatureError::InvalidRange(start, end));
    }
    let history_start = start - Duration::days(wma_window as i64 + 1);
    check_coverage("flows", inputs.flows.keys(), history_start, end)?;
    check_coverage("weather", inputs.weather.keys(), start, end)?;

    let columns = feature_set.column_names();
    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut target = Vec::new();

    let mut history: Vec<f64> = {
        let mut h = Vec::new();
        let mut day = history_start;
        while day < start {
            h.push(inputs.flows[&day]);
            day += Duration::days(1);
        }
        h
    };

    let mut day = start;
    while day <= end {
        let mut row = Vec::with_capacity(columns.len());
        row.extend_from_slice(&dow_dummies(day));
        let hol = holiday_features(day, inputs.calendar)?;
        row.push(hol.holidays_remaining as f64);
        row.push(hol.day_before_holiday as u8 as f64);
        row.push(hol.week_near_holiday as u8 as f64);
        row.push(hol.days_to_nearest_holiday as f64);
        row.push(hol.school_holiday as u8 as f64);
        let w = &inputs.weather[&day];
        row.push(w.rainfall_mm);
        row.push(w.tmax_c);
        row.push(w.typhoon as u8 as f64);
        row.push(changing_rate(&history, wma_window)?);
        let aggregate = |kind: AggregateKind, ty: EventType| {
            daily_type_aggregate(inputs.events, inputs.metrics, day, ty, kind)
        };
        match feature_set {
            FeatureSet::FS1 => {}
            FeatureSet::FS2 => {
                row.extend(FEATURE_EVENT_TYPES.iter().map(|&t| aggregate(AggregateKind::Count, t)));
            }
            FeatureSet::FS3 => {
                row.extend(FEATURE_EVENT_TYPES.iter().map(|&t| aggregate(AggregateKind::Overall, t)));
            }
            FeatureSet::FS4 => {
                row.extend(
                    FEATURE_EVENT_TYPES.iter().map(|&t| aggregate(AggregateKind::Promotional, t)),
                );
            }
            FeatureSet::FS5 => {
                row.extend(
                    FEATURE_EVENT_TYPES.iter().map(|&t| aggregate(AggregateKind::Promotional, t)),
                );
                row.extend(WOM_EVENT_TYPES.iter().map(|&t| aggregate(AggregateKind::Wom, t)));
            }
        }
        debug_assert_eq!(row.len(), columns.len());
        let flow = inputs.flows[&day];
        history.push(flow);
        target.push(flow);
        dates.push(day);
        rows.push(row);
        day += Duration::days(1);
    }

    Ok(FeatureMatrix { feature_set, dates, columns, values: Matrix::from_rows(&rows), target })
}

fn check_coverage<'a>(
    source: &str,
    available: impl Iterator<Item = &'a NaiveDate>,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<(), FeatureError> {
    let have: std::collections::BTreeSet<NaiveDate> = available.copied().collect();
    let mut missing = Vec::new();
    let mut day = start;
    while day <= end {
        if !have.contains(&day) {
            missing.push(day);
        }
        day += Duration::days(1);
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(FeatureError::CoverageGap { input: source.into(), missing })
    }
}
