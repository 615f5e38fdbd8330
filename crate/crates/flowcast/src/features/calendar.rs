//! Holiday and day-of-week features.
//!
//! Weekends are Saturday and Sunday. Day-of-week dummies omit Tuesday as the
//! reference category.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::FeatureError;

/// One public-holiday or school-vacation span, inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolidaySpan {
    pub name: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

/// Public-holiday and school-vacation calendar for the visitors' origin area.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalendarContext {
    holiday_spans: Vec<HolidaySpan>,
    school_spans: Vec<HolidaySpan>,
}

impl CalendarContext {
    /// Spans must be well-formed and non-overlapping within each list.
    pub fn new(
        mut holiday_spans: Vec<HolidaySpan>,
        mut school_spans: Vec<HolidaySpan>,
    ) -> Result<Self, FeatureError> {
        for list in [&mut holiday_spans, &mut school_spans] {
            list.sort_by_key(|s| s.start);
            for span in list.iter() {
                if span.end < span.start {
                    return Err(FeatureError::InvalidSpan(format!(
                        "{} ends {} before it starts {}",
                        span.name, span.end, span.start
                    )));
                }
            }
            for pair in list.windows(2) {
                if pair[1].start <= pair[0].end {
                    return Err(FeatureError::OverlappingSpans(format!(
                        "{} overlaps {}",
                        pair[0].name, pair[1].name
                    )));
                }
            }
        }
        Ok(Self { holiday_spans, school_spans })
    }

    pub fn holiday_spans(&self) -> &[HolidaySpan] {
        &self.holiday_spans
    }

    pub fn school_spans(&self) -> &[HolidaySpan] {
        &self.school_spans
    }

    fn check_coverage(&self, date: NaiveDate) -> Result<(), FeatureError> {
        let first = self.holiday_spans.first().ok_or(FeatureError::EmptyCalendar)?;
        let last = self.holiday_spans.last().unwrap();
        let margin = Duration::days(366);
        if date < first.start - margin || date > last.end + margin {
            return Err(FeatureError::CalendarOutOfRange(date));
        }
        Ok(())
    }
}

pub fn is_weekend(date: NaiveDate) -> bool {
    matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// The five holiday features for one date.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HolidayFeatures {
    /// Days from `date` through the holiday's end inclusive; 0 outside spans.
    pub holidays_remaining: i64,
    /// Weekday immediately preceding a span start.
    pub day_before_holiday: bool,
    /// Non-holiday weekday within 7 calendar days of a span boundary.
    pub week_near_holiday: bool,
    /// Working days to the closer span boundary; 0 inside a span.
    pub days_to_nearest_holiday: i64,
    pub school_holiday: bool,
}

/// Compute holiday features for `date` against the calendar.
pub fn holiday_features(
    date: NaiveDate,
    calendar: &CalendarContext,
) -> Result<HolidayFeatures, FeatureError> {
    calendar.check_coverage(date)?;
    let spans = calendar.holiday_spans();
    let inside = spans.iter().find(|s| s.start <= date && date <= s.end);
    let holidays_remaining = inside.map_or(0, |s| (s.end - date).num_days() + 1);

    let next_day = date + Duration::days(1);
    let day_before_holiday =
        !is_weekend(date) && spans.iter().any(|s| s.start == next_day);

    let week_near_holiday = !is_weekend(date)
        && inside.is_none()
        && spans.iter().any(|s| {
            let before = (s.start - date).num_days();
            let after = (date - s.end).num_days();
            (1..=7).contains(&before) || (1..=7).contains(&after)
        });

    let days_to_nearest_holiday = if inside.is_some() {
        0
    } else {
        let next_start = spans.iter().map(|s| s.start).filter(|&s| s > date).min();
        let prev_end = spans.iter().map(|s| s.end).filter(|&e| e < date).max();
        let forward = next_start.map(|target| working_days_between(date, target));
        let backward = prev_end.map(|target| working_days_between(target, date));
        match (forward, backward) {
            (Some(f), Some(b)) => f.min(b),
            (Some(f), None) => f,
            (None, Some(b)) => b,
            (None, None) => return Err(FeatureError::CalendarOutOfRange(date)),
        }
    };

    let school_holiday =
        calendar.school_spans().iter().any(|s| s.start <= date && date <= s.end);

    Ok(HolidayFeatures {
        holidays_remaining,
        day_before_holiday,
        week_near_holiday,
        days_to_nearest_holiday,
        school_holiday,
    })
}

/// Weekdays in the half-open interval `(from, to]`.
fn working_days_between(from: NaiveDate, to: NaiveDate) -> i64 {
    let mut count = 0;
    let mut day = from + Duration::days(1);
    while day <= to {
        if !is_weekend(day) {
            count += 1;
        }
        day += Duration::days(1);
    }
    count
}

/// Six day-of-week dummies in the order Mon, Wed, Thu, Fri, Sat, Sun.
/// Tuesday is the omitted reference category (all zeros).
pub fn dow_dummies(date: NaiveDate) -> [f64; 6] {
    let mut out = [0.0; 6];
    let slot = match date.weekday() {
        Weekday::Mon => Some(0),
        Weekday::Tue => None,
        Weekday::Wed => Some(1),
        Weekday::Thu => Some(2),
        Weekday::Fri => Some(3),
        Weekday::Sat => Some(4),
        Weekday::Sun => Some(5),
    };
    if let Some(i) = slot {
        out[i] = 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn span(name: &str, start: NaiveDate, end: NaiveDate) -> HolidaySpan {
        HolidaySpan { name: name.into(), start, end }
    }

    fn calendar_2024() -> CalendarContext {
        CalendarContext::new(
            vec![
                span("labor", date(2024, 5, 1), date(2024, 5, 5)),
                span("national", date(2024, 10, 1), date(2024, 10, 3)),
            ],
            vec![span("summer", date(2024, 7, 8), date(2024, 8, 31))],
        )
        .unwrap()
    }

    #[test]
    fn remaining_counts_through_span_end() {
        let cal = calendar_2024();
        assert_eq!(holiday_features(date(2024, 10, 1), &cal).unwrap().holidays_remaining, 3);
        assert_eq!(holiday_features(date(2024, 10, 3), &cal).unwrap().holidays_remaining, 1);
        assert_eq!(holiday_features(date(2024, 10, 4), &cal).unwrap().holidays_remaining, 0);
    }

    #[test]
    fn ordinary_weekday_far_from_holidays() {
        let cal = calendar_2024();
        // Wednesday 2024-07-31, inside school vacation but far from holidays.
        let f = holiday_features(date(2024, 7, 31), &cal).unwrap();
        assert_eq!(f.holidays_remaining, 0);
        assert!(!f.day_before_holiday);
        assert!(!f.week_near_holiday);
        assert!(f.days_to_nearest_holiday > 0);
        assert!(f.school_holiday);
        // And a plain Wednesday outside the school window too.
        let f = holiday_features(date(2024, 6, 12), &cal).unwrap();
        assert_eq!(
            (f.holidays_remaining, f.day_before_holiday, f.week_near_holiday, f.school_holiday),
            (0, false, false, false)
        );
        assert!(f.days_to_nearest_holiday > 0);
    }

    #[test]
    fn weekday_before_span_start_is_flagged() {
        let cal = calendar_2024();
        // 2024-09-30 is a Monday, the day before the national holiday.
        let f = holiday_features(date(2024, 9, 30), &cal).unwrap();
        assert!(f.day_before_holiday);
        assert!(f.week_near_holiday);
        assert_eq!(f.days_to_nearest_holiday, 1);
    }

    #[test]
    fn weekend_is_never_day_before_or_near() {
        let cal = calendar_2024();
        // 2024-09-28 is a Saturday within 7 days of the span start.
        let f = holiday_features(date(2024, 9, 28), &cal).unwrap();
        assert!(!f.day_before_holiday);
        assert!(!f.week_near_holiday);
    }

    #[test]
    fn week_near_applies_after_span_end() {
        let cal = calendar_2024();
        // 2024-10-04 is a Friday, one day after the span end.
        let f = holiday_features(date(2024, 10, 4), &cal).unwrap();
        assert!(f.week_near_holiday);
        assert_eq!(f.days_to_nearest_holiday, 1);
    }

    #[test]
    fn features_are_pure() {
        let cal = calendar_2024();
        let a = holiday_features(date(2024, 9, 30), &cal).unwrap();
        let b = holiday_features(date(2024, 9, 30), &cal).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coverage_is_bounded() {
        let cal = calendar_2024();
        assert!(matches!(
            holiday_features(date(2030, 1, 1), &cal),
            Err(FeatureError::CalendarOutOfRange(_))
        ));
        let empty = CalendarContext::new(vec![], vec![]).unwrap();
        assert!(matches!(
            holiday_features(date(2024, 1, 1), &empty),
            Err(FeatureError::EmptyCalendar)
        ));
    }

    #[test]
    fn overlapping_spans_are_rejected() {
        let err = CalendarContext::new(
            vec![
                span("a", date(2024, 5, 1), date(2024, 5, 5)),
                span("b", date(2024, 5, 5), date(2024, 5, 7)),
            ],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, FeatureError::OverlappingSpans(_)));
    }

    #[test]
    fn tuesday_is_the_reference_category() {
        // 2024-10-01 is a Tuesday.
        assert_eq!(dow_dummies(date(2024, 10, 1)), [0.0; 6]);
        // 2024-10-05 is a Saturday.
        assert_eq!(dow_dummies(date(2024, 10, 5)), [0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn one_week_of_dummies_sums_to_one_per_column() {
        let mut sums = [0.0; 6];
        for i in 0..7 {
            let d = dow_dummies(date(2024, 10, 7) + Duration::days(i));
            for (s, v) in sums.iter_mut().zip(d) {
                *s += v;
            }
        }
        assert_eq!(sums, [1.0; 6]);
    }
}
