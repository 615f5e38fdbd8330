//! Property tests for the invariants that hold over arbitrary inputs.

use chrono::{Duration, NaiveDate};
use proptest::collection::vec;
use proptest::prelude::*;

use flowcast::event_catalog::{filter_events, Event, EventSession, EventType, FilterRules};
use flowcast::models::sample_weights;
use flowcast::popularity::{
    split_pre_post, wom_popularity, wom_redistribute, Post, SelectionConfig,
};
use flowcast::rolling::{score, EvalError};

fn day(offset: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 1).unwrap() + Duration::days(offset)
}

fn arb_event(idx: usize, type_idx: usize, n_sessions: usize, venue_idx: usize) -> Event {
    let ty = EventType::ALL[type_idx % EventType::ALL.len()];
    let venues = ["Coliseum", "Stadium", "Mall", "Park"];
    let sessions = (0..n_sessions)
        .map(|k| EventSession {
            event_id: format!("e{idx}"),
            sub_id: k + 1,
            start: day(k as i64).and_hms_opt(19, 0, 0).unwrap(),
            end: day(k as i64).and_hms_opt(22, 0, 0).unwrap(),
        })
        .collect();
    Event {
        event_id: format!("e{idx}"),
        title: format!("event {idx}"),
        event_type: ty,
        summary: "s".into(),
        venue: venues[venue_idx % venues.len()].into(),
        sessions,
        source: None,
    }
}

proptest! {
    /// Redistributed word-of-mouth conserves total engagement exactly in the
    /// scaled-integer form and to float tolerance in the f64 view.
    #[test]
    fn womp_conserves_mass(wom in vec(0u64..100_000, 0..12)) {
        let r = wom_redistribute(&wom);
        let lhs: u128 = r.numerators.iter().sum();
        let rhs: u128 = wom.iter().map(|&w| w as u128).sum::<u128>() * r.denominator;
        prop_assert_eq!(lhs, rhs);

        let floats = wom_popularity(&wom);
        prop_assert_eq!(floats[0], 0.0);
        let float_sum: f64 = floats.iter().sum();
        let total: f64 = wom.iter().map(|&w| w as f64).sum();
        prop_assert!((float_sum - total).abs() <= 1e-9 * total.max(1.0));
        prop_assert!(floats.iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    /// Filtering never lets a disallowed type through, and repeating it
    /// changes nothing.
    #[test]
    fn filter_is_sound_and_idempotent(
        shape in vec((0usize..7, 1usize..40, 0usize..4), 0..60),
        allowed_mask in 1u8..127,
        max_sessions in 1usize..35,
    ) {
        let catalog: Vec<Event> = shape
            .iter()
            .enumerate()
            .map(|(i, &(ty, n, venue))| arb_event(i, ty, n, venue))
            .collect();
        let allowed_types = EventType::ALL
            .iter()
            .enumerate()
            .filter(|(i, _)| allowed_mask & (1 << i) != 0)
            .map(|(_, &t)| t)
            .collect();
        let rules = FilterRules { allowed_types, max_sessions, venue_whitelist: Default::default() };
        let kept = filter_events(&catalog, &rules);
        prop_assert!(kept.iter().all(|e| rules.allowed_types.contains(&e.event_type)));
        prop_assert!(kept.iter().all(|e| e.sessions.len() <= max_sessions));
        prop_assert_eq!(filter_events(&kept, &rules), kept);
    }

    /// Recency weights are non-decreasing and end at exactly 1.
    #[test]
    fn weights_are_monotone_with_unit_tail(t_len in 1usize..2000, decay in 0.0f64..0.1) {
        let w = sample_weights(t_len, decay);
        prop_assert_eq!(w.len(), t_len);
        prop_assert!(w.windows(2).all(|p| p[0] <= p[1]));
        prop_assert_eq!(*w.last().unwrap(), 1.0);
        prop_assert!(w.iter().all(|v| *v >= 0.0));
    }

    /// Every retained post lands in exactly one split bucket.
    #[test]
    fn post_split_partitions_retained_posts(
        n_sessions in 1usize..8,
        offsets in vec(-70i64 * 24..10 * 24, 0..80),
    ) {
        let sessions: Vec<EventSession> = (0..n_sessions)
            .map(|k| EventSession {
                event_id: "e".into(),
                sub_id: k + 1,
                start: day(2 * k as i64).and_hms_opt(19, 0, 0).unwrap(),
                end: day(2 * k as i64).and_hms_opt(22, 0, 0).unwrap(),
            })
            .collect();
        let posts: Vec<Post> = offsets
            .iter()
            .enumerate()
            .map(|(i, &hours)| Post {
                post_id: format!("p{i}"),
                author_id: "u".into(),
                title: String::new(),
                content: String::new(),
                hashtags: vec![],
                geotags: vec![],
                created_at: sessions[0].start + Duration::hours(hours),
                likes: i as u64,
                collects: 0,
            })
            .collect();
        let split = split_pre_post(&posts, &sessions, &SelectionConfig::default());
        for post in &posts {
            let mut homes = 0;
            if split.promotional.contains(post) {
                homes += 1;
            }
            homes += split.experience.iter().filter(|w| w.contains(post)).count();
            prop_assert!(homes <= 1, "post {} in {homes} buckets", post.post_id);
        }
        let retained: usize =
            split.promotional.len() + split.experience.iter().map(Vec::len).sum::<usize>();
        prop_assert!(retained <= posts.len());
    }

    /// R² never exceeds 1 and MAE is non-negative.
    #[test]
    fn score_bounds(
        actual in vec(-1e6f64..1e6, 2..50),
        noise in vec(-1e5f64..1e5, 2..50),
    ) {
        let n = actual.len().min(noise.len());
        let predicted: Vec<f64> =
            actual[..n].iter().zip(&noise[..n]).map(|(a, e)| a + e).collect();
        match score(&actual[..n], &predicted) {
            Ok(m) => {
                prop_assert!(m.mae >= 0.0);
                prop_assert!(m.r2 <= 1.0);
            }
            Err(EvalError::ZeroVariance { mae }) => prop_assert!(mae >= 0.0),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}
