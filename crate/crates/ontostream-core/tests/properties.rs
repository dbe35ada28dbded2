//! Property tests for the window assigner and the exact-rational layer.

use ontostream_core::engine::{assign_windows, Measurement, Metrics, WindowAssigner};
use ontostream_core::rational::{format_rational, parse_rational};
use proptest::prelude::*;

proptest! {
    /// Every in-order measurement appears in exactly the windows the
    /// assigner formula predicts, verified by brute-force membership.
    #[test]
    fn window_membership_matches_brute_force(
        times in proptest::collection::vec(0i64..50_000, 1..40),
        range_ms in 0i64..20_000,
        slide_ms in 1i64..5_000,
    ) {
        let mut times = times;
        times.sort_unstable();
        let measurements: Vec<Measurement> = times
            .iter()
            .map(|&t| Measurement { sensor: "s".into(), time_ms: t, value: t as f64 })
            .collect();
        let assigner = WindowAssigner::new(range_ms, slide_ms);
        let mut metrics = Metrics::default();
        let windows = assign_windows(&measurements, &assigner, &mut metrics);
        prop_assert_eq!(metrics.rejected_late, 0);

        for &t in &times {
            let assigned: Vec<u64> = windows
                .iter()
                .filter(|w| w.samples.iter().any(|s| s.0 == t))
                .map(|w| w.wid)
                .collect();
            // Brute force: enumerate candidate ticks around t.
            let mut expected = Vec::new();
            let max_k = (t + range_ms) / slide_ms + 2;
            for k in 0..=max_k {
                let (lo, hi) = assigner.interval(k as u64);
                if lo <= t && t <= hi {
                    expected.push(k as u64);
                }
            }
            prop_assert_eq!(assigned, expected, "time {}", t);
        }
    }

    /// Formatting then parsing a rational built from small parts is the
    /// identity.
    #[test]
    fn rational_format_round_trips(numer in -10_000i64..10_000, denom in 1i64..10_000) {
        let r = ontostream_core::rational::Rational::new(numer.into(), denom.into());
        let back = parse_rational(&format_rational(&r)).unwrap();
        prop_assert_eq!(back, r);
    }
}
