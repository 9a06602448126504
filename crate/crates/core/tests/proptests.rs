use cei::analysis::output::{quantile, wilson_interval};
use cei::belief::{mixture_mass, BeliefPoint};
use cei::params::{BaseThresholds, Incentives};
use cei::risk::{evaluate_thresholds, RiskThresholds};
use cei::scenario::{bodies_collide, collision_bounds, initial_states, resistance, step_dynamics, Condition, Track, VehicleState};
use proptest::prelude::*;

fn lambda() -> impl Strategy<Value = [f64; 3]> {
    [-0.2..0.2f64, -0.2..0.2f64, -0.05..0.05f64]
}

proptest! {
    #[test]
    fn collision_is_symmetric_and_matches_overlap(a in 80.0..130.0f64, b in 80.0..130.0f64) {
        let track = Track::default();
        let brute = (a - b).abs() < track.vehicle_length && a.max(b) > track.merge_point();
        prop_assert_eq!(bodies_collide(a, b, &track), brute);
        prop_assert_eq!(bodies_collide(b, a, &track), brute);
        if let Some(iv) = collision_bounds(a, &track) {
            prop_assert!(iv.lower >= a - track.vehicle_length && iv.upper == a + track.vehicle_length);
            prop_assert!(iv.lower >= track.merge_point() || a > track.merge_point());
        }
    }

    #[test]
    fn thresholds_are_ordered_and_clamped(
        theta_l in -1.0..2.0f64,
        theta_u in -1.0..2.0f64,
        upper in lambda(),
        lower in lambda(),
        dp in -20.0..20.0f64,
        dv in -5.0..5.0f64,
    ) {
        let params = RiskThresholds {
            base: BaseThresholds::new(theta_l, theta_u),
            incentives: Incentives { upper, lower },
        };
        let (l, u) = evaluate_thresholds(&params, dp, dv);
        prop_assert!(l >= 0.001);
        prop_assert!(l <= u - 0.001 + 1e-15);
        prop_assert!(u - 0.001 <= 0.998 + 1e-15);
    }

    #[test]
    fn mixture_mass_is_a_probability(
        mu in -50.0..50.0f64,
        sigma in 0.01..10.0f64,
        phi in 1.0..10.0f64,
        a in -60.0..60.0f64,
        w in 0.0..30.0f64,
        grow in 0.0..10.0f64,
    ) {
        let p = BeliefPoint { t: 0.0, mu, sigma, phi };
        let inner = mixture_mass(&p, a, a + w);
        let outer = mixture_mass(&p, a - grow, a + w + grow);
        prop_assert!((0.0..=1.0).contains(&inner));
        prop_assert!(outer + 1e-15 >= inner);
        prop_assert!((mixture_mass(&p, -1e9, 1e9) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn velocity_never_negative(v in 0.0..30.0f64, pedal in proptest::collection::vec(-10.0..4.0f64, 1..200)) {
        let mut s = VehicleState::cruising(60.0, v);
        for u in pedal {
            s = step_dynamics(&s, u, 0.05, false);
            prop_assert!(s.velocity >= 0.0);
        }
    }

    #[test]
    fn resistance_compensation_holds_velocity(v in 1.0..30.0f64) {
        let mut s = VehicleState::cruising(60.0, v);
        for _ in 0..400 {
            s = step_dynamics(&s, resistance(s.velocity), 0.05, false);
        }
        prop_assert!((s.velocity - v).abs() < 1e-9);
    }

    #[test]
    fn initial_states_mirror_and_arrive_on_schedule(h in -10i32..=10, dv in -20i32..=20) {
        let track = Track::default();
        let c = Condition::new(h, dv);
        let (l, r) = initial_states(&c, &track);
        let (ml, mr) = initial_states(&c.mirrored(), &track);
        prop_assert_eq!(l, mr);
        prop_assert_eq!(r, ml);
        prop_assert_eq!(l.front_position.min(r.front_position), 0.0);
        // Leader at the merge point while the trailer is |h| behind.
        let m = track.merge_point();
        let (lead, trail) = if h >= 0 { (l, r) } else { (r, l) };
        let t = (m - lead.front_position) / lead.velocity;
        let trail_at = trail.front_position + trail.velocity * t;
        prop_assert!((m - trail_at - f64::from(h.abs())).abs() < 1e-9);
    }

    #[test]
    fn quantile_within_range(values in proptest::collection::vec(-100.0..100.0f64, 1..50), q in 0.0..1.0f64) {
        let x = quantile(&values, q);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(x >= lo && x <= hi);
        prop_assert!(quantile(&values, q.min(0.5)) <= quantile(&values, q.max(0.5)));
    }

    #[test]
    fn wilson_contains_the_proportion(n in 1usize..500, k in 0usize..500) {
        let k = k.min(n);
        let (lo, hi) = wilson_interval(k, n);
        let p = k as f64 / n as f64;
        prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
    }
}
