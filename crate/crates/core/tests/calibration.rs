use std::collections::BTreeMap;

use cei::calibration::{
    build_grid, calibrate, match_logs, probe_deviation, pseudo_human_logs, required_conditions, GridCache, GridSpec,
    SyntheticSpec,
};
use cei::params::{BaseThresholds, Incentives, ModelConstants, PairParams, ParameterSet};
use cei::scenario::{Condition, Side, Track};

fn small_spec() -> GridSpec {
    GridSpec {
        resolution: 7,
        ..GridSpec::default()
    }
}

#[test]
fn probe_is_mirror_symmetric() {
    let k = ModelConstants::default();
    let track = Track::default();
    for c in Condition::default_set() {
        for th in [BaseThresholds::new(0.05, 0.4), BaseThresholds::new(0.2, 0.8)] {
            let l = probe_deviation(c, Side::Left, th, &k, &track, 1.0);
            let r = probe_deviation(c.mirrored(), Side::Right, th, &k, &track, 1.0);
            assert_eq!(l.to_bits(), r.to_bits(), "{c} {th:?}");
            assert!(l.is_finite());
        }
    }
}

#[test]
fn grid_cells_are_probe_deviations() {
    let k = ModelConstants::default();
    let track = Track::default();
    let spec = small_spec();
    let c = Condition::new(-2, 8);
    let a = build_grid(c, &spec, &k, &track);
    let b = build_grid(c, &spec, &k, &track);
    assert_eq!(a, b);
    for i_l in 0..7 {
        for i_u in 0..7 {
            let (l, u) = (a.theta_l[i_l], a.theta_u[i_u]);
            match a.get(i_l, i_u) {
                None => assert!(l >= u),
                Some(d) => {
                    let oracle = probe_deviation(c, Side::Left, BaseThresholds::new(l, u), &k, &track, spec.probe_time);
                    assert_eq!(d.to_bits(), oracle.to_bits());
                }
            }
        }
    }
}

#[test]
fn cache_hits_return_the_built_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cache = GridCache::new(dir.path());
    let k = ModelConstants::default();
    let track = Track::default();
    let spec = GridSpec {
        resolution: 3,
        ..GridSpec::default()
    };
    let c = Condition::new(0, 0);
    let (built, hit) = cache.load_or_build(c, &spec, &k, &track).unwrap();
    assert!(!hit);
    let (cached, hit) = cache.load_or_build(c, &spec, &k, &track).unwrap();
    assert!(hit);
    assert_eq!(built, cached);
    let other = GridSpec { probe_time: 1.5, ..spec };
    assert_ne!(cache.path(c, &spec, &k, &track), cache.path(c, &other, &k, &track));
}

/// Noise-free pseudo-humans whose thresholds sit on grid points produce
/// deviations that the grid contains exactly.
#[test]
fn on_grid_drivers_are_matched_exactly() {
    let spec = small_spec();
    let l = spec.theta_l_values();
    let u = spec.theta_u_values();
    let truth = ParameterSet {
        incentives: Incentives::DISABLED,
        pairs: vec![
            PairParams {
                pair: 1,
                left: BaseThresholds::new(l[1], u[3]),
                right: BaseThresholds::new(l[4], u[6]),
            },
            PairParams {
                pair: 2,
                left: BaseThresholds::new(l[2], u[5]),
                right: BaseThresholds::new(l[0], u[2]),
            },
        ],
        ..ParameterSet::default()
    };
    let logs = pseudo_human_logs(&SyntheticSpec {
        truth: truth.clone(),
        conditions: vec![Condition::new(0, 0), Condition::new(2, -8), Condition::new(-4, 8)],
        repetitions: 1,
        residual_sd: 0.0,
        seed: 3,
        duration_after_exit: 2.0,
        track: Track::default(),
    });
    let k = truth.constants;
    let grids: BTreeMap<_, _> = required_conditions(&logs)
        .into_iter()
        .map(|c| (c, build_grid(c, &spec, &k, &Track::default())))
        .collect();
    assert_eq!(grids.len(), 5);
    let report = match_logs(&logs, &grids, spec.probe_time);
    assert!(report.skipped.is_empty(), "{:?}", report.skipped);
    assert_eq!(report.matches.len(), 12);
    for m in &report.matches {
        assert!(m.matched.error < 1e-12, "{m:?}");
        let pair = truth.pairs.iter().find(|p| p.pair == m.driver.pair).unwrap();
        let th = if m.driver.side == Side::Left { pair.left } else { pair.right };
        let expected = probe_deviation(m.condition, Side::Left, th, &k, &Track::default(), spec.probe_time);
        assert_eq!(m.deviation, expected);
    }

    let result = calibrate(&logs, &grids, &spec, k).unwrap();
    assert_eq!(result.fit.observations, 12);
    assert_eq!(result.parameters.pairs.len(), 2);
}
