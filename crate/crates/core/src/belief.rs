//! Probabilistic belief over the other vehicle's future front position.
//!
//! Each belief point is an equal-weight mixture of two normals sharing a
//! mean: a narrow component for comfortable kinematics and a component
//! with variance scaled by `phi` that covers unexpected manoeuvres.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{CeiError, Result};
use crate::params::ModelConstants;
use crate::perception::{AccelerationMemory, PerceivedOther};

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Mass of N(mu, sigma²) on (a, b); `sigma == 0` is a point mass.
pub fn normal_mass(mu: f64, sigma: f64, a: f64, b: f64) -> f64 {
    if sigma > 0.0 {
        // Evaluate in the tail closest to zero to keep precision.
        let za = (a - mu) / sigma;
        let zb = (b - mu) / sigma;
        if za > 0.0 {
            std_normal_cdf(-za) - std_normal_cdf(-zb)
        } else {
            std_normal_cdf(zb) - std_normal_cdf(za)
        }
    } else if mu > a && mu < b {
        1.0
    } else {
        0.0
    }
}

/// Normal expectation of the other vehicle's acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelerationExpectation {
    pub mu_a: f64,
    pub sigma_a: f64,
}

/// Mean of the memory, and a variance floored at `(a_c / 3)²`.
pub fn expected_acceleration(memory: &AccelerationMemory, a_comfort: f64) -> Result<AccelerationExpectation> {
    let mu_a = memory.mean().ok_or(CeiError::EmptyMemory)?;
    let var = memory.variance().ok_or(CeiError::EmptyMemory)?;
    let floor = a_comfort / 3.0;
    Ok(AccelerationExpectation {
        mu_a,
        sigma_a: (floor * floor + var).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefPoint {
    /// Absolute simulation time of this point.
    pub t: f64,
    pub mu: f64,
    pub sigma: f64,
    pub phi: f64,
}

impl BeliefPoint {
    /// Probability that the other front lies in `(a, b)`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        mixture_mass(self, a, b)
    }
}

/// Variance growth of a belief point with look-ahead `dt_ahead`.
#[cfg(not(feature = "quartic-belief-variance"))]
fn projected_variance(dt_ahead: f64, sigma_a: f64) -> f64 {
    0.5 * dt_ahead * dt_ahead * sigma_a * sigma_a
}

/// Kinematically consistent alternative: the variance of ½ a t² with
/// a ~ N(., sigma_a²). Only for sensitivity studies.
#[cfg(feature = "quartic-belief-variance")]
fn projected_variance(dt_ahead: f64, sigma_a: f64) -> f64 {
    let s = 0.5 * dt_ahead * dt_ahead;
    s * s * sigma_a * sigma_a
}

/// Constant-acceleration projection of the other vehicle to time `t`.
pub fn project_belief_point(
    p0: f64,
    v0_perceived: f64,
    expectation: AccelerationExpectation,
    t: f64,
    t0: f64,
    phi: f64,
) -> BeliefPoint {
    debug_assert!(t >= t0);
    let h = t - t0;
    BeliefPoint {
        t,
        mu: 0.5 * h * h * expectation.mu_a + v0_perceived * h + p0,
        sigma: projected_variance(h, expectation.sigma_a).sqrt(),
        phi,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub t0: f64,
    pub points: Vec<BeliefPoint>,
}

/// Belief points at `1 / belief_frequency` spacing over the horizon,
/// the first one spacing after `t0`.
pub fn build_belief(perceived: &PerceivedOther, constants: &ModelConstants, t0: f64) -> Result<Belief> {
    let expectation = expected_acceleration(&perceived.memory, constants.a_comfort)?;
    let spacing = 1.0 / constants.belief_frequency;
    let points = (1..=constants.belief_points())
        .map(|k| {
            project_belief_point(
                perceived.position,
                perceived.perceived_velocity,
                expectation,
                t0 + k as f64 * spacing,
                t0,
                constants.phi,
            )
        })
        .collect();
    Ok(Belief { t0, points })
}

/// Probability mass of the two-component mixture on `(a, b)`.
pub fn mixture_mass(point: &BeliefPoint, a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    let narrow = normal_mass(point.mu, point.sigma, a, b);
    let wide = normal_mass(point.mu, point.sigma * point.phi.sqrt(), a, b);
    (0.5 * narrow + 0.5 * wide).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::Observation;
    use approx::assert_abs_diff_eq;

    fn memory_of(values: &[f64]) -> AccelerationMemory {
        let mut m = AccelerationMemory::new(100.0);
        for (k, a) in values.iter().enumerate() {
            m.push(*a, k as f64);
        }
        m
    }

    #[test]
    fn variance_floor_only() {
        let e = expected_acceleration(&memory_of(&[0.0; 10]), 1.0).unwrap();
        assert_eq!(e.mu_a, 0.0);
        assert_abs_diff_eq!(e.sigma_a, 1.0 / 3.0, epsilon = 1e-15);
        let e = expected_acceleration(&memory_of(&[0.5; 10]), 1.0).unwrap();
        assert_abs_diff_eq!(e.mu_a, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(e.sigma_a, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn alternating_memory_variance() {
        let values: Vec<f64> = (0..40).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = expected_acceleration(&memory_of(&values), 1.0).unwrap();
        // two-pass oracle
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert_abs_diff_eq!(e.mu_a, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.sigma_a * e.sigma_a, 1.0 / 9.0 + var, epsilon = 1e-12);
        assert_abs_diff_eq!(e.sigma_a * e.sigma_a, 1.0 / 9.0 + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_memory_is_a_fault() {
        assert!(matches!(
            expected_acceleration(&AccelerationMemory::new(4.0), 1.0),
            Err(CeiError::EmptyMemory)
        ));
    }

    #[test]
    fn projection_examples() {
        let e = AccelerationExpectation {
            mu_a: 0.0,
            sigma_a: 1.0 / 3.0,
        };
        let p = project_belief_point(12.0, 10.0, e, 3.0, 3.0, 3.0);
        assert_eq!(p.mu, 12.0);
        assert_eq!(p.sigma, 0.0);
        let p = project_belief_point(0.0, 10.0, e, 2.0, 0.0, 3.0);
        assert_eq!(p.mu, 20.0);
        if cfg!(not(feature = "quartic-belief-variance")) {
            assert_abs_diff_eq!(p.sigma * p.sigma, 2.0 / 9.0, epsilon = 1e-15);
        }
    }

    fn perceived(position: f64, velocity: f64, accel: f64) -> PerceivedOther {
        let mut p = PerceivedOther::new(
            Observation {
                position,
                velocity,
                acceleration: accel,
            },
            4.0,
        );
        p.memory.push(accel, 0.0);
        p
    }

    #[test]
    fn default_belief_shape() {
        let c = ModelConstants::default();
        let b = build_belief(&perceived(50.0, 10.0, 0.0), &c, 7.0).unwrap();
        assert_eq!(b.points.len(), 24);
        assert_abs_diff_eq!(b.points[0].t, 7.25, epsilon = 1e-12);
        assert_abs_diff_eq!(b.points[23].t, 13.0, epsilon = 1e-12);
        for (k, p) in b.points.iter().enumerate() {
            assert_abs_diff_eq!(p.mu, 50.0 + 2.5 * (k + 1) as f64, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(b.points[23].mu, 110.0, epsilon = 1e-12);
        assert!(b.points.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn stationary_other_stays_put() {
        let c = ModelConstants::default();
        let b = build_belief(&perceived(30.0, 0.0, 0.0), &c, 0.0).unwrap();
        assert!(b.points.iter().all(|p| p.mu == 30.0));
    }

    #[test]
    fn sigma_is_linear_in_lookahead() {
        let c = ModelConstants::default();
        let b = build_belief(&perceived(30.0, 9.0, 0.2), &c, 1.0).unwrap();
        let ratio = b.points[0].sigma / 0.25;
        for p in &b.points {
            let expected = if cfg!(feature = "quartic-belief-variance") {
                p.sigma
            } else {
                ratio * (p.t - 1.0)
            };
            assert_abs_diff_eq!(p.sigma, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn mixture_normalization_and_symmetry() {
        let p = BeliefPoint {
            t: 0.0,
            mu: 3.0,
            sigma: 1.3,
            phi: 3.0,
        };
        assert_abs_diff_eq!(p.mass(f64::NEG_INFINITY, f64::INFINITY), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.mass(3.0, f64::INFINITY), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_point_is_indicator() {
        let p = BeliefPoint {
            t: 0.0,
            mu: 101.0,
            sigma: 0.0,
            phi: 3.0,
        };
        assert_eq!(p.mass(100.0, 102.5), 1.0);
        assert_eq!(p.mass(101.0, 102.5), 0.0);
        assert_eq!(p.mass(90.0, 95.0), 0.0);
    }

    #[test]
    fn mixture_mass_matches_quadrature() {
        let p = BeliefPoint {
            t: 0.0,
            mu: 0.0,
            sigma: 1.0,
            phi: 3.0,
        };
        let expected = simpson_mixture(0.0, 1.0, 3.0, -1.0, 1.0, 20_000);
        assert_abs_diff_eq!(p.mass(-1.0, 1.0), expected, epsilon = 1e-6);
        assert_abs_diff_eq!(expected, 0.5595, epsilon = 1e-4);
    }

    /// Composite Simpson integration of the mixture density.
    pub(crate) fn simpson_mixture(mu: f64, sigma: f64, phi: f64, a: f64, b: f64, n: usize) -> f64 {
        let pdf = |x: f64, s: f64| (-(x - mu) * (x - mu) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        let f = |x: f64| 0.5 * pdf(x, sigma) + 0.5 * pdf(x, sigma * phi.sqrt());
        let n = if n % 2 == 1 { n + 1 } else { n };
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }
}
