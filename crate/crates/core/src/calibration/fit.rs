//! Least-squares fit of trial-level thresholds: one intercept per driver
//! and slopes on Δp, Δv and Δp·Δv shared by everyone.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CeiError, Result};
use crate::scenario::Side;

/// A driver: one side of one participant pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DriverId {
    pub pair: u32,
    pub side: Side,
}

/// Matched thresholds of one trial with its covariates, both taken from
/// the driver's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdObservation {
    pub driver: DriverId,
    pub delta_p: f64,
    pub delta_v: f64,
    pub theta_l: f64,
    pub theta_u: f64,
}

/// One regression: slopes, their standard errors, and intercepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slopes: [f64; 3],
    pub slope_se: [f64; 3],
    pub intercepts: BTreeMap<DriverId, f64>,
    pub residual_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub upper: LinearFit,
    pub lower: LinearFit,
    pub observations: usize,
}

/// Relative singular-value cut-off for the rank check.
const RANK_TOLERANCE: f64 = 1e-10;

fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let (n, k) = x.shape();
    let svd = x.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > RANK_TOLERANCE * s_max).count();
    if rank < k {
        return Err(CeiError::RankDeficient(format!("design has rank {rank}, needs {k}")));
    }
    let beta = svd
        .solve(y, RANK_TOLERANCE * s_max)
        .map_err(|e| CeiError::RankDeficient(e.to_string()))?;
    let residual = y - x * &beta;
    let dof = n.saturating_sub(k);
    let sigma2 = if dof > 0 { residual.norm_squared() / dof as f64 } else { 0.0 };
    let xtx = x.transpose() * x;
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| CeiError::RankDeficient("normal matrix is singular".into()))?;
    Ok((beta, inv * sigma2, sigma2.sqrt()))
}

fn fit_one(obs: &[ThresholdObservation], drivers: &[DriverId], value: impl Fn(&ThresholdObservation) -> f64) -> Result<LinearFit> {
    let p = drivers.len();
    let k = p + 3;
    let mut x = DMatrix::<f64>::zeros(obs.len(), k);
    let mut y = DVector::<f64>::zeros(obs.len());
    for (row, o) in obs.iter().enumerate() {
        let col = drivers.binary_search(&o.driver).expect("driver list built from observations");
        x[(row, col)] = 1.0;
        x[(row, p)] = o.delta_p;
        x[(row, p + 1)] = o.delta_v;
        x[(row, p + 2)] = o.delta_p * o.delta_v;
        y[row] = value(o);
    }
    let (beta, cov, residual_sd) = least_squares(&x, &y)?;
    Ok(LinearFit {
        slopes: [beta[p], beta[p + 1], beta[p + 2]],
        slope_se: [
            cov[(p, p)].sqrt(),
            cov[(p + 1, p + 1)].sqrt(),
            cov[(p + 2, p + 2)].sqrt(),
        ],
        intercepts: drivers.iter().enumerate().map(|(i, d)| (*d, beta[i])).collect(),
        residual_sd,
    })
}

/// Fits upper and lower thresholds separately. Needs at least two drivers
/// and a design that identifies all slopes.
pub fn fit_thresholds(observations: &[ThresholdObservation]) -> Result<ThresholdFit> {
    let mut drivers: Vec<DriverId> = observations.iter().map(|o| o.driver).collect();
    drivers.sort_unstable();
    drivers.dedup();
    if drivers.len() < 2 {
        return Err(CeiError::RankDeficient(format!(
            "need at least 2 drivers, got {}",
            drivers.len()
        )));
    }
    Ok(ThresholdFit {
        upper: fit_one(observations, &drivers, |o| o.theta_u)?,
        lower: fit_one(observations, &drivers, |o| o.theta_l)?,
        observations: observations.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Condition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const LU: [f64; 3] = [0.003, 0.018, -0.006];
    const LL: [f64; 3] = [0.004, 0.016, -0.003];

    fn synthetic(noise: f64, seed: u64) -> Vec<ThresholdObservation> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise.max(1e-300)).unwrap();
        let mut out = Vec::new();
        for pair in 1..=3u32 {
            for side in [Side::Left, Side::Right] {
                let base_u = 0.45 + 0.05 * pair as f64 + if side == Side::Left { 0.0 } else { 0.02 };
                let base_l = 0.1 + 0.03 * pair as f64;
                for c in Condition::default_set() {
                    let c = c.from_perspective(side);
                    let (dp, dv) = (c.projected_headway(), c.relative_velocity());
                    for _ in 0..10 {
                        let eps = if noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
                        let eps_l = if noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
                        out.push(ThresholdObservation {
                            driver: DriverId { pair, side },
                            delta_p: dp,
                            delta_v: dv,
                            theta_u: base_u + LU[0] * dp + LU[1] * dv + LU[2] * dp * dv + eps,
                            theta_l: base_l + LL[0] * dp + LL[1] * dv + LL[2] * dp * dv + eps_l,
                        });
                    }
                }
            }
        }
        out
    }

    #[test]
    fn exact_data_recovered() {
        let fit = fit_thresholds(&synthetic(0.0, 0)).unwrap();
        for i in 0..3 {
            assert!((fit.upper.slopes[i] - LU[i]).abs() < 1e-10);
            assert!((fit.lower.slopes[i] - LL[i]).abs() < 1e-10);
        }
        let d = DriverId { pair: 2, side: Side::Right };
        assert!((fit.upper.intercepts[&d] - 0.57).abs() < 1e-10);
        assert!((fit.lower.intercepts[&d] - 0.16).abs() < 1e-10);
    }

    #[test]
    fn single_condition_is_rank_deficient() {
        let obs: Vec<_> = synthetic(0.0, 0)
            .into_iter()
            .filter(|o| o.delta_p == 0.0 && o.delta_v == 0.0)
            .collect();
        assert!(matches!(fit_thresholds(&obs), Err(CeiError::RankDeficient(_))));
    }

    #[test]
    fn one_driver_is_rejected() {
        let obs: Vec<_> = synthetic(0.0, 0)
            .into_iter()
            .filter(|o| o.driver == DriverId { pair: 1, side: Side::Left })
            .collect();
        assert!(matches!(fit_thresholds(&obs), Err(CeiError::RankDeficient(_))));
    }

    #[test]
    fn noisy_slopes_within_three_standard_errors() {
        // Coverage of the 3-SE band is ~99.7 % per coefficient; allow a
        // couple of misses over 100 x 6 checks.
        let mut misses = 0;
        for seed in 0..100 {
            let fit = fit_thresholds(&synthetic(0.02, seed)).unwrap();
            for i in 0..3 {
                if (fit.upper.slopes[i] - LU[i]).abs() > 3.0 * fit.upper.slope_se[i] {
                    misses += 1;
                }
                if (fit.lower.slopes[i] - LL[i]).abs() > 3.0 * fit.lower.slope_se[i] {
                    misses += 1;
                }
            }
        }
        assert!(misses <= 6, "{misses} misses");
    }
}
