//! Matching an observed deviation to the grid cell that reproduces it best.

use serde::{Deserialize, Serialize};

use super::grid::GridResponse;

/// Responses closer than this count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMatch {
    pub theta_l: f64,
    pub theta_u: f64,
    pub grid_deviation: f64,
    /// |grid deviation − observed deviation|.
    pub error: f64,
    /// Half the distance between the distinct grid responses bracketing the
    /// observation; infinite when it lies outside the grid's range.
    pub quantization_bound: f64,
}

/// Cell minimising |response − deviation|; ties go to the largest θ_u,
/// then the largest θ_l. `None` when the grid has no valid cell or the
/// observation is not finite.
pub fn match_trial(deviation: f64, grid: &GridResponse) -> Option<GridMatch> {
    if !deviation.is_finite() {
        return None;
    }
    let mut best: Option<(usize, usize, f64, f64)> = None;
    for (i_l, i_u, d) in grid.cells() {
        let err = (d - deviation).abs();
        let better = match best {
            None => true,
            Some((bl, bu, _, berr)) => {
                if err < berr - TIE_TOLERANCE {
                    true
                } else if err <= berr + TIE_TOLERANCE {
                    (i_u, i_l) > (bu, bl)
                } else {
                    false
                }
            }
        };
        if better {
            best = Some((i_l, i_u, d, err));
        }
    }
    let (i_l, i_u, d, err) = best?;

    let below = grid.cells().map(|c| c.2).filter(|&r| r <= deviation).fold(f64::NEG_INFINITY, f64::max);
    let above = grid.cells().map(|c| c.2).filter(|&r| r >= deviation).fold(f64::INFINITY, f64::min);
    Some(GridMatch {
        theta_l: grid.theta_l[i_l],
        theta_u: grid.theta_u[i_u],
        grid_deviation: d,
        error: err,
        quantization_bound: 0.5 * (above - below),
    })
}
