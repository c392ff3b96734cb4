use serde::{Deserialize, Serialize};

use super::{ModelError, ProblemParams};
use crate::integrator::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExteriorSample {
    pub r: f64,
    pub u: f64,
    pub up: f64,
}

/// `u(r) = v(r^{2-N})` on `[R, r_max]`, ascending in `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteriorSolution {
    pub t_min: f64,
    pub r_max: f64,
    pub samples: Vec<ExteriorSample>,
    /// Radii of the zeros of `u`, ascending.
    pub zeros: Vec<f64>,
    /// Slopes `u'` at those zeros.
    pub zero_slopes: Vec<f64>,
}

impl ExteriorSolution {
    /// Zeros with `r > R` beyond the boundary band, i.e. `t < R1 - tol_bdry`.
    pub fn interior_zero_count(&self, params: &ProblemParams, tol_bdry: f64) -> usize {
        let cut = params.r1() - tol_bdry;
        let exponent = 2.0 - params.n();
        self.zeros.iter().filter(|r| r.powf(exponent) < cut).count()
    }

    pub fn u_at_inner_radius(&self) -> Option<f64> {
        self.samples.first().map(|s| s.u)
    }
}

/// Maps a trajectory to the exterior variable. Samples below `t_min`
/// (default `1e-6 R1`, lowered under the first extremum when needed) are
/// dropped; startup-grid samples above it are included.
pub fn to_exterior(
    trajectory: &Trajectory,
    params: &ProblemParams,
    t_min: Option<f64>,
) -> Result<ExteriorSolution, ModelError> {
    if trajectory.samples.is_empty() {
        return Err(ModelError::EmptyTrajectory);
    }
    let n = params.n();
    let to_r = |t: f64| t.powf(1.0 / (2.0 - n));
    let slope = |r: f64, vp: f64| (2.0 - n) * r.powf(1.0 - n) * vp;
    let first_feature = trajectory.events.first().map(|e| e.t_loc).unwrap_or(f64::INFINITY);
    let t_min = t_min.unwrap_or_else(|| (1e-6 * params.r1()).min(0.5 * first_feature));

    let mut points: Vec<(f64, f64, f64)> = Vec::new();
    if let Some(local) = &trajectory.local {
        let last = local.grid.len() - 1;
        for k in 1..last {
            let t = local.grid[k];
            if t >= t_min {
                points.push((t, t * local.w_values[k], local.vp_values[k]));
            }
        }
    }
    for s in &trajectory.samples {
        if s.t >= t_min {
            points.push((s.t, s.v, s.vp));
        }
    }
    // Descending t is ascending r.
    points.sort_by(|p, q| q.0.total_cmp(&p.0));
    points.dedup_by(|p, q| p.0 == q.0);
    let samples: Vec<ExteriorSample> = points
        .iter()
        .map(|&(t, v, vp)| {
            let r = to_r(t);
            ExteriorSample {
                r,
                u: v,
                up: slope(r, vp),
            }
        })
        .collect();
    let mut zeros: Vec<(f64, f64)> = trajectory
        .zeros()
        .filter(|e| e.t_loc >= t_min)
        .map(|e| {
            let r = to_r(e.t_loc);
            (r, slope(r, e.slope.unwrap_or(f64::NAN)))
        })
        .collect();
    zeros.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(ExteriorSolution {
        t_min,
        r_max: to_r(t_min),
        samples,
        zeros: zeros.iter().map(|z| z.0).collect(),
        zero_slopes: zeros.iter().map(|z| z.1).collect(),
    })
}
