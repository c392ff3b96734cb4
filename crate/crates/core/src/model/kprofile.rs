use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::{ModelError, ProblemParams};

/// User-supplied coefficient `K(r)` and its derivative.
pub trait KFunction: Send + Sync {
    fn k(&self, r: f64) -> f64;
    fn dk(&self, r: f64) -> f64;
    /// `lim_{r -> inf} K(r) r^alpha`; the default samples far out.
    fn tail_amplitude(&self, alpha: f64) -> f64 {
        let r = 1e12;
        self.k(r) * r.powf(alpha)
    }
}

#[derive(Clone)]
pub enum KShape {
    /// `k r^{-alpha}`
    Power,
    /// `k r^{-alpha} (2 + 1/(1+r))`
    BoundedPerturbation,
    Custom(Arc<dyn KFunction>),
}

impl fmt::Debug for KShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KShape::Power => f.write_str("Power"),
            KShape::BoundedPerturbation => f.write_str("BoundedPerturbation"),
            KShape::Custom(_) => f.write_str("Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KProfile {
    shape: KShape,
    k_scale: f64,
    alpha: f64,
    k0: f64,
    k1: f64,
}

impl KProfile {
    pub fn power(k_scale: f64, alpha: f64) -> Self {
        Self {
            shape: KShape::Power,
            k_scale,
            alpha,
            k0: k_scale,
            k1: k_scale,
        }
    }

    /// Envelope constants start as the analytic bounds `2k` and `3k`; run
    /// [`check_h3`] and [`KProfile::with_envelope`] to tighten them on a grid.
    pub fn bounded_perturbation(k_scale: f64, alpha: f64) -> Self {
        Self {
            shape: KShape::BoundedPerturbation,
            k_scale,
            alpha,
            k0: 2.0 * k_scale,
            k1: 3.0 * k_scale,
        }
    }

    /// Custom profiles have no envelope until validated.
    pub fn custom(k: Arc<dyn KFunction>, alpha: f64) -> Self {
        Self {
            shape: KShape::Custom(k),
            k_scale: 1.0,
            alpha,
            k0: f64::NAN,
            k1: f64::NAN,
        }
    }

    pub fn with_envelope(mut self, report: &H3Report) -> Self {
        self.k0 = report.k0;
        self.k1 = report.k1;
        self
    }

    pub fn shape(&self) -> &KShape {
        &self.shape
    }
    pub fn k_scale(&self) -> f64 {
        self.k_scale
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn k0(&self) -> f64 {
        self.k0
    }
    pub fn k1(&self) -> f64 {
        self.k1
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match &self.shape {
            KShape::Power => self.k_scale * r.powf(-self.alpha),
            KShape::BoundedPerturbation => self.k_scale * r.powf(-self.alpha) * (2.0 + 1.0 / (1.0 + r)),
            KShape::Custom(k) => k.k(r),
        }
    }

    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        match &self.shape {
            KShape::Power => -self.alpha * self.k_scale * r.powf(-self.alpha - 1.0),
            KShape::BoundedPerturbation => {
                let base = self.k_scale * r.powf(-self.alpha);
                let s = 1.0 / (1.0 + r);
                -self.alpha / r * base * (2.0 + s) - base * s * s
            }
            KShape::Custom(k) => k.dk(r),
        }
    }

    pub fn tail_amplitude(&self) -> f64 {
        match &self.shape {
            KShape::Power => self.k_scale,
            KShape::BoundedPerturbation => 2.0 * self.k_scale,
            KShape::Custom(k) => k.tail_amplitude(self.alpha),
        }
    }
}

/// Result of checking (H3) on a radius grid.
#[derive(Debug, Clone, Serialize)]
pub struct H3Report {
    pub k0: f64,
    pub k1: f64,
    pub max_neg_log_slope: f64,
    pub slope_limit: f64,
    pub tail_log_slope: f64,
    pub h0: f64,
    pub h1: f64,
    pub grid_points: usize,
    pub r_min: f64,
    pub r_max: f64,
}

/// `count` log-spaced radii over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Checks `K > 0`, the `r^{-alpha}` envelope and `-rK'/K < 2(N-1)` on the grid.
pub fn check_h3(k: &KProfile, params: &ProblemParams, grid: &[f64]) -> Result<H3Report, ModelError> {
    let limit = 2.0 * (params.n() - 1.0);
    let mut k0 = f64::INFINITY;
    let mut k1 = 0.0f64;
    let mut max_slope = f64::NEG_INFINITY;
    let mut tail = f64::NAN;
    for &r in grid {
        if r < params.r() * (1.0 - 1e-12) {
            return Err(ModelError::HypothesisViolated {
                radius: r,
                detail: format!("grid radius below R = {}", params.r()),
            });
        }
        let kv = k.eval(r);
        let dk = k.derivative(r);
        if !(kv > 0.0) || !kv.is_finite() || !dk.is_finite() {
            return Err(ModelError::HypothesisViolated {
                radius: r,
                detail: format!("K = {kv}, K' = {dk} (K must be positive with finite K')"),
            });
        }
        let ratio = kv * r.powf(k.alpha());
        k0 = k0.min(ratio);
        k1 = k1.max(ratio);
        let slope = -r * dk / kv;
        if slope >= limit {
            return Err(ModelError::HypothesisViolated {
                radius: r,
                detail: format!("-rK'/K = {slope} is not below 2(N-1) = {limit}"),
            });
        }
        max_slope = max_slope.max(slope);
        tail = -slope;
    }
    if !(k0 > 0.0) || !k1.is_finite() {
        return Err(ModelError::HypothesisViolated {
            radius: grid.first().copied().unwrap_or(f64::NAN),
            detail: "no positive finite envelope constants".into(),
        });
    }
    let scale = (params.n() - 2.0).powi(2);
    Ok(H3Report {
        k0,
        k1,
        max_neg_log_slope: max_slope,
        slope_limit: limit,
        tail_log_slope: tail,
        h0: k0 / scale,
        h1: k1 / scale,
        grid_points: grid.len(),
        r_min: grid.first().copied().unwrap_or(f64::NAN),
        r_max: grid.last().copied().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Problem, RawParams};

    fn default_grid(params: &ProblemParams) -> Vec<f64> {
        log_grid(params.r(), 1e6 * params.r(), 10_000)
    }

    #[test]
    fn power_law_passes_with_unit_envelope() {
        let params = ProblemParams::canonical();
        let rep = check_h3(&KProfile::power(1.0, 3.75), &params, &default_grid(&params)).unwrap();
        assert!((rep.k0 - 1.0).abs() < 1e-12 && (rep.k1 - 1.0).abs() < 1e-12);
        assert!((rep.max_neg_log_slope - 3.75).abs() < 1e-12);
        assert!(rep.max_neg_log_slope < rep.slope_limit);
    }

    #[test]
    fn bounded_perturbation_envelope_from_grid() {
        let params = ProblemParams::canonical();
        let k = KProfile::bounded_perturbation(1.0, 3.75);
        let rep = check_h3(&k, &params, &default_grid(&params)).unwrap();
        // Direct evaluation: K r^alpha = 2 + 1/(1+r) on [1, 1e6].
        assert!(rep.k0 >= 2.0 && (rep.k0 - (2.0 + 1.0 / (1.0 + 1e6))).abs() < 1e-12);
        assert!(rep.k1 <= 3.0 && (rep.k1 - 2.5).abs() < 1e-12);
        assert!((rep.h0 - rep.k0).abs() < 1e-15);
    }

    #[test]
    fn perturbed_log_derivative_tends_to_minus_tilde_alpha() {
        let params = ProblemParams::canonical();
        let prob = Problem::new(
            params,
            crate::model::Nonlinearity::canonical(3.0, 0.5),
            KProfile::bounded_perturbation(1.0, 3.75),
        );
        for t in [1e-6, 1e-7, 1e-9] {
            // Finite-difference oracle on log h.
            let step = 1e-4;
            let fd = ((prob.h(t * (1.0 + step))).ln() - (prob.h(t * (1.0 - step))).ln())
                / ((1.0 + step).ln() - (1.0 - step).ln());
            let ld = prob.h_log_derivative(t).unwrap();
            assert!((ld - fd).abs() < 1e-7, "{t}: {ld} vs {fd}");
            assert!((ld + 0.25).abs() < 1e-3);
        }
        for t in [1e-3, 0.1, 0.5, 1.0] {
            assert!(prob.h_log_derivative(t).unwrap() < 0.0);
        }
    }

    #[test]
    fn steep_profile_violates_slope_bound() {
        let raw = RawParams {
            n: 3.0,
            p: 3.0,
            q: 0.5,
            alpha: 5.0,
            r: 1.0,
        };
        assert!(crate::model::validate_params(raw).is_err());
        let forced = ProblemParams::new_unchecked(raw);
        let err = check_h3(&KProfile::power(1.0, 5.0), &forced, &default_grid(&forced)).unwrap_err();
        match err {
            ModelError::HypothesisViolated { radius, .. } => assert_eq!(radius, 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
