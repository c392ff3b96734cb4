//! Launch from the singular initial point by a contraction-mapping fixed point.
//!
//! Near `t = 0` the unknown is `w = v / t`, which satisfies
//!
//! ```text
//! w(t) = a - (1/t) ∫_0^t ∫_0^s h(x) f(x w(x)) dx ds
//!      = a - I(t) + J(t) / t,
//! I(t) = ∫_0^t h f(x w) dx,   J(t) = ∫_0^t x h f(x w) dx.
//! ```
//!
//! Writing `h(x) f(x w) = x^{-beta} Phi(x)` with `beta = tilde_alpha + q`,
//! `Phi = H(x) [w^{-q} + x^q g(x w)]` and `H = h t^{tilde_alpha}` bounded, the
//! substitution `sigma = x^{1-beta}` absorbs the singular weight exactly:
//! `x^{-beta} dx = dsigma / (1 - beta)`. In `sigma` the integrands are smooth,
//! so the cumulative integrals are taken spectrally on Chebyshev-Lobatto
//! nodes, giving `I`, `J` and `v'(t) = a - I(t)` at every node.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Problem;
use crate::quad::{ChebyshevUnit, GaussRule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StartupError {
    #[error("shooting slope a = {0} must be positive and finite")]
    InvalidSlope(f64),
    #[error("iterate is not positive at t = {0}")]
    NonpositiveIterate(f64),
    #[error("quadrature produced a non-finite value at t = {0}")]
    QuadratureFailure(f64),
    #[error("epsilon shrank to {0:e} without an accepted fixed point")]
    EpsilonUnderflow(f64),
    #[error("fixed-point iteration did not converge in {0} iterations")]
    MaxIterations(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StartupConfig {
    /// Chebyshev nodes are `m + 1` points on `[0, eps]`.
    pub m: usize,
    /// Sup-norm stopping tolerance, relative to `a`.
    pub fp_tol_rel: f64,
    pub max_iterations: usize,
    /// Initial epsilon in place of the a-aware policy; still halved on failure.
    pub epsilon: Option<f64>,
    /// Cap `eps <= eps_cap_rel * R1`.
    pub eps_cap_rel: f64,
}

impl Default for StartupConfig {
    fn default() -> Self {
        Self {
            m: 64,
            fp_tol_rel: 1e-12,
            max_iterations: 200,
            epsilon: None,
            eps_cap_rel: 1e-3,
        }
    }
}

/// Node layout of the startup interval `[0, eps]`.
#[derive(Debug, Clone)]
pub struct StartupGrid {
    epsilon: f64,
    beta: f64,
    sigma_eps: f64,
    cheb: ChebyshevUnit,
    moment_rule: GaussRule,
    t: Vec<f64>,
}

impl StartupGrid {
    pub fn new(problem: &Problem, epsilon: f64, m: usize) -> Self {
        let params = &problem.params;
        let beta = params.tilde_alpha() + params.q();
        let sigma_eps = epsilon.powf(1.0 - beta);
        let cheb = ChebyshevUnit::new(m);
        let inv = 1.0 / (1.0 - beta);
        let mut t: Vec<f64> = cheb.nodes.iter().map(|s| (s * sigma_eps).powf(inv)).collect();
        t[0] = 0.0;
        *t.last_mut().unwrap() = epsilon;
        Self {
            epsilon,
            beta,
            sigma_eps,
            cheb,
            moment_rule: GaussRule::new(48),
            t,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn points(&self) -> &[f64] {
        &self.t
    }

    fn unit_coordinate(&self, t: f64) -> f64 {
        t.max(0.0).powf(1.0 - self.beta) / self.sigma_eps
    }

    /// Interpolate node values at an arbitrary `t` (polynomial in `sigma`).
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        self.cheb.interpolate(values, self.unit_coordinate(t))
    }
}

struct Quadratures {
    /// `∫_0^{t_k} h f(x w) dx`
    inner: Vec<f64>,
    /// `(1/t_k) ∫_0^{t_k} x h f(x w) dx`
    scaled_moment: Vec<f64>,
}

fn quadratures(grid: &StartupGrid, w: &[f64], problem: &Problem) -> Result<Quadratures, StartupError> {
    let q = problem.params.q();
    let nl = &problem.nonlinearity;
    let mut phi = Vec::with_capacity(w.len());
    for (&t, &wk) in grid.t.iter().zip(w) {
        if !(wk > 0.0) {
            return Err(StartupError::NonpositiveIterate(t));
        }
        let singular = if nl.is_singular() { wk.powf(-q) } else { 0.0 };
        let regular = if t > 0.0 {
            t.powf(q) * nl.regular_part(t * wk)
        } else {
            0.0
        };
        phi.push(problem.h_scaled(t) * (singular + regular));
    }
    let weight = 1.0 / (1.0 - grid.beta);
    let inner = grid.cheb.cumulative(&phi, grid.sigma_eps * weight);
    // (1/t_k) ∫ x dI = weight ∫_0^{s_k} (s/s_k)^p Phi ds with s = s_k u^2,
    // taken per node so the result keeps relative accuracy as t_k -> 0.
    let p = weight;
    let mut scaled_moment = vec![0.0; w.len()];
    for (k, out) in scaled_moment.iter_mut().enumerate().skip(1) {
        let sk = grid.cheb.nodes[k];
        let integral = grid.moment_rule.integrate(0.0, 1.0, |u| {
            let u2 = u * u;
            2.0 * u * u2.powf(p) * grid.cheb.interpolate(&phi, sk * u2)
        });
        *out = weight * grid.sigma_eps * sk * integral;
    }
    for (k, (i, j)) in inner.iter().zip(&scaled_moment).enumerate() {
        if !i.is_finite() || !j.is_finite() {
            return Err(StartupError::QuadratureFailure(grid.t[k]));
        }
    }
    Ok(Quadratures { inner, scaled_moment })
}

/// One application of the integral map `T` to node values `w`.
pub fn apply_t(grid: &StartupGrid, w: &[f64], a: f64, problem: &Problem) -> Result<Vec<f64>, StartupError> {
    let quad = quadratures(grid, w, problem)?;
    Ok(map_from_quadratures(grid, &quad, a))
}

fn map_from_quadratures(grid: &StartupGrid, quad: &Quadratures, a: f64) -> Vec<f64> {
    grid.t
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            if t == 0.0 {
                a
            } else {
                a - quad.inner[k] + quad.scaled_moment[k]
            }
        })
        .collect()
}

/// Accepted fixed point on `[0, eps]`.
#[derive(Debug, Clone, Serialize)]
pub struct LocalSolution {
    pub a: f64,
    pub epsilon: f64,
    pub grid: Vec<f64>,
    pub w_values: Vec<f64>,
    /// `v'(t_k) = a - ∫_0^{t_k} h f(v)`.
    pub vp_values: Vec<f64>,
    pub iterations: usize,
    pub contraction_estimate: f64,
    /// `sup |T w - w|` at acceptance.
    pub residual: f64,
    #[serde(skip)]
    layout: Option<StartupGrid>,
}

impl LocalSolution {
    fn layout(&self) -> &StartupGrid {
        self.layout.as_ref().expect("local solution carries its grid")
    }

    pub fn w_at(&self, t: f64) -> f64 {
        self.layout().interpolate(&self.w_values, t)
    }

    pub fn v_at(&self, t: f64) -> f64 {
        t * self.w_at(t)
    }

    pub fn vp_at(&self, t: f64) -> f64 {
        self.layout().interpolate(&self.vp_values, t)
    }

    /// `sup |w - a|` over the nodes.
    pub fn distance_from_a(&self) -> f64 {
        self.w_values.iter().map(|w| (w - self.a).abs()).fold(0.0, f64::max)
    }
}

/// Initial `eps`: `min(cap * R1, (a^{1+q} (1-beta)(2-beta) / (4 h1))^{1/(1-beta)})`,
/// where the leading singular correction to `w` stays below `a/4`.
pub fn initial_epsilon(a: f64, problem: &Problem, config: &StartupConfig) -> f64 {
    if let Some(eps) = config.epsilon {
        return eps;
    }
    let params = &problem.params;
    let gamma = params.startup_exponent();
    let (_, h1) = problem.h_envelope();
    let cap = config.eps_cap_rel * params.r1();
    if !(h1 > 0.0) || !problem.nonlinearity.is_singular() {
        return cap;
    }
    let q = params.q();
    let base = a.powf(1.0 + q) * gamma * (1.0 + gamma) / (4.0 * h1);
    cap.min(base.powf(1.0 / gamma))
}

pub fn fixed_point_solve(a: f64, problem: &Problem, config: &StartupConfig) -> Result<LocalSolution, StartupError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(StartupError::InvalidSlope(a));
    }
    let mut eps = initial_epsilon(a, problem, config);
    let tol = config.fp_tol_rel * a;
    // A contraction ratio is only meaningful well above round-off.
    let ratio_floor = 1e3 * tol;
    loop {
        if !(eps > f64::MIN_POSITIVE * 1e20) || eps < problem.params.r1() * 1e-250 {
            return Err(StartupError::EpsilonUnderflow(eps));
        }
        let grid = StartupGrid::new(problem, eps, config.m);
        match iterate(&grid, a, problem, config, tol, ratio_floor) {
            Ok(Some(sol)) => return Ok(sol),
            Ok(None) | Err(StartupError::NonpositiveIterate(_)) => eps *= 0.5,
            Err(e) => return Err(e),
        }
    }
}

/// Runs the iteration; `Ok(None)` asks for a smaller epsilon.
fn iterate(
    grid: &StartupGrid,
    a: f64,
    problem: &Problem,
    config: &StartupConfig,
    tol: f64,
    ratio_floor: f64,
) -> Result<Option<LocalSolution>, StartupError> {
    let mut w = vec![a; grid.t.len()];
    let mut prev_diff = f64::NAN;
    let mut contraction: f64 = 0.0;
    for it in 1..=config.max_iterations {
        let quad = quadratures(grid, &w, problem)?;
        let next = map_from_quadratures(grid, &quad, a);
        let diff = next.iter().zip(&w).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if next.iter().any(|x| (x - a).abs() > 0.5 * a) {
            return Ok(None);
        }
        if prev_diff.is_finite() && prev_diff > ratio_floor {
            let ratio = diff / prev_diff;
            contraction = contraction.max(ratio);
            if ratio >= 0.5 {
                return Ok(None);
            }
        }
        prev_diff = diff;
        w = next;
        if diff <= tol {
            let quad = quadratures(grid, &w, problem)?;
            let residual = map_from_quadratures(grid, &quad, a)
                .iter()
                .zip(&w)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let vp_values = quad.inner.iter().map(|i| a - i).collect();
            return Ok(Some(LocalSolution {
                a,
                epsilon: grid.epsilon,
                grid: grid.t.clone(),
                w_values: w,
                vp_values,
                iterations: it,
                contraction_estimate: contraction,
                residual,
                layout: Some(grid.clone()),
            }));
        }
    }
    Err(StartupError::MaxIterations(config.max_iterations))
}

/// Launch data `(v(eps), v'(eps))` for the main integrator.
pub fn eval_launch(local: &LocalSolution) -> (f64, f64) {
    let last = local.w_values.len() - 1;
    (local.epsilon * local.w_values[last], local.vp_values[last])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Nonlinearity, Problem, ProblemParams, RegularTerm};

    fn canonical() -> Problem {
        Problem::canonical(ProblemParams::canonical())
    }

    #[test]
    fn map_on_constant_matches_closed_form() {
        // w = 1, a = 1: T w = 1 - 3.2 t^{1/4} - t^{15/4} / (3.75 * 4.75).
        let prob = canonical();
        let grid = StartupGrid::new(&prob, 1e-4, 64);
        let w = vec![1.0; grid.points().len()];
        let tw = apply_t(&grid, &w, 1.0, &prob).unwrap();
        assert_eq!(tw[0], 1.0);
        for t in [1e-8, 1e-6, 1e-4] {
            let got = grid.interpolate(&tw, t);
            let want = 1.0 - 3.2 * t.powf(0.25) - t.powf(3.75) / (3.75 * 4.75);
            assert!((got - want).abs() < 1e-13, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn map_without_singular_part_linear_regular() {
        // g1(v) = v, w = a: T w = a - (a/t) ∫∫ x^{3/4} = a - a t^{7/4} / (1.75 * 2.75).
        let params = ProblemParams::canonical();
        let nl = Nonlinearity::canonical(3.0, 0.5)
            .without_singular()
            .with_regular(RegularTerm::Linear);
        let prob = Problem::new(params, nl, crate::model::KProfile::power(1.0, 3.75));
        let grid = StartupGrid::new(&prob, 1e-2, 64);
        let a = 0.7;
        let tw = apply_t(&grid, &vec![a; grid.points().len()], a, &prob).unwrap();
        for (t, v) in grid.points().iter().zip(&tw) {
            let want = a - a * t.powf(1.75) / (1.75 * 2.75);
            assert!((v - want).abs() < 1e-14, "{t}");
        }
    }

    #[test]
    fn fixed_point_basic_invariants() {
        let prob = canonical();
        let cfg = StartupConfig::default();
        let sol = fixed_point_solve(1.0, &prob, &cfg).unwrap();
        assert_eq!(sol.w_values[0], 1.0);
        assert!(sol.distance_from_a() <= 0.5);
        assert!(sol.contraction_estimate < 0.5);
        assert!(sol.residual <= 1e-12);
        let (v, vp) = eval_launch(&sol);
        assert!(v > 0.5 * sol.epsilon && v < sol.epsilon);
        assert!(vp > 0.0 && vp < 1.0);
        // eps from the policy: (0.3125 / 4)^4.
        assert!((sol.epsilon - (0.3125f64 / 4.0).powi(4)).abs() < 1e-18);
    }

    #[test]
    fn rejects_bad_slope() {
        let prob = canonical();
        assert_eq!(
            fixed_point_solve(0.0, &prob, &StartupConfig::default()).unwrap_err(),
            StartupError::InvalidSlope(0.0)
        );
    }

    #[test]
    fn oversized_epsilon_is_halved() {
        // At eps = 0.5 the first correction 3.2 eps^{1/4} exceeds a/2.
        let prob = canonical();
        let cfg = StartupConfig {
            epsilon: Some(0.5),
            ..Default::default()
        };
        let sol = fixed_point_solve(1.0, &prob, &cfg).unwrap();
        assert!(sol.epsilon < 0.5);
        assert!(sol.distance_from_a() <= 0.5);
        assert!(sol.contraction_estimate < 0.5);
    }
}
