//! Problem data: exponents, the coefficient `K`, the nonlinearity `f`, the
//! transformed coefficient `h(t)` and hypothesis validation.
//!
//! The radial problem `u'' + (N-1)/r u' + K(r) f(u) = 0` on `r > R` becomes
//! `v'' + h(t) f(v) = 0` on `0 < t < R1` under `u(r) = v(r^{2-N})`, with
//! `h(t) = t^{2(N-1)/(2-N)} K(t^{1/(2-N)}) / (N-2)^2`.

mod exterior;
mod kprofile;
mod nonlinearity;

pub use exterior::{to_exterior, ExteriorSample, ExteriorSolution};
pub use kprofile::{check_h3, log_grid, H3Report, KFunction, KProfile, KShape};
pub use nonlinearity::{Nonlinearity, Perturbation, RegularTerm};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("dimension N = {0} must exceed 2")]
    DimensionTooSmall(f64),
    #[error("exponent out of range: {0}")]
    ExponentOutOfRange(String),
    #[error("(H3) alpha = {alpha} outside the open window ({lo}, {hi})")]
    AlphaOutOfWindow { alpha: f64, lo: f64, hi: f64 },
    #[error("inner radius R = {0} must be positive")]
    NonpositiveRadius(f64),
    #[error("nonlinearity evaluated at u = 0")]
    EvaluationAtZero,
    #[error("t = {0} outside (0, R1]")]
    NonpositiveT(f64),
    #[error("(H3) violated at r = {radius}: {detail}")]
    HypothesisViolated { radius: f64, detail: String },
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("primitive quadrature failed at u = {0}")]
    QuadratureFailure(f64),
}

/// Unvalidated parameter set as read from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub n: f64,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub r: f64,
}

impl RawParams {
    pub const CANONICAL: RawParams = RawParams {
        n: 3.0,
        p: 3.0,
        q: 0.5,
        alpha: 3.75,
        r: 1.0,
    };
}

/// Validated problem parameters with the derived `R1 = R^{2-N}` and
/// `tilde_alpha = (2(N-1) - alpha) / (N-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemParams {
    n: f64,
    p: f64,
    q: f64,
    alpha: f64,
    r: f64,
    r1: f64,
    tilde_alpha: f64,
}

impl ProblemParams {
    pub fn canonical() -> Self {
        validate_params(RawParams::CANONICAL).expect("canonical parameters are admissible")
    }

    /// Builds parameters without checking the hypotheses. Only meant for
    /// exercising downstream validation on inadmissible data.
    #[doc(hidden)]
    pub fn new_unchecked(raw: RawParams) -> Self {
        let RawParams { n, p, q, alpha, r } = raw;
        Self {
            n,
            p,
            q,
            alpha,
            r,
            r1: r.powf(2.0 - n),
            tilde_alpha: (2.0 * (n - 1.0) - alpha) / (n - 2.0),
        }
    }

    pub fn n(&self) -> f64 {
        self.n
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn r1(&self) -> f64 {
        self.r1
    }
    pub fn tilde_alpha(&self) -> f64 {
        self.tilde_alpha
    }

    /// `1 - tilde_alpha - q`, the exponent governing the singular start.
    pub fn startup_exponent(&self) -> f64 {
        1.0 - self.tilde_alpha - self.q
    }

    pub fn raw(&self) -> RawParams {
        RawParams {
            n: self.n,
            p: self.p,
            q: self.q,
            alpha: self.alpha,
            r: self.r,
        }
    }

    /// Open window for alpha: `(N + q(N-2), 2(N-1))`.
    pub fn alpha_window(n: f64, q: f64) -> (f64, f64) {
        (n + q * (n - 2.0), 2.0 * (n - 1.0))
    }
}

pub fn validate_params(raw: RawParams) -> Result<ProblemParams, ModelError> {
    let RawParams { n, p, q, alpha, r } = raw;
    for (name, v) in [("N", n), ("p", p), ("q", q), ("alpha", alpha), ("R", r)] {
        if !v.is_finite() {
            return Err(ModelError::NonFinite(name));
        }
    }
    if n <= 2.0 {
        return Err(ModelError::DimensionTooSmall(n));
    }
    if p <= 1.0 {
        return Err(ModelError::ExponentOutOfRange(format!("p = {p} must exceed 1")));
    }
    if q <= 0.0 || q >= 1.0 {
        return Err(ModelError::ExponentOutOfRange(format!("q = {q} must lie in (0, 1)")));
    }
    if r <= 0.0 {
        return Err(ModelError::NonpositiveRadius(r));
    }
    let (lo, hi) = ProblemParams::alpha_window(n, q);
    if alpha <= lo || alpha >= hi {
        return Err(ModelError::AlphaOutOfWindow { alpha, lo, hi });
    }
    let params = ProblemParams::new_unchecked(raw);
    // Equivalent to the window, but rounding can still bite at its edges.
    let ta = params.tilde_alpha;
    if !(ta > 0.0 && ta < 1.0 - q) {
        return Err(ModelError::AlphaOutOfWindow { alpha, lo, hi });
    }
    Ok(params)
}

/// Complete problem: parameters, nonlinearity and coefficient profile.
#[derive(Debug, Clone)]
pub struct Problem {
    pub params: ProblemParams,
    pub nonlinearity: Nonlinearity,
    pub k: KProfile,
    constant_h: Option<f64>,
    // (N-2)^2, 2(N-1)/(2-N), 1/(2-N)
    scale: f64,
    t_power: f64,
    r_power: f64,
    // h = c t^{-tilde_alpha} when K is a pure power.
    power_h: Option<f64>,
}

impl Problem {
    pub fn new(params: ProblemParams, nonlinearity: Nonlinearity, k: KProfile) -> Self {
        let n = params.n;
        let scale = (n - 2.0) * (n - 2.0);
        let power_h = match k.shape() {
            KShape::Power if k.alpha() == params.alpha => Some(k.k_scale() / scale),
            _ => None,
        };
        Self {
            params,
            nonlinearity,
            k,
            constant_h: None,
            scale,
            t_power: 2.0 * (n - 1.0) / (2.0 - n),
            r_power: 1.0 / (2.0 - n),
            power_h,
        }
    }

    /// Canonical model: `f(u) = |u|^{p-1}u + sign(u)|u|^{-q}`, `K(r) = r^{-alpha}`.
    pub fn canonical(params: ProblemParams) -> Self {
        let nl = Nonlinearity::canonical(params.p, params.q);
        let k = KProfile::power(1.0, params.alpha);
        Self::new(params, nl, k)
    }

    /// Diagnostic hook: replace `h` by the constant `value` (so `h' = 0`).
    pub fn with_constant_h(mut self, value: f64) -> Self {
        self.constant_h = Some(value);
        self
    }

    pub fn constant_h(&self) -> Option<f64> {
        self.constant_h
    }

    fn check_t(&self, t: f64) -> Result<(), ModelError> {
        if !(t > 0.0) || t > self.params.r1 * (1.0 + 1e-12) {
            return Err(ModelError::NonpositiveT(t));
        }
        Ok(())
    }

    pub fn f_eval(&self, u: f64) -> Result<f64, ModelError> {
        self.nonlinearity.f_eval(u)
    }

    pub fn big_f_eval(&self, u: f64) -> Result<f64, ModelError> {
        self.nonlinearity.big_f_eval(u)
    }

    pub fn h_eval(&self, t: f64) -> Result<f64, ModelError> {
        self.check_t(t)?;
        Ok(self.h(t))
    }

    /// `h(t)` without the domain check; `t > 0` is the caller's job.
    #[inline]
    pub fn h(&self, t: f64) -> f64 {
        if let Some(c) = self.constant_h {
            return c;
        }
        if let Some(c) = self.power_h {
            return c * t.powf(-self.params.tilde_alpha);
        }
        let r = t.powf(self.r_power);
        t.powf(self.t_power) * self.k.eval(r) / self.scale
    }

    /// `h'(t)`, from `K'` by the chain rule.
    pub fn h_prime(&self, t: f64) -> f64 {
        if self.constant_h.is_some() {
            return 0.0;
        }
        self.h(t) * self.log_derivative_unchecked(t) / t
    }

    pub fn h_log_derivative(&self, t: f64) -> Result<f64, ModelError> {
        self.check_t(t)?;
        Ok(self.log_derivative_unchecked(t))
    }

    fn log_derivative_unchecked(&self, t: f64) -> f64 {
        if self.constant_h.is_some() {
            return 0.0;
        }
        let r = t.powf(self.r_power);
        self.t_power + self.r_power * r * self.k.derivative(r) / self.k.eval(r)
    }

    /// `H(t) = h(t) t^{tilde_alpha}`, bounded on `[0, R1]`; at `t = 0` the limit.
    pub fn h_scaled(&self, t: f64) -> f64 {
        let ta = self.params.tilde_alpha;
        if let Some(c) = self.constant_h {
            return c * t.powf(ta);
        }
        if t == 0.0 {
            return self.k.tail_amplitude() / self.scale;
        }
        let r = t.powf(self.r_power);
        self.k.eval(r) * r.powf(self.k.alpha()) / self.scale
    }

    /// Envelope constants `(h0, h1)` with `h0 t^{-ta} <= h <= h1 t^{-ta}`.
    pub fn h_envelope(&self) -> (f64, f64) {
        if let Some(c) = self.constant_h {
            return (0.0, c * self.params.r1.powf(self.params.tilde_alpha));
        }
        (self.k.k0() / self.scale, self.k.k1() / self.scale)
    }
}
