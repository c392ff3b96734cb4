use std::fmt;
use std::sync::Arc;

use super::ModelError;
use crate::quad::adaptive_gk;

/// Regular part `g1` of the nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularTerm {
    /// `|u|^{p-1} u`, the canonical choice.
    Power,
    /// `u`; used by the smooth surrogate problems in tests.
    Linear,
    Off,
}

/// Optional odd term added to the regular part. The closure is sampled on
/// `u > 0` only and extended as an odd function.
#[derive(Clone)]
pub struct Perturbation {
    name: String,
    positive_branch: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Perturbation {
    pub fn new<F>(name: impl Into<String>, positive_branch: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            positive_branch: Arc::new(positive_branch),
        }
    }

    /// `coeff * |u|^{exponent-1} u`.
    pub fn power(coeff: f64, exponent: f64) -> Self {
        Self::new(format!("{coeff}*|u|^{exponent}"), move |u: f64| {
            coeff * u.powf(exponent)
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        if u == 0.0 {
            0.0
        } else if u > 0.0 {
            (self.positive_branch)(u)
        } else {
            -(self.positive_branch)(-u)
        }
    }

    fn primitive(&self, u: f64) -> Option<f64> {
        let x = u.abs();
        if x == 0.0 {
            return Some(0.0);
        }
        adaptive_gk(|s| (self.positive_branch)(s), 0.0, x, 1e-300, 1e-14)
    }
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Perturbation").field("name", &self.name).finish()
    }
}

/// `f(u) = sign(u)|u|^{-q} + g1(u) + perturbation(u)`.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    p: f64,
    q: f64,
    singular: bool,
    regular: RegularTerm,
    perturbation: Option<Perturbation>,
}

impl Nonlinearity {
    pub fn canonical(p: f64, q: f64) -> Self {
        Self {
            p,
            q,
            singular: true,
            regular: RegularTerm::Power,
            perturbation: None,
        }
    }

    /// Test hook: drop the `sign(u)|u|^{-q}` term.
    pub fn without_singular(mut self) -> Self {
        self.singular = false;
        self
    }

    pub fn with_regular(mut self, regular: RegularTerm) -> Self {
        self.regular = regular;
        self
    }

    pub fn with_perturbation(mut self, perturbation: Perturbation) -> Self {
        self.perturbation = Some(perturbation);
        self
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn is_singular(&self) -> bool {
        self.singular
    }
    pub fn regular(&self) -> RegularTerm {
        self.regular
    }
    pub fn perturbation(&self) -> Option<&Perturbation> {
        self.perturbation.as_ref()
    }

    #[inline]
    pub fn singular_part(&self, u: f64) -> f64 {
        if self.singular {
            u.signum() * u.abs().powf(-self.q)
        } else {
            0.0
        }
    }

    /// `g1(u)` plus the perturbation; finite everywhere, zero at zero.
    #[inline]
    pub fn regular_part(&self, u: f64) -> f64 {
        let g = match self.regular {
            RegularTerm::Power => u * u.abs().powf(self.p - 1.0),
            RegularTerm::Linear => u,
            RegularTerm::Off => 0.0,
        };
        match &self.perturbation {
            Some(pert) => g + pert.eval(u),
            None => g,
        }
    }

    /// `f(u)` for any `u` the caller has already checked. At `u = 0` with the
    /// singular part active the value is meaningless.
    #[inline]
    pub(crate) fn force(&self, u: f64) -> f64 {
        self.singular_part(u) + self.regular_part(u)
    }

    pub fn f_eval(&self, u: f64) -> Result<f64, ModelError> {
        if u == 0.0 {
            return Err(ModelError::EvaluationAtZero);
        }
        Ok(self.force(u))
    }

    /// `F(u) = ∫_0^u f`. Closed form for the built-in terms; the perturbation's
    /// primitive comes from adaptive quadrature.
    pub fn big_f_eval(&self, u: f64) -> Result<f64, ModelError> {
        let x = u.abs();
        let mut acc = self.closed_form_primitive(x);
        if let Some(pert) = &self.perturbation {
            acc += pert.primitive(x).ok_or(ModelError::QuadratureFailure(u))?;
        }
        Ok(acc)
    }

    /// Primitive of the built-in terms only, evaluated at `|u|`.
    #[inline]
    pub(crate) fn closed_form_primitive(&self, x: f64) -> f64 {
        let x = x.abs();
        let mut acc = 0.0;
        if self.singular {
            acc += x.powf(1.0 - self.q) / (1.0 - self.q);
        }
        acc += match self.regular {
            RegularTerm::Power => x.powf(self.p + 1.0) / (self.p + 1.0),
            RegularTerm::Linear => 0.5 * x * x,
            RegularTerm::Off => 0.0,
        };
        acc
    }

    /// `F(u)` for internal use; falls back to a quadrature failure marker of NaN.
    #[inline]
    pub(crate) fn primitive(&self, u: f64) -> f64 {
        self.big_f_eval(u).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn canon() -> Nonlinearity {
        Nonlinearity::canonical(3.0, 0.5)
    }

    #[test]
    fn f_examples() {
        let nl = canon();
        assert_eq!(nl.f_eval(1.0).unwrap(), 2.0);
        assert_eq!(nl.f_eval(4.0).unwrap(), 64.5);
        assert_eq!(nl.f_eval(-1.0).unwrap(), -2.0);
        assert_eq!(nl.f_eval(0.0), Err(ModelError::EvaluationAtZero));
    }

    #[test]
    fn primitive_examples() {
        let nl = canon();
        assert_eq!(nl.big_f_eval(0.0).unwrap(), 0.0);
        assert_eq!(nl.big_f_eval(1.0).unwrap(), 2.25);
        assert_eq!(nl.big_f_eval(-1.0).unwrap(), 2.25);
    }

    #[test]
    fn perturbation_primitive_by_quadrature() {
        let nl = canon().with_perturbation(Perturbation::power(0.5, 2.0));
        let got = nl.big_f_eval(2.0).unwrap();
        let want = 16.0 / 4.0 + 2.0 * 2f64.sqrt() + 0.5 * 8.0 / 3.0;
        assert!((got - want).abs() < 1e-12, "{got} {want}");
        assert!((nl.f_eval(-2.0).unwrap() + nl.f_eval(2.0).unwrap()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn f_is_odd(u in -10.0f64..10.0) {
            prop_assume!(u != 0.0);
            let nl = canon().with_perturbation(Perturbation::power(0.3, 1.5));
            prop_assert_eq!(nl.f_eval(-u).unwrap(), -nl.f_eval(u).unwrap());
        }

        #[test]
        fn primitive_matches_f(u in 0.05f64..10.0, sign in prop::bool::ANY) {
            let u = if sign { u } else { -u };
            let nl = canon();
            let step = 1e-5 * u.abs();
            let fd = (nl.big_f_eval(u + step).unwrap() - nl.big_f_eval(u - step).unwrap()) / (2.0 * step);
            let f = nl.f_eval(u).unwrap();
            prop_assert!(((fd - f) / f).abs() <= 1e-6, "u={} fd={} f={}", u, fd, f);
        }

        #[test]
        fn primitive_even_and_positive(u in -10.0f64..10.0) {
            prop_assume!(u != 0.0);
            let nl = canon();
            let a = nl.big_f_eval(u).unwrap();
            prop_assert!(a > 0.0);
            prop_assert_eq!(a, nl.big_f_eval(-u).unwrap());
        }
    }
}
