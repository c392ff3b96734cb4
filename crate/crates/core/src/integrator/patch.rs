//! Crossing a zero of `v`, where `f` is singular but integrable.
//!
//! Inside the patch `h` is frozen, so `v'' = -h f(v)` conserves
//! `v'^2/2 + h F(v)` and the travel time from `|v| = d` to the zero is the
//! quadrature `∫_0^d du / sqrt(m^2 + 2h (F(d) - F(u)))`. The variation of `h`
//! is restored through the energy balance `dE/dt = h' F(v)` on each half, so
//! `E` cannot increase across a patch.

use crate::model::Problem;
use crate::quad::GaussRule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchOutcome {
    /// Zero location and slope there, unless the patch stopped at `R1` first.
    pub zero: Option<(f64, f64)>,
    pub t1: f64,
    pub v1: f64,
    pub vp1: f64,
    /// The patch was cut short at `R1`.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PatchError {
    SlopeFloorViolated {
        t: f64,
        slope: f64,
    },
    /// Energy balance left no kinetic energy at the zero.
    Degenerate {
        t: f64,
    },
}

#[derive(Debug, Clone)]
pub struct PatchRule {
    rule: GaussRule,
    kappa: f64,
    /// `y_k^kappa` and `kappa y_k^{kappa-1} w_k / 2` for the rule mapped to `[0, 1]`.
    frac: Vec<f64>,
    jac: Vec<f64>,
}

impl PatchRule {
    pub fn new(q: f64) -> Self {
        let rule = GaussRule::new(16);
        let kappa = 1.0 / (1.0 - q);
        let (nodes, weights) = rule.parts();
        let mut frac = Vec::with_capacity(nodes.len());
        let mut jac = Vec::with_capacity(nodes.len());
        for (x, w) in nodes.iter().zip(weights) {
            let y = 0.5 * (1.0 + x);
            frac.push(y.powf(kappa));
            jac.push(0.5 * w * kappa * y.powf(kappa - 1.0));
        }
        Self { rule, kappa, frac, jac }
    }

    /// Full-range version of [`Self::travel`] from tabulated `F(u_k)`.
    fn travel_full<S: Fn(f64) -> f64>(&self, d: f64, prims: &[f64], speed_sq_of_f: S) -> (f64, f64) {
        let mut time = 0.0;
        let mut weighted = 0.0;
        for (j, f) in self.jac.iter().zip(prims) {
            let inv = j / speed_sq_of_f(*f).max(0.0).sqrt();
            time += inv;
            weighted += inv * f;
        }
        (d * time, d * weighted)
    }

    /// `(∫ du / sqrt(S(u)), ∫ F(u) du / sqrt(S(u)))` over `u in [lo, hi] ⊂ [0, d]`,
    /// with `u = d y^kappa` to smooth the `u^{1-q}` term of `F`.
    fn travel<S, G>(&self, d: f64, kappa: f64, lo: f64, hi: f64, speed_sq: S, prim: G) -> (f64, f64)
    where
        S: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let ylo = (lo / d).max(0.0).powf(1.0 / kappa);
        let yhi = (hi / d).min(1.0).powf(1.0 / kappa);
        let mut time = 0.0;
        let mut weighted = 0.0;
        let push = |y: f64| {
            let u = d * y.powf(kappa);
            let jac = d * kappa * y.powf(kappa - 1.0);
            let inv = jac / speed_sq(u).max(0.0).sqrt();
            (inv, inv * prim(u))
        };
        let half = 0.5 * (yhi - ylo);
        let mid = 0.5 * (yhi + ylo);
        let (nodes, weights) = self.rule.parts();
        for (x, w) in nodes.iter().zip(weights) {
            let (a, b) = push(mid + half * x);
            time += w * a;
            weighted += w * b;
        }
        (time * half, weighted * half)
    }

    /// Advances `(t0, v0, m)` with `|v0| = d` small and `v0 m < 0` across the zero.
    pub fn cross(
        &self,
        problem: &Problem,
        t0: f64,
        v0: f64,
        m: f64,
        slope_floor: f64,
        r1: f64,
    ) -> Result<PatchOutcome, PatchError> {
        if m.abs() < slope_floor {
            return Err(PatchError::SlopeFloorViolated { t: t0, slope: m });
        }
        let nl = &problem.nonlinearity;
        let prim = |u: f64| nl.primitive(u);
        let d = v0.abs();
        let sv = v0.signum();
        let sm = m.signum();
        let kappa = self.kappa;
        let fd = prim(d);
        let h0 = problem.h(t0);
        let prims: Vec<f64> = self.frac.iter().map(|y| prim(d * y)).collect();

        // Approach half.
        let approach = |hbar: f64| move |u: f64| m * m + 2.0 * hbar * (fd - prim(u));
        let approach_f = |hbar: f64| move |f: f64| m * m + 2.0 * hbar * (fd - f);
        let (tau_guess, _) = self.travel_full(d, &prims, approach_f(h0));
        let hbar1 = problem.h((t0 + 0.5 * tau_guess).min(r1));
        let (tau1, fint1) = self.travel_full(d, &prims, approach_f(hbar1));
        let z = t0 + tau1;
        if z > r1 {
            let u = self.invert(d, kappa, r1 - t0, approach(hbar1), prim, true);
            return Ok(PatchOutcome {
                zero: None,
                t1: r1,
                v1: sv * u,
                vp1: sm * approach(hbar1)(u).max(0.0).sqrt(),
                truncated: true,
            });
        }
        let hz = problem.h(z);
        let de1 = (hz - h0) / tau1 * fint1;
        let pz = m * m + 2.0 * h0 * fd + 2.0 * de1;
        if !(pz > 0.0) {
            return Err(PatchError::Degenerate { t: z });
        }
        let slope_z = sm * pz.sqrt();

        // Departure half.
        let depart = |hbar: f64| move |u: f64| pz - 2.0 * hbar * prim(u);
        let depart_f = |hbar: f64| move |f: f64| pz - 2.0 * hbar * f;
        let (tau_guess, _) = self.travel_full(d, &prims, depart_f(hz));
        let hbar2 = problem.h((z + 0.5 * tau_guess).min(r1));
        let (tau2, fint2) = self.travel_full(d, &prims, depart_f(hbar2));
        let t1 = z + tau2;
        if t1 > r1 {
            let u = self.invert(d, kappa, r1 - z, depart(hbar2), prim, false);
            return Ok(PatchOutcome {
                zero: Some((z, slope_z)),
                t1: r1,
                v1: -sv * u,
                vp1: sm * depart(hbar2)(u).max(0.0).sqrt(),
                truncated: true,
            });
        }
        let h1 = problem.h(t1);
        let de2 = (h1 - hz) / tau2 * fint2;
        let p1 = pz - 2.0 * h1 * fd + 2.0 * de2;
        if !(p1 > 0.0) {
            return Err(PatchError::Degenerate { t: t1 });
        }
        Ok(PatchOutcome {
            zero: Some((z, slope_z)),
            t1,
            v1: -sv * d,
            vp1: sm * p1.sqrt(),
            truncated: false,
        })
    }

    /// `|v|` reached after travelling for `time`: from `d` downward on the
    /// approach half, from `0` upward on the departure half.
    fn invert<S, G>(&self, d: f64, kappa: f64, time: f64, speed_sq: S, prim: G, approach: bool) -> f64
    where
        S: Fn(f64) -> f64 + Copy,
        G: Fn(f64) -> f64 + Copy,
    {
        let (mut lo, mut hi) = (0.0, d);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let elapsed = if approach {
                self.travel(d, kappa, mid, d, speed_sq, prim).0
            } else {
                self.travel(d, kappa, 0.0, mid, speed_sq, prim).0
            };
            // Approach: elapsed shrinks as mid grows. Departure: it grows.
            let too_far = if approach { elapsed > time } else { elapsed < time };
            if too_far {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
