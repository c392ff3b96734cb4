//! Shooting solver for sign-changing radial solutions of
//! `Δu + K(|x|) f(u) = 0` outside a ball, with `f` singular at `u = 0`.
//!
//! After `u(r) = v(r^{2-N})` the problem is `v'' + h(t) f(v) = 0` on
//! `(0, R1]` with `v(0) = 0`, `v'(0) = a`. Trajectories are launched by a
//! fixed point near `t = 0` ([`startup`]), integrated through the zeros of
//! `v` ([`integrator`]) and classified by zero count ([`shooting`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod integrator;
pub mod model;
pub mod quad;
pub mod shooting;
pub mod startup;
