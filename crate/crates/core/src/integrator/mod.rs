//! Adaptive integration of `v'' + h(t) f(v) = 0` from the launch point to `R1`.
//!
//! Zeros of `v` are crossed by [`PatchRule::cross`]; extrema (and, when the
//! singular part is disabled, zeros) are located on the dense output.

mod dopri;
mod patch;

pub use dopri::{fixed_steps, trial_step, DenseSegment, State, TrialStep};
pub use patch::{PatchError, PatchOutcome, PatchRule};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, Problem};
use crate::startup::{eval_launch, fixed_point_solve, LocalSolution, StartupConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("shooting slope a = {0} must be positive and finite")]
    InvalidSlope(f64),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("no sign change on bracket [{0}, {1}]")]
    BracketInvalid(f64, f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Patch trigger in `|v|`; `None` gives `max(1e-8, abs_tol^{1/(1-q)})`.
    pub delta_patch: Option<f64>,
    /// The trigger is also capped at `patch_rel * t * |v'|`.
    pub patch_rel: f64,
    pub event_tol: f64,
    /// Zeros this close to `R1` count as boundary zeros; `None` gives `1e2 * event_tol`.
    pub tol_bdry: Option<f64>,
    pub max_steps: u64,
    /// `slope_floor = slope_floor_rel * a`.
    pub slope_floor_rel: f64,
    /// Keep every `record_stride`-th step (the end points are always kept; with
    /// stride 1 every step, patch ends included).
    pub record_stride: usize,
    pub startup: StartupConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-14,
            delta_patch: None,
            patch_rel: 1e-3,
            event_tol: 1e-10,
            tol_bdry: None,
            max_steps: 50_000_000,
            slope_floor_rel: 1e-10,
            record_stride: 1,
            startup: StartupConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn delta_patch(&self, q: f64) -> f64 {
        self.delta_patch
            .unwrap_or_else(|| 1e-8f64.max(self.abs_tol.powf(1.0 / (1.0 - q))))
    }

    pub fn tol_bdry(&self) -> f64 {
        self.tol_bdry.unwrap_or(1e2 * self.event_tol)
    }

    /// Tolerances divided by `factor`; the boundary classification is kept.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            event_tol: self.event_tol / factor,
            tol_bdry: Some(self.tol_bdry()),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("patch_rel", self.patch_rel),
            ("event_tol", self.event_tol),
            ("tol_bdry", self.tol_bdry()),
            ("slope_floor_rel", self.slope_floor_rel),
            ("startup.fp_tol_rel", self.startup.fp_tol_rel),
            ("startup.eps_cap_rel", self.startup.eps_cap_rel),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(IntegratorError::InvalidConfig(format!("{name} = {value}")));
            }
        }
        if let Some(d) = self.delta_patch {
            if !(d > 0.0) {
                return Err(IntegratorError::InvalidConfig(format!("delta_patch = {d}")));
            }
        }
        if let Some(e) = self.startup.epsilon {
            if !(e > 0.0) {
                return Err(IntegratorError::InvalidConfig(format!("startup.epsilon = {e}")));
            }
        }
        if self.max_steps == 0 || self.record_stride == 0 || self.startup.m < 2 {
            return Err(IntegratorError::InvalidConfig(
                "max_steps, record_stride must be positive and startup.m >= 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    InteriorZero,
    Extremum,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub t_loc: f64,
    /// `v'` at a zero, and at the boundary.
    pub slope: Option<f64>,
    /// `v` at an extremum, and at the boundary.
    pub value: Option<f64>,
}

impl Event {
    fn zero(t_loc: f64, slope: f64) -> Self {
        Self {
            kind: EventKind::InteriorZero,
            t_loc,
            slope: Some(slope),
            value: None,
        }
    }

    fn extremum(t_loc: f64, value: f64) -> Self {
        Self {
            kind: EventKind::Extremum,
            t_loc,
            slope: None,
            value: Some(value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub v: f64,
    pub vp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "E1")]
    pub e1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    Startup,
    StepUnderflow,
    MaxStepsExceeded,
    SlopeFloorViolated,
    PatchDegenerate,
    AprioriBound,
    NonFinite,
    EventOrder,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailureKind::Startup => "startup",
            FailureKind::StepUnderflow => "step underflow",
            FailureKind::MaxStepsExceeded => "step budget exceeded",
            FailureKind::SlopeFloorViolated => "slope floor violated",
            FailureKind::PatchDegenerate => "degenerate patch",
            FailureKind::AprioriBound => "a-priori slope bound violated",
            FailureKind::NonFinite => "non-finite state",
            FailureKind::EventOrder => "event alternation broken",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Status {
    Completed,
    Failed { kind: FailureKind, t: f64, detail: String },
}

/// Worst per-step energy drifts, tracked on every step whatever is recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyMonitor {
    pub e_first: f64,
    pub e1_first: f64,
    pub e_last: f64,
    pub e1_last: f64,
    /// Largest `E(t_{k+1}) - E(t_k)` and where it ends.
    pub max_e_increase: f64,
    pub max_e_increase_at: f64,
    /// Largest `E1(t_k) - E1(t_{k+1})` and where it ends.
    pub max_e1_decrease: f64,
    pub max_e1_decrease_at: f64,
    pub max_vp_sq: f64,
}

impl EnergyMonitor {
    fn new(first: &EnergySample, vp: f64) -> Self {
        Self {
            e_first: first.e,
            e1_first: first.e1,
            e_last: first.e,
            e1_last: first.e1,
            max_e_increase: f64::NEG_INFINITY,
            max_e_increase_at: first.t,
            max_e1_decrease: f64::NEG_INFINITY,
            max_e1_decrease_at: first.t,
            max_vp_sq: vp * vp,
        }
    }

    fn push(&mut self, s: &EnergySample, vp: f64) {
        let inc = s.e - self.e_last;
        if inc > self.max_e_increase {
            self.max_e_increase = inc;
            self.max_e_increase_at = s.t;
        }
        let dec = self.e1_last - s.e1;
        if dec > self.max_e1_decrease {
            self.max_e1_decrease = dec;
            self.max_e1_decrease_at = s.t;
        }
        self.e_last = s.e;
        self.e1_last = s.e1;
        self.max_vp_sq = self.max_vp_sq.max(vp * vp);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: u64,
    pub rejected: u64,
    pub sign_rejections: u64,
    pub patches: u64,
    pub min_step: f64,
    pub max_step: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub a: f64,
    pub epsilon: f64,
    /// `(v(eps), v'(eps))`.
    pub launch: (f64, f64),
    pub samples: Vec<Sample>,
    pub energy_log: Vec<EnergySample>,
    pub events: Vec<Event>,
    pub status: Status,
    pub stats: IntegrationStats,
    pub monitor: Option<EnergyMonitor>,
    /// Largest `|v|` over the integrated range.
    pub peak_abs_v: f64,
    #[serde(skip)]
    pub local: Option<LocalSolution>,
}

impl Trajectory {
    pub fn is_completed(&self) -> bool {
        self.status == Status::Completed
    }

    pub fn last_sample(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn zeros(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind == EventKind::InteriorZero)
    }

    pub fn extrema(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind == EventKind::Extremum)
    }

    pub fn boundary(&self) -> Option<&Event> {
        self.events.iter().find(|e| e.kind == EventKind::Boundary)
    }

    /// The extremum immediately preceding `t`, if any.
    pub fn extremum_before(&self, t: f64) -> Option<&Event> {
        self.extrema().filter(|e| e.t_loc < t).last()
    }

    fn failed(a: f64, kind: FailureKind, t: f64, detail: String) -> Self {
        Self {
            a,
            epsilon: f64::NAN,
            launch: (f64::NAN, f64::NAN),
            samples: Vec::new(),
            energy_log: Vec::new(),
            events: Vec::new(),
            status: Status::Failed { kind, t, detail },
            stats: IntegrationStats::default(),
            monitor: None,
            peak_abs_v: f64::NAN,
            local: None,
        }
    }
}

/// `v'' = -h(t) f(v)`.
pub fn rhs(problem: &Problem, t: f64, v: f64) -> Result<f64, ModelError> {
    let h = problem.h_eval(t)?;
    Ok(-h * problem.f_eval(v)?)
}

pub fn energy(problem: &Problem, t: f64, v: f64, vp: f64) -> EnergySample {
    let h = problem.h(t);
    let big_f = problem.nonlinearity.primitive(v);
    EnergySample {
        t,
        e: 0.5 * vp * vp + h * big_f,
        e1: 0.5 * vp * vp / h + big_f,
    }
}

/// Right-hand side for the stepper. With the singular part active, any stage
/// at which `v` leaves the sign `sign` (or hits zero) aborts the step.
fn system<'a>(problem: &'a Problem, sign: f64) -> impl FnMut(f64, &State) -> Option<State> + 'a {
    let singular = problem.nonlinearity.is_singular();
    move |t: f64, y: &State| {
        if singular && !(y[0] * sign > 0.0) {
            return None;
        }
        let acc = -problem.h(t) * problem.nonlinearity.force(y[0]);
        if !acc.is_finite() {
            return None;
        }
        Some([y[1], acc])
    }
}

/// Fixed-step integration between two times (no events, no patches).
pub fn fixed_step(problem: &Problem, t0: f64, y0: State, t1: f64, steps: usize) -> Result<State, IntegratorError> {
    let mut f = system(problem, y0[0].signum());
    fixed_steps(&mut f, t0, y0, t1, steps).ok_or(IntegratorError::Model(ModelError::EvaluationAtZero))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventTarget {
    /// Sign change of `v`.
    Zero,
    /// Sign change of `v'`.
    Extremum,
}

/// Locates a sign change of `v` or `v'` on a dense-output segment.
pub fn locate_event(
    seg: &DenseSegment,
    bracket: (f64, f64),
    target: EventTarget,
    config: &SolverConfig,
) -> Result<Event, IntegratorError> {
    let comp = match target {
        EventTarget::Zero => 0,
        EventTarget::Extremum => 1,
    };
    let g = |t: f64| seg.eval(t)[comp];
    let (mut lo, mut hi) = bracket;
    let (mut glo, mut ghi) = (g(lo), g(hi));
    if !(glo * ghi <= 0.0) || !glo.is_finite() || !ghi.is_finite() {
        return Err(IntegratorError::BracketInvalid(lo, hi));
    }
    let value_tol = match target {
        EventTarget::Zero => config.abs_tol,
        EventTarget::Extremum => 0.0,
    };
    let root = if glo == 0.0 {
        lo
    } else if ghi == 0.0 {
        hi
    } else {
        // Illinois false position with a bisection safeguard.
        let mut side = 0i8;
        let mut best = lo;
        for _ in 0..300 {
            let width = hi - lo;
            let mut t = (lo * ghi - hi * glo) / (ghi - glo);
            if !(t > lo && t < hi) {
                t = lo + 0.5 * width;
            }
            let gt = g(t);
            best = t;
            if gt == 0.0 {
                break;
            }
            if gt * glo < 0.0 {
                hi = t;
                ghi = gt;
                if side == 1 {
                    glo *= 0.5;
                }
                side = 1;
            } else {
                lo = t;
                glo = gt;
                if side == -1 {
                    ghi *= 0.5;
                }
                side = -1;
            }
            let done_t = hi - lo <= config.event_tol;
            let done_v = gt.abs() <= value_tol;
            let stalled = hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs());
            if (done_t && (done_v || target == EventTarget::Extremum)) || stalled {
                break;
            }
        }
        best
    };
    let y = seg.eval(root);
    Ok(match target {
        EventTarget::Zero => Event::zero(root, y[1]),
        EventTarget::Extremum => Event::extremum(root, y[0]),
    })
}

/// Interior zeros: zero events with `t_loc < R1 - tol_bdry`.
pub fn count_interior_zeros(trajectory: &Trajectory, r1: f64, config: &SolverConfig) -> usize {
    let cut = r1 - config.tol_bdry();
    trajectory.zeros().filter(|e| e.t_loc < cut).count()
}

/// Zero events within `tol_bdry` of `R1`.
pub fn count_boundary_zeros(trajectory: &Trajectory, r1: f64, config: &SolverConfig) -> usize {
    let cut = r1 - config.tol_bdry();
    trajectory.zeros().filter(|e| e.t_loc >= cut).count()
}

struct Recorder<'a> {
    problem: &'a Problem,
    a: f64,
    stride: usize,
    samples: Vec<Sample>,
    energy_log: Vec<EnergySample>,
    events: Vec<Event>,
    monitor: EnergyMonitor,
    peak_abs_v: f64,
    since_record: usize,
}

impl<'a> Recorder<'a> {
    fn new(problem: &'a Problem, a: f64, stride: usize, t: f64, y: &State) -> Self {
        let e = energy(problem, t, y[0], y[1]);
        Self {
            problem,
            a,
            stride,
            samples: vec![Sample { t, v: y[0], vp: y[1] }],
            energy_log: vec![e],
            events: Vec::new(),
            monitor: EnergyMonitor::new(&e, y[1]),
            peak_abs_v: y[0].abs(),
            since_record: 0,
        }
    }

    /// Adds a point; `force` bypasses thinning.
    fn point(&mut self, t: f64, y: &State, force: bool) -> Result<(), (FailureKind, String)> {
        if !y[0].is_finite() || !y[1].is_finite() {
            return Err((FailureKind::NonFinite, format!("v = {}, v' = {}", y[0], y[1])));
        }
        if y[1] * y[1] > self.a * self.a * (1.0 + 1e-9) {
            return Err((
                FailureKind::AprioriBound,
                format!("|v'| = {} exceeds a = {}", y[1].abs(), self.a),
            ));
        }
        let e = energy(self.problem, t, y[0], y[1]);
        self.monitor.push(&e, y[1]);
        self.peak_abs_v = self.peak_abs_v.max(y[0].abs());
        self.since_record += 1;
        if force || self.since_record >= self.stride {
            self.samples.push(Sample { t, v: y[0], vp: y[1] });
            self.energy_log.push(e);
            self.since_record = 0;
        }
        Ok(())
    }

    fn event(&mut self, ev: Event) -> Result<(), (FailureKind, String)> {
        let expected = match self.events.last().map(|e| e.kind) {
            None | Some(EventKind::InteriorZero) => EventKind::Extremum,
            Some(EventKind::Extremum) => EventKind::InteriorZero,
            Some(EventKind::Boundary) => EventKind::Boundary,
        };
        if ev.kind != expected {
            return Err((
                FailureKind::EventOrder,
                format!("{:?} at t = {} where {:?} was expected", ev.kind, ev.t_loc, expected),
            ));
        }
        match ev.kind {
            EventKind::InteriorZero if ev.slope.is_none_or(|s| s == 0.0) => {
                return Err((
                    FailureKind::SlopeFloorViolated,
                    format!("zero slope at t = {}", ev.t_loc),
                ));
            }
            EventKind::Extremum => {
                if let Some(v) = ev.value {
                    self.peak_abs_v = self.peak_abs_v.max(v.abs());
                }
            }
            _ => {}
        }
        self.events.push(ev);
        Ok(())
    }
}

/// Integrates from the singular initial point `(0, 0, a)` to `R1`.
///
/// Invalid input is an error; numerical breakdown yields a trajectory with
/// [`Status::Failed`].
pub fn integrate(a: f64, problem: &Problem, config: &SolverConfig) -> Result<Trajectory, IntegratorError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(IntegratorError::InvalidSlope(a));
    }
    config.validate()?;
    let local = match fixed_point_solve(a, problem, &config.startup) {
        Ok(local) => local,
        Err(e) => return Ok(Trajectory::failed(a, FailureKind::Startup, 0.0, e.to_string())),
    };
    let launch = eval_launch(&local);
    let mut traj = run(a, problem, config, local.epsilon, launch);
    traj.local = Some(local);
    Ok(traj)
}

fn run(a: f64, problem: &Problem, config: &SolverConfig, eps: f64, launch: (f64, f64)) -> Trajectory {
    let r1 = problem.params.r1();
    let singular = problem.nonlinearity.is_singular();
    let delta = config.delta_patch(problem.params.q());
    let slope_floor = config.slope_floor_rel * a;
    let patcher = PatchRule::new(problem.params.q());

    let mut t = eps;
    let mut y: State = [launch.0, launch.1];
    let mut rec = Recorder::new(problem, a, config.record_stride, t, &y);
    let mut stats = IntegrationStats {
        min_step: f64::INFINITY,
        ..Default::default()
    };
    let mut h = (0.1 * eps).min(r1 - t);
    let mut k1 = system(problem, y[0].signum())(t, &y);

    let status = 'outer: loop {
        if t >= r1 {
            break Status::Completed;
        }
        if stats.accepted + stats.rejected >= config.max_steps {
            break Status::Failed {
                kind: FailureKind::MaxStepsExceeded,
                t,
                detail: format!("{} steps", config.max_steps),
            };
        }
        let approaching = singular && y[0] * y[1] < 0.0;
        let mut h_try = h;
        let mut capped = false;
        if approaching {
            let d_eff = delta.min(config.patch_rel * t * y[1].abs());
            if y[0].abs() <= 2.0 * d_eff {
                match patcher.cross(problem, t, y[0], y[1], slope_floor, r1) {
                    Ok(out) => {
                        stats.patches += 1;
                        if let Some((z, slope)) = out.zero {
                            if let Err((kind, detail)) = rec.event(Event::zero(z, slope)) {
                                break Status::Failed { kind, t: z, detail };
                            }
                        }
                        t = out.t1;
                        y = [out.v1, out.vp1];
                        if let Err((kind, detail)) = rec.point(t, &y, out.truncated || rec.stride == 1) {
                            break Status::Failed { kind, t, detail };
                        }
                        if t < r1 {
                            k1 = system(problem, y[0].signum())(t, &y);
                            if k1.is_none() {
                                break Status::Failed {
                                    kind: FailureKind::NonFinite,
                                    t,
                                    detail: "right-hand side after patch".into(),
                                };
                            }
                        }
                        continue;
                    }
                    Err(PatchError::SlopeFloorViolated { t, slope }) => {
                        break Status::Failed {
                            kind: FailureKind::SlopeFloorViolated,
                            t,
                            detail: format!("|v'| = {} below {}", slope.abs(), slope_floor),
                        };
                    }
                    Err(PatchError::Degenerate { t }) => {
                        break Status::Failed {
                            kind: FailureKind::PatchDegenerate,
                            t,
                            detail: "no kinetic energy left at the zero".into(),
                        };
                    }
                }
            }
            let cap = 0.5 * (y[0].abs() - d_eff) / y[1].abs();
            if cap < h_try {
                h_try = cap;
                capped = true;
            }
        } else if singular && y[1] != 0.0 {
            // Leaving a zero: the embedded estimate is blind to the |v|^{-q}
            // force, so |v| may at most triple per step.
            let cap = 2.0 * y[0].abs() / y[1].abs();
            if cap < h_try {
                h_try = cap;
                capped = true;
            }
        }
        let last = h_try >= r1 - t;
        if last {
            h_try = r1 - t;
        }
        let underflow = 4.0 * f64::EPSILON * t.max(1e-300);
        if h_try < underflow {
            break Status::Failed {
                kind: FailureKind::StepUnderflow,
                t,
                detail: format!("step {h_try:e}"),
            };
        }
        let Some(k1v) = k1 else {
            break Status::Failed {
                kind: FailureKind::NonFinite,
                t,
                detail: "right-hand side".into(),
            };
        };
        let sign = y[0].signum();
        let mut f = system(problem, if sign == 0.0 { 1.0 } else { sign });
        let trial = trial_step(&mut f, t, &y, &k1v, h_try);
        let Some(step) = trial else {
            stats.sign_rejections += 1;
            h = 0.25 * h_try;
            continue;
        };
        let size = y[0].abs().max(y[1].abs()).max(step.y1[0].abs()).max(step.y1[1].abs());
        let scale = config.abs_tol + config.rel_tol * size;
        let err = step.err[0].abs().max(step.err[1].abs()) / scale;
        if !err.is_finite() || err > 1.0 {
            stats.rejected += 1;
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).max(0.2)
            } else {
                0.2
            };
            h = h_try * factor;
            continue;
        }
        let t1 = if last { r1 } else { t + h_try };
        let y1 = step.y1;

        // Events inside the step, in time order.
        let mut found: Vec<Event> = Vec::with_capacity(2);
        let seg = &step.dense;
        if !singular && y[0] != 0.0 && y[0] * y1[0] <= 0.0 {
            match locate_event(seg, (t, t1), EventTarget::Zero, config) {
                Ok(ev) => found.push(ev),
                Err(_) => {
                    h = 0.5 * h_try;
                    continue;
                }
            }
        }
        if y[1] != 0.0 && y[1] * y1[1] <= 0.0 {
            match locate_event(seg, (t, t1), EventTarget::Extremum, config) {
                Ok(ev) => found.push(ev),
                Err(_) => {
                    h = 0.5 * h_try;
                    continue;
                }
            }
        }
        found.sort_by(|p, q| p.t_loc.total_cmp(&q.t_loc));
        for ev in found.iter() {
            if let Err((kind, detail)) = rec.event(*ev) {
                break 'outer Status::Failed {
                    kind,
                    t: ev.t_loc,
                    detail,
                };
            }
        }

        stats.accepted += 1;
        stats.min_step = stats.min_step.min(h_try);
        stats.max_step = stats.max_step.max(h_try);
        t = t1;
        y = y1;
        k1 = Some(step.k7);
        if let Err((kind, detail)) = rec.point(t, &y, last) {
            break Status::Failed { kind, t, detail };
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = if capped {
            (h_try * factor).max(h)
        } else {
            h_try * factor
        };
    };

    if status == Status::Completed {
        let end = rec.samples.last().copied().expect("recorder holds the launch sample");
        rec.events.push(Event {
            kind: EventKind::Boundary,
            t_loc: end.t,
            slope: Some(end.vp),
            value: Some(end.v),
        });
    } else if rec.samples.last().map(|s| s.t) != Some(t) && t.is_finite() {
        // Keep the state where the failure happened.
        rec.samples.push(Sample { t, v: y[0], vp: y[1] });
        rec.energy_log.push(energy(problem, t, y[0], y[1]));
    }
    if stats.min_step == f64::INFINITY {
        stats.min_step = 0.0;
    }
    Trajectory {
        a,
        epsilon: eps,
        launch,
        samples: rec.samples,
        energy_log: rec.energy_log,
        events: rec.events,
        status,
        stats,
        monitor: Some(rec.monitor),
        peak_abs_v: rec.peak_abs_v,
        local: None,
    }
}
