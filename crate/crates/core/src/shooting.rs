//! Zero-count classification of shooting slopes and the two families of
//! boundary-value solutions at the ends of each count set `S_n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{
    count_boundary_zeros, count_interior_zeros, integrate, FailureKind, IntegratorError, SolverConfig, Status,
    Trajectory,
};
use crate::model::Problem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShootingError {
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error("scan needs 0 < a_lo < a_hi and count >= 2 (got {a_lo}, {a_hi}, {count})")]
    InvalidScan { a_lo: f64, a_hi: f64, count: usize },
    #[error("every shot in the scan failed")]
    AllShotsFailed,
    #[error("unresolved bracket [{a_minus}, {a_plus}] with counts {n_minus} -> {n_plus}: {reason}")]
    UnresolvedBracket {
        a_minus: f64,
        a_plus: f64,
        n_minus: usize,
        n_plus: usize,
        reason: String,
    },
    #[error("residual polish failed near a = {a}: {reason}")]
    PolishDiverged { a: f64, reason: String },
    #[error("family extraction budget exceeded: {0}")]
    BudgetExceeded(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSummary {
    pub a: f64,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub v_r1: f64,
    pub vp_r1: f64,
    pub first_zero: Option<f64>,
    pub first_zero_slope: Option<f64>,
    pub last_zero: Option<f64>,
    pub last_zero_slope: Option<f64>,
    /// `(M_a, v(M_a))`.
    pub first_extremum: Option<(f64, f64)>,
    /// `max(|v(eps)|, |v(extrema)|, |v(R1)|)`, which is `sup |v|` since `v`
    /// is monotone between consecutive events.
    pub max_abs_v: f64,
    pub status: ShotStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShotStatus {
    Completed,
    Failed(FailureKind),
}

impl ShotStatus {
    pub fn label(&self) -> String {
        match self {
            ShotStatus::Completed => "completed".into(),
            ShotStatus::Failed(kind) => format!(
                "failed:{}",
                serde_json::to_value(kind)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default()
            ),
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        if label == "completed" {
            return Some(ShotStatus::Completed);
        }
        let kind = label.strip_prefix("failed:")?;
        serde_json::from_value(serde_json::Value::String(kind.into()))
            .ok()
            .map(ShotStatus::Failed)
    }
}

impl ShotSummary {
    pub fn is_completed(&self) -> bool {
        self.status == ShotStatus::Completed
    }

    pub fn from_trajectory(traj: &Trajectory, r1: f64, config: &SolverConfig) -> Self {
        let status = match &traj.status {
            Status::Completed => ShotStatus::Completed,
            Status::Failed { kind, .. } => ShotStatus::Failed(*kind),
        };
        let cut = r1 - config.tol_bdry();
        let interior: Vec<_> = traj.zeros().filter(|e| e.t_loc < cut).collect();
        let end = traj.samples.last();
        let mut max_abs_v = traj.launch.0.abs();
        for e in traj.extrema() {
            max_abs_v = max_abs_v.max(e.value.unwrap_or(0.0).abs());
        }
        if let Some(s) = end {
            max_abs_v = max_abs_v.max(s.v.abs());
        }
        let completed = status == ShotStatus::Completed;
        Self {
            a: traj.a,
            n_interior: if completed {
                count_interior_zeros(traj, r1, config)
            } else {
                interior.len()
            },
            n_boundary: count_boundary_zeros(traj, r1, config),
            v_r1: if completed {
                end.map_or(f64::NAN, |s| s.v)
            } else {
                f64::NAN
            },
            vp_r1: if completed {
                end.map_or(f64::NAN, |s| s.vp)
            } else {
                f64::NAN
            },
            first_zero: interior.first().map(|e| e.t_loc),
            first_zero_slope: interior.first().and_then(|e| e.slope),
            last_zero: interior.last().map(|e| e.t_loc),
            last_zero_slope: interior.last().and_then(|e| e.slope),
            first_extremum: traj.extrema().next().map(|e| (e.t_loc, e.value.unwrap_or(f64::NAN))),
            max_abs_v,
            status,
        }
    }
}

/// Integrates one slope and keeps the trajectory.
pub fn shoot_trajectory(
    a: f64,
    problem: &Problem,
    config: &SolverConfig,
) -> Result<(ShotSummary, Trajectory), ShootingError> {
    let traj = integrate(a, problem, config)?;
    Ok((ShotSummary::from_trajectory(&traj, problem.params.r1(), config), traj))
}

pub fn shoot(a: f64, problem: &Problem, config: &SolverConfig) -> Result<ShotSummary, ShootingError> {
    shoot_trajectory(a, problem, &sparse(config)).map(|r| r.0)
}

/// Recording only what summaries need.
fn sparse(config: &SolverConfig) -> SolverConfig {
    SolverConfig {
        record_stride: config.record_stride.max(1 << 20),
        ..*config
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub shots: Vec<ShotSummary>,
}

impl ScanResult {
    pub fn completed(&self) -> impl Iterator<Item = &ShotSummary> {
        self.shots.iter().filter(|s| s.is_completed())
    }

    /// Merges shots from another scan, keeping slopes sorted and unique.
    pub fn merge(&mut self, other: ScanResult) {
        self.shots.extend(other.shots);
        self.shots.sort_by(|p, q| p.a.total_cmp(&q.a));
        self.shots.dedup_by(|p, q| p.a == q.a);
    }
}

pub fn grid(a_lo: f64, a_hi: f64, count: usize, spacing: Spacing) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let s = i as f64 / (count - 1) as f64;
            if i == 0 {
                a_lo
            } else if i == count - 1 {
                a_hi
            } else {
                match spacing {
                    Spacing::Log => (a_lo.ln() + s * (a_hi.ln() - a_lo.ln())).exp(),
                    Spacing::Linear => a_lo + s * (a_hi - a_lo),
                }
            }
        })
        .collect()
}

/// Shoots every slope concurrently; order is preserved and failures are holes.
pub fn scan_slopes(slopes: &[f64], problem: &Problem, config: &SolverConfig) -> Result<ScanResult, ShootingError> {
    let shots: Vec<ShotSummary> = slopes
        .par_iter()
        .map(|&a| shoot(a, problem, config))
        .collect::<Result<_, _>>()?;
    if !shots.is_empty() && shots.iter().all(|s| !s.is_completed()) {
        return Err(ShootingError::AllShotsFailed);
    }
    Ok(ScanResult { shots })
}

pub fn scan(
    a_lo: f64,
    a_hi: f64,
    count: usize,
    spacing: Spacing,
    problem: &Problem,
    config: &SolverConfig,
) -> Result<ScanResult, ShootingError> {
    if !(a_lo > 0.0) || !(a_hi > a_lo) || !a_hi.is_finite() || count < 2 {
        return Err(ShootingError::InvalidScan { a_lo, a_hi, count });
    }
    scan_slopes(&grid(a_lo, a_hi, count, spacing), problem, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BracketKind {
    /// Counts differ by one.
    Simple,
    /// Counts differ by more than one; needs a finer grid.
    Multi,
    /// A failed shot sits between the two ends.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub a_minus: f64,
    pub a_plus: f64,
    pub n_minus: usize,
    pub n_plus: usize,
    pub kind: BracketKind,
}

/// Adjacent successful slopes with different counts.
pub fn bracket_transitions(scan: &ScanResult) -> Vec<Bracket> {
    let mut out = Vec::new();
    let mut prev: Option<&ShotSummary> = None;
    let mut hole = false;
    for shot in &scan.shots {
        if !shot.is_completed() {
            hole = true;
            continue;
        }
        if let Some(p) = prev {
            if p.n_interior != shot.n_interior {
                let kind = if hole {
                    BracketKind::Unresolved
                } else if p.n_interior.abs_diff(shot.n_interior) == 1 {
                    BracketKind::Simple
                } else {
                    BracketKind::Multi
                };
                out.push(Bracket {
                    a_minus: p.a,
                    a_plus: shot.a,
                    n_minus: p.n_interior,
                    n_plus: shot.n_interior,
                    kind,
                });
            }
        }
        prev = Some(shot);
        hole = false;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// `sup S_n`: count `n` below, `n + 1` above.
    Sup,
    /// `inf S_n`: count `n + 1` below, `n` above.
    Inf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyConfig {
    /// Bisection stops at width `a_tol_rel * a`.
    pub a_tol_rel: f64,
    /// `tol_bvp = tol_bvp_rel * max(1, a_star)`.
    pub tol_bvp_rel: f64,
    /// Tolerance factor of the certification re-run.
    pub certify_factor: f64,
    /// Points per refinement grid of a multi-transition bracket.
    pub refine_points: usize,
    pub refine_depth: usize,
    /// Limits for adaptive scan extension.
    pub a_min: f64,
    pub a_max: f64,
    pub max_extensions: usize,
    pub polish_iterations: usize,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            a_tol_rel: 1e-12,
            tol_bvp_rel: 1e-8,
            certify_factor: 10.0,
            refine_points: 10,
            refine_depth: 6,
            a_min: 0.1,
            a_max: 1e6,
            max_extensions: 6,
            polish_iterations: 12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyEntry {
    pub n: usize,
    pub kind: FamilyKind,
    pub a_star: f64,
    /// `|v(R1)|` at `a_star`.
    pub residual: f64,
    pub tol_bvp: f64,
    /// Final bisection bracket, ascending.
    pub bracket: (f64, f64),
    /// Count and residual of the re-run at tightened tolerances.
    pub certified_count: usize,
    pub certified_residual: f64,
    pub summary: ShotSummary,
    #[serde(skip)]
    pub profile: Trajectory,
}

/// Bisects a simple bracket on the zero count, then polishes `v(R1) = 0` by
/// a secant step kept on the count-`n` side.
pub fn refine_family_point(
    bracket: &Bracket,
    problem: &Problem,
    solver: &SolverConfig,
    family: &FamilyConfig,
) -> Result<FamilyEntry, ShootingError> {
    let unresolved = |reason: &str| ShootingError::UnresolvedBracket {
        a_minus: bracket.a_minus,
        a_plus: bracket.a_plus,
        n_minus: bracket.n_minus,
        n_plus: bracket.n_plus,
        reason: reason.into(),
    };
    if bracket.n_minus.abs_diff(bracket.n_plus) != 1 || !(bracket.a_minus < bracket.a_plus) {
        return Err(unresolved("counts must differ by exactly one"));
    }
    let (kind, n) = if bracket.n_minus < bracket.n_plus {
        (FamilyKind::Sup, bracket.n_minus)
    } else {
        (FamilyKind::Inf, bracket.n_plus)
    };
    // `inside` has count n, `outside` count n + 1.
    let (mut inside, mut outside) = match kind {
        FamilyKind::Sup => (bracket.a_minus, bracket.a_plus),
        FamilyKind::Inf => (bracket.a_plus, bracket.a_minus),
    };
    let sparse_cfg = sparse(solver);
    let classify = |a: f64| -> Result<ShotSummary, ShootingError> {
        let s = shoot(a, problem, &sparse_cfg)?;
        if !s.is_completed() {
            return Err(unresolved(&format!("shot failed at a = {a}")));
        }
        Ok(s)
    };
    let mut s_in = classify(inside)?;
    let mut s_out = classify(outside)?;
    if s_in.n_interior != n || s_out.n_interior != n + 1 {
        return Err(unresolved("end points do not reproduce the bracket counts"));
    }
    while (outside - inside).abs() > family.a_tol_rel * inside.max(outside) {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        let s = classify(mid)?;
        if s.n_interior == n {
            inside = mid;
            s_in = s;
        } else if s.n_interior == n + 1 {
            outside = mid;
            s_out = s;
        } else {
            return Err(unresolved(&format!("count {} at a = {mid}", s.n_interior)));
        }
    }

    // The count changes where the zero enters the boundary band, slightly
    // before `v(R1) = 0`. Secant iterates on `v(R1)` may leave the bracket
    // but are accepted only with count `n` and a smaller residual.
    let mut a_star = inside;
    let mut best = s_in.clone();
    let target = 1e-3 * family.tol_bvp_rel * inside.max(1.0);
    let (mut a0, mut r0, mut a1, mut r1v) = (outside, s_out.v_r1, inside, s_in.v_r1);
    for _ in 0..family.polish_iterations {
        if best.v_r1.abs() <= target || r1v == r0 || !(r1v - r0).is_finite() {
            break;
        }
        let cand = a1 - r1v * (a1 - a0) / (r1v - r0);
        if !(cand > 0.0) || !cand.is_finite() || cand == a1 {
            break;
        }
        let s = shoot(cand, problem, &sparse_cfg)?;
        if !s.is_completed() {
            break;
        }
        if s.n_interior == n && s.v_r1.abs() < best.v_r1.abs() {
            a_star = cand;
            best = s.clone();
        }
        (a0, r0, a1, r1v) = (a1, r1v, cand, s.v_r1);
    }
    let tol_bvp = family.tol_bvp_rel * a_star.max(1.0);
    let residual = best.v_r1.abs();
    if !(residual <= tol_bvp) {
        return Err(ShootingError::PolishDiverged {
            a: a_star,
            reason: format!("residual {residual:e} above {tol_bvp:e}"),
        });
    }
    let (summary, profile) = shoot_trajectory(a_star, problem, solver)?;
    if summary.n_interior != n {
        return Err(unresolved("full re-run changed the count"));
    }
    let tight = solver.tightened(family.certify_factor);
    let check = shoot(a_star, problem, &tight)?;
    Ok(FamilyEntry {
        n,
        kind,
        a_star,
        residual: summary.v_r1.abs(),
        tol_bvp,
        bracket: (inside.min(outside), inside.max(outside)),
        certified_count: check.n_interior,
        certified_residual: check.v_r1.abs(),
        summary,
        profile,
    })
}

impl FamilyEntry {
    /// Count preserved and residual within `10 tol_bvp` at tightened tolerances.
    pub fn is_certified(&self) -> bool {
        self.residual <= self.tol_bvp
            && self.certified_count == self.n
            && self.certified_residual <= 10.0 * self.tol_bvp
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Families {
    pub n0: usize,
    pub sup_family: Vec<FamilyEntry>,
    pub inf_family: Vec<FamilyEntry>,
    /// Indices where `sup S_n` and `inf S_n` coincide within `a_tol`.
    pub degenerate: Vec<usize>,
    /// The scan after adaptive extension and refinement.
    pub scan: ScanResult,
}

/// Ends of `S_n` on either side: the highest slope with count `n` and its
/// upper neighbour, or the lowest and its lower neighbour.
fn find_bracket(scan: &ScanResult, n: usize, kind: FamilyKind) -> Option<Bracket> {
    let ok: Vec<&ShotSummary> = scan.completed().collect();
    match kind {
        FamilyKind::Sup => {
            let i = ok.iter().rposition(|s| s.n_interior == n)?;
            let next = ok.get(i + 1)?;
            Some(make_bracket(scan, ok[i], next))
        }
        FamilyKind::Inf => {
            let i = ok.iter().position(|s| s.n_interior == n)?;
            let prev = ok.get(i.checked_sub(1)?)?;
            Some(make_bracket(scan, prev, ok[i]))
        }
    }
}

fn make_bracket(scan: &ScanResult, lo: &ShotSummary, hi: &ShotSummary) -> Bracket {
    let hole = scan.shots.iter().any(|s| !s.is_completed() && s.a > lo.a && s.a < hi.a);
    let kind = if hole {
        BracketKind::Unresolved
    } else if lo.n_interior.abs_diff(hi.n_interior) == 1 {
        BracketKind::Simple
    } else {
        BracketKind::Multi
    };
    Bracket {
        a_minus: lo.a,
        a_plus: hi.a,
        n_minus: lo.n_interior,
        n_plus: hi.n_interior,
        kind,
    }
}

/// Finds simple brackets for `sup S_n` and `inf S_n`, `n = n0 .. n0 + m - 1`,
/// refining and extending the scan as needed, and solves each family point.
pub fn extract_families(
    scan: &ScanResult,
    m: usize,
    problem: &Problem,
    solver: &SolverConfig,
    family: &FamilyConfig,
) -> Result<Families, ShootingError> {
    let mut scan = scan.clone();
    let n0 = scan
        .completed()
        .map(|s| s.n_interior)
        .min()
        .ok_or(ShootingError::AllShotsFailed)?;
    let density = {
        let a: Vec<f64> = scan.shots.iter().map(|s| s.a).collect();
        let decades = (a.last().unwrap() / a[0]).log10().max(1e-3);
        ((a.len() as f64 / decades).ceil() as usize).max(4)
    };
    let mut jobs: Vec<(usize, FamilyKind, Bracket)> = Vec::new();
    for kind in [FamilyKind::Sup, FamilyKind::Inf] {
        for n in n0..n0 + m {
            let bracket = settle_bracket(&mut scan, n, kind, density, problem, solver, family)?;
            jobs.push((n, kind, bracket));
        }
    }
    let entries: Vec<FamilyEntry> = jobs
        .par_iter()
        .map(|(_, _, b)| refine_family_point(b, problem, solver, family))
        .collect::<Result<_, _>>()?;
    let (sup_family, inf_family): (Vec<_>, Vec<_>) = entries.into_iter().partition(|e| e.kind == FamilyKind::Sup);
    let degenerate = sup_family
        .iter()
        .zip(&inf_family)
        .filter(|(s, i)| (s.a_star - i.a_star).abs() <= family.a_tol_rel * s.a_star.max(i.a_star) * 10.0)
        .map(|(s, _)| s.n)
        .collect();
    Ok(Families {
        n0,
        sup_family,
        inf_family,
        degenerate,
        scan,
    })
}

fn settle_bracket(
    scan: &mut ScanResult,
    n: usize,
    kind: FamilyKind,
    density: usize,
    problem: &Problem,
    solver: &SolverConfig,
    family: &FamilyConfig,
) -> Result<Bracket, ShootingError> {
    let mut extensions = 0;
    let mut depth = 0;
    loop {
        match find_bracket(scan, n, kind) {
            Some(b) if b.kind == BracketKind::Simple && b.n_minus.abs_diff(b.n_plus) == 1 => return Ok(b),
            Some(b) if b.kind == BracketKind::Simple => unreachable!("{b:?}"),
            Some(b) => {
                if depth >= family.refine_depth {
                    return Err(ShootingError::UnresolvedBracket {
                        a_minus: b.a_minus,
                        a_plus: b.a_plus,
                        n_minus: b.n_minus,
                        n_plus: b.n_plus,
                        reason: format!("still {:?} after {depth} refinements", b.kind),
                    });
                }
                depth += 1;
                let pts = grid(b.a_minus, b.a_plus, family.refine_points + 2, Spacing::Log);
                let inner = &pts[1..pts.len() - 1];
                let extra = scan_slopes(inner, problem, solver)?;
                scan.merge(extra);
            }
            None => {
                // Count n not yet bracketed on this side: widen the scan.
                if extensions >= family.max_extensions {
                    return Err(ShootingError::BudgetExceeded(format!(
                        "no {kind:?} bracket for n = {n} after {extensions} extensions"
                    )));
                }
                extensions += 1;
                let lo = scan.shots.first().map(|s| s.a).unwrap();
                let hi = scan.shots.last().map(|s| s.a).unwrap();
                let range = match kind {
                    FamilyKind::Sup if hi < family.a_max => (hi, (hi * 10.0).min(family.a_max)),
                    FamilyKind::Inf if lo > family.a_min => ((lo / 10.0).max(family.a_min), lo),
                    _ => {
                        return Err(ShootingError::BudgetExceeded(format!(
                            "slope limit reached looking for the {kind:?} end of S_{n}"
                        )))
                    }
                };
                let count = density.max(3);
                let pts = grid(range.0, range.1, count + 1, Spacing::Log);
                let new = match kind {
                    FamilyKind::Sup => &pts[1..],
                    FamilyKind::Inf => &pts[..pts.len() - 1],
                };
                let extra = scan_slopes(new, problem, solver)?;
                scan.merge(extra);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProblemParams;

    fn shot(a: f64, n: usize, ok: bool) -> ShotSummary {
        ShotSummary {
            a,
            n_interior: n,
            n_boundary: 0,
            v_r1: 0.0,
            vp_r1: 0.0,
            first_zero: None,
            first_zero_slope: None,
            last_zero: None,
            last_zero_slope: None,
            first_extremum: None,
            max_abs_v: 0.0,
            status: if ok {
                ShotStatus::Completed
            } else {
                ShotStatus::Failed(FailureKind::StepUnderflow)
            },
        }
    }

    fn scan_of(v: &[(f64, usize, bool)]) -> ScanResult {
        ScanResult {
            shots: v.iter().map(|&(a, n, ok)| shot(a, n, ok)).collect(),
        }
    }

    #[test]
    fn bracket_adjacency_rules() {
        assert!(bracket_transitions(&scan_of(&[(1.0, 2, true), (2.0, 2, true)])).is_empty());
        let b = bracket_transitions(&scan_of(&[(1.0, 2, true), (2.0, 2, true), (4.0, 3, true)]));
        assert_eq!(b.len(), 1);
        assert_eq!((b[0].a_minus, b[0].a_plus, b[0].n_minus, b[0].n_plus), (2.0, 4.0, 2, 3));
        assert_eq!(b[0].kind, BracketKind::Simple);
        let b = bracket_transitions(&scan_of(&[(1.0, 3, true), (2.0, 2, true), (4.0, 3, true)]));
        assert_eq!(b.len(), 2);
        let b = bracket_transitions(&scan_of(&[(1.0, 2, true), (2.0, 4, true)]));
        assert_eq!(b[0].kind, BracketKind::Multi);
        let b = bracket_transitions(&scan_of(&[(1.0, 2, true), (1.5, 0, false), (2.0, 3, true)]));
        assert_eq!(b[0].kind, BracketKind::Unresolved);
    }

    #[test]
    fn equal_counts_are_rejected() {
        let prob = Problem::canonical(ProblemParams::canonical());
        let b = Bracket {
            a_minus: 1.0,
            a_plus: 2.0,
            n_minus: 3,
            n_plus: 3,
            kind: BracketKind::Simple,
        };
        let err = refine_family_point(&b, &prob, &SolverConfig::default(), &FamilyConfig::default()).unwrap_err();
        assert!(matches!(err, ShootingError::UnresolvedBracket { .. }));
    }

    #[test]
    fn grids() {
        let g = grid(1.0, 100.0, 3, Spacing::Log);
        assert_eq!(g[0], 1.0);
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert_eq!(g[2], 100.0);
        assert_eq!(grid(1.0, 3.0, 3, Spacing::Linear), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn status_labels_round_trip() {
        for s in [
            ShotStatus::Completed,
            ShotStatus::Failed(FailureKind::SlopeFloorViolated),
        ] {
            assert_eq!(ShotStatus::from_label(&s.label()), Some(s));
        }
    }

    #[test]
    fn small_a_shot_respects_first_zero_bound() {
        let prob = Problem::canonical(ProblemParams::canonical());
        let s = shoot(0.25, &prob, &SolverConfig::default()).unwrap();
        assert!(s.n_interior >= 1);
        assert!(s.first_zero.unwrap() <= 0.25f64.powi(6));
        assert!(s.first_zero_slope.unwrap().abs() <= 0.25);
    }

    #[test]
    fn large_a_extremum_trend() {
        let prob = Problem::canonical(ProblemParams::canonical());
        let cfg = SolverConfig::default();
        let s10 = shoot(10.0, &prob, &cfg).unwrap();
        let s100 = shoot(100.0, &prob, &cfg).unwrap();
        let (m10, v10) = s10.first_extremum.unwrap();
        let (m100, v100) = s100.first_extremum.unwrap();
        assert!(v100 > v10 && m100 < m10);
    }

    #[test]
    fn scan_is_ordered_and_deterministic() {
        let prob = Problem::canonical(ProblemParams::canonical());
        let cfg = SolverConfig::default();
        let s1 = scan(2.0, 50.0, 6, Spacing::Log, &prob, &cfg).unwrap();
        let s2 = scan(2.0, 50.0, 6, Spacing::Log, &prob, &cfg).unwrap();
        assert_eq!(s1, s2);
        assert!(s1.shots.windows(2).all(|w| w[0].a < w[1].a));
        assert!(matches!(
            scan(2.0, 1.0, 5, Spacing::Log, &prob, &cfg),
            Err(ShootingError::InvalidScan { .. })
        ));
    }
}
