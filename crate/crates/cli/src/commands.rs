use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use extshoot_core::analysis::{render_suite, verify_large_a, verify_small_a, AnalysisError, SuiteReport};
use extshoot_core::integrator::{FailureKind, IntegratorError, SolverConfig, Status, Trajectory};
use extshoot_core::model::{to_exterior, ModelError, Problem};
use extshoot_core::shooting::{
    extract_families, scan, shoot_trajectory, FamilyEntry, FamilyKind, ScanResult, ShootingError, ShotSummary,
};
use serde::{Deserialize, Serialize};

use crate::config::{self, hypothesis_label, Format, RunConfig};
use crate::io::{self, Layout, TrajectoryMeta};
use crate::plot::{decimate, Chart, Series, Style};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Shoot,
    Scan,
    Families,
    Verify,
    Export,
}

/// Command-line flags; set values override the config file.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub a: Option<f64>,
    pub m: Option<usize>,
}

const PLOT_POINTS: usize = 2000;

fn model_error(e: ModelError) -> CliError {
    CliError::Hypothesis {
        label: hypothesis_label(&e),
        message: e.to_string(),
    }
}

fn shooting_error(stage: &'static str, e: ShootingError) -> CliError {
    match e {
        ShootingError::Integrator(IntegratorError::InvalidSlope(a)) => CliError::Usage(format!("invalid slope {a}")),
        ShootingError::Integrator(IntegratorError::InvalidConfig(m)) => CliError::Config(m),
        ShootingError::InvalidScan { .. } => CliError::Config(e.to_string()),
        other => CliError::Numerical {
            stage,
            message: other.to_string(),
        },
    }
}

fn analysis_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::Shooting(s) => shooting_error("verify", s),
        AnalysisError::ShotFailed { .. } => CliError::Numerical {
            stage: "verify",
            message: e.to_string(),
        },
        other => CliError::Config(other.to_string()),
    }
}

fn failure_stage(kind: FailureKind) -> &'static str {
    match kind {
        FailureKind::Startup => "startup",
        _ => "integrate",
    }
}

struct Ctx<'a> {
    cfg: RunConfig,
    fingerprint: String,
    layout: Layout,
    out: &'a mut (dyn Write + Send),
}

impl Ctx<'_> {
    fn wants(&self, f: Format) -> bool {
        self.cfg.output.formats.contains(&f) && (f != Format::Svg || self.cfg.output.plots)
    }

    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        io::write_atomic(path, bytes)?;
        let _ = writeln!(self.out, "wrote {}", path.display());
        Ok(())
    }

    fn say(&mut self, line: impl AsRef<str>) {
        let _ = writeln!(self.out, "{}", line.as_ref());
    }
}

/// Runs one subcommand, writing progress lines to `out`.
pub fn run(command: Command, opts: &Options, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let mut cfg = config::load(&opts.config)?;
    if let Some(dir) = &opts.out {
        cfg.output.directory = Some(dir.clone());
    }
    if let Some(w) = opts.workers {
        cfg.parallelism.workers = w;
    }
    if let Some(m) = opts.m {
        if m == 0 {
            return Err(CliError::Usage("--m must be positive".into()));
        }
        cfg.families.m = m;
    }
    let fingerprint = cfg.fingerprint();
    let layout = Layout::new(cfg.output_dir(), &fingerprint);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism.workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let mut ctx = Ctx {
        cfg,
        fingerprint,
        layout,
        out,
    };
    pool.install(|| match command {
        Command::Validate => validate(&mut ctx),
        Command::Shoot => {
            let a = opts
                .a
                .ok_or_else(|| CliError::Usage("shoot needs --a <slope>".into()))?;
            shoot_cmd(&mut ctx, a)
        }
        Command::Scan => scan_cmd(&mut ctx),
        Command::Families => families_cmd(&mut ctx),
        Command::Verify => verify_cmd(&mut ctx),
        Command::Export => export_cmd(&mut ctx),
    })
}

fn problem(ctx: &Ctx) -> Result<Problem, CliError> {
    ctx.cfg.build_problem().map(|p| p.0).map_err(model_error)
}

fn validate(ctx: &mut Ctx) -> Result<(), CliError> {
    let (prob, h3) = ctx.cfg.build_problem().map_err(model_error)?;
    let p = &prob.params;
    let (h0, h1) = prob.h_envelope();
    ctx.say(format!("fingerprint {}", ctx.fingerprint));
    ctx.say(format!(
        "(H1)-(H3) hold: N = {}, p = {}, q = {}, alpha = {}, R = {}",
        p.n(),
        p.p(),
        p.q(),
        p.alpha(),
        p.r()
    ));
    ctx.say(format!("R1 = {}", p.r1()));
    ctx.say(format!("tilde_alpha = {}", p.tilde_alpha()));
    ctx.say(format!(
        "h envelope: {h0} t^-{0} <= h(t) <= {h1} t^-{0}",
        p.tilde_alpha()
    ));
    ctx.say(format!(
        "K checked on {} radii in [{}, {}]: -rK'/K <= {} < {}",
        h3.grid_points, h3.r_min, h3.r_max, h3.max_neg_log_slope, h3.slope_limit
    ));
    Ok(())
}

fn solver_for_output(ctx: &Ctx) -> SolverConfig {
    SolverConfig {
        record_stride: ctx.cfg.output.record_stride,
        ..ctx.cfg.solver
    }
}

/// Writes trajectory CSV, metadata, exterior profile and plots.
fn write_trajectory(
    ctx: &mut Ctx,
    prob: &Problem,
    traj: &Trajectory,
    summary: &ShotSummary,
    label: &str,
) -> Result<(), CliError> {
    let a = traj.a;
    if ctx.wants(Format::Csv) {
        let path = ctx.layout.trajectory(a);
        ctx.write(&path, &io::trajectory_csv(&ctx.fingerprint, traj)?)?;
    }
    if ctx.wants(Format::Json) {
        let meta = TrajectoryMeta::new(&ctx.fingerprint, traj, summary);
        let path = ctx.layout.trajectory_meta(a);
        ctx.write(&path, &io::to_json(&meta)?)?;
    }
    let exterior = if traj.samples.is_empty() {
        None
    } else {
        Some(to_exterior(traj, &prob.params, None).map_err(model_error)?)
    };
    if let (Some(ext), true) = (&exterior, ctx.wants(Format::Csv)) {
        let path = ctx.layout.exterior(a);
        ctx.write(&path, &io::exterior_csv(&ctx.fingerprint, ext)?)?;
    }
    if ctx.wants(Format::Svg) {
        let ext: Vec<(f64, f64)> = exterior
            .as_ref()
            .map(|e| e.samples.iter().map(|s| (s.r, s.u)).collect())
            .unwrap_or_default();
        for (stem, svg) in trajectory_charts(label, traj, &ext, &ctx.fingerprint) {
            let path = ctx.layout.svg(&format!("{stem}-a{}", io::num(a)));
            ctx.write(&path, svg.as_bytes())?;
        }
    }
    Ok(())
}

fn trajectory_charts(label: &str, traj: &Trajectory, exterior: &[(f64, f64)], fp: &str) -> Vec<(&'static str, String)> {
    let v: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, s.v)).collect();
    let e: Vec<(f64, f64)> = traj.energy_log.iter().map(|s| (s.t, s.e)).collect();
    let e1: Vec<(f64, f64)> = traj.energy_log.iter().map(|s| (s.t, s.e1)).collect();
    let a = io::num(traj.a);
    vec![
        (
            "profile-v",
            Chart {
                title: format!("{label} v(t), a = {a}"),
                x_label: "t".into(),
                y_label: "v".into(),
                log_x: false,
                series: vec![Series::new("v", decimate(&v, PLOT_POINTS), Style::Line)],
            }
            .render(fp),
        ),
        (
            "profile-u",
            Chart {
                title: format!("{label} u(r), a = {a}"),
                x_label: "r (log scale)".into(),
                y_label: "u".into(),
                log_x: true,
                series: vec![Series::new("u", decimate(exterior, PLOT_POINTS), Style::Line)],
            }
            .render(fp),
        ),
        (
            "energy",
            Chart {
                title: format!("{label} energies, a = {a}"),
                x_label: "t (log scale)".into(),
                y_label: "E, E1".into(),
                log_x: true,
                series: vec![
                    Series::new("E", decimate(&e, PLOT_POINTS), Style::Line),
                    Series::new("E1", decimate(&e1, PLOT_POINTS), Style::Line),
                ],
            }
            .render(fp),
        ),
    ]
}

fn shoot_cmd(ctx: &mut Ctx, a: f64) -> Result<(), CliError> {
    let prob = problem(ctx)?;
    let solver = solver_for_output(ctx);
    let (summary, traj) = shoot_trajectory(a, &prob, &solver).map_err(|e| shooting_error("integrate", e))?;
    write_trajectory(ctx, &prob, &traj, &summary, "shot")?;
    ctx.say(format!(
        "a = {}  interior zeros = {}  v(R1) = {:e}  v'(R1) = {:e}  status = {}",
        a,
        summary.n_interior,
        summary.v_r1,
        summary.vp_r1,
        summary.status.label()
    ));
    if let Status::Failed { kind, t, detail } = &traj.status {
        return Err(CliError::Numerical {
            stage: failure_stage(*kind),
            message: format!("{kind} at t = {t}: {detail}"),
        });
    }
    Ok(())
}

fn run_scan(ctx: &Ctx, prob: &Problem) -> Result<ScanResult, CliError> {
    let s = &ctx.cfg.scan;
    scan(s.a_lo, s.a_hi, s.count, s.spacing, prob, &ctx.cfg.solver).map_err(|e| shooting_error("scan", e))
}

fn staircase(scan: &ScanResult, marks: &[(f64, usize)], fp: &str) -> String {
    let steps: Vec<(f64, f64)> = scan.completed().map(|s| (s.a, s.n_interior as f64)).collect();
    let mut series = vec![Series::new("N(a)", steps, Style::Steps)];
    if !marks.is_empty() {
        series.push(Series::new(
            "family points",
            marks.iter().map(|&(a, n)| (a, n as f64)).collect(),
            Style::Markers,
        ));
    }
    Chart {
        title: "interior zero count".into(),
        x_label: "a (log scale)".into(),
        y_label: "N(a)".into(),
        log_x: true,
        series,
    }
    .render(fp)
}

fn write_scan(ctx: &mut Ctx, scan: &ScanResult, marks: &[(f64, usize)]) -> Result<(), CliError> {
    if ctx.wants(Format::Csv) {
        let path = ctx.layout.scan();
        ctx.write(&path, &io::scan_csv(&ctx.fingerprint, scan)?)?;
    }
    if ctx.wants(Format::Svg) {
        let path = ctx.layout.svg("staircase");
        let svg = staircase(scan, marks, &ctx.fingerprint);
        ctx.write(&path, svg.as_bytes())?;
    }
    Ok(())
}

fn scan_cmd(ctx: &mut Ctx) -> Result<(), CliError> {
    let prob = problem(ctx)?;
    let result = run_scan(ctx, &prob)?;
    write_scan(ctx, &result, &[])?;
    let failed = result.shots.iter().filter(|s| !s.is_completed()).count();
    let counts: BTreeSet<usize> = result.completed().map(|s| s.n_interior).collect();
    ctx.say(format!(
        "{} slopes, {} failed, interior zero counts from {} to {}",
        result.shots.len(),
        failed,
        counts.first().copied().unwrap_or(0),
        counts.last().copied().unwrap_or(0)
    ));
    Ok(())
}

#[derive(Debug, Serialize)]
struct FamiliesOut<'a> {
    fingerprint: &'a str,
    n0: usize,
    m: usize,
    degenerate: &'a [usize],
    sup_family: &'a [FamilyEntry],
    inf_family: &'a [FamilyEntry],
}

/// The part of the families file that `export` needs.
#[derive(Debug, Deserialize)]
pub struct StoredFamilies {
    pub fingerprint: String,
    pub n0: usize,
    pub sup_family: Vec<StoredEntry>,
    pub inf_family: Vec<StoredEntry>,
}

#[derive(Debug, Deserialize)]
pub struct StoredEntry {
    pub n: usize,
    pub kind: FamilyKind,
    pub a_star: f64,
    pub residual: f64,
}

fn families_cmd(ctx: &mut Ctx) -> Result<(), CliError> {
    let prob = problem(ctx)?;
    let initial = run_scan(ctx, &prob)?;
    let solver = solver_for_output(ctx);
    let fam = extract_families(&initial, ctx.cfg.families.m, &prob, &solver, &ctx.cfg.families.refine)
        .map_err(|e| shooting_error("families", e))?;
    let out = FamiliesOut {
        fingerprint: &ctx.fingerprint,
        n0: fam.n0,
        m: ctx.cfg.families.m,
        degenerate: &fam.degenerate,
        sup_family: &fam.sup_family,
        inf_family: &fam.inf_family,
    };
    if ctx.wants(Format::Json) {
        let path = ctx.layout.families();
        ctx.write(&path, &io::to_json(&out)?)?;
    }
    let marks: Vec<(f64, usize)> = fam
        .sup_family
        .iter()
        .chain(&fam.inf_family)
        .map(|e| (e.a_star, e.n))
        .collect();
    write_scan(ctx, &fam.scan, &marks)?;
    for e in fam.sup_family.iter().chain(&fam.inf_family) {
        let label = format!("{:?} S_{}", e.kind, e.n).to_lowercase();
        write_trajectory(ctx, &prob, &e.profile, &e.summary, &label)?;
    }
    ctx.say(format!("n0 = {}", fam.n0));
    ctx.say(format!(
        "{:<4} {:>3} {:>22} {:>12} {:>10} {:>10}",
        "kind", "n", "a_star", "|v(R1)|", "certified", "count"
    ));
    for e in fam.sup_family.iter().chain(&fam.inf_family) {
        let kind = if e.kind == FamilyKind::Sup { "sup" } else { "inf" };
        ctx.say(format!(
            "{:<4} {:>3} {:>22} {:>12.3e} {:>10} {:>10}",
            kind,
            e.n,
            io::num(e.a_star),
            e.residual,
            e.is_certified(),
            e.certified_count
        ));
    }
    if !fam.degenerate.is_empty() {
        ctx.say(format!("sup S_n = inf S_n within a_tol for n in {:?}", fam.degenerate));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct VerifyOut<'a> {
    fingerprint: &'a str,
    small_a: &'a SuiteReport,
    large_a: &'a SuiteReport,
}

fn verify_cmd(ctx: &mut Ctx) -> Result<(), CliError> {
    let prob = problem(ctx)?;
    let small = verify_small_a(&ctx.cfg.families.small_a, &prob, &ctx.cfg.solver).map_err(analysis_error)?;
    let large = verify_large_a(&ctx.cfg.families.large_a, &prob, &ctx.cfg.solver).map_err(analysis_error)?;
    let text = format!(
        "{}\n{}",
        render_suite(&small, &ctx.fingerprint),
        render_suite(&large, &ctx.fingerprint)
    );
    if ctx.wants(Format::Json) {
        let path = ctx.layout.verify();
        let out = VerifyOut {
            fingerprint: &ctx.fingerprint,
            small_a: &small,
            large_a: &large,
        };
        ctx.write(&path, &io::to_json(&out)?)?;
    }
    let path = ctx.layout.verify_text();
    ctx.write(&path, text.as_bytes())?;
    ctx.say(text);
    Ok(())
}

const DATA_PREFIXES: [&str; 5] = ["trajectory-", "exterior-", "scan-", "families-", "verify-"];

/// Recognized artifacts in the output directory. Every one of them must
/// carry this run's fingerprint.
fn own_artifacts(ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    let dir = &ctx.layout.dir;
    let entries = fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::Io(e.to_string()))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let ext = path.extension().and_then(|e| e.to_str());
        let known = match ext {
            Some("svg") => true,
            Some("csv" | "json") => DATA_PREFIXES.iter().any(|p| name.starts_with(p)),
            _ => false,
        };
        if name.starts_with('.') || !known {
            continue;
        }
        let found = io::artifact_fingerprint(&path)?;
        if found != ctx.fingerprint {
            return Err(CliError::FingerprintMismatch {
                expected: ctx.fingerprint.clone(),
                found,
                path,
            });
        }
        files.push(path);
    }
    files.sort();
    Ok(files)
}

fn export_cmd(ctx: &mut Ctx) -> Result<(), CliError> {
    let prob = problem(ctx)?;
    let files = own_artifacts(ctx)?;
    if files.is_empty() {
        return Err(CliError::Data(format!(
            "no artifacts with fingerprint {} in {}",
            ctx.fingerprint,
            ctx.layout.dir.display()
        )));
    }
    let mut marks = Vec::new();
    let families_path = ctx.layout.families();
    if files.contains(&families_path) {
        let fam: StoredFamilies = io::read_json(&families_path)?;
        marks = fam
            .sup_family
            .iter()
            .chain(&fam.inf_family)
            .map(|e| (e.a_star, e.n))
            .collect();
    }
    let scan_path = ctx.layout.scan();
    if files.contains(&scan_path) {
        let (_, scan) = io::read_scan(&scan_path)?;
        if ctx.wants(Format::Csv) {
            let bytes = io::scan_csv(&ctx.fingerprint, &scan)?;
            ctx.write(&scan_path, &bytes)?;
        }
        if ctx.wants(Format::Svg) {
            let path = ctx.layout.svg("staircase");
            let svg = staircase(&scan, &marks, &ctx.fingerprint);
            ctx.write(&path, svg.as_bytes())?;
        }
    }
    let metas: Vec<PathBuf> = files
        .iter()
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("trajectory-") && n.ends_with(".json"))
        })
        .cloned()
        .collect();
    let mut checked = 0;
    for meta_path in metas {
        let meta: TrajectoryMeta = io::read_json(&meta_path)?;
        let csv_path = ctx.layout.trajectory(meta.a);
        if !files.contains(&csv_path) {
            continue;
        }
        let traj = io::read_trajectory(&csv_path, &meta)?;
        let again = ShotSummary::from_trajectory(&traj, prob.params.r1(), &ctx.cfg.solver);
        if !io::same_summary(&again, &meta.summary) {
            return Err(CliError::Data(format!(
                "{}: re-summarized trajectory differs from the stored summary",
                meta_path.display()
            )));
        }
        checked += 1;
        if ctx.wants(Format::Svg) {
            let ext: Vec<(f64, f64)> = match io::read_exterior(&ctx.layout.exterior(meta.a)) {
                Ok((_, rows)) => rows.iter().map(|r| (r.r, r.u)).collect(),
                Err(_) => Vec::new(),
            };
            for (stem, svg) in trajectory_charts("stored", &traj, &ext, &ctx.fingerprint) {
                let path = ctx.layout.svg(&format!("{stem}-a{}", io::num(meta.a)));
                ctx.write(&path, svg.as_bytes())?;
            }
        }
    }
    ctx.say(format!("{checked} trajectories re-summarized identically"));
    Ok(())
}
