use std::io::Read;
use std::path::{Path, PathBuf};

use extshoot_core::integrator::SolverConfig;
use extshoot_core::model::{
    check_h3, log_grid, validate_params, H3Report, KProfile, ModelError, Nonlinearity, Perturbation, Problem,
    ProblemParams, RawParams,
};
use extshoot_core::shooting::{FamilyConfig, Spacing};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KSelection {
    Power,
    BoundedPerturbation,
}

/// Odd term `coeff * |u|^{exponent-1} u` added to the nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub coeff: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub n: f64,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub r: f64,
    pub k: KSelection,
    pub k_scale: f64,
    pub perturbation: Option<PerturbationConfig>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        let RawParams { n, p, q, alpha, r } = RawParams::CANONICAL;
        Self {
            n,
            p,
            q,
            alpha,
            r,
            k: KSelection::Power,
            k_scale: 1.0,
            perturbation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub a_lo: f64,
    pub a_hi: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            a_lo: 0.5,
            a_hi: 1000.0,
            count: 61,
            spacing: Spacing::Log,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamiliesSection {
    pub m: usize,
    pub refine: FamilyConfig,
    /// Slope sequences of the two verification suites.
    pub small_a: Vec<f64>,
    pub large_a: Vec<f64>,
}

impl Default for FamiliesSection {
    fn default() -> Self {
        Self {
            m: 3,
            refine: FamilyConfig::default(),
            small_a: vec![1.0, 0.5, 0.25],
            large_a: vec![10.0, 100.0, 1000.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Falls back to `EXTSHOOT_OUT`, then `out`.
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub plots: bool,
    /// Keep every n-th step in exported trajectories.
    pub record_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: None,
            formats: vec![Format::Csv, Format::Json, Format::Svg],
            plots: true,
            record_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParallelismSection {
    /// `0` uses every available core.
    pub workers: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub solver: SolverConfig,
    pub scan: ScanSection,
    pub families: FamiliesSection,
    pub output: OutputSection,
    pub parallelism: ParallelismSection,
}

/// Reads a config from a file, or from standard input when `path` is `-`.
pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::Config(format!("reading stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    };
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.solver
        .validate()
        .map_err(|e| CliError::Config(format!("solver: {e}")))?;
    if cfg.output.record_stride == 0 {
        return Err(CliError::Config("output.record_stride must be positive".into()));
    }
    Ok(cfg)
}

impl RunConfig {
    /// First 16 hex digits of SHA-256 over the canonical JSON of every
    /// section that affects results (output and parallelism excluded).
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::json!({
            "problem": self.problem,
            "solver": self.solver,
            "scan": self.scan,
            "families": self.families,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn raw_params(&self) -> RawParams {
        let p = &self.problem;
        RawParams {
            n: p.n,
            p: p.p,
            q: p.q,
            alpha: p.alpha,
            r: p.r,
        }
    }

    /// Validates (H1)-(H3) and assembles the problem, including the grid
    /// check of `K` and its envelope constants.
    pub fn build_problem(&self) -> Result<(Problem, H3Report), ModelError> {
        let params: ProblemParams = validate_params(self.raw_params())?;
        let s = &self.problem;
        if !(s.k_scale > 0.0) || !s.k_scale.is_finite() {
            return Err(ModelError::HypothesisViolated {
                radius: params.r(),
                detail: format!("k_scale = {} must be positive", s.k_scale),
            });
        }
        let k = match s.k {
            KSelection::Power => KProfile::power(s.k_scale, params.alpha()),
            KSelection::BoundedPerturbation => KProfile::bounded_perturbation(s.k_scale, params.alpha()),
        };
        let grid = log_grid(params.r(), 1e6 * params.r(), 10_000);
        let report = check_h3(&k, &params, &grid)?;
        let k = match s.k {
            KSelection::Power => k,
            KSelection::BoundedPerturbation => k.with_envelope(&report),
        };
        let mut nl = Nonlinearity::canonical(params.p(), params.q());
        if let Some(pert) = s.perturbation {
            if !(pert.coeff >= 0.0) || !pert.coeff.is_finite() || !(pert.exponent >= 1.0) || pert.exponent >= params.p()
            {
                return Err(ModelError::ExponentOutOfRange(format!(
                    "perturbation c |u|^(s-1) u needs c >= 0 finite and s in [1, p), got c = {}, s = {}",
                    pert.coeff, pert.exponent
                )));
            }
            nl = nl.with_perturbation(Perturbation::power(pert.coeff, pert.exponent));
        }
        Ok((Problem::new(params, nl, k), report))
    }

    /// Output directory: config, then `EXTSHOOT_OUT`, then `./out`.
    pub fn output_dir(&self) -> PathBuf {
        self.output
            .directory
            .clone()
            .or_else(|| std::env::var_os("EXTSHOOT_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// The hypothesis a parameter error belongs to.
pub fn hypothesis_label(err: &ModelError) -> &'static str {
    match err {
        ModelError::ExponentOutOfRange(msg) if msg.starts_with("p ") => "(H1)",
        ModelError::ExponentOutOfRange(msg) if msg.starts_with("q ") || msg.starts_with("perturbation") => "(H2)",
        ModelError::AlphaOutOfWindow { .. } | ModelError::HypothesisViolated { .. } => "(H3)",
        _ => "(setting)",
    }
}
