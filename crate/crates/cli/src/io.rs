//! CSV and JSON artifacts. Every file starts with (or contains) the config
//! fingerprint; floats use the shortest representation that parses back to
//! the same value.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use extshoot_core::integrator::{EnergyMonitor, EnergySample, Event, IntegrationStats, Sample, Status, Trajectory};
use extshoot_core::model::{ExteriorSample, ExteriorSolution};
use extshoot_core::shooting::{ScanResult, ShotStatus, ShotSummary};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FINGERPRINT_TAG: &str = "# extshoot fingerprint=";

/// Shortest round-trip decimal.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn parse_num(s: &str, what: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| CliError::Data(format!("bad number {s:?} in column {what}")))
}

fn parse_opt(s: &str, what: &str) -> Result<Option<f64>, CliError> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_num(s, what).map(Some)
    }
}

/// Writes through a temporary file in the same directory and renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::Io(format!("{}: {e}", path.display())));
    }
    Ok(())
}

fn csv_bytes(fingerprint: &str, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut buf = format!("{FINGERPRINT_TAG}{fingerprint}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
        for row in rows {
            w.write_record(&row).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(buf)
}

/// Reads the fingerprint line and the records of a CSV artifact.
fn read_csv(path: &Path, header: &[&str]) -> Result<(String, Vec<csv::StringRecord>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let fingerprint = first
        .strip_prefix(FINGERPRINT_TAG)
        .ok_or_else(|| CliError::Data(format!("{}: missing fingerprint line", path.display())))?
        .trim()
        .to_owned();
    let mut r = csv::Reader::from_reader(rest.as_bytes());
    let got = r.headers().map_err(|e| CliError::Data(e.to_string()))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(CliError::Data(format!(
            "{}: unexpected header {:?}",
            path.display(),
            got
        )));
    }
    let records = r
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((fingerprint, records))
}

/// Reads only the fingerprint of an artifact (CSV tag line, SVG comment or
/// JSON field).
pub fn artifact_fingerprint(path: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if let Some(rest) = text.strip_prefix(FINGERPRINT_TAG) {
        return Ok(rest.lines().next().unwrap_or("").trim().to_owned());
    }
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
        if let Some(fp) = v.get("fingerprint").and_then(|f| f.as_str()) {
            return Ok(fp.to_owned());
        }
    }
    if let Some(i) = text.find("fingerprint=") {
        let tail = &text[i + "fingerprint=".len()..];
        return Ok(tail.chars().take_while(|c| c.is_ascii_hexdigit()).collect());
    }
    Err(CliError::Data(format!("{}: no fingerprint", path.display())))
}

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "v", "vp", "E", "E1"];

pub fn trajectory_csv(fingerprint: &str, traj: &Trajectory) -> Result<Vec<u8>, CliError> {
    let rows = traj
        .samples
        .iter()
        .zip(&traj.energy_log)
        .map(|(s, e)| vec![num(s.t), num(s.v), num(s.vp), num(e.e), num(e.e1)]);
    csv_bytes(fingerprint, &TRAJECTORY_HEADER, rows)
}

/// Everything about a trajectory except its samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub fingerprint: String,
    pub a: f64,
    pub epsilon: f64,
    pub launch: (f64, f64),
    pub status: Status,
    pub events: Vec<Event>,
    pub stats: IntegrationStats,
    pub monitor: Option<EnergyMonitor>,
    pub peak_abs_v: f64,
    pub summary: ShotSummary,
}

impl TrajectoryMeta {
    pub fn new(fingerprint: &str, traj: &Trajectory, summary: &ShotSummary) -> Self {
        Self {
            fingerprint: fingerprint.into(),
            a: traj.a,
            epsilon: traj.epsilon,
            launch: traj.launch,
            status: traj.status.clone(),
            events: traj.events.clone(),
            stats: traj.stats,
            monitor: traj.monitor,
            peak_abs_v: traj.peak_abs_v,
            summary: summary.clone(),
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Rebuilds a trajectory from its CSV and metadata files.
pub fn read_trajectory(csv_path: &Path, meta: &TrajectoryMeta) -> Result<Trajectory, CliError> {
    let (fp, records) = read_csv(csv_path, &TRAJECTORY_HEADER)?;
    if fp != meta.fingerprint {
        return Err(CliError::FingerprintMismatch {
            expected: meta.fingerprint.clone(),
            found: fp,
            path: csv_path.to_path_buf(),
        });
    }
    let mut samples = Vec::with_capacity(records.len());
    let mut energy_log = Vec::with_capacity(records.len());
    for r in &records {
        let f = |i: usize| parse_num(r.get(i).unwrap_or(""), TRAJECTORY_HEADER[i]);
        let t = f(0)?;
        samples.push(Sample { t, v: f(1)?, vp: f(2)? });
        energy_log.push(EnergySample { t, e: f(3)?, e1: f(4)? });
    }
    Ok(Trajectory {
        a: meta.a,
        epsilon: meta.epsilon,
        launch: meta.launch,
        samples,
        energy_log,
        events: meta.events.clone(),
        status: meta.status.clone(),
        stats: meta.stats,
        monitor: meta.monitor,
        peak_abs_v: meta.peak_abs_v,
        local: None,
    })
}

pub const EXTERIOR_HEADER: [&str; 3] = ["r", "u", "up"];

pub fn exterior_csv(fingerprint: &str, ext: &ExteriorSolution) -> Result<Vec<u8>, CliError> {
    let rows = ext.samples.iter().map(|s| vec![num(s.r), num(s.u), num(s.up)]);
    csv_bytes(fingerprint, &EXTERIOR_HEADER, rows)
}

pub fn read_exterior(path: &Path) -> Result<(String, Vec<ExteriorSample>), CliError> {
    let (fp, records) = read_csv(path, &EXTERIOR_HEADER)?;
    let rows = records
        .iter()
        .map(|r| {
            let f = |i: usize| parse_num(r.get(i).unwrap_or(""), EXTERIOR_HEADER[i]);
            Ok(ExteriorSample {
                r: f(0)?,
                u: f(1)?,
                up: f(2)?,
            })
        })
        .collect::<Result<_, CliError>>()?;
    Ok((fp, rows))
}

pub const SCAN_HEADER: [&str; 13] = [
    "a",
    "n_interior",
    "n_boundary",
    "v_R1",
    "vp_R1",
    "z_first",
    "z_first_slope",
    "z_last",
    "z_last_slope",
    "M_a",
    "v_M_a",
    "max_abs_v",
    "status",
];

pub fn scan_csv(fingerprint: &str, scan: &ScanResult) -> Result<Vec<u8>, CliError> {
    let rows = scan.shots.iter().map(|s| {
        vec![
            num(s.a),
            s.n_interior.to_string(),
            s.n_boundary.to_string(),
            num(s.v_r1),
            num(s.vp_r1),
            opt(s.first_zero),
            opt(s.first_zero_slope),
            opt(s.last_zero),
            opt(s.last_zero_slope),
            opt(s.first_extremum.map(|m| m.0)),
            opt(s.first_extremum.map(|m| m.1)),
            num(s.max_abs_v),
            s.status.label(),
        ]
    });
    csv_bytes(fingerprint, &SCAN_HEADER, rows)
}

pub fn read_scan(path: &Path) -> Result<(String, ScanResult), CliError> {
    let (fp, records) = read_csv(path, &SCAN_HEADER)?;
    let mut shots = Vec::with_capacity(records.len());
    for r in &records {
        let col = |i: usize| r.get(i).unwrap_or("");
        let count = |i: usize| {
            col(i)
                .parse::<usize>()
                .map_err(|_| CliError::Data(format!("bad count {:?} in column {}", col(i), SCAN_HEADER[i])))
        };
        let m = match (parse_opt(col(9), "M_a")?, parse_opt(col(10), "v_M_a")?) {
            (Some(t), Some(v)) => Some((t, v)),
            (None, None) => None,
            _ => return Err(CliError::Data("M_a and v_M_a must both be present or absent".into())),
        };
        shots.push(ShotSummary {
            a: parse_num(col(0), "a")?,
            n_interior: count(1)?,
            n_boundary: count(2)?,
            v_r1: parse_num(col(3), "v_R1")?,
            vp_r1: parse_num(col(4), "vp_R1")?,
            first_zero: parse_opt(col(5), "z_first")?,
            first_zero_slope: parse_opt(col(6), "z_first_slope")?,
            last_zero: parse_opt(col(7), "z_last")?,
            last_zero_slope: parse_opt(col(8), "z_last_slope")?,
            first_extremum: m,
            max_abs_v: parse_num(col(11), "max_abs_v")?,
            status: ShotStatus::from_label(col(12))
                .ok_or_else(|| CliError::Data(format!("bad status {:?}", col(12))))?,
        });
    }
    Ok((fp, ScanResult { shots }))
}

/// Field-wise equality where NaN equals NaN.
pub fn same_summary(x: &ShotSummary, y: &ShotSummary) -> bool {
    let f = |p: f64, q: f64| p.to_bits() == q.to_bits() || (p.is_nan() && q.is_nan());
    let o = |p: Option<f64>, q: Option<f64>| match (p, q) {
        (Some(p), Some(q)) => f(p, q),
        (None, None) => true,
        _ => false,
    };
    f(x.a, y.a)
        && x.n_interior == y.n_interior
        && x.n_boundary == y.n_boundary
        && f(x.v_r1, y.v_r1)
        && f(x.vp_r1, y.vp_r1)
        && o(x.first_zero, y.first_zero)
        && o(x.first_zero_slope, y.first_zero_slope)
        && o(x.last_zero, y.last_zero)
        && o(x.last_zero_slope, y.last_zero_slope)
        && o(x.first_extremum.map(|m| m.0), y.first_extremum.map(|m| m.0))
        && o(x.first_extremum.map(|m| m.1), y.first_extremum.map(|m| m.1))
        && f(x.max_abs_v, y.max_abs_v)
        && x.status == y.status
}

/// Artifact file names.
pub struct Layout {
    pub dir: PathBuf,
    pub fingerprint: String,
}

impl Layout {
    pub fn new(dir: impl Into<PathBuf>, fingerprint: &str) -> Self {
        Self {
            dir: dir.into(),
            fingerprint: fingerprint.into(),
        }
    }

    fn file(&self, name: String) -> PathBuf {
        self.dir.join(name)
    }

    pub fn trajectory(&self, a: f64) -> PathBuf {
        self.file(format!("trajectory-{}-a{}.csv", self.fingerprint, num(a)))
    }
    pub fn trajectory_meta(&self, a: f64) -> PathBuf {
        self.file(format!("trajectory-{}-a{}.json", self.fingerprint, num(a)))
    }
    pub fn exterior(&self, a: f64) -> PathBuf {
        self.file(format!("exterior-{}-a{}.csv", self.fingerprint, num(a)))
    }
    pub fn scan(&self) -> PathBuf {
        self.file(format!("scan-{}.csv", self.fingerprint))
    }
    pub fn families(&self) -> PathBuf {
        self.file(format!("families-{}.json", self.fingerprint))
    }
    pub fn verify(&self) -> PathBuf {
        self.file(format!("verify-{}.json", self.fingerprint))
    }
    pub fn verify_text(&self) -> PathBuf {
        self.file(format!("verify-{}.txt", self.fingerprint))
    }
    pub fn svg(&self, stem: &str) -> PathBuf {
        self.file(format!("{stem}-{}.svg", self.fingerprint))
    }
}
