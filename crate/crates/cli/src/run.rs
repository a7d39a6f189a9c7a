//! Running the selected checks and persisting their artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use robin_core::asymptotics::{
    collar_samples, comparability_check, curvature_limit_scan, determinant_check, eta_bound_scan,
    eta_ratio_check, metric_asymptotics_check, psi_ratio_check, scaled_derivative_check, lambda_derivative_check, ApproachSequence,
    AsymptoticsReport, Evaluator, PassRule, PathSpec,
};
use robin_core::geodesics::{
    completeness_probe, geodesic_shoot, shorten_loop, write_loop_csv, write_trajectory_csv, AnnulusProductMetric,
    GeodesicState, LambdaMetricField, LoopDiscretization, ShootConfig, ShortenConfig,
};
use robin_core::point::normalize;
use robin_core::{ComplexPoint, Error, C64};

use crate::config::{CheckSpec, ExperimentConfig};
use crate::error::{io_err, LabError, LabResult};

/// One line of a check summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryLine {
    pub quantity: String,
    /// `None` when not finite.
    pub estimated_limit: Option<f64>,
    /// `None` when the quantity has no asserted value.
    pub target: Option<f64>,
    /// `None` for recorded quantities that are not asserted.
    pub tolerance: Option<f64>,
    pub order: Option<f64>,
    pub pass: bool,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl SummaryLine {
    fn from_report(r: &AsymptoticsReport) -> SummaryLine {
        SummaryLine {
            quantity: r.quantity.clone(),
            estimated_limit: finite(r.estimated_limit),
            target: finite(r.target),
            tolerance: (r.rule != PassRule::Record).then_some(r.tolerance),
            order: r.order,
            pass: r.pass,
        }
    }

    fn measured(quantity: &str, value: f64, target: f64, tolerance: f64) -> SummaryLine {
        SummaryLine {
            quantity: quantity.into(),
            estimated_limit: finite(value),
            target: Some(target),
            tolerance: Some(tolerance),
            order: None,
            pass: (value - target).abs() <= tolerance,
        }
    }

    fn recorded(quantity: &str, value: f64, target: f64) -> SummaryLine {
        SummaryLine {
            quantity: quantity.into(),
            estimated_limit: finite(value),
            target: Some(target),
            tolerance: None,
            order: None,
            pass: value.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    /// Set when the check aborted.
    pub error: Option<String>,
    pub lines: Vec<SummaryLine>,
    pub files: Vec<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<CheckRecord>,
    pub files: Vec<FileEntry>,
    pub total_seconds: f64,
}

impl RunManifest {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

struct CheckOutput {
    lines: Vec<SummaryLine>,
    /// File name and contents.
    artifacts: Vec<(String, Vec<u8>)>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn report_csv(r: &AsymptoticsReport) -> LabResult<Vec<u8>> {
    let mut buf = Vec::new();
    r.write_csv(&mut buf)?;
    Ok(buf)
}

fn reports_output(reports: &[AsymptoticsReport]) -> LabResult<CheckOutput> {
    let mut artifacts = Vec::new();
    for (k, r) in reports.iter().enumerate() {
        artifacts.push((format!("{k}.csv"), report_csv(r)?));
    }
    let summaries: Vec<_> = reports.iter().map(|r| r.summary()).collect();
    artifacts.push(("reports.json".into(), json_bytes(&summaries)));
    Ok(CheckOutput {
        lines: reports.iter().map(SummaryLine::from_report).collect(),
        artifacts,
    })
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn csv_bytes(header: &[&str], rows: &[Vec<f64>]) -> LabResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| LabError::Core(Error::InvalidInput(e.to_string()));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r.iter().map(|x| format!("{x:.12e}"))).map_err(err)?;
    }
    w.into_inner().map_err(|e| LabError::Core(Error::InvalidInput(e.to_string())))
}

fn run_check(spec: &CheckSpec, eval: &Evaluator, seq: &ApproachSequence, seed: u64) -> LabResult<CheckOutput> {
    let n = eval.domain.dim();
    match spec {
        CheckSpec::Curvature { tolerance } => reports_output(&curvature_limit_scan(eval, seq, *tolerance)?),
        CheckSpec::ScaledDerivatives { indices, tolerance } => {
            let ix: Vec<_> = indices.iter().map(|p| (p.holo.clone(), p.anti.clone())).collect();
            reports_output(&scaled_derivative_check(eval, seq, &ix, *tolerance)?)
        }
        CheckSpec::LambdaDerivatives { gamma, tolerance } => {
            reports_output(&lambda_derivative_check(eval, seq, gamma.unwrap_or(n - 1), *tolerance)?)
        }
        CheckSpec::MetricAsymptotics {
            tolerance,
            determinant_tolerance,
        } => {
            let mut reports = metric_asymptotics_check(eval, seq, *tolerance)?;
            reports.extend(determinant_check(eval, seq, *determinant_tolerance)?);
            if seq.config.path == PathSpec::Normal {
                for alpha in 0..n - 1 {
                    reports.push(psi_ratio_check(&eval.domain, seq, alpha, *tolerance)?);
                }
            }
            reports_output(&reports)
        }
        CheckSpec::Ratio {
            tolerance,
            samples,
            delta_min,
        } => {
            let reports = eta_ratio_check(eval, seq, *tolerance)?;
            let mut out = reports_output(&reports)?;
            let collar = collar_samples(eval, *samples, *delta_min, 0.5 * eval.domain.collar(), seed)?;
            let bound = eta_bound_scan(&collar)?;
            out.lines.push(SummaryLine::recorded(
                "max |eta|^2/ds^2 over collar",
                bound.max_ratio,
                2.0 * (n as f64 - 1.0),
            ));
            out.artifacts.push(("eta_bound.json".into(), json_bytes(&bound)));
            Ok(out)
        }
        CheckSpec::Geodesic {
            shoot,
            speed,
            probe_floors,
            slope_tolerance,
            shorten,
            loop_points,
            loop_tolerance,
        } => geodesic_check(eval, seq, shoot, *speed, probe_floors, *slope_tolerance, shorten, *loop_points, *loop_tolerance),
        CheckSpec::Comparability {
            samples,
            delta_min,
            bounds,
        } => {
            let collar = collar_samples(eval, *samples, *delta_min, 0.5 * eval.domain.collar(), seed)?;
            let rep = comparability_check(&eval.domain, &collar, *bounds);
            let rows: Vec<Vec<f64>> = collar
                .iter()
                .map(|s| vec![s.delta, s.metric.norm2(&s.vector), s.lambda_value])
                .collect();
            let lines = vec![
                SummaryLine {
                    quantity: "min ds^2/surrogate".into(),
                    estimated_limit: finite(rep.min_ratio),
                    target: Some(bounds.0),
                    tolerance: Some(0.0),
                    order: None,
                    pass: rep.min_ratio >= bounds.0,
                },
                SummaryLine {
                    quantity: "max ds^2/surrogate".into(),
                    estimated_limit: finite(rep.max_ratio),
                    target: Some(bounds.1),
                    tolerance: Some(0.0),
                    order: None,
                    pass: rep.max_ratio <= bounds.1,
                },
            ];
            Ok(CheckOutput {
                lines,
                artifacts: vec![
                    ("samples.csv".into(), csv_bytes(&["delta", "ds2(v,v)", "lambda(p)"], &rows)?),
                    ("comparability.json".into(), json_bytes(&rep)),
                ],
            })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn geodesic_check(
    eval: &Evaluator,
    seq: &ApproachSequence,
    shoot: &ShootConfig,
    speed: f64,
    floors: &[f64],
    slope_tolerance: f64,
    shorten: &ShortenConfig,
    loop_points: usize,
    loop_tolerance: f64,
) -> LabResult<CheckOutput> {
    let n = eval.domain.dim();
    let field = LambdaMetricField { eval: eval.clone() };
    let centre = eval
        .domain
        .star_center()
        .ok_or_else(|| LabError::ConfigInvalid("domain has no centre".into()))?;
    let dir: Vec<C64> = seq.target.iter().zip(&centre).map(|(t, c)| t - c).collect();
    let dir = normalize(&dir)?;
    let start = GeodesicState {
        position: ComplexPoint::new(centre.clone())?,
        velocity: dir.iter().map(|d| d * speed).collect(),
        time: 0.0,
    };
    let traj = geodesic_shoot(&field, &start, shoot)?;
    // distance of the trajectory from the complex line through the centre
    let deviation = traj
        .states
        .iter()
        .map(|s| {
            let w: Vec<C64> = s.position.coords().iter().zip(&centre).map(|(z, c)| z - c).collect();
            let along: C64 = dir.iter().zip(&w).map(|(d, x)| d.conj() * x).sum();
            w.iter()
                .zip(&dir)
                .map(|(x, d)| (x - d * along).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    let mut traj_csv = Vec::new();
    write_trajectory_csv(&mut traj_csv, &traj)?;

    let probe = completeness_probe(&field, &centre, &seq.target, floors)?;
    let probe_rows: Vec<Vec<f64>> = probe.rows.iter().map(|r| vec![r.0, r.1]).collect();

    let annulus = AnnulusProductMetric::default();
    let start_loop = LoopDiscretization::sample(loop_points, "core", |t| {
        let r = 1.6 * (1.0 + 0.1 * (3.0 * t).cos());
        vec![C64::from_polar(r, t), C64::new(0.2, 0.0) + C64::from_polar(0.1, t)]
    })?;
    let res = shorten_loop(&annulus, &start_loop, shorten)?;
    let core = res.curve.smooth_length(&annulus, 8)?;
    let mut loop_csv = Vec::new();
    write_loop_csv(&mut loop_csv, &annulus, &res.curve)?;

    let trivial = LoopDiscretization::sample(loop_points, "trivial", |t| {
        vec![C64::new(1.0, 0.0), C64::from_polar(0.3, t)]
    })?;
    let collapse_cfg = ShortenConfig {
        collapse_diameter: shorten.collapse_diameter.max(1e-2),
        ..shorten.clone()
    };
    let collapsed = matches!(shorten_loop(&annulus, &trivial, &collapse_cfg), Err(Error::CollapsedLoop { .. }));

    let k = (2.0 * n as f64 - 2.0).sqrt();
    let lines = vec![
        SummaryLine::measured("energy drift per unit time", traj.drift_rate, 0.0, shoot.drift_bound),
        SummaryLine::recorded("deviation from the initial complex line", deviation, 0.0),
        SummaryLine::measured("length slope in log(1/delta)", probe.slope, 0.5 * k, slope_tolerance),
        SummaryLine::measured("annulus core loop length", core, annulus.core_length(), loop_tolerance),
        SummaryLine {
            quantity: "contractible loop collapses".into(),
            estimated_limit: Some(if collapsed { 1.0 } else { 0.0 }),
            target: Some(1.0),
            tolerance: Some(0.0),
            order: None,
            pass: collapsed,
        },
    ];
    Ok(CheckOutput {
        lines,
        artifacts: vec![
            ("trajectory.csv".into(), traj_csv),
            ("probe.csv".into(), csv_bytes(&["delta", "length"], &probe_rows)?),
            ("loop.csv".into(), loop_csv),
            ("energy.csv".into(), csv_bytes(&["energy"], &res.energy_history.iter().map(|e| vec![*e]).collect::<Vec<_>>())?),
        ],
    })
}

fn output_dir(config: &ExperimentConfig, opts: &RunOptions) -> LabResult<PathBuf> {
    opts.out
        .clone()
        .or_else(|| config.output.clone())
        .ok_or_else(|| LabError::ConfigInvalid("no output directory (use --out or \"output\")".into()))
}

/// Validate, execute every check and write artifacts plus `manifest.json`.
/// Failing checks are recorded and the run continues.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> LabResult<RunManifest> {
    let mut config = config.clone();
    if let Some(s) = opts.seed {
        config.seed = s;
    }
    let out = output_dir(&config, opts)?;
    config.output = None;
    let (eval, seq) = config.validate()?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = opts.jobs {
            b = b.num_threads(j.max(1));
        }
        b.build().map_err(|e| LabError::ConfigInvalid(format!("thread pool: {e}")))?
    };
    let started = Instant::now();
    let results: Vec<(LabResult<CheckOutput>, f64)> = pool.install(|| {
        config
            .checks
            .par_iter()
            .enumerate()
            .map(|(i, spec)| {
                let t = Instant::now();
                let r = run_check(spec, &eval, &seq, config.seed.wrapping_add(i as u64));
                (r, t.elapsed().as_secs_f64())
            })
            .collect()
    });

    std::fs::create_dir_all(&out).map_err(io_err(&out))?;
    let mut files = Vec::new();
    let mut write = |name: String, bytes: &[u8]| -> LabResult<String> {
        let path = out.join(&name);
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        files.push(FileEntry {
            path: name.clone(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(name)
    };
    let canonical = config.canonical_json();
    write("config.json".into(), canonical.as_bytes())?;
    let mut checks = Vec::new();
    for (i, (spec, (result, seconds))) in config.checks.iter().zip(results).enumerate() {
        let prefix = format!("{i:02}_{}", spec.name());
        let record = match result {
            Ok(output) => {
                let mut names = Vec::new();
                for (name, bytes) in &output.artifacts {
                    names.push(write(format!("{prefix}_{name}"), bytes)?);
                }
                CheckRecord {
                    name: spec.name().into(),
                    pass: !output.lines.is_empty() && output.lines.iter().all(|l| l.pass),
                    error: None,
                    lines: output.lines,
                    files: names,
                    seconds,
                }
            }
            Err(e) => CheckRecord {
                name: spec.name().into(),
                pass: false,
                error: Some(e.to_string()),
                lines: Vec::new(),
                files: Vec::new(),
                seconds,
            },
        };
        checks.push(record);
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: sha256_hex(canonical.as_bytes()),
        seed: config.seed,
        pass: checks.iter().all(|c| c.pass),
        checks,
        files,
        total_seconds: started.elapsed().as_secs_f64(),
    };
    let path = out.join("manifest.json");
    std::fs::write(&path, json_bytes(&manifest)).map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> LabResult<RunManifest> {
    let path = dir.join("manifest.json");
    if !path.is_file() {
        return Err(LabError::MissingManifest(dir.to_path_buf()));
    }
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| LabError::CorruptManifest(e.to_string()))
}

fn fmt_value(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "n/a".into())
}

fn fmt_target(x: Option<f64>) -> String {
    let Some(x) = x else { return "n/a".into() };
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Stable text summary: one line per summary line of every check.
pub fn summarize_text(manifest: &RunManifest) -> String {
    let mut s = String::new();
    for c in &manifest.checks {
        if let Some(e) = &c.error {
            s.push_str(&format!("{}: ERROR {e}\n", c.name));
        }
        for l in &c.lines {
            let verdict = match (l.tolerance, l.pass) {
                (None, _) => "RECORDED",
                (Some(_), true) => "PASS",
                (Some(_), false) => "FAIL",
            };
            let order = l.order.map(|o| format!(", order {o:.2}")).unwrap_or_default();
            s.push_str(&format!(
                "{} {}: estimated limit {}, target {}{order}, {verdict}\n",
                c.name,
                l.quantity,
                fmt_value(l.estimated_limit),
                fmt_target(l.target)
            ));
        }
    }
    s.push_str(if manifest.pass { "overall: PASS\n" } else { "overall: FAIL\n" });
    s
}

/// JSON summary without file inventory or timings.
pub fn summarize_json(manifest: &RunManifest) -> serde_json::Value {
    serde_json::json!({
        "config_hash": manifest.config_hash,
        "pass": manifest.pass,
        "checks": manifest.checks.iter().map(|c| serde_json::json!({
            "name": c.name,
            "pass": c.pass,
            "error": c.error,
            "lines": c.lines,
        })).collect::<Vec<_>>(),
    })
}

/// Read a run directory and format its summary.
pub fn summarize(dir: &Path) -> LabResult<String> {
    Ok(summarize_text(&read_manifest(dir)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn target_formatting_is_stable() {
        assert_eq!(fmt_target(Some(-1.0)), "-1");
        assert_eq!(fmt_target(Some(0.5)), "0.5");
        assert_eq!(fmt_target(None), "n/a");
        assert_eq!(fmt_target(Some(2.0 * PI)), format!("{}", 2.0 * PI));
        assert_eq!(fmt_value(Some(-1.0)), "-1.000000");
    }

    #[test]
    fn sha_is_hex() {
        let h = sha256_hex(b"abc");
        assert_eq!(h, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
