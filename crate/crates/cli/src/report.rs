//! Run artifacts: one CSV per controller, the SVG figures and
//! `summary.json`.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use funnelback_core::presets::RunResult;
use funnelback_core::{Plant, Strategy, TrajectoryLog};
use serde::Serialize;

use crate::config::{ControllerKind, Loaded, RunInfo};
use crate::csvlog;
use crate::plot::{Plot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "not applicable")]
    NotApplicable,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotApplicable => "not applicable",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub dt: f64,
    pub t_final: f64,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub controller: &'static str,
    pub strategy: &'static str,
    /// `completed` or `failed`.
    pub status: &'static str,
    pub error: Option<String>,
    pub csv: String,
    pub rows: usize,
    pub funnel_violations: usize,
    /// Smallest `funnel_bound - |x1|`; `null` while the funnel is unbounded.
    pub min_funnel_margin: Option<f64>,
    pub terminal_time: Option<f64>,
    pub terminal_state: Vec<f64>,
    pub terminal_norm: Option<f64>,
    pub funnel_check: Status,
    pub rho_hat_monotone: Status,
}

pub fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Rational => "rational",
        Strategy::Tangent => "tangent",
        Strategy::Identity => "identity",
    }
}

/// The log of a run, complete or up to its failure.
pub fn log_of(result: &RunResult) -> &TrajectoryLog {
    match result {
        Ok(log) => log,
        Err(f) => &f.log,
    }
}

/// `sign_lb rho_hat` never drops by more than `1e-12`.
pub fn rho_hat_monotone(log: &TrajectoryLog, sign_lb: f64) -> bool {
    log.rows
        .windows(2)
        .all(|w| sign_lb * (w[1].rho_hat - w[0].rho_hat) >= -1e-12)
}

pub fn funnel_check(info: &RunInfo, result: &RunResult) -> Status {
    if info.strategy == Strategy::Identity {
        return Status::NotApplicable;
    }
    Status::from_bool(result.is_ok() && log_of(result).violations() == 0)
}

pub fn summarize(loaded: &Loaded, results: &[RunResult]) -> Summary {
    let e = &loaded.experiment;
    let cfg = e.runs.first().map(|r| r.cfg).unwrap_or_default();
    let runs = loaded
        .runs
        .iter()
        .zip(results)
        .zip(&e.runs)
        .map(|((info, result), run)| {
            let log = log_of(result);
            let last = log.last();
            let margin = log.rows.iter().map(|r| r.funnel_margin).fold(f64::INFINITY, f64::min);
            RunSummary {
                label: info.label.clone(),
                controller: match info.kind {
                    ControllerKind::Backstepping => "backstepping",
                    ControllerKind::Scalar => "scalar",
                },
                strategy: strategy_name(info.strategy),
                status: if result.is_ok() { "completed" } else { "failed" },
                error: result.as_ref().err().map(|f| f.error.to_string()),
                csv: format!("{}.csv", info.label),
                rows: log.rows.len(),
                funnel_violations: log.violations(),
                min_funnel_margin: margin.is_finite().then_some(margin),
                terminal_time: last.map(|r| r.t),
                terminal_state: last.map(|r| r.x.clone()).unwrap_or_default(),
                terminal_norm: last.map(|r| r.x.iter().map(|v| v * v).sum::<f64>().sqrt()),
                funnel_check: funnel_check(info, result),
                rho_hat_monotone: Status::from_bool(rho_hat_monotone(log, run.controller.sign_lb())),
            }
        })
        .collect();
    Summary {
        experiment: e.name.clone(),
        dt: cfg.dt,
        t_final: cfg.t_final,
        runs,
    }
}

/// Writes every artifact into `out`, including the partial logs of failed
/// runs.
pub fn write_artifacts(loaded: &Loaded, results: &[RunResult], out: &Path) -> Result<Summary> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let plant = &loaded.experiment.plant;
    let (n, q) = (plant.order(), plant.dim());
    for (info, result) in loaded.runs.iter().zip(results) {
        let path = out.join(format!("{}.csv", info.label));
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        csvlog::write(log_of(result), n, q, BufWriter::new(file))?;
    }
    for (name, plot) in figures(loaded, results) {
        let path = out.join(format!("{name}.svg"));
        fs::write(&path, plot.to_svg()).with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = summarize(loaded, results);
    let path = out.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(summary)
}

fn series(label: &str, log: &TrajectoryLog, f: impl Fn(&funnelback_core::sim::LogRow) -> f64) -> Series {
    Series::new(label, log.rows.iter().map(|r| (r.t, f(r))).collect())
}

/// The output `y = x1` with funnel bounds, `x2`, `u`, the estimates, and
/// the true parameters along each trajectory.
pub fn figures(loaded: &Loaded, results: &[RunResult]) -> Vec<(&'static str, Plot)> {
    let plant: &Plant = &loaded.experiment.plant;
    let runs: Vec<(&str, &TrajectoryLog)> = loaded
        .runs
        .iter()
        .zip(results)
        .map(|(i, r)| (i.label.as_str(), log_of(r)))
        .collect();

    let mut y = Plot::new("Output y = x1", "t", "y");
    for (label, log) in &runs {
        y = y.with(series(label, log, |r| r.x[0]));
    }
    for ((label, log), info) in runs.iter().zip(&loaded.runs) {
        if info.strategy != Strategy::Identity {
            y = y.with(series(&format!("+bound {label}"), log, |r| r.funnel_bound).dashed());
            y = y.with(series(&format!("-bound {label}"), log, |r| -r.funnel_bound).dashed());
        }
    }
    let mut figs = vec![("y", y)];

    if plant.order() >= 2 {
        let mut p = Plot::new("State x2", "t", "x2");
        for (label, log) in &runs {
            p = p.with(series(label, log, |r| r.x[1]));
        }
        figs.push(("x2", p));
    }

    let mut u = Plot::new("Control input", "t", "u");
    for (label, log) in &runs {
        u = u.with(series(label, log, |r| r.u));
    }
    figs.push(("u", u));

    let mut th = Plot::new("Parameter estimate", "t", "theta_hat");
    for (label, log) in &runs {
        for j in 0..plant.dim() {
            let name = if plant.dim() == 1 { label.to_string() } else { format!("{label} [{}]", j + 1) };
            th = th.with(series(&name, log, |r| r.theta_hat[j]));
        }
    }
    figs.push(("theta_hat", th));

    let mut rho = Plot::new("Inverse gain estimate", "t", "rho_hat");
    for (label, log) in &runs {
        rho = rho.with(series(label, log, |r| r.rho_hat));
    }
    figs.push(("rho_hat", rho));

    let mut par = Plot::new("Plant parameters along the trajectories", "t", "theta, b");
    for (label, log) in &runs {
        for j in 0..plant.dim() {
            let name = if plant.dim() == 1 { format!("theta {label}") } else { format!("theta{} {label}", j + 1) };
            par = par.with(series(&name, log, |r| {
                plant.theta().evaluate(r.t, &r.x).map(|v| v[j]).unwrap_or(f64::NAN)
            }));
        }
        par = par.with(series(&format!("b {label}"), log, |r| {
            plant.gain().evaluate(r.t, &r.x).map(|v| v[0]).unwrap_or(f64::NAN)
        }));
    }
    figs.push(("parameters", par));
    figs
}
