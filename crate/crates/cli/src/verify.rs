//! Invariant checks over a configured experiment, printed as a table.

use funnelback_core::checks::{
    alpha_gradients, funnel_points, hadamard_identity, inverse_round_trip, max_relative_increase,
    samples_from_log, transform_jacobian,
};
use funnelback_core::presets::RunResult;
use funnelback_core::{Controller, FunnelTransform, Strategy};

use crate::config::{ControllerKind, Loaded};
use crate::csvlog;
use crate::report::{funnel_check, log_of, rho_hat_monotone, Status};

pub const JACOBIAN_TOL: f64 = 1e-6;
pub const ROUND_TRIP_TOL: f64 = 1e-10;
pub const HADAMARD_TOL: f64 = 1e-8;
pub const GRADIENT_TOL: f64 = 1e-6;
pub const LYAPUNOV_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    /// Check `dz/dx` with the `(beta^2 - psi^2)^2` misprint in the first
    /// numerator term of the rational transform; the Jacobian check must
    /// then fail.
    pub inject_pi_typo: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub run: String,
    pub check: &'static str,
    pub status: Status,
    pub detail: String,
}

/// `dz/dx` of the rational transform with the misprinted numerator
/// `beta (beta^2 - psi^2)^2 + 2 beta psi^2`.
pub fn misprinted_pi(transform: &FunnelTransform, x: f64, t: f64) -> funnelback_core::Result<f64> {
    let parts = transform.normalized().eval(x);
    let beta = transform.beta().value(t);
    let d = beta * beta - parts.psi * parts.psi;
    Ok(parts.dpsi * (beta * d * d + 2.0 * beta * parts.psi * parts.psi) / (d * d))
}

fn row(run: &str, check: &'static str, status: Status, detail: String) -> CheckRow {
    CheckRow {
        run: run.to_string(),
        check,
        status,
        detail,
    }
}

fn measured(run: &str, check: &'static str, value: funnelback_core::Result<f64>, tol: f64) -> CheckRow {
    match value {
        Ok(v) => row(run, check, Status::from_bool(v < tol), format!("{v:.2e} (tol {tol:.0e})")),
        Err(e) => row(run, check, Status::Fail, e.to_string()),
    }
}

pub fn verify(loaded: &Loaded, results: &[RunResult], opts: Options) -> Vec<CheckRow> {
    let plant = &loaded.experiment.plant;
    let mut out = Vec::new();
    for ((info, run), result) in loaded.runs.iter().zip(&loaded.experiment.runs).zip(results) {
        let label = info.label.as_str();
        let ctl: &dyn Controller = run.controller.as_ref();
        let tr = ctl.transform();
        let log = log_of(result);
        let t_end = run.cfg.t_final;

        out.push(match result {
            Ok(log) => row(label, "simulation", Status::Pass, format!("{} rows", log.rows.len())),
            Err(f) => row(label, "simulation", Status::Fail, f.error.to_string()),
        });

        let pts = funnel_points(tr, 1000, 0.05_f64.min(t_end / 2.0), t_end, 0.99);
        let typo = opts.inject_pi_typo && info.strategy == Strategy::Rational;
        let jac = transform_jacobian(tr, &pts, |x, t| {
            if typo {
                misprinted_pi(tr, x, t)
            } else {
                Ok(tr.transform(x, t)?.pi)
            }
        });
        out.push(measured(label, "jacobian dz/dx", jac.as_ref().map(|j| j.pi).map_err(Clone::clone), JACOBIAN_TOL));
        out.push(measured(label, "jacobian dz/dt", jac.map(|j| j.psi), JACOBIAN_TOL));
        out.push(measured(label, "inverse round trip", inverse_round_trip(tr, &pts), ROUND_TRIP_TOL));

        let fc = funnel_check(info, result);
        let detail = match fc {
            Status::NotApplicable => "no funnel is enforced".to_string(),
            _ => format!("{} violating rows", log.violations()),
        };
        out.push(row(label, "funnel containment", fc, detail));

        out.push(row(
            label,
            "rho_hat monotone",
            Status::from_bool(rho_hat_monotone(log, ctl.sign_lb())),
            format!("sign {:+}", ctl.sign_lb()),
        ));

        if info.kind == ControllerKind::Scalar {
            let v: Vec<f64> = log.rows.iter().map(|r| r.lyapunov).collect();
            let rise = max_relative_increase(&v);
            out.push(row(
                label,
                "lyapunov nonincreasing",
                Status::from_bool(rise <= LYAPUNOV_SLACK),
                format!("largest rise {rise:.2e} (slack {LYAPUNOV_SLACK:.0e})"),
            ));
        } else {
            out.push(row(
                label,
                "lyapunov nonincreasing",
                Status::NotApplicable,
                "only asserted for the first-order law".into(),
            ));
        }

        match (&info.backstepping, plant.order() >= 2) {
            (Some(bs), true) => {
                out.push(measured(
                    label,
                    "hadamard identity",
                    hadamard_identity(bs, &samples_from_log(log, 200)),
                    HADAMARD_TOL,
                ));
                out.push(measured(
                    label,
                    "virtual control gradients",
                    alpha_gradients(bs, &samples_from_log(log, 100)),
                    GRADIENT_TOL,
                ));
            }
            _ => {
                for check in ["hadamard identity", "virtual control gradients"] {
                    out.push(row(label, check, Status::NotApplicable, "first-order design".into()));
                }
            }
        }

        let mut buf = Vec::new();
        let csv = csvlog::write(log, plant.order(), plant.dim(), &mut buf).and_then(|_| csvlog::read(buf.as_slice()));
        match csv {
            Ok((back, _, _)) => {
                out.push(row(
                    label,
                    "csv round trip",
                    Status::from_bool(&back == log),
                    format!("{} rows", back.rows.len()),
                ));
                let rescanned = back.rows.iter().filter(|r| r.x[0].abs() >= r.funnel_bound).count();
                out.push(row(
                    label,
                    "violation rescan",
                    Status::from_bool(rescanned == log.violations()),
                    format!("{rescanned} from csv, {} in log", log.violations()),
                ));
            }
            Err(e) => out.push(row(label, "csv round trip", Status::Fail, e.to_string())),
        }
    }
    out
}

pub fn render(rows: &[CheckRow]) -> String {
    let w_run = rows.iter().map(|r| r.run.len()).max().unwrap_or(3).max(3);
    let w_check = rows.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<w_run$}  {:<w_check$}  {:<14}  detail\n", "run", "check", "result");
    for r in rows {
        s.push_str(&format!(
            "{:<w_run$}  {:<w_check$}  {:<14}  {}\n",
            r.run,
            r.check,
            r.status.as_str(),
            r.detail
        ));
    }
    s
}

pub fn all_passed(rows: &[CheckRow]) -> bool {
    rows.iter().all(|r| r.status != Status::Fail)
}
