//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use funnelback_core::backstepping::BacksteppingGains;
use funnelback_core::checks::{
    alpha_gradients, central_difference, funnel_points, hadamard_identity, inverse_round_trip,
    max_decrease, max_relative_increase, rel_err, samples_from_log, transform_jacobian,
};
use funnelback_core::jet::{evaluate_with_gradient, Expr, Seed, SeedRegistry};
use funnelback_core::plant::{showcase_plant, ParameterSignal, RegressorBank};
use funnelback_core::presets::{benchmark_beta, benchmark_controller, paper_sim, scalar_demo, smooth_paper_sim};
use funnelback_core::{
    simulate, BacksteppingController, Controller, Estimates, FunnelTransform, NormalizedFunction,
    PerformanceFunction, Plant, ScalarController, ScalarGains, SimConfig, Strategy, TrajectoryLog,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

struct Report {
    failed: usize,
}

impl Report {
    fn record(&mut self, id: u32, title: &str, outcome: Outcome) {
        let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            self.failed += 1;
        }
        println!("{} [{id}] {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

struct BenchmarkRuns {
    identity: TrajectoryLog,
    tangent: TrajectoryLog,
    rational: TrajectoryLog,
    rational_secs: f64,
}

fn benchmark_runs() -> Result<BenchmarkRuns, String> {
    let e = paper_sim(SimConfig::default());
    let run = |label: &str| -> Result<(TrajectoryLog, f64), String> {
        let start = Instant::now();
        let log = e.run_named(label).expect("preset run").map_err(err)?;
        Ok((log, start.elapsed().as_secs_f64()))
    };
    let (rational, rational_secs) = run("rational")?;
    let (tangent, _) = run("tangent")?;
    let (identity, _) = run("identity")?;
    Ok(BenchmarkRuns {
        identity,
        tangent,
        rational,
        rational_secs,
    })
}

fn terminal(log: &TrajectoryLog) -> Vec<f64> {
    log.last().map(|r| r.x.clone()).unwrap_or_default()
}

fn containment(runs: &BenchmarkRuns) -> Outcome {
    let rows = runs.rational.rows.len();
    let v = runs.rational.violations();
    let pass = rows == 20_001 && v == 0 && runs.rational_secs < 30.0;
    Ok((
        pass,
        format!(
            "{rows} rows, {v} violations, min margin {:.3e}, runtime {:.1} s",
            runs.rational.rows.iter().map(|r| r.funnel_margin).fold(f64::INFINITY, f64::min),
            runs.rational_secs
        ),
    ))
}

fn regulation(runs: &BenchmarkRuns) -> Outcome {
    let x = terminal(&runs.rational);
    let early = runs.rational.max_abs_state(5.0, 10.0);
    let late = runs.rational.max_abs_state(15.0, 20.0);
    let pass = x.iter().all(|v| v.abs() < 1e-2) && late < early;
    Ok((
        pass,
        format!("x(20) = ({:.2e}, {:.2e}), max|x| [5,10] {early:.2e} > [15,20] {late:.2e}", x[0], x[1]),
    ))
}

/// Bounded piecewise-continuous `(theta, b)` with declared bounds.
fn random_scalar_plant(rng: &mut ChaCha8Rng) -> Result<Plant, String> {
    let c = rng.gen_range(-2.0..2.0);
    let a = [rng.gen_range(0.0..0.6), rng.gen_range(0.0..0.4), rng.gen_range(0.0..0.3)];
    let w: Vec<f64> = (0..5).map(|_| rng.gen_range(0.5..8.0)).collect();
    let ph: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..6.0)).collect();
    let theta = format!(
        "{c} + {} * sin({} * t + {}) + {} * sign(sin({} * t + {})) + {} * sin(x1) * cos({} * t)",
        a[0], w[0], ph[0], a[1], w[1], ph[1], a[2], w[2]
    );
    let radius = a.iter().sum::<f64>();
    let ell = rng.gen_range(0.3..1.5);
    let (c1, c2) = (rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5));
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let mid = ell + c1 + c2;
    let b = format!(
        "{sign} * ({mid} + {c1} * cos({} * t) + {c2} * sign(sin({} * t + {})))",
        w[3], w[4], ph[2]
    );
    let parse = |s: &str| Expr::parse(s).map_err(err);
    Plant::new(
        RegressorBank::new(vec![vec![parse("x1")?]], vec![parse("1")?]).map_err(err)?,
        ParameterSignal::parameter(vec![parse(&theta)?], vec![c], radius).map_err(err)?,
        ParameterSignal::gain(parse(&b)?, sign * ell, mid + c1 + c2).map_err(err)?,
    )
    .map_err(err)
}

// V decreases when delta_theta >= 2 |W| |theta - ell_theta|. For the rational
// funnel with the algebraic psi, W = x/z <= beta <= 1.
const W_BOUND: f64 = 1.0;

fn scalar_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = SimConfig {
        t_final: 30.0,
        ..SimConfig::default()
    };
    let (mut worst_v, mut worst_rho, mut worst_rate, mut worst_w, mut violations) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0);
    for _ in 0..20 {
        let plant = random_scalar_plant(&mut rng)?;
        let transform = FunnelTransform::new(benchmark_beta(), NormalizedFunction::Algebraic, Strategy::Rational)
            .map_err(err)?;
        let gains = ScalarGains {
            k: 1.0,
            gamma_theta: 1.0,
            gamma_rho: 1.0,
            delta_theta: 2.0 * W_BOUND * plant.theta_radius(),
        };
        let ctl = ScalarController::new(transform, gains, plant.sign_b()).map_err(err)?;
        let x0 = [rng.gen_range(-1.0..1.0)];
        let est0 = Estimates {
            theta_hat: vec![rng.gen_range(-1.0..1.0)],
            rho_hat: plant.sign_b() * rng.gen_range(0.2..1.0),
        };
        let log = simulate(&plant, &ctl, &x0, &est0, &cfg).map_err(err)?;
        violations += log.violations();
        let v: Vec<f64> = log.rows.iter().map(|r| r.lyapunov).collect();
        worst_v = worst_v.max(max_relative_increase(&v));
        let rho: Vec<f64> = log.rows.iter().map(|r| plant.sign_b() * r.rho_hat).collect();
        worst_rho = worst_rho.max(max_decrease(&rho));
        for r in &log.rows {
            if r.z[0] != 0.0 {
                worst_w = worst_w.max(r.x[0] / r.z[0]);
            }
        }
        let last = log.last().ok_or("empty log")?;
        let est = Estimates {
            theta_hat: last.theta_hat.clone(),
            rho_hat: last.rho_hat,
        };
        let out = ctl.evaluate(&last.x, &est, last.t).map_err(err)?;
        worst_rate = worst_rate.max(out.theta_hat_dot[0].abs()).max(out.rho_hat_dot.abs());
    }
    let secs = start.elapsed().as_secs_f64();
    // The relative V slack 1e-6 (1 + V) per step is what max_relative_increase reports.
    let pass = worst_v <= 1e-6
        && worst_rho <= 1e-12
        && worst_rate < 1e-4
        && violations == 0
        && worst_w <= W_BOUND * (1.0 + 1e-12)
        && secs < 120.0;
    Ok((
        pass,
        format!(
            "20 runs to t=30: V rise {worst_v:.1e}, rho_hat drop {worst_rho:.1e}, \
             terminal rates {worst_rate:.1e}, max W {worst_w:.2}, {violations} violations, {secs:.1} s"
        ),
    ))
}

fn hadamard(runs: &BenchmarkRuns) -> Outcome {
    let plant = showcase_plant();
    let mut worst: f64 = 0.0;
    let mut samples_rational = Vec::new();
    for (strategy, log) in [(Strategy::Rational, &runs.rational), (Strategy::Tangent, &runs.tangent)] {
        let ctl = benchmark_controller(&plant, strategy).map_err(err)?;
        let samples = samples_from_log(log, 500);
        worst = worst.max(hadamard_identity(&ctl, &samples).map_err(err)?);
        if strategy == Strategy::Rational {
            samples_rational = samples;
        }
    }
    let ctl = common::showcase_controller();
    let mut closed: f64 = 0.0;
    for s in &samples_rational {
        let trace = ctl.control_pipeline(&s.x, &s.est, s.t).map_err(err)?;
        let beta = common::transform().beta().derivatives(s.t, 2).map_err(err)?;
        let want = common::closed_form(s.x[0], s.x[1], s.est.theta_hat[0], s.est.rho_hat, &beta);
        let last = &trace.last;
        for (got, exp) in [
            (last.u, want.u),
            (last.kappa, want.kappa),
            (last.w_n[0][0], want.w2[0]),
            (last.w_n[1][0], want.w2[1]),
            (last.omega_bar[0], want.omega_bar[0]),
            (last.omega_bar[1], want.omega_bar[1]),
            (last.theta_hat_dot[0], want.theta_hat_dot),
            (last.rho_hat_dot, want.rho_hat_dot),
        ] {
            closed = closed.max(rel_err(got, exp));
        }
    }
    Ok((
        worst < 1e-8 && closed < 1e-6,
        format!("1000 trajectory points: identity error {worst:.1e}; closed form vs quadrature {closed:.1e}"),
    ))
}

/// Random smooth expression over `x1, x2, t`, built as source text so the
/// parser is exercised as well.
fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.2) {
        return match rng.gen_range(0..4) {
            0 => "x1".into(),
            1 => "x2".into(),
            2 => "t".into(),
            _ => format!("{:.3}", rng.gen_range(-2.0..2.0)),
        };
    }
    let a = random_expr(rng, depth - 1);
    match rng.gen_range(0..11) {
        0 => format!("({a} + {})", random_expr(rng, depth - 1)),
        1 => format!("({a} - {})", random_expr(rng, depth - 1)),
        2 => format!("({a} * {})", random_expr(rng, depth - 1)),
        3 => {
            let b = random_expr(rng, depth - 1);
            format!("({a} / (1 + ({b}) * ({b})))")
        }
        4 => format!("sin({a})"),
        5 => format!("cos({a})"),
        6 => format!("tanh({a})"),
        7 => format!("atan({a})"),
        8 => format!("exp(tanh({a}))"),
        9 => format!("sqrt(1 + ({a}) * ({a}))"),
        _ => format!("ln(2 + sin({a}))"),
    }
}

fn differentiation(runs: &BenchmarkRuns) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let reg = SeedRegistry::new([Seed::State(0), Seed::State(1), Seed::Time]).map_err(err)?;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let e = Expr::parse(&random_expr(&mut rng, 5)).map_err(err)?;
        let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let (_, grad) = evaluate_with_gradient(&reg, &p, |s| e.eval(&s[..2], &s[2])).map_err(err)?;
        for (k, g) in grad.iter().enumerate() {
            let fd = central_difference(
                |v| {
                    let mut q = p.clone();
                    q[k] = v;
                    e.eval_f64(&q[..2], q[2]).unwrap_or(f64::NAN)
                },
                p[k],
                1e-3,
            );
            worst = worst.max(rel_err(*g, fd));
        }
    }
    let plant = showcase_plant();
    let mut alpha: f64 = 0.0;
    for (strategy, log) in [(Strategy::Rational, &runs.rational), (Strategy::Tangent, &runs.tangent)] {
        let ctl = benchmark_controller(&plant, strategy).map_err(err)?;
        alpha = alpha.max(alpha_gradients(&ctl, &samples_from_log(log, 500)).map_err(err)?);
    }
    Ok((
        worst < 1e-6 && alpha < 1e-6,
        format!("1000 random expressions {worst:.1e}; alpha_1 partials at 1000 trajectory points {alpha:.1e}"),
    ))
}

fn transforms() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    let cases = [
        ("rational/algebraic", benchmark_beta(), NormalizedFunction::Algebraic, Strategy::Rational),
        ("rational/tanh", benchmark_beta(), NormalizedFunction::Tanh, Strategy::Rational),
        (
            "tangent",
            PerformanceFunction::exponential_from(4.1, 0.1, 0.4).map_err(err)?,
            NormalizedFunction::Algebraic,
            Strategy::Tangent,
        ),
    ];
    for (name, beta, psi, strategy) in cases {
        let tr = FunnelTransform::new(beta, psi, strategy).map_err(err)?;
        let pts = funnel_points(&tr, 1000, 0.05, 20.0, 0.99);
        let jac = transform_jacobian(&tr, &pts, |x, t| Ok(tr.transform(x, t)?.pi)).map_err(err)?;
        let trip = inverse_round_trip(&tr, &pts).map_err(err)?;
        pass &= jac.pi < 1e-6 && jac.psi < 1e-6 && trip < 1e-10;
        detail.push(format!("{name} Pi {:.1e} Psi {:.1e} inverse {trip:.1e}", jac.pi, jac.psi));
    }
    Ok((pass, detail.join("; ")))
}

fn baselines(runs: &BenchmarkRuns) -> Outcome {
    let xi = terminal(&runs.identity);
    let xr = terminal(&runs.rational);
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let pass = norm(&xi) < 1e-1 && norm(&xr) < 1e-1 && runs.tangent.violations() == 0 && runs.rational.violations() == 0;
    Ok((
        pass,
        format!(
            "|x(20)| identity {:.1e}, tangent {:.1e}, rational {:.1e}; identity left the reference funnel in {} rows",
            norm(&xi),
            norm(&terminal(&runs.tangent)),
            norm(&xr),
            runs.identity.violations()
        ),
    ))
}

fn equivalence() -> Outcome {
    let e = scalar_demo(SimConfig::default());
    let scalar = e.run_named("scalar").ok_or("missing run")?.map_err(err)?;
    let g = funnelback_core::presets::scalar_demo_gains(&e.plant);
    let gains = BacksteppingGains::uniform(1, 1, g.k, g.gamma_theta, g.gamma_rho, g.delta_theta).map_err(err)?;
    let transform = e.runs[0].controller.transform().clone();
    let bs = BacksteppingController::new(e.plant.bank().clone(), transform, gains, e.plant.sign_b()).map_err(err)?;
    let cfg = SimConfig::default();
    let log = simulate(&e.plant, &bs, &e.x0, &e.est0, &cfg).map_err(err)?;
    let mut worst: f64 = 0.0;
    for (a, b) in log.rows.iter().zip(&scalar.rows) {
        for (p, q) in [
            (a.x[0], b.x[0]),
            (a.u, b.u),
            (a.kappa, b.kappa),
            (a.theta_hat[0], b.theta_hat[0]),
            (a.rho_hat, b.rho_hat),
            (a.z[0], b.z[0]),
        ] {
            worst = worst.max(rel_err(p, q));
        }
    }
    Ok((
        log.rows.len() == scalar.rows.len() && worst < 1e-12,
        format!("{} rows, worst difference {worst:.1e}", log.rows.len()),
    ))
}

fn integrator_order() -> Outcome {
    let run = |dt: f64| -> Result<TrajectoryLog, String> {
        let cfg = SimConfig {
            dt,
            t_final: 4.0,
            ..SimConfig::default()
        };
        smooth_paper_sim(5.0, cfg).run_named("rational").ok_or("missing run")?.map_err(err)
    };
    let dts = [0.02, 0.01, 0.005];
    let logs: Vec<TrajectoryLog> = dts.iter().map(|&dt| run(dt)).collect::<Result<_, _>>()?;
    // Compare on the coarse grid.
    let diff = |fine: &TrajectoryLog, coarse: &TrajectoryLog| {
        let stride = (fine.rows.len() - 1) / (coarse.rows.len() - 1);
        coarse
            .rows
            .iter()
            .enumerate()
            .flat_map(|(k, r)| r.x.iter().zip(&fine.rows[k * stride].x).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    };
    let e1 = diff(&logs[1], &logs[0]);
    let e2 = diff(&logs[2], &logs[1]);
    let order = (e1 / e2).log2();
    Ok((
        (3.5..=4.5).contains(&order),
        format!("dt 0.02/0.01/0.005: differences {e1:.2e}, {e2:.2e}, observed order {order:.2}"),
    ))
}

fn main() -> ExitCode {
    let mut report = Report { failed: 0 };
    let runs = benchmark_runs();
    let with_runs = |f: fn(&BenchmarkRuns) -> Outcome| match &runs {
        Ok(r) => f(r),
        Err(e) => Err(format!("benchmark simulation failed: {e}")),
    };
    report.record(1, "funnel containment", with_runs(containment));
    report.record(2, "asymptotic regulation", with_runs(regulation));
    report.record(3, "scalar Lyapunov suite", scalar_suite());
    report.record(4, "Hadamard identity", with_runs(hadamard));
    report.record(5, "differentiation integrity", with_runs(differentiation));
    report.record(6, "transform correctness", transforms());
    report.record(7, "baseline comparison", with_runs(baselines));
    report.record(8, "first-order equivalence", equivalence());
    report.record(9, "integrator order", integrator_order());
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
