//! Experiment configuration files.
//!
//! A config is TOML with the sections `[experiment]`, `[plant]`,
//! `[initial]`, `[sim]` and one or more `[[controller]]` tables. Unknown
//! keys are rejected, and every error names the line it refers to.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use funnelback_core::backstepping::BacksteppingGains;
use funnelback_core::jet::Expr;
use funnelback_core::plant::{scalar_demo_plant, showcase_plant, smooth_showcase_plant, ParameterSignal, RegressorBank};
use funnelback_core::presets::{Experiment, Run};
use funnelback_core::{
    AdaptationGain, BacksteppingController, Controller, Estimates, FunnelPolicy, FunnelTransform, Integrator,
    NormalizedFunction, PerformanceFunction, Plant, ScalarController, ScalarGains, SimConfig, Strategy,
};
use serde::Deserialize;
use toml::Spanned;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{line}: {}", self.path.display(), self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Spanned<ExperimentSection>,
    pub plant: Spanned<PlantSection>,
    pub initial: Spanned<InitialSection>,
    #[serde(default)]
    pub sim: Option<Spanned<SimSection>>,
    #[serde(rename = "controller")]
    pub controllers: Vec<Spanned<ControllerSection>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    /// Output directory, relative to the config file.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantSection {
    Showcase,
    SmoothShowcase {
        sharpness: f64,
    },
    ScalarDemo,
    Expressions {
        /// `phi[i][j]`: component `j` of the regressor of state `i + 1`.
        phi: Vec<Vec<String>>,
        /// `Phi_1` with `phi_1 = x1 * Phi_1`, componentwise.
        phi1_factor: Vec<String>,
        theta: Vec<String>,
        theta_center: Vec<f64>,
        theta_radius: f64,
        b: String,
        /// Signed lower bound `ell_b`.
        b_lower: f64,
        b_upper: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub x: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub rho_hat: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub t_final: Option<f64>,
    #[serde(default)]
    pub integrator: Option<IntegratorName>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorName {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    Backstepping,
    Scalar,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    Rational,
    Tangent,
    Identity,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiName {
    #[default]
    Algebraic,
    Tanh,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    Abort,
    RecordAndContinue,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub label: String,
    pub kind: ControllerKind,
    pub strategy: StrategyName,
    #[serde(default)]
    pub psi: PsiName,
    /// Defaults to `abort` for funnel controllers and `record-and-continue`
    /// for the identity strategy.
    #[serde(default)]
    pub funnel_policy: Option<PolicyName>,
    pub beta: Spanned<BetaSection>,
    pub gains: Spanned<GainsSection>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BetaSection {
    /// `(initial - asymptote) e^{-rate t} + asymptote`.
    Exponential {
        #[serde(default = "one")]
        initial: f64,
        asymptote: f64,
        rate: f64,
    },
    PrescribedTime {
        asymptote: f64,
        horizon: f64,
        order: u32,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub k: Spanned<Vec<f64>>,
    pub gamma: Spanned<GammaSpec>,
    pub gamma_rho: Spanned<f64>,
    pub delta_theta: Spanned<f64>,
    #[serde(default)]
    pub eps_psi: Option<Spanned<f64>>,
    #[serde(default)]
    pub eps_omega: Option<Spanned<f64>>,
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub out: Option<PathBuf>,
}

/// A parsed experiment ready to run.
pub struct Loaded {
    pub experiment: Experiment,
    pub runs: Vec<RunInfo>,
    pub output: PathBuf,
}

/// What the summary and `verify` need to know about a run beyond the
/// `dyn Controller`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub label: String,
    pub kind: ControllerKind,
    pub strategy: Strategy,
    /// Present for backstepping controllers.
    pub backstepping: Option<BacksteppingController>,
}

struct Ctx<'a> {
    path: &'a Path,
    src: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.src.len());
        self.src[..end].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn at(&self, span: Range<usize>, message: impl fmt::Display) -> ConfigError {
        ConfigError {
            path: self.path.to_path_buf(),
            line: Some(self.line(span)),
            message: message.to_string(),
        }
    }
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<Loaded, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: path.to_path_buf(),
        line: None,
        message: format!("cannot read config: {e}"),
    })?;
    parse(&src, path, overrides)
}

pub fn parse(src: &str, path: &Path, overrides: &Overrides) -> Result<Loaded, ConfigError> {
    let ctx = Ctx { path, src };
    let file: ConfigFile = toml::from_str(src).map_err(|e| ConfigError {
        path: path.to_path_buf(),
        line: e.span().map(|s| ctx.line(s)),
        message: e.message().to_string(),
    })?;
    build(&ctx, file, overrides)
}

fn build(ctx: &Ctx, file: ConfigFile, overrides: &Overrides) -> Result<Loaded, ConfigError> {
    let plant_span = file.plant.span();
    let plant = build_plant(file.plant.into_inner()).map_err(|e| ctx.at(plant_span, e))?;
    let sim = sim_config(ctx, file.sim, overrides)?;

    if file.controllers.is_empty() {
        return Err(ConfigError {
            path: ctx.path.to_path_buf(),
            line: None,
            message: "at least one [[controller]] is required".into(),
        });
    }
    let mut runs = Vec::new();
    let mut infos = Vec::new();
    for c in file.controllers {
        let span = c.span();
        let c = c.into_inner();
        if c.label.is_empty() || !c.label.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-') {
            return Err(ctx.at(
                span,
                format!("controller label `{}` must be nonempty and use only letters, digits, `_` and `-`", c.label),
            ));
        }
        if infos.iter().any(|i: &RunInfo| i.label == c.label) {
            return Err(ctx.at(span, format!("duplicate controller label `{}`", c.label)));
        }
        let (controller, info) = build_controller(ctx, &plant, c)?;
        let policy = match info.policy {
            Some(p) => p,
            None if info.info.strategy == Strategy::Identity => FunnelPolicy::RecordAndContinue,
            None => FunnelPolicy::Abort,
        };
        runs.push(Run {
            label: info.info.label.clone(),
            controller,
            cfg: SimConfig {
                funnel_policy: policy,
                ..sim
            },
        });
        infos.push(info.info);
    }

    let initial_span = file.initial.span();
    let initial = file.initial.into_inner();
    let est0 = Estimates {
        theta_hat: initial.theta_hat,
        rho_hat: initial.rho_hat,
    };
    if initial.x.len() != plant.order() {
        return Err(ctx.at(
            initial_span,
            format!("x has {} entries, the plant has order {}", initial.x.len(), plant.order()),
        ));
    }
    for r in &runs {
        r.controller
            .check_estimates(&est0)
            .map_err(|e| ctx.at(initial_span.clone(), format!("controller `{}`: {e}", r.label)))?;
    }

    let experiment = file.experiment.into_inner();
    let output = match (&overrides.out, &experiment.output) {
        (Some(out), _) => out.clone(),
        (None, Some(out)) => ctx.path.parent().unwrap_or(Path::new(".")).join(out),
        (None, None) => PathBuf::from("out").join(&experiment.name),
    };
    Ok(Loaded {
        experiment: Experiment {
            name: experiment.name,
            plant,
            x0: initial.x,
            est0,
            runs,
        },
        runs: infos,
        output,
    })
}

fn sim_config(ctx: &Ctx, sim: Option<Spanned<SimSection>>, overrides: &Overrides) -> Result<SimConfig, ConfigError> {
    let mut cfg = SimConfig::default();
    let mut span = 0..0;
    if let Some(s) = sim {
        span = s.span();
        let s = s.into_inner();
        cfg.dt = s.dt.unwrap_or(cfg.dt);
        cfg.t_final = s.t_final.unwrap_or(cfg.t_final);
        if let Some(i) = s.integrator {
            cfg.integrator = match i {
                IntegratorName::Rk4 => Integrator::Rk4,
                IntegratorName::Euler => Integrator::Euler,
            };
        }
    }
    cfg.dt = overrides.dt.unwrap_or(cfg.dt);
    cfg.t_final = overrides.t_final.unwrap_or(cfg.t_final);
    cfg.steps().map_err(|e| ctx.at(span, e))?;
    Ok(cfg)
}

fn parse_expr(src: &str) -> Result<Expr, String> {
    Expr::parse(src).map_err(|e| format!("in `{src}`: {e}"))
}

fn parse_all(srcs: &[String]) -> Result<Vec<Expr>, String> {
    srcs.iter().map(|s| parse_expr(s)).collect()
}

fn build_plant(p: PlantSection) -> Result<Plant, String> {
    Ok(match p {
        PlantSection::Showcase => showcase_plant(),
        PlantSection::SmoothShowcase { sharpness } => {
            if !(sharpness > 0.0 && sharpness.is_finite()) {
                return Err(format!("sharpness must be positive, got {sharpness}"));
            }
            smooth_showcase_plant(sharpness)
        }
        PlantSection::ScalarDemo => scalar_demo_plant(),
        PlantSection::Expressions {
            phi,
            phi1_factor,
            theta,
            theta_center,
            theta_radius,
            b,
            b_lower,
            b_upper,
        } => {
            let phi = phi.iter().map(|row| parse_all(row)).collect::<Result<Vec<_>, _>>()?;
            let bank = RegressorBank::new(phi, parse_all(&phi1_factor)?).map_err(|e| e.to_string())?;
            let theta = ParameterSignal::parameter(parse_all(&theta)?, theta_center, theta_radius)
                .map_err(|e| e.to_string())?;
            let b = ParameterSignal::gain(parse_expr(&b)?, b_lower, b_upper).map_err(|e| e.to_string())?;
            Plant::new(bank, theta, b).map_err(|e| e.to_string())?
        }
    })
}

struct Built {
    info: RunInfo,
    policy: Option<FunnelPolicy>,
}

fn build_controller(ctx: &Ctx, plant: &Plant, c: ControllerSection) -> Result<(Arc<dyn Controller>, Built), ConfigError> {
    let strategy = match c.strategy {
        StrategyName::Rational => Strategy::Rational,
        StrategyName::Tangent => Strategy::Tangent,
        StrategyName::Identity => Strategy::Identity,
    };
    let psi = match c.psi {
        PsiName::Algebraic => NormalizedFunction::Algebraic,
        PsiName::Tanh => NormalizedFunction::Tanh,
    };
    let beta_span = c.beta.span();
    let beta = match c.beta.into_inner() {
        BetaSection::Exponential {
            initial,
            asymptote,
            rate,
        } => PerformanceFunction::exponential_from(initial, asymptote, rate),
        BetaSection::PrescribedTime {
            asymptote,
            horizon,
            order,
        } => PerformanceFunction::prescribed_time(asymptote, horizon, order),
    }
    .map_err(|e| ctx.at(beta_span.clone(), e))?;
    let transform = FunnelTransform::new(beta, psi, strategy).map_err(|e| ctx.at(beta_span, e))?;

    let g = c.gains.into_inner();
    let positive = |v: &Spanned<f64>, name: &str| {
        if *v.get_ref() > 0.0 && v.get_ref().is_finite() {
            Ok(*v.get_ref())
        } else {
            Err(ctx.at(v.span(), format!("{name} must be positive, got {}", v.get_ref())))
        }
    };
    for (i, &k) in g.k.get_ref().iter().enumerate() {
        if !(k > 0.0 && k.is_finite()) {
            return Err(ctx.at(g.k.span(), format!("k{} must be positive, got {k}", i + 1)));
        }
    }
    let gamma_rho = positive(&g.gamma_rho, "gamma_rho")?;
    if !(*g.delta_theta.get_ref() >= 0.0 && g.delta_theta.get_ref().is_finite()) {
        return Err(ctx.at(
            g.delta_theta.span(),
            format!("delta_theta must be nonnegative, got {}", g.delta_theta.get_ref()),
        ));
    }
    let sign = plant.sign_b();
    let info = |backstepping| RunInfo {
        label: c.label.clone(),
        kind: c.kind,
        strategy,
        backstepping,
    };
    let policy = c.funnel_policy.map(|p| match p {
        PolicyName::Abort => FunnelPolicy::Abort,
        PolicyName::RecordAndContinue => FunnelPolicy::RecordAndContinue,
    });

    match c.kind {
        ControllerKind::Scalar => {
            if plant.order() != 1 || plant.dim() != 1 {
                return Err(ctx.at(
                    g.k.span(),
                    "the scalar controller needs a first-order plant with one parameter",
                ));
            }
            let gamma = match g.gamma.get_ref() {
                GammaSpec::Scalar(v) => *v,
                GammaSpec::Matrix(m) if m.len() == 1 && m[0].len() == 1 => m[0][0],
                GammaSpec::Matrix(_) => {
                    return Err(ctx.at(g.gamma.span(), "the scalar controller takes a scalar gamma"));
                }
            };
            if g.k.get_ref().len() != 1 {
                return Err(ctx.at(g.k.span(), format!("expected 1 gain k, got {}", g.k.get_ref().len())));
            }
            let gains = ScalarGains {
                k: g.k.get_ref()[0],
                gamma_theta: gamma,
                gamma_rho,
                delta_theta: *g.delta_theta.get_ref(),
            };
            let ctl = ScalarController::new(transform, gains, sign).map_err(|e| ctx.at(g.gamma.span(), e))?;
            Ok((Arc::new(ctl), Built { info: info(None), policy }))
        }
        ControllerKind::Backstepping => {
            let q = plant.dim();
            let gamma = match g.gamma.get_ref() {
                GammaSpec::Scalar(v) => AdaptationGain::scaled_identity(q, *v),
                GammaSpec::Matrix(m) => AdaptationGain::from_rows(m),
            }
            .map_err(|e| ctx.at(g.gamma.span(), e))?;
            let gains = BacksteppingGains {
                k: g.k.get_ref().clone(),
                gamma,
                gamma_rho,
                delta_theta: *g.delta_theta.get_ref(),
                eps_psi: g.eps_psi.as_ref().map(|v| positive(v, "eps_psi")).transpose()?.unwrap_or(1.0),
                eps_omega: g.eps_omega.as_ref().map(|v| positive(v, "eps_omega")).transpose()?.unwrap_or(1.0),
            };
            let ctl = BacksteppingController::new(plant.bank().clone(), transform, gains, sign)
                .map_err(|e| ctx.at(g.k.span(), e))?;
            Ok((
                Arc::new(ctl.clone()),
                Built {
                    info: info(Some(ctl)),
                    policy,
                },
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[experiment]
name = "t"

[plant]
kind = "scalar-demo"

[initial]
x = [0.5]
theta_hat = [0.0]
rho_hat = 0.5

[[controller]]
label = "scalar"
kind = "scalar"
strategy = "rational"

[controller.beta]
kind = "exponential"
asymptote = 0.1
rate = 0.4

[controller.gains]
k = [1.0]
gamma = 1.0
gamma_rho = 1.0
delta_theta = 1.6
"#;

    fn parse_str(src: &str) -> Result<Loaded, ConfigError> {
        parse(src, Path::new("test.toml"), &Overrides::default())
    }

    #[test]
    fn minimal_config_loads() {
        let l = parse_str(MINIMAL).unwrap();
        assert_eq!(l.experiment.runs.len(), 1);
        assert_eq!(l.runs[0].strategy, Strategy::Rational);
        assert_eq!(l.experiment.runs[0].cfg, SimConfig::default());
        assert_eq!(l.output, PathBuf::from("out/t"));
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let src = MINIMAL.replace("rate = 0.4", "rate = 0.4\nspeed = 2");
        let e = parse_str(&src).err().unwrap();
        assert!(e.message.contains("speed"), "{e}");
        // Tagged tables are buffered before decoding, so the line is that
        // of the table header.
        assert_eq!(e.line, Some(src.lines().position(|l| l == "[controller.beta]").unwrap() + 1));
    }

    #[test]
    fn negative_gain_points_at_its_line() {
        let src = MINIMAL.replace("k = [1.0]", "k = [-1.0]");
        let e = parse_str(&src).err().unwrap();
        assert!(e.message.contains("k1 must be positive"), "{e}");
        assert_eq!(e.line, Some(src.lines().position(|l| l.starts_with("k = ")).unwrap() + 1));
    }

    #[test]
    fn overrides_replace_sim_settings() {
        let o = Overrides {
            dt: Some(0.01),
            t_final: Some(2.0),
            out: Some("elsewhere".into()),
        };
        let l = parse(MINIMAL, Path::new("c.toml"), &o).unwrap();
        assert_eq!(l.experiment.runs[0].cfg.dt, 0.01);
        assert_eq!(l.experiment.runs[0].cfg.t_final, 2.0);
        assert_eq!(l.output, PathBuf::from("elsewhere"));
        let bad = Overrides {
            dt: Some(0.3),
            t_final: Some(1.0),
            out: None,
        };
        assert!(parse(MINIMAL, Path::new("c.toml"), &bad).is_err());
    }
}
