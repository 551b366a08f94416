use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use funnelback_cli::config::{self, Loaded, Overrides};
use funnelback_cli::report::{self, Summary};
use funnelback_cli::verify::{self, Options};

const PAPER_SIM: &str = include_str!("../configs/paper-sim.toml");
const SCALAR_DEMO: &str = include_str!("../configs/scalar-demo.toml");

#[derive(Parser)]
#[command(name = "funnelback", version, about = "Funnel-constrained adaptive backstepping experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every controller in the experiment and write CSV logs,
    /// SVG figures and summary.json.
    Run(Common),
    /// Simulate, then check the numerical invariants of every run.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Check the rational transform's dz/dx against a known misprint;
        /// the Jacobian check is expected to fail.
        #[arg(long)]
        inject_pi_typo: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    PaperSim,
    ScalarDemo,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Accepted for scripting convenience; every run is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<Loaded> {
        let overrides = Overrides {
            dt: self.dt,
            t_final: self.t_final,
            out: self.out.clone(),
        };
        let loaded = match (&self.config, self.preset) {
            (Some(path), _) => config::load(path, &overrides)?,
            (None, Some(p)) => {
                let (src, name) = match p {
                    Preset::PaperSim => (PAPER_SIM, "paper-sim.toml"),
                    Preset::ScalarDemo => (SCALAR_DEMO, "scalar-demo.toml"),
                };
                // Embedded presets have no directory of their own.
                let mut overrides = overrides;
                if overrides.out.is_none() {
                    overrides.out = Some(Path::new("out").join(name.trim_end_matches(".toml")));
                }
                config::parse(src, Path::new(name), &overrides)?
            }
            (None, None) => unreachable!("clap requires --config or --preset"),
        };
        Ok(loaded)
    }
}

fn print_summary(summary: &Summary, out: &Path) {
    println!("experiment {} (dt {}, t_final {})", summary.experiment, summary.dt, summary.t_final);
    for r in &summary.runs {
        let margin = r.min_funnel_margin.map_or("-".to_string(), |m| format!("{m:.3e}"));
        println!(
            "  {:<12} {:<9} {:<12} rows {:>6}  violations {:>5}  min margin {:>10}  |x(T)| {}",
            r.label,
            r.status,
            r.strategy,
            r.rows,
            r.funnel_violations,
            margin,
            r.terminal_norm.map_or("-".to_string(), |v| format!("{v:.3e}")),
        );
        if let Some(e) = &r.error {
            println!("    error: {e}");
        }
    }
    println!("artifacts in {}", out.display());
}

fn run(common: &Common) -> Result<ExitCode> {
    let loaded = common.load()?;
    let results = loaded.experiment.run();
    let summary = report::write_artifacts(&loaded, &results, &loaded.output)
        .with_context(|| format!("writing artifacts to {}", loaded.output.display()))?;
    print_summary(&summary, &loaded.output);
    Ok(if results.iter().all(|r| r.is_ok()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn verify_cmd(common: &Common, inject_pi_typo: bool) -> Result<ExitCode> {
    let loaded = common.load()?;
    let results = loaded.experiment.run();
    let rows = verify::verify(&loaded, &results, Options { inject_pi_typo });
    print!("{}", verify::render(&rows));
    Ok(if verify::all_passed(&rows) {
        println!("all checks passed");
        ExitCode::SUCCESS
    } else {
        let failed = rows.iter().filter(|r| r.status == report::Status::Fail).count();
        println!("{failed} check(s) failed");
        ExitCode::FAILURE
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(c) => run(c),
        Command::Verify { common, inject_pi_typo } => verify_cmd(common, *inject_pi_typo),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
