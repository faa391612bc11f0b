use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use holobrack::cli::{FileConfig, FlagValues, RunConfig, Scenario};

/// Constrained-mechanics toolkit for the ball-on-an-incline system:
/// staged constraint analysis, Dirac brackets, trajectories, Airy spectra
/// and the operator-level quantisation report.
#[derive(Parser)]
#[command(name = "holobrack", version, about)]
struct CliArgs {
    #[command(subcommand)]
    scenario: ScenarioCmd,
}

#[derive(Subcommand)]
enum ScenarioCmd {
    /// Constraint analysis report plus an RK4 trajectory CSV.
    Classical(Common),
    /// Bracket matrix, multipliers and the Dirac-bracket table as JSON.
    Brackets(Common),
    /// Wall-problem eigenvalues and normalisation constants as JSON.
    SpectrumWall(Common),
    /// Wedge-problem eigenvalues (merged parities) as JSON.
    SpectrumWedge(Common),
    /// Sampled wall eigenstate and its probability density as CSV.
    Wavefunction(Common),
    /// Commutator table, momentum representation and reduction report.
    Quantize(Common),
}

#[derive(Args)]
struct Common {
    /// Shape selector: 0 hollow, 2 solid.
    #[arg(long)]
    a: Option<f64>,
    /// Mass in kg.
    #[arg(long)]
    m: Option<f64>,
    /// Gravitational acceleration in m/s².
    #[arg(long)]
    g: Option<f64>,
    /// Ball radius in m.
    #[arg(long = "R")]
    radius: Option<f64>,
    /// Incline angle in radians, in (0, pi/2).
    #[arg(long)]
    phi: Option<f64>,
    /// Action constant.
    #[arg(long)]
    hbar: Option<f64>,
    /// Use the convention in which both characteristic scales equal one.
    #[arg(long)]
    unit_scale: bool,
    /// Number of levels (spectra) or the level index (wavefunction).
    #[arg(short = 'n', long = "n-max")]
    n_max: Option<usize>,
    /// Integration horizon in seconds.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Integration step in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Write the scenario payload to this path instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Payload format; each scenario accepts its native one.
    #[arg(long)]
    format: Option<String>,
    /// JSON file with defaults; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn resolve(scenario: Scenario, common: Common) -> holobrack::Result<RunConfig> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let flags = FlagValues {
        m: common.m,
        g: common.g,
        r: common.radius,
        phi: common.phi,
        a: common.a,
        hbar: common.hbar,
        unit_scale: common.unit_scale,
        n_max: common.n_max,
        t_end: common.t_end,
        dt: common.dt,
        out: common.out,
        format: common.format,
    };
    RunConfig::resolve(scenario, flags, file)
}

fn main() -> ExitCode {
    env_logger::init();
    let args = CliArgs::parse();
    let (scenario, common) = match args.scenario {
        ScenarioCmd::Classical(c) => (Scenario::Classical, c),
        ScenarioCmd::Brackets(c) => (Scenario::Brackets, c),
        ScenarioCmd::SpectrumWall(c) => (Scenario::SpectrumWall, c),
        ScenarioCmd::SpectrumWedge(c) => (Scenario::SpectrumWedge, c),
        ScenarioCmd::Wavefunction(c) => (Scenario::Wavefunction, c),
        ScenarioCmd::Quantize(c) => (Scenario::Quantize, c),
    };
    let outcome = resolve(scenario, common).and_then(|config| holobrack::cli::run(&config));
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("holobrack: scenario consistency checks failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("holobrack: {e}");
            ExitCode::from(2)
        }
    }
}
