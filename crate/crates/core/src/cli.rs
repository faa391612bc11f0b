//! Scenario driver behind the `holobrack` binary: configuration resolution
//! (flags over file values over defaults), deterministic rendering of each
//! scenario's payload, and the per-scenario consistency checks that decide
//! the exit status.

use std::path::PathBuf;

use serde::Deserialize;

use crate::dynamics::{integrate, intrinsic_acceleration, Trajectory};
use crate::error::{Error, Result};
use crate::mechanics::{ball_system, dirac_bracket, BallParams, ConstrainedSystem, Multiplier};
use crate::operator_quantize::{
    build_commutator_table, intrinsic_equivalence_check, momentum_representation_matrix,
    physical_reduction, SYMBOLS,
};
use crate::output::{fmt_float, JsonWriter};
use crate::phase_algebra::{poisson_bracket, PhasePoint};
use crate::quantum_spectrum::{intrinsic_params, wall_spectrum, wedge_spectrum, IntrinsicParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Classical,
    Brackets,
    SpectrumWall,
    SpectrumWedge,
    Wavefunction,
    Quantize,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Classical => "classical",
            Scenario::Brackets => "brackets",
            Scenario::SpectrumWall => "spectrum-wall",
            Scenario::SpectrumWedge => "spectrum-wedge",
            Scenario::Wavefunction => "wavefunction",
            Scenario::Quantize => "quantize",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub ball: BallParams,
    pub hbar: f64,
    pub scenario: Scenario,
    pub unit_scale: bool,
    pub n_max: usize,
    pub t_end: f64,
    pub dt: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// Optional values from a `--config` JSON file; any field may be omitted.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub m: Option<f64>,
    pub g: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub phi: Option<f64>,
    pub a: Option<f64>,
    pub hbar: Option<f64>,
    pub unit_scale: Option<bool>,
    pub n_max: Option<usize>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
}

impl FileConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("config file {}: {e}", path.display())))
    }
}

/// Flag values straight from the command line; `None` falls back to the
/// config file, then to the defaults.
#[derive(Debug, Clone, Default)]
pub struct FlagValues {
    pub m: Option<f64>,
    pub g: Option<f64>,
    pub r: Option<f64>,
    pub phi: Option<f64>,
    pub a: Option<f64>,
    pub hbar: Option<f64>,
    pub unit_scale: bool,
    pub n_max: Option<usize>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
}

impl RunConfig {
    pub fn resolve(scenario: Scenario, flags: FlagValues, file: FileConfig) -> Result<RunConfig> {
        let m = flags.m.or(file.m).unwrap_or(1.0);
        let g = flags.g.or(file.g).unwrap_or(9.8);
        let r = flags.r.or(file.r).unwrap_or(1.0);
        let phi = flags
            .phi
            .or(file.phi)
            .unwrap_or(std::f64::consts::FRAC_PI_4);
        let a = flags.a.or(file.a).unwrap_or(2.0);
        let ball = BallParams::new(m, g, r, phi, a)?;
        let hbar = flags.hbar.or(file.hbar).unwrap_or(1.0);
        if !(hbar > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "hbar must be positive, got {hbar}"
            )));
        }
        let unit_scale = flags.unit_scale || file.unit_scale.unwrap_or(false);
        let n_max = flags.n_max.or(file.n_max).unwrap_or(4);
        if n_max == 0 {
            return Err(Error::InvalidConfig("n_max must be at least 1".into()));
        }
        let t_end = flags.t_end.or(file.t_end).unwrap_or(2.0);
        let dt = flags.dt.or(file.dt).unwrap_or(1e-3);
        let out = flags.out.or(file.out);
        let format_str = flags.format.or(file.format);
        let default_format = match scenario {
            Scenario::Classical | Scenario::Wavefunction => Format::Csv,
            _ => Format::Json,
        };
        let format = match format_str.as_deref() {
            None => default_format,
            Some("json") => Format::Json,
            Some("csv") => Format::Csv,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "format must be `json` or `csv`, got `{other}`"
                )))
            }
        };
        if format != default_format {
            return Err(Error::InvalidConfig(format!(
                "scenario {} only supports --format {}",
                scenario.as_str(),
                match default_format {
                    Format::Json => "json",
                    Format::Csv => "csv",
                }
            )));
        }
        Ok(RunConfig {
            ball,
            hbar,
            scenario,
            unit_scale,
            n_max,
            t_end,
            dt,
            out,
            format,
        })
    }

    fn spectrum_params(&self) -> Result<IntrinsicParams> {
        if self.unit_scale {
            Ok(IntrinsicParams::unit_scale())
        } else {
            intrinsic_params(&self.ball, self.hbar)
        }
    }
}

/// What a scenario produced: the payload destined for `--out` (or stdout),
/// an optional extra stdout report, and whether the scenario's internal
/// consistency checks all passed.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub payload: String,
    pub report: Option<String>,
    pub checks_passed: bool,
}

/// Renders a scenario without touching the filesystem.
pub fn render(config: &RunConfig) -> Result<RunOutput> {
    match config.scenario {
        Scenario::Classical => render_classical(config),
        Scenario::Brackets => render_brackets(config),
        Scenario::SpectrumWall => render_spectrum(config, false),
        Scenario::SpectrumWedge => render_spectrum(config, true),
        Scenario::Wavefunction => render_wavefunction(config),
        Scenario::Quantize => render_quantize(config),
    }
}

/// Renders and writes: payload to `--out` when given (stdout otherwise),
/// report to stdout. Returns the process exit code.
pub fn run(config: &RunConfig) -> Result<i32> {
    let output = render(config)?;
    if let Some(report) = &output.report {
        print!("{report}");
    }
    match &config.out {
        Some(path) => std::fs::write(path, &output.payload)?,
        None => {
            if output.report.is_none() {
                print!("{}", output.payload);
            }
        }
    }
    Ok(if output.checks_passed { 0 } else { 1 })
}

fn write_params(w: &mut JsonWriter, ball: &BallParams) {
    w.key("params").begin_object();
    w.key("m").float(ball.m);
    w.key("g").float(ball.g);
    w.key("R").float(ball.r);
    w.key("phi").float(ball.phi);
    w.key("a").float(ball.a);
    w.end_object();
}

fn write_constraints(w: &mut JsonWriter, system: &ConstrainedSystem) {
    w.key("constraints").begin_array();
    for c in system.constraints() {
        w.begin_object();
        w.key("label").int(c.label as i64);
        w.key("stage").string(&c.stage.to_string());
        w.key("class").string(&c.class.to_string());
        w.key("expr")
            .string(&c.expr.display(system.space()).to_string());
        w.end_object();
    }
    w.end_array();
}

fn write_multipliers(w: &mut JsonWriter, system: &ConstrainedSystem) {
    w.key("multipliers").begin_array();
    if let Some(ms) = system.multipliers() {
        for (i, m) in ms.iter().enumerate() {
            w.begin_object();
            w.key("label").int(i as i64 + 1);
            w.key("kind").string(m.kind());
            match m {
                Multiplier::Solved { poly, on_surface } => {
                    w.key("on_surface").float(*on_surface);
                    w.key("poly")
                        .string(&poly.display(system.space()).to_string());
                }
                Multiplier::ZeroOnSurface { poly } => {
                    w.key("on_surface").float(0.0);
                    w.key("poly")
                        .string(&poly.display(system.space()).to_string());
                }
                Multiplier::Free { gauge_value } => {
                    w.key("gauge_value").float(*gauge_value);
                }
            }
            w.end_object();
        }
    }
    w.end_array();
}

/// Worst residual of the multiplier consistency system when the solved
/// values are substituted back.
fn multiplier_residual(system: &ConstrainedSystem) -> Result<f64> {
    let ms = system
        .multipliers()
        .ok_or_else(|| Error::IncompleteSystem("multipliers not solved".into()))?;
    let theta = &system.theta().entries;
    let mut worst = 0.0f64;
    let chart = system.surface_chart()?;
    let samples = sample_coords(chart.dim(), 7);
    for (j, c) in system.constraints().iter().enumerate() {
        let bracket = poisson_bracket(&c.expr, system.hamiltonian(), system.space())?;
        for coords in &samples {
            let pt = chart.point(coords);
            let mut value = bracket.eval(&pt)?;
            for (l, m) in ms.iter().enumerate() {
                let lambda = match m {
                    Multiplier::Solved { poly, .. } | Multiplier::ZeroOnSurface { poly } => {
                        poly.eval(&pt)?
                    }
                    Multiplier::Free { gauge_value } => *gauge_value,
                };
                value += theta[j][l] * lambda;
            }
            worst = worst.max(value.abs());
        }
    }
    Ok(worst)
}

/// Deterministic low-discrepancy coordinates in [-1, 1]^dim.
fn sample_coords(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut state = 0.5f64;
    for _ in 0..count {
        let mut coords = Vec::with_capacity(dim);
        for _ in 0..dim {
            state = (state * 997.0 + 0.123456789).fract();
            coords.push(2.0 * state - 1.0);
        }
        out.push(coords);
    }
    out
}

fn trajectory_csv(system: &ConstrainedSystem, traj: &Trajectory) -> Result<String> {
    let space = system.space();
    let mut csv = String::from("t");
    for i in 0..space.num_vars() {
        csv.push(',');
        csv.push_str(space.var_name(i));
    }
    for c in system.constraints() {
        csv.push_str(&format!(",res_{}", c.label));
    }
    csv.push('\n');
    for (t, state) in traj.times.iter().zip(&traj.states) {
        csv.push_str(&fmt_float(*t));
        for v in &state.values {
            csv.push(',');
            csv.push_str(&fmt_float(*v));
        }
        for c in system.constraints() {
            csv.push(',');
            csv.push_str(&fmt_float(c.expr.eval(state)?));
        }
        csv.push('\n');
    }
    Ok(csv)
}

fn render_classical(config: &RunConfig) -> Result<RunOutput> {
    let system = ball_system(&config.ball)?;
    let pt0 = PhasePoint::origin(system.space());
    let traj = integrate(&system, &pt0, config.t_end, config.dt)?;

    let h = system.hamiltonian();
    let mut energy_min = f64::INFINITY;
    let mut energy_max = f64::NEG_INFINITY;
    let mut energy_span = 1.0f64;
    for state in &traj.states {
        let e = h.eval(state)?;
        energy_min = energy_min.min(e);
        energy_max = energy_max.max(e);
        energy_span = energy_span.max(e.abs());
    }
    let energy_drift = (energy_max - energy_min) / energy_span;
    let worst_drift = traj.drift.iter().cloned().fold(0.0f64, f64::max);
    let drift_ok = worst_drift < 1e-6;
    let energy_ok = energy_drift < 1e-6;
    let checks_passed = drift_ok && energy_ok;

    let mut w = JsonWriter::new();
    w.begin_object();
    w.key("scenario").string("classical");
    write_params(&mut w, &config.ball);
    w.key("iterations").int(system.iterations() as i64);
    write_constraints(&mut w, &system);
    write_multipliers(&mut w, &system);
    w.key("closed_form_acceleration")
        .float(intrinsic_acceleration(&config.ball));
    w.key("trajectory").begin_object();
    w.key("t_end").float(config.t_end);
    w.key("dt").float(config.dt);
    w.key("rows").int(traj.times.len() as i64);
    w.key("final_state").begin_array();
    for v in &traj.states[traj.states.len() - 1].values {
        w.float(*v);
    }
    w.end_array();
    w.key("constraint_drift").begin_array();
    for d in &traj.drift {
        w.float(*d);
    }
    w.end_array();
    w.key("energy_drift").float(energy_drift);
    w.end_object();
    w.key("checks").begin_object();
    w.key("drift_ok").bool(drift_ok);
    w.key("energy_ok").bool(energy_ok);
    w.key("pass").bool(checks_passed);
    w.end_object();
    w.end_object();

    Ok(RunOutput {
        payload: trajectory_csv(&system, &traj)?,
        report: Some(w.finish()),
        checks_passed,
    })
}

fn render_brackets(config: &RunConfig) -> Result<RunOutput> {
    let system = ball_system(&config.ball)?;
    let theta = system.theta();
    let m = theta.entries.len();

    // Antisymmetry of the stored matrix, worst case.
    let mut antisym = 0.0f64;
    for j in 0..m {
        for l in 0..m {
            antisym = antisym.max((theta.entries[j][l] + theta.entries[l][j]).abs());
        }
    }
    let residual = multiplier_residual(&system)?;

    // Blocks of the second-class part: rows (5,6) x cols (1,2) of the
    // coupling between position-type and momentum-type constraints, and its
    // inverse.
    let theta_a: Vec<Vec<f64>> = [4usize, 5]
        .iter()
        .map(|&j| [0usize, 1].iter().map(|&l| theta.entries[j][l]).collect())
        .collect();
    let theta_a_inv = crate::linalg::invert(&theta_a, 1e-10).ok_or_else(|| {
        Error::DegenerateConstraint("the position-momentum coupling block is singular".into())
    })?;
    let product = crate::linalg::mat_mul(&theta_a, &theta_a_inv);
    let mut inverse_residual = 0.0f64;
    for (i, row) in product.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            inverse_residual = inverse_residual.max((v - target).abs());
        }
    }
    let checks_passed = antisym == 0.0 && residual < 1e-10 && inverse_residual < 1e-12;

    let space = system.space();
    let mut w = JsonWriter::new();
    w.begin_object();
    w.key("scenario").string("brackets");
    write_params(&mut w, &config.ball);
    w.key("iterations").int(system.iterations() as i64);
    write_constraints(&mut w, &system);
    w.key("theta").float_matrix(&theta.entries);
    w.key("theta_rank").int(theta.rank as i64);
    w.key("theta_a").float_matrix(&theta_a);
    w.key("theta_a_inverse").float_matrix(&theta_a_inv);
    write_multipliers(&mut w, &system);
    w.key("dirac_brackets").begin_array();
    for i in 0..SYMBOLS.len() {
        for j in (i + 1)..SYMBOLS.len() {
            let a = space.var(SYMBOLS[i].as_str())?;
            let b = space.var(SYMBOLS[j].as_str())?;
            let bracket = dirac_bracket(&a, &b, &system)?;
            let value = crate::mechanics::reduce_modulo_span(
                &bracket,
                &system
                    .constraints()
                    .iter()
                    .map(|c| &c.expr)
                    .collect::<Vec<_>>(),
            );
            w.begin_object();
            w.key("pair")
                .string(&format!("{},{}", SYMBOLS[i].as_str(), SYMBOLS[j].as_str()));
            w.key("value").float(value.constant_part());
            w.end_object();
        }
    }
    w.end_array();
    w.key("checks").begin_object();
    w.key("theta_antisymmetry_error").float(antisym);
    w.key("theta_a_inverse_residual").float(inverse_residual);
    w.key("multiplier_residual").float(residual);
    w.key("pass").bool(checks_passed);
    w.end_object();
    w.end_object();

    Ok(RunOutput {
        payload: w.finish(),
        report: None,
        checks_passed,
    })
}

fn render_spectrum(config: &RunConfig, wedge: bool) -> Result<RunOutput> {
    let params = config.spectrum_params()?;
    let levels = if wedge {
        wedge_spectrum(&params, config.n_max)?
    } else {
        wall_spectrum(&params, config.n_max)?
    };

    let mut ascending = true;
    for pair in levels.windows(2) {
        if pair[1].energy <= pair[0].energy {
            ascending = false;
        }
    }
    let mut roots_ok = true;
    for level in &levels {
        let root = -level.energy / params.energy_scale();
        let v = crate::airy::airy_eval(root)?;
        let residual = match level.root_family {
            crate::quantum_spectrum::RootFamily::Ai => v.ai.abs(),
            crate::quantum_spectrum::RootFamily::AiPrime => v.ai_prime.abs(),
        };
        if residual > 1e-12 {
            roots_ok = false;
        }
    }
    let checks_passed = ascending && roots_ok;

    let mut w = JsonWriter::new();
    w.begin_object();
    w.key("scenario").string(if wedge {
        "spectrum-wedge"
    } else {
        "spectrum-wall"
    });
    write_params(&mut w, &config.ball);
    w.key("unit_scale").bool(config.unit_scale);
    w.key("scale").begin_object();
    w.key("mass").float(params.mass);
    w.key("force").float(params.force);
    w.key("hbar").float(params.hbar);
    w.key("energy_scale").float(params.energy_scale());
    w.key("length_scale").float(params.length_scale());
    w.end_object();
    w.key("levels").begin_array();
    for level in &levels {
        w.begin_object();
        w.key("rank").int(level.rank as i64);
        w.key("energy").float(level.energy);
        w.key("parity").string(level.parity.as_str());
        w.key("root_family").string(level.root_family.as_str());
        w.key("root_index").int(level.root_index as i64);
        w.key("family_label").int(level.family_label() as i64);
        w.key("norm_sq").float(level.norm_sq);
        w.end_object();
    }
    w.end_array();
    w.key("checks").begin_object();
    w.key("ascending").bool(ascending);
    w.key("roots_verified").bool(roots_ok);
    w.key("pass").bool(checks_passed);
    w.end_object();
    w.end_object();

    Ok(RunOutput {
        payload: w.finish(),
        report: None,
        checks_passed,
    })
}

fn render_wavefunction(config: &RunConfig) -> Result<RunOutput> {
    let params = config.spectrum_params()?;
    let levels = wall_spectrum(&params, config.n_max)?;
    let level = levels[config.n_max - 1];
    let ell = params.length_scale();
    let turning = level.energy / params.force;
    let x_min = -(turning + 10.0 * ell);
    let x_max = 2.0 * ell;
    let points = 1201usize;

    let mut csv = String::from("x,psi,density\n");
    let mut all_finite = true;
    for i in 0..points {
        let x = x_min + (x_max - x_min) * i as f64 / (points - 1) as f64;
        let psi = crate::quantum_spectrum::eigenstate_eval(&level, &params, x)?;
        let density = psi * psi;
        if !psi.is_finite() {
            all_finite = false;
        }
        csv.push_str(&fmt_float(x));
        csv.push(',');
        csv.push_str(&fmt_float(psi));
        csv.push(',');
        csv.push_str(&fmt_float(density));
        csv.push('\n');
    }
    Ok(RunOutput {
        payload: csv,
        report: None,
        checks_passed: all_finite,
    })
}

fn render_quantize(config: &RunConfig) -> Result<RunOutput> {
    let system = ball_system(&config.ball)?;
    let table = build_commutator_table(&system, config.hbar)?;
    let (matrix, rank) = momentum_representation_matrix(&config.ball)?;
    let (kinetic, potential) = physical_reduction(&config.ball, config.hbar)?;
    let report = intrinsic_equivalence_check(&config.ball, config.hbar)?;

    let mut w = JsonWriter::new();
    w.begin_object();
    w.key("scenario").string("quantize");
    write_params(&mut w, &config.ball);
    w.key("hbar").float(config.hbar);
    w.key("commutator_table").begin_array();
    for i in 0..SYMBOLS.len() {
        for j in (i + 1)..SYMBOLS.len() {
            w.begin_object();
            w.key("pair")
                .string(&format!("{},{}", SYMBOLS[i].as_str(), SYMBOLS[j].as_str()));
            w.key("dirac").float(table.dirac(SYMBOLS[i], SYMBOLS[j]));
            w.end_object();
        }
    }
    w.end_array();
    w.key("momentum_matrix").float_matrix(&matrix);
    w.key("momentum_rank").int(rank as i64);
    w.key("reduced").begin_object();
    w.key("kinetic_px2").float(kinetic);
    w.key("potential_x").float(potential);
    w.end_object();
    w.key("equivalence").begin_array();
    for check in &report.checks {
        w.begin_object();
        w.key("name").string(check.name);
        w.key("value").float(check.value);
        w.key("expected").float(check.expected);
        w.key("pass").bool(check.pass);
        w.end_object();
    }
    w.end_array();
    w.key("checks").begin_object();
    w.key("pass").bool(report.all_pass);
    w.end_object();
    w.end_object();

    Ok(RunOutput {
        payload: w.finish(),
        report: None,
        checks_passed: report.all_pass,
    })
}
