mod config;

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use cavqed::dynamics::{evolve, observables, observables_csv, transfer_initial_state, EvolveOptions, TransferResult};
use cavqed::gates::{
    berry_phase_analytic, dark_state_holonomy, dynamical_phase_gate_with, holonomic_phase_gate_with, SigmaFlip,
    DEFAULT_ADIABATICITY_THRESHOLD,
};
use cavqed::hilbert::{a_state, alpha_state, basis_state, computational_state, BasisLabel, StateSpace, StateVector};
use cavqed::model::{
    analytic_spectrum, numeric_spectrum, validity_check, DriveAmplitudes, EffectiveModel, SystemParams, TuningRule,
    DEFAULT_VALIDITY_THRESHOLD,
};
use cavqed::pulses::{LoopPath, PulseSchedule, RampLayout, RampShape};
use cavqed::sweeps::{
    find_optimum, linspace, run_sweep, sweep_csv, Objective, SweepGrid, FAST_MODE_DURATION, FULL_MODE_DURATION,
};
use cavqed::Complex64;

use config::{parse_number, Config};

#[derive(Parser)]
#[command(name = "cavqed", version, about = "Two-atom cavity QED gate simulator (rates in units of g)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adiabatic |11> -> |A> transfer: trajectory CSV and result JSON.
    Transfer(RunArgs),
    /// Grid of transfers over detuning and peak amplitude.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Worker threads (overrides sweep.workers).
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Two-qubit phase gates.
    #[command(subcommand)]
    Gate(GateCommand),
    /// Analytic vs numeric eigenvalues of the three-level effective model.
    Spectrum {
        #[arg(long, value_parser = number)]
        omega: f64,
        #[arg(long, value_parser = number, default_value = "0")]
        omega_im: f64,
        #[arg(long, value_parser = number)]
        omegabar: f64,
        #[arg(long, value_parser = number, default_value = "0")]
        omegabar_im: f64,
        #[arg(long, value_parser = number, default_value = "0")]
        delta: f64,
    },
    /// Check a schedule against the weak-drive validity condition.
    Validate(RunArgs),
}

#[derive(Subcommand)]
enum GateCommand {
    /// Dynamical conditional pi-phase gate.
    Phase(RunArgs),
    /// Holonomic gate from a closed loop in the (theta, phi) plane.
    Holonomy(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (key = value).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = number)]
    kappa: Option<f64>,
    #[arg(long, value_parser = number)]
    gamma: Option<f64>,
    #[arg(long, value_parser = number)]
    delta: Option<f64>,
    #[arg(long, value_parser = number)]
    dt: Option<f64>,
    /// Any config key, as key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn number(s: &str) -> std::result::Result<f64, String> {
    parse_number(s)
}

struct Run {
    cfg: Config,
    text: String,
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<Run> {
        let (mut cfg, text) = Config::load(&self.config)?;
        for (key, value) in [
            ("system.kappa", self.kappa),
            ("system.gamma", self.gamma),
            ("system.delta", self.delta),
            ("run.dt", self.dt),
        ] {
            if let Some(v) = value {
                cfg.set(&format!("{key}={v}"))?;
            }
        }
        for s in &self.set {
            cfg.set(s)?;
        }
        Ok(Run {
            cfg,
            text,
            out: self.out.clone(),
        })
    }
}

impl Run {
    fn out_dir(&self) -> Result<PathBuf> {
        let dir = match &self.out {
            Some(d) => d.clone(),
            None => PathBuf::from(self.cfg.str_or("output.dir", "out")),
        };
        std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(dir)
    }

    /// Verbatim config plus the resolved, re-runnable key set.
    fn write_sidecars(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("config.cfg"), self.text.as_bytes())?;
        write_atomic(&dir.join("resolved.cfg"), self.cfg.resolved().as_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("cannot move {} into place", path.display()))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn system_params(cfg: &Config) -> Result<SystemParams> {
    let d = SystemParams::default();
    let p = SystemParams {
        g: cfg.f64_or("system.g", d.g)?,
        kappa: cfg.f64_or("system.kappa", d.kappa)?,
        gamma: cfg.f64_or("system.gamma", d.gamma)?,
        delta: cfg.f64_or("system.delta", d.delta)?,
        n_max: cfg.usize_or("system.n_max", d.n_max)?,
    };
    p.validate().map_err(|e| anyhow!("system parameters: {e}"))?;
    Ok(p)
}

fn evolve_options(cfg: &Config) -> Result<EvolveOptions> {
    Ok(EvolveOptions {
        dt: cfg.f64_or("run.dt", cavqed::dynamics::DEFAULT_DT)?,
        sample_every: cfg.opt_usize("run.sample_every")?,
    })
}

/// `pulse.duration`, defaulting by `run.mode`.
fn duration(cfg: &Config) -> Result<f64> {
    let default = match cfg.choice("run.mode", "full", &["full", "fast"])?.as_str() {
        "fast" => FAST_MODE_DURATION,
        _ => FULL_MODE_DURATION,
    };
    cfg.f64_or("pulse.duration", default)
}

fn ramp_layout(cfg: &Config) -> Result<RampLayout> {
    let d = RampLayout::default();
    let rise = cfg.f64_or("pulse.rise", d.rise)?;
    let overlap = cfg.f64_or("pulse.overlap", d.overlap)?;
    RampLayout::new(rise, overlap).map_err(|e| cfg.invalid("pulse.rise", e))
}

fn loop_path(cfg: &Config) -> Result<LoopPath> {
    let rect = cfg.has("pulse.theta0") || cfg.has("pulse.phi0");
    match (cfg.opt_str("pulse.waypoints"), rect) {
        (Some(_), true) => bail!("give either pulse.waypoints or pulse.theta0/pulse.phi0, not both"),
        (Some(text), false) => {
            let pts = text
                .split(';')
                .map(|pair| {
                    let (t, p) = pair
                        .split_once(',')
                        .ok_or_else(|| cfg.invalid("pulse.waypoints", format!("'{pair}' is not theta,phi")))?;
                    let t = parse_number(t).map_err(|e| cfg.invalid("pulse.waypoints", e))?;
                    let p = parse_number(p).map_err(|e| cfg.invalid("pulse.waypoints", e))?;
                    Ok((t, p))
                })
                .collect::<Result<Vec<_>>>()?;
            LoopPath::new(pts).map_err(|e| cfg.invalid("pulse.waypoints", e))
        }
        (None, true) => Ok(LoopPath::rectangle(
            cfg.require_f64("pulse.theta0")?,
            cfg.require_f64("pulse.phi0")?,
        )),
        (None, false) => bail!("missing required key 'pulse.waypoints' (or pulse.theta0 and pulse.phi0)"),
    }
}

fn schedule(cfg: &Config) -> Result<PulseSchedule> {
    const SHAPES: [&str; 4] = ["stirap_linear", "stirap_sin2", "loop", "constant"];
    let shape = cfg.require_str("pulse.shape")?;
    if !SHAPES.contains(&shape.as_str()) {
        return Err(cfg.invalid("pulse.shape", format!("expected one of {}, found '{shape}'", SHAPES.join(" | "))));
    }
    let duration = duration(cfg)?;
    let sched = match shape.as_str() {
        "stirap_linear" | "stirap_sin2" => {
            let ramp = if shape == "stirap_linear" { RampShape::Linear } else { RampShape::SinSquared };
            PulseSchedule::stirap(
                cfg.require_f64("pulse.omega_max")?,
                cfg.require_f64("pulse.omegabar_max")?,
                duration,
                ramp_layout(cfg)?,
                ramp,
            )
            .map_err(|e| cfg.invalid("pulse.shape", e))?
        }
        "loop" => PulseSchedule::loop_path(loop_path(cfg)?, cfg.require_f64("pulse.peak")?, duration)
            .map_err(|e| cfg.invalid("pulse.peak", e))?,
        _ => {
            let drive = DriveAmplitudes::new(
                Complex64::new(cfg.require_f64("pulse.omega_re")?, cfg.f64_or("pulse.omega_im", 0.0)?),
                Complex64::new(cfg.require_f64("pulse.omegabar_re")?, cfg.f64_or("pulse.omegabar_im", 0.0)?),
            );
            if !(duration > 0.0 && duration.is_finite()) {
                return Err(cfg.invalid("pulse.duration", "must be positive"));
            }
            PulseSchedule::constant(drive, duration)
        }
    };
    let split = cfg.f64_or("pulse.split", 0.0)?;
    if !(-1.0..=1.0).contains(&split) {
        return Err(cfg.invalid("pulse.split", "must lie in [-1, 1]"));
    }
    let sched = sched.with_tuning(TuningRule { symmetric_fraction: split });
    Ok(if cfg.bool_or("pulse.reversed", false)? { sched.reversed() } else { sched })
}

fn target_state(space: StateSpace, name: &str) -> Result<StateVector> {
    Ok(match name {
        "A" => a_state(space),
        "alpha" => alpha_state(space),
        "00" => computational_state(space, false, false),
        "01" => computational_state(space, false, true),
        "10" => computational_state(space, true, false),
        "11" => computational_state(space, true, true),
        other => {
            let label: BasisLabel = other.parse().map_err(|e| anyhow!("transfer.target: {e}"))?;
            basis_state(space, label.atom1, label.atom2, label.photons)?
        }
    })
}

fn labels(cfg: &Config) -> Value {
    let mut m = serde_json::Map::new();
    for key in ["label.level0", "label.level1", "label.sigma", "label.level2"] {
        if let Some(v) = cfg.opt_str(key) {
            m.insert(key.trim_start_matches("label.").to_string(), Value::String(v));
        }
    }
    Value::Object(m)
}

fn cmd_transfer(args: &RunArgs) -> Result<()> {
    let run = args.load()?;
    let cfg = &run.cfg;
    let params = system_params(cfg)?;
    let sched = schedule(cfg)?;
    let opts = evolve_options(cfg)?;
    let target = target_state(params.space(), &cfg.str_or("transfer.target", "A"))?;
    let threshold = cfg.f64_or("validity.threshold", DEFAULT_VALIDITY_THRESHOLD)?;
    let labels = labels(cfg);
    let dir = run.out_dir()?;

    let traj = evolve(&params, &sched, &transfer_initial_state(params.space()), &opts)?;
    let result = TransferResult::from_trajectory(&traj, &target)?;
    let mut doc = serde_json::to_value(&result)?;
    doc["validity"] = serde_json::to_value(validity_check(&params, &sched, threshold))?;
    if labels.as_object().is_some_and(|m| !m.is_empty()) {
        doc["labels"] = labels;
    }

    write_atomic(&dir.join("trajectory.csv"), observables_csv(&observables(&traj)).as_bytes())?;
    write_json(&dir.join("transfer.json"), &doc)?;
    run.write_sidecars(&dir)?;
    println!("p0 = {}", result.p0);
    println!("fidelity = {}", result.fidelity);
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_sweep(args: &RunArgs, parallel: Option<usize>) -> Result<()> {
    let run = args.load()?;
    let cfg = &run.cfg;
    let params = system_params(cfg)?;
    let deltas = linspace(
        cfg.require_f64("sweep.delta_min")?,
        cfg.require_f64("sweep.delta_max")?,
        cfg.require_usize("sweep.delta_points")?,
    );
    let omegas = linspace(
        cfg.require_f64("sweep.omega_min")?,
        cfg.require_f64("sweep.omega_max")?,
        cfg.require_usize("sweep.omega_points")?,
    );
    let duration = duration(cfg)?;
    let ramp = match cfg.choice("pulse.shape", "stirap_linear", &["stirap_linear", "stirap_sin2"])?.as_str() {
        "stirap_sin2" => RampShape::SinSquared,
        _ => RampShape::Linear,
    };
    let mut grid = SweepGrid::new(deltas, omegas, params, duration);
    grid.layout = ramp_layout(cfg)?;
    grid.ramp = ramp;
    grid.omegabar_ratio = cfg.f64_or("sweep.omegabar_ratio", FRAC_1_SQRT_2)?;
    grid.dt = cfg.f64_or("run.dt", cavqed::dynamics::DEFAULT_DT)?;
    let workers = match parallel {
        Some(n) => n,
        None => cfg.usize_or("sweep.workers", 1)?,
    };
    let dir = run.out_dir()?;

    let result = run_sweep(&grid, workers)?;
    write_atomic(&dir.join("sweep.csv"), sweep_csv(&result).as_bytes())?;
    run.write_sidecars(&dir)?;
    let best_f = find_optimum(&result, Objective::Fidelity)?;
    let best_p = find_optimum(&result, Objective::SuccessProbability)?;
    write_json(&dir.join("optimum.json"), &json!({ "fidelity": best_f, "p0": best_p }))?;
    println!(
        "max fidelity {} at delta = {}, omega_max = {}",
        best_f.fidelity, best_f.delta, best_f.omega_max
    );
    println!("max p0 {} at delta = {}, omega_max = {}", best_p.p0, best_p.delta, best_p.omega_max);
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_gate_phase(args: &RunArgs) -> Result<()> {
    let run = args.load()?;
    let cfg = &run.cfg;
    let params = system_params(cfg)?;
    let half = schedule(cfg)?;
    let opts = evolve_options(cfg)?;
    let flip = match cfg.choice("gate.flip", "ideal", &["ideal", "pulse", "none"])?.as_str() {
        "pulse" => SigmaFlip::Pulse {
            rabi: cfg.require_f64("gate.flip_rabi")?,
        },
        "none" => SigmaFlip::Omitted,
        _ => SigmaFlip::Ideal,
    };
    let dir = run.out_dir()?;
    let result = dynamical_phase_gate_with(&params, &half, flip, &opts)?;
    write_json(&dir.join("gate.json"), &serde_json::to_value(&result)?)?;
    run.write_sidecars(&dir)?;
    print_gate_summary(&result);
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_gate_holonomy(args: &RunArgs) -> Result<()> {
    let run = args.load()?;
    let cfg = &run.cfg;
    let params = system_params(cfg)?;
    if cfg.str_or("pulse.shape", "loop") != "loop" {
        return Err(cfg.invalid("pulse.shape", "holonomy needs pulse.shape = loop"));
    }
    let path = loop_path(cfg)?;
    let peak = cfg.require_f64("pulse.peak")?;
    let duration = duration(cfg)?;
    let threshold = cfg.f64_or("gate.adiabaticity_threshold", DEFAULT_ADIABATICITY_THRESHOLD)?;
    let opts = evolve_options(cfg)?;
    let dir = run.out_dir()?;
    let result = holonomic_phase_gate_with(&params, &path, peak, duration, threshold, &opts)?;
    let mut doc = serde_json::to_value(&result)?;
    doc["solid_angle"] = json!(berry_phase_analytic(&path)?);
    doc["dark_state_holonomy"] = json!(dark_state_holonomy(&path)?);
    write_json(&dir.join("gate.json"), &doc)?;
    run.write_sidecars(&dir)?;
    print_gate_summary(&result);
    println!("wrote {}", dir.display());
    Ok(())
}

fn print_gate_summary(r: &cavqed::gates::GateResult) {
    println!("phase = {}", r.phase);
    println!("process fidelity = {}", r.process_fidelity);
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
}

fn cmd_spectrum(omega: Complex64, omegabar: Complex64, delta: f64) {
    let em = EffectiveModel::new(omega, omegabar, delta);
    let mut analytic = analytic_spectrum(&em);
    analytic.sort_by(f64::total_cmp);
    let numeric = numeric_spectrum(&em);
    println!("index,analytic,numeric,difference");
    for i in 0..3 {
        println!("{i},{},{},{:e}", analytic[i], numeric[i], (analytic[i] - numeric[i]).abs());
    }
}

fn cmd_validate(args: &RunArgs) -> Result<()> {
    let run = args.load()?;
    let cfg = &run.cfg;
    let params = system_params(cfg)?;
    let sched = schedule(cfg)?;
    let threshold = cfg.f64_or("validity.threshold", DEFAULT_VALIDITY_THRESHOLD)?;
    let report = validity_check(&params, &sched, threshold);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Transfer(a) => cmd_transfer(a),
        Command::Sweep { run, parallel } => cmd_sweep(run, *parallel),
        Command::Gate(GateCommand::Phase(a)) => cmd_gate_phase(a),
        Command::Gate(GateCommand::Holonomy(a)) => cmd_gate_holonomy(a),
        Command::Spectrum {
            omega,
            omega_im,
            omegabar,
            omegabar_im,
            delta,
        } => {
            cmd_spectrum(Complex64::new(*omega, *omega_im), Complex64::new(*omegabar, *omegabar_im), *delta);
            Ok(())
        }
        Command::Validate(a) => cmd_validate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
