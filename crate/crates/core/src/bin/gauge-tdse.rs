use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use gauge_tdse::analysis::{
    gauge_invariance_check, harmonic_spectrum, linear_susceptibility, velocity_length_check,
};
use gauge_tdse::dynamics::{evolve, ground_state_imaginary_time};
use gauge_tdse::observables::{dipole, Observer, ObservableRecord};
use gauge_tdse::output::{self, Provenance, Report};
use gauge_tdse::scenario::{parse_scenario, Scenario};
use gauge_tdse::{Error, Result};

#[derive(Parser)]
#[command(name = "gauge-tdse", version, about = "Time-dependent Schrödinger solver in arbitrary gauges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Field-free ground state by imaginary-time relaxation.
    GroundState(Common),
    /// Real-time propagation with observable output.
    Evolve(Common),
    /// Compare a run with its gauge-transformed twin (needs gauge.chi).
    GaugeCheck(Common),
    /// Compare the velocity-form drive with its length-form equivalent.
    VlCheck(Common),
    /// Linear susceptibility from a weak kick (needs [response]).
    Response(Common),
    /// Harmonic spectrum of the dipole acceleration (needs [harmonics]).
    Harmonics(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Replace a scenario value, e.g. `plan.dt=0.001`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

struct Outcome {
    pass: bool,
    cause: Option<String>,
    result: Value,
}

impl Outcome {
    fn passed(result: Value) -> Self {
        Self {
            pass: true,
            cause: None,
            result,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::GroundState(c) => ("ground-state", c),
        Command::Evolve(c) => ("evolve", c),
        Command::GaugeCheck(c) => ("gauge-check", c),
        Command::VlCheck(c) => ("vl-check", c),
        Command::Response(c) => ("response", c),
        Command::Harmonics(c) => ("harmonics", c),
    };
    let scenario = match parse_scenario(&common.config, &common.overrides) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            let report = json!({
                "subcommand": name,
                "pass": false,
                "cause": e.cause(),
                "message": e.to_string(),
            });
            let _ = output::write_json(&common.out.join("report.json"), &report);
            return ExitCode::from(2);
        }
    };
    let outcome = match name {
        "ground-state" => ground_state(&scenario, &common.out),
        "evolve" => run_evolve(&scenario, &common.out),
        "gauge-check" => gauge_check(&scenario),
        "vl-check" => vl_check(&scenario, &common.out),
        "response" => response(&scenario, &common.out),
        _ => harmonics(&scenario, &common.out),
    };
    let (outcome, message, code) = match outcome {
        Ok(o) => {
            let code = if o.pass { 0 } else { 1 };
            (o, None, code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = if e.is_numerical() { 3 } else { 2 };
            let o = Outcome {
                pass: false,
                cause: Some(e.cause().to_string()),
                result: Value::Null,
            };
            (o, Some(e.to_string()), code)
        }
    };
    let report = Report {
        subcommand: name.to_string(),
        scenario: scenario.file.name.clone(),
        pass: outcome.pass,
        cause: outcome.cause,
        message,
        result: outcome.result,
        provenance: Provenance {
            scenario_sha256: scenario.hash.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            parameters: serde_json::to_value(&scenario.file).unwrap_or(Value::Null),
        },
    };
    if let Err(e) = output::write_json(&common.out.join(&scenario.file.outputs.report), &report) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(2);
    }
    let status = if report.pass { "pass" } else { "FAIL" };
    println!("{name} {}: {status}", scenario.file.name);
    ExitCode::from(code)
}

fn to_value(v: &impl serde::Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn target(out: &Path, file: &str) -> Option<PathBuf> {
    (!file.is_empty()).then(|| out.join(file))
}

fn write_records(out: &Path, file: &str, s: &Scenario, records: &[ObservableRecord]) -> Result<()> {
    if let Some(path) = target(out, file) {
        output::observables_csv(&path, records)?;
    }
    for (r, rec) in records.iter().enumerate() {
        for obs in &s.file.outputs.arrays {
            let (tag, values) = match obs {
                Observer::ChargeDensity => ("charge_density", &rec.charge_density),
                Observer::CurrentDensity => ("current_density", &rec.current_density),
                Observer::Polarization => ("polarization", &rec.polarization),
            };
            if let Some(values) = values {
                output::array_csv(&out.join("arrays").join(format!("{tag}_{r:05}.csv")), &s.grid, values)?;
            }
        }
    }
    Ok(())
}

fn prefixed(prefix: &str, file: &str) -> String {
    if file.is_empty() {
        String::new()
    } else {
        format!("{prefix}_{file}")
    }
}

fn ground_state(s: &Scenario, out: &Path) -> Result<Outcome> {
    // static fields are kept, driven ones dropped
    let spec = if s.spec.is_static() { s.spec.clone() } else { s.spec.bare() };
    let (psi, energy) = ground_state_imaginary_time(&spec, &s.ground_state_options())?;
    if let Some(path) = target(out, &s.file.outputs.state) {
        output::state_csv(&path, &psi)?;
    }
    Ok(Outcome::passed(json!({
        "energy": energy,
        "dipole": dipole(&psi, &spec.particles),
        "fields_included": s.spec.is_static(),
    })))
}

fn run_evolve(s: &Scenario, out: &Path) -> Result<Outcome> {
    let psi0 = s.initial_state()?;
    let traj = evolve(&psi0, &s.spec, &s.plan, &s.file.outputs.arrays)?;
    write_records(out, &s.file.outputs.observables, s, &traj.records)?;
    if let Some(path) = target(out, &s.file.outputs.state) {
        output::state_csv(&path, &traj.final_state)?;
    }
    let drift = traj.records.iter().fold(0.0f64, |m, r| m.max((r.norm - 1.0).abs()));
    Ok(Outcome::passed(json!({
        "n_records": traj.records.len(),
        "final_time": traj.final_state.time,
        "max_norm_drift": drift,
    })))
}

fn gauge_check(s: &Scenario) -> Result<Outcome> {
    let chi = s
        .chi
        .as_ref()
        .ok_or_else(|| Error::Scenario("gauge-check needs gauge.chi".into()))?;
    let psi0 = s.initial_state()?;
    let report = gauge_invariance_check(&s.spec, &psi0, &s.plan, chi, "gauge.chi", s.file.tolerances)?;
    Ok(Outcome {
        pass: report.pass,
        cause: report.cause.clone(),
        result: to_value(&report),
    })
}

fn vl_check(s: &Scenario, out: &Path) -> Result<Outcome> {
    let psi0 = s.initial_state()?;
    let run = velocity_length_check(&s.spec.bare(), &s.spec.fields, &psi0, &s.plan, s.file.tolerances)?;
    let file = &s.file.outputs.observables;
    write_records(out, &prefixed("velocity", file), s, &run.velocity.records)?;
    write_records(out, &prefixed("length", file), s, &run.length.records)?;
    Ok(Outcome {
        pass: run.report.pass,
        cause: run.report.cause.clone(),
        result: to_value(&run.report),
    })
}

fn response(s: &Scenario, out: &Path) -> Result<Outcome> {
    let options = s.response_options()?;
    let bare = s.spec.bare();
    let (ground, energy) = ground_state_imaginary_time(&bare, &s.ground_state_options())?;
    let sus = linear_susceptibility(&bare, &ground, &options)?;
    if let Some(path) = target(out, &s.file.outputs.spectrum) {
        output::spectrum_csv(&path, &sus.spectrum)?;
    }
    Ok(Outcome::passed(json!({
        "ground_energy": energy,
        "static_polarizability": sus.static_polarizability(),
        "linearity": sus.linearity,
        "passivity_violation": sus.spectrum.passivity_violation(),
        "kick_strength": sus.spectrum.kick_strength,
        "kick_gauge": to_value(&options.gauge),
        "window": to_value(&sus.spectrum.window),
    })))
}

fn harmonics(s: &Scenario, out: &Path) -> Result<Outcome> {
    let options = s
        .file
        .harmonics
        .as_ref()
        .ok_or_else(|| Error::Scenario("the harmonics subcommand needs a [harmonics] block".into()))?;
    let psi0 = s.initial_state()?;
    let result = harmonic_spectrum(&s.spec, &psi0, &s.plan, options)?;
    write_records(out, &s.file.outputs.observables, s, &result.trajectory.records)?;
    if let Some(path) = target(out, &s.file.outputs.spectrum) {
        output::spectrum_csv(&path, &result.spectrum)?;
    }
    Ok(Outcome::passed(json!({
        "peaks": to_value(&result.peaks),
        "peak_field": result.spectrum.kick_strength,
        "window": to_value(&result.spectrum.window),
    })))
}
