//! Scenario files: TOML schema, overrides and validation.
//!
//! Defaults that apply when a key is absent: `softening = 1.0`,
//! `plan.record_every = 1`, `plan.solver_tol = 1e-12`, `plan.max_iter = 2000`,
//! `plan.edge_guard = true`, `plan.edge_threshold = 1e-6`, the ground-state
//! initial condition, imaginary-time `dtau = 10`, `tol = 1e-13`,
//! `max_steps = 20000` and the tolerances of [`GaugeTolerances::default`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Value;

use crate::analysis::{GaugeTolerances, HarmonicOptions, KickGauge, ResponseOptions, Window};
use crate::dynamics::{ground_state_imaginary_time, ImaginaryTimeOptions, PropagationPlan};
use crate::error::{Error, Result};
use crate::fields::{Descriptor, Field, FieldConfig, GaugeFunction};
use crate::grid::{Grid, ParticleSpec, WaveFunction};
use crate::hamiltonian::{
    build_external_potential, build_internal_potential, harmonic_potential, GaugeForm, HamiltonianSpec, PointCharge,
};
use crate::observables::Observer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default = "default_softening")]
    pub softening: f64,
    pub grid: GridBlock,
    pub particles: Vec<ParticleBlock>,
    #[serde(default)]
    pub nuclei: Vec<PointCharge>,
    /// Charges treated as part of the internal system but held fixed.
    #[serde(default)]
    pub external_charges: Vec<PointCharge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonic_well: Option<HarmonicWell>,
    pub gauge: GaugeBlock,
    pub plan: PlanBlock,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default)]
    pub ground_state: GroundStateBlock,
    #[serde(default)]
    pub tolerances: GaugeTolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ResponseBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<HarmonicOptions>,
    #[serde(default)]
    pub outputs: OutputsBlock,
}

fn default_softening() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub n_points: usize,
    pub dx: f64,
    pub x_min: f64,
    pub n_particles: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleBlock {
    pub mass: f64,
    pub charge: f64,
}

/// `½ m ω² (x − center)²` on every particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicWell {
    pub omega: f64,
    #[serde(default)]
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeBlock {
    pub form: GaugeForm,
    #[serde(default)]
    pub phi: Descriptor,
    #[serde(default)]
    pub a: Descriptor,
    /// Homogeneous longitudinal field; in the length form this is the
    /// uniform field coupled to the dipole.
    #[serde(default, alias = "e")]
    pub e0: Descriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<Descriptor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanBlock {
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_true")]
    pub edge_guard: bool,
    #[serde(default = "default_edge_threshold")]
    pub edge_threshold: f64,
}

fn default_record_every() -> usize {
    1
}

fn default_solver_tol() -> f64 {
    crate::dynamics::DEFAULT_SOLVER_TOL
}

fn default_max_iter() -> usize {
    crate::dynamics::DEFAULT_MAX_ITER
}

fn default_true() -> bool {
    true
}

fn default_edge_threshold() -> f64 {
    crate::dynamics::EDGE_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Field-free ground state from imaginary-time relaxation.
    #[default]
    GroundState,
    /// Product of Gaussian packets, one per particle.
    Gaussian { packets: Vec<Packet> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Packet {
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub momentum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundStateBlock {
    pub dtau: f64,
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for GroundStateBlock {
    fn default() -> Self {
        let o = ImaginaryTimeOptions::default();
        Self {
            dtau: o.dtau,
            tol: o.tol,
            max_steps: o.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseBlock {
    pub kick_strength: f64,
    pub duration: f64,
    pub dt: f64,
    pub omega_max: f64,
    pub n_freq: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub window: Window,
    #[serde(default = "default_kick_gauge")]
    pub gauge: KickGauge,
    #[serde(default = "default_linearity_tol")]
    pub linearity_tol: f64,
}

fn default_kick_gauge() -> KickGauge {
    KickGauge::Length
}

fn default_linearity_tol() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsBlock {
    /// Observable time series; empty disables.
    pub observables: String,
    /// Per-record arrays written to `arrays/<observer>_<record>.csv`.
    pub arrays: Vec<Observer>,
    /// Final (or ground) state as CSV; empty disables.
    pub state: String,
    /// Spectrum for `response` and `harmonics`.
    pub spectrum: String,
    pub report: String,
}

impl Default for OutputsBlock {
    fn default() -> Self {
        Self {
            observables: "observables.csv".into(),
            arrays: Vec::new(),
            state: "state.csv".into(),
            spectrum: "spectrum.csv".into(),
            report: "report.json".into(),
        }
    }
}

/// A validated scenario with everything built that the subcommands need.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub grid: Grid,
    pub spec: HamiltonianSpec,
    pub plan: PropagationPlan,
    pub chi: Option<GaugeFunction>,
    /// SHA-256 of the canonical serialization.
    pub hash: String,
}

impl ScenarioFile {
    /// Parse TOML text, applying `key=value` overrides (dotted keys, TOML values;
    /// bare words are taken as strings).
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()));
        }
        let mut root: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Scenario(e.to_string()))?;
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Scenario(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(format!("cannot serialize scenario: {e}")))
    }

    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn build(self) -> Result<Scenario> {
        let g = self.grid;
        let grid = Grid::new(g.n_points, g.dx, g.x_min, g.n_particles)?;
        if self.particles.len() != g.n_particles {
            return Err(Error::Scenario(format!(
                "grid.n_particles = {} but {} particles are listed",
                g.n_particles,
                self.particles.len()
            )));
        }
        if !(self.softening > 0.0) {
            return Err(Error::Scenario(format!("softening must be positive, got {}", self.softening)));
        }
        let particles = self
            .particles
            .iter()
            .map(|p| ParticleSpec::new(p.mass, p.charge))
            .collect::<Result<Vec<_>>>()?;
        let gauge = &self.gauge;
        for (key, d) in [("phi", &gauge.phi), ("a", &gauge.a), ("e0", &gauge.e0)]
            .into_iter()
            .chain(gauge.chi.iter().map(|c| ("chi", c)))
        {
            d.validate().map_err(|e| Error::Scenario(format!("gauge.{key}: {e}")))?;
        }
        if !gauge.e0.is_uniform() {
            return Err(Error::Scenario("gauge.e0 must be spatially uniform".into()));
        }
        let mut internal = build_internal_potential(&particles, grid, self.softening, &self.nuclei)?;
        if let Some(w) = self.harmonic_well {
            internal.add(&harmonic_potential(&particles, grid, w.omega, w.center)?)?;
        }
        let external = build_external_potential(&self.external_charges, &particles, grid, self.softening)?;
        let fields = FieldConfig::new(gauge.phi.clone(), gauge.a.clone(), gauge.e0.clone());
        let spec = HamiltonianSpec::new(gauge.form, fields, internal, external, particles, self.softening)?;
        let p = self.plan;
        let mut plan = PropagationPlan::new(p.dt, p.n_steps, p.record_every)?;
        plan.solver_tol = p.solver_tol;
        plan.max_iter = p.max_iter;
        plan.edge_threshold = p.edge_guard.then_some(p.edge_threshold);
        plan.validate()?;
        if let InitialState::Gaussian { packets } = &self.initial {
            if packets.len() != g.n_particles {
                return Err(Error::Scenario(format!(
                    "initial: {} packets for {} particles",
                    packets.len(),
                    g.n_particles
                )));
            }
        }
        if let Some(r) = &self.response {
            r.window.validate()?;
        }
        if let Some(h) = &self.harmonics {
            h.window.validate()?;
        }
        let chi = gauge.chi.clone().map(GaugeFunction::new);
        let hash = self.hash()?;
        Ok(Scenario {
            file: self,
            grid,
            spec,
            plan,
            chi,
            hash,
        })
    }
}

fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Scenario(format!("override `{assignment}` is not key=value")))?;
    let (key, raw) = (key.trim(), raw.trim());
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Scenario(format!("override key `{key}` is malformed")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Scenario(format!("override key `{key}`: `{part}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Read, override and validate a scenario file.
pub fn parse_scenario(path: &Path, overrides: &[String]) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
    ScenarioFile::parse(&text, overrides)
        .map_err(|e| Error::Scenario(format!("{}: {}", path.display(), strip_prefix(&e))))?
        .build()
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Scenario(m) => m.clone(),
        other => other.to_string(),
    }
}

impl Scenario {
    pub fn ground_state_options(&self) -> ImaginaryTimeOptions {
        let g = self.file.ground_state;
        ImaginaryTimeOptions {
            dtau: g.dtau,
            tol: g.tol,
            max_steps: g.max_steps,
            initial: None,
        }
    }

    /// Ground state of the field-free Hamiltonian and its energy.
    pub fn ground_state(&self) -> Result<(WaveFunction, f64)> {
        ground_state_imaginary_time(&self.spec.bare(), &self.ground_state_options())
    }

    pub fn initial_state(&self) -> Result<WaveFunction> {
        match &self.file.initial {
            InitialState::GroundState => Ok(self.ground_state()?.0),
            InitialState::Gaussian { packets } => {
                let p: Vec<(f64, f64, f64)> = packets.iter().map(|p| (p.center, p.width, p.momentum)).collect();
                WaveFunction::gaussian(self.grid, &p)
            }
        }
    }

    pub fn response_options(&self) -> Result<ResponseOptions> {
        let r = self
            .file
            .response
            .as_ref()
            .ok_or_else(|| Error::Scenario("the response subcommand needs a [response] block".into()))?;
        let mut o = ResponseOptions::new(r.kick_strength, r.duration, r.dt, r.omega_max, r.n_freq);
        o.record_every = r.record_every;
        o.window = r.window;
        o.gauge = r.gauge;
        o.linearity_tol = Some(r.linearity_tol);
        Ok(o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "hydrogen"

[grid]
n_points = 401
dx = 0.1
x_min = -20.0
n_particles = 1

[[particles]]
mass = 1.0
charge = -1.0

[[nuclei]]
charge = 1.0
position = 0.0

[gauge]
form = "general"

[plan]
dt = 0.01
n_steps = 100
"#;

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = ScenarioFile::parse(MINIMAL, &[]).unwrap();
        assert_eq!(s.softening, 1.0);
        assert_eq!(s.plan.record_every, 1);
        assert_eq!(s.initial, InitialState::GroundState);
        let built = s.build().unwrap();
        assert_eq!(built.grid.n_points(), 401);
        assert_eq!(built.plan.edge_threshold, Some(1e-6));
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("[gauge]", "[gauge]\npolarisation = 1.0");
        let err = ScenarioFile::parse(&text, &[]).unwrap_err().to_string();
        assert!(err.contains("polarisation"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn coulomb_form_rejects_varying_a() {
        let text = MINIMAL.replace(
            "form = \"general\"",
            "form = \"coulomb\"\na = [{ space = { kind = \"sinusoid\", amplitude = 1.0, freq = 1.0 } }]",
        );
        let err = ScenarioFile::parse(&text, &[]).unwrap().build().unwrap_err();
        assert!(matches!(err, Error::GaugeForm(_)), "{err}");
        assert!(err.to_string().contains("uniform"));
    }

    #[test]
    fn round_trip() {
        let text = MINIMAL.replace(
            "form = \"general\"",
            r#"form = "general"
a = [{ time = { kind = "sin2_pulse", amplitude = 0.1, freq = 0.5, cycles = 4.0 } }]
chi = [{ space = { kind = "polynomial", coeffs = [0.0, 0.0, 0.1] }, time = { kind = "sinusoid", amplitude = 1.0, freq = 1.0 } }]"#,
        ) + "\n[harmonics]\nfundamental = 0.5\nmax_order = 7\n\n[outputs]\narrays = [\"charge_density\"]\n";
        let a = ScenarioFile::parse(&text, &[]).unwrap();
        let b = ScenarioFile::parse(&a.to_toml().unwrap(), &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn overrides_apply() {
        let s = ScenarioFile::parse(
            MINIMAL,
            &["plan.dt=0.005".into(), "gauge.form=length".into(), "name=other".into()],
        )
        .unwrap();
        assert_eq!(s.plan.dt, 0.005);
        assert_eq!(s.gauge.form, GaugeForm::Length);
        assert_eq!(s.name, "other");
        assert!(ScenarioFile::parse(MINIMAL, &["plan.typo=1".into()]).is_err());
        assert!(ScenarioFile::parse(MINIMAL, &["novalue".into()]).is_err());
    }

    #[test]
    fn particle_count_must_match() {
        let s = ScenarioFile::parse(&MINIMAL.replace("n_particles = 1", "n_particles = 2"), &[]).unwrap();
        assert!(s.build().is_err());
    }
}
