//! Expectation values and densities extracted from a state.
//!
//! Currents are defined on grid links so that the lattice continuity equation
//! `dρ_j/dt + (J_{j+½} − J_{j−½})/dx = 0` holds exactly for the semi-discrete
//! dynamics, and the mechanical momentum is the sum of link currents so that
//! `m d⟨x⟩/dt = ⟨π⟩` holds exactly as well.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fields::FieldConfig;
use crate::grid::{Grid, ParticleSpec, WaveFunction};
use crate::hamiltonian::{GaugeForm, HamiltonianSpec};

/// Optional array outputs attached to a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observer {
    ChargeDensity,
    CurrentDensity,
    Polarization,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableRecord {
    pub time: f64,
    pub norm: f64,
    pub dipole: f64,
    pub position: Vec<f64>,
    pub mech_momentum: Vec<f64>,
    pub kinetic_energy: f64,
    /// ⟨H⟩ in the gauge of the run; not gauge invariant.
    pub total_energy_gauge_dependent: f64,
    /// Σ_ℓ (e_ℓ/m_ℓ)⟨F_ℓ⟩, the Ehrenfest second derivative of the dipole.
    pub dipole_acceleration: f64,
    pub edge_density: f64,
    pub charge_density: Option<Vec<f64>>,
    pub current_density: Option<Vec<f64>>,
    pub polarization: Option<Vec<f64>>,
}

/// `ρ(x) = Σ_ℓ e_ℓ n_ℓ(x)` with `n_ℓ` the marginal probability density.
pub fn charge_density(psi: &WaveFunction, particles: &[ParticleSpec]) -> Vec<f64> {
    let mut rho = vec![0.0; psi.grid.n_points()];
    for (l, p) in particles.iter().enumerate() {
        if p.charge == 0.0 {
            continue;
        }
        for (r, n) in rho.iter_mut().zip(psi.marginal_density(l)) {
            *r += p.charge * n;
        }
    }
    rho
}

fn link_phases(fields: &FieldConfig, grid: &Grid, charge: f64, t: f64) -> Option<Vec<C64>> {
    if fields.a_pot.is_zero() || charge == 0.0 {
        return None;
    }
    let theta = fields.a_pot.link_integrals(&grid.coordinates(), t);
    Some(theta.iter().map(|th| C64::from_polar(1.0, -charge * th)).collect())
}

/// `Σ_partner dx^{N−1} ψ*(…x_j…) U_j ψ(…x_{j+1}…)` for each link of particle `l`.
fn link_overlaps(psi: &WaveFunction, l: usize, phases: Option<&[C64]>) -> Vec<C64> {
    let g = &psi.grid;
    let n = g.n_points();
    let amps = &psi.amplitudes;
    let mut out = vec![C64::new(0.0, 0.0); n - 1];
    let u = |j: usize| phases.map_or(C64::new(1.0, 0.0), |p| p[j]);
    if g.n_particles() == 1 {
        for j in 0..n - 1 {
            out[j] = amps[j].conj() * u(j) * amps[j + 1];
        }
    } else {
        let stride = g.stride(l);
        let other = g.stride(1 - l);
        for j in 0..n - 1 {
            let mut s = C64::new(0.0, 0.0);
            for p in 0..n {
                let k = j * stride + p * other;
                s += amps[k].conj() * amps[k + stride];
            }
            out[j] = s * u(j) * g.dx();
        }
    }
    out
}

/// Probability current of particle `l` on the links `j → j+1`.
pub fn link_probability_current(
    psi: &WaveFunction,
    fields: &FieldConfig,
    particles: &[ParticleSpec],
    l: usize,
    t: f64,
) -> Vec<f64> {
    let p = particles[l];
    let phases = link_phases(fields, &psi.grid, p.charge, t);
    let scale = 1.0 / (p.mass * psi.grid.dx());
    link_overlaps(psi, l, phases.as_deref())
        .iter()
        .map(|z| z.im * scale)
        .collect()
}

/// Charge current `Σ_ℓ e_ℓ j_ℓ` on links.
pub fn link_current(
    psi: &WaveFunction,
    fields: &FieldConfig,
    particles: &[ParticleSpec],
    t: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; psi.grid.n_points() - 1];
    for (l, p) in particles.iter().enumerate() {
        if p.charge == 0.0 {
            continue;
        }
        for (o, j) in out.iter_mut().zip(link_probability_current(psi, fields, particles, l, t)) {
            *o += p.charge * j;
        }
    }
    out
}

fn links_to_nodes(links: &[f64]) -> Vec<f64> {
    let n = links.len() + 1;
    (0..n)
        .map(|i| {
            let left = if i > 0 { links[i - 1] } else { 0.0 };
            let right = if i + 1 < n { links[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentDensity {
    pub paramagnetic: Vec<f64>,
    pub diamagnetic: Vec<f64>,
    pub total: Vec<f64>,
}

/// Charge current density at grid nodes (average of the adjacent links),
/// split into the `Im(ψ*∂ψ)` part and the `−eA|ψ|²` part.
pub fn current_density(
    psi: &WaveFunction,
    fields: &FieldConfig,
    particles: &[ParticleSpec],
    t: f64,
) -> CurrentDensity {
    let total_links = link_current(psi, fields, particles, t);
    let para_links = link_current(psi, &FieldConfig::zero(), particles, t);
    let total = links_to_nodes(&total_links);
    let paramagnetic = links_to_nodes(&para_links);
    let diamagnetic = total.iter().zip(&paramagnetic).map(|(a, b)| a - b).collect();
    CurrentDensity {
        paramagnetic,
        diamagnetic,
        total,
    }
}

/// `⟨x_ℓ⟩` for each particle.
pub fn positions(psi: &WaveFunction) -> Vec<f64> {
    let g = psi.grid;
    (0..g.n_particles())
        .map(|l| {
            psi.marginal_density(l)
                .iter()
                .enumerate()
                .map(|(i, n)| g.coordinate(i) * n)
                .sum::<f64>()
                * g.dx()
        })
        .collect()
}

/// `⟨Σ_ℓ e_ℓ x̂_ℓ⟩`.
pub fn dipole(psi: &WaveFunction, particles: &[ParticleSpec]) -> f64 {
    positions(psi)
        .iter()
        .zip(particles)
        .map(|(x, p)| p.charge * x)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationProfile {
    pub values: Vec<f64>,
    /// `P(x_max)`; zero for a neutral density.
    pub boundary_value: f64,
    pub neutral: bool,
}

/// `P(x) = −∫_{x_min}^{x} ρ dx'` by the trapezoidal rule.
pub fn polarization_profile(grid: &Grid, rho: &[f64]) -> PolarizationProfile {
    let dx = grid.dx();
    let mut values = Vec::with_capacity(rho.len());
    let mut acc = 0.0;
    values.push(0.0);
    for w in rho.windows(2) {
        acc -= 0.5 * dx * (w[0] + w[1]);
        values.push(acc);
    }
    let scale: f64 = rho.iter().map(|r| r.abs()).sum::<f64>() * dx;
    let boundary_value = acc;
    PolarizationProfile {
        values,
        boundary_value,
        neutral: boundary_value.abs() <= 1e-8 * scale.max(1.0),
    }
}

/// `⟨−i∂_ℓ − e_ℓA(x̂_ℓ, t)⟩` per particle.
pub fn mechanical_momentum(
    psi: &WaveFunction,
    fields: &FieldConfig,
    particles: &[ParticleSpec],
    t: f64,
) -> Vec<f64> {
    (0..particles.len())
        .map(|l| {
            let phases = link_phases(fields, &psi.grid, particles[l].charge, t);
            link_overlaps(psi, l, phases.as_deref()).iter().map(|z| z.im).sum()
        })
        .collect()
}

/// Fields that enter the kinetic term of `spec` (the length form has no A).
pub fn coupling_fields(spec: &HamiltonianSpec) -> FieldConfig {
    match spec.form {
        GaugeForm::Length => FieldConfig::zero(),
        _ => spec.fields.clone(),
    }
}

/// `⟨ψ|H|ψ⟩`. Shifts by `−⟨Σ e_ℓ ∂_tχ⟩` under a gauge transformation.
pub fn energy_expectation(psi: &WaveFunction, spec: &HamiltonianSpec, t: f64) -> Result<f64> {
    let h = spec.apply(psi, t)?;
    Ok(psi.inner(&h).re)
}

/// `⟨Σ (p − eA)²/2m⟩`, gauge invariant.
pub fn kinetic_energy(psi: &WaveFunction, spec: &HamiltonianSpec, t: f64) -> Result<f64> {
    let h = spec.apply_kinetic(psi, t)?;
    Ok(psi.inner(&h).re)
}

/// `Σ_ℓ (e_ℓ/m_ℓ)⟨−∂_ℓU + e_ℓE(x_ℓ, t)⟩`.
pub fn dipole_acceleration(psi: &WaveFunction, spec: &HamiltonianSpec, t: f64) -> f64 {
    let g = psi.grid;
    let vol = g.volume_element();
    let xs = g.coordinates();
    let mut acc = 0.0;
    for (l, p) in spec.particles.iter().enumerate() {
        if p.charge == 0.0 {
            continue;
        }
        let grad_int = &spec.internal.gradients[l];
        let grad_ext = &spec.external.gradients[l];
        let force: f64 = psi
            .amplitudes
            .iter()
            .enumerate()
            .map(|(k, z)| -(grad_int[k] + grad_ext[k]) * z.norm_sqr())
            .sum::<f64>()
            * vol;
        let field: Vec<f64> = xs.iter().map(|&x| spec.electric_field(x, t)).collect();
        let push: f64 = psi
            .marginal_density(l)
            .iter()
            .zip(&field)
            .map(|(n, e)| n * e)
            .sum::<f64>()
            * g.dx();
        acc += p.charge / p.mass * (force + p.charge * push);
    }
    acc
}

/// All scalar observables plus the requested arrays.
pub fn record(
    psi: &WaveFunction,
    spec: &HamiltonianSpec,
    t: f64,
    observers: &[Observer],
) -> Result<ObservableRecord> {
    let fields = coupling_fields(spec);
    let particles = &spec.particles;
    let position = positions(psi);
    let dipole = position.iter().zip(particles).map(|(x, p)| p.charge * x).sum();
    let rho = observers
        .iter()
        .any(|o| matches!(o, Observer::ChargeDensity | Observer::Polarization))
        .then(|| charge_density(psi, particles));
    Ok(ObservableRecord {
        time: t,
        norm: psi.norm(),
        dipole,
        position,
        mech_momentum: mechanical_momentum(psi, &fields, particles, t),
        kinetic_energy: kinetic_energy(psi, spec, t)?,
        total_energy_gauge_dependent: energy_expectation(psi, spec, t)?,
        dipole_acceleration: dipole_acceleration(psi, spec, t),
        edge_density: psi.edge_density(),
        charge_density: if observers.contains(&Observer::ChargeDensity) {
            rho.clone()
        } else {
            None
        },
        current_density: observers
            .contains(&Observer::CurrentDensity)
            .then(|| current_density(psi, &fields, particles, t).total),
        polarization: if observers.contains(&Observer::Polarization) {
            rho.as_ref().map(|r| polarization_profile(&psi.grid, r).values)
        } else {
            None
        },
    })
}
