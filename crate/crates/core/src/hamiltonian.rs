//! Matter Hamiltonian in a prescribed electromagnetic field.
//!
//! Kinetic energy uses the three-point lattice with the vector potential
//! entering as a phase on every link (`exp(−i e ∫A dx)` between neighbouring
//! nodes). For A = 0 this is the centred second difference; to first order in
//! `A·dx` it is the symmetrized coupling `−i(e/2m)(A∂ + ∂A)` plus the `e²A²/2m`
//! term. Because a gauge change shifts each link integral by exactly
//! `χ(x_{j+1}) − χ(x_j)`, the lattice operator is gauge covariant pointwise,
//! not only in the continuum limit.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{gauss_legendre4, FieldConfig};
use crate::grid::{Grid, ParticleSpec, WaveFunction};

/// Point charge `(charge, position)`, used for fixed nuclei and for external charges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointCharge {
    pub charge: f64,
    pub position: f64,
}

impl PointCharge {
    pub fn new(charge: f64, position: f64) -> Self {
        Self { charge, position }
    }
}

/// `q1·q2 / sqrt(d² + a²)`.
pub fn soft_coulomb_pair(q1: f64, q2: f64, d: f64, softening: f64) -> f64 {
    q1 * q2 / (d * d + softening * softening).sqrt()
}

/// `∂/∂d` of [`soft_coulomb_pair`].
pub fn soft_coulomb_pair_derivative(q1: f64, q2: f64, d: f64, softening: f64) -> f64 {
    let s = d * d + softening * softening;
    -q1 * q2 * d / (s * s.sqrt())
}

/// Static potential energy over configuration space, with its gradient along
/// each particle coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub gradients: Vec<Vec<f64>>,
}

impl PotentialGrid {
    pub fn zero(grid: Grid) -> Self {
        let len = grid.config_len();
        Self {
            grid,
            values: vec![0.0; len],
            gradients: vec![vec![0.0; len]; grid.n_particles()],
        }
    }

    /// Sum of one-body terms `f(l, x_l)` returning `(value, derivative)`.
    pub fn one_body(grid: Grid, f: impl Fn(usize, f64) -> (f64, f64)) -> Self {
        let mut pot = Self::zero(grid);
        let tables: Vec<Vec<(f64, f64)>> = (0..grid.n_particles())
            .map(|l| (0..grid.n_points()).map(|i| f(l, grid.coordinate(i))).collect())
            .collect();
        for k in 0..grid.config_len() {
            let idx = grid.unflatten(k);
            for (l, table) in tables.iter().enumerate() {
                let (v, d) = table[idx[l]];
                pot.values[k] += v;
                pot.gradients[l][k] += d;
            }
        }
        pot
    }

    pub fn add(&mut self, other: &PotentialGrid) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Mismatch("potentials on different grids".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        for (ga, gb) in self.gradients.iter_mut().zip(&other.gradients) {
            for (a, b) in ga.iter_mut().zip(gb) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

fn check_particles(particles: &[ParticleSpec], grid: &Grid) -> Result<()> {
    if particles.len() != grid.n_particles() {
        return Err(Error::Mismatch(format!(
            "{} particles on a {}-particle grid",
            particles.len(),
            grid.n_particles()
        )));
    }
    Ok(())
}

fn particle_charge_potential(
    particles: &[ParticleSpec],
    grid: Grid,
    softening: f64,
    charges: &[PointCharge],
) -> PotentialGrid {
    PotentialGrid::one_body(grid, |l, x| {
        let q = particles[l].charge;
        charges.iter().fold((0.0, 0.0), |(v, d), c| {
            let sep = x - c.position;
            (
                v + soft_coulomb_pair(q, c.charge, sep, softening),
                d + soft_coulomb_pair_derivative(q, c.charge, sep, softening),
            )
        })
    })
}

/// Softened Coulomb energy of the internal system: every particle–particle and
/// particle–nucleus pair once, no self-interaction. Like charges repel.
pub fn build_internal_potential(
    particles: &[ParticleSpec],
    grid: Grid,
    softening: f64,
    fixed_nuclei: &[PointCharge],
) -> Result<PotentialGrid> {
    check_particles(particles, &grid)?;
    if !(softening > 0.0) {
        return Err(Error::InvalidParticle(format!("softening must be positive, got {softening}")));
    }
    let mut pot = particle_charge_potential(particles, grid, softening, fixed_nuclei);
    if grid.n_particles() == 2 {
        let (q1, q2) = (particles[0].charge, particles[1].charge);
        for k in 0..grid.config_len() {
            let [i, j] = grid.unflatten(k);
            let sep = grid.coordinate(i) - grid.coordinate(j);
            pot.values[k] += soft_coulomb_pair(q1, q2, sep, softening);
            let d = soft_coulomb_pair_derivative(q1, q2, sep, softening);
            pot.gradients[0][k] += d;
            pot.gradients[1][k] -= d;
        }
    }
    Ok(pot)
}

/// Softened interaction of each internal particle with static external point charges.
pub fn build_external_potential(
    external: &[PointCharge],
    particles: &[ParticleSpec],
    grid: Grid,
    softening: f64,
) -> Result<PotentialGrid> {
    check_particles(particles, &grid)?;
    if !(softening > 0.0) {
        return Err(Error::InvalidParticle(format!("softening must be positive, got {softening}")));
    }
    Ok(particle_charge_potential(particles, grid, softening, external))
}

/// `Σ_ℓ ½ m_ℓ ω² (x_ℓ − center)²`, a model well used in place of the Coulomb terms.
pub fn harmonic_potential(
    particles: &[ParticleSpec],
    grid: Grid,
    omega: f64,
    center: f64,
) -> Result<PotentialGrid> {
    check_particles(particles, &grid)?;
    Ok(PotentialGrid::one_body(grid, |l, x| {
        let k = particles[l].mass * omega * omega;
        (0.5 * k * (x - center).powi(2), k * (x - center))
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeForm {
    /// Minimal coupling with arbitrary φ(x,t), A(x,t) and e0(t).
    General,
    /// Uniform A(t) (transverse, dipole approximation) and e0(t) coupled to the dipole.
    Coulomb,
    /// No vector potential; the uniform field `E(t) = e0(t) − dA/dt` couples to the dipole.
    Length,
}

impl GaugeForm {
    pub fn name(&self) -> &'static str {
        match self {
            GaugeForm::General => "general",
            GaugeForm::Coulomb => "coulomb",
            GaugeForm::Length => "length",
        }
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub form: GaugeForm,
    pub fields: FieldConfig,
    pub internal: PotentialGrid,
    pub external: PotentialGrid,
    pub particles: Vec<ParticleSpec>,
    pub softening: f64,
    static_part: Vec<f64>,
    dipole: Vec<f64>,
}

impl HamiltonianSpec {
    pub fn new(
        form: GaugeForm,
        fields: FieldConfig,
        internal: PotentialGrid,
        external: PotentialGrid,
        particles: Vec<ParticleSpec>,
        softening: f64,
    ) -> Result<Self> {
        let grid = internal.grid;
        check_particles(&particles, &grid)?;
        if external.grid != grid {
            return Err(Error::Mismatch("internal and external potentials on different grids".into()));
        }
        if !internal.is_finite() || !external.is_finite() {
            return Err(Error::InvalidParticle("potential is not finite".into()));
        }
        match form {
            GaugeForm::General => {}
            GaugeForm::Coulomb | GaugeForm::Length => {
                if !fields.a_pot.is_uniform() {
                    return Err(Error::GaugeForm(format!(
                        "{} form needs a spatially uniform vector potential; \
                         a spatially varying A has a longitudinal part, remove it with a gauge \
                         transformation or use the general form",
                        form.name()
                    )));
                }
                if !fields.phi.is_zero() {
                    return Err(Error::GaugeForm(format!(
                        "{} form carries no scalar potential; express a uniform field through e0",
                        form.name()
                    )));
                }
            }
        }
        let static_part = internal
            .values
            .iter()
            .zip(&external.values)
            .map(|(a, b)| a + b)
            .collect();
        let dipole = (0..grid.config_len())
            .map(|k| {
                let idx = grid.unflatten(k);
                particles
                    .iter()
                    .enumerate()
                    .map(|(l, p)| p.charge * grid.coordinate(idx[l]))
                    .sum()
            })
            .collect();
        Ok(Self {
            form,
            fields,
            internal,
            external,
            particles,
            softening,
            static_part,
            dipole,
        })
    }

    /// Same potentials and particles, different field/gauge form.
    pub fn with_fields(&self, form: GaugeForm, fields: FieldConfig) -> Result<Self> {
        Self::new(
            form,
            fields,
            self.internal.clone(),
            self.external.clone(),
            self.particles.clone(),
            self.softening,
        )
    }

    /// Bare many-body Hamiltonian (no fields), general form.
    pub fn bare(&self) -> Self {
        self.with_fields(GaugeForm::General, FieldConfig::zero())
            .expect("field-free spec is always valid")
    }

    pub fn grid(&self) -> Grid {
        self.internal.grid
    }

    /// `Σ_ℓ e_ℓ x_ℓ` over configuration space.
    pub fn dipole_operator(&self) -> &[f64] {
        &self.dipole
    }

    /// U_C + U_ie.
    pub fn static_potential(&self) -> &[f64] {
        &self.static_part
    }

    /// Uniform field coupled to the dipole in the Coulomb and length forms.
    pub fn uniform_field(&self, t: f64) -> f64 {
        match self.form {
            GaugeForm::General | GaugeForm::Coulomb => self.fields.e0_at(t),
            GaugeForm::Length => self.fields.e0_at(t) - self.fields.a_pot.partial(0.0, t, 0, 1),
        }
    }

    pub fn electric_field(&self, x: f64, t: f64) -> f64 {
        self.fields.electric_field(x, t)
    }

    /// True when nothing depends on time.
    pub fn is_static(&self) -> bool {
        self.fields.is_static()
    }

    /// True when the lattice operator without the driving potential is
    /// time independent.
    pub fn kinetic_is_static(&self) -> bool {
        self.form == GaugeForm::Length || self.fields.a_pot.is_static()
    }

    fn has_driving_potential(&self) -> bool {
        let scalar = self.form == GaugeForm::General && !self.fields.phi.is_zero();
        let uniform = !self.fields.e0.is_zero() || (self.form == GaugeForm::Length && !self.fields.a_pot.is_zero());
        scalar || uniform
    }

    /// `Σ_ℓ e_ℓ φ(x_ℓ, t) − E(t)·D` on configuration space: the part of the
    /// diagonal that comes from the fields.
    pub fn driving_potential(&self, t: f64) -> Vec<f64> {
        self.driving_sum(|xs| (self.sample_phi(xs, t), self.uniform_field(t)))
    }

    /// `∫_{t0}^{t1}` [`Self::driving_potential`] `dt` by four-point
    /// Gauss–Legendre; `None` when the fields add nothing to the diagonal.
    pub fn driving_phase(&self, t0: f64, t1: f64) -> Option<Vec<f64>> {
        if !self.has_driving_potential() {
            return None;
        }
        Some(self.driving_sum(|xs| {
            let mut phi = vec![0.0; xs.len()];
            let mut field = 0.0;
            for (t, w) in gauss_legendre4(t0, t1) {
                for (p, v) in phi.iter_mut().zip(self.sample_phi(xs, t)) {
                    *p += w * v;
                }
                field += w * self.uniform_field(t);
            }
            (phi, field)
        }))
    }

    fn sample_phi(&self, xs: &[f64], t: f64) -> Vec<f64> {
        if self.form == GaugeForm::General && !self.fields.phi.is_zero() {
            self.fields.phi.sample(xs, t, 0, 0)
        } else {
            vec![0.0; xs.len()]
        }
    }

    fn driving_sum(&self, parts: impl FnOnce(&[f64]) -> (Vec<f64>, f64)) -> Vec<f64> {
        let grid = self.grid();
        let (phi, field) = parts(&grid.coordinates());
        self.dipole
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let idx = grid.unflatten(k);
                let scalar: f64 = self.particles.iter().enumerate().map(|(l, p)| p.charge * phi[idx[l]]).sum();
                scalar - field * d
            })
            .collect()
    }

    /// [`Self::snapshot`] without the driving potential.
    pub fn kinetic_snapshot(&self, t: f64) -> Snapshot {
        self.build_snapshot(t, false)
    }

    /// The lattice operator at time `t`.
    pub fn snapshot(&self, t: f64) -> Snapshot {
        self.build_snapshot(t, true)
    }

    fn build_snapshot(&self, t: f64, driven: bool) -> Snapshot {
        let grid = self.grid();
        let xs = grid.coordinates();
        let dx = grid.dx();
        let link_integrals = match self.form {
            GaugeForm::Length => None,
            _ if self.fields.a_pot.is_zero() => None,
            _ => Some(self.fields.a_pot.link_integrals(&xs, t)),
        };
        let axes: Vec<Axis> = self
            .particles
            .iter()
            .map(|p| Axis {
                coupling: 1.0 / (2.0 * p.mass * dx * dx),
                links: match &link_integrals {
                    None => vec![C64::new(1.0, 0.0); xs.len() - 1],
                    Some(theta) => theta
                        .iter()
                        .map(|th| C64::from_polar(1.0, -p.charge * th))
                        .collect(),
                },
            })
            .collect();

        let kinetic_diag: f64 = axes.iter().map(|a| 2.0 * a.coupling).sum();
        let mut diagonal: Vec<f64> = self.static_part.iter().map(|v| kinetic_diag + v).collect();
        if driven && self.has_driving_potential() {
            for (d, u) in diagonal.iter_mut().zip(self.driving_potential(t)) {
                *d += u;
            }
        }
        Snapshot {
            grid,
            axes,
            diagonal,
        }
    }

    fn check_state(&self, psi: &WaveFunction) -> Result<()> {
        if psi.grid != self.grid() {
            return Err(Error::Mismatch("state and Hamiltonian live on different grids".into()));
        }
        Ok(())
    }

    /// `Hψ` at time `t` in whatever form this Hamiltonian carries.
    pub fn apply(&self, psi: &WaveFunction, t: f64) -> Result<WaveFunction> {
        self.check_state(psi)?;
        let snap = self.snapshot(t);
        let mut out = vec![C64::new(0.0, 0.0); psi.amplitudes.len()];
        snap.apply(&psi.amplitudes, &mut out);
        WaveFunction::new(psi.grid, out, t)
    }

    /// Kinetic part `Σ (p − eA)²/2m` alone (A omitted in the length form).
    pub fn apply_kinetic(&self, psi: &WaveFunction, t: f64) -> Result<WaveFunction> {
        self.check_state(psi)?;
        let mut snap = self.snapshot(t);
        let kin: f64 = snap.axes.iter().map(|a| 2.0 * a.coupling).sum();
        snap.diagonal.iter_mut().for_each(|d| *d = kin);
        let mut out = vec![C64::new(0.0, 0.0); psi.amplitudes.len()];
        snap.apply(&psi.amplitudes, &mut out);
        WaveFunction::new(psi.grid, out, t)
    }
}

fn require_form(spec: &HamiltonianSpec, form: GaugeForm) -> Result<()> {
    if spec.form != form {
        return Err(Error::GaugeForm(format!(
            "expected a {} spec, got {}",
            form.name(),
            spec.form.name()
        )));
    }
    Ok(())
}

/// `Σ_ℓ (p_ℓ − e_ℓA(x_ℓ,t))²/2m_ℓ + U_C + U_ie + Σ_ℓ e_ℓφ(x_ℓ,t) − e0(t)·D̂`.
pub fn apply_hamiltonian(psi: &WaveFunction, spec: &HamiltonianSpec, t: f64) -> Result<WaveFunction> {
    require_form(spec, GaugeForm::General)?;
    spec.apply(psi, t)
}

/// `Σ_ℓ (p_ℓ − e_ℓA(t))²/2m_ℓ + U_C + U_ie − e0(t)·D̂` with D̂ = Σ e_ℓ x_ℓ.
pub fn apply_hamiltonian_coulomb(
    psi: &WaveFunction,
    spec: &HamiltonianSpec,
    t: f64,
) -> Result<WaveFunction> {
    require_form(spec, GaugeForm::Coulomb)?;
    spec.apply(psi, t)
}

/// `Σ_ℓ p_ℓ²/2m_ℓ + U_C + U_ie − E(t)·D̂`.
pub fn apply_hamiltonian_length(
    psi: &WaveFunction,
    spec: &HamiltonianSpec,
    t: f64,
) -> Result<WaveFunction> {
    require_form(spec, GaugeForm::Length)?;
    spec.apply(psi, t)
}

/// Kinetic stencil along one particle coordinate.
#[derive(Debug, Clone)]
pub struct Axis {
    /// `1/(2 m dx²)`
    pub coupling: f64,
    /// Link phases; `H[j, j+1] = −coupling · links[j]`.
    pub links: Vec<C64>,
}

/// The Hamiltonian frozen at one instant: diagonal plus nearest-neighbour
/// hopping along each particle axis.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub grid: Grid,
    pub axes: Vec<Axis>,
    /// Full diagonal including the kinetic `2·coupling` terms.
    pub diagonal: Vec<f64>,
}

const PARALLEL_THRESHOLD: usize = 1 << 14;

impl Snapshot {
    /// `out = Hψ`.
    pub fn apply(&self, input: &[C64], out: &mut [C64]) {
        self.apply_affine(C64::new(0.0, 0.0), C64::new(1.0, 0.0), input, out);
    }

    /// `out = a·ψ + b·Hψ`.
    pub fn apply_affine(&self, a: C64, b: C64, input: &[C64], out: &mut [C64]) {
        let n = self.grid.n_points();
        match self.axes.len() {
            1 => {
                let ax = &self.axes[0];
                for j in 0..n {
                    let mut h = self.diagonal[j] * input[j];
                    if j + 1 < n {
                        h -= ax.coupling * ax.links[j] * input[j + 1];
                    }
                    if j > 0 {
                        h -= ax.coupling * ax.links[j - 1].conj() * input[j - 1];
                    }
                    out[j] = a * input[j] + b * h;
                }
            }
            _ => {
                let row = |i: usize, chunk: &mut [C64]| {
                    let (a0, a1) = (&self.axes[0], &self.axes[1]);
                    let base = i * n;
                    for j in 0..n {
                        let k = base + j;
                        let mut h = self.diagonal[k] * input[k];
                        if i + 1 < n {
                            h -= a0.coupling * a0.links[i] * input[k + n];
                        }
                        if i > 0 {
                            h -= a0.coupling * a0.links[i - 1].conj() * input[k - n];
                        }
                        if j + 1 < n {
                            h -= a1.coupling * a1.links[j] * input[k + 1];
                        }
                        if j > 0 {
                            h -= a1.coupling * a1.links[j - 1].conj() * input[k - 1];
                        }
                        chunk[j] = a * input[k] + b * h;
                    }
                };
                if out.len() >= PARALLEL_THRESHOLD {
                    out.par_chunks_mut(n).enumerate().for_each(|(i, c)| row(i, c));
                } else {
                    out.chunks_mut(n).enumerate().for_each(|(i, c)| row(i, c));
                }
            }
        }
    }

    /// Tridiagonal bands `(lower, diag, upper)` of `a·I + b·H` (one particle only).
    pub fn tridiagonal(&self, a: C64, b: C64) -> (Vec<C64>, Vec<C64>, Vec<C64>) {
        assert_eq!(self.axes.len(), 1, "tridiagonal form exists for one particle only");
        let ax = &self.axes[0];
        let diag = self.diagonal.iter().map(|d| a + b * d).collect();
        let upper = ax.links.iter().map(|l| -b * ax.coupling * l).collect();
        let lower = ax.links.iter().map(|l| -b * ax.coupling * l.conj()).collect();
        (lower, diag, upper)
    }

    pub fn min_diagonal_potential(&self) -> f64 {
        let kin: f64 = self.axes.iter().map(|a| 2.0 * a.coupling).sum();
        self.diagonal.iter().fold(f64::INFINITY, |m, d| m.min(d - kin))
    }
}
