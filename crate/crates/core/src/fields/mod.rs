//! Electromagnetic potentials, gauge functions and gauge transformations.

mod profile;

use std::fmt::Debug;
use std::sync::Arc;

use num_complex::Complex64 as C64;

pub use profile::{Descriptor, Profile, Term};

use crate::error::{Error, Result};
use crate::grid::{Grid, ParticleSpec, WaveFunction};

/// Scalar function of `(x, t)` with analytic partial derivatives.
pub trait Field: Debug + Send + Sync {
    /// `∂ₓ^nx ∂ₜ^nt f(x, t)`.
    fn partial(&self, x: f64, t: f64, nx: u32, nt: u32) -> f64;

    fn value(&self, x: f64, t: f64) -> f64 {
        self.partial(x, t, 0, 0)
    }

    /// Polynomial degree in `x` (`None` when not polynomial in `x`).
    fn x_degree(&self) -> Option<u32>;

    /// Polynomial degree in `t` (`None` when not polynomial in `t`).
    fn t_degree(&self) -> Option<u32>;

    fn is_zero(&self) -> bool {
        false
    }

    fn is_uniform(&self) -> bool {
        self.is_zero() || self.x_degree() == Some(0)
    }

    fn is_static(&self) -> bool {
        self.is_zero() || self.t_degree() == Some(0)
    }

    /// Uniform time-dependent part and remainder, when the field can tell.
    fn split_transverse(&self) -> Option<(Descriptor, Descriptor)> {
        None
    }

    fn sample(&self, xs: &[f64], t: f64, nx: u32, nt: u32) -> Vec<f64> {
        xs.iter().map(|&x| self.partial(x, t, nx, nt)).collect()
    }

    /// `∫_{xs[j]}^{xs[j+1]} f(x, t) dx` for consecutive nodes. Four-point
    /// Gauss–Legendre, exact for polynomials up to degree seven.
    fn link_integrals(&self, xs: &[f64], t: f64) -> Vec<f64> {
        if xs.len() < 2 {
            return Vec::new();
        }
        if self.is_zero() {
            return vec![0.0; xs.len() - 1];
        }
        if self.is_uniform() {
            let v = self.value(xs[0], t);
            return xs.windows(2).map(|w| v * (w[1] - w[0])).collect();
        }
        xs.windows(2)
            .map(|w| gauss_legendre4(w[0], w[1]).iter().map(|(x, wt)| wt * self.value(*x, t)).sum())
            .collect()
    }
}

pub type FieldRef = Arc<dyn Field>;

/// Nodes and weights of four-point Gauss–Legendre on `[a, b]`.
pub fn gauss_legendre4(a: f64, b: f64) -> [(f64, f64); 4] {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut out = [(0.0, 0.0); 4];
    for (o, (s, w)) in out.iter_mut().zip(GL4_NODES.iter().zip(GL4_WEIGHTS)) {
        *o = (mid + half * s, half * w);
    }
    out
}

const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_2,
    0.652_145_154_862_546_2,
    0.347_854_845_137_453_8,
];

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl Field for ZeroField {
    fn partial(&self, _: f64, _: f64, _: u32, _: u32) -> f64 {
        0.0
    }
    fn x_degree(&self) -> Option<u32> {
        Some(0)
    }
    fn t_degree(&self) -> Option<u32> {
        Some(0)
    }
    fn is_zero(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct SumField(pub Vec<FieldRef>);

impl Field for SumField {
    fn partial(&self, x: f64, t: f64, nx: u32, nt: u32) -> f64 {
        self.0.iter().map(|f| f.partial(x, t, nx, nt)).sum()
    }
    fn x_degree(&self) -> Option<u32> {
        self.0
            .iter()
            .filter(|f| !f.is_zero())
            .try_fold(0, |acc, f| f.x_degree().map(|d| acc.max(d)))
    }
    fn t_degree(&self) -> Option<u32> {
        self.0
            .iter()
            .filter(|f| !f.is_zero())
            .try_fold(0, |acc, f| f.t_degree().map(|d| acc.max(d)))
    }
    fn is_zero(&self) -> bool {
        self.0.iter().all(|f| f.is_zero())
    }
    fn sample(&self, xs: &[f64], t: f64, nx: u32, nt: u32) -> Vec<f64> {
        let mut out = vec![0.0; xs.len()];
        for f in &self.0 {
            if f.is_zero() {
                continue;
            }
            for (o, v) in out.iter_mut().zip(f.sample(xs, t, nx, nt)) {
                *o += v;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ScaledField {
    pub scale: f64,
    pub inner: FieldRef,
}

impl Field for ScaledField {
    fn partial(&self, x: f64, t: f64, nx: u32, nt: u32) -> f64 {
        self.scale * self.inner.partial(x, t, nx, nt)
    }
    fn x_degree(&self) -> Option<u32> {
        self.inner.x_degree()
    }
    fn t_degree(&self) -> Option<u32> {
        self.inner.t_degree()
    }
    fn is_zero(&self) -> bool {
        self.scale == 0.0 || self.inner.is_zero()
    }
    fn sample(&self, xs: &[f64], t: f64, nx: u32, nt: u32) -> Vec<f64> {
        let mut v = self.inner.sample(xs, t, nx, nt);
        v.iter_mut().for_each(|z| *z *= self.scale);
        v
    }
}

/// `∂ₓ^dx ∂ₜ^dt` of another field.
#[derive(Debug, Clone)]
pub struct DerivativeField {
    pub inner: FieldRef,
    pub dx: u32,
    pub dt: u32,
}

impl Field for DerivativeField {
    fn partial(&self, x: f64, t: f64, nx: u32, nt: u32) -> f64 {
        self.inner.partial(x, t, nx + self.dx, nt + self.dt)
    }
    fn x_degree(&self) -> Option<u32> {
        self.inner.x_degree().map(|d| d.saturating_sub(self.dx))
    }
    fn t_degree(&self) -> Option<u32> {
        self.inner.t_degree().map(|d| d.saturating_sub(self.dt))
    }
    fn is_zero(&self) -> bool {
        self.inner.is_zero()
            || self.inner.x_degree().is_some_and(|d| self.dx > d)
            || self.inner.t_degree().is_some_and(|d| self.dt > d)
    }
    fn sample(&self, xs: &[f64], t: f64, nx: u32, nt: u32) -> Vec<f64> {
        self.inner.sample(xs, t, nx + self.dx, nt + self.dt)
    }
}

/// Scalar potential φ(x,t), vector potential A(x,t) and the homogeneous
/// longitudinal field e0(t) (spatially constant).
#[derive(Debug, Clone)]
pub struct FieldConfig {
    pub phi: FieldRef,
    pub a_pot: FieldRef,
    pub e0: FieldRef,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self::zero()
    }
}

impl FieldConfig {
    pub fn zero() -> Self {
        Self {
            phi: Arc::new(ZeroField),
            a_pot: Arc::new(ZeroField),
            e0: Arc::new(ZeroField),
        }
    }

    pub fn new(phi: Descriptor, a_pot: Descriptor, e0: Descriptor) -> Self {
        Self {
            phi: Arc::new(phi),
            a_pot: Arc::new(a_pot),
            e0: Arc::new(e0),
        }
    }

    pub fn with_phi(mut self, phi: impl Field + 'static) -> Self {
        self.phi = Arc::new(phi);
        self
    }

    pub fn with_a(mut self, a_pot: impl Field + 'static) -> Self {
        self.a_pot = Arc::new(a_pot);
        self
    }

    pub fn with_e0(mut self, e0: impl Field + 'static) -> Self {
        self.e0 = Arc::new(e0);
        self
    }

    pub fn e0_at(&self, t: f64) -> f64 {
        self.e0.value(0.0, t)
    }

    pub fn is_static(&self) -> bool {
        self.phi.is_static() && self.a_pot.is_static() && self.e0.is_static()
    }

    /// `E = -∂A/∂t - ∂φ/∂x + e0(t)`.
    pub fn electric_field(&self, x: f64, t: f64) -> f64 {
        -self.a_pot.partial(x, t, 0, 1) - self.phi.partial(x, t, 1, 0) + self.e0_at(t)
    }
}

pub fn electric_field(fields: &FieldConfig, x: f64, t: f64) -> f64 {
    fields.electric_field(x, t)
}

/// Scalar gauge function χ(x,t).
#[derive(Debug, Clone)]
pub struct GaugeFunction {
    inner: FieldRef,
}

impl GaugeFunction {
    pub fn new(chi: impl Field + 'static) -> Self {
        Self {
            inner: Arc::new(chi),
        }
    }

    pub fn from_ref(inner: FieldRef) -> Self {
        Self { inner }
    }

    pub fn zero() -> Self {
        Self::new(ZeroField)
    }

    pub fn field(&self) -> &FieldRef {
        &self.inner
    }

    pub fn chi(&self, x: f64, t: f64) -> f64 {
        self.inner.partial(x, t, 0, 0)
    }

    pub fn grad_chi(&self, x: f64, t: f64) -> f64 {
        self.inner.partial(x, t, 1, 0)
    }

    pub fn dt_chi(&self, x: f64, t: f64) -> f64 {
        self.inner.partial(x, t, 0, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }

    /// `-χ`, the inverse transformation.
    pub fn negated(&self) -> Self {
        Self::new(ScaledField {
            scale: -1.0,
            inner: self.inner.clone(),
        })
    }

    /// `χ₁ + χ₂`, the composition of the two transformations.
    pub fn plus(&self, other: &GaugeFunction) -> Self {
        Self::new(SumField(vec![self.inner.clone(), other.inner.clone()]))
    }
}

/// `A' = A + ∂ₓχ`, `φ' = φ − ∂ₜχ`; e0 is gauge independent.
pub fn apply_gauge_to_fields(fields: &FieldConfig, chi: &GaugeFunction) -> FieldConfig {
    if chi.is_zero() {
        return fields.clone();
    }
    let grad: FieldRef = Arc::new(DerivativeField {
        inner: chi.inner.clone(),
        dx: 1,
        dt: 0,
    });
    let rate: FieldRef = Arc::new(ScaledField {
        scale: -1.0,
        inner: Arc::new(DerivativeField {
            inner: chi.inner.clone(),
            dx: 0,
            dt: 1,
        }),
    });
    FieldConfig {
        phi: Arc::new(SumField(vec![fields.phi.clone(), rate])),
        a_pot: Arc::new(SumField(vec![fields.a_pot.clone(), grad])),
        e0: fields.e0.clone(),
    }
}

/// Θ(x₁,…) = Σ_ℓ e_ℓ χ(x_ℓ, t) over the configuration grid (ħ = 1).
pub fn gauge_phase(
    chi: &GaugeFunction,
    particles: &[ParticleSpec],
    grid: &Grid,
    t: f64,
) -> Result<Vec<f64>> {
    if particles.len() != grid.n_particles() {
        return Err(Error::Mismatch(format!(
            "{} particles on a {}-particle grid",
            particles.len(),
            grid.n_particles()
        )));
    }
    let nodes = chi.inner.sample(&grid.coordinates(), t, 0, 0);
    let per_particle: Vec<Vec<f64>> = particles
        .iter()
        .map(|p| nodes.iter().map(|c| p.charge * c).collect())
        .collect();
    Ok((0..grid.config_len())
        .map(|k| {
            let idx = grid.unflatten(k);
            per_particle
                .iter()
                .enumerate()
                .map(|(l, v)| v[idx[l]])
                .sum()
        })
        .collect())
}

/// `ψ' = exp(iΘ(ψ.time)) ψ`.
pub fn apply_gauge_to_state(
    psi: &WaveFunction,
    chi: &GaugeFunction,
    particles: &[ParticleSpec],
) -> Result<WaveFunction> {
    if chi.is_zero() {
        return Ok(psi.clone());
    }
    let theta = gauge_phase(chi, particles, &psi.grid, psi.time)?;
    let amplitudes = psi
        .amplitudes
        .iter()
        .zip(&theta)
        .map(|(z, th)| z * C64::from_polar(1.0, *th))
        .collect();
    WaveFunction::new(psi.grid, amplitudes, psi.time)
}

/// χ(x,t) = −∫_{x_min}^{x} A_L(x',t) dx' by the trapezoidal rule on the grid
/// nodes (plus a partial trapezoid to reach an off-node `x`).
#[derive(Debug, Clone)]
pub struct CoulombGaugeChi {
    a_long: FieldRef,
    x_min: f64,
    dx: f64,
    n_points: usize,
}

impl CoulombGaugeChi {
    fn integrate(&self, x: f64, t: f64, nt: u32) -> f64 {
        let f = |u: f64| self.a_long.partial(u, t, 0, nt);
        let pos = (x - self.x_min) / self.dx;
        if pos <= 0.0 {
            return 0.5 * (f(self.x_min) + f(x)) * (x - self.x_min);
        }
        let k = (pos.floor() as usize).min(self.n_points - 1);
        let mut acc = 0.0;
        let mut prev = f(self.x_min);
        for j in 1..=k {
            let cur = f(self.x_min + j as f64 * self.dx);
            acc += 0.5 * (prev + cur) * self.dx;
            prev = cur;
        }
        let xk = self.x_min + k as f64 * self.dx;
        acc + 0.5 * (prev + f(x)) * (x - xk)
    }

    fn on_nodes(&self, xs: &[f64]) -> bool {
        xs.len() <= self.n_points
            && xs
                .iter()
                .enumerate()
                .all(|(i, &x)| (x - (self.x_min + i as f64 * self.dx)).abs() <= 1e-12 * (1.0 + x.abs()))
    }
}

impl Field for CoulombGaugeChi {
    fn partial(&self, x: f64, t: f64, nx: u32, nt: u32) -> f64 {
        if nx == 0 {
            -self.integrate(x, t, nt)
        } else {
            -self.a_long.partial(x, t, nx - 1, nt)
        }
    }

    fn x_degree(&self) -> Option<u32> {
        if self.a_long.is_zero() {
            Some(0)
        } else {
            None
        }
    }

    fn t_degree(&self) -> Option<u32> {
        self.a_long.t_degree()
    }

    fn is_zero(&self) -> bool {
        self.a_long.is_zero()
    }

    fn sample(&self, xs: &[f64], t: f64, nx: u32, nt: u32) -> Vec<f64> {
        if nx > 0 || !self.on_nodes(xs) {
            return xs.iter().map(|&x| self.partial(x, t, nx, nt)).collect();
        }
        let vals = self.a_long.sample(xs, t, 0, nt);
        let mut out = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        for (i, v) in vals.iter().enumerate() {
            if i > 0 {
                acc += 0.5 * (vals[i - 1] + v) * self.dx;
            }
            out.push(-acc);
        }
        out
    }
}

/// Removes the longitudinal (spatially varying or static-uniform) part of A.
///
/// Returns the transformed fields, whose vector potential is the uniform
/// time-dependent drive only, together with the χ that performs the change.
/// A vector potential that cannot be decomposed is treated as entirely
/// longitudinal.
pub fn to_coulomb_gauge(fields: &FieldConfig, grid: &Grid) -> (FieldConfig, GaugeFunction) {
    let (a_t, a_l): (FieldRef, FieldRef) = match fields.a_pot.split_transverse() {
        Some((t, l)) => (Arc::new(t), Arc::new(l)),
        None => (Arc::new(ZeroField), fields.a_pot.clone()),
    };
    if a_l.is_zero() {
        return (fields.clone(), GaugeFunction::zero());
    }
    let chi = GaugeFunction::new(CoulombGaugeChi {
        a_long: a_l,
        x_min: grid.x_min(),
        dx: grid.dx(),
        n_points: grid.n_points(),
    });
    let transformed = apply_gauge_to_fields(fields, &chi);
    (
        FieldConfig {
            phi: transformed.phi,
            a_pot: a_t,
            e0: fields.e0.clone(),
        },
        chi,
    )
}

/// Charge per unit length on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeDensityProfile {
    pub grid: Grid,
    pub rho: Vec<f64>,
}

impl ChargeDensityProfile {
    pub fn new(grid: Grid, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != grid.n_points() {
            return Err(Error::Mismatch(format!(
                "density of length {} on a grid of {} points",
                rho.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, rho })
    }

    /// Point charges deposited on their nearest node as `q/dx`.
    pub fn from_point_charges(grid: Grid, charges: &[(f64, f64)]) -> Self {
        let mut rho = vec![0.0; grid.n_points()];
        for &(q, x) in charges {
            rho[grid.nearest_index(x)] += q / grid.dx();
        }
        Self { grid, rho }
    }

    pub fn total_charge(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.grid.dx()
    }
}

/// Homogeneous and charge-induced parts of the 1D longitudinal field.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalField {
    pub homogeneous: f64,
    pub induced: Vec<f64>,
}

impl LongitudinalField {
    pub fn total(&self) -> Vec<f64> {
        self.induced.iter().map(|e| e + self.homogeneous).collect()
    }
}

/// 1D Gauss law `dE/dx = ρ`: `E(x) = e0 + ½ ∫ sign(x − x') ρ(x') dx'`.
pub fn longitudinal_field_1d(rho: &ChargeDensityProfile, e0: f64) -> LongitudinalField {
    let dx = rho.grid.dx();
    let total: f64 = rho.rho.iter().sum();
    let mut below = 0.0;
    let induced = rho
        .rho
        .iter()
        .map(|r| {
            let above = total - below - r;
            let e = 0.5 * dx * (below - above);
            below += r;
            e
        })
        .collect();
    LongitudinalField {
        homogeneous: e0,
        induced,
    }
}
