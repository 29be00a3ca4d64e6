//! Discretization and state types shared by every other module.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Fixed unit convention: Hartree atomic units.
///
/// ħ = mₑ = e = 4πε₀ = 1. Only the speed of light carries a non-unit value; it
/// never enters the dipole-approximation Hamiltonians but is kept for
/// conversions.
#[derive(Debug, Clone, Copy, Default)]
pub struct Units;

impl Units {
    pub const HBAR: f64 = 1.0;
    pub const ELECTRON_MASS: f64 = 1.0;
    pub const ELEMENTARY_CHARGE: f64 = 1.0;
    pub const COULOMB_CONSTANT: f64 = 1.0;
    pub const SPEED_OF_LIGHT: f64 = 137.035999;
}

/// Uniform 1D lattice; two particles live on its tensor square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_points: usize,
    dx: f64,
    x_min: f64,
    n_particles: usize,
}

pub const MIN_POINTS: usize = 8;

impl Grid {
    pub fn new(n_points: usize, dx: f64, x_min: f64, n_particles: usize) -> Result<Self> {
        if !(1..=2).contains(&n_particles) {
            return Err(Error::InvalidGrid(format!(
                "n_particles must be 1 or 2, got {n_particles}"
            )));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidGrid(format!("dx must be positive, got {dx}")));
        }
        if n_points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_POINTS} points, got {n_points}"
            )));
        }
        if !x_min.is_finite() {
            return Err(Error::InvalidGrid("x_min must be finite".into()));
        }
        Ok(Self {
            n_points,
            dx,
            x_min,
            n_particles,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.coordinate(self.n_points - 1)
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    /// `n_points · dx`.
    pub fn extent(&self) -> f64 {
        self.n_points as f64 * self.dx
    }

    /// Number of configuration-space points, `n_points^n_particles`.
    pub fn config_len(&self) -> usize {
        self.n_points.pow(self.n_particles as u32)
    }

    /// Volume element `dx^n_particles`.
    pub fn volume_element(&self) -> f64 {
        self.dx.powi(self.n_particles as i32)
    }

    #[inline]
    pub fn coordinate(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.coordinate(i)).collect()
    }

    /// Index of the grid point closest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let f = ((x - self.x_min) / self.dx).round();
        if f <= 0.0 {
            0
        } else {
            (f as usize).min(self.n_points - 1)
        }
    }

    /// Stride of particle `l` in the flattened configuration index
    /// (particle 0 is the slow index).
    pub fn stride(&self, particle: usize) -> usize {
        self.n_points.pow((self.n_particles - 1 - particle) as u32)
    }

    /// Per-particle 1D indices of a flattened configuration index.
    pub fn unflatten(&self, k: usize) -> [usize; 2] {
        if self.n_particles == 1 {
            [k, 0]
        } else {
            [k / self.n_points, k % self.n_points]
        }
    }

    /// Same lattice, different particle count.
    pub fn with_particles(&self, n_particles: usize) -> Result<Self> {
        Self::new(self.n_points, self.dx, self.x_min, n_particles)
    }

    /// Width of the boundary band (on each side) monitored for contamination:
    /// the outermost 5% of the grid, split evenly between both ends.
    pub fn edge_width(&self) -> usize {
        ((self.n_points as f64 * 0.025).ceil() as usize).max(1)
    }

    pub fn is_edge(&self, i: usize) -> bool {
        let w = self.edge_width();
        i < w || i >= self.n_points - w
    }
}

/// Mass and signed charge of one particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleSpec {
    pub mass: f64,
    pub charge: f64,
}

impl ParticleSpec {
    pub fn new(mass: f64, charge: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidParticle(format!("mass must be positive, got {mass}")));
        }
        if !charge.is_finite() {
            return Err(Error::InvalidParticle("charge must be finite".into()));
        }
        Ok(Self { mass, charge })
    }

    pub fn electron() -> Self {
        Self {
            mass: Units::ELECTRON_MASS,
            charge: -Units::ELEMENTARY_CHARGE,
        }
    }
}

/// Amplitudes over the configuration grid at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub grid: Grid,
    pub amplitudes: Vec<C64>,
    pub time: f64,
}

impl WaveFunction {
    pub fn new(grid: Grid, amplitudes: Vec<C64>, time: f64) -> Result<Self> {
        if amplitudes.len() != grid.config_len() {
            return Err(Error::Mismatch(format!(
                "{} amplitudes for a configuration space of {} points",
                amplitudes.len(),
                grid.config_len()
            )));
        }
        Ok(Self {
            grid,
            amplitudes,
            time,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            amplitudes: vec![C64::new(0.0, 0.0); grid.config_len()],
            time: 0.0,
        }
    }

    /// Product of Gaussian packets `exp(-(x-x0)²/(4σ²) + i k0 x)`, one per
    /// particle, normalized.
    pub fn gaussian(grid: Grid, packets: &[(f64, f64, f64)]) -> Result<Self> {
        if packets.len() != grid.n_particles() {
            return Err(Error::Mismatch(format!(
                "{} packets for {} particles",
                packets.len(),
                grid.n_particles()
            )));
        }
        let factors: Vec<Vec<C64>> = packets
            .iter()
            .map(|&(x0, sigma, k0)| {
                (0..grid.n_points())
                    .map(|i| {
                        let x = grid.coordinate(i);
                        let u = (x - x0) / sigma;
                        C64::from_polar((-0.25 * u * u).exp(), k0 * x)
                    })
                    .collect()
            })
            .collect();
        let amplitudes = (0..grid.config_len())
            .map(|k| {
                let idx = grid.unflatten(k);
                factors
                    .iter()
                    .enumerate()
                    .fold(C64::new(1.0, 0.0), |acc, (l, f)| acc * f[idx[l]])
            })
            .collect();
        let mut psi = Self::new(grid, amplitudes, 0.0)?;
        psi.normalize()?;
        Ok(psi)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.volume_element()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescale to unit norm; fails on a zero (or non-finite) state.
    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateState(format!("cannot normalize state of norm {norm}")));
        }
        let s = 1.0 / norm;
        for z in &mut self.amplitudes {
            *z *= s;
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// ⟨self|other⟩ with the grid volume element.
    pub fn inner(&self, other: &WaveFunction) -> C64 {
        debug_assert_eq!(self.amplitudes.len(), other.amplitudes.len());
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            * self.grid.volume_element()
    }

    /// |⟨a|b⟩| / (‖a‖‖b‖).
    pub fn fidelity(&self, other: &WaveFunction) -> f64 {
        self.inner(other).norm() / (self.norm() * other.norm())
    }

    /// Fraction of the norm inside the monitored boundary band.
    pub fn edge_density(&self) -> f64 {
        let g = &self.grid;
        let total: f64 = self.amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let edge: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let idx = g.unflatten(*k);
                (0..g.n_particles()).any(|l| g.is_edge(idx[l]))
            })
            .map(|(_, z)| z.norm_sqr())
            .sum();
        edge / total
    }

    /// Probability density of particle `l`, summing over the partner with `dx` weight.
    pub fn marginal_density(&self, particle: usize) -> Vec<f64> {
        let g = &self.grid;
        let n = g.n_points();
        let mut out = vec![0.0; n];
        if g.n_particles() == 1 {
            for (o, z) in out.iter_mut().zip(&self.amplitudes) {
                *o = z.norm_sqr();
            }
        } else {
            for (k, z) in self.amplitudes.iter().enumerate() {
                out[g.unflatten(k)[particle]] += z.norm_sqr() * g.dx();
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &WaveFunction) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_coordinates() {
        let g = Grid::new(8, 0.5, -2.0, 1).unwrap();
        let xs = g.coordinates();
        assert_eq!(xs, vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5]);
        assert_eq!(g.extent(), 4.0);
    }

    #[test]
    fn two_particle_config_size() {
        let g = Grid::new(16, 0.25, -2.0, 2).unwrap();
        assert_eq!(g.config_len(), 256);
        assert_eq!(g.stride(0), 16);
        assert_eq!(g.stride(1), 1);
        assert_eq!(g.unflatten(37), [2, 5]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(4, 0.5, 0.0, 1).is_err());
        assert!(Grid::new(8, 0.0, 0.0, 1).is_err());
        assert!(Grid::new(8, -0.1, 0.0, 1).is_err());
        assert!(Grid::new(8, 0.1, 0.0, 3).is_err());
        assert!(Grid::new(8, 0.1, 0.0, 0).is_err());
    }

    #[test]
    fn coordinate_round_trip() {
        let g = Grid::new(1601, 0.05, -40.0, 1).unwrap();
        for i in 0..g.n_points() {
            assert_eq!(g.nearest_index(g.coordinate(i)), i);
        }
    }

    #[test]
    fn normalize_constant() {
        let g = Grid::new(8, 0.5, 0.0, 1).unwrap();
        let mut psi = WaveFunction::new(g, vec![C64::new(1.0, 0.0); 8], 0.0).unwrap();
        psi.normalize().unwrap();
        for z in &psi.amplitudes {
            assert!((z.re - 0.5).abs() < 1e-15 && z.im == 0.0);
        }
        let again = psi.clone().normalized().unwrap();
        assert!(psi.max_abs_diff(&again) < 1e-15);
    }

    #[test]
    fn normalize_zero_is_error() {
        let g = Grid::new(8, 0.5, 0.0, 1).unwrap();
        let mut psi = WaveFunction::zeros(g);
        assert!(matches!(psi.normalize(), Err(Error::DegenerateState(_))));
    }

    #[test]
    fn particle_validation() {
        assert!(ParticleSpec::new(0.0, 1.0).is_err());
        assert!(ParticleSpec::new(1.0, 0.0).is_ok());
        assert!(ParticleSpec::new(2.0, -3.5).is_ok());
    }

    #[test]
    fn wavefunction_length_checked() {
        let g = Grid::new(8, 0.5, 0.0, 2).unwrap();
        assert!(WaveFunction::new(g, vec![C64::new(0.0, 0.0); 8], 0.0).is_err());
    }
}
