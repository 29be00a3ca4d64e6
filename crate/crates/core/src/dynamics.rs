//! Real- and imaginary-time propagation.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::WaveFunction;
use crate::hamiltonian::{HamiltonianSpec, Snapshot};
use crate::linalg::{cgnr, conjugate_gradient, solve_tridiagonal};
use crate::observables::{self, ObservableRecord, Observer};

pub const DEFAULT_SOLVER_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 2000;
pub const EDGE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationPlan {
    pub dt: f64,
    pub n_steps: usize,
    pub record_every: usize,
    pub solver_tol: f64,
    pub max_iter: usize,
    /// Abort when the outermost grid band holds more than this fraction of the norm.
    pub edge_threshold: Option<f64>,
}

impl PropagationPlan {
    pub fn new(dt: f64, n_steps: usize, record_every: usize) -> Result<Self> {
        let plan = Self {
            dt,
            n_steps,
            record_every,
            solver_tol: DEFAULT_SOLVER_TOL,
            max_iter: DEFAULT_MAX_ITER,
            edge_threshold: Some(EDGE_THRESHOLD),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Scenario(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(Error::Scenario("n_steps must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Scenario("record_every must be at least 1".into()));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol <= 1e-12) {
            return Err(Error::Scenario(format!(
                "solver_tol must lie in (0, 1e-12], got {}",
                self.solver_tol
            )));
        }
        Ok(())
    }

    pub fn without_edge_guard(mut self) -> Self {
        self.edge_threshold = None;
        self
    }

    pub fn final_time(&self, t0: f64) -> f64 {
        t0 + self.n_steps as f64 * self.dt
    }
}

/// Crank–Nicolson stepper bound to one Hamiltonian.
pub struct Propagator<'a> {
    spec: &'a HamiltonianSpec,
    tol: f64,
    max_iter: usize,
    cached: Option<Snapshot>,
}

impl<'a> Propagator<'a> {
    pub fn new(spec: &'a HamiltonianSpec, tol: f64, max_iter: usize) -> Self {
        let cached = spec.kinetic_is_static().then(|| spec.kinetic_snapshot(0.0));
        Self {
            spec,
            tol,
            max_iter,
            cached,
        }
    }

    fn snapshot(&self, t: f64) -> std::borrow::Cow<'_, Snapshot> {
        match &self.cached {
            Some(s) => std::borrow::Cow::Borrowed(s),
            None => std::borrow::Cow::Owned(self.spec.kinetic_snapshot(t)),
        }
    }

    /// Crank–Nicolson for the kinetic, link and static part at `t + dt/2`,
    /// between two exact half steps of the field-driven diagonal
    /// `Σ e φ − E·D`. The diagonal phases change under a gauge transformation
    /// exactly as the state does, so the step commutes with it.
    pub fn step(&self, psi: &WaveFunction, t: f64, dt: f64) -> Result<WaveFunction> {
        let mid = t + 0.5 * dt;
        let mut current = psi.amplitudes.clone();
        rotate(&mut current, self.spec.driving_phase(t, mid));
        let snap = self.snapshot(mid);
        let half = C64::new(0.0, 0.5 * dt);
        let one = C64::new(1.0, 0.0);
        let mut rhs = vec![C64::new(0.0, 0.0); current.len()];
        snap.apply_affine(one, -half, &current, &mut rhs);
        let mut next = solve_shifted(&snap, one, half, &rhs, self.tol, self.max_iter)?;
        rotate(&mut next, self.spec.driving_phase(mid, t + dt));
        WaveFunction::new(psi.grid, next, t + dt)
    }
}

fn rotate(amplitudes: &mut [C64], phase: Option<Vec<f64>>) {
    if let Some(phase) = phase {
        for (z, p) in amplitudes.iter_mut().zip(phase) {
            *z *= C64::from_polar(1.0, -p);
        }
    }
}

/// Solve `(a + b H) x = rhs` with `b` purely imaginary (unitary step) or real
/// and positive (diffusion step).
fn solve_shifted(
    snap: &Snapshot,
    a: C64,
    b: C64,
    rhs: &[C64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<C64>> {
    if snap.axes.len() == 1 {
        let (lower, diag, upper) = snap.tridiagonal(a, b);
        return solve_tridiagonal(&lower, &diag, &upper, rhs);
    }
    let mut x = rhs.to_vec();
    if b.re != 0.0 && b.im == 0.0 && a.im == 0.0 {
        conjugate_gradient(|v, out| snap.apply_affine(a, b, v, out), rhs, &mut x, tol, max_iter)?;
    } else {
        cgnr(
            |v, out| snap.apply_affine(a, b, v, out),
            |v, out| snap.apply_affine(a.conj(), b.conj(), v, out),
            rhs,
            &mut x,
            tol,
            max_iter,
        )?;
    }
    Ok(x)
}

/// One Crank–Nicolson step from `t` to `t + dt` (negative `dt` runs backwards).
pub fn step_crank_nicolson(psi: &WaveFunction, spec: &HamiltonianSpec, t: f64, dt: f64) -> Result<WaveFunction> {
    if psi.grid != spec.grid() {
        return Err(Error::Mismatch("state and Hamiltonian live on different grids".into()));
    }
    Propagator::new(spec, DEFAULT_SOLVER_TOL, DEFAULT_MAX_ITER).step(psi, t, dt)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<ObservableRecord>,
    pub final_state: WaveFunction,
}

/// Propagate for `plan.n_steps` steps starting at `psi0.time`, recording at
/// step 0 and every `record_every` steps (and at the last step). `on_record`
/// sees the state at every record.
pub fn evolve_with(
    psi0: &WaveFunction,
    spec: &HamiltonianSpec,
    plan: &PropagationPlan,
    observers: &[Observer],
    mut on_record: impl FnMut(&WaveFunction) -> Result<()>,
) -> Result<Trajectory> {
    plan.validate()?;
    if psi0.grid != spec.grid() {
        return Err(Error::Mismatch("state and Hamiltonian live on different grids".into()));
    }
    let prop = Propagator::new(spec, plan.solver_tol, plan.max_iter);
    let t0 = psi0.time;
    let mut psi = psi0.clone();
    let mut records = Vec::with_capacity(plan.n_steps / plan.record_every + 2);
    let guard = |psi: &WaveFunction| -> Result<()> {
        if let Some(threshold) = plan.edge_threshold {
            let edge = psi.edge_density();
            if edge > threshold {
                return Err(Error::BoundaryContamination {
                    time: psi.time,
                    edge_density: edge,
                    threshold,
                });
            }
        }
        Ok(())
    };
    guard(&psi)?;
    records.push(observables::record(&psi, spec, t0, observers)?);
    on_record(&psi)?;
    for n in 1..=plan.n_steps {
        let t = t0 + (n - 1) as f64 * plan.dt;
        psi = prop.step(&psi, t, plan.dt)?;
        // avoid accumulated rounding in the clock
        psi.time = t0 + n as f64 * plan.dt;
        guard(&psi)?;
        if n % plan.record_every == 0 || n == plan.n_steps {
            records.push(observables::record(&psi, spec, psi.time, observers)?);
            on_record(&psi)?;
        }
    }
    Ok(Trajectory {
        records,
        final_state: psi,
    })
}

pub fn evolve(
    psi0: &WaveFunction,
    spec: &HamiltonianSpec,
    plan: &PropagationPlan,
    observers: &[Observer],
) -> Result<Trajectory> {
    evolve_with(psi0, spec, plan, observers, |_| Ok(()))
}

/// Final state only, no observables.
pub fn propagate(psi0: &WaveFunction, spec: &HamiltonianSpec, dt: f64, n_steps: usize) -> Result<WaveFunction> {
    let prop = Propagator::new(spec, DEFAULT_SOLVER_TOL, DEFAULT_MAX_ITER);
    let t0 = psi0.time;
    let mut psi = psi0.clone();
    for n in 1..=n_steps {
        psi = prop.step(&psi, t0 + (n - 1) as f64 * dt, dt)?;
        psi.time = t0 + n as f64 * dt;
    }
    Ok(psi)
}

#[derive(Debug, Clone)]
pub struct ImaginaryTimeOptions {
    /// Backward-Euler step in imaginary time.
    pub dtau: f64,
    pub max_steps: usize,
    /// Stop when successive energies differ by less than this.
    pub tol: f64,
    /// Starting state; a unit Gaussian at the grid centre (per particle) if absent.
    pub initial: Option<WaveFunction>,
}

impl Default for ImaginaryTimeOptions {
    fn default() -> Self {
        Self {
            dtau: 10.0,
            max_steps: 20_000,
            tol: 1e-13,
            initial: None,
        }
    }
}

/// Relax to the ground state by `(1 + dτ(H − V_min)) ψ_{n+1} = ψ_n` with
/// renormalization, until the Rayleigh quotient settles.
pub fn ground_state_imaginary_time(
    spec: &HamiltonianSpec,
    options: &ImaginaryTimeOptions,
) -> Result<(WaveFunction, f64)> {
    if !spec.is_static() {
        return Err(Error::GaugeForm("imaginary-time relaxation needs a static Hamiltonian".into()));
    }
    if !(options.dtau > 0.0) {
        return Err(Error::Scenario(format!("dtau must be positive, got {}", options.dtau)));
    }
    let grid = spec.grid();
    let snap = spec.snapshot(0.0);
    let shift = snap.min_diagonal_potential();
    let a = C64::new(1.0 - options.dtau * shift, 0.0);
    let b = C64::new(options.dtau, 0.0);
    let mut psi = match &options.initial {
        Some(p) => p.clone().normalized()?,
        None => {
            let centre = grid.x_min() + 0.5 * (grid.n_points() - 1) as f64 * grid.dx();
            WaveFunction::gaussian(grid, &vec![(centre, 1.0, 0.0); grid.n_particles()])?
        }
    };
    psi.time = 0.0;
    let rayleigh = |psi: &WaveFunction| -> f64 {
        let mut h = vec![C64::new(0.0, 0.0); psi.amplitudes.len()];
        snap.apply(&psi.amplitudes, &mut h);
        crate::linalg::dot(&psi.amplitudes, &h).re * grid.volume_element()
    };
    let mut energy = rayleigh(&psi);
    let mut delta = f64::INFINITY;
    for _ in 0..options.max_steps {
        let next = solve_shifted(&snap, a, b, &psi.amplitudes, DEFAULT_SOLVER_TOL, DEFAULT_MAX_ITER)?;
        psi = WaveFunction::new(grid, next, 0.0)?.normalized()?;
        let e = rayleigh(&psi);
        delta = (e - energy).abs();
        energy = e;
        if delta < options.tol {
            return Ok((psi, energy));
        }
    }
    Err(Error::NotConverged {
        iterations: options.max_steps,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Descriptor, FieldConfig, Profile};
    use crate::grid::{Grid, ParticleSpec};
    use crate::hamiltonian::{build_internal_potential, harmonic_potential, GaugeForm, PointCharge, PotentialGrid};

    fn free(grid: Grid, ps: Vec<ParticleSpec>) -> HamiltonianSpec {
        HamiltonianSpec::new(
            GaugeForm::General,
            FieldConfig::zero(),
            PotentialGrid::zero(grid),
            PotentialGrid::zero(grid),
            ps,
            1.0,
        )
        .unwrap()
    }

    fn hydrogen(grid: Grid) -> HamiltonianSpec {
        let ps = vec![ParticleSpec::electron()];
        let internal = build_internal_potential(&ps, grid, 1.0, &[PointCharge::new(1.0, 0.0)]).unwrap();
        HamiltonianSpec::new(GaugeForm::General, FieldConfig::zero(), internal, PotentialGrid::zero(grid), ps, 1.0).unwrap()
    }

    #[test]
    fn plan_validation() {
        assert!(PropagationPlan::new(0.01, 10, 1).is_ok());
        assert!(PropagationPlan::new(0.0, 10, 1).is_err());
        assert!(PropagationPlan::new(0.01, 0, 1).is_err());
        assert!(PropagationPlan::new(0.01, 10, 0).is_err());
        let mut p = PropagationPlan::new(0.01, 10, 1).unwrap();
        p.solver_tol = 1e-8;
        assert!(p.validate().is_err());
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let g = Grid::new(32, 0.3, -4.8, 1).unwrap();
        let ps = vec![ParticleSpec::new(1e12, 0.0).unwrap()];
        // kinetic scale 1/(2m dx²) ≈ 0: H vanishes to rounding
        let spec = free(g, ps);
        let psi = WaveFunction::gaussian(g, &[(0.0, 1.0, 0.3)]).unwrap();
        let next = step_crank_nicolson(&psi, &spec, 0.0, 0.1).unwrap();
        assert!(next.max_abs_diff(&psi) < 1e-12);
    }

    #[test]
    fn free_packet_moves_ballistically() {
        let g = Grid::new(1201, 0.05, -30.0, 1).unwrap();
        let m = 1.0;
        let spec = free(g, vec![ParticleSpec::new(m, -1.0).unwrap()]);
        // slow, broad packet: lattice dispersion (k³dx²/6) stays below the tolerance
        let (x0, k0) = (-2.0, 0.2);
        let psi = WaveFunction::gaussian(g, &[(x0, 2.5, k0)]).unwrap();
        let plan = PropagationPlan::new(0.005, 1000, 100).unwrap();
        let traj = evolve(&psi, &spec, &plan, &[]).unwrap();
        for r in &traj.records {
            let expect = x0 + k0 / m * r.time;
            assert!((r.position[0] - expect).abs() < 1e-4, "{} vs {}", r.position[0], expect);
        }
    }

    #[test]
    fn free_packet_follows_lattice_velocity() {
        // on the lattice ⟨π⟩ is conserved and m d⟨x⟩/dt = ⟨π⟩ exactly
        let g = Grid::new(1201, 0.05, -30.0, 1).unwrap();
        let m = 1.5;
        let spec = free(g, vec![ParticleSpec::new(m, -1.0).unwrap()]);
        let psi = WaveFunction::gaussian(g, &[(-5.0, 1.0, 1.0)]).unwrap();
        let plan = PropagationPlan::new(0.001, 5000, 500).unwrap();
        let traj = evolve(&psi, &spec, &plan, &[]).unwrap();
        let (x0, p0) = (traj.records[0].position[0], traj.records[0].mech_momentum[0]);
        for r in &traj.records {
            assert!((r.mech_momentum[0] - p0).abs() < 1e-10);
            // CN slows each mode by 1/(1 + (ω dt/2)²)
            assert!((r.position[0] - (x0 + p0 / m * r.time)).abs() < 1e-6, "{} {}", r.position[0], x0 + p0 / m * r.time);
        }
    }

    #[test]
    fn eigenstate_keeps_phase() {
        let g = Grid::new(801, 0.05, -20.0, 1).unwrap();
        let spec = hydrogen(g);
        let (gs, e0) = ground_state_imaginary_time(&spec, &ImaginaryTimeOptions::default()).unwrap();
        let dt = 0.001;
        let n = 10_000;
        let out = propagate(&gs, &spec, dt, n).unwrap();
        let overlap = gs.inner(&out);
        assert!((overlap.norm() - 1.0).abs() < 1e-8);
        // CN phase is −2 atan(E dt/2) per step
        let t = dt * n as f64;
        let expected = C64::from_polar(1.0, -e0 * t);
        assert!((overlap - expected).norm() < 1e-6, "{overlap} vs {expected}");
    }

    #[test]
    fn unitarity_and_time_reversal() {
        let g = Grid::new(400, 0.1, -20.0, 1).unwrap();
        let spec = hydrogen(g)
            .with_fields(
                GaugeForm::General,
                FieldConfig::zero().with_phi(Descriptor::stationary(Profile::Polynomial { coeffs: vec![0.0, 0.01] })),
            )
            .unwrap();
        let psi = WaveFunction::gaussian(g, &[(1.0, 1.0, 0.5)]).unwrap();
        let fwd = propagate(&psi, &spec, 0.01, 500).unwrap();
        assert!((fwd.norm() - 1.0).abs() < 1e-12);
        let back = propagate(&fwd, &spec, -0.01, 500).unwrap();
        assert!(back.fidelity(&psi) >= 1.0 - 1e-9);
        assert!(back.max_abs_diff(&psi) < 1e-9);
    }

    #[test]
    fn record_count_and_determinism() {
        let g = Grid::new(800, 0.1, -40.0, 1).unwrap();
        let spec = hydrogen(g)
            .with_fields(
                GaugeForm::Coulomb,
                FieldConfig::zero().with_a(Descriptor::uniform(Profile::Sinusoid {
                    amplitude: 0.05,
                    freq: 0.3,
                    phase: 0.0,
                })),
            )
            .unwrap();
        let psi = WaveFunction::gaussian(g, &[(0.0, 1.0, 0.0)]).unwrap();
        let plan = PropagationPlan::new(0.01, 1000, 10).unwrap();
        let a = evolve(&psi, &spec, &plan, &[Observer::CurrentDensity]).unwrap();
        assert_eq!(a.records.len(), 101);
        assert_eq!(a.records[0].time, 0.0);
        let b = evolve(&psi, &spec, &plan, &[Observer::CurrentDensity]).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.final_state.amplitudes, b.final_state.amplitudes);
    }

    #[test]
    fn boundary_guard_trips() {
        let g = Grid::new(200, 0.1, -10.0, 1).unwrap();
        let spec = free(g, vec![ParticleSpec::electron()]);
        let psi = WaveFunction::gaussian(g, &[(0.0, 0.5, 3.0)]).unwrap();
        let plan = PropagationPlan::new(0.01, 500, 10).unwrap();
        let err = evolve(&psi, &spec, &plan, &[]).unwrap_err();
        assert_eq!(err.cause(), "boundary_contamination");
    }

    #[test]
    fn harmonic_ground_state() {
        let g = Grid::new(1601, 0.0125, -10.0, 1).unwrap();
        let ps = vec![ParticleSpec::electron()];
        let v = harmonic_potential(&ps, g, 1.0, 0.0).unwrap();
        let spec = HamiltonianSpec::new(GaugeForm::General, FieldConfig::zero(), v, PotentialGrid::zero(g), ps, 1.0).unwrap();
        let (_, e0) = ground_state_imaginary_time(&spec, &ImaginaryTimeOptions::default()).unwrap();
        assert!((e0 - 0.5).abs() < 1e-5, "{e0}");
    }

    #[test]
    fn separable_two_particle_ground_state() {
        let g1 = Grid::new(48, 0.25, -6.0, 1).unwrap();
        let g2 = g1.with_particles(2).unwrap();
        let e = ParticleSpec::electron();
        let nuc = [PointCharge::new(1.0, 0.0)];
        let one = HamiltonianSpec::new(
            GaugeForm::General,
            FieldConfig::zero(),
            build_internal_potential(&[e], g1, 1.0, &nuc).unwrap(),
            PotentialGrid::zero(g1),
            vec![e],
            1.0,
        )
        .unwrap();
        // non-interacting: neutral partner charge removes the pair term
        let ghost = ParticleSpec::new(1.0, 0.0).unwrap();
        let pot = crate::hamiltonian::PotentialGrid::one_body(g2, |_, x| (-1.0 / (x * x + 1.0).sqrt(), x / (x * x + 1.0).powf(1.5)));
        let two = HamiltonianSpec::new(GaugeForm::General, FieldConfig::zero(), pot, PotentialGrid::zero(g2), vec![e, ghost], 1.0).unwrap();
        let (_, e1) = ground_state_imaginary_time(&one, &ImaginaryTimeOptions::default()).unwrap();
        let (_, e2) = ground_state_imaginary_time(&two, &ImaginaryTimeOptions::default()).unwrap();
        assert!((e2 - 2.0 * e1).abs() < 1e-6, "{e2} vs {}", 2.0 * e1);
    }

    #[test]
    fn two_particle_step_is_unitary() {
        let g = Grid::new(40, 0.3, -6.0, 2).unwrap();
        let ps = vec![ParticleSpec::electron(); 2];
        let internal = build_internal_potential(&ps, g, 1.0, &[PointCharge::new(2.0, 0.0)]).unwrap();
        let spec = HamiltonianSpec::new(
            GaugeForm::Coulomb,
            FieldConfig::zero().with_a(Descriptor::uniform(Profile::Sinusoid { amplitude: 0.1, freq: 0.5, phase: 0.0 })),
            internal,
            PotentialGrid::zero(g),
            ps,
            1.0,
        )
        .unwrap();
        let psi = WaveFunction::gaussian(g, &[(-0.5, 1.0, 0.2), (0.7, 1.0, -0.1)]).unwrap();
        let out = propagate(&psi, &spec, 0.01, 50).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-10);
        let back = propagate(&out, &spec, -0.01, 50).unwrap();
        assert!(back.fidelity(&psi) > 1.0 - 1e-9);
    }

    #[test]
    fn step_commutes_with_time_dependent_gauge() {
        use crate::fields::{apply_gauge_to_fields, apply_gauge_to_state, GaugeFunction};
        let g = Grid::new(300, 0.1, -15.0, 1).unwrap();
        let drive = FieldConfig::zero().with_a(Descriptor::uniform(Profile::Sinusoid {
            amplitude: 0.2,
            freq: 0.6,
            phase: 0.0,
        }));
        let spec = hydrogen(g).with_fields(GaugeForm::General, drive.clone()).unwrap();
        let chi = GaugeFunction::new(Descriptor::single(
            Profile::Polynomial { coeffs: vec![0.0, 0.0, 0.2] },
            Profile::Sinusoid { amplitude: 1.0, freq: 1.3, phase: 0.4 },
        ));
        let moved = spec.with_fields(GaugeForm::General, apply_gauge_to_fields(&drive, &chi)).unwrap();
        let psi = WaveFunction::gaussian(g, &[(0.5, 1.0, 0.2)]).unwrap();
        let a = propagate(&psi, &spec, 0.05, 40).unwrap();
        let b = propagate(&apply_gauge_to_state(&psi, &chi, &spec.particles).unwrap(), &moved, 0.05, 40).unwrap();
        let back = apply_gauge_to_state(&b, &chi.negated(), &spec.particles).unwrap();
        let err = a.amplitudes.iter().zip(&back.amplitudes).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn length_form_is_second_order() {
        let g = Grid::new(200, 0.1, -10.0, 1).unwrap();
        let fields = FieldConfig::zero().with_e0(Descriptor::uniform(Profile::Sinusoid {
            amplitude: 0.3,
            freq: 0.8,
            phase: 0.1,
        }));
        let spec = hydrogen(g).with_fields(GaugeForm::Length, fields).unwrap();
        let psi = WaveFunction::gaussian(g, &[(0.0, 1.0, 0.0)]).unwrap();
        let reference = propagate(&psi, &spec, 0.0025, 800).unwrap();
        let err = |dt: f64, n: usize| {
            let out = propagate(&psi, &spec, dt, n).unwrap();
            out.amplitudes
                .iter()
                .zip(&reference.amplitudes)
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        let ratio = err(0.04, 50) / err(0.02, 100);
        assert!((3.6..4.4).contains(&ratio), "{ratio}");
    }
}
