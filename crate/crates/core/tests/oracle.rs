mod common;

use common::*;
use gauge_tdse::dynamics::{ground_state_imaginary_time, propagate, ImaginaryTimeOptions};
use gauge_tdse::fields::{Descriptor, FieldConfig, Profile};
use gauge_tdse::hamiltonian::{build_internal_potential, PointCharge};
use gauge_tdse::{GaugeForm, Grid, HamiltonianSpec, ParticleSpec, PotentialGrid, WaveFunction};

fn helium(grid: Grid, fields: FieldConfig) -> HamiltonianSpec {
    let ps = vec![ParticleSpec::electron(); 2];
    let internal = build_internal_potential(&ps, grid, 1.0, &[PointCharge::new(2.0, 0.0)]).unwrap();
    HamiltonianSpec::new(GaugeForm::General, fields, internal, PotentialGrid::zero(grid), ps, 1.0).unwrap()
}

#[test]
fn two_particle_propagation_matches_matrix_exponential() {
    let grid = Grid::new(14, 0.5, -3.25, 2).unwrap();
    let fields = FieldConfig::zero()
        .with_a(Descriptor::stationary(Profile::Polynomial { coeffs: vec![0.3, 0.1] }))
        .with_phi(Descriptor::stationary(Profile::Polynomial { coeffs: vec![0.0, 0.05] }));
    let spec = helium(grid, fields);
    let psi0 = WaveFunction::gaussian(grid, &[(-0.5, 0.8, 0.4), (0.7, 0.6, -0.2)]).unwrap();
    let h = dense_hamiltonian(&spec, 0.0);
    let exact = WaveFunction::new(grid, expm_propagate(&h, &psi0.amplitudes, 0.5), 0.5).unwrap();
    let cn = propagate(&psi0, &spec, 1e-3, 500).unwrap();
    assert!(1.0 - cn.fidelity(&exact) < 1e-8, "{}", 1.0 - cn.fidelity(&exact));
}

#[test]
fn imaginary_time_finds_lowest_eigenvalue() {
    let one = atom(Grid::new(120, 0.1, -5.95, 1).unwrap());
    let (_, e1) = ground_state_imaginary_time(&one, &ImaginaryTimeOptions::default()).unwrap();
    let oracle1 = lowest_states(&one, 1)[0].0;
    assert!((e1 - oracle1).abs() < 1e-10, "{e1} {oracle1}");

    let two = helium(Grid::new(20, 0.4, -3.8, 2).unwrap(), FieldConfig::zero());
    let (psi, e2) = ground_state_imaginary_time(&two, &ImaginaryTimeOptions::default()).unwrap();
    let oracle2 = lowest_states(&two, 1)[0].0;
    assert!((e2 - oracle2).abs() < 1e-9, "{e2} {oracle2}");
    // the spatial ground state of two identical particles is exchange symmetric
    let n = 20;
    for i in 0..n {
        for j in 0..n {
            assert!((psi.amplitudes[i * n + j] - psi.amplitudes[j * n + i]).norm() < 1e-8);
        }
    }
}

#[test]
fn sturm_oracle_agrees_with_dense_eigen() {
    let grid = symmetric_grid(6.0, 0.1);
    let (d, o) = soft_coulomb_tridiagonal(&grid, 0.0);
    let dense = lowest_states(&atom(grid), 1)[0].0;
    assert!((sturm_lowest(&d, &o) - dense).abs() < 1e-10);
}
