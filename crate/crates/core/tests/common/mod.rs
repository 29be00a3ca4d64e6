//! Oracles shared by the integration tests. Nothing here calls the
//! propagators or the imaginary-time solver of the library.

#![allow(dead_code)]

use gauge_tdse::fields::FieldConfig;
use gauge_tdse::hamiltonian::{build_internal_potential, PointCharge};
use gauge_tdse::{GaugeForm, Grid, HamiltonianSpec, ParticleSpec, PotentialGrid, WaveFunction, C64};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// One electron bound to a +1 soft-Coulomb nucleus at the origin.
pub fn atom(grid: Grid) -> HamiltonianSpec {
    let ps = vec![ParticleSpec::electron()];
    let internal = build_internal_potential(&ps, grid, 1.0, &[PointCharge::new(1.0, 0.0)]).unwrap();
    HamiltonianSpec::new(GaugeForm::General, FieldConfig::zero(), internal, PotentialGrid::zero(grid), ps, 1.0).unwrap()
}

/// Grid `[-half, half]` with spacing `dx` (both ends are nodes).
pub fn symmetric_grid(half: f64, dx: f64) -> Grid {
    let n = (2.0 * half / dx).round() as usize + 1;
    Grid::new(n, dx, -half, 1).unwrap()
}

/// Lowest eigenvalue of a real symmetric tridiagonal matrix by Sturm-sequence bisection.
pub fn sturm_lowest(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    let radius = |i: usize| {
        let l = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let r = if i + 1 < n { off[i].abs() } else { 0.0 };
        l + r
    };
    let mut lo = (0..n).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    let below = |lambda: f64| -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..n {
            let b2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            d = diag[i] - lambda - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Tridiagonal matrix of `p²/2m + V(x) + F·q·(−x)` written out directly.
pub fn soft_coulomb_tridiagonal(grid: &Grid, static_field: f64) -> (Vec<f64>, Vec<f64>) {
    let dx = grid.dx();
    let diag = (0..grid.n_points())
        .map(|i| {
            let x = grid.coordinate(i);
            1.0 / (dx * dx) - 1.0 / (x * x + 1.0).sqrt() + static_field * x
        })
        .collect();
    let off = vec![-0.5 / (dx * dx); grid.n_points() - 1];
    (diag, off)
}

/// Dense matrix of the library operator at time `t`, column by column.
pub fn dense_hamiltonian(spec: &HamiltonianSpec, t: f64) -> DMatrix<C64> {
    let g = spec.grid();
    let n = g.config_len();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0, 0.0);
        let col = spec.apply(&WaveFunction::new(g, e, t).unwrap(), t).unwrap();
        for i in 0..n {
            m[(i, j)] = col.amplitudes[i];
        }
    }
    m
}

/// `exp(−iHt) ψ` through the eigendecomposition of the Hermitian `H`.
pub fn expm_propagate(h: &DMatrix<C64>, psi: &[C64], t: f64) -> Vec<C64> {
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let v = &eig.eigenvectors;
    let coeffs = v.adjoint() * DVector::from_column_slice(psi);
    let evolved = DVector::from_iterator(
        coeffs.len(),
        coeffs
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, e)| c * C64::from_polar(1.0, -e * t)),
    );
    (v * evolved).iter().copied().collect()
}

/// Lowest `k` eigenpairs of a real Hamiltonian (no vector potential), sorted.
pub fn lowest_states(spec: &HamiltonianSpec, k: usize) -> Vec<(f64, Vec<f64>)> {
    let h = dense_hamiltonian(spec, 0.0);
    let n = h.nrows();
    let real = DMatrix::<f64>::from_fn(n, n, |i, j| 0.5 * (h[(i, j)].re + h[(j, i)].re));
    let eig = SymmetricEigen::new(real);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].partial_cmp(&eig.eigenvalues[*b]).unwrap());
    let scale = 1.0 / spec.grid().dx().sqrt();
    order
        .into_iter()
        .take(k)
        .map(|i| {
            let v = eig.eigenvectors.column(i).iter().map(|x| x * scale).collect();
            (eig.eigenvalues[i], v)
        })
        .collect()
}

/// Five-point centred derivative of equally spaced samples at interior index `k`.
pub fn fd5(values: &[f64], k: usize, h: f64) -> f64 {
    (-values[k + 2] + 8.0 * values[k + 1] - 8.0 * values[k - 1] + values[k - 2]) / (12.0 * h)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// `‖a − b‖` with the grid volume element.
pub fn distance(a: &WaveFunction, b: &WaveFunction) -> f64 {
    a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
        * a.grid.volume_element().sqrt()
}
