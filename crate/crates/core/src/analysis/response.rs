//! Linear susceptibility from an impulsive kick and harmonic spectra from
//! driven runs.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::spectrum::{frequency_grid, harmonic_peaks, windowed_transform, HarmonicPeak, ResponseSpectrum, Window};
use crate::dynamics::{evolve, PropagationPlan, Trajectory};
use crate::error::{Error, Result};
use crate::fields::{Descriptor, FieldConfig, Profile};
use crate::grid::WaveFunction;
use crate::hamiltonian::{GaugeForm, HamiltonianSpec};
use crate::observables::dipole;

/// How the impulse `E(t) = κ δ(t − t0)` enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KickGauge {
    /// Phase `exp(i κ D̂)` on the state.
    Length,
    /// Vector potential stepping from 0 to `−κ` at `t0`; the state is untouched.
    Velocity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseOptions {
    pub kick_strength: f64,
    pub duration: f64,
    pub dt: f64,
    pub record_every: usize,
    pub window: Window,
    pub frequencies: Vec<f64>,
    pub gauge: KickGauge,
    /// Rerun with half the kick and require the spectra to agree this well.
    pub linearity_tol: Option<f64>,
}

impl ResponseOptions {
    pub fn new(kick_strength: f64, duration: f64, dt: f64, omega_max: f64, n_freq: usize) -> Self {
        Self {
            kick_strength,
            duration,
            dt,
            record_every: 1,
            window: Window::default(),
            frequencies: frequency_grid(0.0, omega_max, n_freq),
            gauge: KickGauge::Length,
            linearity_tol: Some(0.01),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Susceptibility {
    pub spectrum: ResponseSpectrum,
    /// Relative spectrum change when the kick is halved.
    pub linearity: Option<f64>,
    pub times: Vec<f64>,
    /// `d(t) − d(t0)`.
    pub dipole_response: Vec<f64>,
}

impl Susceptibility {
    /// `α(0)` (real part at the lowest frequency, which must be zero).
    pub fn static_polarizability(&self) -> Option<f64> {
        match self.spectrum.frequencies.first() {
            Some(w) if *w == 0.0 => Some(self.spectrum.values[0].re),
            _ => None,
        }
    }
}

/// Dipole response `d(t) − d(t0)` after a kick of strength `kick` applied to
/// `ground` at `ground.time`.
pub fn kicked_dipole(
    bare: &HamiltonianSpec,
    ground: &WaveFunction,
    kick: f64,
    plan: &PropagationPlan,
    gauge: KickGauge,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d0 = dipole(ground, &bare.particles);
    if kick == 0.0 {
        let times = (0..=plan.n_steps)
            .filter(|n| n % plan.record_every == 0 || *n == plan.n_steps)
            .map(|n| ground.time + n as f64 * plan.dt)
            .collect::<Vec<_>>();
        let zeros = vec![0.0; times.len()];
        return Ok((times, zeros));
    }
    let traj = match gauge {
        KickGauge::Length => {
            let spec = bare.with_fields(GaugeForm::Length, FieldConfig::zero())?;
            let d = spec.dipole_operator();
            let amplitudes = ground
                .amplitudes
                .iter()
                .zip(d)
                .map(|(z, x)| z * C64::from_polar(1.0, kick * x))
                .collect();
            let kicked = WaveFunction::new(ground.grid, amplitudes, ground.time)?;
            evolve(&kicked, &spec, plan, &[])?
        }
        KickGauge::Velocity => {
            let fields = FieldConfig::zero().with_a(Descriptor::uniform(Profile::Constant { value: -kick }));
            let spec = bare.with_fields(GaugeForm::Coulomb, fields)?;
            evolve(ground, &spec, plan, &[])?
        }
    };
    Ok(split_dipole(&traj, d0))
}

fn split_dipole(traj: &Trajectory, d0: f64) -> (Vec<f64>, Vec<f64>) {
    traj.records.iter().map(|r| (r.time, r.dipole - d0)).unzip()
}

/// `α(ω) = (1/κ) ∫ δd(t) w(t) e^{iωt} dt` over `[t0, t0 + duration]`.
pub fn linear_susceptibility(bare: &HamiltonianSpec, ground: &WaveFunction, options: &ResponseOptions) -> Result<Susceptibility> {
    if !bare.is_static() {
        return Err(Error::GaugeForm("linear response is taken around a field-free Hamiltonian".into()));
    }
    options.window.validate()?;
    let n_steps = (options.duration / options.dt).round() as usize;
    let plan = PropagationPlan::new(options.dt, n_steps, options.record_every)?;
    let kick = options.kick_strength;
    let spectrum_of = |times: &[f64], response: &[f64], k: f64| -> ResponseSpectrum {
        let values = if k == 0.0 {
            vec![C64::new(0.0, 0.0); options.frequencies.len()]
        } else {
            windowed_transform(times, response, options.window, &options.frequencies)
                .into_iter()
                .map(|z| z / k)
                .collect()
        };
        ResponseSpectrum {
            frequencies: options.frequencies.clone(),
            values,
            kick_strength: k,
            window: options.window,
        }
    };
    let check = options.linearity_tol.filter(|_| kick != 0.0);
    let (full, half) = rayon::join(
        || kicked_dipole(bare, ground, kick, &plan, options.gauge),
        || check.map(|_| kicked_dipole(bare, ground, 0.5 * kick, &plan, options.gauge)),
    );
    let (times, response) = full?;
    let spectrum = spectrum_of(&times, &response, kick);
    let mut linearity = None;
    if let (Some(tol), Some(half)) = (check, half) {
        let (t_half, r_half) = half?;
        let ratio = spectrum.relative_difference(&spectrum_of(&t_half, &r_half, 0.5 * kick))?;
        if ratio > tol {
            return Err(Error::Nonlinear { ratio, tolerance: tol });
        }
        linearity = Some(ratio);
    }
    Ok(Susceptibility {
        spectrum,
        linearity,
        times,
        dipole_response: response,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicOptions {
    pub fundamental: f64,
    pub max_order: usize,
    #[serde(default = "default_hhg_window")]
    pub window: Window,
    /// Frequency samples per fundamental.
    #[serde(default = "default_samples")]
    pub samples_per_order: usize,
    /// Half-width of the search interval around each harmonic, in units of the fundamental.
    #[serde(default = "default_peak_width")]
    pub peak_width: f64,
}

fn default_hhg_window() -> Window {
    Window::Hann
}

fn default_samples() -> usize {
    64
}

fn default_peak_width() -> f64 {
    0.25
}

impl HarmonicOptions {
    pub fn new(fundamental: f64, max_order: usize) -> Self {
        Self {
            fundamental,
            max_order,
            window: default_hhg_window(),
            samples_per_order: default_samples(),
            peak_width: default_peak_width(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HarmonicResult {
    /// Windowed transform of the dipole acceleration; `kick_strength` holds
    /// the largest |E| seen at the records.
    pub spectrum: ResponseSpectrum,
    pub peaks: Vec<HarmonicPeak>,
    pub trajectory: Trajectory,
}

/// Spectrum of the Ehrenfest dipole acceleration along a driven run.
pub fn harmonic_spectrum(
    spec: &HamiltonianSpec,
    psi0: &WaveFunction,
    plan: &PropagationPlan,
    options: &HarmonicOptions,
) -> Result<HarmonicResult> {
    options.window.validate()?;
    if !(options.fundamental > 0.0) || options.max_order == 0 {
        return Err(Error::Scenario("harmonic analysis needs a positive fundamental and max_order ≥ 1".into()));
    }
    let trajectory = evolve(psi0, spec, plan, &[])?;
    let (times, accel): (Vec<f64>, Vec<f64>) = trajectory
        .records
        .iter()
        .map(|r| (r.time, r.dipole_acceleration))
        .unzip();
    let top = (options.max_order as f64 + 0.5) * options.fundamental;
    let n_freq = (options.max_order as f64 + 0.5) as usize * options.samples_per_order + 1;
    let frequencies = frequency_grid(0.0, top, n_freq);
    let values = windowed_transform(&times, &accel, options.window, &frequencies);
    let peak_field = times
        .iter()
        .map(|&t| spec.electric_field(0.0, t).abs())
        .fold(0.0, f64::max);
    let spectrum = ResponseSpectrum {
        frequencies,
        values,
        kick_strength: peak_field,
        window: options.window,
    };
    let peaks = harmonic_peaks(&spectrum, options.fundamental, options.max_order, options.peak_width);
    Ok(HarmonicResult {
        spectrum,
        peaks,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ground_state_imaginary_time, ImaginaryTimeOptions};
    use crate::grid::{Grid, ParticleSpec};
    use crate::hamiltonian::{harmonic_potential, PotentialGrid};

    fn oscillator(omega: f64) -> (HamiltonianSpec, WaveFunction) {
        let g = Grid::new(401, 0.05, -10.0, 1).unwrap();
        let ps = vec![ParticleSpec::electron()];
        let v = harmonic_potential(&ps, g, omega, 0.0).unwrap();
        let spec = HamiltonianSpec::new(GaugeForm::General, FieldConfig::zero(), v, PotentialGrid::zero(g), ps, 1.0).unwrap();
        let (gs, _) = ground_state_imaginary_time(&spec, &ImaginaryTimeOptions::default()).unwrap();
        (spec, gs)
    }

    #[test]
    fn zero_kick_gives_zero_spectrum() {
        let (spec, gs) = oscillator(1.0);
        let opts = ResponseOptions::new(0.0, 10.0, 0.05, 2.0, 21);
        let s = linear_susceptibility(&spec, &gs, &opts).unwrap();
        assert!(s.dipole_response.iter().all(|d| *d == 0.0));
        assert!(s.spectrum.values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn oscillator_static_polarizability() {
        let omega = 1.0;
        let (spec, gs) = oscillator(omega);
        let opts = ResponseOptions::new(1e-3, 60.0, 0.02, 2.0, 201);
        let s = linear_susceptibility(&spec, &gs, &opts).unwrap();
        let a0 = s.static_polarizability().unwrap();
        assert!((a0 - 1.0 / (omega * omega)).abs() < 0.02, "{a0}");
        assert!(s.linearity.unwrap() < 0.01);
        assert!(s.spectrum.passivity_violation() <= 1e-3);
        // single absorption peak at ω₀
        let (i_max, _) = s
            .spectrum
            .values
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, z)| if z.im > b.1 { (i, z.im) } else { b });
        let resolution = 2.0 * std::f64::consts::PI / 60.0;
        assert!((s.spectrum.frequencies[i_max] - omega).abs() < resolution);
    }

    #[test]
    fn kick_gauges_agree() {
        let (spec, gs) = oscillator(0.8);
        let mut opts = ResponseOptions::new(1e-3, 20.0, 0.02, 2.0, 41);
        opts.linearity_tol = None;
        let l = linear_susceptibility(&spec, &gs, &opts).unwrap();
        opts.gauge = KickGauge::Velocity;
        let v = linear_susceptibility(&spec, &gs, &opts).unwrap();
        assert!(l.spectrum.relative_difference(&v.spectrum).unwrap() < 1e-8);
    }

    #[test]
    fn oscillator_has_no_harmonics() {
        let omega0 = 1.0;
        let (spec, gs) = oscillator(omega0);
        // ω₀ sits halfway between the 2nd and 3rd harmonic windows
        let w = 0.4;
        let drive = FieldConfig::zero().with_a(Descriptor::uniform(Profile::Sin2Pulse {
            amplitude: 0.02 / w,
            freq: w,
            cycles: 10.0,
            phase: 0.0,
            start: 0.0,
        }));
        let driven = spec.with_fields(GaugeForm::Length, drive).unwrap();
        let period = 2.0 * std::f64::consts::PI / w;
        let plan = PropagationPlan::new(0.02, (10.0 * period / 0.02).round() as usize, 1).unwrap();
        let r = harmonic_spectrum(&driven, &gs, &plan, &HarmonicOptions::new(w, 5)).unwrap();
        let fund = r.peaks[0].power;
        for p in &r.peaks[1..] {
            // only the smooth pulse tail and the ω₀ resonance remain
            assert!(p.power < 1e-3 * fund, "order {} {}", p.order, p.power / fund);
        }
    }
}
