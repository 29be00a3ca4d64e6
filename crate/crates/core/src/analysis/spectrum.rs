//! Windowed Fourier transforms of sampled time series.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Apodization applied over `[t0, t0 + T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Window {
    None,
    /// `sin²(π τ/T)`, symmetric over the interval.
    Hann,
    /// `cos²(π τ/2T)`, decaying from 1 at the start (for impulse responses).
    HalfHann,
    /// `exp(−½ (τ/(fraction·T))²)`, decaying from 1 at the start. Its cosine
    /// transform is positive, so absorptive parts keep their sign.
    Gaussian { fraction: f64 },
}

impl Default for Window {
    fn default() -> Self {
        Window::Gaussian { fraction: 0.2 }
    }
}

impl Window {
    pub fn weight(&self, tau: f64, span: f64) -> f64 {
        let u = (tau / span).clamp(0.0, 1.0);
        match *self {
            Window::None => 1.0,
            Window::Hann => (std::f64::consts::PI * u).sin().powi(2),
            Window::HalfHann => (0.5 * std::f64::consts::PI * u).cos().powi(2),
            Window::Gaussian { fraction } => (-0.5 * (u / fraction).powi(2)).exp(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Window::Gaussian { fraction } = self {
            if !(*fraction > 0.0) {
                return Err(Error::Scenario(format!("window fraction must be positive, got {fraction}")));
            }
        }
        Ok(())
    }
}

/// `∫ f(t) w(t − t0) e^{iωt} dt` over the samples by the trapezoidal rule.
/// Samples must be equally spaced.
pub fn windowed_transform(times: &[f64], values: &[f64], window: Window, frequencies: &[f64]) -> Vec<C64> {
    let n = times.len();
    if n < 2 {
        return vec![C64::new(0.0, 0.0); frequencies.len()];
    }
    let t0 = times[0];
    let span = times[n - 1] - t0;
    let weighted: Vec<f64> = times
        .iter()
        .zip(values)
        .enumerate()
        .map(|(i, (t, v))| {
            let trap = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            trap * v * window.weight(t - t0, span)
        })
        .collect();
    let dt = span / (n - 1) as f64;
    frequencies
        .iter()
        .map(|&w| {
            // rotate a unit phasor instead of calling sin/cos per sample
            let step = C64::from_polar(1.0, w * dt);
            let mut phase = C64::from_polar(1.0, w * t0);
            let mut acc = C64::new(0.0, 0.0);
            for (i, f) in weighted.iter().enumerate() {
                if i % 256 == 0 {
                    phase = C64::from_polar(1.0, w * times[i]);
                }
                acc += f * phase;
                phase *= step;
            }
            acc * dt
        })
        .collect()
}

/// `n` frequencies evenly spaced on `[lo, hi]`.
pub fn frequency_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseSpectrum {
    pub frequencies: Vec<f64>,
    pub values: Vec<C64>,
    /// Kick (linear response) or peak drive field (harmonic spectra).
    pub kick_strength: f64,
    pub window: Window,
}

impl ResponseSpectrum {
    pub fn power(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `max_ω |α − β| / max_ω |α|` on a shared frequency grid.
    pub fn relative_difference(&self, other: &ResponseSpectrum) -> Result<f64> {
        if self.frequencies != other.frequencies {
            return Err(Error::Mismatch("spectra on different frequency grids".into()));
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return Ok(if other.max_abs() == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
            / scale)
    }

    /// Most negative `Im α(ω)` over `ω > 0`, relative to `max|α|`.
    pub fn passivity_violation(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let worst = self
            .frequencies
            .iter()
            .zip(&self.values)
            .filter(|(w, _)| **w > 0.0)
            .fold(0.0f64, |m, (_, z)| m.min(z.im));
        -worst / scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicPeak {
    pub order: usize,
    pub frequency: f64,
    pub power: f64,
}

/// Largest power within `±width·ω₀` of each harmonic `n·ω₀`.
pub fn harmonic_peaks(spectrum: &ResponseSpectrum, fundamental: f64, max_order: usize, width: f64) -> Vec<HarmonicPeak> {
    let power = spectrum.power();
    (1..=max_order)
        .map(|order| {
            let centre = order as f64 * fundamental;
            let (lo, hi) = (centre - width * fundamental, centre + width * fundamental);
            let best = spectrum
                .frequencies
                .iter()
                .zip(&power)
                .filter(|(w, _)| **w >= lo && **w <= hi)
                .fold((centre, 0.0f64), |b, (w, p)| if *p > b.1 { (*w, *p) } else { b });
            HarmonicPeak {
                order,
                frequency: best.0,
                power: best.1,
            }
        })
        .collect()
}
