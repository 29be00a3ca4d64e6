//! Closed-form one-dimensional profiles and separable space × time terms.
//!
//! Every profile can be differentiated to any order analytically, which the
//! gauge machinery relies on: a transformed vector potential needs ∂ₓχ, the
//! electric field of a transformed pair needs the mixed ∂ₓ∂ₜχ.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::Field;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `Σ coeffs[k] u^k`
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `amplitude · sin(freq·u + phase)`
    Sinusoid {
        amplitude: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · exp(-(u-center)²/(2 width²))`
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Gaussian envelope times `sin(freq·(u-center) + phase)`.
    GaussianPulse {
        amplitude: f64,
        center: f64,
        width: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · sin²(π τ/T) · sin(freq·τ + phase)` for `τ = u - start` in
    /// `[0, T]`, `T = cycles · 2π/freq`; zero outside.
    Sin2Pulse {
        amplitude: f64,
        freq: f64,
        cycles: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        start: f64,
    },
    /// Samples at `start + i·step`, interpolated with Catmull–Rom cubics and
    /// held constant beyond the ends.
    Table {
        start: f64,
        step: f64,
        values: Vec<f64>,
    },
}

impl Profile {
    pub fn one() -> Self {
        Profile::Constant { value: 1.0 }
    }

    /// n-th derivative at `u`.
    pub fn derivative(&self, u: f64, n: u32) -> f64 {
        match self {
            Profile::Constant { value } => {
                if n == 0 {
                    *value
                } else {
                    0.0
                }
            }
            Profile::Polynomial { coeffs } => poly_derivative(coeffs, u, n),
            Profile::Sinusoid {
                amplitude,
                freq,
                phase,
            } => sin_derivative(*amplitude, *freq, *phase, u, n),
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => amplitude * gaussian_derivative(*center, *width, u, n),
            Profile::GaussianPulse {
                amplitude,
                center,
                width,
                freq,
                phase,
            } => {
                // Leibniz rule over envelope × carrier
                let mut acc = 0.0;
                let mut binom = 1.0;
                for k in 0..=n {
                    let env = gaussian_derivative(*center, *width, u, k);
                    let car = sin_derivative(1.0, *freq, *phase - freq * center, u, n - k);
                    acc += binom * env * car;
                    binom = binom * (n - k) as f64 / (k + 1) as f64;
                }
                amplitude * acc
            }
            Profile::Sin2Pulse {
                amplitude,
                freq,
                cycles,
                phase,
                start,
            } => {
                let duration = cycles * 2.0 * PI / freq;
                let tau = u - start;
                if !(0.0..=duration).contains(&tau) {
                    return 0.0;
                }
                let big = 2.0 * PI / duration;
                0.5 * sin_derivative(*amplitude, *freq, *phase, tau, n)
                    - 0.25 * sin_derivative(*amplitude, freq + big, *phase, tau, n)
                    - 0.25 * sin_derivative(*amplitude, freq - big, *phase, tau, n)
            }
            Profile::Table {
                start,
                step,
                values,
            } => table_derivative(*start, *step, values, u, n),
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        self.derivative(u, 0)
    }

    /// Polynomial degree, `None` if the profile is not a polynomial.
    pub fn degree(&self) -> Option<u32> {
        match self {
            Profile::Constant { .. } => Some(0),
            Profile::Polynomial { coeffs } => Some(
                coeffs
                    .iter()
                    .rposition(|c| *c != 0.0)
                    .map(|p| p as u32)
                    .unwrap_or(0),
            ),
            Profile::Sinusoid { amplitude, .. }
            | Profile::Gaussian { amplitude, .. }
            | Profile::GaussianPulse { amplitude, .. }
            | Profile::Sin2Pulse { amplitude, .. } => {
                if *amplitude == 0.0 {
                    Some(0)
                } else {
                    None
                }
            }
            Profile::Table { values, .. } => {
                if values.iter().all(|v| *v == values[0]) {
                    Some(0)
                } else {
                    None
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Constant { value } => *value == 0.0,
            Profile::Polynomial { coeffs } => coeffs.iter().all(|c| *c == 0.0),
            Profile::Sinusoid { amplitude, .. }
            | Profile::Gaussian { amplitude, .. }
            | Profile::GaussianPulse { amplitude, .. }
            | Profile::Sin2Pulse { amplitude, .. } => *amplitude == 0.0,
            Profile::Table { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// Checks parameters that would make evaluation meaningless.
    pub fn validate(&self) -> Result<(), String> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be finite"))
            }
        };
        match self {
            Profile::Constant { value } => finite("value", *value),
            Profile::Polynomial { coeffs } => {
                if coeffs.iter().all(|c| c.is_finite()) {
                    Ok(())
                } else {
                    Err("coefficients must be finite".into())
                }
            }
            Profile::Sinusoid { amplitude, freq, phase } => {
                finite("amplitude", *amplitude)?;
                finite("freq", *freq)?;
                finite("phase", *phase)
            }
            Profile::Gaussian { width, .. } | Profile::GaussianPulse { width, .. } => {
                if *width > 0.0 {
                    Ok(())
                } else {
                    Err("width must be positive".into())
                }
            }
            Profile::Sin2Pulse { freq, cycles, .. } => {
                if *freq > 0.0 && *cycles > 0.0 {
                    Ok(())
                } else {
                    Err("sin2_pulse needs positive freq and cycles".into())
                }
            }
            Profile::Table { step, values, .. } => {
                if !(*step > 0.0) {
                    Err("table step must be positive".into())
                } else if values.len() < 2 {
                    Err("table needs at least two values".into())
                } else {
                    Ok(())
                }
            }
        }
    }
}

fn poly_derivative(coeffs: &[f64], u: f64, n: u32) -> f64 {
    let n = n as usize;
    if n >= coeffs.len() {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in (n..coeffs.len()).rev() {
        let falling: f64 = ((k - n + 1)..=k).map(|j| j as f64).product();
        acc = acc * u + coeffs[k] * falling;
    }
    acc
}

fn sin_derivative(amplitude: f64, freq: f64, phase: f64, u: f64, n: u32) -> f64 {
    amplitude * freq.powi(n as i32) * (freq * u + phase + n as f64 * FRAC_PI_2).sin()
}

/// n-th derivative of `exp(-(u-c)²/(2w²))` through probabilists' Hermite polynomials.
fn gaussian_derivative(center: f64, width: f64, u: f64, n: u32) -> f64 {
    let s = (u - center) / width;
    let (mut he_prev, mut he) = (0.0, 1.0);
    for k in 0..n {
        let next = s * he - k as f64 * he_prev;
        he_prev = he;
        he = next;
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * he * (-0.5 * s * s).exp() / width.powi(n as i32)
}

fn table_derivative(start: f64, step: f64, values: &[f64], u: f64, n: u32) -> f64 {
    let last = values.len() - 1;
    let f = (u - start) / step;
    if f <= 0.0 {
        return if n == 0 { values[0] } else { 0.0 };
    }
    if f >= last as f64 {
        return if n == 0 { values[last] } else { 0.0 };
    }
    let i = (f.floor() as usize).min(last - 1);
    let s = f - i as f64;
    let at = |j: isize| values[j.clamp(0, last as isize) as usize];
    let (p0, p1, p2, p3) = (at(i as isize - 1), at(i as isize), at(i as isize + 1), at(i as isize + 2));
    // Catmull-Rom: p(s) = a + b s + c s² + d s³
    let a = p1;
    let b = 0.5 * (p2 - p0);
    let c = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
    let d = 0.5 * (p3 - p0) + 1.5 * (p1 - p2);
    let ds = match n {
        0 => a + s * (b + s * (c + s * d)),
        1 => b + s * (2.0 * c + 3.0 * s * d),
        2 => 2.0 * c + 6.0 * s * d,
        3 => 6.0 * d,
        _ => 0.0,
    };
    ds / step.powi(n as i32)
}

/// `space(x) · time(t)`; either factor defaults to the constant 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    #[serde(default = "Profile::one")]
    pub space: Profile,
    #[serde(default = "Profile::one")]
    pub time: Profile,
}

impl Term {
    pub fn new(space: Profile, time: Profile) -> Self {
        Self { space, time }
    }

    pub fn uniform(time: Profile) -> Self {
        Self::new(Profile::one(), time)
    }

    pub fn is_uniform(&self) -> bool {
        self.space.degree() == Some(0) || self.is_zero()
    }

    pub fn is_static(&self) -> bool {
        self.time.degree() == Some(0) || self.is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.space.is_zero() || self.time.is_zero()
    }
}

/// Sum of separable terms. The building block for φ, A, e0 and χ.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Descriptor(pub Vec<Term>);

impl Descriptor {
    pub fn zero() -> Self {
        Self(Vec::new())
    }

    pub fn single(space: Profile, time: Profile) -> Self {
        Self(vec![Term::new(space, time)])
    }

    /// Spatially uniform `profile(t)`.
    pub fn uniform(time: Profile) -> Self {
        Self(vec![Term::uniform(time)])
    }

    /// Static `profile(x)`.
    pub fn stationary(space: Profile) -> Self {
        Self(vec![Term::new(space, Profile::one())])
    }

    /// Splits into the spatially uniform, time-dependent part (the dipole
    /// approximation of a transverse vector potential) and the remainder.
    pub fn split_transverse(&self) -> (Descriptor, Descriptor) {
        let (t, l): (Vec<Term>, Vec<Term>) = self
            .0
            .iter()
            .filter(|term| !term.is_zero())
            .cloned()
            .partition(|term| term.is_uniform() && !term.is_static());
        (Descriptor(t), Descriptor(l))
    }

    pub fn validate(&self) -> Result<(), String> {
        for (i, term) in self.0.iter().enumerate() {
            term.space
                .validate()
                .map_err(|e| format!("term {i} space: {e}"))?;
            term.time.validate().map_err(|e| format!("term {i} time: {e}"))?;
        }
        Ok(())
    }
}

impl Field for Descriptor {
    fn partial(&self, x: f64, t: f64, nx: u32, nt: u32) -> f64 {
        self.0
            .iter()
            .map(|term| term.space.derivative(x, nx) * term.time.derivative(t, nt))
            .sum()
    }

    fn x_degree(&self) -> Option<u32> {
        self.0
            .iter()
            .filter(|term| !term.is_zero())
            .try_fold(0, |acc, term| term.space.degree().map(|d| acc.max(d)))
    }

    fn t_degree(&self) -> Option<u32> {
        self.0
            .iter()
            .filter(|term| !term.is_zero())
            .try_fold(0, |acc, term| term.time.degree().map(|d| acc.max(d)))
    }

    fn is_zero(&self) -> bool {
        self.0.iter().all(Term::is_zero)
    }

    fn split_transverse(&self) -> Option<(Descriptor, Descriptor)> {
        Some(Descriptor::split_transverse(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: impl Fn(f64) -> f64, u: f64, h: f64) -> f64 {
        (f(u + h) - f(u - h)) / (2.0 * h)
    }

    fn profiles() -> Vec<Profile> {
        vec![
            Profile::Constant { value: 2.5 },
            Profile::Polynomial {
                coeffs: vec![0.3, -1.0, 0.5, 0.05],
            },
            Profile::Sinusoid {
                amplitude: 0.7,
                freq: 1.3,
                phase: 0.2,
            },
            Profile::Gaussian {
                amplitude: 1.1,
                center: 0.4,
                width: 0.8,
            },
            Profile::GaussianPulse {
                amplitude: 0.9,
                center: 1.0,
                width: 2.0,
                freq: 0.6,
                phase: 0.1,
            },
            Profile::Sin2Pulse {
                amplitude: 0.4,
                freq: 0.5,
                cycles: 3.0,
                phase: 0.0,
                start: -2.0,
            },
        ]
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-4;
        for p in profiles() {
            for &u in &[-1.3, 0.0, 0.77, 2.1] {
                for n in 0..3 {
                    let fd = central(|v| p.derivative(v, n), u, h);
                    let exact = p.derivative(u, n + 1);
                    assert!(
                        (fd - exact).abs() < 1e-6 * (1.0 + exact.abs()),
                        "{p:?} n={n} u={u}: fd {fd} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn sin2_pulse_matches_closed_form() {
        let p = Profile::Sin2Pulse {
            amplitude: 0.3,
            freq: 0.7,
            cycles: 4.0,
            phase: 0.4,
            start: 1.0,
        };
        let duration = 4.0 * 2.0 * PI / 0.7;
        for i in 0..50 {
            let tau = duration * i as f64 / 49.0;
            let direct = 0.3 * (PI * tau / duration).sin().powi(2) * (0.7 * tau + 0.4).sin();
            assert!((p.value(1.0 + tau) - direct).abs() < 1e-14);
        }
        assert_eq!(p.value(0.5), 0.0);
        assert_eq!(p.value(1.0 + duration + 0.1), 0.0);
    }

    #[test]
    fn table_interpolates_nodes() {
        let values: Vec<f64> = (0..10).map(|i| (i as f64 * 0.3).sin()).collect();
        let p = Profile::Table {
            start: -1.0,
            step: 0.3,
            values: values.clone(),
        };
        for (i, v) in values.iter().enumerate() {
            assert!((p.value(-1.0 + 0.3 * i as f64) - v).abs() < 1e-12);
        }
        let d = p.derivative(0.05, 1);
        assert!((d - (1.05f64).cos()).abs() < 0.02);
    }

    #[test]
    fn degrees() {
        assert_eq!(Profile::Polynomial { coeffs: vec![1.0, 0.0, 2.0, 0.0] }.degree(), Some(2));
        assert_eq!(Profile::Polynomial { coeffs: vec![] }.degree(), Some(0));
        assert_eq!(profiles()[2].degree(), None);
    }

    #[test]
    fn split_transverse_separates_uniform_drive() {
        let drive = Profile::Sinusoid {
            amplitude: 0.1,
            freq: 0.5,
            phase: 0.0,
        };
        let d = Descriptor(vec![
            Term::uniform(drive.clone()),
            Term::new(Profile::Constant { value: 2.0 }, Profile::one()),
            Term::new(
                Profile::Sinusoid {
                    amplitude: 1.0,
                    freq: 1.0,
                    phase: 0.0,
                },
                Profile::one(),
            ),
        ]);
        let (t, l) = d.split_transverse();
        assert_eq!(t.0.len(), 1);
        assert_eq!(t.0[0].time, drive);
        assert_eq!(l.0.len(), 2);
    }
}
