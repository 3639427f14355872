//! Periodic grids, spectral differentiation, and quadrature.
//!
//! All fields live on the uniform grid x_j = -L/2 + j L/n. Derivatives are
//! computed by FFT; integrals use the trapezoid rule, which on a periodic
//! grid reduces to h * sum and is spectrally accurate for smooth integrands.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{QiError, Result};

/// Real periodic field u(x) on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub length: f64,
    pub values: Vec<f64>,
}

/// Complex periodic field (NLS envelopes, coupled amplitudes).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub length: f64,
    pub values: Vec<Complex64>,
}

impl GridField {
    pub fn new(length: f64, values: Vec<f64>) -> Result<Self> {
        validate_grid(length, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(QiError::validation("grid values must be finite"));
        }
        Ok(GridField { length, values })
    }

    pub fn zeros(length: f64, n: usize) -> Result<Self> {
        GridField::new(length, vec![0.0; n])
    }

    /// Sample a function of x on the grid.
    pub fn from_fn(length: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        validate_grid(length, n)?;
        let h = length / n as f64;
        let values = (0..n).map(|j| f(-length / 2.0 + j as f64 * h)).collect();
        GridField::new(length, values)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn h(&self) -> f64 {
        self.length / self.n() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.length / 2.0 + j as f64 * self.h()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Trapezoid integral over the period.
    pub fn integrate(&self) -> f64 {
        self.h() * self.values.iter().sum::<f64>()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            length: self.length,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> GridField {
        assert_eq!(self.n(), other.n());
        GridField {
            length: self.length,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Unchecked constructor for values produced by in-crate arithmetic.
    pub fn from_values(length: f64, values: Vec<f64>) -> GridField {
        GridField { length, values }
    }

    /// Re-validate shape and finiteness (entry points call this on
    /// externally supplied fields).
    pub fn check(&self) -> Result<()> {
        validate_grid(self.length, self.n())?;
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(QiError::validation("grid values must be finite"));
        }
        Ok(())
    }

    pub fn x_iter(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.h();
        let half = self.length / 2.0;
        (0..self.n()).map(move |j| -half + j as f64 * h)
    }
}

impl ComplexField {
    pub fn new(length: f64, values: Vec<Complex64>) -> Result<Self> {
        validate_grid(length, values.len())?;
        Ok(ComplexField { length, values })
    }

    pub fn from_fn(length: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        validate_grid(length, n)?;
        let h = length / n as f64;
        let values = (0..n).map(|j| f(-length / 2.0 + j as f64 * h)).collect();
        ComplexField::new(length, values)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn h(&self) -> f64 {
        self.length / self.n() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    pub fn from_values(length: f64, values: Vec<Complex64>) -> ComplexField {
        ComplexField { length, values }
    }

    pub fn x_iter(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.h();
        let half = self.length / 2.0;
        (0..self.n()).map(move |j| -half + j as f64 * h)
    }

    pub fn zeros(length: f64, n: usize) -> Result<Self> {
        ComplexField::new(length, vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn check(&self) -> Result<()> {
        validate_grid(self.length, self.n())?;
        if self.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(QiError::validation("field contains non-finite values"));
        }
        Ok(())
    }
}

fn validate_grid(length: f64, n: usize) -> Result<()> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(QiError::validation("grid.length must be positive"));
    }
    if n < 16 || !n.is_power_of_two() {
        return Err(QiError::validation(format!(
            "grid.n must be a power of two >= 16, got {n}"
        )));
    }
    Ok(())
}

/// Cached FFT plans and wavenumbers for one grid size.
pub struct Spectral {
    pub n: usize,
    pub length: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    pub k: Vec<f64>,
    dealias: Vec<bool>,
}

impl Spectral {
    pub fn new(length: f64, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let k = wavenumbers(length, n);
        // 2/3 rule: zero modes with |index| > n/3
        let dealias = (0..n)
            .map(|j| {
                let idx = if j <= n / 2 { j } else { n - j };
                idx <= n / 3
            })
            .collect();
        Spectral {
            n,
            length,
            fwd,
            inv,
            k,
            dealias,
        }
    }

    pub fn for_field(u: &GridField) -> Self {
        Spectral::new(u.length, u.n())
    }

    pub fn for_field_c(u: &ComplexField) -> Self {
        Spectral::new(u.length, u.n())
    }

    pub fn fft(&self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    pub fn fft_c(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut buf = u.to_vec();
        self.fwd.process(&mut buf);
        buf
    }

    pub fn ifft(&self, spec: &[Complex64]) -> Vec<Complex64> {
        let mut buf = spec.to_vec();
        self.inv.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for v in &mut buf {
            *v *= scale;
        }
        buf
    }

    pub fn ifft_real(&self, spec: &[Complex64]) -> Vec<f64> {
        self.ifft(spec).iter().map(|c| c.re).collect()
    }

    /// Spectral derivative of the given order.
    pub fn deriv(&self, u: &GridField, order: u32) -> GridField {
        let mut spec = self.fft(&u.values);
        self.apply_deriv(&mut spec, order);
        GridField {
            length: u.length,
            values: self.ifft_real(&spec),
        }
    }

    pub fn deriv_c(&self, u: &ComplexField, order: u32) -> ComplexField {
        let mut spec = self.fft_c(&u.values);
        self.apply_deriv(&mut spec, order);
        ComplexField {
            length: u.length,
            values: self.ifft(&spec),
        }
    }

    fn apply_deriv(&self, spec: &mut [Complex64], order: u32) {
        for (c, &kk) in spec.iter_mut().zip(&self.k) {
            let ik = Complex64::new(0.0, kk);
            *c *= ik.powu(order);
        }
    }

    /// Zero the top third of the spectrum (2/3 dealiasing rule).
    pub fn apply_dealias(&self, spec: &mut [Complex64]) {
        for (c, &keep) in spec.iter_mut().zip(&self.dealias) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Dealiased pointwise product of two real fields.
    pub fn dealiased_product(&self, a: &GridField, b: &GridField) -> GridField {
        let prod: Vec<f64> = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(&x, &y)| x * y)
            .collect();
        let mut spec = self.fft(&prod);
        self.apply_dealias(&mut spec);
        GridField {
            length: a.length,
            values: self.ifft_real(&spec),
        }
    }

    /// Dealiased copy of a real field.
    pub fn dealias_field(&self, u: &GridField) -> GridField {
        let mut spec = self.fft(&u.values);
        self.apply_dealias(&mut spec);
        GridField {
            length: u.length,
            values: self.ifft_real(&spec),
        }
    }

    /// Dealiased copy of a complex field.
    pub fn dealias_field_c(&self, u: &ComplexField) -> ComplexField {
        let mut spec = self.fft_c(&u.values);
        self.apply_dealias(&mut spec);
        ComplexField {
            length: u.length,
            values: self.ifft(&spec),
        }
    }

    /// Fraction of spectral energy in the top third of the spectrum.
    pub fn tail_energy_fraction(&self, u: &GridField) -> f64 {
        let spec = self.fft(&u.values);
        let total: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let tail: f64 = spec
            .iter()
            .zip(&self.dealias)
            .filter(|(_, &keep)| !keep)
            .map(|(c, _)| c.norm_sqr())
            .sum();
        tail / total
    }
}

fn wavenumbers(length: f64, n: usize) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / length;
    (0..n)
        .map(|j| {
            let idx = if j <= n / 2 {
                j as i64
            } else {
                j as i64 - n as i64
            };
            base * idx as f64
        })
        .collect()
}

/// Band-limited (Fourier) interpolation onto a grid `factor` times finer.
pub fn refine(u: &GridField, factor: usize) -> GridField {
    assert!(factor.is_power_of_two() && factor >= 1);
    if factor == 1 {
        return u.clone();
    }
    let n = u.n();
    let m = n * factor;
    let sp_in = Spectral::new(u.length, n);
    let sp_out = Spectral::new(u.length, m);
    let spec = sp_in.fft(&u.values);
    let mut padded = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..n / 2 {
        padded[j] = spec[j];
    }
    for j in 1..n / 2 {
        padded[m - j] = spec[n - j];
    }
    // split the shared Nyquist mode symmetrically to keep the result real
    padded[n / 2] = spec[n / 2] * 0.5;
    padded[m - n / 2] = spec[n / 2] * 0.5;
    let scale = factor as f64;
    GridField {
        length: u.length,
        values: sp_out.ifft(&padded).iter().map(|c| c.re * scale).collect(),
    }
}

/// Evaluate a complex field's Fourier series on a finer uniform grid shifted
/// by `shift` (same period). Used to bridge the envelope grid to the carrier
/// grid in the weak-coupling map.
pub fn resample_shifted(phi: &ComplexField, m: usize, shift: f64) -> ComplexField {
    let n = phi.n();
    assert!(m >= n && m % n == 0);
    let sp_in = Spectral::new(phi.length, n);
    let sp_out = Spectral::new(phi.length, m);
    let spec = sp_in.fft_c(&phi.values);
    let mut padded = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..=n / 2 {
        padded[j] = spec[j];
    }
    for j in 1..n / 2 {
        padded[m - j] = spec[n - j];
    }
    padded[n / 2] *= 0.5;
    padded[m - n / 2] = spec[n / 2] * 0.5;
    let km = wavenumbers(phi.length, m);
    for (c, &kk) in padded.iter_mut().zip(&km) {
        *c *= Complex64::new(0.0, kk * shift).exp();
    }
    let scale = (m / n) as f64;
    ComplexField {
        length: phi.length,
        values: sp_out.ifft(&padded).iter().map(|c| c * scale).collect(),
    }
}
