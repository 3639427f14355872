//! Weak-coupling bridge between the KdV amplitude and an NLS envelope,
//! plus the analytic soliton generators on both sides.
//!
//! The carrier has wavenumber k0 and frequency k0^3. The envelope lives on
//! the slow grid X = eps (x + 3 k0^2 t), T = eps^2 t. Reconstruction keeps
//! the first and second harmonic plus the induced mean term.
//!
//! The envelope flow used for correspondence runs is the one the mapping
//! itself forces: cubic sign opposite to the focusing convention, and for a
//! scaled nonlinearity (coefficient beta on u u_x) the cubic picks up beta
//! squared while the second-order map terms pick up one factor of beta. Both
//! follow from v = beta u reducing the scaled equation to the plain one.

use num_complex::Complex64;

use crate::error::{QiError, Result};
use crate::grid::{resample_shifted, ComplexField, GridField, Spectral};
use crate::pde::{evolve, Equation, EvolutionProblem, FieldState};

#[derive(Debug, Clone, Copy)]
pub struct WeakCouplingParams {
    /// small parameter of the solution-level map (distinct from any
    /// deformation parameter)
    pub epsilon_wc: f64,
    /// carrier wavenumber
    pub k0: f64,
    pub x0: f64,
    pub t0: f64,
    pub big_x0: f64,
    pub big_t0: f64,
}

impl WeakCouplingParams {
    pub fn new(epsilon_wc: f64, k0: f64) -> Result<Self> {
        let p = WeakCouplingParams {
            epsilon_wc,
            k0,
            x0: 0.0,
            t0: 0.0,
            big_x0: 0.0,
            big_t0: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k0 == 0.0 {
            return Err(QiError::validation("carrier wavenumber must be nonzero"));
        }
        if !(self.epsilon_wc > 0.0 && self.epsilon_wc <= 0.1) {
            return Err(QiError::validation(
                "weak-coupling parameter must lie in (0, 0.1]",
            ));
        }
        Ok(())
    }

    /// carrier frequency, tied to the wavenumber
    pub fn omega0(&self) -> f64 {
        self.k0.powi(3)
    }
}

/// Rebuild the real amplitude from an envelope sampled on the slow grid.
/// `beta` scales the second-order terms; 1 recovers the plain map. `n_x`
/// is the fast-grid resolution; the fast length is the slow one over eps.
pub fn kdv_from_envelope(
    phi: &ComplexField,
    p: &WeakCouplingParams,
    beta: f64,
    t: f64,
    n_x: usize,
) -> Result<GridField> {
    p.validate()?;
    let eps = p.epsilon_wc;
    let shift = eps * 3.0 * p.k0 * p.k0 * t;
    let phv = resample_shifted(phi, n_x, shift);
    let lx = phi.length / eps;
    let mut vals = Vec::with_capacity(n_x);
    for j in 0..n_x {
        let x = -lx / 2.0 + j as f64 * lx / n_x as f64;
        let th = p.k0 * x + p.omega0() * t;
        let e1 = Complex64::new(0.0, th).exp();
        let pv = phv.values[j];
        let first = 2.0 * (pv * e1).re;
        let second = 2.0 * (pv * pv * e1 * e1).re - 2.0 * pv.norm_sqr();
        vals.push(eps * first + beta * eps * eps / (p.k0 * p.k0) * second);
    }
    Ok(GridField::from_values(lx, vals))
}

/// One-soliton profile of the amplitude equation with nonlinearity scaled by
/// beta = 1 + 5 eps / 3 (logarithm dropped): speed beta*c, width 2/sqrt(c*beta).
pub fn soliton_beta_scaled(
    c: f64,
    eps: f64,
    x0: f64,
    t0: f64,
) -> Result<impl Fn(f64, f64) -> f64> {
    if c <= 0.0 {
        return Err(QiError::validation("soliton speed parameter must be positive"));
    }
    let beta = 1.0 + 5.0 / 3.0 * eps;
    Ok(move |x: f64, t: f64| {
        let arg = 0.5 * (c * beta).sqrt() * (x - x0 - beta * c * (t - t0));
        let s = 1.0 / arg.cosh();
        c / 2.0 * s * s
    })
}

/// Envelope soliton evaluated exactly as displayed, with the two displayed
/// constants taken imaginary. The complex cosh keeps the expression finite;
/// any mismatch with the cubic-envelope flow is reported by
/// [`nls_soliton_residual`], not repaired here.
pub fn soliton_envelope(
    k_amp: f64,
    v: f64,
    p: &WeakCouplingParams,
    beta: f64,
) -> Result<impl Fn(f64, f64) -> Complex64> {
    if k_amp <= 0.0 {
        return Err(QiError::validation("envelope amplitude must be positive"));
    }
    if p.k0 <= 0.0 {
        return Err(QiError::validation(
            "displayed square roots require a positive carrier wavenumber",
        ));
    }
    let l1 = Complex64::new(0.0, (3.0 * beta / p.k0).sqrt());
    let l2 = Complex64::new(0.0, -1.0 / (3.0 * p.k0).sqrt());
    let (bx0, bt0) = (p.big_x0, p.big_t0);
    Ok(move |bx: f64, bt: f64| {
        let xt = bx - bx0;
        let tt = bt - bt0;
        let arg = l1 * k_amp * (l2 * xt - v * tt);
        let phase = Complex64::new(0.0, 0.5) * l2 * v * xt
            + Complex64::new(0.0, 0.25) * (l1 * l1 * k_amp * k_amp - v * v) * tt;
        k_amp / arg.cosh() * phase.exp()
    })
}

/// Sup-norm residual of the displayed cubic envelope equation (focusing sign,
/// linear beta) under a sampler, using spectral X-derivatives and a centered
/// difference in T.
pub fn nls_soliton_residual(
    sampler: impl Fn(f64, f64) -> Complex64,
    p: &WeakCouplingParams,
    beta: f64,
    length: f64,
    n: usize,
    bt: f64,
) -> Result<f64> {
    let dbt = 1e-6;
    let at = |t: f64| ComplexField::from_fn(length, n, |x| sampler(x, t));
    let phi = at(bt)?;
    let phi_m = at(bt - dbt)?;
    let phi_p = at(bt + dbt)?;
    let sp = Spectral::for_field_c(&phi);
    let pxx = sp.deriv_c(&phi, 2);
    let mut worst = 0.0f64;
    for j in 0..n {
        let pt = (phi_p.values[j] - phi_m.values[j]) / (2.0 * dbt);
        let cubic = Complex64::new(0.0, beta * 6.0 / p.k0)
            * phi.values[j].norm_sqr()
            * phi.values[j];
        let r = pt + Complex64::new(0.0, 3.0 * p.k0) * pxx.values[j] + cubic;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

/// Frozen numerical setup for the correspondence study.
#[derive(Debug, Clone, Copy)]
pub struct CorrespondenceConfig {
    pub k0: f64,
    pub t_final: f64,
    /// fast-grid points
    pub n_x: usize,
    /// slow-grid points
    pub n_big_x: usize,
    /// envelope amplitude and width of the initial sech
    pub amplitude: f64,
    pub width: f64,
    /// fast domain length in units of 1/eps, before carrier-period rounding
    pub length_factor: f64,
    pub dt_kdv: f64,
    pub dt_envelope: f64,
}

impl Default for CorrespondenceConfig {
    fn default() -> Self {
        CorrespondenceConfig {
            k0: 2.0,
            t_final: 4.0,
            n_x: 8192,
            n_big_x: 512,
            amplitude: 1.0,
            width: 1.0,
            length_factor: 30.0,
            dt_kdv: 5e-4,
            dt_envelope: 1e-5,
        }
    }
}

/// Evolve matched initial data on both sides and return the sup-norm gap at
/// the final time. `eps_def` selects the scaled pairing: the amplitude runs
/// with nonlinearity coefficient 6 beta, the envelope cubic with beta
/// squared, the map second-order terms with beta, beta = 1 + 5 eps_def / 3.
pub fn correspondence_error(
    eps_wc: f64,
    eps_def: Option<f64>,
    cfg: &CorrespondenceConfig,
) -> Result<f64> {
    let beta = 1.0 + 5.0 / 3.0 * eps_def.unwrap_or(0.0);
    // round the fast domain to an integer number of carrier periods
    let lx_raw = cfg.length_factor / eps_wc;
    let m = (cfg.k0 * lx_raw / (2.0 * std::f64::consts::PI)).round();
    let lx = 2.0 * std::f64::consts::PI * m / cfg.k0;
    let l_big = eps_wc * lx;
    let p = WeakCouplingParams::new(eps_wc, cfg.k0)?;

    let phi0 = ComplexField::from_fn(l_big, cfg.n_big_x, |bx| {
        Complex64::new(cfg.amplitude / (bx / cfg.width).cosh(), 0.0)
    })?;

    // slow-time horizon and step
    let t_big = eps_wc * eps_wc * cfg.t_final;
    let steps = ((t_big / cfg.dt_envelope).round() as usize).max(200);
    let phi_t = evolve_envelope(&phi0, cfg.k0, beta, t_big, steps)?;

    // fast side
    let u0 = kdv_from_envelope(&phi0, &p, beta, 0.0, cfg.n_x)?;
    let equation = match eps_def {
        None => Equation::Kdv,
        Some(e) => Equation::LogKdv {
            epsilon: e,
            drop_log: true,
        },
    };
    let problem = EvolutionProblem {
        equation,
        dt: cfg.dt_kdv,
        t_end: cfg.t_final,
    };
    let traj = evolve(&FieldState::Real(u0), &problem, 0)?;
    let FieldState::Real(u_final) = &traj.last().unwrap().field else {
        unreachable!()
    };

    let u_rebuilt = kdv_from_envelope(&phi_t, &p, beta, cfg.t_final, cfg.n_x)?;
    Ok((0..cfg.n_x)
        .map(|j| (u_final.values[j] - u_rebuilt.values[j]).abs())
        .fold(0.0, f64::max))
}

/// Integrating-factor RK4 for the reduction-consistent envelope flow:
/// phi_T = -3 i k0 phi_XX + i (6 beta^2 / k0) |phi|^2 phi (spectral form).
pub fn evolve_envelope(
    phi0: &ComplexField,
    k0: f64,
    beta: f64,
    t_big: f64,
    steps: usize,
) -> Result<ComplexField> {
    phi0.check()?;
    if steps == 0 {
        return Ok(phi0.clone());
    }
    let sp = Spectral::for_field_c(phi0);
    let dt = t_big / steps as f64;
    let n = phi0.n();
    let sym: Vec<Complex64> = sp
        .k
        .iter()
        .map(|&kk| Complex64::new(0.0, 3.0 * k0 * kk * kk))
        .collect();
    let e1: Vec<Complex64> = sym.iter().map(|s| (s * dt / 2.0).exp()).collect();
    let e2: Vec<Complex64> = e1.iter().map(|v| v * v).collect();
    let coef = Complex64::new(0.0, 6.0 * beta * beta / k0);
    let nl = |hat: &[Complex64]| -> Vec<Complex64> {
        let phi = sp.ifft(hat);
        let mut cubic: Vec<Complex64> = phi.iter().map(|v| coef * v.norm_sqr() * v).collect();
        let mut spec = sp.fft_c(&cubic);
        sp.apply_dealias(&mut spec);
        cubic = spec;
        cubic
    };
    let mut hat = sp.fft_c(&phi0.values);
    let comb = |y: &[Complex64], e: &[Complex64], k: &[Complex64], s: f64| -> Vec<Complex64> {
        (0..n).map(|j| e[j] * (y[j] + s * k[j])).collect()
    };
    for _ in 0..steps {
        let a = nl(&hat);
        let b = nl(&comb(&hat, &e1, &a, dt / 2.0));
        let yc: Vec<Complex64> = (0..n).map(|j| e1[j] * hat[j] + dt / 2.0 * b[j]).collect();
        let c = nl(&yc);
        let yd: Vec<Complex64> = (0..n)
            .map(|j| e2[j] * hat[j] + dt * e1[j] * c[j])
            .collect();
        let d = nl(&yd);
        for j in 0..n {
            hat[j] = e2[j] * hat[j]
                + dt / 6.0 * (e2[j] * a[j] + 2.0 * e1[j] * (b[j] + c[j]) + d[j]);
        }
    }
    let vals = sp.ifft(&hat);
    let out = ComplexField::from_values(phi0.length, vals);
    out.check()?;
    Ok(out)
}

/// Least-squares slope of log(error) against log(eps).
pub fn fitted_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(e, err) in points {
        let (lx, ly) = (e.ln(), err.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
