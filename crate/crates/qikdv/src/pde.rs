//! Time evolution of the supported equations of motion on periodic domains.
//!
//! The stepper is integrating-factor RK4: all linear dispersive terms are
//! absorbed into an exact Fourier propagator, the remaining nonlinearity is
//! evaluated pseudospectrally with 2/3-rule dealiasing.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::deformations::{DeformationSpec, LocalFamily, U_FLOOR};
use crate::error::{QiError, Result};
use crate::grid::{ComplexField, GridField, Spectral};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Equation {
    /// u_t + 6 u u_x + u_xxx = 0
    Kdv,
    /// u_t + 6 u u_x + u_xxx = X_x with the anomaly X of `spec`
    DeformedKdv { spec: DeformationSpec },
    /// u_t + 6 u u_x + (1 - eps) u_xxx = 0
    ScaledKdv { epsilon: f64 },
    /// u_t + 6 u u_x + u_xxx = eps ((u_x)^{m-1})_xx
    HigherDerivPower { m: u32, epsilon: f64 },
    /// u_t + 6 u u_x + u_xxx = eps u^{(2n+1)}
    HigherDerivOrder { n: u32, epsilon: f64 },
    /// u_t + u_xxx + (6 + 10 eps + 12 eps ln u) u u_x = 0, u > 0
    LogKdv { epsilon: f64, drop_log: bool },
    /// phi_T + 3 i k0 phi_XX + i (6 beta / k0) |phi|^2 phi = 0
    Nls { k0: f64, beta: f64 },
    /// qbar_t + qbar_xxx + 6 q qbar qbar_x = deformation terms, with the
    /// q counterpart; spec pair (q, qbar) deforms the two Hamiltonians
    CoupledKdv {
        spec_q: DeformationSpec,
        spec_qbar: DeformationSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionProblem {
    pub equation: Equation,
    pub dt: f64,
    pub t_end: f64,
}

impl EvolutionProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(QiError::validation("dt must be positive"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(QiError::validation("t_end must be nonnegative"));
        }
        match self.equation {
            Equation::LogKdv { epsilon, .. } => {
                if epsilon.abs() > 0.2 {
                    return Err(QiError::validation(
                        "logarithmic deformation requires |epsilon| <= 0.2",
                    ));
                }
            }
            Equation::Nls { k0, .. } => {
                if k0 == 0.0 {
                    return Err(QiError::validation("carrier wavenumber must be nonzero"));
                }
            }
            Equation::DeformedKdv { spec } => spec.validate()?,
            Equation::CoupledKdv { spec_q, spec_qbar } => {
                spec_q.validate()?;
                spec_qbar.validate()?;
                for s in [spec_q, spec_qbar] {
                    if matches!(s, DeformationSpec::PowerDef { .. }) {
                        return Err(QiError::validation(
                            "power deformation is undefined for complex amplitudes",
                        ));
                    }
                }
            }
            Equation::HigherDerivPower { m, .. } => {
                if m < 3 {
                    return Err(QiError::validation("derivative power requires m >= 3"));
                }
            }
            Equation::HigherDerivOrder { n, .. } => {
                if n < 1 {
                    return Err(QiError::validation("derivative order requires n >= 1"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldState {
    Real(GridField),
    Complex(ComplexField),
    Pair { q: ComplexField, qbar: ComplexField },
}

impl FieldState {
    pub fn length(&self) -> f64 {
        match self {
            FieldState::Real(u) => u.length,
            FieldState::Complex(p) => p.length,
            FieldState::Pair { q, .. } => q.length,
        }
    }
    pub fn n(&self) -> usize {
        match self {
            FieldState::Real(u) => u.n(),
            FieldState::Complex(p) => p.n(),
            FieldState::Pair { q, .. } => q.n(),
        }
    }
    pub fn is_finite(&self) -> bool {
        match self {
            FieldState::Real(u) => u.values.iter().all(|v| v.is_finite()),
            FieldState::Complex(p) => p.values.iter().all(|v| v.re.is_finite() && v.im.is_finite()),
            FieldState::Pair { q, qbar } => [q, qbar]
                .iter()
                .all(|f| f.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())),
        }
    }
    pub fn max_abs(&self) -> f64 {
        match self {
            FieldState::Real(u) => u.max_abs(),
            FieldState::Complex(p) => p.values.iter().fold(0.0f64, |m, v| m.max(v.norm())),
            FieldState::Pair { q, qbar } => [q, qbar]
                .iter()
                .flat_map(|f| f.values.iter())
                .fold(0.0f64, |m, v| m.max(v.norm())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub field: FieldState,
    pub diagnostics: Vec<(String, f64)>,
}

/// Prepared stepper for one problem on one grid: caches FFT plans, the
/// exact linear propagator, and the nonlinear closure.
pub struct Stepper {
    pub problem: EvolutionProblem,
    sp: Spectral,
    /// exp(L dt/2) for the linear symbol L(k)
    e_half: Vec<Complex64>,
}

impl Stepper {
    pub fn new(problem: EvolutionProblem, length: f64, n: usize) -> Result<Self> {
        problem.validate()?;
        let sp = Spectral::new(length, n);
        let symbol = linear_symbol(&problem.equation, &sp);
        let e_half: Vec<Complex64> = symbol
            .iter()
            .map(|l| (l * problem.dt / 2.0).exp())
            .collect();
        Ok(Stepper {
            problem,
            sp,
            e_half,
        })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.sp
    }

    /// Full right-hand side du/dt, linear part included. Exposed so tests
    /// can verify the convergence order and closed-form derivatives.
    pub fn rhs(&self, state: &FieldState) -> Result<FieldState> {
        let lin = self.linear_rhs(state);
        let non = self.nonlinear(state)?;
        Ok(add_states(&lin, &non))
    }

    fn linear_rhs(&self, state: &FieldState) -> FieldState {
        let symbol = linear_symbol(&self.problem.equation, &self.sp);
        let apply = |f: &ComplexField| {
            let mut hat = self.sp.fft_c(&f.values);
            for (h, l) in hat.iter_mut().zip(symbol.iter()) {
                *h *= l;
            }
            ComplexField::from_values(f.length, self.sp.ifft(&hat))
        };
        match state {
            FieldState::Real(u) => {
                let c = apply(&to_complex(u));
                FieldState::Real(re_part(&c))
            }
            FieldState::Complex(p) => FieldState::Complex(apply(p)),
            FieldState::Pair { q, qbar } => FieldState::Pair {
                q: apply(q),
                qbar: apply(qbar),
            },
        }
    }

    /// Nonlinear part of du/dt (everything the propagator does not absorb).
    fn nonlinear(&self, state: &FieldState) -> Result<FieldState> {
        match (&self.problem.equation, state) {
            (Equation::Kdv, FieldState::Real(u))
            | (Equation::ScaledKdv { .. }, FieldState::Real(u))
            | (Equation::HigherDerivOrder { .. }, FieldState::Real(u)) => {
                Ok(FieldState::Real(self.kdv_nonlinear(u)))
            }
            (Equation::DeformedKdv { spec }, FieldState::Real(u)) => {
                let mut rhs = self.kdv_nonlinear(u);
                match spec {
                    DeformationSpec::None => {}
                    DeformationSpec::LocalTerm { family, epsilon } => match family {
                        // uu_xx and u^(2n) anomalies are linear; absorbed in
                        // the propagator, nothing to do here
                        LocalFamily::Uuxx | LocalFamily::Ud2n(_) => {}
                        LocalFamily::PowerUx(m) => {
                            let p = self.power_ux_term(u, *m, *epsilon);
                            rhs = rhs.zip(&p, |a, b| a + b);
                        }
                    },
                    DeformationSpec::PowerDef { epsilon } => {
                        if u.values.iter().any(|&v| v <= U_FLOOR) {
                            return Err(QiError::domain(
                                "power deformation needs a strictly positive field",
                            ));
                        }
                        // X = 2u^2 - 2(1+eps) u^{2+3eps}; rhs += X_x
                        let p = 2.0 + 3.0 * epsilon;
                        let c = 2.0 * (1.0 + epsilon);
                        let x = u.map(|v| 2.0 * v * v - c * v.powf(p));
                        let xx = self.sp.deriv(&x, 1);
                        rhs = rhs.zip(&xx, |a, b| a + b);
                    }
                }
                Ok(FieldState::Real(rhs))
            }
            (Equation::HigherDerivPower { m, epsilon }, FieldState::Real(u)) => {
                let mut rhs = self.kdv_nonlinear(u);
                let p = self.power_ux_term(u, *m, *epsilon);
                rhs = rhs.zip(&p, |a, b| a + b);
                Ok(FieldState::Real(rhs))
            }
            (Equation::LogKdv { epsilon, drop_log }, FieldState::Real(u)) => {
                if !drop_log && u.values.iter().any(|&v| v <= U_FLOOR) {
                    return Err(QiError::domain(
                        "logarithmic deformation needs a strictly positive field",
                    ));
                }
                // -(6 + 10 eps) u u_x - 12 eps ln(u) u u_x
                let ux = self.sp.deriv(u, 1);
                let c = 6.0 + 10.0 * epsilon;
                let raw = GridField::from_values(
                    u.length,
                    (0..u.n())
                        .map(|i| {
                            let v = u.values[i];
                            let mut r = -c * v * ux.values[i];
                            if !drop_log {
                                r -= 12.0 * epsilon * v.ln() * v * ux.values[i];
                            }
                            r
                        })
                        .collect(),
                );
                Ok(FieldState::Real(self.sp.dealias_field(&raw)))
            }
            (Equation::Nls { k0, beta }, FieldState::Complex(p)) => {
                // -i (6 beta / k0) |phi|^2 phi, dealiased
                let cubic = ComplexField::from_values(
                    p.length,
                    p.values.iter().map(|v| v * v.norm_sqr()).collect(),
                );
                let cubic = self.sp.dealias_field_c(&cubic);
                let c = Complex64::new(0.0, -6.0 * beta / k0);
                Ok(FieldState::Complex(ComplexField::from_values(
                    p.length,
                    cubic.values.iter().map(|v| c * v).collect(),
                )))
            }
            (Equation::CoupledKdv { spec_q, spec_qbar }, FieldState::Pair { q, qbar }) => {
                let (dq, dqbar) = self.coupled_nonlinear(q, qbar, spec_q, spec_qbar);
                Ok(FieldState::Pair { q: dq, qbar: dqbar })
            }
            _ => Err(QiError::validation(
                "state field type does not match the equation",
            )),
        }
    }

    /// -3 (u^2)_x with dealiased square.
    fn kdv_nonlinear(&self, u: &GridField) -> GridField {
        let sq = self.sp.dealiased_product(u, u);
        self.sp.deriv(&sq, 1).map(|v| -3.0 * v)
    }

    /// eps ((u_x)^{m-1})_xx
    fn power_ux_term(&self, u: &GridField, m: u32, epsilon: f64) -> GridField {
        let ux = self.sp.deriv(u, 1);
        let pw = self.sp.dealias_field(&ux.map(|v| v.powi(m as i32 - 1)));
        self.sp.deriv(&pw, 2).map(|v| epsilon * v)
    }

    /// Nonlinear parts of the coupled system. Each Hamiltonian may carry a
    /// local deformation; its residual term Delta enters as
    ///   qbar_t += (2/3) (q Delta_qbar)_x,  q_t -= (2/3) (qbar Delta_q)_x.
    fn coupled_nonlinear(
        &self,
        q: &ComplexField,
        qbar: &ComplexField,
        spec_q: &DeformationSpec,
        spec_qbar: &DeformationSpec,
    ) -> (ComplexField, ComplexField) {
        let n = q.n();
        let qx = self.sp.deriv_c(q, 1);
        let qbarx = self.sp.deriv_c(qbar, 1);
        // products dealiased after assembly; cubic terms need the 2/3 rule
        let mut dq = ComplexField::from_values(
            q.length,
            (0..n)
                .map(|i| 6.0 * q.values[i] * qbar.values[i] * qx.values[i])
                .collect(),
        );
        let mut dqbar = ComplexField::from_values(
            q.length,
            (0..n)
                .map(|i| -6.0 * q.values[i] * qbar.values[i] * qbarx.values[i])
                .collect(),
        );
        dq = self.sp.dealias_field_c(&dq);
        dqbar = self.sp.dealias_field_c(&dqbar);
        if let Some(delta) = local_residual_c(&self.sp, qbar, spec_qbar) {
            // (2/3)(q * Delta_qbar)_x added to qbar_t
            let prod = ComplexField::from_values(
                q.length,
                (0..n).map(|i| q.values[i] * delta.values[i]).collect(),
            );
            let d = self.sp.deriv_c(&self.sp.dealias_field_c(&prod), 1);
            for i in 0..n {
                dqbar.values[i] += (2.0 / 3.0) * d.values[i];
            }
        }
        if let Some(delta) = local_residual_c(&self.sp, q, spec_q) {
            let prod = ComplexField::from_values(
                q.length,
                (0..n).map(|i| qbar.values[i] * delta.values[i]).collect(),
            );
            let d = self.sp.deriv_c(&self.sp.dealias_field_c(&prod), 1);
            for i in 0..n {
                dq.values[i] -= (2.0 / 3.0) * d.values[i];
            }
        }
        (dq, dqbar)
    }

    /// One integrating-factor RK4 step.
    pub fn step(&self, state: &FieldState, t: f64) -> Result<FieldState> {
        let dt = self.problem.dt;
        let hats = self.to_hats(state);
        let k1 = self.nl_hats(state)?;
        let s2 = self.from_hats(&propagate(&hats_axpy(&hats, &k1, dt / 2.0), &self.e_half), state);
        let k2 = self.nl_hats(&s2)?;
        let s3 = self.from_hats(
            &hats_axpy(&propagate(&hats, &self.e_half), &k2, dt / 2.0),
            state,
        );
        let k3 = self.nl_hats(&s3)?;
        let e_full: Vec<Complex64> = self.e_half.iter().map(|e| e * e).collect();
        let s4 = self.from_hats(
            &hats_axpy(
                &propagate(&hats, &e_full),
                &propagate(&k3, &self.e_half),
                dt,
            ),
            state,
        );
        let k4 = self.nl_hats(&s4)?;
        // u_{n+1} = E2 u + dt/6 (E2 k1 + 2 E1 (k2 + k3) + k4)
        let mut out = propagate(&hats, &e_full);
        let t1 = propagate(&k1, &e_full);
        let t23 = propagate(&hats_add(&k2, &k3), &self.e_half);
        for c in 0..out.len() {
            for i in 0..out[c].len() {
                out[c][i] +=
                    dt / 6.0 * (t1[c][i] + 2.0 * t23[c][i] + k4[c][i]);
            }
        }
        let next = self.from_hats(&out, state);
        if !next.is_finite() {
            return Err(QiError::BlowUp {
                t: t + dt,
                detail: format!("max |u| before failure {:.3e}", state.max_abs()),
            });
        }
        Ok(next)
    }

    fn to_hats(&self, state: &FieldState) -> Vec<Vec<Complex64>> {
        match state {
            FieldState::Real(u) => vec![self.sp.fft(&u.values)],
            FieldState::Complex(p) => vec![self.sp.fft_c(&p.values)],
            FieldState::Pair { q, qbar } => {
                vec![self.sp.fft_c(&q.values), self.sp.fft_c(&qbar.values)]
            }
        }
    }

    fn from_hats(&self, hats: &[Vec<Complex64>], shape: &FieldState) -> FieldState {
        let l = shape.length();
        match shape {
            FieldState::Real(_) => {
                FieldState::Real(GridField::from_values(l, self.sp.ifft_real(&hats[0])))
            }
            FieldState::Complex(_) => {
                FieldState::Complex(ComplexField::from_values(l, self.sp.ifft(&hats[0])))
            }
            FieldState::Pair { .. } => FieldState::Pair {
                q: ComplexField::from_values(l, self.sp.ifft(&hats[0])),
                qbar: ComplexField::from_values(l, self.sp.ifft(&hats[1])),
            },
        }
    }

    fn nl_hats(&self, state: &FieldState) -> Result<Vec<Vec<Complex64>>> {
        let nl = self.nonlinear(state)?;
        Ok(self.to_hats(&nl))
    }
}

/// Linear symbol L(k) such that u_t = L u + (nonlinear terms).
fn linear_symbol(eq: &Equation, sp: &Spectral) -> Vec<Complex64> {
    let k = &sp.k;
    match eq {
        Equation::Kdv
        | Equation::HigherDerivPower { .. }
        | Equation::LogKdv { .. }
        | Equation::CoupledKdv { .. } => {
            // u_t = -u_xxx: symbol i k^3
            k.iter().map(|&kk| Complex64::new(0.0, kk * kk * kk)).collect()
        }
        Equation::ScaledKdv { epsilon } => k
            .iter()
            .map(|&kk| Complex64::new(0.0, (1.0 - epsilon) * kk * kk * kk))
            .collect(),
        Equation::DeformedKdv { spec } => {
            let mut eps_uxxx = 0.0;
            let mut ud2n: Option<(u32, f64)> = None;
            if let DeformationSpec::LocalTerm { family, epsilon } = spec {
                match family {
                    // X_x = eps u_xxx joins the propagator
                    LocalFamily::Uuxx => eps_uxxx = *epsilon,
                    // X_x = eps u^{(2n+1)} joins the propagator
                    LocalFamily::Ud2n(nn) => ud2n = Some((*nn, *epsilon)),
                    LocalFamily::PowerUx(_) => {}
                }
            }
            k.iter()
                .map(|&kk| {
                    let mut s = Complex64::new(0.0, (1.0 - eps_uxxx) * kk * kk * kk);
                    if let Some((nn, eps)) = ud2n {
                        // (ik)^{2n+1} = i (-1)^n k^{2n+1}
                        let sign = if nn % 2 == 0 { 1.0 } else { -1.0 };
                        s += Complex64::new(0.0, eps * sign * kk.powi(2 * nn as i32 + 1));
                    }
                    s
                })
                .collect()
        }
        Equation::HigherDerivOrder { n, epsilon } => k
            .iter()
            .map(|&kk| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(
                    0.0,
                    kk * kk * kk + epsilon * sign * kk.powi(2 * *n as i32 + 1),
                )
            })
            .collect(),
        Equation::Nls { k0, .. } => {
            // phi_T = -3 i k0 phi_XX: symbol 3 i k0 k^2
            k.iter()
                .map(|&kk| Complex64::new(0.0, 3.0 * k0 * kk * kk))
                .collect()
        }
    }
}

/// Deformation residual Delta = (dH/du - base) for local families, applied
/// to a complex amplitude. None when the spec adds nothing.
pub fn local_residual_c(
    sp: &Spectral,
    f: &ComplexField,
    spec: &DeformationSpec,
) -> Option<ComplexField> {
    match spec {
        DeformationSpec::None | DeformationSpec::PowerDef { .. } => None,
        DeformationSpec::LocalTerm { family, epsilon } => {
            let out = match family {
                LocalFamily::Uuxx => {
                    let fxx = sp.deriv_c(f, 2);
                    ComplexField::from_values(
                        f.length,
                        fxx.values.iter().map(|v| 1.5 * epsilon * v).collect(),
                    )
                }
                LocalFamily::PowerUx(m) => {
                    let fx = sp.deriv_c(f, 1);
                    let pw = ComplexField::from_values(
                        f.length,
                        fx.values.iter().map(|v| v.powi(*m as i32 - 1)).collect(),
                    );
                    let d = sp.deriv_c(&sp.dealias_field_c(&pw), 1);
                    ComplexField::from_values(
                        f.length,
                        d.values.iter().map(|v| 1.5 * epsilon * v).collect(),
                    )
                }
                LocalFamily::Ud2n(n) => {
                    let mut d = f.clone();
                    for _ in 0..*n {
                        d = sp.deriv_c(&d, 2);
                    }
                    ComplexField::from_values(
                        f.length,
                        d.values.iter().map(|v| 1.5 * epsilon * v).collect(),
                    )
                }
            };
            Some(out)
        }
    }
}

fn to_complex(u: &GridField) -> ComplexField {
    ComplexField::from_values(
        u.length,
        u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    )
}

fn re_part(f: &ComplexField) -> GridField {
    GridField::from_values(f.length, f.values.iter().map(|v| v.re).collect())
}

fn add_states(a: &FieldState, b: &FieldState) -> FieldState {
    match (a, b) {
        (FieldState::Real(x), FieldState::Real(y)) => FieldState::Real(x.zip(y, |p, q| p + q)),
        (FieldState::Complex(x), FieldState::Complex(y)) => {
            FieldState::Complex(ComplexField::from_values(
                x.length,
                (0..x.n()).map(|i| x.values[i] + y.values[i]).collect(),
            ))
        }
        (
            FieldState::Pair { q: xq, qbar: xb },
            FieldState::Pair { q: yq, qbar: yb },
        ) => FieldState::Pair {
            q: ComplexField::from_values(
                xq.length,
                (0..xq.n()).map(|i| xq.values[i] + yq.values[i]).collect(),
            ),
            qbar: ComplexField::from_values(
                xb.length,
                (0..xb.n()).map(|i| xb.values[i] + yb.values[i]).collect(),
            ),
        },
        _ => unreachable!("mismatched state shapes"),
    }
}

fn propagate(hats: &[Vec<Complex64>], e: &[Complex64]) -> Vec<Vec<Complex64>> {
    hats.iter()
        .map(|h| h.iter().zip(e.iter()).map(|(a, b)| a * b).collect())
        .collect()
}

fn hats_axpy(a: &[Vec<Complex64>], b: &[Vec<Complex64>], s: f64) -> Vec<Vec<Complex64>> {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| p + s * q).collect())
        .collect()
}

fn hats_add(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    hats_axpy(a, b, 1.0)
}

/// Evolve to t_end, sampling every `sample_every` steps (and always the
/// initial and final states).
pub fn evolve(
    u0: &FieldState,
    problem: &EvolutionProblem,
    sample_every: usize,
) -> Result<Vec<TrajectorySample>> {
    if let FieldState::Real(u) = u0 {
        u.check()?;
    }
    let stepper = Stepper::new(*problem, u0.length(), u0.n())?;
    let nsteps = if problem.t_end == 0.0 {
        0
    } else {
        (problem.t_end / problem.dt).round() as usize
    };
    let mut out = Vec::new();
    let mut state = u0.clone();
    out.push(TrajectorySample {
        t: 0.0,
        field: state.clone(),
        diagnostics: Vec::new(),
    });
    for step_idx in 0..nsteps {
        let t = step_idx as f64 * problem.dt;
        state = stepper.step(&state, t)?;
        let done = step_idx + 1 == nsteps;
        if done || (sample_every > 0 && (step_idx + 1) % sample_every == 0) {
            out.push(TrajectorySample {
                t: (step_idx + 1) as f64 * problem.dt,
                field: state.clone(),
                diagnostics: Vec::new(),
            });
        }
    }
    Ok(out)
}

/// Soliton of the scaled equation: (c/2) sech^2(sqrt(c/(4(1-eps))) (x - c t - x0 + c t0)).
/// eps = 0 gives the standard profile.
pub fn soliton_scaled(c: f64, eps: f64, x0: f64, t0: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, t| {
        let w = (c / (4.0 * (1.0 - eps))).sqrt();
        let s = 1.0 / (w * (x - c * t - x0 + c * t0)).cosh();
        c / 2.0 * s * s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soliton_field(length: f64, n: usize, c: f64, x0: f64) -> GridField {
        let f = soliton_scaled(c, 0.0, x0, 0.0);
        GridField::from_fn(length, n, |x| f(x, 0.0)).unwrap()
    }

    #[test]
    fn kdv_rhs_closed_form() {
        let length = 32.0;
        let n = 256;
        let k1 = 2.0 * std::f64::consts::PI / length;
        let u = GridField::from_fn(length, n, |x| (k1 * x).sin()).unwrap();
        let st = Stepper::new(
            EvolutionProblem {
                equation: Equation::Kdv,
                dt: 1e-4,
                t_end: 1.0,
            },
            length,
            n,
        )
        .unwrap();
        let rhs = st.rhs(&FieldState::Real(u.clone())).unwrap();
        let FieldState::Real(r) = rhs else { panic!() };
        for (i, x) in u.x_iter().enumerate() {
            let s = (k1 * x).sin();
            let cx = (k1 * x).cos();
            let want = -6.0 * s * k1 * cx + k1 * k1 * k1 * cx;
            assert!((r.values[i] - want).abs() < 1e-10, "at x={x}");
        }
    }

    #[test]
    fn soliton_transport() {
        let length = 40.0;
        let n = 512;
        let c = 4.0;
        let u0 = soliton_field(length, n, c, -10.0);
        let problem = EvolutionProblem {
            equation: Equation::Kdv,
            dt: 1e-4,
            t_end: 1.0,
        };
        let traj = evolve(&FieldState::Real(u0), &problem, 0).unwrap();
        let FieldState::Real(uf) = &traj.last().unwrap().field else {
            panic!()
        };
        let exact = soliton_scaled(c, 0.0, -10.0, 0.0);
        let err = uf
            .x_iter()
            .enumerate()
            .map(|(i, x)| (uf.values[i] - exact(x, 1.0)).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-6, "transport error {err}");
    }

    #[test]
    fn deformed_uuxx_equals_scaled() {
        let length = 40.0;
        let n = 512;
        let eps = 0.1;
        let u0 = GridField::from_fn(length, n, |x| {
            let f = soliton_scaled(4.0, eps, -10.0, 0.0);
            f(x, 0.0)
        })
        .unwrap();
        let mk = |equation| EvolutionProblem {
            equation,
            dt: 2e-4,
            t_end: 0.2,
        };
        let a = evolve(
            &FieldState::Real(u0.clone()),
            &mk(Equation::DeformedKdv {
                spec: DeformationSpec::LocalTerm {
                    family: LocalFamily::Uuxx,
                    epsilon: eps,
                },
            }),
            100,
        )
        .unwrap();
        let b = evolve(
            &FieldState::Real(u0),
            &mk(Equation::ScaledKdv { epsilon: eps }),
            100,
        )
        .unwrap();
        for (sa, sb) in a.iter().zip(b.iter()) {
            let (FieldState::Real(fa), FieldState::Real(fb)) = (&sa.field, &sb.field) else {
                panic!()
            };
            let d = (0..fa.n())
                .map(|i| (fa.values[i] - fb.values[i]).abs())
                .fold(0.0f64, f64::max);
            assert!(d < 1e-10, "paths differ by {d} at t={}", sa.t);
        }
    }

    #[test]
    fn scaled_soliton_shape_invariant() {
        let length = 40.0;
        let n = 512;
        let c = 4.0;
        let eps = 0.1;
        let f = soliton_scaled(c, eps, -10.0, 0.0);
        let u0 = GridField::from_fn(length, n, |x| f(x, 0.0)).unwrap();
        let problem = EvolutionProblem {
            equation: Equation::ScaledKdv { epsilon: eps },
            dt: 1e-4,
            t_end: 1.0,
        };
        let traj = evolve(&FieldState::Real(u0), &problem, 0).unwrap();
        let FieldState::Real(uf) = &traj.last().unwrap().field else {
            panic!()
        };
        let err = uf
            .x_iter()
            .enumerate()
            .map(|(i, x)| (uf.values[i] - f(x, 1.0)).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-5, "shape error {err}");
    }

    #[test]
    fn temporal_order_is_four() {
        let length = 40.0;
        let n = 256;
        let u0 = soliton_field(length, n, 4.0, -10.0);
        let run = |dt: f64| {
            let problem = EvolutionProblem {
                equation: Equation::Kdv,
                dt,
                t_end: 0.1,
            };
            let traj = evolve(&FieldState::Real(u0.clone()), &problem, 0).unwrap();
            match &traj.last().unwrap().field {
                FieldState::Real(u) => u.clone(),
                _ => panic!(),
            }
        };
        let reference = run(2.5e-4 / 8.0);
        let err = |u: &GridField| {
            (0..u.n())
                .map(|i| (u.values[i] - reference.values[i]).abs())
                .fold(0.0f64, f64::max)
        };
        let e1 = err(&run(2.5e-4));
        let e2 = err(&run(1.25e-4));
        let ratio = e1 / e2;
        assert!(
            (10.0..26.0).contains(&ratio),
            "expected ~16x error reduction, got {ratio} ({e1} -> {e2})"
        );
    }

    #[test]
    fn undeformed_invariants_hold() {
        let length = 40.0;
        let n = 512;
        let u0 = soliton_field(length, n, 4.0, -10.0);
        let problem = EvolutionProblem {
            equation: Equation::Kdv,
            dt: 1e-4,
            t_end: 1.0,
        };
        let traj = evolve(&FieldState::Real(u0.clone()), &problem, 0).unwrap();
        let FieldState::Real(uf) = &traj.last().unwrap().field else {
            panic!()
        };
        let sp = Spectral::new(length, n);
        let quad3 = |u: &GridField| {
            let ux = sp.deriv(u, 1);
            let mass = u.integrate();
            let mom: f64 = u.values.iter().map(|v| v * v).sum::<f64>() * u.h();
            let ham: f64 = (0..n)
                .map(|i| 0.5 * ux.values[i] * ux.values[i] - u.values[i].powi(3))
                .sum::<f64>()
                * u.h();
            (mass, mom, ham)
        };
        let (m0, p0, h0) = quad3(&u0);
        let (m1, p1, h1) = quad3(uf);
        assert!(((m1 - m0) / m0).abs() < 1e-8);
        assert!(((p1 - p0) / p0).abs() < 1e-8);
        assert!(((h1 - h0) / h0).abs() < 1e-8);
    }

    #[test]
    fn spectral_tail_stays_small() {
        let length = 40.0;
        let n = 512;
        let u0 = soliton_field(length, n, 4.0, -10.0);
        let problem = EvolutionProblem {
            equation: Equation::Kdv,
            dt: 1e-4,
            t_end: 1.0,
        };
        let traj = evolve(&FieldState::Real(u0), &problem, 0).unwrap();
        let FieldState::Real(uf) = &traj.last().unwrap().field else {
            panic!()
        };
        let sp = Spectral::new(length, n);
        assert!(sp.tail_energy_fraction(uf) < 1e-10);
    }

    #[test]
    fn coupled_reduction_matches_real_kdv() {
        let length = 40.0;
        let n = 512;
        let u0 = soliton_field(length, n, 4.0, -10.0);
        let ones = ComplexField::from_fn(length, n, |_| Complex64::new(1.0, 0.0)).unwrap();
        let qbar0 = ComplexField::from_values(
            length,
            u0.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        );
        let problem = EvolutionProblem {
            equation: Equation::CoupledKdv {
                spec_q: DeformationSpec::None,
                spec_qbar: DeformationSpec::None,
            },
            dt: 1e-4,
            t_end: 0.5,
        };
        let traj = evolve(
            &FieldState::Pair {
                q: ones,
                qbar: qbar0,
            },
            &problem,
            0,
        )
        .unwrap();
        let FieldState::Pair { q, qbar } = &traj.last().unwrap().field else {
            panic!()
        };
        let real_problem = EvolutionProblem {
            equation: Equation::Kdv,
            dt: 1e-4,
            t_end: 0.5,
        };
        let rtraj = evolve(&FieldState::Real(u0), &real_problem, 0).unwrap();
        let FieldState::Real(ur) = &rtraj.last().unwrap().field else {
            panic!()
        };
        let dq = q
            .values
            .iter()
            .map(|v| (v - Complex64::new(1.0, 0.0)).norm())
            .fold(0.0f64, f64::max);
        let du = (0..n)
            .map(|i| (qbar.values[i] - Complex64::new(ur.values[i], 0.0)).norm())
            .fold(0.0f64, f64::max);
        assert!(dq < 1e-8, "q drifted from 1 by {dq}");
        assert!(du < 1e-8, "qbar differs from the real run by {du}");
    }

    #[test]
    fn log_kdv_limits_to_kdv() {
        let length = 40.0;
        let n = 256;
        // strictly positive field for the logarithm
        let u0 = GridField::from_fn(length, n, |x| {
            0.5 + 2.0 / (0.5 * x).cosh().powi(2)
        })
        .unwrap();
        let run = |equation| {
            let problem = EvolutionProblem {
                equation,
                dt: 1e-4,
                t_end: 0.1,
            };
            let traj = evolve(&FieldState::Real(u0.clone()), &problem, 0).unwrap();
            match &traj.last().unwrap().field {
                FieldState::Real(u) => u.clone(),
                _ => panic!(),
            }
        };
        let base = run(Equation::Kdv);
        let diff = |eps: f64| {
            let u = run(Equation::LogKdv {
                epsilon: eps,
                drop_log: false,
            });
            (0..n)
                .map(|i| (u.values[i] - base.values[i]).abs())
                .fold(0.0f64, f64::max)
        };
        let d1 = diff(0.02);
        let d2 = diff(0.01);
        let ratio = d1 / d2;
        assert!(
            (1.7..2.3).contains(&ratio),
            "expected linear-in-eps approach, ratio {ratio}"
        );
    }

    #[test]
    fn nls_plane_wave_phase() {
        // phi = A exp(i(kX - wT)) with w = 3 k0 k^2 + 6 beta A^2 / k0
        let length = 2.0 * std::f64::consts::PI * 8.0;
        let n = 128;
        let k0 = 2.0;
        let beta = 1.0;
        let kw = 2.0 * std::f64::consts::PI / length * 4.0;
        let amp = 0.3;
        let phi0 = ComplexField::from_fn(length, n, |x| {
            amp * Complex64::new(0.0, kw * x).exp()
        })
        .unwrap();
        let problem = EvolutionProblem {
            equation: Equation::Nls { k0, beta },
            dt: 1e-4,
            t_end: 0.5,
        };
        let traj = evolve(&FieldState::Complex(phi0.clone()), &problem, 0).unwrap();
        let FieldState::Complex(pf) = &traj.last().unwrap().field else {
            panic!()
        };
        let w = -3.0 * k0 * kw * kw + 6.0 * beta * amp * amp / k0;
        for (i, x) in phi0.x_iter().enumerate() {
            let want = amp * Complex64::new(0.0, kw * x - w * 0.5).exp();
            assert!(
                (pf.values[i] - want).norm() < 1e-8,
                "plane wave mismatch at x={x}"
            );
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let length = 40.0;
        let n = 128;
        // huge amplitude with a coarse step guarantees numerical failure
        let u0 = GridField::from_fn(length, n, |x| 5e3 / (0.5 * x).cosh().powi(2)).unwrap();
        let problem = EvolutionProblem {
            equation: Equation::Kdv,
            dt: 0.05,
            t_end: 1.0,
        };
        match evolve(&FieldState::Real(u0), &problem, 0) {
            Err(QiError::BlowUp { .. }) => {}
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let st = Stepper::new(
            EvolutionProblem {
                equation: Equation::Kdv,
                dt: 1e-4,
                t_end: 1.0,
            },
            40.0,
            64,
        )
        .unwrap();
        let phi = ComplexField::from_fn(40.0, 64, |_| Complex64::new(0.0, 0.0)).unwrap();
        assert!(st.rhs(&FieldState::Complex(phi)).is_err());
    }
}
