//! Order-by-order gauge coefficients and the rotated Lax components.
//!
//! The spatial rotation removes the off-diagonal generators order by order.
//! The zeroth order is a scalar Riccati flow in x; orders one and two are
//! linear in their top-order unknowns. All displayed coefficient formulas
//! are evaluated at spectral-parameter value one, so the inverse-parameter
//! terms of the zeroth-order equations fold onto the same grade.

use crate::deformations::{anomaly, DeformationSpec};
use crate::error::{QiError, Result};
use crate::grid::{refine, GridField, Spectral};

/// Base of the natural logarithm; the gauge normalization constant.
pub const E: f64 = std::f64::consts::E;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Components beyond this magnitude count as a finite-x blow-up.
pub const BLOW_UP_THRESHOLD: f64 = 1e8;

/// Default Fourier refinement for the in-x integrations. Step size becomes
/// h / (factor / 2) since RK4 midpoints land on fine nodes.
pub const DEFAULT_REFINE: usize = 8;

#[derive(Debug, Clone)]
pub struct GaugeCoefficients {
    /// highest solved order (0, 1, or 2)
    pub order: usize,
    pub a1: Vec<GridField>,
    pub a2: Vec<GridField>,
    /// a1[0] - a2[0], the Riccati unknown
    pub a_minus0: GridField,
    /// a1[0] + a2[0]
    pub a_plus0: GridField,
    /// x where the integration blew up, if it did; values past it are zero
    pub singular: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub a: GridField,
    pub singular: Option<f64>,
}

/// RK4 in x over a refined grid, two fine nodes per step so midpoints are
/// exact samples. Returns values on the coarse grid and the first blow-up
/// location.
fn integrate_system<const M: usize>(
    u: &GridField,
    factor: usize,
    start_index: usize,
    y0: [f64; M],
    rhs: impl Fn(f64, &[f64; M]) -> [f64; M],
) -> (Vec<[f64; M]>, Option<f64>) {
    assert!(factor >= 2 && factor.is_power_of_two());
    let uf = refine(u, factor);
    let n = u.n();
    let nf = uf.n();
    let hf = uf.h();
    let mut coarse = vec![[0.0; M]; n];
    let mut y = y0;
    coarse[start_index] = y;
    let mut singular = None;
    let fine_start = start_index * factor;
    'outer: for s in 0..(n - 1 - start_index) * factor / 2 {
        let j = fine_start + 2 * s;
        let (u0, um, u1) = (uf.values[j], uf.values[j + 1], uf.values[(j + 2) % nf]);
        let h = 2.0 * hf;
        let k1 = rhs(u0, &y);
        let y2 = axpy(&y, &k1, h / 2.0);
        let k2 = rhs(um, &y2);
        let y3 = axpy(&y, &k2, h / 2.0);
        let k3 = rhs(um, &y3);
        let y4 = axpy(&y, &k3, h);
        let k4 = rhs(u1, &y4);
        for i in 0..M {
            y[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        if y.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD) {
            singular = Some(u.x(start_index) + (s + 1) as f64 * h);
            break 'outer;
        }
        if (j + 2 - fine_start) % factor == 0 {
            let idx = start_index + (j + 2 - fine_start) / factor;
            if idx < n {
                coarse[idx] = y;
            }
        }
    }
    (coarse, singular)
}

fn axpy<const M: usize>(y: &[f64; M], k: &[f64; M], s: f64) -> [f64; M] {
    let mut out = *y;
    for i in 0..M {
        out[i] += s * k[i];
    }
    out
}

/// Zeroth-order Riccati flow for a0_minus:
///   a_x = -(u / sqrt2 e) a^2 - sqrt2 e,
/// integrated from (x_start, a0). A blow-up is recorded, not an error.
pub fn solve_riccati_zeroth(
    u: &GridField,
    x_start: f64,
    a0: f64,
    factor: usize,
) -> Result<RiccatiSolution> {
    u.check()?;
    let start_index = grid_index(u, x_start)?;
    let (vals, singular) = integrate_system::<1>(u, factor, start_index, [a0], |uv, y| {
        [-(uv / (SQRT2 * E)) * y[0] * y[0] - SQRT2 * E]
    });
    Ok(RiccatiSolution {
        a: GridField::from_values(u.length, vals.iter().map(|v| v[0]).collect()),
        singular,
    })
}

fn grid_index(u: &GridField, x_start: f64) -> Result<usize> {
    let idx = (x_start + u.length / 2.0) / u.h();
    let j = idx.round();
    if (idx - j).abs() > 1e-9 || j < 0.0 || j as usize >= u.n() {
        return Err(QiError::validation(format!(
            "x_start = {x_start} is not a grid point"
        )));
    }
    Ok(j as usize)
}

/// Solve the gauge system through `order` (0..=2) with zero data at the left
/// domain edge. The six displayed order-by-order equations are integrated as
/// one coupled pass so every order sees the same zeroth-order path.
pub fn solve_gauge(u: &GridField, order: usize, factor: usize) -> Result<GaugeCoefficients> {
    u.check()?;
    if order > 2 {
        return Err(QiError::validation(
            "displayed gauge system stops at order 2",
        ));
    }
    // y = [a1_0, a2_0, a1_1, a2_1, a1_2, a2_2]
    let (vals, singular) = integrate_system::<6>(u, factor, 0, [0.0; 6], |uv, y| {
        gauge_rhs(uv, y)
    });
    let pick = |c: usize| GridField::from_values(u.length, vals.iter().map(|v| v[c]).collect());
    let a1: Vec<GridField> = (0..=order).map(|k| pick(2 * k)).collect();
    let a2: Vec<GridField> = (0..=order).map(|k| pick(2 * k + 1)).collect();
    let a_minus0 = a1[0].zip(&a2[0], |p, q| p - q);
    let a_plus0 = a1[0].zip(&a2[0], |p, q| p + q);
    Ok(GaugeCoefficients {
        order,
        a1,
        a2,
        a_minus0,
        a_plus0,
        singular,
    })
}

/// Displayed right-hand sides of the six lowest gauge equations, at
/// spectral-parameter value one.
fn gauge_rhs(u: f64, y: &[f64; 6]) -> [f64; 6] {
    let (a10, a20, a11, a21, a12, a22) = (y[0], y[1], y[2], y[3], y[4], y[5]);
    let ue = u / E;
    let dm0 = a10 - a20;
    let sp0 = a10 + a20;
    let dm1 = a11 - a21;
    let sp1 = a11 + a21;
    let dm2 = a12 - a22;
    let d00 = a10 * a10 - a20 * a20;
    let d01 = a10 * a11 - a20 * a21;
    let r10 = (ue * dm0 * a20 - (ue + E)) / SQRT2;
    let r20 = (ue * dm0 * a10 - (ue - E)) / SQRT2;
    let r11 = ue / SQRT2 * (dm0 * a21 + dm1 * a20) - E / SQRT2 * sp0 * a20;
    let r21 = ue / SQRT2 * (dm0 * a11 + dm1 * a10) - E / SQRT2 * sp0 * a10;
    let r12 = ue / SQRT2 * (dm0 * a22 + dm1 * a21 + dm2 * a20)
        - E / SQRT2 * (sp0 * a21 + sp1 * a20)
        - ue / (6.0 * SQRT2) * (2.0 * d01 * dm0 * a20 + d00 * (dm1 * a20 + dm0 * a21))
        + E / (6.0 * SQRT2) * d00 * sp0 * a20;
    let r22 = ue / SQRT2 * (dm0 * a12 + dm1 * a11 + dm2 * a10)
        - E / SQRT2 * (sp0 * a11 + sp1 * a10)
        - ue / (6.0 * SQRT2) * (2.0 * d01 * dm0 * a10 + d00 * (dm1 * a10 + dm0 * a11))
        + E / (6.0 * SQRT2) * d00 * sp0 * a10;
    [r10, r20, r11, r21, r12, r22]
}

/// Estimated time derivatives of the gauge coefficients from two frames.
#[derive(Debug, Clone)]
pub struct TimeDerivs {
    pub a1t: Vec<GridField>,
    pub a2t: Vec<GridField>,
}

pub fn estimate_time_derivs(
    prev: &GaugeCoefficients,
    next: &GaugeCoefficients,
    dt: f64,
) -> TimeDerivs {
    let order = prev.order.min(next.order);
    let diff = |a: &GridField, b: &GridField| a.zip(b, |p, q| (q - p) / dt);
    TimeDerivs {
        a1t: (0..=order).map(|k| diff(&prev.a1[k], &next.a1[k])).collect(),
        a2t: (0..=order).map(|k| diff(&prev.a2[k], &next.a2[k])).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct RotatedLax {
    pub beta_a: Vec<GridField>,
    pub beta_b: Vec<GridField>,
    /// f0 through the order labeled 2; the second displayed "order 2" entry
    /// is exposed separately below
    pub f0: Vec<GridField>,
    pub f0_3_presumed: Option<GridField>,
    pub f1: Vec<GridField>,
    pub f2: Vec<GridField>,
    pub f1_2_presumed: Option<GridField>,
    pub f2_2_presumed: Option<GridField>,
    /// only present when time derivatives were supplied
    pub phi1: Vec<GridField>,
    pub phi2: Vec<GridField>,
}

/// Evaluate every displayed rotated-Lax coefficient. The trailing-ellipsis
/// truncations at order two are computed exactly as displayed.
pub fn assemble_rotated(
    u: &GridField,
    coeffs: &GaugeCoefficients,
    spec: &DeformationSpec,
    time_derivs: Option<&TimeDerivs>,
) -> Result<RotatedLax> {
    u.check()?;
    let order = coeffs.order;
    let sp = Spectral::for_field(u);
    let ux = sp.deriv(u, 1);
    let uxx = sp.deriv(u, 2);
    let x = anomaly(u, spec)?;
    // f(u) = u_xx - X + 2 u^2
    let f = GridField::from_values(
        u.length,
        (0..u.n())
            .map(|i| uxx.values[i] - x.values[i] + 2.0 * u.values[i] * u.values[i])
            .collect(),
    );
    let n = u.n();
    let a1 = &coeffs.a1;
    let a2 = &coeffs.a2;
    let g = |v: &GridField, i: usize| v.values[i];

    let mut beta_a = Vec::new();
    let mut beta_b = Vec::new();
    for ord in 0..=order {
        let mut va = Vec::with_capacity(n);
        let mut vb = Vec::with_capacity(n);
        for i in 0..n {
            let ue = u.values[i] / E;
            let fe = f.values[i] / E;
            let (va_i, vb_i) = match ord {
                0 => {
                    let dm0 = g(&a1[0], i) - g(&a2[0], i);
                    (
                        ue * dm0 / SQRT2,
                        -ux.values[i] - fe * dm0 / SQRT2,
                    )
                }
                1 => {
                    let dm0 = g(&a1[0], i) - g(&a2[0], i);
                    let sp0 = g(&a1[0], i) + g(&a2[0], i);
                    let dm1 = g(&a1[1], i) - g(&a2[1], i);
                    let d00 = g(&a1[0], i).powi(2) - g(&a2[0], i).powi(2);
                    (
                        ue * dm1 / SQRT2 - E * sp0 / SQRT2 - ue / (3.0 * SQRT2) * d00 * dm0,
                        -fe * dm1 / SQRT2 + SQRT2 * E * u.values[i] * sp0,
                    )
                }
                2 => {
                    let dm0 = g(&a1[0], i) - g(&a2[0], i);
                    let sp0 = g(&a1[0], i) + g(&a2[0], i);
                    let dm1 = g(&a1[1], i) - g(&a2[1], i);
                    let sp1 = g(&a1[1], i) + g(&a2[1], i);
                    let dm2 = g(&a1[2], i) - g(&a2[2], i);
                    let d00 = g(&a1[0], i).powi(2) - g(&a2[0], i).powi(2);
                    let d01 = g(&a1[0], i) * g(&a1[1], i) - g(&a2[0], i) * g(&a2[1], i);
                    let bracket = 2.0 * d01 * dm0 + d00 * dm1;
                    (
                        ue * dm2 / SQRT2 - E * sp1 / SQRT2 - ue / (3.0 * SQRT2) * bracket
                            + E / (3.0 * SQRT2) * d00 * sp0,
                        -fe * dm2 / SQRT2 + SQRT2 * E * u.values[i] * sp1
                            + fe / (3.0 * SQRT2) * bracket
                            - SQRT2 / 3.0 * E * u.values[i] * d00 * sp0,
                    )
                }
                _ => unreachable!(),
            };
            va.push(va_i);
            vb.push(vb_i);
        }
        beta_a.push(GridField::from_values(u.length, va));
        beta_b.push(GridField::from_values(u.length, vb));
    }

    // curvature coefficients
    let mut f0 = vec![GridField::from_values(u.length, vec![1.0; n])];
    let mut f1 = vec![a2[0].map(|v| -2.0 * v)];
    let mut f2 = vec![a1[0].map(|v| -2.0 * v)];
    let mut f0_3_presumed = None;
    let mut f1_2_presumed = None;
    let mut f2_2_presumed = None;
    if order >= 1 {
        let d00 = |i: usize| g(&a1[0], i).powi(2) - g(&a2[0], i).powi(2);
        f0.push(GridField::from_values(
            u.length,
            (0..n).map(|i| -d00(i)).collect(),
        ));
        f1.push(GridField::from_values(
            u.length,
            (0..n)
                .map(|i| 2.0 * (-g(&a2[1], i) + d00(i) / 3.0 * g(&a2[0], i)))
                .collect(),
        ));
        f2.push(GridField::from_values(
            u.length,
            (0..n)
                .map(|i| 2.0 * (-g(&a1[1], i) + d00(i) / 3.0 * g(&a1[0], i)))
                .collect(),
        ));
        if order >= 2 {
            let d01 = |i: usize| g(&a1[0], i) * g(&a1[1], i) - g(&a2[0], i) * g(&a2[1], i);
            let d11 = |i: usize| g(&a1[1], i).powi(2) - g(&a2[1], i).powi(2);
            let d02 = |i: usize| g(&a1[0], i) * g(&a1[2], i) - g(&a2[0], i) * g(&a2[2], i);
            f0.push(GridField::from_values(
                u.length,
                (0..n)
                    .map(|i| -2.0 * d01(i) + d00(i).powi(2) / 6.0)
                    .collect(),
            ));
            f0_3_presumed = Some(GridField::from_values(
                u.length,
                (0..n)
                    .map(|i| {
                        -2.0 * d02(i) - d11(i)
                            + 2.0 / 3.0 * d00(i) * (d01(i) - d00(i).powi(2) / 60.0)
                    })
                    .collect(),
            ));
            f1_2_presumed = Some(GridField::from_values(
                u.length,
                (0..n)
                    .map(|i| {
                        2.0 * (-g(&a2[2], i)
                            + 2.0 / 3.0 * d01(i) * g(&a2[0], i)
                            + d00(i) / 3.0 * g(&a2[1], i)
                            - d00(i).powi(2) / 30.0 * g(&a2[0], i))
                    })
                    .collect(),
            ));
            f2_2_presumed = Some(GridField::from_values(
                u.length,
                (0..n)
                    .map(|i| {
                        2.0 * (-g(&a1[2], i)
                            + 2.0 / 3.0 * d01(i) * g(&a1[0], i)
                            + d00(i) / 3.0 * g(&a1[1], i)
                            - d00(i).powi(2) / 30.0 * g(&a1[0], i))
                    })
                    .collect(),
            ));
        }
    }

    // temporal off-diagonal coefficients need a_t estimates
    let mut phi1 = Vec::new();
    let mut phi2 = Vec::new();
    if let Some(td) = time_derivs {
        let avail = order.min(td.a1t.len().saturating_sub(1));
        for ord in 0..=avail {
            let mut v1 = Vec::with_capacity(n);
            let mut v2 = Vec::with_capacity(n);
            for i in 0..n {
                let fe = f.values[i] / E;
                let uu = u.values[i];
                let uxv = ux.values[i];
                let (p1, p2) = match ord {
                    0 => (
                        g(&td.a1t[0], i) - (fe / SQRT2 + SQRT2 * E * uu)
                            + 2.0 * uxv * g(&a1[0], i),
                        g(&td.a2t[0], i) - (fe / SQRT2 - SQRT2 * E * uu)
                            + 2.0 * uxv * g(&a2[0], i),
                    ),
                    1 => {
                        let dm0 = g(&a1[0], i) - g(&a2[0], i);
                        let sp0 = g(&a1[0], i) + g(&a2[0], i);
                        let dm1 = g(&a1[1], i) - g(&a2[1], i);
                        (
                            g(&td.a1t[1], i) + 2.0 * uxv * g(&a1[1], i)
                                + fe / SQRT2 * (dm0 * g(&a2[1], i) + dm1 * g(&a2[0], i))
                                - SQRT2 * E * uu * sp0 * g(&a2[0], i),
                            g(&td.a2t[1], i) + 2.0 * uxv * g(&a2[1], i)
                                + fe / SQRT2 * (dm0 * g(&a1[1], i) + dm1 * g(&a1[0], i))
                                - SQRT2 * E * uu * sp0 * g(&a1[0], i),
                        )
                    }
                    2 => {
                        let dm0 = g(&a1[0], i) - g(&a2[0], i);
                        let sp0 = g(&a1[0], i) + g(&a2[0], i);
                        let dm1 = g(&a1[1], i) - g(&a2[1], i);
                        let sp1 = g(&a1[1], i) + g(&a2[1], i);
                        let dm2 = g(&a1[2], i) - g(&a2[2], i);
                        let d00 = g(&a1[0], i).powi(2) - g(&a2[0], i).powi(2);
                        let d01 =
                            g(&a1[0], i) * g(&a1[1], i) - g(&a2[0], i) * g(&a2[1], i);
                        let common = |ai0: f64, ai1: f64, ai2: f64| {
                            2.0 * uxv * ai2
                                + fe / SQRT2
                                    * (dm0 * ai2 + dm1 * ai1 + dm2 * ai0)
                                - SQRT2 * E * uu * (sp1 * ai0 + sp0 * ai1)
                                + E * uu / (3.0 * SQRT2) * d00 * sp0 * ai0
                                + fe / (6.0 * SQRT2)
                                    * (2.0 * d01 * (-dm0) * ai0
                                        + d00 * ((-dm1) * ai0 + (-dm0) * ai1))
                        };
                        (
                            g(&td.a1t[2], i)
                                + common(g(&a2[0], i), g(&a2[1], i), g(&a2[2], i)),
                            g(&td.a2t[2], i)
                                + common(g(&a1[0], i), g(&a1[1], i), g(&a1[2], i)),
                        )
                    }
                    _ => unreachable!(),
                };
                v1.push(p1);
                v2.push(p2);
            }
            phi1.push(GridField::from_values(u.length, v1));
            phi2.push(GridField::from_values(u.length, v2));
        }
    }

    Ok(RotatedLax {
        beta_a,
        beta_b,
        f0,
        f0_3_presumed,
        f1,
        f2,
        f1_2_presumed,
        f2_2_presumed,
        phi1,
        phi2,
    })
}

/// Residuals of the per-order quasi-continuity identity between two adjacent
/// frames: || (betaA_next - betaA_prev)/dt - d/dx betaB_mid - (X f0)_mid ||_inf.
pub fn verify_quasi_continuity(
    u_prev: &GridField,
    u_next: &GridField,
    coeffs_prev: &GaugeCoefficients,
    coeffs_next: &GaugeCoefficients,
    dt: f64,
    spec: &DeformationSpec,
) -> Result<Vec<f64>> {
    let order = coeffs_prev.order.min(coeffs_next.order);
    let rp = assemble_rotated(u_prev, coeffs_prev, spec, None)?;
    let rn = assemble_rotated(u_next, coeffs_next, spec, None)?;
    let sp = Spectral::for_field(u_prev);
    let xp = anomaly(u_prev, spec)?;
    let xn = anomaly(u_next, spec)?;
    let mut out = Vec::with_capacity(order + 1);
    for ord in 0..=order {
        let bb_mid = rp.beta_b[ord].zip(&rn.beta_b[ord], |a, b| 0.5 * (a + b));
        let dbb = sp.deriv(&bb_mid, 1);
        let rhs_mid = {
            let fp = &rp.f0[ord];
            let fn_ = &rn.f0[ord];
            GridField::from_values(
                u_prev.length,
                (0..u_prev.n())
                    .map(|i| {
                        0.5 * (xp.values[i] * fp.values[i] + xn.values[i] * fn_.values[i])
                    })
                    .collect(),
            )
        };
        let mut worst = 0.0f64;
        for i in 0..u_prev.n() {
            let gamma = (rn.beta_a[ord].values[i] - rp.beta_a[ord].values[i]) / dt
                - dbb.values[i];
            worst = worst.max((gamma - rhs_mid.values[i]).abs());
        }
        out.push(worst);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformations::DeformationSpec;

    fn soliton(length: f64, n: usize, c: f64, x0: f64) -> GridField {
        GridField::from_fn(length, n, |x| {
            let s = 1.0 / (0.5 * c.sqrt() * (x - x0)).cosh();
            c / 2.0 * s * s
        })
        .unwrap()
    }

    #[test]
    fn riccati_linear_solution_at_zero_field() {
        let u = GridField::zeros(40.0, 256).unwrap();
        let sol = solve_riccati_zeroth(&u, -20.0, 0.25, 4).unwrap();
        assert!(sol.singular.is_none());
        for j in 0..u.n() {
            let want = 0.25 - SQRT2 * E * (u.x(j) + 20.0);
            assert!(
                (sol.a.values[j] - want).abs() < 1e-10,
                "linear solution off at j={j}"
            );
        }
    }

    #[test]
    fn riccati_equilibrium_is_stationary() {
        // constant negative field: equilibria at a^2 = -2 e^2 / u0
        let u0 = -0.5;
        let u = GridField::from_fn(40.0, 256, |_| u0).unwrap();
        let a_star = -(2.0 * E * E / (-u0)).sqrt();
        let sol = solve_riccati_zeroth(&u, -20.0, a_star, 4).unwrap();
        assert!(sol.singular.is_none());
        for v in &sol.a.values {
            assert!((v - a_star).abs() < 1e-10);
        }
    }

    fn small_field() -> GridField {
        // gentle well: the coefficients stay smooth over the whole domain
        GridField::from_fn(100.0, 512, |x| {
            let s = 1.0 / (((x - 13.0) / 3.0).cosh());
            -5e-6 * s * s
        })
        .unwrap()
    }

    #[test]
    fn riccati_residual_bound() {
        let u = small_field();
        let sol = solve_riccati_zeroth(&u, -50.0, 0.0, 8).unwrap();
        assert!(sol.singular.is_none());
        // centered-difference residual of the flow equation
        let h = u.h();
        let mut fd_worst = 0.0f64;
        for j in 1..u.n() - 1 {
            let d = (sol.a.values[j + 1] - sol.a.values[j - 1]) / (2.0 * h);
            let r = d + u.values[j] / (SQRT2 * E) * sol.a.values[j] * sol.a.values[j]
                + SQRT2 * E;
            fd_worst = fd_worst.max(r.abs());
        }
        assert!(fd_worst < 1e-3, "fd residual {fd_worst}");
    }

    #[test]
    fn refinement_convergence() {
        let u = small_field();
        let a8 = solve_riccati_zeroth(&u, -50.0, 0.0, 8).unwrap();
        let a32 = solve_riccati_zeroth(&u, -50.0, 0.0, 32).unwrap();
        let d = (0..u.n())
            .map(|j| (a8.a.values[j] - a32.a.values[j]).abs())
            .fold(0.0f64, f64::max);
        assert!(d < 1e-8, "refinement difference {d}");
    }

    #[test]
    fn blow_up_is_recorded() {
        // strong positive field drives the Riccati flow to a pole
        let u = soliton(40.0, 512, 4.0, 0.0);
        let sol = solve_riccati_zeroth(&u, -20.0, 0.0, 8).unwrap();
        assert!(sol.singular.is_some(), "expected a finite-x pole");
        let x = sol.singular.unwrap();
        assert!(x > -20.0 && x < 20.0);
    }

    #[test]
    fn gauge_zeroth_matches_standalone_riccati() {
        let u = soliton(100.0, 512, 1.0, -20.0).map(|v| -1e-2 * v);
        let gc = solve_gauge(&u, 2, 8).unwrap();
        assert!(gc.singular.is_none());
        let r = solve_riccati_zeroth(&u, -50.0, 0.0, 8).unwrap();
        for j in 0..u.n() {
            assert!((gc.a_minus0.values[j] - r.a.values[j]).abs() < 1e-9);
            assert!(
                (gc.a_minus0.values[j] - (gc.a1[0].values[j] - gc.a2[0].values[j])).abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn order_one_zero_field_oracle() {
        // u = 0: a1_0 = -(x̃/sqrt2) e... both zeroth coefficients are linear,
        // and the order-one equations integrate to cubics in x̃ = x - x_left
        let u = GridField::zeros(20.0, 256).unwrap();
        let gc = solve_gauge(&u, 1, 8).unwrap();
        for j in 0..u.n() {
            let xt = u.x(j) + 10.0;
            let a10 = -E / SQRT2 * xt;
            let a20 = E / SQRT2 * xt;
            assert!((gc.a1[0].values[j] - a10).abs() < 1e-10);
            assert!((gc.a2[0].values[j] - a20).abs() < 1e-10);
            // a1_x^1 = -(e/sqrt2)(a1_0 + a2_0) a2_0 = 0 since a_plus = 0
            assert!(gc.a1[1].values[j].abs() < 1e-10);
            assert!(gc.a2[1].values[j].abs() < 1e-10);
        }
    }

    #[test]
    fn order_one_residual_by_back_substitution() {
        let u = small_field();
        let gc = solve_gauge(&u, 1, 8).unwrap();
        let h = u.h();
        let mut worst = 0.0f64;
        for j in 1..u.n() - 1 {
            let d = (gc.a1[1].values[j + 1] - gc.a1[1].values[j - 1]) / (2.0 * h);
            let uv = u.values[j];
            let dm0 = gc.a1[0].values[j] - gc.a2[0].values[j];
            let dm1 = gc.a1[1].values[j] - gc.a2[1].values[j];
            let sp0 = gc.a1[0].values[j] + gc.a2[0].values[j];
            let want = uv / E / SQRT2 * (dm0 * gc.a2[1].values[j] + dm1 * gc.a2[0].values[j])
                - E / SQRT2 * sp0 * gc.a2[0].values[j];
            worst = worst.max((d - want).abs());
        }
        assert!(worst < 1e-4, "back-substitution residual {worst}");
    }

    #[test]
    fn rotated_assembly_basics() {
        let u = soliton(100.0, 512, 1.0, -20.0).map(|v| -1e-2 * v);
        let gc = solve_gauge(&u, 2, 8).unwrap();
        let rl = assemble_rotated(&u, &gc, &DeformationSpec::None, None).unwrap();
        for j in 0..u.n() {
            // f0_0 = 1
            assert_eq!(rl.f0[0].values[j], 1.0);
            // betaA_0 = (1/sqrt2 e) u a_minus0
            let want = u.values[j] * gc.a_minus0.values[j] / (SQRT2 * E);
            assert!((rl.beta_a[0].values[j] - want).abs() < 1e-13);
            // f0_1 = -(a1_0^2 - a2_0^2)
            let w1 = -(gc.a1[0].values[j].powi(2) - gc.a2[0].values[j].powi(2));
            assert!((rl.f0[1].values[j] - w1).abs() < 1e-13);
        }
        assert!(rl.f0_3_presumed.is_some());
        assert!(rl.f1_2_presumed.is_some());
        // zero field makes betaA_0 vanish identically
        let z = GridField::zeros(20.0, 64).unwrap();
        let gz = solve_gauge(&z, 0, 4).unwrap();
        let rz = assemble_rotated(&z, &gz, &DeformationSpec::None, None).unwrap();
        assert!(rz.beta_a[0].max_abs() < 1e-14);
    }
}
