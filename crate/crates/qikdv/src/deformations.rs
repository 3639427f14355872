//! Hamiltonian functionals, functional derivatives, and anomaly functions
//! for the supported deformation families.

use serde::{Deserialize, Serialize};

use crate::error::{QiError, Result};
use crate::grid::{GridField, Spectral};

/// Fields this close to zero (or below) are refused wherever log u or a
/// fractional power of u is evaluated. Refusal, never clamping.
pub const U_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalFamily {
    /// F = (3/4) u u_xx
    Uuxx,
    /// F = -(3/2m) u_x^m, m >= 3
    PowerUx(u32),
    /// F = (3/4) u u^{(2n)}, n >= 1
    Ud2n(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeformationSpec {
    None,
    LocalTerm { family: LocalFamily, epsilon: f64 },
    /// Hamiltonian power 3 -> 3(1+eps): H density -u^{3+3eps}.
    PowerDef { epsilon: f64 },
}

impl DeformationSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DeformationSpec::None => Ok(()),
            DeformationSpec::LocalTerm { family, epsilon } => {
                if !epsilon.is_finite() {
                    return Err(QiError::validation("epsilon must be finite"));
                }
                match family {
                    LocalFamily::PowerUx(m) if *m < 3 => {
                        Err(QiError::validation("POWER_UX requires m >= 3"))
                    }
                    LocalFamily::Ud2n(n) if *n < 1 => {
                        Err(QiError::validation("UD2N requires n >= 1"))
                    }
                    _ => Ok(()),
                }
            }
            DeformationSpec::PowerDef { epsilon } => {
                if !(epsilon.is_finite() && *epsilon > 0.0 && *epsilon < 1.0) {
                    Err(QiError::validation("PowerDef requires 0 < epsilon < 1"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

fn require_positive(u: &GridField) -> Result<()> {
    if let Some(i) = u.values.iter().position(|&v| v <= U_FLOOR) {
        return Err(QiError::domain(format!(
            "field must exceed {U_FLOOR:e} for a logarithmic deformation; \
             u[{i}] = {v:e}",
            v = u.values[i]
        )));
    }
    Ok(())
}

/// Even spectral derivative of order 2n.
fn deriv_2n(sp: &Spectral, u: &GridField, n: u32) -> GridField {
    let mut out = u.clone();
    for _ in 0..n {
        out = sp.deriv(&out, 2);
    }
    out
}

/// H[u] = integral of (1/2 u_x^2 - u^3 + deformation density).
pub fn hamiltonian(u: &GridField, spec: &DeformationSpec) -> Result<f64> {
    u.check()?;
    spec.validate()?;
    let sp = Spectral::for_field(u);
    let ux = sp.deriv(u, 1);
    let base: f64 = match spec {
        DeformationSpec::PowerDef { epsilon } => {
            require_positive(u)?;
            let p = 3.0 + 3.0 * epsilon;
            u.values
                .iter()
                .zip(ux.values.iter())
                .map(|(&v, &vx)| 0.5 * vx * vx - v.powf(p))
                .sum::<f64>()
                * u.h()
        }
        _ => {
            (0..u.n())
                .map(|i| 0.5 * ux.values[i] * ux.values[i] - u.values[i].powi(3))
                .sum::<f64>()
                * u.h()
        }
    };
    let extra = match spec {
        DeformationSpec::LocalTerm { family, epsilon } => match family {
            LocalFamily::Uuxx => {
                let uxx = sp.deriv(u, 2);
                epsilon
                    * 0.75
                    * (0..u.n()).map(|i| u.values[i] * uxx.values[i]).sum::<f64>()
                    * u.h()
            }
            LocalFamily::PowerUx(m) => {
                -epsilon * 1.5 / (*m as f64)
                    * (0..u.n()).map(|i| ux.values[i].powi(*m as i32)).sum::<f64>()
                    * u.h()
            }
            LocalFamily::Ud2n(n) => {
                let d = deriv_2n(&sp, u, *n);
                epsilon
                    * 0.75
                    * (0..u.n()).map(|i| u.values[i] * d.values[i]).sum::<f64>()
                    * u.h()
            }
        },
        _ => 0.0,
    };
    Ok(base + extra)
}

/// delta H / delta u on the grid.
pub fn functional_derivative(u: &GridField, spec: &DeformationSpec) -> Result<GridField> {
    u.check()?;
    spec.validate()?;
    let sp = Spectral::for_field(u);
    let uxx = sp.deriv(u, 2);
    match spec {
        DeformationSpec::PowerDef { epsilon } => {
            require_positive(u)?;
            let p = 2.0 + 3.0 * epsilon;
            let c = 3.0 * (1.0 + epsilon);
            Ok(GridField::from_values(
                u.length,
                (0..u.n())
                    .map(|i| -c * u.values[i].powf(p) - uxx.values[i])
                    .collect(),
            ))
        }
        DeformationSpec::None => Ok(GridField::from_values(
            u.length,
            (0..u.n())
                .map(|i| -3.0 * u.values[i] * u.values[i] - uxx.values[i])
                .collect(),
        )),
        DeformationSpec::LocalTerm { family, epsilon } => {
            let extra: GridField = match family {
                LocalFamily::Uuxx => uxx.map(|v| epsilon * 1.5 * v),
                LocalFamily::PowerUx(m) => {
                    let ux = sp.deriv(u, 1);
                    let pm = ux.map(|v| v.powi(*m as i32 - 1));
                    sp.deriv(&pm, 1).map(|v| epsilon * 1.5 * v)
                }
                LocalFamily::Ud2n(n) => deriv_2n(&sp, u, *n).map(|v| epsilon * 1.5 * v),
            };
            Ok(GridField::from_values(
                u.length,
                (0..u.n())
                    .map(|i| {
                        -3.0 * u.values[i] * u.values[i] - uxx.values[i] + extra.values[i]
                    })
                    .collect(),
            ))
        }
    }
}

/// Anomaly field X = 2u^2 + (2/3)(dH/du + u_xx). Vanishes identically for
/// the undeformed Hamiltonian; this one formula is the source of truth for
/// every family.
pub fn anomaly(u: &GridField, spec: &DeformationSpec) -> Result<GridField> {
    let fd = functional_derivative(u, spec)?;
    let sp = Spectral::for_field(u);
    let uxx = sp.deriv(u, 2);
    Ok(GridField::from_values(
        u.length,
        (0..u.n())
            .map(|i| {
                2.0 * u.values[i] * u.values[i]
                    + (2.0 / 3.0) * (fd.values[i] + uxx.values[i])
            })
            .collect(),
    ))
}

/// First-order expansion of the power-deformation anomaly: -2 eps u^2 (1 + 3 ln u).
pub fn anomaly_first_order(u: &GridField, epsilon: f64) -> Result<GridField> {
    u.check()?;
    require_positive(u)?;
    Ok(u.map(|v| -2.0 * epsilon * v * v * (1.0 + 3.0 * v.ln())))
}

/// Normalized sup-norm asymmetry of f about `center`; 0 means even.
pub fn parity_check(f: &GridField, center: f64) -> f64 {
    let n = f.n();
    let h = f.h();
    // reflected index of x_j about the center, on the periodic grid
    let xj0 = -f.length / 2.0;
    let jc = (center - xj0) / h;
    let two_jc = (2.0 * jc).round() as i64;
    let mut worst = 0.0f64;
    for j in 0..n as i64 {
        let jr = (two_jc - j).rem_euclid(n as i64) as usize;
        let d = (f.values[j as usize] - f.values[jr]).abs();
        worst = worst.max(d);
    }
    let scale = f.max_abs().max(1.0);
    worst / scale
}
