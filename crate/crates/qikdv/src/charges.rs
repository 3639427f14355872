//! Anomalous charges, their anomaly rates, and the classical invariants.
//!
//! The n-th charge is the integral of the diagonal rotated coefficient of
//! order n; its time derivative equals the integral of the anomaly times the
//! matching curvature coefficient. Order zero of the latter is identically
//! one, so the zeroth rate vanishes whenever the anomaly integrates to zero.

use crate::abelianization::{assemble_rotated, solve_gauge, DEFAULT_REFINE, E};
use crate::deformations::{anomaly, hamiltonian, DeformationSpec};
use crate::error::Result;
use crate::grid::GridField;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Mass, momentum, and the deformed energy of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalInvariants {
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
}

pub fn classical_invariants(u: &GridField, spec: &DeformationSpec) -> Result<ClassicalInvariants> {
    u.check()?;
    Ok(ClassicalInvariants {
        mass: u.integrate(),
        momentum: u.map(|v| v * v).integrate(),
        energy: hamiltonian(u, spec)?,
    })
}

/// Charges and anomaly rates of one field at one instant.
#[derive(Debug, Clone)]
pub struct ChargeSnapshot {
    pub t: f64,
    /// Q^n = integral of the order-n diagonal coefficient, n = 0..=order
    pub q: Vec<f64>,
    /// Lambda^n = integral of anomaly times the order-n curvature coefficient
    pub lambda: Vec<f64>,
    pub invariants: ClassicalInvariants,
    /// gauge integration pole, if one occurred
    pub singular: Option<f64>,
}

/// Compute all charges of `u` through `order` (0..=2).
pub fn charge_snapshot(
    u: &GridField,
    spec: &DeformationSpec,
    order: usize,
    t: f64,
    factor: usize,
) -> Result<ChargeSnapshot> {
    let gc = solve_gauge(u, order, factor)?;
    let rl = assemble_rotated(u, &gc, spec, None)?;
    let x = anomaly(u, spec)?;
    let q = (0..=order).map(|k| rl.beta_a[k].integrate()).collect();
    let lambda = (0..=order)
        .map(|k| x.zip(&rl.f0[k], |a, b| a * b).integrate())
        .collect();
    Ok(ChargeSnapshot {
        t,
        q,
        lambda,
        invariants: classical_invariants(u, spec)?,
        singular: gc.singular,
    })
}

/// The zeroth charge in its closed form, (1 / sqrt2 e) * integral of u times
/// the Riccati path. Agrees with the order-zero entry of [`charge_snapshot`].
pub fn charge_q0(u: &GridField, factor: usize) -> Result<f64> {
    let gc = solve_gauge(u, 0, factor)?;
    Ok(u.zip(&gc.a_minus0, |a, b| a * b).integrate() / (SQRT2 * E))
}

/// Charge histories along a sampled trajectory.
#[derive(Debug, Clone)]
pub struct ChargeSeries {
    pub order: usize,
    pub snapshots: Vec<ChargeSnapshot>,
}

impl ChargeSeries {
    pub fn compute(
        frames: &[(f64, GridField)],
        spec: &DeformationSpec,
        order: usize,
    ) -> Result<Self> {
        let snapshots = frames
            .iter()
            .map(|(t, u)| charge_snapshot(u, spec, order, *t, DEFAULT_REFINE))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChargeSeries { order, snapshots })
    }

    /// Max |Q^n(t) - Q^n(0)| / max(|Q^n(0)|, floor) over the series.
    pub fn relative_drift(&self, n: usize, floor: f64) -> f64 {
        let q0 = self.snapshots[0].q[n];
        let scale = q0.abs().max(floor);
        self.snapshots
            .iter()
            .map(|s| (s.q[n] - q0).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn invariant_drift(&self, pick: impl Fn(&ClassicalInvariants) -> f64, floor: f64) -> f64 {
        let v0 = pick(&self.snapshots[0].invariants);
        let scale = v0.abs().max(floor);
        self.snapshots
            .iter()
            .map(|s| (pick(&s.invariants) - v0).abs() / scale)
            .fold(0.0, f64::max)
    }
}
