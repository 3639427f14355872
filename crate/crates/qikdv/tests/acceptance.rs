//! End-to-end acceptance runs. Every check prints one machine-greppable
//! PASS/FAIL line before asserting, so a single run of this suite gives a
//! complete scoreboard.

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qikdv::abelianization::{solve_gauge, verify_quasi_continuity, DEFAULT_REFINE};
use qikdv::charges::ChargeSeries;
use qikdv::coupled::{charge_rn, evolve_coupled, solve_gauge_coupled, CoupledState};
use qikdv::deformations::{anomaly, anomaly_first_order, DeformationSpec, LocalFamily};
use qikdv::grid::{GridField, Spectral};
use qikdv::loop_algebra::{
    bch_conjugate, commutator, conjugate_sum, displayed_curvature, displayed_diagonal,
    element_matrix, gauge_generator, mat_exp, mat_inv, mat_mul, mat_norm, rat, spatial_connection,
    Generator, GradeWindow, LoopElement,
};
use qikdv::nls_map::{correspondence_error, fitted_slope, CorrespondenceConfig};
use qikdv::pde::{evolve, soliton_scaled, Equation, EvolutionProblem, FieldState};

fn report(num: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {num} [{name}]: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {num} [{name}] failed: {detail}");
}

fn sup_diff(a: &GridField, b: &GridField) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn final_real(traj: &[qikdv::pde::TrajectorySample]) -> &GridField {
    match &traj.last().unwrap().field {
        FieldState::Real(u) => u,
        _ => panic!("expected real field"),
    }
}

/// Small negative pulse used wherever the gauge Riccati flow must stay
/// regular over the whole run.
fn small_field() -> GridField {
    GridField::from_fn(100.0, 512, |x| {
        let s = 1.0 / (((x - 13.0) / 3.0).cosh());
        -5e-6 * s * s
    })
    .unwrap()
}

fn run_real(
    u0: &GridField,
    equation: Equation,
    dt: f64,
    t_end: f64,
    sample_every: usize,
) -> Vec<qikdv::pde::TrajectorySample> {
    let problem = EvolutionProblem { equation, dt, t_end };
    evolve(&FieldState::Real(u0.clone()), &problem, sample_every).unwrap()
}

fn frames(traj: &[qikdv::pde::TrajectorySample]) -> Vec<(f64, GridField)> {
    traj.iter()
        .filter_map(|s| match &s.field {
            FieldState::Real(u) => Some((s.t, u.clone())),
            _ => None,
        })
        .collect()
}

#[test]
fn criterion_01_soliton_transport() {
    let f = soliton_scaled(4.0, 0.0, -10.0, 0.0);
    let u0 = GridField::from_fn(40.0, 512, |x| f(x, 0.0)).unwrap();
    let traj = run_real(&u0, Equation::Kdv, 1e-4, 1.0, 0);
    let exact = GridField::from_fn(40.0, 512, |x| f(x, 1.0)).unwrap();
    let err = sup_diff(final_real(&traj), &exact);
    report(
        1,
        "soliton transport",
        err < 1e-6,
        &format!("linf vs analytic at t=1: {err:.3e}"),
    );
}

#[test]
fn criterion_02_scaled_soliton_and_same_equation() {
    let eps = 0.1;
    let f = soliton_scaled(4.0, eps, -10.0, 0.0);
    let u0 = GridField::from_fn(40.0, 512, |x| f(x, 0.0)).unwrap();
    let traj = run_real(&u0, Equation::ScaledKdv { epsilon: eps }, 1e-4, 1.0, 2000);
    let exact = GridField::from_fn(40.0, 512, |x| f(x, 1.0)).unwrap();
    let shape_err = sup_diff(final_real(&traj), &exact);

    let spec = DeformationSpec::LocalTerm {
        family: LocalFamily::Uuxx,
        epsilon: eps,
    };
    let traj_def = run_real(&u0, Equation::DeformedKdv { spec }, 1e-4, 1.0, 2000);
    let mut same_eq = 0.0f64;
    for (a, b) in traj.iter().zip(&traj_def) {
        let (FieldState::Real(ua), FieldState::Real(ub)) = (&a.field, &b.field) else {
            unreachable!()
        };
        same_eq = same_eq.max(sup_diff(ua, ub));
    }
    report(
        2,
        "scaled soliton / same-equation identity",
        shape_err < 1e-5 && same_eq < 1e-10,
        &format!("shape linf {shape_err:.3e}, trajectory gap {same_eq:.3e}"),
    );
}

#[test]
fn criterion_03_undeformed_conservation() {
    let u0 = small_field();
    let traj = run_real(&u0, Equation::Kdv, 1e-4, 1.0, 5000);
    let series = ChargeSeries::compute(&frames(&traj), &DeformationSpec::None, 1).unwrap();
    let floor = 1e-30;
    let drifts = [
        ("mass", series.invariant_drift(|i| i.mass, floor)),
        ("momentum", series.invariant_drift(|i| i.momentum, floor)),
        ("energy", series.invariant_drift(|i| i.energy, floor)),
        ("Q0", series.relative_drift(0, floor)),
        ("Q1", series.relative_drift(1, floor)),
    ];
    let worst = drifts.iter().fold(0.0f64, |m, (_, d)| m.max(*d));
    let detail = drifts
        .iter()
        .map(|(k, d)| format!("{k} {d:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(3, "undeformed conservation", worst < 1e-6, &detail);
}

#[test]
fn criterion_04_total_derivative_anomaly_conserves_q0() {
    let eps = 0.05;
    let spec = DeformationSpec::LocalTerm {
        family: LocalFamily::Uuxx,
        epsilon: eps,
    };
    let u0 = small_field();
    let traj = run_real(&u0, Equation::DeformedKdv { spec }, 1e-4, 1.0, 5000);
    let series = ChargeSeries::compute(&frames(&traj), &spec, 0).unwrap();
    let lambda0 = series
        .snapshots
        .iter()
        .fold(0.0f64, |m, s| m.max(s.lambda[0].abs()));
    let drift = series.relative_drift(0, 1e-30);
    report(
        4,
        "Q0 under total-derivative anomaly",
        lambda0 < 1e-12 && drift < 1e-6,
        &format!("max |Lambda0| {lambda0:.3e}, Q0 drift {drift:.3e}"),
    );
}

/// Smooth positive periodic field from a few random Fourier modes.
fn random_positive_field(rng: &mut ChaCha8Rng, length: f64, n: usize) -> GridField {
    let modes: Vec<(f64, f64, f64)> = (1..=5)
        .map(|m| {
            (
                m as f64,
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
            )
        })
        .collect();
    GridField::from_fn(length, n, |x| {
        2.0 + modes
            .iter()
            .map(|(m, a, b)| {
                let th = 2.0 * std::f64::consts::PI * m * x / length;
                a * th.cos() + b * th.sin()
            })
            .sum::<f64>()
    })
    .unwrap()
}

#[test]
fn criterion_05_anomaly_identity() {
    // closed forms per family, independent of the shared identity formula:
    // uu_xx family -> eps u_xx; derivative-power -> eps (u_x^{m-1})_x;
    // higher-derivative -> eps u^{(2n)}; power -> 2u^2 - 2(1+eps)u^{2+3eps}
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let eps = 0.03;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let u = random_positive_field(&mut rng, 30.0, 256);
        let sp = Spectral::for_field(&u);
        let cases: Vec<(DeformationSpec, GridField)> = vec![
            (
                DeformationSpec::LocalTerm {
                    family: LocalFamily::Uuxx,
                    epsilon: eps,
                },
                sp.deriv(&u, 2).map(|v| eps * v),
            ),
            (
                DeformationSpec::LocalTerm {
                    family: LocalFamily::PowerUx(3),
                    epsilon: eps,
                },
                sp.deriv(&sp.deriv(&u, 1).map(|v| v * v), 1).map(|v| eps * v),
            ),
            (
                DeformationSpec::LocalTerm {
                    family: LocalFamily::Ud2n(2),
                    epsilon: eps,
                },
                sp.deriv(&u, 4).map(|v| eps * v),
            ),
            (
                DeformationSpec::PowerDef { epsilon: eps },
                u.map(|v| 2.0 * v * v - 2.0 * (1.0 + eps) * v.powf(2.0 + 3.0 * eps)),
            ),
        ];
        for (spec, closed) in cases {
            let x = anomaly(&u, &spec).unwrap();
            let scale = closed.max_abs().max(1.0);
            worst = worst.max(sup_diff(&x, &closed) / scale);
        }
    }
    report(
        5,
        "anomaly identity",
        worst < 1e-12,
        &format!("worst relative gap over 10 fields x 4 families: {worst:.3e}"),
    );
}

#[test]
fn criterion_06_first_order_anomaly() {
    let u = GridField::from_fn(40.0, 512, |x| {
        let f = soliton_scaled(1.0, 0.0, 20.0, 0.0);
        0.5 + f(x, 0.0)
    })
    .unwrap();
    let umax2 = u.max_abs().powi(2);
    let mut points = Vec::new();
    let mut ok = true;
    let mut details = Vec::new();
    for eps in [0.005, 0.01, 0.02] {
        let exact = anomaly(&u, &DeformationSpec::PowerDef { epsilon: eps }).unwrap();
        let first = anomaly_first_order(&u, eps).unwrap();
        let diff = sup_diff(&exact, &first);
        let bound = 5.0 * eps * eps * umax2;
        ok &= diff <= bound;
        details.push(format!("eps {eps}: gap {diff:.3e} vs bound {bound:.3e}"));
        points.push((eps, diff));
    }
    let slope = fitted_slope(&points);
    ok &= (1.8..=2.2).contains(&slope);
    details.push(format!("scaling exponent {slope:.3}"));
    report(6, "first-order anomaly", ok, &details.join("; "));
}

#[test]
fn criterion_07_quasi_continuity_order_zero() {
    let u0 = small_field();
    let mut worst = 0.0f64;
    for spec in [
        DeformationSpec::None,
        DeformationSpec::LocalTerm {
            family: LocalFamily::Uuxx,
            epsilon: 0.05,
        },
    ] {
        let eq = match spec {
            DeformationSpec::None => Equation::Kdv,
            _ => Equation::DeformedKdv { spec },
        };
        let traj = run_real(&u0, eq, 1e-4, 2e-4, 1);
        let fr = frames(&traj);
        let (up, un) = (&fr[0].1, &fr[2].1);
        let gp = solve_gauge(up, 0, DEFAULT_REFINE).unwrap();
        let gn = solve_gauge(un, 0, DEFAULT_REFINE).unwrap();
        let res = verify_quasi_continuity(up, un, &gp, &gn, 2e-4, &spec).unwrap();
        worst = worst.max(res[0]);
    }
    report(
        7,
        "order-zero quasi-continuity",
        worst <= 1e-4,
        &format!("worst residual sup norm {worst:.3e}"),
    );
}

#[test]
fn criterion_08_power_deformation_rate_consistency() {
    // the power deformation needs a strictly positive field, and the gauge
    // Riccati flow on a positive field has a strictly negative right-hand
    // side, so it reaches a pole inside the domain; the rate comparison is
    // attempted anyway and the singularity is reported as data
    let eps = 0.01;
    let spec = DeformationSpec::PowerDef { epsilon: eps };
    let u0 = GridField::from_fn(40.0, 512, |x| {
        let f = soliton_scaled(1.0, 0.0, 20.0, 0.0);
        0.2 + f(x, 0.0)
    })
    .unwrap();
    let traj = run_real(&u0, Equation::DeformedKdv { spec }, 1e-4, 0.02, 100);
    let series = ChargeSeries::compute(&frames(&traj), &spec, 0).unwrap();
    let poles: Vec<f64> = series
        .snapshots
        .iter()
        .filter_map(|s| s.singular)
        .collect();
    if !poles.is_empty() {
        report(
            8,
            "power-deformation rate consistency",
            false,
            &format!(
                "gauge pole at x = {:.4} on every snapshot; Q0 is undefined along this run",
                poles[0]
            ),
        );
    }
    let s = &series.snapshots;
    let mid = s.len() / 2;
    let dqdt = (s[mid + 1].q[0] - s[mid - 1].q[0]) / (s[mid + 1].t - s[mid - 1].t);
    let lam = s[mid].lambda[0];
    let rel = (dqdt - lam).abs() / lam.abs().max(1e-30);
    report(
        8,
        "power-deformation rate consistency",
        rel < 1e-3,
        &format!("dQ0/dt {dqdt:.6e} vs Lambda0 {lam:.6e}, relative gap {rel:.3e}"),
    );
}

fn random_rational_element(rng: &mut ChaCha8Rng) -> LoopElement<BigRational> {
    let mut e = LoopElement::zero();
    for _ in 0..4 {
        let power = rng.gen_range(-2..=3i64);
        let gen = match rng.gen_range(0..3u8) {
            0 => Generator::b(power),
            1 => Generator::f1(power),
            _ => Generator::f2(power),
        };
        e.add_term(gen, rat(rng.gen_range(-9..=9), rng.gen_range(1..=9)));
    }
    e
}

fn random_f64_element(rng: &mut ChaCha8Rng, scale: f64) -> LoopElement<f64> {
    let mut e = LoopElement::zero();
    for _ in 0..3 {
        let power = rng.gen_range(-1..=2i64);
        let gen = match rng.gen_range(0..3u8) {
            0 => Generator::b(power),
            1 => Generator::f1(power),
            _ => Generator::f2(power),
        };
        e.add_term(gen, scale * rng.gen_range(-1.0..1.0));
    }
    e
}

#[test]
fn criterion_09_algebra_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let window = GradeWindow::new(-12, 16);
    let mut failures = 0usize;
    for _ in 0..1000 {
        let x = random_rational_element(&mut rng);
        let y = random_rational_element(&mut rng);
        let z = random_rational_element(&mut rng);
        let xy = commutator(&x, &y, window).unwrap();
        let yx = commutator(&y, &x, window).unwrap();
        if !xy.add(&yx).is_zero() {
            failures += 1;
        }
        let j = commutator(&x, &commutator(&y, &z, window).unwrap(), window)
            .unwrap()
            .add(&commutator(&y, &commutator(&z, &x, window).unwrap(), window).unwrap())
            .add(&commutator(&z, &xy, window).unwrap());
        if !j.is_zero() {
            failures += 1;
        }
    }
    let lambda = 0.9;
    let mut bch_worst = 0.0f64;
    let mut bch_fail = 0usize;
    for _ in 0..100 {
        let x = random_f64_element(&mut rng, 0.1);
        let y = random_f64_element(&mut rng, 0.3);
        let approx = element_matrix(
            &bch_conjugate(&x, &y, 4, window).unwrap().sum(),
            lambda,
        );
        let xm = element_matrix(&x, lambda);
        let ym = element_matrix(&y, lambda);
        let ex = mat_exp(xm);
        let exact = mat_mul(mat_mul(ex, ym), mat_inv(ex));
        let err = mat_norm([
            [approx[0][0] - exact[0][0], approx[0][1] - exact[0][1]],
            [approx[1][0] - exact[1][0], approx[1][1] - exact[1][1]],
        ]);
        let bound = mat_norm(xm).powi(5);
        if err >= bound {
            bch_fail += 1;
        } else if bound > 0.0 {
            bch_worst = bch_worst.max(err / bound);
        }
    }
    report(
        9,
        "algebra suite",
        failures == 0 && bch_fail == 0,
        &format!(
            "rational identity failures {failures}/2000, bch failures {bch_fail}/100 (worst ratio {bch_worst:.3})"
        ),
    );
}

#[test]
fn criterion_10_printed_coefficient_regression() {
    // exact rational comparison of the conjugation engine against the
    // hand-derived diagonal polynomials at a symbolic sample point
    let c1 = rat(9, 13);
    let c2 = rat(-4, 7);
    let orders = [
        (rat(3, 7), rat(-2, 5)),
        (rat(1, 4), rat(5, 9)),
        (rat(-7, 11), rat(2, 3)),
    ];
    let wide = GradeWindow::new(-2, 30);
    let g = gauge_generator(&orders);
    let conj = conjugate_sum(&g, &spatial_connection(&c1, &c2), 7, wide).unwrap();
    let disp = displayed_diagonal(&c1, &c2, &orders);
    let diag_ok =
        conj.coeff(Generator::b(0)) == disp[0] && conj.coeff(Generator::b(1)) == disp[1];

    let b0 = LoopElement::term(Generator::b(0), rat(1, 1));
    let cb = conjugate_sum(&g, &b0, 7, wide).unwrap();
    let (curv_b1, (curv_f1, curv_f2)) = displayed_curvature(&orders);
    let curv_ok = cb.coeff(Generator::b(0)) == rat(1, 1)
        && cb.coeff(Generator::b(1)) == curv_b1
        && cb.coeff(Generator::f1(0)) == curv_f1
        && cb.coeff(Generator::f2(0)) == curv_f2;

    // the numeric assembly uses the same polynomials; spot-check its
    // curvature coefficients on a real field
    let u = small_field();
    let gc = solve_gauge(&u, 1, DEFAULT_REFINE).unwrap();
    let rl = qikdv::abelianization::assemble_rotated(&u, &gc, &DeformationSpec::None, None)
        .unwrap();
    let f00_ok = rl.f0[0].values.iter().all(|&v| v == 1.0);
    let mut f01_ok = true;
    for i in 0..u.n() {
        let pt = [(gc.a1[0].values[i], gc.a2[0].values[i])];
        let (b1, _) = displayed_curvature(&pt);
        if rl.f0[1].values[i] != b1 {
            f01_ok = false;
        }
    }
    report(
        10,
        "printed-coefficient regression",
        diag_ok && curv_ok && f00_ok && f01_ok,
        &format!("diagonal {diag_ok}, curvature {curv_ok}, f0^0==1 {f00_ok}, f0^1 {f01_ok}"),
    );
}

#[test]
fn criterion_11_nls_correspondence_scaling() {
    let cfg = CorrespondenceConfig::default();
    let eps_list = [0.02, 0.04, 0.08];
    let mut details = Vec::new();
    let mut ok = true;
    for eps_def in [None, Some(0.03)] {
        let mut points = Vec::new();
        for eps in eps_list {
            let err = correspondence_error(eps, eps_def, &cfg).unwrap();
            points.push((eps, err));
        }
        let slope = fitted_slope(&points);
        ok &= slope >= 3.5;
        details.push(format!(
            "{} slope {slope:.3}",
            match eps_def {
                None => "undeformed",
                Some(_) => "deformed",
            }
        ));
    }
    report(11, "weak-coupling scaling", ok, &details.join(", "));
}

#[test]
fn criterion_12_coupled_reduction() {
    // q = 1, qbar = u reduces the pair system to the real flow
    let f = soliton_scaled(4.0, 0.0, 10.0, 0.0);
    let u0 = GridField::from_fn(40.0, 512, |x| f(x, 0.0)).unwrap();
    let state0 = CoupledState::from_reduction(&u0).unwrap();
    let none = DeformationSpec::None;
    let traj_c = evolve_coupled(&state0, none, none, 1e-4, 0.2, 0).unwrap();
    let traj_r = run_real(&u0, Equation::Kdv, 1e-4, 0.2, 0);
    let FieldState::Pair { qbar, .. } = &traj_c.last().unwrap().field else {
        unreachable!()
    };
    let u_end = final_real(&traj_r);
    let mut gap = 0.0f64;
    for i in 0..u_end.n() {
        gap = gap.max((qbar.values[i].re - u_end.values[i]).abs());
        gap = gap.max(qbar.values[i].im.abs());
    }

    // charge identification and drift on a gauge-regular field
    let us = small_field();
    let st = CoupledState::from_reduction(&us).unwrap();
    let gc = solve_gauge_coupled(&st, 1, DEFAULT_REFINE).unwrap();
    let r0 = charge_rn(&st, &gc, 0);
    let q0 = qikdv::charges::charge_q0(&us, DEFAULT_REFINE).unwrap();
    let ident = (r0.re - q0).abs() / q0.abs().max(1e-30) + r0.im.abs();

    let traj_s = evolve_coupled(
        &CoupledState::from_reduction(&us).unwrap(),
        none,
        none,
        1e-4,
        1.0,
        5000,
    )
    .unwrap();
    let mut drift = 0.0f64;
    let mut base = Vec::new();
    for s in &traj_s {
        let FieldState::Pair { q, qbar } = &s.field else {
            continue;
        };
        let st = CoupledState::new(q.clone(), qbar.clone()).unwrap();
        let gc = solve_gauge_coupled(&st, 1, DEFAULT_REFINE).unwrap();
        for n in 0..=1 {
            let r = charge_rn(&st, &gc, n);
            if base.len() <= n {
                base.push(r);
            } else {
                drift = drift.max((r - base[n]).norm() / base[n].norm().max(1e-30));
            }
        }
    }
    report(
        12,
        "coupled reduction",
        gap < 1e-8 && ident < 1e-8 && drift < 1e-6,
        &format!("trajectory gap {gap:.3e}, R0 vs Q0 {ident:.3e}, Rn drift {drift:.3e}"),
    );
}

#[test]
fn criterion_13_determinism() {
    let bin = env!("CARGO_BIN_EXE_qikdv");
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(
        &cfg_path,
        r#"
[grid]
length = 40.0
n = 256

[time]
dt = 1e-4
t_end = 0.01
sample_every = 50

[equation]
kind = "kdv"

[initial]
kind = "soliton"
c = 4.0
x0 = 10.0

seed = 42
"#,
    )
    .unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for (label, args) in [
        ("simulate", vec!["simulate"]),
        ("verify-algebra", vec!["verify-algebra", "--seed", "42", "--triples", "20", "--samples", "10"]),
    ] {
        let outs: Vec<_> = (0..2)
            .map(|i| {
                let out = dir.path().join(format!("{label}-{i}"));
                let mut cmd = std::process::Command::new(bin);
                cmd.args(&args);
                if label == "simulate" {
                    cmd.args(["--config", cfg_path.to_str().unwrap()]);
                }
                cmd.args(["--out", out.to_str().unwrap()]);
                let status = cmd.status().unwrap();
                assert!(status.success(), "{label} run failed");
                out
            })
            .collect();
        let mut entries: Vec<_> = std::fs::read_dir(&outs[0])
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        entries.sort();
        assert!(!entries.is_empty());
        for name in entries {
            let a = std::fs::read(outs[0].join(&name)).unwrap();
            let b = std::fs::read(outs[1].join(&name)).unwrap();
            if a != b {
                ok = false;
                details.push(format!("{label}/{} differs", name.to_string_lossy()));
            }
        }
        details.push(format!("{label} byte-identical"));
    }
    report(13, "determinism", ok, &details.join(", "));
}
