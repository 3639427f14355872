//! Configuration-driven runner: simulations, charge tracking, algebra
//! verification, the NLS correspondence sweep, and the coupled system.
//! All artifacts are deterministic for a fixed config and seed.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qikdv::charges::ChargeSeries;
use qikdv::config::RunConfig;
use qikdv::coupled::{
    anomaly_rate_rn, charge_rn, evolve_coupled, solve_gauge_coupled, CoupledState,
};
use qikdv::error::{QiError, Result};
use qikdv::grid::GridField;
use qikdv::loop_algebra::{
    bch_conjugate, commutator, element_matrix, mat_exp, mat_inv, mat_mul, mat_norm, rat, Generator,
    GradeWindow, LoopElement,
};
use qikdv::nls_map::{correspondence_error, fitted_slope, CorrespondenceConfig};
use qikdv::pde::{evolve, FieldState};
use qikdv::report::{charge_table, write_csv, Manifest};

#[derive(Parser)]
#[command(name = "qikdv", version, about = "quasi-integrable KdV toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a configured equation and write trajectory + charge artifacts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// override the charge order count from the config
        #[arg(long)]
        orders: Option<usize>,
    },
    /// Charge series only (no trajectory table).
    Charges {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        orders: Option<usize>,
    },
    /// Seeded antisymmetry/Jacobi/BCH identity suite over the loop algebra.
    VerifyAlgebra {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        triples: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// deliberately corrupt the bracket table to exercise failure paths
        #[arg(long, default_value_t = false)]
        corrupt: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weak-coupling correspondence sweep; writes the scaling table.
    MapNls {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coupled-system run seeded from the configured real field.
    Coupled {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        orders: Option<usize>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        let obj = serde_json::json!({ "error": e.to_string(), "code": e.exit_code() });
        eprintln!("{obj}");
        std::process::exit(e.exit_code());
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate {
            config,
            out,
            orders,
        } => cmd_simulate(&config, &out, orders, true),
        Command::Charges {
            config,
            out,
            orders,
        } => cmd_simulate(&config, &out, orders, false),
        Command::VerifyAlgebra {
            seed,
            triples,
            samples,
            depth,
            corrupt,
            out,
        } => cmd_verify_algebra(seed, triples, samples, depth, corrupt, out.as_deref()),
        Command::MapNls { config, out } => cmd_map_nls(&config, &out),
        Command::Coupled {
            config,
            out,
            orders,
        } => cmd_coupled(&config, &out, orders),
    }
}

fn load_config(path: &Path) -> Result<(String, RunConfig)> {
    let text = fs::read_to_string(path)?;
    let cfg = RunConfig::from_toml(&text)?;
    Ok((text, cfg))
}

/// Real-field frames of a trajectory, for the charge machinery.
fn real_frames(samples: &[qikdv::pde::TrajectorySample]) -> Vec<(f64, GridField)> {
    samples
        .iter()
        .filter_map(|s| match &s.field {
            FieldState::Real(u) => Some((s.t, u.clone())),
            _ => None,
        })
        .collect()
}

fn cmd_simulate(
    config_path: &Path,
    out: &Path,
    orders: Option<usize>,
    with_trajectory: bool,
) -> Result<()> {
    let (text, cfg) = load_config(config_path)?;
    let orders = orders.unwrap_or(cfg.orders).min(2);
    fs::create_dir_all(out)?;

    let traj = evolve(&cfg.initial_state()?, &cfg.problem(), cfg.time.sample_every)?;
    let frames = real_frames(&traj);

    if with_trajectory {
        let mut header = vec!["t", "max_abs", "mass", "momentum"];
        let has_analytic = cfg.analytic_at(0.0).is_some();
        if has_analytic {
            header.push("linf_vs_analytic");
        }
        let rows: Vec<Vec<f64>> = frames
            .iter()
            .map(|(t, u)| {
                let mut row = vec![
                    *t,
                    u.max_abs(),
                    u.integrate(),
                    u.map(|v| v * v).integrate(),
                ];
                if has_analytic {
                    let a = cfg.analytic_at(*t).expect("analytic profile");
                    row.push(
                        u.values
                            .iter()
                            .zip(&a.values)
                            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs())),
                    );
                }
                row
            })
            .collect();
        write_csv(&out.join("trajectory.csv"), &header, &rows)?;
    }

    let series = ChargeSeries::compute(&frames, &cfg.deformation(), orders)?;
    let (header, rows) = charge_table(&series);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("charges.csv"), &header_refs, &rows)?;

    let mut manifest = Manifest::new(&text, cfg.seed);
    manifest.singular = series.snapshots.iter().find_map(|s| s.singular);
    manifest.write(&out.join("manifest.json"))
}

/// One seeded rational element with a handful of terms in a safe grade band.
fn random_rational_element(rng: &mut ChaCha8Rng) -> LoopElement<num_rational::BigRational> {
    let mut e = LoopElement::zero();
    for _ in 0..4 {
        let power = rng.gen_range(-2..=3i64);
        let gen = match rng.gen_range(0..3u8) {
            0 => Generator::b(power),
            1 => Generator::f1(power),
            _ => Generator::f2(power),
        };
        let num = rng.gen_range(-9..=9i64);
        let den = rng.gen_range(1..=9i64);
        e.add_term(gen, rat(num, den));
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

#[derive(Serialize)]
struct AlgebraReport {
    seed: u64,
    triples: usize,
    antisymmetry_failures: usize,
    jacobi_failures: usize,
    bch_samples: usize,
    bch_failures: usize,
    bch_worst_ratio: f64,
    corrupt_mode: bool,
}

fn cmd_verify_algebra(
    seed: u64,
    triples: usize,
    samples: usize,
    depth: usize,
    corrupt: bool,
    out: Option<&Path>,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = GradeWindow::new(-12, 16);
    let mut anti_fail = 0usize;
    let mut jacobi_fail = 0usize;
    for _ in 0..triples {
        let x = random_rational_element(&mut rng);
        let y = random_rational_element(&mut rng);
        let z = random_rational_element(&mut rng);
        let mut xy = commutator(&x, &y, window)?;
        if corrupt {
            // stand-in for a corrupted bracket table
            xy.add_term(Generator::b(0), rat(1, 1));
        }
        let yx = commutator(&y, &x, window)?;
        if !xy.add(&yx).is_zero() {
            anti_fail += 1;
        }
        let j = commutator(&x, &commutator(&y, &z, window)?, window)?
            .add(&commutator(&y, &commutator(&z, &x, window)?, window)?)
            .add(&commutator(&z, &xy, window)?);
        if !j.is_zero() {
            jacobi_fail += 1;
        }
    }

    // BCH truncation vs dense 2x2 conjugation at a fixed spectral parameter
    let lambda = 0.9;
    let mut bch_fail = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = random_f64_element(&mut rng, 0.1);
        // error scales like |X|^(depth+1) * |Y|; keep |Y| below one so the
        // plain |X|^(depth+1) bound holds with margin
        let y = random_f64_element(&mut rng, 0.3);
        let series = bch_conjugate(&x, &y, depth, window)?;
        let approx = element_matrix(&series.sum(), lambda);
        let xm = element_matrix(&x, lambda);
        let ym = element_matrix(&y, lambda);
        let ex = mat_exp(xm);
        let exact = mat_mul(mat_mul(ex, ym), mat_inv(ex));
        let err = mat_norm([
            [approx[0][0] - exact[0][0], approx[0][1] - exact[0][1]],
            [approx[1][0] - exact[1][0], approx[1][1] - exact[1][1]],
        ]);
        let bound = mat_norm(xm).powi(depth as i32 + 1);
        if err >= bound {
            bch_fail += 1;
        }
        if bound > 0.0 {
            worst = worst.max(err / bound);
        }
    }

    let report = AlgebraReport {
        seed,
        triples,
        antisymmetry_failures: anti_fail,
        jacobi_failures: jacobi_fail,
        bch_samples: samples,
        bch_failures: bch_fail,
        bch_worst_ratio: worst,
        corrupt_mode: corrupt,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("algebra_report.json"), &text)?;
        }
        None => println!("{text}"),
    }
    if anti_fail + jacobi_fail + bch_fail > 0 {
        return Err(QiError::domain(format!(
            "algebra identities failed: antisymmetry {anti_fail}, jacobi {jacobi_fail}, bch {bch_fail}"
        )));
    }
    Ok(())
}

fn cmd_map_nls(config_path: &Path, out: &Path) -> Result<()> {
    let (text, cfg) = load_config(config_path)?;
    let map = cfg
        .map
        .clone()
        .ok_or_else(|| QiError::validation("map section required for this subcommand"))?;
    fs::create_dir_all(out)?;

    let cc = CorrespondenceConfig::default();
    let beta = 1.0 + 5.0 / 3.0 * map.eps_def.unwrap_or(0.0);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for eps in &map.eps_list {
        let err = correspondence_error(*eps, map.eps_def, &cc)?;
        points.push((*eps, err));
        rows.push(vec![*eps, err, beta]);
    }
    write_csv(&out.join("scaling.csv"), &["eps", "linf_error", "beta"], &rows)?;

    let slope = fitted_slope(&points);
    let mut manifest = Manifest::new(&text, cfg.seed);
    manifest
        .notes
        .push(format!("log-log error slope = {}", qikdv::report::fmt_f64(slope)));
    manifest.write(&out.join("manifest.json"))
}

fn cmd_coupled(config_path: &Path, out: &Path, orders: Option<usize>) -> Result<()> {
    let (text, cfg) = load_config(config_path)?;
    let orders = orders.unwrap_or(cfg.orders).min(2);
    fs::create_dir_all(out)?;

    let (spec_q, spec_qbar) = match cfg.equation {
        qikdv::pde::Equation::CoupledKdv { spec_q, spec_qbar } => (spec_q, spec_qbar),
        _ => (
            qikdv::deformations::DeformationSpec::None,
            qikdv::deformations::DeformationSpec::None,
        ),
    };
    let state0 = CoupledState::from_reduction(&cfg.initial_field()?)?;
    let traj = evolve_coupled(
        &state0,
        spec_q,
        spec_qbar,
        cfg.time.dt,
        cfg.time.t_end,
        cfg.time.sample_every,
    )?;

    let mut header = vec![
        "t".to_string(),
        "q_max_abs".to_string(),
        "qbar_max_abs".to_string(),
        "conjugate_defect".to_string(),
    ];
    for n in 0..=orders {
        header.push(format!("R{n}_re"));
        header.push(format!("R{n}_im"));
        header.push(format!("dR{n}_dt_re"));
    }
    let mut rows = Vec::new();
    let mut singular = None;
    for s in &traj {
        let FieldState::Pair { q, qbar } = &s.field else {
            continue;
        };
        let state = CoupledState::new(q.clone(), qbar.clone())?;
        let gc = solve_gauge_coupled(&state, orders, 8)?;
        singular = singular.or(gc.singular);
        let mut row = vec![s.t, q.max_abs(), qbar.max_abs(), state.conjugate_defect()];
        for n in 0..=orders {
            let r = charge_rn(&state, &gc, n);
            let rate = anomaly_rate_rn(&state, &gc, &spec_q, &spec_qbar, n)?;
            row.push(r.re);
            row.push(r.im);
            row.push(rate.re);
        }
        rows.push(row);
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("coupled_charges.csv"), &header_refs, &rows)?;

    let mut manifest = Manifest::new(&text, cfg.seed);
    manifest.singular = singular;
    manifest.write(&out.join("manifest.json"))
}
