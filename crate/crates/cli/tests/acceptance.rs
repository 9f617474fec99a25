//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;
use vch_core::branchstate::build_branched_state;
use vch_core::estimators::{element_readout, Part, ShotPlan};
use vch_core::histories::{decoherence_matrix, HistoryLabel, TraceMode};
use vch_core::models::{axis_family, chiral_model, spin_field_family, spin_field_model, sphere_mesh, ChiralConfig, SpinFieldConfig};
use vch_core::report::{build_report, ReadoutPlan};
use vch_core::vchloop::optimize::periodic_distance;
use vch_core::vchloop::{cost, cost_at, landscape_scan, optimize, AnsatzKind, AnsatzSpec, Axis, CostMode, Grid, OptimizeResult, OptimizerConfig};
use vch_core::verify::{cost_identities, route_equivalence, Mutation};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let r = f();
    let dt = t.elapsed();
    match r {
        Ok(d) if dt <= limit => Ok(format!("{d}; {:.1}s", dt.as_secs_f64())),
        Ok(d) => Err(format!("{d}; took {:.1}s, limit {}s", dt.as_secs_f64(), limit.as_secs())),
        Err(d) => Err(format!("{d}; {:.1}s", dt.as_secs_f64())),
    }
}

const C_AT_ORIGIN: f64 = 0.1709085765514323;
const FLIP_PROBABILITY: f64 = 9.99954167944417e-05;

fn spin() -> vch_core::histories::ModelSpec {
    spin_field_model(&SpinFieldConfig::default()).unwrap()
}

fn azimuth() -> AnsatzSpec {
    AnsatzSpec::new(AnsatzKind::AzimuthXy, 2, false).unwrap()
}

/// Distance from the nearer of the two valley lines `phi1 = 2` and
/// `phi2 - phi1 = 2`, modulo pi.
fn valley_distance(p: &[f64]) -> f64 {
    let d1 = periodic_distance(&[p[0]], &[2.0], PI);
    let d2 = periodic_distance(&[p[1] - p[0]], &[2.0], PI);
    d1.min(d2)
}

fn route() -> Outcome {
    timed(Duration::from_secs(120), || {
        let r = route_equivalence(0..100, Mutation::None).map_err(|e| e.to_string())?;
        check(r.passed && r.cases == 100 && r.max_error < 1e-12, format!("{} cases, max error {:.2e}", r.cases, r.max_error))
    })
}

fn identities() -> Outcome {
    timed(Duration::from_secs(60), || {
        let r = cost_identities(0..100, Mutation::None).map_err(|e| e.to_string())?;
        check(r.passed && r.cases == 100 && r.max_error < 1e-12, format!("{} cases, max error {:.2e}", r.cases, r.max_error))
    })
}

fn landscape_structure() -> Outcome {
    timed(Duration::from_secs(60), || {
        // 100 points per period of 2 pi, shifted so phi1 = 2 and phi2 - phi1 = 2 fall on grid lines
        let h = 2.0 * PI / 100.0;
        let a1 = Axis { start: 2.0 - 31.0 * h, stop: 2.0 - 31.0 * h + 2.0 * PI, count: 100 };
        let a2 = Axis { start: 4.0 - 63.0 * h, stop: 4.0 - 63.0 * h + 2.0 * PI, count: 100 };
        let rows = landscape_scan(&spin(), &azimuth(), &Grid::Axes(vec![a1, a2]), CostMode::Full, &ShotPlan::exact()).map_err(|e| e.to_string())?;
        if rows.len() != 10_000 {
            return Err(format!("{} rows", rows.len()));
        }
        let mut on_lines = 0;
        let mut worst = 0.0f64;
        for (r, row) in rows.iter().enumerate() {
            let (i, j) = ((r / 100) as i64, (r % 100) as i64);
            // pi is 50 grid steps
            if i % 50 == 31 || (j - i).rem_euclid(50) == 32 {
                on_lines += 1;
                worst = worst.max(row.cost.c);
            }
        }
        let origin = cost_at(&spin(), &azimuth(), &[0.0, 0.0], CostMode::Full, &ShotPlan::exact()).map_err(|e| e.to_string())?.c;
        check(
            worst < 1e-10 && on_lines >= 4 * 100 - 4 && origin > 1e-3 && (origin - C_AT_ORIGIN).abs() < 1e-12,
            format!("{on_lines} points on valley lines, max cost {worst:.2e}; C(0,0) = {origin:.15}"),
        )
    })
}

fn noise() -> Outcome {
    let (model, ansatz) = (spin(), azimuth());
    let mut rng = ShotPlan::exact().derive("acceptance-points").rng();
    let mut worst_z = 0.0f64;
    for i in 0..100u64 {
        let p = [rng.random_range(0.0..PI), rng.random_range(0.0..PI)];
        let plan = ShotPlan::sampled(8192, 1000 + i).unwrap();
        let s = cost_at(&model, &ansatz, &p, CostMode::Full, &plan).map_err(|e| e.to_string())?;
        let e = cost_at(&model, &ansatz, &p, CostMode::Full, &ShotPlan::exact()).map_err(|e| e.to_string())?;
        let combined = (s.c_stderr.powi(2) + e.c_stderr.powi(2)).sqrt();
        if combined == 0.0 {
            return Err(format!("zero standard error at {p:?}"));
        }
        worst_z = worst_z.max((s.c - e.c).abs() / combined);
    }
    // on a valley line but away from (2, 4), where sigma_A is pure and shots are noiseless
    let zeros = [[2.0, 1.0], [0.5, 2.5]];
    let mut negatives = 0;
    for seed in 0..100 {
        let zero = zeros[seed as usize % 2];
        let exact = cost_at(&model, &ansatz, &zero, CostMode::Full, &ShotPlan::exact()).map_err(|e| e.to_string())?.c;
        if exact.abs() > 1e-14 {
            return Err(format!("{zero:?} is not a zero of the cost ({exact:e})"));
        }
        let s = cost_at(&model, &ansatz, &zero, CostMode::Full, &ShotPlan::sampled(8192, seed).unwrap()).map_err(|e| e.to_string())?;
        if s.c < 0.0 {
            negatives += 1;
        }
    }
    check(worst_z <= 5.0 && negatives >= 1, format!("max |sampled - exact| = {worst_z:.2} stderr; {negatives}/100 negative samples at a zero point"))
}

fn regimes() -> Outcome {
    let costs = |cfg: &ChiralConfig, axis: [f64; 3]| {
        let m = chiral_model(cfg).unwrap();
        cost(&m, &axis_family(axis, m.k()).unwrap(), CostMode::Both, &ShotPlan::exact()).unwrap()
    };
    let quantum = ChiralConfig { theta_z: 5.0, theta_x: 0.01, ..Default::default() };
    let (qz, qx, qy) = (costs(&quantum, [0.0, 0.0, 1.0]), costs(&quantum, [1.0, 0.0, 0.0]), costs(&quantum, [0.0, 1.0, 0.0]));
    let classical = ChiralConfig { theta_z: 0.01, theta_x: 5.0, ..Default::default() };
    let cy = costs(&classical, [0.0, 1.0, 0.0]);

    let mesh = sphere_mesh();
    let ix = mesh.nearest([1.0, 0.0, 0.0]);
    let cx = costs(&classical, mesh.vertices[ix]);
    let local_min = mesh.neighbors[ix].iter().all(|&n| {
        let c = costs(&classical, mesh.vertices[n]);
        c.c > cx.c && c.c_pt.unwrap() > cx.c_pt.unwrap()
    });
    let axis_exact = mesh.vertices[ix] == [1.0, 0.0, 0.0];
    check(
        qz.c < 1e-6 && qx.c > 1e-3 && qy.c > 1e-3 && axis_exact && local_min && cy.c < 1e-6 && cy.c_pt.unwrap() > 1e-3,
        format!(
            "quantum: C_z {:.1e}, C_x {:.1e}, C_y {:.1e}; classical: x local min {local_min} ({} neighbours), C_y {:.1e}, C_pt,y {:.1e}",
            qz.c,
            qx.c,
            qy.c,
            mesh.neighbors[ix].len(),
            cy.c,
            cy.c_pt.unwrap()
        ),
    )
}

fn chirality() -> Outcome {
    let m = chiral_model(&ChiralConfig::default()).unwrap();
    let state = build_branched_state(&m, &axis_family([1.0, 0.0, 0.0], m.k()).unwrap()).unwrap();
    let c = vch_core::vchloop::cost_of_state(&state, CostMode::Full, &ShotPlan::exact()).unwrap();
    let rep = build_report(&state, c, &ReadoutPlan::exact(1_000_000, 0.05)).unwrap();
    let p = rep.switch_probability;
    check(
        (p - FLIP_PROBABILITY).abs() < 1e-12 && p > 1e-4 / 3.0 && p < 3e-4,
        format!("flip probability {p:.15e} (oracle {FLIP_PROBABILITY:.15e})"),
    )
}

fn element() -> Outcome {
    let model = spin();
    let mut worst = 0.0f64;
    for p in [[0.0, 0.0], [0.7, 2.9], [2.0, 1.3]] {
        let fam = spin_field_family(p[0], p[1]).unwrap();
        let state = build_branched_state(&model, &fam).unwrap();
        let d = decoherence_matrix(&model, &fam, TraceMode::Full).unwrap();
        let labels = fam.labels();
        for (i, a) in labels.iter().enumerate() {
            for (j, b) in labels.iter().enumerate() {
                let re = element_readout(&state, a, b, Part::Real, &ShotPlan::exact()).unwrap().value;
                let im = element_readout(&state, a, b, Part::Imaginary, &ShotPlan::exact()).unwrap().value;
                worst = worst.max((re - d.scalar(i, j).re).abs()).max((im - d.scalar(i, j).im).abs());
            }
        }
    }

    // RMS error times sqrt(N) should not depend on N
    let fam = spin_field_family(0.7, 2.9).unwrap();
    let state = build_branched_state(&model, &fam).unwrap();
    let d = decoherence_matrix(&model, &fam, TraceMode::Full).unwrap();
    let dims = fam.ancilla_dims();
    let (a, b) = (HistoryLabel::parse("00", &dims).unwrap(), HistoryLabel::parse("11", &dims).unwrap());
    let (ia, ib) = (a.index(&dims).unwrap(), b.index(&dims).unwrap());
    let mut scaled = Vec::new();
    for n in [100u64, 1_000, 10_000] {
        let mut sq = 0.0;
        let reps = 2000u64;
        for s in 0..reps {
            let plan = ShotPlan::sampled(n, s).unwrap().derive("element-scaling");
            let re = element_readout(&state, &a, &b, Part::Real, &plan).unwrap().value;
            let im = element_readout(&state, &a, &b, Part::Imaginary, &plan).unwrap().value;
            sq += (re - d.scalar(ia, ib).re).powi(2) + (im - d.scalar(ia, ib).im).powi(2);
        }
        scaled.push((sq / (2 * reps) as f64).sqrt() * (n as f64).sqrt());
    }
    let spread = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    check(
        worst < 1e-12 && spread <= 1.2,
        format!("exact max error {worst:.2e}; rms*sqrt(N) = {:.4}, {:.4}, {:.4} (ratio {spread:.3})", scaled[0], scaled[1], scaled[2]),
    )
}

fn spin_optimum() -> OptimizeResult {
    let cfg = OptimizerConfig { restarts: 20, ..Default::default() };
    optimize(&spin(), &azimuth(), CostMode::Full, &ShotPlan::exact().derive("acceptance"), &cfg).unwrap()
}

fn epsilon_chain(res: &OptimizeResult) -> Outcome {
    let model = spin();
    let mut worst_gap = 0.0f64;
    let mut worst_bound = 0.0f64;
    for m in &res.minima {
        let fam = azimuth().family(&m.params).unwrap();
        let d = decoherence_matrix(&model, &fam, TraceMode::Full).unwrap();
        let c = d.off_diagonal_mass();
        for i in 0..d.len() {
            for j in 0..d.len() {
                if i != j {
                    worst_gap = worst_gap.max(d.scalar(i, j).norm_sqr() - c / 2.0);
                }
            }
        }
        let state = build_branched_state(&model, &fam).unwrap();
        let rep = build_report(&state, m.cost, &ReadoutPlan::exact(1_000_000, 0.05)).unwrap();
        let pair_max = rep.epsilon_pairs.iter().filter_map(|p| p.epsilon).fold(0.0, f64::max);
        match (rep.epsilon_bound, rep.delta) {
            (Some(bound), Some(delta)) => worst_bound = worst_bound.max((bound - pair_max.max(delta)).abs()),
            (None, None) if rep.high_entropy => {}
            other => return Err(format!("inconsistent bound fields {other:?}")),
        }
    }
    check(
        !res.minima.is_empty() && worst_gap <= 0.0 && worst_bound < 1e-12,
        format!("{} families; max |D|^2 - C/2 = {worst_gap:.2e}; bound mismatch {worst_bound:.2e}", res.minima.len()),
    )
}

fn optimizer(res: &OptimizeResult) -> Outcome {
    let near = res.minima.iter().filter(|m| valley_distance(&m.params) < 0.05).count();
    let total = res.minima.len();
    check(total > 0 && near * 5 >= total * 4, format!("{near}/{total} accepted minima within 0.05 rad of a valley line"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        r#"
[model]
builtin = "spin-field"
[ansatz]
kind = "azimuth-xy"
[grid]
axes = [{ start = 0.0, stop = 3.14159, count = 12 }, { start = 0.0, stop = 3.14159, count = 12 }]
[optimizer]
restarts = 6
max_evals = 300
"#,
    )
    .map_err(|e| e.to_string())?;
    let run = |cmd: &str, workers: &str, tag: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(format!("{cmd}-{tag}"));
        let status = Command::new(env!("CARGO_BIN_EXE_vch"))
            .args([cmd, "--config"])
            .arg(&config)
            .args(["--seed", "17", "--shots", "4096", "--workers", workers, "--out"])
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("vch {cmd} exited with {status}"));
        }
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    let mut same = true;
    for cmd in ["landscape", "optimize"] {
        let first = run(cmd, "4", "a")?;
        same &= first == run(cmd, "4", "b")? && first == run(cmd, "1", "c")?;
    }
    check(same, "landscape and optimize outputs byte-identical across repeats and worker counts".into())
}

fn main() -> ExitCode {
    let res = spin_optimum();
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        ("route equivalence", Box::new(route)),
        ("cost identities", Box::new(identities)),
        ("landscape valley structure", Box::new(landscape_structure)),
        ("sampled cost noise", Box::new(noise)),
        ("chiral regimes", Box::new(regimes)),
        ("chirality stability", Box::new(chirality)),
        ("element readout", Box::new(element)),
        ("epsilon bound chain", Box::new(|| epsilon_chain(&res))),
        ("optimizer minima on valleys", Box::new(|| optimizer(&res))),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.into_iter().enumerate() {
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}: {name}: {detail}", n + 1);
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
