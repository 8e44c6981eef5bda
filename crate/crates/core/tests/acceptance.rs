//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Matrix6;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strainrod::bench::markers::{emit_synthetic, ingest_markers, Calibration, MarkerRecording};
use strainrod::bench::report::{Aggregate, Report};
use strainrod::bench::runner::{run_scenario, RunOptions, Solver, WarmState};
use strainrod::bench::scenario::{arc_tip, gen_bending, gen_bending_torsion, gen_torsion, gen_two_bending, ModelSpec, Scenario};
use strainrod::exact::{solve_exact_bvp, BoundaryConditions, ExactOptions, StaticRod};
use strainrod::gvs::{gvs_residual, gvs_stiffness, BasisKind};
use strainrod::interp::{kkt_gradient, kkt_lagrangian, InterpParams, KktState};
use strainrod::lie::{ad, dexp_se3, dexp_so3, dexpinv_se3, dexpinv_so3, exp_se3, exp_so3, hat3, Ad, Mat3, Pose, Twist, Vec3};
use strainrod::metrics::marker_error;
use strainrod::rod::{RodProperties, RodShape};

struct Outcome {
    failed: usize,
}

impl Outcome {
    fn record(&mut self, id: usize, title: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} [{id:>2}] {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn props() -> RodProperties {
    RodProperties::fibreglass_sim()
}

fn gvs3() -> ModelSpec {
    ModelSpec::gvs(BasisKind::Monomial, 3)
}

fn legendre3() -> ModelSpec {
    ModelSpec::gvs(BasisKind::Legendre, 3)
}

fn with_models(mut s: Scenario, models: Vec<ModelSpec>) -> Scenario {
    s.models = models;
    s
}

fn aggregate(report: &Report, model: &ModelSpec) -> Aggregate {
    report
        .aggregates()
        .into_iter()
        .find(|a| a.model == model.id())
        .expect("model present in report")
}

fn all_converged(a: &Aggregate) -> bool {
    a.converged == a.configs
}

fn timed_run(s: &Scenario) -> (Report, f64) {
    let t = Instant::now();
    let r = run_scenario(s, &props(), &RunOptions::default()).expect("reference converges");
    (r, t.elapsed().as_secs_f64())
}

/// Centreline length from chords on every, every second and every fourth
/// node, Romberg-extrapolated.
fn extrapolated_length(shape: &RodShape) -> f64 {
    let p: Vec<Vec3> = shape.samples.iter().map(|s| s.pose.position).collect();
    let chords = |k: usize| -> f64 {
        let q: Vec<&Vec3> = p.iter().step_by(k).collect();
        q.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    };
    let (l1, l2, l4) = (chords(1), chords(2), chords(4));
    (64.0 * l1 - 20.0 * l2 + l4) / 45.0
}

fn criterion_1(out: &mut Outcome) {
    let t = Instant::now();
    let bc = BoundaryConditions::new(arc_tip(&Vec3::new(0.0, PI, 0.0)));
    let target = Vec3::new(0.0, PI, 0.0);
    let centre = Vec3::new(0.0, 0.0, -1.0 / PI);
    let mut worst = Vec::new();
    let mut ok = true;
    for (spec, tol) in [(ModelSpec::interp(), 1e-6), (gvs3(), 1e-5)] {
        let solver = Solver::from_spec(&spec, &props(), false, &RunOptions::default()).unwrap();
        match solver.solve(&bc, None) {
            Ok((shape, _)) => {
                let dk = shape.samples.iter().map(|s| (s.strain.angular - target).norm()).fold(0.0, f64::max);
                let dc = shape
                    .samples
                    .iter()
                    .map(|s| ((s.pose.position - centre).norm() - 1.0 / PI).abs())
                    .fold(0.0, f64::max);
                ok &= dk <= tol && dc <= tol;
                worst.push(format!("{} |κ−κ*| {dk:.1e}, circle {dc:.1e} (tol {tol:.0e})", spec.id()));
            }
            Err(e) => {
                ok = false;
                worst.push(format!("{} failed: {e}", spec.id()));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    out.record(1, "uniform bending", ok && secs < 1.0, format!("{}; {secs:.2}s < 1s", worst.join("; ")));
}

fn criterion_2(out: &mut Outcome) {
    let s = with_models(gen_torsion(5, PI), vec![ModelSpec::interp(), gvs3()]);
    let (r, secs) = timed_run(&s);
    let a = aggregate(&r, &ModelSpec::interp());
    let g = aggregate(&r, &gvs3());
    let pass = all_converged(&a) && all_converged(&g) && a.max_e_r_max_pct < 0.01 && g.max_e_r_max_pct < 0.01 && secs < 2.0;
    out.record(
        2,
        "torsion",
        pass,
        format!(
            "max err interp {:.2e}%, gvs {:.2e}% (< 0.01%); {secs:.2}s < 2s",
            a.max_e_r_max_pct, g.max_e_r_max_pct
        ),
    );
}

fn criterion_3(out: &mut Outcome) -> (f64, f64) {
    let s = with_models(gen_bending(7), vec![ModelSpec::interp(), gvs3()]);
    let (r, secs) = timed_run(&s);
    let a = aggregate(&r, &ModelSpec::interp());
    let g = aggregate(&r, &gvs3());
    let pass = all_converged(&a)
        && all_converged(&g)
        && a.max_e_r_max_pct <= 2.0
        && a.mean_e_r_int_pct <= 0.6
        && g.max_e_r_max_pct <= 1.5
        && g.mean_e_r_int_pct <= 0.55
        && secs < 10.0;
    out.record(
        3,
        "bending",
        pass,
        format!(
            "interp max {:.3}% mean {:.3}% (≤ 2.0/0.6), gvs max {:.3}% mean {:.3}% (≤ 1.5/0.55); {secs:.2}s < 10s",
            a.max_e_r_max_pct, a.mean_e_r_int_pct, g.max_e_r_max_pct, g.mean_e_r_int_pct
        ),
    );
    (a.mean_time_s, g.mean_time_s)
}

fn criterion_4(out: &mut Outcome) -> (f64, f64) {
    let s = with_models(gen_two_bending(5), vec![ModelSpec::interp(), gvs3()]);
    let (r, secs) = timed_run(&s);
    let a = aggregate(&r, &ModelSpec::interp());
    let g = aggregate(&r, &gvs3());
    let pass = all_converged(&a) && all_converged(&g) && a.max_e_r_max_pct <= 0.8 && g.max_e_r_max_pct <= 0.7 && secs < 20.0;
    out.record(
        4,
        "two-bending",
        pass,
        format!(
            "interp max {:.3}% (≤ 0.8), gvs max {:.3}% (≤ 0.7); {secs:.2}s < 20s",
            a.max_e_r_max_pct, g.max_e_r_max_pct
        ),
    );
    (a.mean_time_s, g.mean_time_s)
}

fn criterion_5(out: &mut Outcome) -> (f64, f64) {
    let s = with_models(gen_bending_torsion(), vec![ModelSpec::interp(), legendre3()]);
    let (r, secs) = timed_run(&s);
    let a = aggregate(&r, &ModelSpec::interp());
    let g = aggregate(&r, &legendre3());
    let trend = |m: &ModelSpec| {
        let rows: Vec<f64> = r.rows_for(&s.name, &m.id()).map(|row| row.e_r_max_pct).collect();
        (rows[0], rows[rows.len() - 1])
    };
    let (a0, a1) = trend(&ModelSpec::interp());
    let (g0, g1) = trend(&legendre3());
    let pass = all_converged(&a)
        && all_converged(&g)
        && a.max_e_r_max_pct <= 3.5
        && g.max_e_r_max_pct <= 2.8
        && a1 >= a0
        && g1 >= g0
        && secs < 60.0;
    out.record(
        5,
        "bending-torsion",
        pass,
        format!(
            "interp max {:.3}% (≤ 3.5, first {a0:.3} → last {a1:.3}), gvs-legendre-3 max {:.3}% (≤ 2.8, first {g0:.3} → last {g1:.3}); {secs:.2}s < 60s",
            a.max_e_r_max_pct, g.max_e_r_max_pct
        ),
    );
    (a.mean_time_s, g.mean_time_s)
}

fn criterion_6(out: &mut Outcome, times: &[(&str, (f64, f64))]) {
    let pass = times.iter().all(|(_, (i, g))| i < g);
    let detail = times
        .iter()
        .map(|(name, (i, g))| format!("{name} {:.1} ms vs {:.1} ms", i * 1e3, g * 1e3))
        .collect::<Vec<_>>()
        .join(", ");
    out.record(6, "interp faster than GVS per configuration", pass, detail);
}

fn criterion_7(out: &mut Outcome) {
    let nitinol = RodProperties::nitinol();
    let rod = StaticRod::unloaded(&nitinol).unwrap();
    let opts = ExactOptions::default();
    let shapes: Vec<RodShape> = gen_bending(7)
        .configs
        .iter()
        .map(|p| solve_exact_bvp(&rod, &BoundaryConditions::new(*p), None, &opts).unwrap().0)
        .collect();
    let recording = emit_synthetic(&shapes, &nitinol, 2e-3, 7).unwrap();
    let parsed = MarkerRecording::parse(recording.to_csv().as_bytes()).unwrap();
    let mut means = Vec::new();
    for (bc, markers) in ingest_markers(&parsed, &nitinol, &Calibration::default()).unwrap() {
        let shape = solve_exact_bvp(&rod, &bc, None, &opts).unwrap().0;
        means.push(marker_error(&shape, &markers, nitinol.length).unwrap().mean);
    }
    let pct = 100.0 * means.iter().sum::<f64>() / means.len() as f64 / nitinol.length;
    out.record(
        7,
        "synthetic marker round trip",
        (0.15..=0.35).contains(&pct),
        format!("mean marker error {pct:.3}% of L over {} frames (band 0.15–0.35%)", means.len()),
    );
}

fn series3(m: &Mat3, shift: usize) -> Mat3 {
    let mut acc = Mat3::zeros();
    let mut p = Mat3::identity();
    let mut f: f64 = (1..=shift).map(|k| k as f64).product();
    for i in 0..30 {
        acc += p / f;
        p *= m;
        f *= (i + 1 + shift) as f64;
    }
    acc
}

fn criterion_8(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut v = |r: f64| -> Vec3 {
        loop {
            let u = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            if u.norm() <= 1.0 {
                return u * r;
            }
        }
    };
    let mut failures = 0usize;
    let mut worst = [0.0f64; 6];
    let mut check = |k: usize, e: f64, tol: f64| {
        worst[k] = worst[k].max(e);
        if !(e <= tol) {
            failures += 1;
        }
    };
    for _ in 0..1000 {
        let big = v(10.0);
        let r = exp_so3(&big);
        check(0, (r.transpose() * r - Mat3::identity()).norm().max((r.determinant() - 1.0).abs()), 1e-10);

        let x = v(3.0);
        let y = v(3.0);
        let tw = Twist::new(x, y);
        check(1, (dexp_so3(&x) * dexpinv_so3(&x).unwrap() - Mat3::identity()).norm(), 1e-10);
        check(1, (dexp_se3(&tw) * dexpinv_se3(&tw).unwrap() - Matrix6::identity()).norm(), 1e-10);
        check(2, (Ad(&exp_se3(&tw)) - ad(&tw).exp()).norm(), 1e-9);
        let round: Pose = exp_se3(&tw) * exp_se3(&tw.scale(-1.0));
        check(3, (round.rotation - Mat3::identity()).norm().max(round.position.norm()), 1e-10);
        check(4, (exp_so3(&x) - series3(&hat3(&x), 0)).norm(), 1e-12);
        check(5, (dexp_so3(&x) - series3(&hat3(&x), 1)).norm(), 1e-12);
    }
    out.record(
        8,
        "Lie kernel identities (1000 draws)",
        failures == 0,
        format!(
            "{failures} failures; worst: orthonormality {:.1e}, dexp·dexpinv {:.1e}, Ad/exp(ad) {:.1e}, exp(X)exp(−X) {:.1e}, exp series {:.1e}, dexp series {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    );
}

/// Every converged solve over scenarios 2–5, with chained warm starts.
fn all_solves() -> Vec<(String, BoundaryConditions, Solver, RodShape, WarmState)> {
    let scenarios = [
        (gen_torsion(5, PI), vec![ModelSpec::interp(), gvs3()]),
        (gen_bending(7), vec![ModelSpec::interp(), gvs3()]),
        (gen_two_bending(5), vec![ModelSpec::interp(), gvs3()]),
        (gen_bending_torsion(), vec![ModelSpec::interp(), legendre3()]),
    ];
    let opts = RunOptions::default();
    let mut out = Vec::new();
    for (s, models) in scenarios {
        let mut solvers = vec![("exact".to_string(), Solver::exact(&props(), false, &opts).unwrap())];
        for m in &models {
            solvers.push((m.id(), Solver::from_spec(m, &props(), false, &opts).unwrap()));
        }
        for (id, solver) in solvers {
            let mut warm = None;
            for pose in &s.configs {
                let bc = BoundaryConditions::new(*pose);
                let (shape, state) = solver.solve(&bc, warm.as_ref()).expect("solve converges");
                warm = Some(state.clone());
                out.push((format!("{}/{id}", s.name), bc, solver.clone(), shape, state));
            }
        }
    }
    out
}

fn criterion_9(out: &mut Outcome, solves: &[(String, BoundaryConditions, Solver, RodShape, WarmState)]) {
    let mut worst = (0.0, String::new());
    for (id, _, _, shape, _) in solves {
        let defect = shape.unit_speed_defect().max((extrapolated_length(shape) - 1.0).abs());
        if defect > worst.0 {
            worst = (defect, id.clone());
        }
    }
    out.record(
        9,
        "inextensibility",
        worst.0 <= 1e-6,
        format!("{} shapes, worst unit-speed defect {:.1e} ({}) ≤ 1e-6", solves.len(), worst.0, worst.1),
    );
}

fn criterion_10(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let k_bt = StaticRod::unloaded(&props()).unwrap().bending_torsion();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut r = |a: f64| Vec3::from_fn(|_, _| rng.random_range(-a..a));
        let state = KktState {
            params: InterpParams {
                kappa0: r(2.0),
                kappa1: r(2.0),
                x1: r(1.5),
            },
            lambda: r(3.0),
            residual: [0.0; 9],
        };
        let r_des = r(0.6);
        let g = kkt_gradient(&state, &k_bt, &r_des, 12).unwrap();
        let h = 1e-6;
        for i in 0..9 {
            let shifted = |d: f64| {
                let mut s = state;
                match i {
                    0..=2 => s.params.kappa0[i] += d,
                    3..=5 => s.params.kappa1[i - 3] += d,
                    _ => s.lambda[i - 6] += d,
                }
                kkt_lagrangian(&s, &k_bt, &r_des, 12).unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1.0);
            worst = worst.max(rel);
        }
    }
    out.record(
        10,
        "KKT gradient vs central differences (100 states)",
        worst <= 1e-5,
        format!("worst relative error {worst:.1e} ≤ 1e-5"),
    );
}

fn criterion_11(out: &mut Outcome) {
    let opts = RunOptions::default();
    let family = [
        Vec3::new(0.0, 0.4, 0.0),
        Vec3::new(0.0, PI, 0.0),
        Vec3::new(0.0, 1.0, 1.0),
        Vec3::new(0.5, 1.0, -0.5),
        Vec3::new(1.0, 0.8, 0.0),
        Vec3::new(-0.7, 0.0, 1.6),
    ];
    let mut worst: f64 = 0.0;
    let mut failure = None;
    for kappa in &family {
        let bc = BoundaryConditions::new(arc_tip(kappa));
        let mut shapes = Vec::new();
        for solver in [
            Solver::exact(&props(), false, &opts).unwrap(),
            Solver::from_spec(&ModelSpec::interp(), &props(), false, &opts).unwrap(),
            Solver::from_spec(&gvs3(), &props(), false, &opts).unwrap(),
        ] {
            match solver.solve(&bc, None) {
                Ok((s, _)) => shapes.push(s),
                Err(e) => failure = Some(format!("κ = {kappa:?}: {e}")),
            }
        }
        for s in &shapes {
            for j in 0..=100 {
                let tau = j as f64 / 100.0;
                let exact = exp_se3(&Twist::new(*kappa * tau, Vec3::x() * tau));
                let p = s.pose_at(tau);
                worst = worst.max((p.position - exact.position).norm()).max((p.rotation - exact.rotation).norm());
            }
        }
    }
    let pass = failure.is_none() && worst <= 1e-5;
    out.record(
        11,
        "constant-curvature agreement of all solvers",
        pass,
        match failure {
            Some(f) => format!("solve failed at {f}"),
            None => format!("{} arcs, worst pointwise deviation {worst:.1e} ≤ 1e-5", family.len()),
        },
    );
}

fn criterion_12(out: &mut Outcome, solves: &[(String, BoundaryConditions, Solver, RodShape, WarmState)]) {
    let mut worst = (0.0, String::new());
    for (id, bc, solver, shape, state) in solves {
        let r = match (solver, state) {
            (Solver::Exact(..), _) => bc.residual(shape.tip()).norm(),
            (Solver::Interp(k, o), WarmState::Interp(s)) => {
                let g = kkt_gradient(s, k, &bc.tip.position, o.order).unwrap();
                g.iter().map(|v| v * v).sum::<f64>().sqrt()
            }
            (Solver::Gvs(m, o), WarmState::Gvs(s)) => gvs_residual(m, &gvs_stiffness(m), bc, s, o.steps).unwrap().0.norm(),
            _ => f64::INFINITY,
        };
        let r = if shape.diagnostics.converged { r } else { f64::INFINITY };
        if r > worst.0 {
            worst = (r, id.clone());
        }
    }
    out.record(
        12,
        "independent residual certificates",
        worst.0 <= 1e-7,
        format!("{} solves, worst recomputed residual {:.1e} ({}) ≤ 1e-7", solves.len(), worst.0, worst.1),
    );
}

fn main() {
    let mut out = Outcome { failed: 0 };
    criterion_1(&mut out);
    criterion_2(&mut out);
    let t3 = criterion_3(&mut out);
    let t4 = criterion_4(&mut out);
    let t5 = criterion_5(&mut out);
    criterion_6(&mut out, &[("bending", t3), ("two-bending", t4), ("bending-torsion", t5)]);
    criterion_7(&mut out);
    criterion_8(&mut out);
    let solves = all_solves();
    criterion_9(&mut out, &solves);
    criterion_10(&mut out);
    criterion_11(&mut out);
    criterion_12(&mut out, &solves);
    println!("{} of 12 criteria passed", 12 - out.failed);
    if out.failed > 0 {
        std::process::exit(1);
    }
}
