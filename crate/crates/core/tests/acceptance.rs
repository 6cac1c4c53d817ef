//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
//! when any criterion fails. The flower study is slow and runs only with
//! `--ignored` or `--include-ignored`.

#![allow(clippy::needless_range_loop)]

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ventcel::analysis::{run_study, StudyConfig, StudyReport};
use ventcel::assembly::{assemble_forms, assemble_forms_with, AssemblyOptions, FeSpace, MassPlacement, SparseMatrix};
use ventcel::eigsolve::{solve_generalized, EigenOptions};
use ventcel::geometry::SmoothDomain;
use ventcel::lift::ExactMapEval;
use ventcel::mesh::{curve_mesh, generate_star_mesh, CurvedMesh};
use ventcel::refelem::{reference_vertex, TRIANGLE_EDGES};
use ventcel::Point2;

const BASE_EDGES: usize = 20;
const DESK_LEVELS: usize = 4;
const TRACKED: usize = 6;

struct Gate {
    passed: usize,
    failed: usize,
}

impl Gate {
    fn report(&mut self, id: usize, name: &str, ok: bool, detail: &str) {
        println!("{} {id} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

fn level_edges(level: usize) -> usize {
    BASE_EDGES << (level - 1)
}

fn curved(dom: &SmoothDomain, nb: usize, r: usize) -> Arc<CurvedMesh> {
    let m = generate_star_mesh(dom, nb).expect("mesh");
    Arc::new(curve_mesh(&m, dom, r).expect("curved mesh"))
}

fn log2_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn fmt_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn constant_mode(gate: &mut Gate) {
    let dom = SmoothDomain::unit_disk();
    let mut worst = 0.0f64;
    let mut at = (0, 0, 0);
    for level in 1..=DESK_LEVELS {
        for r in 1..=3 {
            let mesh = curved(&dom, level_edges(level), r);
            for k in 1..=3 {
                let space = FeSpace::new(mesh.clone(), k).unwrap();
                let forms = assemble_forms(&space).unwrap();
                let res = solve_generalized(&forms.a(), &forms.m(MassPlacement::Boundary), &EigenOptions::new(2)).unwrap();
                let dev = (res.values[0] - 1.0).abs();
                if dev > worst {
                    worst = dev;
                    at = (r, k, level);
                }
            }
        }
    }
    gate.report(
        1,
        "constant mode",
        worst <= 1e-9,
        &format!("max |Lambda_1 - 1| = {worst:.2e} (r={}, k={}, level {}), tol 1e-9", at.0, at.1, at.2),
    );
}

fn disk_study(r: usize, k: usize) -> StudyReport {
    let cfg = StudyConfig::parse(&format!(
        "domain = disk\norder = {r}\ndegree = {k}\nlevels = {DESK_LEVELS}\ntracked = {TRACKED}\nplacement = boundary\n"
    ))
    .unwrap();
    run_study(&cfg).unwrap()
}

fn disk_orders(gate: &mut Gate) {
    let studies: HashMap<(usize, usize), StudyReport> = [(1, 1), (1, 2), (2, 2), (3, 2), (3, 3)]
        .into_iter()
        .map(|rk| (rk, disk_study(rk.0, rk.1)))
        .collect();
    let last = |rk: (usize, usize)| studies[&rk].final_eoc().copied().unwrap();
    let tracked = studies.values().all(|s| s.levels.iter().all(|l| l.in_cluster));

    let lam = [((1, 1), 2.00, 0.15), ((2, 2), 4.01, 0.35), ((3, 3), 3.89, 0.40)];
    let ok = tracked && lam.iter().all(|&(rk, t, tol)| within(last(rk).order_lambda, t, tol));
    let detail: Vec<String> = lam
        .iter()
        .map(|&(rk, t, tol)| format!("(r={},k={}) {:.3} vs {t:.2}+-{tol:.2}", rk.0, rk.1, last(rk).order_lambda))
        .collect();
    gate.report(2, "disk eigenvalue orders", ok, &detail.join("; "));

    let h1 = [((1, 1), 1.00, 0.15), ((1, 2), 1.51, 0.20), ((2, 2), 2.01, 0.20)];
    let l2 = [((1, 1), 2.01, 0.20), ((1, 2), 2.48, 0.25), ((2, 2), 3.07, 0.30)];
    let ok = h1.iter().all(|&(rk, t, tol)| within(last(rk).order_h10, t, tol))
        && l2.iter().all(|&(rk, t, tol)| within(last(rk).order_l2, t, tol));
    let mut detail: Vec<String> = h1
        .iter()
        .map(|&(rk, t, tol)| format!("H1 (r={},k={}) {:.3} vs {t:.2}+-{tol:.2}", rk.0, rk.1, last(rk).order_h10))
        .collect();
    detail.extend(
        l2.iter()
            .map(|&(rk, t, tol)| format!("L2 (r={},k={}) {:.3} vs {t:.2}+-{tol:.2}", rk.0, rk.1, last(rk).order_l2)),
    );
    gate.report(3, "disk eigenfunction orders", ok, &detail.join("; "));

    let row = last((3, 2));
    let ok = (2.9..=3.6).contains(&row.order_lambda) && (1.3..=1.7).contains(&row.order_h10);
    gate.report(
        4,
        "r=3 k=2 order loss",
        ok,
        &format!(
            "order_lambda {:.3} in [2.9, 3.6], H1 {:.3} in [1.3, 1.7]",
            row.order_lambda, row.order_h10
        ),
    );
}

fn geometry_checksums(gate: &mut Gate) {
    let dom = SmoothDomain::unit_disk();
    let mut ok = true;
    let mut detail = Vec::new();
    for r in 1..=3 {
        let (mut ea, mut el) = (Vec::new(), Vec::new());
        for level in 1..=DESK_LEVELS {
            let m = curved(&dom, level_edges(level), r);
            ea.push((m.area().unwrap() - PI).abs());
            el.push((m.boundary_length().unwrap() - 2.0 * PI).abs());
        }
        let (oa, ol) = (log2_orders(&ea), log2_orders(&el));
        let min = (r + 1) as f64 - 0.2;
        ok &= oa.iter().chain(&ol).all(|&o| o >= min);
        detail.push(format!("r={r} area {} length {} (>= {min:.1})", fmt_list(&oa), fmt_list(&ol)));
    }
    gate.report(5, "geometry checksums", ok, &detail.join("; "));
}

/// Eigen-decomposition of a dense symmetric matrix by cyclic Jacobi rotations.
fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[i][j].powi(2)).sum();
        if off < 1e-32 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if tau == 0.0 { 1.0 } else { tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt()) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c * x - s * y;
                    row[q] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (a[p][k], a[q][k]);
                    a[p][k] = c * x - s * y;
                    a[q][k] = s * x + c * y;
                }
                for row in v.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c * x - s * y;
                    row[q] = s * x + c * y;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Pencil eigenvalues through `M^{-1/2} A M^{-1/2}`.
fn dense_pencil(a: &[Vec<f64>], m: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let (d, v) = jacobi(m.to_vec());
    let s: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| v[i][k] * v[j][k] / d[k].sqrt()).sum()).collect())
        .collect();
    let c: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).flat_map(|p| (0..n).map(move |q| (p, q))).map(|(p, q)| s[i][p] * a[p][q] * s[q][j]).sum())
                .collect()
        })
        .collect();
    let mut ev = jacobi(c).0;
    ev.sort_by(f64::total_cmp);
    ev
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 })
                .collect()
        })
        .collect()
}

fn pencil_oracle(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for case in 0..50u64 {
        let a = random_spd(&mut rng, 5);
        let m = random_spd(&mut rng, 5);
        let expect = dense_pencil(&a, &m);
        let opts = EigenOptions {
            n_eig: 5,
            seed: case,
            ..EigenOptions::default()
        };
        match solve_generalized(&SparseMatrix::from_dense(&a), &SparseMatrix::from_dense(&m), &opts) {
            Ok(res) => {
                for (x, y) in res.values.iter().zip(&expect) {
                    worst = worst.max((x - y).abs());
                }
            }
            Err(_) => failures += 1,
        }
    }
    gate.report(
        6,
        "pencil oracle",
        failures == 0 && worst <= 1e-10,
        &format!("50 pencils, {failures} solver errors, max |Lanczos - Jacobi| = {worst:.2e}, tol 1e-10"),
    );
}

fn random_reference_point(rng: &mut ChaCha8Rng) -> Point2 {
    let (a, b): (f64, f64) = (rng.random(), rng.random());
    if a + b <= 1.0 {
        Point2::new(a, b)
    } else {
        Point2::new(1.0 - a, 1.0 - b)
    }
}

fn lift_properties(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut trace, mut jump, mut fd_rel) = (0.0f64, 0.0f64, 0.0f64);
    let mut meshes = 0;
    for dom in [SmoothDomain::unit_disk(), SmoothDomain::flower(0.3, 0.4).unwrap()] {
        for nb in [20, 40] {
            for r in 1..=3 {
                let mesh = curved(&dom, nb, r);
                let base = mesh.base();
                meshes += 1;
                let mut owners: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
                for (t, tri) in base.triangles.iter().enumerate() {
                    for (e, &(a, b)) in TRIANGLE_EDGES.iter().enumerate() {
                        owners.entry((tri[a].min(tri[b]), tri[a].max(tri[b]))).or_default().push((t, e));
                    }
                }
                let touching: Vec<usize> = (0..mesh.n_elements()).filter(|&t| !mesh.is_internal(t)).collect();
                for _ in 0..20 {
                    let t = touching[rng.random_range(0..touching.len())];
                    let ev = ExactMapEval::new(&mesh, &dom, t);
                    let tri = base.triangles[t];
                    for &(a, b) in &TRIANGLE_EDGES {
                        let s: f64 = rng.random();
                        let p = reference_vertex(a) * (1.0 - s) + reference_vertex(b) * s;
                        let e = ev.exact_point(&p).unwrap();
                        if base.boundary_flags[tri[a]] && base.boundary_flags[tri[b]] {
                            let b_of_f = dom.closest_point(&mesh.map(t, &p)).unwrap().point;
                            trace = trace.max((e - b_of_f).norm());
                        }
                        let key = (tri[a].min(tri[b]), tri[a].max(tri[b]));
                        for &(u, f) in &owners[&key] {
                            if u == t {
                                continue;
                            }
                            let (c, d) = TRIANGLE_EDGES[f];
                            // same physical point seen from the neighbour
                            let s2 = if base.triangles[u][c] == tri[a] { s } else { 1.0 - s };
                            let q = reference_vertex(c) * (1.0 - s2) + reference_vertex(d) * s2;
                            let e2 = ExactMapEval::new(&mesh, &dom, u).exact_point(&q).unwrap();
                            jump = jump.max((e - e2).norm());
                        }
                    }
                    for _ in 0..3 {
                        let p = random_reference_point(&mut rng);
                        let d = ev.exact_differential(&p).unwrap().d;
                        let fd = ev.fd_differential(&p).unwrap();
                        fd_rel = fd_rel.max((d - fd).norm() / d.norm());
                    }
                }
            }
        }
    }
    gate.report(
        7,
        "lift properties",
        trace <= 1e-9 && jump <= 1e-10 && fd_rel <= 1e-5,
        &format!(
            "{meshes} meshes x 20 elements: trace {trace:.2e} (1e-9), continuity {jump:.2e} (1e-10), FD {fd_rel:.2e} (1e-5 rel)"
        ),
    );
}

fn relative_change(x: &SparseMatrix, y: &SparseMatrix) -> f64 {
    x.add_scaled(y, -1.0).max_abs() / x.max_abs()
}

fn quadrature_saturation(gate: &mut Gate) {
    let dom = SmoothDomain::unit_disk();
    let (mut entries, mut e_lambda) = (0.0f64, 0.0f64);
    for r in 1..=3 {
        let mesh = curved(&dom, BASE_EDGES, r);
        for k in 1..=3 {
            let space = FeSpace::new(mesh.clone(), k).unwrap();
            let opts = AssemblyOptions::for_space(&space);
            let lo = assemble_forms_with(&space, opts).unwrap();
            let hi = assemble_forms_with(&space, opts.scaled(2)).unwrap();
            for p in [MassPlacement::Boundary, MassPlacement::Volume] {
                entries = entries.max(relative_change(&lo.m(p), &hi.m(p)));
            }
            entries = entries.max(relative_change(&lo.a(), &hi.a()));
            let err = |f: &ventcel::assembly::Forms| {
                let res = solve_generalized(&f.a(), &f.m(MassPlacement::Boundary), &EigenOptions::new(10)).unwrap();
                (res.values[TRACKED - 1] - 13.0).abs()
            };
            let (e0, e1) = (err(&lo), err(&hi));
            e_lambda = e_lambda.max((e0 - e1).abs() / e0);
        }
    }
    gate.report(
        8,
        "quadrature saturation",
        entries < 1e-11 && e_lambda < 0.01,
        &format!("coarsest disk mesh, doubled degree: entries {entries:.2e} (1e-11 rel), e_lambda {:.2e}% (1%)", 100.0 * e_lambda),
    );
}

fn flower_study(gate: &mut Gate) {
    let flower = |r: usize, k: usize, levels: usize, reference: &str| {
        let cfg = StudyConfig::parse(&format!(
            "domain = flower\nalpha = 0.3\nbeta = 0.4\norder = {r}\ndegree = {k}\nlevels = {levels}\ntracked = {TRACKED}\nreference = {reference}\n"
        ))
        .unwrap();
        run_study(&cfg).unwrap()
    };
    let refrun = flower(3, 4, DESK_LEVELS + 1, "0");
    let reference = refrun.levels.last().unwrap().lambda;
    let mut ok = true;
    let mut detail = vec![format!("reference {reference:.12}")];
    for (r, ks, target, tol) in [(1, 1..=4, 2.0, 0.3), (2, 2..=4, 4.0, 0.5)] {
        for k in ks {
            let rep = flower(r, k, DESK_LEVELS, &format!("{reference:e}"));
            let o = rep.final_eoc().unwrap().order_lambda;
            ok &= within(o, target, tol);
            detail.push(format!("(r={r},k={k}) {o:.3} vs {target:.1}+-{tol:.1}"));
        }
    }
    gate.report(9, "flower eigenvalue orders", ok, &detail.join("; "));
}

type Criterion = (&'static str, fn(&mut Gate));

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let slow = args.iter().any(|a| a == "--ignored" || a == "--include-ignored");
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let selected = |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));

    let fast: [Criterion; 6] = [
        ("constant_mode", constant_mode),
        ("disk_orders", disk_orders),
        ("geometry_checksums", geometry_checksums),
        ("pencil_oracle", pencil_oracle),
        ("lift_properties", lift_properties),
        ("quadrature_saturation", quadrature_saturation),
    ];
    let mut gate = Gate { passed: 0, failed: 0 };
    let start = Instant::now();
    for (name, run) in fast {
        if selected(name) {
            run(&mut gate);
        }
    }
    if selected("flower_study") {
        if slow {
            flower_study(&mut gate);
        } else {
            println!("SKIP 9 flower eigenvalue orders: slow, run with --include-ignored");
        }
    }
    println!(
        "acceptance: {} passed, {} failed ({:.1}s)",
        gate.passed,
        gate.failed,
        start.elapsed().as_secs_f64()
    );
    if gate.failed > 0 {
        std::process::exit(1);
    }
}
