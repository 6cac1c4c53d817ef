use std::sync::Arc;

use ventcel::analysis::{run_study, ReferenceSpec, StudyConfig};
use ventcel::assembly::{assemble_forms, FeSpace, MassPlacement};
use ventcel::eigsolve::{solve_generalized, EigenOptions, InnerSolver};
use ventcel::geometry::SmoothDomain;
use ventcel::mesh::{curve_mesh, format_msh, generate_star_mesh, parse_msh};

#[test]
fn flower_study_with_computed_reference() {
    let cfg = StudyConfig::parse(
        "domain = flower\norder = 2\ndegree = 2\nlevels = 2\nreference = computed\nreference_order = 2\nreference_degree = 3\n",
    )
    .unwrap();
    assert_eq!(cfg.reference, ReferenceSpec::Computed { order: 2, degree: 3, level: 3 });
    let rep = run_study(&cfg).unwrap();
    assert_eq!(rep.levels.len(), 2);
    assert!(rep.levels.iter().all(|l| l.in_cluster && l.e_l2.is_none()));
    assert!(rep.levels[1].e_lambda < rep.levels[0].e_lambda);
    assert!(rep.eoc[0].order_l2.is_nan());
}

#[test]
fn volume_placement_keeps_the_constant_out() {
    let dom = SmoothDomain::unit_disk();
    let m = generate_star_mesh(&dom, 40).unwrap();
    let s = FeSpace::new(Arc::new(curve_mesh(&m, &dom, 2).unwrap()), 2).unwrap();
    let f = assemble_forms(&s).unwrap();
    let vol = solve_generalized(&f.a(), &f.m(MassPlacement::Volume), &EigenOptions::new(4)).unwrap();
    // the Rayleigh quotient of the constant is |Gamma| / |Omega| = 2
    assert!(vol.values[0] < 2.0 && vol.values[0] > 0.0);
    assert!(vol.max_residual() <= 1e-12);
}

#[test]
fn inner_solvers_agree() {
    let dom = SmoothDomain::flower(0.3, 0.4).unwrap();
    let m = generate_star_mesh(&dom, 20).unwrap();
    let s = FeSpace::new(Arc::new(curve_mesh(&m, &dom, 2).unwrap()), 2).unwrap();
    let f = assemble_forms(&s).unwrap();
    let (a, mm) = (f.a(), f.m(MassPlacement::Boundary));
    let values = |inner| {
        let opts = EigenOptions {
            inner,
            ..EigenOptions::new(6)
        };
        solve_generalized(&a, &mm, &opts).unwrap().values
    };
    let base = values(InnerSolver::SparseCholesky);
    for other in [InnerSolver::DenseCholesky, InnerSolver::cg()] {
        for (x, y) in base.iter().zip(values(other)) {
            assert!((x - y).abs() < 1e-9 * x.abs(), "{base:?}");
        }
    }
}

#[test]
fn msh_text_preserves_the_spectrum() {
    let dom = SmoothDomain::flower(0.3, 0.4).unwrap();
    let m = generate_star_mesh(&dom, 40).unwrap();
    let back = parse_msh(&format_msh(&m), &dom).unwrap();
    let spectrum = |mesh| {
        let s = FeSpace::new(Arc::new(curve_mesh(mesh, &dom, 3).unwrap()), 2).unwrap();
        let f = assemble_forms(&s).unwrap();
        solve_generalized(&f.a(), &f.m(MassPlacement::Boundary), &EigenOptions::new(5)).unwrap().values
    };
    assert_eq!(spectrum(&m), spectrum(&back));
}

#[test]
fn bundled_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let cfg = StudyConfig::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
            assert_eq!(cfg.levels, 4, "{}", path.display());
            n += 1;
        }
    }
    assert!(n >= 5);
}
