use num_complex::Complex64 as C64;
use segre_core::catalog;
use segre_core::continuation::{
    continue_along_path, q_segre_check, ContinuationMode, ContinuationPath, LoopSpec, MapGerm, StepOptions,
};
use segre_core::expr::parse;
use segre_core::hypersurface::Point;
use segre_core::monodromy::{self, compute_monodromy, loop_through, MonodromyResult};
use segre_core::segresets::sample_segre_set;
use segre_core::{json, Config};

#[test]
fn q_segre_check_rejects_a_bent_map() {
    let cfg = Config::default();
    let e = catalog::get("quadric(1,0,2)").unwrap();
    let mut spec = e.germs[0].clone();
    spec.components[1] = parse("w + z1*z1").unwrap();
    let bent = MapGerm::from_spec(&e.surface, &spec).unwrap();
    let mut rng = cfg.rng(1);
    assert!(q_segre_check(&e.surface, &bent, 10, &mut rng).unwrap() > 1e-3);
    let good = e.germ(0).unwrap();
    assert!(q_segre_check(&e.surface, &good, 10, &mut rng).unwrap() < 1e-10);
}

#[test]
fn monodromy_result_json_round_trips_byte_for_byte() {
    let cfg = Config::default();
    let e = catalog::get("malpha(1/3)").unwrap();
    let g = e.germ(0).unwrap();
    let opts = StepOptions::for_dim(2);
    let r = compute_monodromy(&e.surface, &g, &loop_through(g.base(), 1), ContinuationMode::Auto, &opts, &cfg).unwrap();
    let text = json::to_string(&r).unwrap();
    for key in ["\"sigma\"", "\"A\"", "\"jordan\"", "\"finite_order\"", "\"residuals\""] {
        assert!(text.contains(key), "{key} missing");
    }
    let back: MonodromyResult = serde_json::from_str(&text).unwrap();
    assert_eq!(json::to_string(&back).unwrap(), text);
    assert_eq!(back.finite_order, Some(3));
}

#[test]
fn runs_are_deterministic_for_a_seed() {
    let e = catalog::get("mlog").unwrap();
    let q = Point::new(vec![C64::new(0.1, 0.0), C64::new(0.8, 0.1)]);
    let cloud = |seed| {
        let cfg = Config { seed, ..Config::default() };
        sample_segre_set(&e.surface, &q, 2, 30, &mut cfg.rng(7)).unwrap().to_csv()
    };
    assert_eq!(cloud(11), cloud(11));
    assert_ne!(cloud(11), cloud(12));
}

#[test]
fn segre_step_loop_recovers_malpha_monodromy() {
    let cfg = Config::default();
    let e = catalog::get("malpha(0.5)").unwrap();
    let g = e.germ(0).unwrap();
    let l = loop_through(g.base(), 1);
    let opts = StepOptions::for_dim(2);
    let steps = compute_monodromy(&e.surface, &g, &l, ContinuationMode::SegreSteps, &opts, &cfg).unwrap();
    let closed = compute_monodromy(&e.surface, &g, &l, ContinuationMode::BranchTracking, &opts, &cfg).unwrap();
    assert!(steps.sigma.distance(&closed.sigma) < 1e-7);
    assert_eq!(steps.finite_order, Some(2));
    assert!(steps.residuals.table_error.unwrap() < 1e-8);
}

#[test]
fn two_loops_compose_and_reverse_loop_inverts() {
    let cfg = Config::default();
    let e = catalog::get("mlog").unwrap();
    let (m, g) = (&e.surface, e.germ(0).unwrap());
    let opts = StepOptions::for_dim(2);
    let mode = ContinuationMode::BranchTracking;
    let fwd = compute_monodromy(m, &g, &loop_through(g.base(), 1), mode, &opts, &cfg).unwrap();
    let back = compute_monodromy(m, &g, &loop_through(g.base(), -1), mode, &opts, &cfg).unwrap();
    let prod = fwd.sigma.compose(&back.sigma);
    assert!(prod.is_scalar(1e-10));
    let path = ContinuationPath::Loop(LoopSpec::new(vec![C64::new(0.0, 0.0)], 1.0, 3));
    let g3 = continue_along_path(m, &g, &path, mode, &opts, &cfg).unwrap().germ;
    assert_eq!(g3.winding(), Some(3));
}

#[test]
fn k_root_of_malpha_has_trivial_monodromy() {
    let cfg = Config::default();
    let e = catalog::get("malpha(1/3)").unwrap();
    let root = e.surface.k_root(3).unwrap();
    let g = monodromy::root_germ(&root, &e.germs[0], 3).unwrap();
    let opts = StepOptions::for_dim(2);
    let r = compute_monodromy(&root, &g, &loop_through(g.base(), 1), ContinuationMode::BranchTracking, &opts, &cfg).unwrap();
    assert!(monodromy::sigma_is_scalar(&r, &cfg));
    let before = compute_monodromy(&e.surface, &e.germ(0).unwrap(), &loop_through(&e.germs[0].base, 1), ContinuationMode::BranchTracking, &opts, &cfg).unwrap();
    assert!(!monodromy::sigma_is_scalar(&before, &cfg));
}

#[test]
fn cluster_values_settle_for_order_two() {
    let cfg = Config::default();
    let e = catalog::get("malpha(0.5)").unwrap();
    let c = monodromy::cluster_point_check(&e.surface, &e.germ(0).unwrap(), 20, &cfg).unwrap();
    assert_eq!(c.steps.len(), 19);
    assert!(c.final_spread < 1e-4 && c.monotone);
}
