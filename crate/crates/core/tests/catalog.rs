use segre_core::catalog::{self, Basis};
use segre_core::continuation::{GermSpec, MapGerm};
use segre_core::hypersurface::Hypersurface;
use segre_core::{json, Config};

#[test]
fn every_entry_verifies() {
    let cfg = Config::default();
    let mut failures = Vec::new();
    for name in catalog::list() {
        let report = catalog::verify(name, &cfg).unwrap();
        assert!(report.checks.len() >= 8, "{name}: only {} checks", report.checks.len());
        for c in report.checks.iter().filter(|c| !c.passed) {
            failures.push(format!("{name}: {} ({})", c.name, c.detail));
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn exports_reload_as_working_fixtures() {
    let cfg = Config::default();
    for name in catalog::list() {
        let e = catalog::get(name).unwrap();
        let text = json::to_string(&e.export()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let m = Hypersurface::from_json(&v["surface"].to_string()).unwrap();
        assert_eq!(m.n(), e.surface.n());
        assert_eq!(m.nonminimal(), e.surface.nonminimal());
        let spec = GermSpec::from_json(&v["germs"][0].to_string()).unwrap();
        let g = MapGerm::from_spec(&m, &spec).unwrap();
        let p = e.probes.chain_target.clone();
        let a = g.eval(&m, &p).unwrap();
        let b = e.germ(0).unwrap().eval(&e.surface, &p).unwrap();
        assert!(segre_core::quadric::projective_distance(&a, &b) < 1e-14, "{name}");
        assert!(catalog::germ_surface_residual(&e, 0, 10, &cfg).unwrap() < 1e-10);
    }
}

#[test]
fn expectations_carry_their_basis() {
    let e = catalog::get("mlog").unwrap();
    assert_eq!(e.expected.finite_order.basis, Basis::Published);
    let q = catalog::get("quadric(2,1,4)").unwrap();
    assert_eq!(q.surface.n(), 4);
    assert!(!q.surface.nonminimal());
    let text = json::to_string(&e.export()).unwrap();
    assert!(text.contains("\"basis\": \"published\""), "{text}");
}

#[test]
fn unknown_entries_are_rejected() {
    for bad in ["mlg", "malpha()", "km(0.5)", "quadric(0,2,3)", "quadric(1,1)"] {
        assert!(catalog::get(bad).is_err(), "{bad}");
    }
}
