use std::fs;
use std::path::Path;

use num_complex::Complex64 as C64;
use segre_core::catalog::{self, CatalogEntry};
use segre_core::continuation::{
    continue_along_path, ContinuationPath, GermSpec, MapGerm, StepOptions,
};
use segre_core::hypersurface::{Hypersurface, Point};
use segre_core::monodromy::{self, loop_through};
use segre_core::segresets::{find_chain, sample_segre_set, ChainSearch};
use segre_core::{json, Config};
use serde::Serialize;
use serde_json::json;

use crate::{literal, Cli, Command, Failure, GermSource, Source};

type Res<T> = Result<T, Failure>;

pub const SEED_ENV: &str = "SEGRETOOL_SEED";

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn config(cli: &Cli) -> Res<Config> {
    let mut cfg = Config::default();
    if let Some(s) = cli.common.seed {
        cfg.seed = s;
    }
    if let Ok(s) = std::env::var(SEED_ENV) {
        cfg.seed = s.trim().parse().map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer, got `{s}`")))?;
    }
    for t in &cli.common.tol {
        let (name, value) = t.split_once('=').ok_or_else(|| usage(format!("--tol expects NAME=VALUE, got `{t}`")))?;
        let v: f64 = value.trim().parse().map_err(|_| usage(format!("--tol {name}: `{value}` is not a number")))?;
        cfg.tol.set(name.trim(), v)?;
    }
    Ok(cfg)
}

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

/// Surface plus, for catalog sources, the entry.
fn surface(src: &Source) -> Res<(Hypersurface, Option<CatalogEntry>)> {
    match (&src.surface, &src.catalog) {
        (Some(p), _) => Ok((Hypersurface::from_json(&read(p)?)?, None)),
        (None, Some(name)) => {
            let e = catalog::get(name)?;
            Ok((e.surface.clone(), Some(e)))
        }
        (None, None) => Err(usage("one of --surface or --catalog is required")),
    }
}

fn germ(src: &GermSource) -> Res<(Hypersurface, GermSpec, MapGerm, Option<CatalogEntry>)> {
    let (m, entry) = surface(&src.source)?;
    let spec = match (&src.germ, &entry) {
        (Some(p), _) => GermSpec::from_json(&read(p)?)?,
        (None, Some(e)) => e.germs[0].clone(),
        (None, None) => return Err(usage("--germ is required with --surface")),
    };
    let g = MapGerm::from_spec(&m, &spec)?;
    Ok((m, spec, g, entry))
}

fn point(m: &Hypersurface, text: &str, flag: &str) -> Res<Point> {
    let coords = literal::point(text).map_err(|e| usage(format!("--{flag}: {e}")))?;
    if coords.len() != m.n() {
        return Err(usage(format!("--{flag} needs {} coordinates, got {}", m.n(), coords.len())));
    }
    Ok(Point::new(coords))
}

fn emit(cli: &Cli, text: &str) -> Res<()> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &cli.common.output {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(cli: &Cli, value: &T) -> Res<()> {
    emit(cli, &json::to_string(value)?)
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn run(cli: &Cli) -> Res<()> {
    let cfg = config(cli)?;
    match &cli.command {
        Command::Levi { source, point: p } => {
            let (m, _) = surface(source)?;
            let p = point(&m, p, "point")?;
            if !m.on_surface(&p, 1e-8) {
                return Err(usage("--point must lie on M"));
            }
            let form = m.levi_form(&p)?;
            let (k, l) = m.levi_signature(&p, cfg.tol.levi)?;
            emit_json(cli, &json!({
                "point": p,
                "signature": [k, l],
                "label": format!("({k},{l})"),
                "eigenvalues": form.eigenvalues,
            }))
        }
        Command::Segre { source, point: p, count, csv } => {
            let (m, _) = surface(source)?;
            let p = point(&m, p, "point")?;
            let q = m.segre_variety(&p)?;
            let mut rng = cfg.rng(0x5e);
            let mut pts = Vec::new();
            let mut tries = 0;
            while pts.len() < *count && tries < 20 * count.max(&1) {
                tries += 1;
                let z: Vec<C64> = (0..m.n() - 1)
                    .map(|_| segre_core::hypersurface::random_in_disc(&mut rng, m.u1().z))
                    .collect();
                if let Ok(x) = q.point(&z) {
                    if m.u1().contains(&x) {
                        pts.push(x);
                    }
                }
            }
            if *csv {
                let mut out = String::from("re_z1,im_z1");
                for j in 2..m.n() {
                    out += &format!(",re_z{j},im_z{j}");
                }
                out += ",re_w,im_w\n";
                for x in &pts {
                    let cols: Vec<String> = x.coords().iter().flat_map(|c| [format!("{:.16e}", c.re), format!("{:.16e}", c.im)]).collect();
                    out += &cols.join(",");
                    out.push('\n');
                }
                return emit(cli, &out);
            }
            emit_json(cli, &json!({ "base": p, "degenerate": q.degenerate(), "points": pts }))
        }
        Command::Cloud { source, point: p, depth, count, csv } => {
            let (m, _) = surface(source)?;
            let p = point(&m, p, "point")?;
            let cloud = sample_segre_set(&m, &p, *depth, *count, &mut cfg.rng(0xc1))?;
            if *csv {
                emit(cli, &cloud.to_csv())
            } else {
                emit_json(cli, &cloud)
            }
        }
        Command::Chain { source, point: p, target, max_depth, csv } => {
            let (m, _) = surface(source)?;
            let p = point(&m, p, "point")?;
            let t = point(&m, target, "target")?;
            let depth = max_depth.unwrap_or(cfg.max_depth);
            let chain = find_chain(&m, &p, &t, depth, ChainSearch::Global, &mut cfg.rng(0xc2))?;
            if *csv {
                emit(cli, &chain.to_csv())
            } else {
                let residual = chain.residual(&m)?;
                emit_json(cli, &json!({ "steps": chain.steps(), "points": chain.points, "residual": residual }))
            }
        }
        Command::Continue { germ: src, path, target, loop_turns, mode } => {
            let (m, _, g, _) = germ(src)?;
            let path = match (path, target, loop_turns) {
                (Some(f), _, _) => ContinuationPath::from_json(&read(f)?)?,
                (None, Some(t), _) => ContinuationPath::Waypoints(vec![point(&m, t, "target")?]),
                (None, None, Some(k)) => ContinuationPath::Loop(loop_through(g.base(), *k)),
                (None, None, None) => return Err(usage("one of --path, --target or --loop-turns is required")),
            };
            let opts = StepOptions::for_dim(m.n());
            let out = continue_along_path(&m, &g, &path, (*mode).into(), &opts, &cfg)?;
            let end = out.germ.base().clone();
            let value: Vec<[f64; 2]> = out.germ.eval(&m, &end)?.into_iter().map(pair).collect();
            emit_json(cli, &json!({
                "kind": out.germ.kind_name(),
                "base": end,
                "value": value,
                "germ": out.germ.to_spec(),
                "table_error": out.germ.table_error(),
                "steps": out.steps,
            }))
        }
        Command::Monodromy { germ: src, loop_turns, mode } => {
            let (m, _, g, _) = germ(src)?;
            let opts = StepOptions::for_dim(m.n());
            let r = monodromy::compute_monodromy(&m, &g, &loop_through(g.base(), *loop_turns), (*mode).into(), &opts, &cfg)?;
            emit_json(cli, &r)
        }
        Command::Transfer { germ: src, minus, mode } => {
            let (m, _, g, entry) = germ(src)?;
            let minus = match (minus, &entry) {
                (Some(t), _) => point(&m, t, "minus")?,
                (None, Some(e)) => e.probes.minus.clone(),
                (None, None) => return Err(usage("--minus is required with --surface")),
            };
            let opts = StepOptions::for_dim(m.n());
            let t = monodromy::sphericity_transfer(&m, &g, &minus, (*mode).into(), &opts, &cfg)?;
            emit_json(cli, &t)
        }
        Command::Kroot { germ: src, k } => {
            if *k == 0 {
                return Err(usage("--k must be positive"));
            }
            let (m, _) = surface(&src.source)?;
            let root = m.k_root(*k)?;
            let spec = match (&src.germ, &src.source.catalog) {
                (Some(p), _) => Some(GermSpec::from_json(&read(p)?)?),
                (None, Some(name)) => Some(catalog::get(name)?.germs[0].clone()),
                _ => None,
            };
            let root_germ = match spec {
                Some(s) => monodromy::root_germ(&root, &s, *k)?.to_spec(),
                None => None,
            };
            emit_json(cli, &json!({ "surface": root.to_file(), "germ": root_germ }))
        }
        Command::Verify { catalog: name, all } => {
            let names: Vec<String> = if *all {
                catalog::list().iter().map(|s| s.to_string()).collect()
            } else {
                vec![name.clone().expect("clap enforces --catalog or --all")]
            };
            let mut reports = Vec::new();
            for n in &names {
                reports.push(catalog::verify(n, &cfg)?);
            }
            let failed: Vec<String> = reports
                .iter()
                .flat_map(|r| r.checks.iter().filter(|c| !c.passed).map(move |c| format!("{}: {}", r.entry, c.name)))
                .collect();
            // Timings vary run to run; keep them out of the byte-stable output.
            let stable: Vec<_> = reports
                .iter()
                .map(|r| {
                    json!({
                        "entry": r.entry,
                        "passed": r.passed(),
                        "checks": r.checks.iter().map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail })).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let out = if *all { json!(stable) } else { stable[0].clone() };
            emit_json(cli, &out)?;
            for r in &reports {
                let secs: f64 = r.checks.iter().map(|c| c.seconds).sum();
                eprintln!("{:16} {} ({} checks, {secs:.1}s)", r.entry, if r.passed() { "pass" } else { "FAIL" }, r.checks.len());
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::ChecksFailed(format!("failed checks: {}", failed.join("; "))))
            }
        }
        Command::Catalog { name, catalog: flag } => match name.as_ref().or(flag.as_ref()) {
            Some(n) => emit_json(cli, &catalog::get(n)?.export()),
            None => emit(cli, &catalog::list().join("\n")),
        },
    }
}
