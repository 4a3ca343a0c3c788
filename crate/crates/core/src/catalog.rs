//! Built-in surfaces, germs and expected results, plus `verify`, which runs
//! the whole pipeline on an entry and compares against the expectations.
//!
//! Names: `mlog`, `malpha(a)`, `km(m)`, `ex62`, `quadric(k,l,n)`; numeric
//! parameters accept decimals or fractions (`malpha(1/3)`).

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::continuation::{
    continue_along_chain, continue_along_path, q_segre_check, track_branch, Continued, ContinuationMode,
    ContinuationPath, GermSpec, MapGerm, StepOptions,
};
use crate::error::{Error, Result};
use crate::expr::parse;
use crate::hypersurface::{Domain, Hypersurface, Point, Side};
use crate::quadric::{projective_distance, HermitianQuadric};
use crate::segresets::{find_chain, ChainSearch};
use crate::{monodromy, monodromy::loop_through};

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Stated for this example in the literature.
    Published,
    /// Computed independently (closed forms, matrix powers).
    Derived,
    /// Follows from the construction.
    Structural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact<T> {
    pub value: T,
    pub basis: Basis,
}

fn fact<T>(value: T, basis: Basis) -> Fact<T> {
    Fact { value, basis }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeviFact {
    pub point: Point,
    pub signature: (usize, usize),
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub levi: Vec<LeviFact>,
    /// Jordan block sizes in canonical order.
    pub jordan_sizes: Option<Fact<Vec<usize>>>,
    /// Eigenvalues of the normalized monodromy, as a multiset.
    #[serde(default)]
    pub eigenvalues: Option<Fact<Vec<crate::json::Pair>>>,
    /// `Some(k)`: order `k`; `None`: no order up to `k_max`.
    pub finite_order: Fact<Option<u32>>,
    pub scalar_monodromy: Fact<bool>,
    /// Quadric signatures of the images of `M+` and `M-`.
    pub side_signatures: Option<Fact<[(usize, usize); 2]>>,
    /// Both sides land on the same quadric matrix.
    pub same_quadric: Option<Fact<bool>>,
}

/// Points used by `verify` and the acceptance suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probes {
    /// Base of the first germ, on `M+`.
    pub base: Point,
    /// Another base point for invariance runs.
    pub alt_base: Point,
    /// A chain target reachable from `base`.
    pub chain_target: Point,
    /// Alternative loop radii.
    pub loop_radii: Vec<f64>,
    /// A point of `M-` for the transfer.
    pub minus: Point,
    /// Whether a Segre-step loop around `X` is practical (cheap and stable
    /// enough to cross-check against the closed form).
    #[serde(default)]
    pub segre_loop: bool,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub description: String,
    pub surface: Hypersurface,
    pub germs: Vec<GermSpec>,
    pub expected: Expected,
    pub probes: Probes,
}

/// Exported form of an entry: the surface and germ files plus expectations.
#[derive(Debug, Clone, Serialize)]
pub struct EntryExport {
    pub name: String,
    pub description: String,
    pub surface: crate::hypersurface::SurfaceFile,
    pub germs: Vec<GermSpec>,
    pub expected: Expected,
    pub probes: Probes,
}

impl CatalogEntry {
    pub fn export(&self) -> EntryExport {
        EntryExport {
            name: self.name.clone(),
            description: self.description.clone(),
            surface: self.surface.to_file(),
            germs: self.germs.clone(),
            expected: self.expected.clone(),
            probes: self.probes.clone(),
        }
    }

    pub fn germ(&self, i: usize) -> Result<MapGerm> {
        MapGerm::from_spec(&self.surface, &self.germs[i])
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn pt(v: &[C64]) -> Point {
    Point::new(v.to_vec())
}

fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn parse_num(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok().zip(b.trim().parse::<f64>().ok()).map(|(a, b)| a / b),
        None => s.parse::<f64>().ok(),
    };
    v.filter(|x| x.is_finite()).ok_or_else(|| Error::UnknownEntry(format!("bad parameter `{s}`")))
}

fn args<'a>(name: &'a str, head: &str) -> Option<Vec<&'a str>> {
    let rest = name.strip_prefix(head)?.strip_prefix('(')?.strip_suffix(')')?;
    Some(rest.split(',').collect())
}

/// `mlog`: `w = cw exp(2 i z cz)`, i.e. `Arg w = |z|^2`, germ `(z, log w)`.
pub fn mlog() -> Result<CatalogEntry> {
    let surface = Hypersurface::from_exp_form("mlog", 2, parse("2*z1*cz1")?, Domain::new(0.95, 2.0), Domain::new(1.0, 50.0))?;
    let base = pt(&[c(0.0, 0.0), c(1.0, 0.0)]);
    let germ = GermSpec {
        components: vec![parse("z1")?, parse("Lw")?, parse("1")?],
        winding: 0,
        base: base.clone(),
        target: HermitianQuadric::standard(1, 0)?,
    };
    Ok(CatalogEntry {
        name: "mlog".into(),
        description: "Arg w = |z|^2: nonminimal, spherical on both sides with different images".into(),
        surface,
        germs: vec![germ],
        expected: Expected {
            levi: vec![
                LeviFact { point: base.clone(), signature: (1, 0), basis: Basis::Published },
                LeviFact { point: pt(&[c(0.0, 0.0), c(-1.0, 0.0)]), signature: (1, 0), basis: Basis::Published },
            ],
            jordan_sizes: Some(fact(vec![1, 2], Basis::Published)),
            eigenvalues: Some(fact(vec![c(1.0, 0.0).into(); 3], Basis::Published)),
            finite_order: fact(None, Basis::Published),
            scalar_monodromy: fact(false, Basis::Published),
            side_signatures: Some(fact([(1, 0), (1, 0)], Basis::Published)),
            same_quadric: Some(fact(false, Basis::Published)),
        },
        probes: Probes {
            base,
            alt_base: pt(&[c(0.1, 0.0), C64::from_polar(0.8, 0.03)]),
            chain_target: pt(&[c(0.1, 0.0), c(0.9, 0.0)]),
            loop_radii: vec![0.5, 0.9],
            minus: pt(&[c(0.0, 0.0), c(-1.0, 0.0)]),
            segre_loop: true,
        },
    })
}

/// Reduced order of `alpha` as `p/q` with `q <= 64`, if any.
fn rational_order(alpha: f64) -> Option<u32> {
    (1..=64u32).find(|&q| {
        let p = alpha * q as f64;
        (p - p.round()).abs() < 1e-9
    })
}

/// `M_alpha`: `w = cw (sqrt(1 - (z cz)^2) + i z cz)^(1/alpha)`, germ
/// `(z w^alpha, w^(2 alpha))`.
pub fn malpha(alpha: f64) -> Result<CatalogEntry> {
    if !(alpha > 0.0 && alpha <= 4.0) {
        return Err(Error::UnknownEntry(format!("malpha needs 0 < alpha <= 4, got {alpha}")));
    }
    let a = fmt_num(alpha);
    let name = format!("malpha({a})");
    let phi = parse(&format!("(-i/{a})*log(sqrt(1 - (z1*cz1)^2) + i*z1*cz1)"))?;
    let surface = Hypersurface::from_exp_form(name.clone(), 2, phi, Domain::new(0.7, 2.0), Domain::new(0.8, 50.0))?;
    let base = pt(&[c(0.0, 0.0), c(1.0, 0.0)]);
    let germ = GermSpec {
        components: vec![parse(&format!("z1*exp({a}*Lw)"))?, parse(&format!("exp(2*{a}*Lw)"))?, parse("1")?],
        winding: 0,
        base: base.clone(),
        target: HermitianQuadric::standard(1, 0)?,
    };
    let order = rational_order(alpha);
    let eig = |k: f64| C64::from_polar(1.0, 2.0 * PI * k * alpha).into();
    Ok(CatalogEntry {
        name,
        description: "M_alpha: multiple-valued spherical map with diagonal monodromy".into(),
        surface,
        germs: vec![germ],
        expected: Expected {
            levi: vec![LeviFact { point: base.clone(), signature: (1, 0), basis: Basis::Derived }],
            jordan_sizes: Some(fact(vec![1, 1, 1], Basis::Published)),
            eigenvalues: Some(fact(vec![eig(1.0), eig(2.0), c(1.0, 0.0).into()], Basis::Published)),
            finite_order: fact(order, Basis::Derived),
            scalar_monodromy: fact(order == Some(1), Basis::Derived),
            side_signatures: Some(fact([(1, 0), (1, 0)], Basis::Derived)),
            same_quadric: None,
        },
        probes: Probes {
            base,
            alt_base: pt(&[c(0.1, 0.0), C64::from_polar(0.8, 0.03)]),
            chain_target: pt(&[c(0.1, 0.0), c(0.9, 0.0)]),
            loop_radii: vec![0.5, 0.9],
            minus: pt(&[c(0.0, 0.0), c(-1.0, 0.0)]),
            segre_loop: true,
        },
    })
}

/// `K_m`: `Im w = |z|^2 |w|^(2m)`, mapped into the sphere by `(z w^m, w)`.
pub fn km(m: u32) -> Result<CatalogEntry> {
    if !(1..=4).contains(&m) {
        return Err(Error::UnknownEntry(format!("km needs 1 <= m <= 4, got {m}")));
    }
    let name = format!("km({m})");
    let rho = parse(&format!("w - cw - 2*i*z1*cz1*(w*cw)^{m}"))?;
    let surface = Hypersurface::new(name.clone(), 2, rho, None, Domain::new(0.6, 0.8), Domain::new(0.7, 1.0))?;
    let base = pt(&[c(0.0, 0.0), c(0.5, 0.0)]);
    let germ = GermSpec {
        components: vec![parse(&format!("z1*w^{m}"))?, parse("w")?, parse("1")?],
        winding: 0,
        base: base.clone(),
        target: HermitianQuadric::standard(1, 0)?,
    };
    Ok(CatalogEntry {
        name,
        description: "K_m: single-valued spherical map; both sides go to one quadric".into(),
        surface,
        germs: vec![germ],
        expected: Expected {
            levi: vec![
                LeviFact { point: base.clone(), signature: (1, 0), basis: Basis::Derived },
                LeviFact { point: pt(&[c(0.0, 0.0), c(-0.5, 0.0)]), signature: (1, 0), basis: Basis::Derived },
            ],
            jordan_sizes: Some(fact(vec![1, 1, 1], Basis::Published)),
            eigenvalues: Some(fact(vec![c(1.0, 0.0).into(); 3], Basis::Published)),
            finite_order: fact(Some(1), Basis::Published),
            scalar_monodromy: fact(true, Basis::Published),
            side_signatures: Some(fact([(1, 0), (1, 0)], Basis::Published)),
            same_quadric: Some(fact(true, Basis::Published)),
        },
        probes: Probes {
            base,
            alt_base: pt(&[c(0.1, 0.0), C64::from_polar(0.4, 0.01)]),
            chain_target: pt(&[c(0.1, 0.0), c(0.497, 0.0005)]),
            loop_radii: vec![0.3, 0.6],
            minus: pt(&[c(0.0, 0.0), c(-0.5, 0.0)]),
            segre_loop: false,
        },
    })
}

/// The blow-up example in `C^3`: `M+` is `(2,0)`-spherical and `M-` is
/// `(1,1)`-spherical; germ `(z1 sqrt(w), z2 w, w)`.
pub fn ex62() -> Result<CatalogEntry> {
    let theta = "((i*z1*cz1 + sqrt(1 - 2*i*z2*cz2*cw - (z1*cz1)^2))^2)/((1 - 2*i*z2*cz2*cw)^2)";
    let phi = parse(&format!("-i*log({theta})"))?;
    let surface = Hypersurface::from_exp_form("ex62", 3, phi, Domain::new(0.5, 0.5), Domain::new(0.6, 0.6))?;
    let base = pt(&[c(0.0, 0.0), c(0.0, 0.0), c(0.1, 0.0)]);
    let minus = pt(&[c(0.0, 0.0), c(0.0, 0.0), c(-0.1, 0.0)]);
    let germ = GermSpec {
        components: vec![parse("z1*exp(Lw/2)")?, parse("z2*w")?, parse("w")?, parse("1")?],
        winding: 0,
        base: base.clone(),
        target: HermitianQuadric::standard(2, 0)?,
    };
    Ok(CatalogEntry {
        name: "ex62".into(),
        description: "sides of different Levi signature, (2,0) and (1,1)".into(),
        surface,
        germs: vec![germ],
        expected: Expected {
            levi: vec![
                LeviFact { point: base.clone(), signature: (2, 0), basis: Basis::Published },
                LeviFact { point: minus.clone(), signature: (1, 1), basis: Basis::Published },
            ],
            jordan_sizes: Some(fact(vec![1, 1, 1, 1], Basis::Derived)),
            eigenvalues: Some(fact(vec![c(-1.0, 0.0).into(), c(1.0, 0.0).into(), c(1.0, 0.0).into(), c(1.0, 0.0).into()], Basis::Derived)),
            finite_order: fact(Some(2), Basis::Derived),
            scalar_monodromy: fact(false, Basis::Derived),
            side_signatures: Some(fact([(2, 0), (1, 1)], Basis::Published)),
            same_quadric: Some(fact(false, Basis::Published)),
        },
        probes: Probes {
            base,
            alt_base: pt(&[c(0.05, 0.0), c(0.02, 0.0), C64::from_polar(0.12, 0.01)]),
            chain_target: pt(&[c(0.05, 0.0), c(0.03, 0.0), c(0.1, 0.0005)]),
            loop_radii: vec![0.08, 0.15],
            minus,
            segre_loop: false,
        },
    })
}

/// The standard `(k,l)` quadric in `C^n` with the identity germ.
pub fn quadric(k: usize, l: usize, n: usize) -> Result<CatalogEntry> {
    if n < 2 || k + l + 1 != n || l > k {
        return Err(Error::UnknownEntry(format!("quadric({k},{l},{n}) needs k >= l and k + l + 1 = n")));
    }
    let name = format!("quadric({k},{l},{n})");
    let mut rho = String::from("(w - cw)/(2*i)");
    for j in 1..n {
        rho += &format!(" {} z{j}*cz{j}", if j <= k { "-" } else { "+" });
    }
    let surface = Hypersurface::new(name.clone(), n, parse(&rho)?, None, Domain::new(0.8, 1.0), Domain::new(1.0, 2.0))?;
    let mut comps: Vec<_> = (1..n).map(|j| parse(&format!("z{j}"))).collect::<Result<_>>()?;
    comps.push(parse("w")?);
    comps.push(parse("1")?);
    let mut b = vec![c(0.0, 0.0); n];
    b[n - 1] = c(0.5, 0.0);
    let base = Point::new(b.clone());
    let mut alt = b.clone();
    alt[0] = c(0.1, 0.0);
    alt[n - 1] = c(0.4, 0.01);
    let mut target = b.clone();
    target[0] = c(0.05, 0.02);
    target[n - 1] = c(0.45, 0.003);
    let mut minus = b;
    minus[n - 1] = c(-0.5, 0.0);
    let q = HermitianQuadric::standard(k, l)?;
    Ok(CatalogEntry {
        name,
        description: "standard hyperquadric (not nonminimal)".into(),
        surface,
        germs: vec![GermSpec { components: comps, winding: 0, base: base.clone(), target: q }],
        expected: Expected {
            levi: vec![LeviFact { point: base.clone(), signature: (k, l), basis: Basis::Structural }],
            jordan_sizes: Some(fact(vec![1; n + 1], Basis::Structural)),
            eigenvalues: Some(fact(vec![c(1.0, 0.0).into(); n + 1], Basis::Structural)),
            finite_order: fact(Some(1), Basis::Structural),
            scalar_monodromy: fact(true, Basis::Structural),
            side_signatures: Some(fact([(k, l), (k, l)], Basis::Structural)),
            same_quadric: Some(fact(true, Basis::Structural)),
        },
        probes: Probes {
            base,
            alt_base: Point::new(alt),
            chain_target: Point::new(target),
            loop_radii: vec![0.3, 0.7],
            minus: Point::new(minus),
            segre_loop: n == 2,
        },
    })
}

/// The default entries.
pub fn list() -> Vec<&'static str> {
    vec![
        "mlog",
        "malpha(0.3)",
        "malpha(1/3)",
        "malpha(0.5)",
        "km(1)",
        "km(2)",
        "ex62",
        "quadric(1,0,2)",
        "quadric(1,1,3)",
    ]
}

pub fn get(name: &str) -> Result<CatalogEntry> {
    let name = name.replace(' ', "");
    if name == "mlog" {
        return mlog();
    }
    if name == "ex62" {
        return ex62();
    }
    if let Some(a) = args(&name, "malpha") {
        if a.len() == 1 {
            let mut e = malpha(parse_num(a[0])?)?;
            e.name = format!("malpha({})", a[0]);
            return Ok(e);
        }
    }
    if let Some(a) = args(&name, "km") {
        if a.len() == 1 {
            let m = a[0].parse::<u32>().map_err(|_| Error::UnknownEntry(name.clone()))?;
            return km(m);
        }
    }
    if let Some(a) = args(&name, "quadric") {
        if a.len() == 3 {
            let v = a
                .iter()
                .map(|s| s.parse::<usize>().map_err(|_| Error::UnknownEntry(name.clone())))
                .collect::<Result<Vec<_>>>()?;
            return quadric(v[0], v[1], v[2]);
        }
    }
    Err(Error::UnknownEntry(name))
}

/// Max residual on the target quadric of the germ's images of `count`
/// surface points sampled in the germ's polydisc.
pub fn germ_surface_residual(entry: &CatalogEntry, germ: usize, count: usize, cfg: &Config) -> Result<f64> {
    let m = &entry.surface;
    let spec = &entry.germs[germ];
    let g = MapGerm::from_spec(m, spec)?;
    let mut rng = cfg.rng(0xca7 + germ as u64);
    let b = spec.base.clone();
    let r = g.radius();
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut tries = 0;
    while done < count {
        tries += 1;
        if tries > 20 * count {
            return Err(Error::SamplingFailed { failed: tries - done, attempted: tries });
        }
        let z: Vec<C64> = b.z().iter().map(|x| x + crate::hypersurface::random_in_disc(&mut rng, 0.8 * r.z)).collect();
        let p0 = Point::from_zw(&z, b.w() + crate::hypersurface::random_in_disc(&mut rng, 0.5 * r.w));
        let Ok(p) = m.project_to_surface(&p0) else { continue };
        if (p.w() - b.w()).norm() > 0.8 * r.w || !m.u1().contains(&p) {
            continue;
        }
        worst = worst.max(spec.target.residual(&g.eval_point(m, &p)?));
        done += 1;
    }
    Ok(worst)
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub entry: String,
    pub checks: Vec<Check>,
    #[serde(skip, default = "Instant::now")]
    clock: Instant,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, result: Result<(bool, String)>) {
        let seconds = self.clock.elapsed().as_secs_f64();
        self.clock = Instant::now();
        let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
        self.checks.push(Check { name: name.into(), passed, detail, seconds });
    }
}

/// Multiset distance between two eigenvalue lists (greedy matching).
pub fn eigenvalue_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut rest: Vec<C64> = b.to_vec();
    let mut worst = 0.0f64;
    for x in a {
        let (i, d) = rest
            .iter()
            .enumerate()
            .map(|(i, y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("same length");
        worst = worst.max(d);
        rest.remove(i);
    }
    worst
}

/// Eigenvalues up to a common scalar: both lists rotated/scaled so that the
/// best-matching element pairs, then compared as multisets.
pub fn eigenvalues_up_to_scale(got: &[C64], want: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for g in got {
        for w in want {
            if g.norm() == 0.0 {
                continue;
            }
            let s = w / g;
            let scaled: Vec<C64> = got.iter().map(|x| x * s).collect();
            best = best.min(eigenvalue_distance(&scaled, want));
        }
    }
    best
}

/// Runs the pipeline on an entry: germ residuals, Levi signatures,
/// Segre-regularity, a chain and tabulated continuation against the closed
/// form, Q-Segre property, monodromy and the formula check, finite order and
/// root, and the sphericity transfer.
pub fn verify(name: &str, cfg: &Config) -> Result<Report> {
    let e = get(name)?;
    let m = &e.surface;
    let n = m.n();
    let opts = StepOptions::for_dim(n);
    let mut rep = Report { entry: e.name.clone(), checks: Vec::new(), clock: Instant::now() };

    rep.push("germ maps M into target", (|| {
        let r = germ_surface_residual(&e, 0, 50, cfg)?;
        Ok((r < 1e-10, format!("max residual {r:.3e}")))
    })());

    for lf in &e.expected.levi {
        let label = format!("Levi signature at {:?}", lf.point.coords().iter().map(|z| (z.re, z.im)).collect::<Vec<_>>());
        rep.push(&label, (|| {
            let s = m.levi_signature(&lf.point, cfg.tol.levi)?;
            Ok((s == lf.signature, format!("{s:?}, expected {:?}", lf.signature)))
        })());
    }

    rep.push("Segre-regular at base", (|| {
        let r = m.segre_map_rank(&e.probes.base, 1, cfg.tol.rank)?;
        Ok((r == n, format!("rank {r} of {n}")))
    })());

    let germ = e.germ(0)?;
    rep.push("Q-Segre property", (|| {
        let mut rng = cfg.rng(0x95);
        let r = q_segre_check(m, &germ, 20, &mut rng)?;
        Ok((r < cfg.tol.q_segre, format!("max residual {r:.3e}")))
    })());

    rep.push("chain continuation vs closed form", (|| {
        let c = chain_vs_closed_form(&e, 20, cfg)?;
        Ok((c.distance < 1e-7, format!("{} steps, max distance {:.3e}", c.steps, c.distance)))
    })());

    if e.probes.segre_loop {
        rep.push("Segre-step loop vs closed form", (|| {
            let c = loop_vs_closed_form(&e, 20, cfg)?;
            Ok((c.distance < 1e-7, format!("{} double steps, max distance {:.3e}", c.steps, c.distance)))
        })());
    }

    let l = loop_through(germ.base(), 1);
    let mode = ContinuationMode::BranchTracking;
    let mono = monodromy::compute_monodromy(m, &germ, &l, mode, &opts, cfg);
    match &mono {
        Ok(r) => {
            if let Some(sizes) = &e.expected.jordan_sizes {
                let got: Vec<usize> = r.jordan.blocks.iter().map(|b| b.size).collect();
                rep.push("Jordan block sizes", Ok((got == sizes.value, format!("{got:?}, expected {:?}", sizes.value))));
            }
            if let Some(eig) = &e.expected.eigenvalues {
                let want = crate::json::from_pairs(&eig.value);
                let d = eigenvalues_up_to_scale(&r.jordan.eigenvalues(), &want);
                rep.push("monodromy eigenvalues", Ok((d < 1e-6, format!("distance {d:.3e}"))));
            }
            let scalar = monodromy::sigma_is_scalar(r, cfg);
            rep.push(
                "scalar monodromy",
                Ok((scalar == e.expected.scalar_monodromy.value, format!("{scalar}, expected {}", e.expected.scalar_monodromy.value))),
            );
            rep.push("monodromy formula", (|| {
                let f = monodromy::verify_monodromy_formula(m, &germ, r, &l, mode, &opts, cfg)?;
                Ok((f.deviation < 1e-8, format!("deviation {:.3e}", f.deviation)))
            })());
            rep.push("finite order", (|| {
                let root = monodromy::finite_order_and_root(m, r, Some(&e.germs[0]), &opts, cfg)?;
                let got = root.as_ref().map(|x| x.order);
                let root_ok = root.as_ref().and_then(|x| x.root_scalar).unwrap_or(true);
                Ok((
                    got == e.expected.finite_order.value && root_ok,
                    format!("{got:?}, expected {:?}; root monodromy scalar: {root_ok}", e.expected.finite_order.value),
                ))
            })());
        }
        Err(err) => rep.push("monodromy", Err(Error::Precondition(err.to_string()))),
    }

    if let Some(sides) = &e.expected.side_signatures {
        rep.push("sphericity transfer", (|| {
            let t = monodromy::sphericity_transfer(m, &germ, &e.probes.minus, mode, &opts, cfg)?;
            let mut ok = [t.plus, t.minus] == sides.value;
            let mut detail = format!("{:?} / {:?}, residuals {:.1e} / {:.1e}", t.plus, t.minus, t.residual_plus, t.residual_minus);
            if let Some(same) = &e.expected.same_quadric {
                let is_same = t.distance < 1e-8;
                ok &= is_same == same.value;
                detail += &format!(", quadric distance {:.3e}", t.distance);
            }
            Ok((ok, detail))
        })());
    }
    Ok(rep)
}

/// Tabulated continuation compared with closed-form branch tracking.
#[derive(Debug, Clone)]
pub struct Comparison {
    /// Number of Segre steps (chain) or double steps (loop).
    pub steps: usize,
    /// Max projective distance over the sample points.
    pub distance: f64,
    /// Worst overlap agreement between consecutive germs, when any overlapped.
    pub consistency: Option<f64>,
}

/// `count` points on a torus of 0.4 times the germ's polydisc about its base.
fn ring_points(g: &MapGerm, count: usize) -> Vec<Point> {
    let (b, r) = (g.base(), g.radius());
    let n = b.n();
    (0..count)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / count as f64;
            let mut coords = b.coords().to_vec();
            coords[0] += C64::from_polar(0.4 * r.z, t);
            coords[n - 1] += C64::from_polar(0.4 * r.w, 1.7 * t);
            Point::new(coords)
        })
        .collect()
}

fn compare(m: &Hypersurface, tab: &Continued, oracle: &MapGerm, count: usize, steps: usize) -> Result<Comparison> {
    let mut worst = 0.0f64;
    for p in ring_points(&tab.germ, count) {
        worst = worst.max(projective_distance(&tab.germ.eval(m, &p)?, &oracle.eval(m, &p)?));
    }
    let consistency = tab.steps.iter().filter_map(|s| s.consistency).reduce(f64::max);
    Ok(Comparison { steps, distance: worst, consistency })
}

/// Continues the first germ along a Segre chain from the base to the chain
/// target by double steps and compares with branch tracking at `count` points.
pub fn chain_vs_closed_form(entry: &CatalogEntry, count: usize, cfg: &Config) -> Result<Comparison> {
    let m = &entry.surface;
    let germ = entry.germ(0)?;
    let opts = StepOptions::for_dim(m.n());
    let mut rng = cfg.rng(0xc4);
    let chain = find_chain(m, &entry.probes.base, &entry.probes.chain_target, cfg.max_depth, ChainSearch::Local, &mut rng)?;
    let tab = continue_along_chain(m, &germ, &chain, &opts, cfg)?;
    let oracle = track_branch(m, &germ, &ContinuationPath::Waypoints(chain.points[1..].to_vec()))?;
    compare(m, &tab, &oracle, count, chain.steps())
}

/// One Segre-step loop around `X` through the base, compared with branch
/// tracking at `count` points near the base.
pub fn loop_vs_closed_form(entry: &CatalogEntry, count: usize, cfg: &Config) -> Result<Comparison> {
    let m = &entry.surface;
    let germ = entry.germ(0)?;
    let opts = StepOptions::for_dim(m.n());
    let path = ContinuationPath::Loop(loop_through(germ.base(), 1));
    let tab = continue_along_path(m, &germ, &path, ContinuationMode::SegreSteps, &opts, cfg)?;
    let oracle = track_branch(m, &germ, &path)?;
    let steps = tab.steps.len();
    compare(m, &tab, &oracle, count, steps)
}

/// Surfaces sampled on a given side, for the Levi check of arbitrary points.
pub fn sample_side(entry: &CatalogEntry, side: Side, cfg: &Config) -> Result<Point> {
    let mut rng = cfg.rng(0x51de);
    entry.surface.sample_surface_point(&mut rng, side)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse() {
        for name in list() {
            let e = get(name).unwrap();
            assert_eq!(e.surface.n() + 1, e.germs[0].components.len(), "{name}");
        }
        assert!(matches!(get("nope"), Err(Error::UnknownEntry(_))));
        assert!(matches!(get("km(x)"), Err(Error::UnknownEntry(_))));
        assert_eq!(get("malpha(1/2)").unwrap().expected.finite_order.value, Some(2));
        assert_eq!(get("malpha(0.7071067811865476)").unwrap().expected.finite_order.value, None);
    }

    #[test]
    fn germs_map_surfaces_onto_targets() {
        let cfg = Config::default();
        for name in list() {
            let e = get(name).unwrap();
            let r = germ_surface_residual(&e, 0, 50, &cfg).unwrap();
            assert!(r < 1e-10, "{name}: {r:e}");
        }
    }

    #[test]
    fn nonminimal_flags() {
        for name in ["mlog", "malpha(0.3)", "km(1)", "ex62"] {
            assert!(get(name).unwrap().surface.nonminimal(), "{name}");
        }
        assert!(!get("quadric(1,0,2)").unwrap().surface.nonminimal());
    }
}
