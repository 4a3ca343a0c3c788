//! Map germs into `CP^n` and their analytic continuation: closed-form germs
//! with a tracked branch of `log w`, and tabulated germs produced by
//! reflecting a germ through Segre varieties (hyperplane propagation).
//!
//! A reflected value at `Z` is obtained by sampling `Q_Z` where the parent
//! germ is defined, mapping the samples, fitting the image hyperplane `H`
//! and returning the point of the target quadric whose Segre hyperplane is
//! `H`. Two reflections move a germ from `a` to any `b` with
//! `Q_a ∩ Q_b ≠ ∅`; the result is then tabulated on a polydisc around `b`
//! by a torus DFT, which makes it a polydisc germ again.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::expr::{AnalyticExpr, Assignment, Var};
use crate::hypersurface::{random_in_disc, Domain, Hypersurface, Point};
use crate::linalg::{self, CMat};
use crate::quadric::{
    fit_hyperplane, fit_projective_map, projective_distance, HermitianQuadric, Hyperplane, ProjectiveMap,
    ProjectivePoint,
};
use crate::segresets::{intersect_segre, two_step_with_seeds, SegreChain};

const TWO_PI: f64 = 2.0 * PI;

/// Closed-form germ as stored on disk: `n + 1` homogeneous components over
/// `z`, `w` and `Lw`, the branch of `Lw` at `base` (`Lw(base) = Log w + 2 pi i
/// winding`), and the target quadric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GermSpec {
    pub components: Vec<AnalyticExpr>,
    #[serde(default)]
    pub winding: i64,
    pub base: Point,
    pub target: HermitianQuadric,
}

impl GermSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug)]
struct Germ {
    base: Point,
    radius: Domain,
    target: HermitianQuadric,
    kind: Kind,
}

#[derive(Debug)]
enum Kind {
    Closed { exprs: Vec<AnalyticExpr>, winding: i64 },
    Tabulated(Table),
    /// Values at `Z` come from reflecting `parent` through `Q_Z`.
    Reflected { parent: MapGerm, q_tol: f64 },
    Transformed { tau: ProjectiveMap, inner: MapGerm },
}

/// An immutable germ of a holomorphic map into `CP^n`. Cloning is cheap.
#[derive(Debug, Clone)]
pub struct MapGerm(Arc<Germ>);

fn ln_ratio(w: C64, base: C64) -> Result<C64> {
    if w.norm() == 0.0 {
        return Err(Error::Singular("log w at w = 0".into()));
    }
    Ok((w / base).ln())
}

impl MapGerm {
    /// A closed-form germ; the radius of validity is `0.6 |w|` in `w` and
    /// half of `U1` in `z`.
    pub fn from_spec(m: &Hypersurface, spec: &GermSpec) -> Result<MapGerm> {
        let n = m.n();
        if spec.components.len() != n + 1 {
            return Err(Error::Precondition(format!(
                "germ needs {} components, got {}",
                n + 1,
                spec.components.len()
            )));
        }
        if spec.target.dim() != n {
            return Err(Error::Precondition("target quadric dimension does not match the surface".into()));
        }
        for e in &spec.components {
            e.check_dimension(n)?;
            if let Some(v) = e.variables().into_iter().find(|v| matches!(v, Var::Cz(_) | Var::Cw)) {
                return Err(Error::Precondition(format!("germ components must be holomorphic, found {v}")));
            }
        }
        if spec.base.n() != n || m.near_x(&spec.base) || spec.base.w().norm() == 0.0 {
            return Err(Error::Precondition("germ base must be a point off X".into()));
        }
        let germ = MapGerm(Arc::new(Germ {
            radius: Domain::new(0.5 * m.u1().z, 0.6 * spec.base.w().norm()),
            base: spec.base.clone(),
            target: spec.target.clone(),
            kind: Kind::Closed { exprs: spec.components.clone(), winding: spec.winding },
        }));
        let rank = germ.jacobian_rank(m, &spec.base)?;
        if rank != n + 1 {
            return Err(Error::Degenerate(format!("germ is not locally injective at its base (rank {rank})")));
        }
        if m.on_surface(&spec.base, 1e-12) {
            let r = spec.target.residual(&germ.eval_point(m, &spec.base)?);
            if r > 1e-10 {
                return Err(Error::Residual { context: "germ base onto target".into(), residual: r, tolerance: 1e-10 });
            }
        }
        Ok(germ)
    }

    /// Back to a spec, for closed-form germs only.
    pub fn to_spec(&self) -> Option<GermSpec> {
        match &self.0.kind {
            Kind::Closed { exprs, winding } => Some(GermSpec {
                components: exprs.clone(),
                winding: *winding,
                base: self.0.base.clone(),
                target: self.0.target.clone(),
            }),
            _ => None,
        }
    }

    pub fn base(&self) -> &Point {
        &self.0.base
    }

    pub fn radius(&self) -> Domain {
        self.0.radius
    }

    pub fn target(&self) -> &HermitianQuadric {
        &self.0.target
    }

    pub fn kind_name(&self) -> &'static str {
        match self.0.kind {
            Kind::Closed { .. } => "closed_form",
            Kind::Tabulated(_) => "tabulated",
            Kind::Reflected { .. } => "reflected",
            Kind::Transformed { .. } => "transformed",
        }
    }

    /// Branch state of a closed-form germ (through transformations).
    pub fn winding(&self) -> Option<i64> {
        match &self.0.kind {
            Kind::Closed { winding, .. } => Some(*winding),
            Kind::Transformed { inner, .. } => inner.winding(),
            _ => None,
        }
    }

    /// Interpolation error estimate of a tabulated germ.
    pub fn table_error(&self) -> Option<f64> {
        match &self.0.kind {
            Kind::Tabulated(t) => Some(t.error),
            Kind::Transformed { inner, .. } => inner.table_error(),
            _ => None,
        }
    }

    fn is_polydisc(&self) -> bool {
        !matches!(self.0.kind, Kind::Reflected { .. })
    }

    /// `tau ∘ self`, targeting `tau(Q)`.
    pub fn transformed(&self, tau: &ProjectiveMap) -> Result<MapGerm> {
        Ok(MapGerm(Arc::new(Germ {
            base: self.0.base.clone(),
            radius: self.0.radius,
            target: self.0.target.transformed(tau)?,
            kind: Kind::Transformed { tau: tau.clone(), inner: self.clone() },
        })))
    }

    /// The same germ reported at a different target (used when a fitted
    /// quadric replaces the nominal one).
    fn with_kind(&self, base: Point, radius: Domain, kind: Kind) -> MapGerm {
        MapGerm(Arc::new(Germ { base, radius, target: self.0.target.clone(), kind }))
    }

    /// Homogeneous value at `z` plus the worst hyperplane-fit residual met
    /// while computing it (0 for closed and tabulated germs).
    pub fn eval_detail(&self, m: &Hypersurface, z: &Point) -> Result<(Vec<C64>, f64)> {
        match &self.0.kind {
            Kind::Closed { exprs, winding } => {
                let b = self.0.base.w();
                let lw = b.ln() + C64::new(0.0, TWO_PI * *winding as f64) + ln_ratio(z.w(), b)?;
                let zero = vec![C64::new(0.0, 0.0); z.n()];
                let at = Assignment::new(z.coords(), &zero).with_lw(lw);
                let v = exprs.iter().map(|e| e.eval(&at)).collect::<Result<Vec<_>>>()?;
                Ok((v, 0.0))
            }
            Kind::Tabulated(t) => Ok((t.eval(z)?, 0.0)),
            Kind::Reflected { parent, q_tol } => reflect(m, parent, z, *q_tol),
            Kind::Transformed { tau, inner } => {
                let (v, r) = inner.eval_detail(m, z)?;
                Ok((tau.apply_vec(&v), r))
            }
        }
    }

    pub fn eval(&self, m: &Hypersurface, z: &Point) -> Result<Vec<C64>> {
        Ok(self.eval_detail(m, z)?.0)
    }

    pub fn eval_point(&self, m: &Hypersurface, z: &Point) -> Result<ProjectivePoint> {
        ProjectivePoint::new(self.eval(m, z)?)
    }

    /// Rank of `[F, dF/dZ_1, .., dF/dZ_n]` by central differences: `n + 1`
    /// iff the induced map to `CP^n` is locally injective.
    pub fn jacobian_rank(&self, m: &Hypersurface, p: &Point) -> Result<usize> {
        let n = p.n();
        let f0 = self.eval(m, p)?;
        let mut a = CMat::zeros(n + 1, n + 1);
        let scale = f0.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (i, v) in f0.iter().enumerate() {
            a[(i, 0)] = v / scale;
        }
        for j in 0..n {
            let h = 1e-6 * p.coords()[j].norm().max(1e-2);
            let mut plus = p.coords().to_vec();
            let mut minus = p.coords().to_vec();
            plus[j] += h;
            minus[j] -= h;
            let fp = self.eval(m, &Point::new(plus))?;
            let fm = self.eval(m, &Point::new(minus))?;
            for i in 0..=n {
                a[(i, j + 1)] = (fp[i] - fm[i]) / (2.0 * h * scale);
            }
        }
        Ok(linalg::rank(&a, 1e-7))
    }
}

/// Rows of `directions(d, k)`: `k` deterministic, well-spread points of the
/// unit polydisc in `C^d`.
fn directions(d: usize, k: usize) -> Vec<Vec<C64>> {
    const G: [f64; 4] = [0.618_033_988_749_895, 0.414_213_562_373_095, 0.732_050_807_568_877, 0.236_067_977_499_79];
    const H: [f64; 4] = [0.754_877_666_246_693, 0.569_840_290_998_053, 0.324_717_957_244_746, 0.877_438_833_123_346];
    (0..k)
        .map(|i| {
            (0..d)
                .map(|j| {
                    if d == 1 {
                        C64::from_polar(1.0, TWO_PI * i as f64 / k as f64)
                    } else {
                        let t = (i as f64 * G[j % 4] + 0.1 * j as f64).fract();
                        let r = 0.35 + 0.65 * (i as f64 * H[j % 4] + 0.5).fract();
                        C64::from_polar(r, TWO_PI * t)
                    }
                })
                .collect()
        })
        .collect()
}

/// `dh/dz_j` of the Segre graph `w = h(z, anti)` at `(z, w)`.
fn graph_gradient(m: &Hypersurface, z: &[C64], w: C64, anti: &[C64]) -> Result<Vec<C64>> {
    let n = m.n();
    let mut hol = z.to_vec();
    hol.push(w);
    let jet = m.rho_jet(&hol, anti, 1)?;
    let rw = jet.partials[n - 1];
    if rw.norm() == 0.0 {
        return Err(Error::Singular("d rho/dw = 0 on a Segre variety".into()));
    }
    Ok((0..n - 1).map(|j| -jet.partials[j] / rw).collect())
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Point of `Q_Z` closest (in the polydisc metric) to `b`: either the
/// vertical projection or the point at height `w = b_w`.
fn centre_on_segre(m: &Hypersurface, anti: &[C64], b: &Point, r: Domain) -> Result<Point> {
    let vertical = Point::from_zw(b.z(), m.solve_graph(b.z(), anti, b.w())?);
    let score = |p: &Point| {
        let dz = p.z().iter().zip(b.z()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        (dz / r.z).max((p.w() - b.w()).norm() / r.w)
    };
    let mut best = (score(&vertical), vertical.clone());
    let mut z = b.z().to_vec();
    let mut w = vertical.w();
    for _ in 0..40 {
        w = match m.solve_graph(&z, anti, w) {
            Ok(w) => w,
            Err(_) => break,
        };
        let g = w - b.w();
        let dg = graph_gradient(m, &z, w, anti)?[0];
        if dg.norm() < 1e-12 {
            break;
        }
        let step = g / dg;
        z[0] -= step;
        if step.norm() < 1e-13 {
            let p = Point::from_zw(&z, m.solve_graph(&z, anti, w)?);
            if score(&p) < best.0 {
                best = (score(&p), p);
            }
            break;
        }
        if (z[0] - b.z()[0]).norm() > 2.0 * r.z {
            break;
        }
    }
    Ok(best.1)
}

const REFLECTED_SPREAD: f64 = 0.25;

/// The Segre-step value of the continuation of `parent` at `z`.
fn reflect(m: &Hypersurface, parent: &MapGerm, z: &Point, q_tol: f64) -> Result<(Vec<C64>, f64)> {
    let n = m.n();
    let anti = z.conj();
    let polydisc = parent.is_polydisc();
    let (centre, spread) = if let Kind::Reflected { parent: grand, .. } = &parent.0.kind {
        // Samples around Q_Z ∩ Q_a (a the grandparent's base), whose Segre
        // varieties pass through a; if the two are parallel, above p1.
        let p1 = parent.base();
        let c = match intersect_segre(m, z, grand.base(), p1.z()) {
            Ok(c) if m.u2().contains(&c) => c,
            _ => Point::from_zw(p1.z(), m.solve_graph(p1.z(), &anti, p1.w())?),
        };
        let grad = graph_gradient(m, c.z(), c.w(), &anti)?;
        let r = grand.radius();
        let s = REFLECTED_SPREAD * r.z.min(r.w / max_norm(&grad).max(1e-9));
        (c, s)
    } else {
        let b = parent.base();
        let r = parent.radius();
        let c = centre_on_segre(m, &anti, b, r)?;
        let dz = c.z().iter().zip(b.z()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        let dw = (c.w() - b.w()).norm();
        let grad = graph_gradient(m, c.z(), c.w(), &anti)?;
        let s = 0.5 * (r.z - dz).min((r.w - dw) / max_norm(&grad).max(1e-12));
        if !(s > 0.02 * r.z) {
            return Err(Error::EmptyIntersection(format!(
                "Q_Z misses the germ polydisc at {:?}",
                b.coords()
            )));
        }
        (c, s)
    };
    let grad = graph_gradient(m, centre.z(), centre.w(), &anti)?;
    let mut values = Vec::with_capacity(n + 8);
    let mut inner = 0.0f64;
    for u in directions(n - 1, n + 8) {
        let zk: Vec<C64> = centre.z().iter().zip(&u).map(|(c, d)| c + spread * d).collect();
        let guess = centre.w() + grad.iter().zip(&u).map(|(g, d)| g * spread * d).sum::<C64>();
        let y = Point::from_zw(&zk, m.solve_graph(&zk, &anti, guess)?);
        if polydisc && !in_polydisc(&y, parent.base(), parent.radius()) {
            continue;
        }
        let (v, r) = parent.eval_detail(m, &y)?;
        inner = inner.max(r);
        values.push(ProjectivePoint::new(v)?);
    }
    if values.len() < n + 4 {
        return Err(Error::EmptyIntersection("too few samples of Q_Z inside the polydisc".into()));
    }
    let (h, res) = fit_hyperplane(&values)?;
    if res > q_tol {
        return Err(Error::Residual { context: "Segre-step hyperplane fit".into(), residual: res, tolerance: q_tol });
    }
    let zeta = parent.target().inverse_segre(&h);
    Ok((zeta.homog().to_vec(), res.max(inner)))
}

fn in_polydisc(p: &Point, c: &Point, r: Domain) -> bool {
    let n = p.n();
    (0..n - 1).all(|j| (p.coords()[j] - c.coords()[j]).norm() < r.z) && (p.w() - c.w()).norm() < r.w
}

/// The continuation of `germ` to `z` by one Segre step.
pub fn segre_step(m: &Hypersurface, germ: &MapGerm, z: &Point, cfg: &Config) -> Result<(ProjectivePoint, f64)> {
    if !germ.is_polydisc() {
        return Err(Error::Precondition("segre_step needs a polydisc germ".into()));
    }
    let (v, r) = reflect(m, germ, z, cfg.tol.q_segre)?;
    Ok((ProjectivePoint::new(v)?, r))
}

/// Germ of `F_1` at `p1`, the one-step reflection of a polydisc germ.
pub fn reflected(germ: &MapGerm, p1: &Point, cfg: &Config) -> Result<MapGerm> {
    if !germ.is_polydisc() {
        if let Kind::Reflected { parent, .. } = &germ.0.kind {
            if !parent.is_polydisc() {
                return Err(Error::Precondition("tabulate before a third reflection".into()));
            }
        }
    }
    let kind = Kind::Reflected { parent: germ.clone(), q_tol: cfg.tol.q_segre };
    Ok(germ.with_kind(p1.clone(), germ.radius(), kind))
}

/// Torus-DFT interpolant of a chart-normalized map on a polydisc.
#[derive(Debug)]
struct Table {
    centre: Vec<C64>,
    radius: Vec<f64>,
    dims: Vec<usize>,
    /// Row per homogeneous component, flat multi-index with the last axis fastest.
    coeffs: Vec<Vec<C64>>,
    error: f64,
}

impl Table {
    fn strides(dims: &[usize]) -> Vec<usize> {
        let mut s = vec![1; dims.len()];
        for j in (0..dims.len() - 1).rev() {
            s[j] = s[j + 1] * dims[j + 1];
        }
        s
    }

    fn eval(&self, z: &Point) -> Result<Vec<C64>> {
        let pows: Vec<Vec<C64>> = (0..self.dims.len())
            .map(|j| {
                let zeta = (z.coords()[j] - self.centre[j]) / self.radius[j];
                let mut p = Vec::with_capacity(self.dims[j]);
                let mut acc = C64::new(1.0, 0.0);
                for _ in 0..self.dims[j] {
                    p.push(acc);
                    acc *= zeta;
                }
                p
            })
            .collect();
        for (j, p) in pows.iter().enumerate() {
            if p.len() > 1 && p[1].norm() > 1.0 {
                return Err(Error::OutsideDomain(format!("coordinate {j} outside the tabulated polydisc")));
            }
        }
        let total: usize = self.dims.iter().product();
        let strides = Self::strides(&self.dims);
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len()];
        for flat in 0..total {
            let mut prod = C64::new(1.0, 0.0);
            for j in 0..self.dims.len() {
                prod *= pows[j][(flat / strides[j]) % self.dims[j]];
            }
            for (o, c) in out.iter_mut().zip(&self.coeffs) {
                *o += c[flat] * prod;
            }
        }
        Ok(out)
    }
}

/// Node counts and radii of the tabulation polydisc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    pub nodes_z: usize,
    pub nodes_w: usize,
    /// Tabulation radius in `z`, capped by the distance to the edge of `U1`.
    pub radius_z: f64,
    /// Tabulation radius in `w` as a fraction of `|w|` at the centre.
    pub radius_w: f64,
    /// Angular hops per turn of a loop continued by Segre steps.
    pub loop_hops: usize,
    /// Zig-zag amplitude in `z_1` of such loops, as a fraction of `U1.z`.
    pub zigzag: f64,
}

impl StepOptions {
    pub fn for_dim(n: usize) -> Self {
        if n <= 2 {
            StepOptions { nodes_z: 16, nodes_w: 16, radius_z: 0.1, radius_w: 0.15, loop_hops: 12, zigzag: 0.5 }
        } else {
            StepOptions { nodes_z: 10, nodes_w: 14, radius_z: 0.08, radius_w: 0.12, loop_hops: 12, zigzag: 0.5 }
        }
    }
}

fn dft_axis(vals: &mut [C64], dims: &[usize], axis: usize) {
    let strides = Table::strides(dims);
    let n = dims[axis];
    let st = strides[axis];
    let total = vals.len();
    let twiddle: Vec<C64> = (0..n).map(|k| C64::from_polar(1.0 / n as f64, -TWO_PI * k as f64 / n as f64)).collect();
    let mut line = vec![C64::new(0.0, 0.0); n];
    for start in 0..total {
        if (start / st) % n != 0 {
            continue;
        }
        for (k, l) in line.iter_mut().enumerate() {
            *l = vals[start + k * st];
        }
        for p in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for (k, l) in line.iter().enumerate() {
                acc += l * twiddle[(p * k) % n];
            }
            vals[start + p * st] = acc;
        }
    }
}

/// Tabulates `source` on the polydisc of radius `radius` about `centre`;
/// returns the table germ's data and the worst source residual. Accuracy is
/// checked at off-grid points at 60% of the radius.
fn tabulate(
    m: &Hypersurface,
    source: &MapGerm,
    centre: &Point,
    radius: Domain,
    opts: &StepOptions,
) -> Result<(Table, f64)> {
    let n = m.n();
    let radii: Vec<f64> = (0..n).map(|j| if j + 1 < n { radius.z } else { radius.w }).collect();
    let dims: Vec<usize> = (0..n).map(|j| if j + 1 < n { opts.nodes_z } else { opts.nodes_w }).collect();
    let (f_base, mut worst) = source.eval_detail(m, centre)?;
    let norm2: f64 = f_base.iter().map(|c| c.norm_sqr()).sum();
    let chart: Vec<C64> = f_base.iter().map(|c| c.conj() / norm2).collect();
    let normalize = |v: Vec<C64>| -> Result<Vec<C64>> {
        let d: C64 = v.iter().zip(&chart).map(|(a, b)| a * b).sum();
        let scale = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if d.norm() < 1e-6 * scale * norm2.sqrt().recip() * norm2.sqrt() {
            return Err(Error::Degenerate("tabulation chart degenerates on the polydisc".into()));
        }
        Ok(v.into_iter().map(|c| c / d).collect())
    };
    let total: usize = dims.iter().product();
    let strides = Table::strides(&dims);
    let mut vals: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); total]; n + 1];
    for flat in 0..total {
        let coords: Vec<C64> = (0..n)
            .map(|j| {
                let k = (flat / strides[j]) % dims[j];
                centre.coords()[j] + C64::from_polar(radii[j], TWO_PI * k as f64 / dims[j] as f64)
            })
            .collect();
        let (v, r) = source.eval_detail(m, &Point::new(coords))?;
        worst = worst.max(r);
        for (c, x) in normalize(v)?.into_iter().enumerate() {
            vals[c][flat] = x;
        }
    }
    for row in vals.iter_mut() {
        for axis in 0..n {
            dft_axis(row, &dims, axis);
        }
    }
    let mut table = Table { centre: centre.coords().to_vec(), radius: radii.clone(), dims, coeffs: vals, error: 0.0 };
    let mut error = 0.0f64;
    for k in 0..3 {
        let coords: Vec<C64> = (0..n)
            .map(|j| centre.coords()[j] + C64::from_polar(0.6 * radii[j], 0.7 + 2.1 * k as f64 + 0.9 * j as f64))
            .collect();
        let p = Point::new(coords);
        let direct = source.eval(m, &p)?;
        error = error.max(projective_distance(&direct, &table.eval(&p)?));
    }
    table.error = error;
    Ok((table, worst))
}

/// Diagnostics of one double Segre step `a -> p1 -> b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub from: Point,
    pub via: Point,
    pub to: Point,
    /// Worst hyperplane-fit residual over the tabulation nodes.
    pub hyperplane_residual: f64,
    /// Interpolation error at off-grid check points.
    pub table_error: f64,
    /// Agreement with the previous germ on the polydisc overlap, if any.
    pub consistency: Option<f64>,
}

/// Tabulation radius about `b`, kept inside `U1` and away from `X`.
fn table_radius(m: &Hypersurface, b: &Point, opts: &StepOptions) -> Result<Domain> {
    let zmax = max_norm(b.z());
    let rz = opts.radius_z.min(0.98 * m.u1().z - zmax);
    let rw = (opts.radius_w * b.w().norm()).min(0.98 * m.u1().w - b.w().norm());
    if rz <= 0.0 || rw <= 0.0 {
        return Err(Error::OutsideDomain(format!("no room for a polydisc at {:?}", b.coords())));
    }
    Ok(Domain::new(rz, rw))
}

/// Continues a polydisc germ at `a` through `p1 ∈ Q_a ∩ Q_b` to a tabulated
/// germ at `b`.
pub fn double_step(
    m: &Hypersurface,
    germ: &MapGerm,
    p1: &Point,
    b: &Point,
    opts: &StepOptions,
    cfg: &Config,
) -> Result<(MapGerm, StepReport)> {
    if !germ.is_polydisc() {
        return Err(Error::Precondition("double_step needs a polydisc germ".into()));
    }
    let f1 = reflected(germ, p1, cfg)?;
    let f2 = reflected(&f1, b, cfg)?;
    let radius = table_radius(m, b, opts)?;
    let (table, residual) = tabulate(m, &f2, b, radius, opts)?;
    let report_err = table.error;
    let out = germ.with_kind(b.clone(), radius, Kind::Tabulated(table));
    let consistency = overlap_agreement(m, germ, &out)?;
    if let Some(c) = consistency {
        if c > cfg.tol.step_consistency {
            return Err(Error::Residual { context: "step consistency on overlap".into(), residual: c, tolerance: cfg.tol.step_consistency });
        }
    }
    let report = StepReport {
        from: germ.base().clone(),
        via: p1.clone(),
        to: b.clone(),
        hyperplane_residual: residual,
        table_error: report_err,
        consistency,
    };
    Ok((out, report))
}

/// Max projective distance of two germs at points of the overlap of their
/// polydiscs (half radii), or `None` when they do not overlap.
pub fn overlap_agreement(m: &Hypersurface, f: &MapGerm, g: &MapGerm) -> Result<Option<f64>> {
    let pts = overlap_points(f, g, 8);
    if pts.is_empty() {
        return Ok(None);
    }
    let mut worst = 0.0f64;
    for p in &pts {
        worst = worst.max(projective_distance(&f.eval(m, p)?, &g.eval(m, p)?));
    }
    Ok(Some(worst))
}

/// Points inside both polydiscs shrunk to half radius.
fn overlap_points(f: &MapGerm, g: &MapGerm, count: usize) -> Vec<Point> {
    let (a, b) = (f.base(), g.base());
    let (ra, rb) = (f.radius(), g.radius());
    let half = |r: Domain| Domain::new(0.5 * r.z, 0.5 * r.w);
    let mid: Vec<C64> = a.coords().iter().zip(b.coords()).map(|(x, y)| (x + y) * 0.5).collect();
    let n = a.n();
    let mut out = Vec::new();
    for u in directions(n, 4 * count) {
        let p = Point::new(
            mid.iter()
                .zip(&u)
                .enumerate()
                .map(|(j, (c, d))| c + d * 0.25 * if j + 1 < n { ra.z.min(rb.z) } else { ra.w.min(rb.w) })
                .collect(),
        );
        if in_polydisc(&p, a, half(ra)) && in_polydisc(&p, b, half(rb)) {
            out.push(p);
            if out.len() == count {
                break;
            }
        }
    }
    out
}

/// Fits `tau` with `g = tau ∘ f` on the polydisc overlap; returns `tau`, the
/// fit residual and the pointwise reproduction error.
pub fn glue(m: &Hypersurface, f: &MapGerm, g: &MapGerm, cfg: &Config) -> Result<(ProjectiveMap, f64, f64)> {
    let n = m.n();
    let pts = overlap_points(f, g, 2 * (n + 5));
    if pts.len() < n + 3 {
        return Err(Error::EmptyIntersection("germ polydiscs do not overlap".into()));
    }
    let pairs = pts
        .iter()
        .map(|p| Ok((f.eval_point(m, p)?, g.eval_point(m, p)?)))
        .collect::<Result<Vec<_>>>()?;
    let (tau, res) = fit_projective_map(&pairs)?;
    let mut err = 0.0f64;
    for (x, y) in &pairs {
        err = err.max(tau.apply(x).distance(y));
    }
    if res > cfg.tol.glue || err > cfg.tol.glue {
        return Err(Error::Residual { context: "projective glue".into(), residual: res.max(err), tolerance: cfg.tol.glue });
    }
    Ok((tau, res, err))
}

/// Q-Segre check: for `count` random `s` with `Q_s` through the polydisc,
/// the image of the piece of `Q_s` in the polydisc must lie in a
/// hyperplane. Returns the worst fit residual.
pub fn q_segre_check<R: Rng>(m: &Hypersurface, germ: &MapGerm, count: usize, rng: &mut R) -> Result<f64> {
    let n = m.n();
    let (b, r) = (germ.base().clone(), germ.radius());
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut tries = 0;
    while done < count {
        tries += 1;
        if tries > 10 * count {
            return Err(Error::SamplingFailed { failed: tries - done, attempted: tries });
        }
        // y in the polydisc, s on Q_y, so that y ∈ Q_s.
        let yz: Vec<C64> = b.z().iter().map(|c| c + random_in_disc(rng, 0.3 * r.z)).collect();
        let y = Point::from_zw(&yz, b.w() + random_in_disc(rng, 0.3 * r.w));
        let sz: Vec<C64> = yz.iter().map(|c| c + random_in_disc(rng, 0.5 * r.z)).collect();
        let Ok(sw) = m.solve_graph(&sz, &y.conj(), y.w()) else { continue };
        let s = Point::from_zw(&sz, sw);
        let anti = s.conj();
        let Ok(grad) = graph_gradient(m, y.z(), y.w(), &anti) else { continue };
        let spread = 0.6 * r.z.min(0.6 * r.w / max_norm(&grad).max(1e-12));
        let mut vals = Vec::new();
        for u in directions(n - 1, 2 * n + 8) {
            let zk: Vec<C64> = yz.iter().zip(&u).map(|(c, d)| c + spread * d).collect();
            let guess = y.w() + grad.iter().zip(&u).map(|(g, d)| g * spread * d).sum::<C64>();
            let Ok(wk) = m.solve_graph(&zk, &anti, guess) else { continue };
            let p = Point::from_zw(&zk, wk);
            if in_polydisc(&p, &b, r) {
                if let Ok(v) = germ.eval_point(m, &p) {
                    vals.push(v);
                }
            }
        }
        if vals.len() < n + 4 {
            continue;
        }
        let Ok((_, res)) = fit_hyperplane(&vals) else { continue };
        worst = worst.max(res);
        done += 1;
    }
    Ok(worst)
}

/// A path for continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuationPath {
    /// Polyline starting at (or, if different, after) the germ's base.
    Waypoints(Vec<Point>),
    /// `w` runs `turns` times around the circle `|w| = w_radius` from
    /// `Arg w = start_arg`, with `z = z0`.
    Loop(LoopSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    #[serde(with = "crate::json::complex_vec")]
    pub z0: Vec<C64>,
    pub w_radius: f64,
    pub turns: i64,
    #[serde(default)]
    pub start_arg: f64,
}

impl LoopSpec {
    pub fn new(z0: Vec<C64>, w_radius: f64, turns: i64) -> Self {
        LoopSpec { z0, w_radius, turns, start_arg: 0.0 }
    }

    pub fn base(&self) -> Point {
        Point::from_zw(&self.z0, C64::from_polar(self.w_radius, self.start_arg))
    }

    fn at(&self, theta: f64, z: &[C64]) -> Point {
        Point::from_zw(z, C64::from_polar(self.w_radius, self.start_arg + theta))
    }
}

impl ContinuationPath {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn start(&self) -> Option<Point> {
        match self {
            ContinuationPath::Waypoints(w) => w.first().cloned(),
            ContinuationPath::Loop(l) => Some(l.base()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuationMode {
    /// Branch tracking for closed-form germs, Segre steps otherwise.
    Auto,
    BranchTracking,
    SegreSteps,
}

/// A continued germ with per-step diagnostics.
#[derive(Debug, Clone)]
pub struct Continued {
    pub germ: MapGerm,
    pub steps: Vec<StepReport>,
}

fn closest_to_x(a: &Point, b: &Point) -> f64 {
    let (wa, wb) = (a.w(), b.w());
    let d = wb - wa;
    if d.norm() == 0.0 {
        return wa.norm();
    }
    let t = (-(wa * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
    (wa + d * t).norm()
}

/// Moves a closed-form germ (possibly transformed) to `to`, with `dlw` the
/// change of the tracked logarithm.
fn move_closed(germ: &MapGerm, to: &Point, dlw: C64) -> Result<MapGerm> {
    match &germ.0.kind {
        Kind::Closed { exprs, winding } => {
            let from = germ.base().w();
            let lw = from.ln() + C64::new(0.0, TWO_PI * *winding as f64) + dlw;
            let k = ((lw - to.w().ln()).im / TWO_PI).round() as i64;
            Ok(MapGerm(Arc::new(Germ {
                base: to.clone(),
                radius: Domain::new(germ.radius().z, 0.6 * to.w().norm()),
                target: germ.target().clone(),
                kind: Kind::Closed { exprs: exprs.clone(), winding: k },
            })))
        }
        Kind::Transformed { tau, inner } => move_closed(inner, to, dlw)?.transformed(tau),
        _ => Err(Error::Precondition("branch tracking needs a closed-form germ".into())),
    }
}

fn track(m: &Hypersurface, germ: &MapGerm, pts: &[Point]) -> Result<MapGerm> {
    let mut dlw = C64::new(0.0, 0.0);
    let thr = m.degeneracy_threshold().max(1e-8);
    for (i, pair) in pts.windows(2).enumerate() {
        if closest_to_x(&pair[0], &pair[1]) < thr {
            return Err(Error::Continuation { index: i, reason: "path too close to X".into() });
        }
        // |Δ Arg w| < π/2 per piece.
        let mut pieces = 1;
        loop {
            let ok = (0..pieces).all(|k| {
                let t0 = k as f64 / pieces as f64;
                let t1 = (k + 1) as f64 / pieces as f64;
                let wa = pair[0].w() + (pair[1].w() - pair[0].w()) * t0;
                let wb = pair[0].w() + (pair[1].w() - pair[0].w()) * t1;
                (wb / wa).arg().abs() < PI / 2.0
            });
            if ok {
                break;
            }
            pieces *= 2;
            if pieces > 1 << 20 {
                return Err(Error::Continuation { index: i, reason: "path too close to X".into() });
            }
        }
        for k in 0..pieces {
            let wa = pair[0].w() + (pair[1].w() - pair[0].w()) * (k as f64 / pieces as f64);
            let wb = pair[0].w() + (pair[1].w() - pair[0].w()) * ((k + 1) as f64 / pieces as f64);
            dlw += (wb / wa).ln();
        }
    }
    move_closed(germ, pts.last().expect("nonempty"), dlw)
}

/// Branch-tracks a closed-form germ along a path. Loops change the winding
/// by exactly `turns`.
pub fn track_branch(m: &Hypersurface, germ: &MapGerm, path: &ContinuationPath) -> Result<MapGerm> {
    match path {
        ContinuationPath::Waypoints(w) => {
            let mut pts = vec![germ.base().clone()];
            pts.extend(w.iter().cloned());
            track(m, germ, &pts)
        }
        ContinuationPath::Loop(l) => {
            let start = track(m, germ, &[germ.base().clone(), l.base()])?;
            if l.w_radius < m.degeneracy_threshold().max(1e-8) {
                return Err(Error::Continuation { index: 0, reason: "loop too close to X".into() });
            }
            let looped = match &start.0.kind {
                Kind::Closed { exprs, winding } => {
                    start.with_kind(start.base().clone(), start.radius(), Kind::Closed { exprs: exprs.clone(), winding: winding + l.turns })
                }
                Kind::Transformed { .. } => {
                    // transformed closed form: wind the inner germ
                    let mut chain = Vec::new();
                    let mut g = start.clone();
                    while let Kind::Transformed { tau, inner } = &g.0.kind {
                        chain.push(tau.clone());
                        g = inner.clone();
                    }
                    let Kind::Closed { exprs, winding } = &g.0.kind else {
                        return Err(Error::Precondition("branch tracking needs a closed-form germ".into()));
                    };
                    let mut out = g.with_kind(g.base().clone(), g.radius(), Kind::Closed { exprs: exprs.clone(), winding: winding + l.turns });
                    for tau in chain.iter().rev() {
                        out = out.transformed(tau)?;
                    }
                    out
                }
                _ => return Err(Error::Precondition("branch tracking needs a closed-form germ".into())),
            };
            Ok(looped)
        }
    }
}

/// Waypoints of a loop continued by Segre steps: `z_1` zig-zags by
/// `±delta` between consecutive hops so that consecutive Segre varieties
/// intersect inside `U1`.
pub fn loop_waypoints(m: &Hypersurface, l: &LoopSpec, opts: &StepOptions) -> Vec<Point> {
    let delta = opts.zigzag * m.u1().z;
    let hops = opts.loop_hops * l.turns.unsigned_abs() as usize;
    let dir = l.turns.signum() as f64;
    let shifted = |sign: f64| {
        let mut z = l.z0.clone();
        z[0] += delta * sign;
        z
    };
    let mut pts = vec![l.at(0.0, &shifted(1.0))];
    for k in 1..=hops {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let theta = dir * TWO_PI * k as f64 / opts.loop_hops as f64;
        pts.push(l.at(theta, &shifted(sign)));
    }
    let last_theta = dir * TWO_PI * hops as f64 / opts.loop_hops as f64;
    if hops % 2 == 1 {
        pts.push(l.at(last_theta, &shifted(1.0)));
    }
    pts.push(l.at(last_theta, &l.z0));
    pts
}

/// Continues a polydisc germ to `b` by double steps, inserting a shifted
/// midpoint when `Q_a ∩ Q_b` has no usable point.
fn hop(
    m: &Hypersurface,
    germ: &MapGerm,
    b: &Point,
    opts: &StepOptions,
    cfg: &Config,
    depth: usize,
    reports: &mut Vec<StepReport>,
) -> Result<MapGerm> {
    let a = germ.base().clone();
    if a.dist(b) == 0.0 {
        return Ok(germ.clone());
    }
    let mut rng = cfg.rng(0x5e9e);
    let failure = match two_step_with_seeds(m, &a, b, &mut rng, 8) {
        Some(p1) => match double_step(m, germ, &p1, b, opts, cfg) {
            Ok((g, r)) => {
                reports.push(r);
                return Ok(g);
            }
            Err(e @ Error::EmptyIntersection(_)) => e,
            Err(e) => return Err(e),
        },
        None => Error::EmptyIntersection(format!("no Segre intersection between {:?} and {:?}", a.coords(), b.coords())),
    };
    if depth >= 3 {
        return Err(failure);
    }
    // Halve the rotation: a -> (z_b, w_mid) -> (z_a, w_mid) -> b, with
    // w_mid the geometric mean, so that every hop changes z.
    let w_mid = (a.w() * b.w()).sqrt();
    let w_mid = if (w_mid - a.w()).norm() > (-w_mid - a.w()).norm() { -w_mid } else { w_mid };
    let mut za = a.z().to_vec();
    let zb = b.z();
    if za.iter().zip(zb).all(|(x, y)| (x - y).norm() < 1e-3) {
        let sign = if za[0].re > 0.0 { -1.0 } else { 1.0 };
        za[0] += opts.zigzag * m.u1().z * sign;
    }
    let m1 = Point::from_zw(zb, w_mid);
    let m2 = Point::from_zw(&za, w_mid);
    let g = hop(m, germ, &m1, opts, cfg, depth + 1, reports)?;
    let g = hop(m, &g, &m2, opts, cfg, depth + 1, reports)?;
    hop(m, &g, b, opts, cfg, depth + 1, reports)
}

/// Continues by Segre steps through the given waypoints.
pub fn continue_by_steps(
    m: &Hypersurface,
    germ: &MapGerm,
    waypoints: &[Point],
    opts: &StepOptions,
    cfg: &Config,
) -> Result<Continued> {
    let mut g = germ.clone();
    let mut steps = Vec::new();
    for (i, w) in waypoints.iter().enumerate() {
        if m.near_x(w) || !m.u1().contains(w) {
            return Err(Error::Continuation { index: i, reason: "waypoint outside U1 \\ X".into() });
        }
        g = hop(m, &g, w, opts, cfg, 0, &mut steps)
            .map_err(|e| Error::Continuation { index: i, reason: e.to_string() })?;
    }
    Ok(Continued { germ: g, steps })
}

/// Continuation along a Segre chain `[p0, p1, .., target]`.
pub fn continue_along_chain(
    m: &Hypersurface,
    germ: &MapGerm,
    chain: &SegreChain,
    opts: &StepOptions,
    cfg: &Config,
) -> Result<Continued> {
    if chain.steps() % 2 != 0 {
        return Err(Error::Precondition("chain must have an even number of steps".into()));
    }
    if chain.start().dist(germ.base()) > 1e-12 {
        return Err(Error::Precondition("chain must start at the germ base".into()));
    }
    let mut g = germ.clone();
    let mut steps = Vec::new();
    let mut rng = cfg.rng(0xc4a1);
    for (i, pair) in chain.points[1..].chunks(2).enumerate() {
        let (g2, r) = double_step(m, &g, &pair[0], &pair[1], opts, cfg)
            .map_err(|e| Error::Continuation { index: 2 * i, reason: e.to_string() })?;
        let q = q_segre_check(m, &g2, 5, &mut rng)?;
        if q > cfg.tol.q_segre {
            return Err(Error::Continuation { index: 2 * i, reason: format!("Q-Segre residual {q:.3e}") });
        }
        steps.push(r);
        g = g2;
    }
    Ok(Continued { germ: g, steps })
}

/// Continues a germ along a path; see [`ContinuationMode`].
pub fn continue_along_path(
    m: &Hypersurface,
    germ: &MapGerm,
    path: &ContinuationPath,
    mode: ContinuationMode,
    opts: &StepOptions,
    cfg: &Config,
) -> Result<Continued> {
    let closed = germ.winding().is_some();
    let tracking = match mode {
        ContinuationMode::Auto => closed,
        ContinuationMode::BranchTracking => true,
        ContinuationMode::SegreSteps => false,
    };
    if tracking {
        return Ok(Continued { germ: track_branch(m, germ, path)?, steps: Vec::new() });
    }
    let waypoints = match path {
        ContinuationPath::Waypoints(w) => w.clone(),
        ContinuationPath::Loop(l) => {
            let mut w = Vec::new();
            if l.base().dist(germ.base()) > 1e-12 {
                w.push(l.base());
            }
            w.extend(loop_waypoints(m, l, opts));
            w
        }
    };
    continue_by_steps(m, germ, &waypoints, opts, cfg)
}

/// Reflected values along a set of points, for diagnostics: the segre-step
/// value of `germ` and the germ's own value, as projective points.
pub fn step_vs_germ(m: &Hypersurface, germ: &MapGerm, z: &Point, cfg: &Config) -> Result<f64> {
    let (p, _) = segre_step(m, germ, z, cfg)?;
    Ok(p.distance(&germ.eval_point(m, z)?))
}

/// Hyperplane of the image of a germ's Segre variety, exposed for tests.
pub fn image_hyperplane(m: &Hypersurface, germ: &MapGerm, z: &Point) -> Result<Hyperplane> {
    let (p, _) = segre_step(m, germ, z, &Config::default())?;
    Ok(germ.target().segre_hyperplane(&p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn mlog() -> Hypersurface {
        Hypersurface::from_exp_form("mlog", 2, parse("2*z1*cz1").unwrap(), Domain::new(0.95, 2.0), Domain::new(1.0, 50.0)).unwrap()
    }

    fn log_germ(m: &Hypersurface, base: Point) -> MapGerm {
        let spec = GermSpec {
            components: vec![parse("z1").unwrap(), parse("Lw").unwrap(), parse("1").unwrap()],
            winding: 0,
            base,
            target: HermitianQuadric::standard(1, 0).unwrap(),
        };
        MapGerm::from_spec(m, &spec).unwrap()
    }

    #[test]
    fn segre_step_reproduces_germ_on_own_polydisc() {
        let m = mlog();
        let g = log_germ(&m, Point::new(vec![c(0.0, 0.0), c(1.0, 0.0)]));
        let z = Point::new(vec![c(0.05, 0.02), c(0.97, 0.05)]);
        assert!(step_vs_germ(&m, &g, &z, &Config::default()).unwrap() < 1e-10);
        let far = Point::new(vec![c(0.0, 0.0), c(1.8, 0.0)]);
        assert!(matches!(segre_step(&m, &g, &far, &Config::default()), Err(Error::EmptyIntersection(_))));
    }

    #[test]
    fn double_step_matches_closed_form() {
        let m = mlog();
        let cfg = Config::default();
        let a = Point::new(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let g = log_germ(&m, a.clone());
        let b = Point::new(vec![c(0.1, 0.0), c(0.9, 0.0)]);
        let mut rng = cfg.rng(1);
        let p1 = crate::segresets::two_step_reachable(&m, &a, &b, &mut rng).unwrap();
        let opts = StepOptions::for_dim(2);
        let (t, rep) = double_step(&m, &g, &p1, &b, &opts, &cfg).unwrap();
        let oracle = track_branch(&m, &g, &ContinuationPath::Waypoints(vec![b.clone()])).unwrap();
        let mut worst = 0.0f64;
        for u in directions(2, 20) {
            let p = Point::new(vec![b.z()[0] + u[0] * 0.05, b.w() + u[1] * 0.06]);
            worst = worst.max(projective_distance(&t.eval(&m, &p).unwrap(), &oracle.eval(&m, &p).unwrap()));
        }
        assert!(worst < 1e-7, "worst {worst:e}, report {rep:?}");
    }

    #[test]
    fn loop_winding_is_exact() {
        let m = mlog();
        let g = log_germ(&m, Point::new(vec![c(0.0, 0.0), c(1.0, 0.0)]));
        let path = ContinuationPath::Loop(LoopSpec::new(vec![c(0.0, 0.0)], 1.0, 3));
        let g3 = track_branch(&m, &g, &path).unwrap();
        assert_eq!(g3.winding(), Some(3));
        let one = ContinuationPath::Loop(LoopSpec::new(vec![c(0.0, 0.0)], 1.0, 1));
        let mut h = g.clone();
        for _ in 0..3 {
            h = track_branch(&m, &h, &one).unwrap();
        }
        assert_eq!(h.winding(), Some(3));
    }

    #[test]
    fn q_segre_property() {
        let m = mlog();
        let mut rng = Config::default().rng(3);
        let base = Point::new(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let g = log_germ(&m, base.clone());
        assert!(q_segre_check(&m, &g, 20, &mut rng).unwrap() < 1e-8);
        let spec = GermSpec {
            components: vec![parse("z1").unwrap(), parse("Lw + 0.1*z1^3").unwrap(), parse("1").unwrap()],
            winding: 0,
            base,
            target: HermitianQuadric::standard(1, 0).unwrap(),
        };
        let bad = MapGerm::from_spec(&m, &spec).unwrap();
        let r = q_segre_check(&m, &bad, 20, &mut rng).unwrap();
        assert!(r > 1e-3, "residual {r:e}");
    }

    #[test]
    fn path_json_round_trip() {
        let p = ContinuationPath::Loop(LoopSpec::new(vec![c(0.0, 0.0)], 0.5, 1));
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with("{\"loop\""));
        assert_eq!(ContinuationPath::from_json(&s).unwrap(), p);
    }

    #[test]
    fn segre_step_loop_matches_branch_tracking() {
        let m = mlog();
        let cfg = Config::default();
        let base = Point::new(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let g = log_germ(&m, base.clone());
        let path = ContinuationPath::Loop(LoopSpec::new(vec![c(0.0, 0.0)], 1.0, 1));
        let opts = StepOptions::for_dim(2);
        let tab = continue_along_path(&m, &g, &path, ContinuationMode::SegreSteps, &opts, &cfg).unwrap();
        let closed = continue_along_path(&m, &g, &path, ContinuationMode::Auto, &opts, &cfg).unwrap();
        let mut worst = 0.0f64;
        for u in directions(2, 50) {
            let p = Point::new(vec![u[0] * 0.05, c(1.0, 0.0) + u[1] * 0.07]);
            worst = worst.max(projective_distance(&tab.germ.eval(&m, &p).unwrap(), &closed.germ.eval(&m, &p).unwrap()));
        }
        assert!(worst < 1e-7);
    }
}
