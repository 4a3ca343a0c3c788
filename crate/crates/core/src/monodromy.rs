//! Monodromy of a germ around `X`: the matrix `sigma` with `F_1 = sigma ∘ F_0`
//! after one turn of `w` about 0, its logarithm `A`, the scaled Jordan
//! invariant, finite order and `k`-roots, sphericity transfer between the two
//! sides of `M \ X`, and the invariance checks.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::continuation::{
    continue_along_path, segre_step, ContinuationMode, ContinuationPath, GermSpec, LoopSpec, MapGerm, StepOptions,
};
use crate::error::{Error, Result};
use crate::expr::{AnalyticExpr, BinOp, Node, Var};
use crate::hypersurface::{random_in_disc, Domain, Hypersurface, Point};
use crate::linalg::{self, CMat};
use crate::quadric::{
    cluster_tolerance, exp_2pi_i, finite_order, fit_projective_map, fit_quadric, is_scalar, matrix_log_branch, normalized,
    projective_distance, scaled_jordan, w_power, HermitianQuadric, JordanForm, ProjectiveMap, ProjectivePoint,
};

const TWO_PI: f64 = 2.0 * PI;

/// Fit diagnostics of a monodromy computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Smallest singular value of the map-fit condition matrix.
    pub fit: f64,
    /// Max `|exp(2 pi i A) - sigma_c|`.
    pub exp_log: f64,
    pub pairs: usize,
    /// Worst tabulation error along the loop (Segre-step mode only).
    #[serde(default)]
    pub table_error: Option<f64>,
    /// Worst hyperplane-fit residual along the loop (Segre-step mode only).
    #[serde(default)]
    pub hyperplane: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyResult {
    pub sigma: ProjectiveMap,
    #[serde(rename = "A", with = "crate::json::matrix")]
    pub a: CMat,
    pub jordan: JordanForm,
    pub finite_order: Option<u32>,
    pub residuals: Residuals,
}

/// The loop `|w| = |b_w|`, `z = b_z`, through `b`.
pub fn loop_through(b: &Point, turns: i64) -> LoopSpec {
    LoopSpec { z0: b.z().to_vec(), w_radius: b.w().norm(), turns, start_arg: b.w().arg() }
}

/// Germ continued to the loop's base point (identity if already there).
fn at_loop_base(m: &Hypersurface, germ: &MapGerm, l: &LoopSpec, mode: ContinuationMode, opts: &StepOptions, cfg: &Config) -> Result<MapGerm> {
    let b = l.base();
    if germ.base().dist(&b) < 1e-13 {
        return Ok(germ.clone());
    }
    Ok(continue_along_path(m, germ, &ContinuationPath::Waypoints(vec![b]), mode, opts, cfg)?.germ)
}

/// Sample points in the common polydisc of two germs at the same base.
fn sample_near(base: &Point, r: Domain, count: usize, frac: f64) -> Vec<Point> {
    let n = base.n();
    (0..count)
        .map(|k| {
            let coords = (0..n)
                .map(|j| {
                    let rad = if j + 1 < n { r.z } else { r.w };
                    let t = (k as f64 * [0.618_033_988_75, 0.414_213_562_37, 0.732_050_807_57][j % 3] + 0.13 * j as f64).fract();
                    let s = 0.3 + 0.7 * ((k as f64 + 0.5) * 0.754_877_666_2).fract();
                    base.coords()[j] + C64::from_polar(frac * rad * s, TWO_PI * t)
                })
                .collect();
            Point::new(coords)
        })
        .collect()
}

fn min_domain(a: Domain, b: Domain) -> Domain {
    Domain::new(a.z.min(b.z), a.w.min(b.w))
}

/// Clustering radius for a fitted `sigma`: entries carry at least rounding
/// error, and a defective eigenvalue splits like its square root.
fn jordan_tolerance(cfg: &Config, fit: f64) -> f64 {
    cluster_tolerance(cfg.tol.cluster, fit.max(1e-13))
}

/// Fits `sigma` with `g ~ sigma ∘ f` near the common base.
pub fn fit_sigma(m: &Hypersurface, f: &MapGerm, g: &MapGerm, cfg: &Config) -> Result<(ProjectiveMap, f64, usize)> {
    let n = m.n();
    let count = 2 * (n + 5);
    let pts = sample_near(f.base(), min_domain(f.radius(), g.radius()), count, 0.5);
    let pairs = pts
        .iter()
        .map(|p| Ok((f.eval_point(m, p)?, g.eval_point(m, p)?)))
        .collect::<Result<Vec<_>>>()?;
    let tabulated = f.kind_name() == "tabulated" || g.kind_name() == "tabulated";
    let (sigma, res) = if tabulated && f.target() == g.target() {
        // A table covers a small polydisc on which the map is nearly affine.
        // Segre-step values far along Q_b are better spread; they transform
        // by the adjoint of sigma with respect to the target quadric.
        let refl = reflected_pairs(m, f, g, 2 * count, cfg);
        let (tau, res_tau) = fit_projective_map(&refl)?;
        let sigma = from_adjoint(&tau, f.target())?;
        // The two estimates disagree by about the error of the worse one;
        // that is the honest uncertainty for eigenvalue clustering.
        let (near, _) = fit_projective_map(&pairs)?;
        let spread = projective_distance(
            &near.matrix().iter().copied().collect::<Vec<_>>(),
            &sigma.matrix().iter().copied().collect::<Vec<_>>(),
        );
        (sigma, res_tau.max(spread))
    } else {
        fit_projective_map(&pairs)?
    };
    if res > cfg.tol.monodromy_fit {
        return Err(Error::Residual { context: "monodromy fit".into(), residual: res, tolerance: cfg.tol.monodromy_fit });
    }
    Ok((sigma, res, pairs.len()))
}

/// Pairs of Segre-step values of `f` and `g` at points `(z, h_b(z) + t)`
/// with `z` up to half of `U1` and `t` a fraction of the common `w` radius.
fn reflected_pairs(m: &Hypersurface, f: &MapGerm, g: &MapGerm, count: usize, cfg: &Config) -> Vec<(ProjectivePoint, ProjectivePoint)> {
    let b = f.base();
    let rw = f.radius().w.min(g.radius().w);
    let n = m.n();
    let mut out = Vec::new();
    for k in 0..4 * count {
        if out.len() >= count {
            break;
        }
        let t = k as f64 * 0.618_033_988_75;
        let z: Vec<C64> = (0..n - 1)
            .map(|j| C64::from_polar(0.5 * m.u1().z * (0.3 + 0.7 * (t + 0.37 * j as f64).fract()), TWO_PI * (1.3 * t + 0.21 * j as f64)))
            .collect();
        let Ok(w) = m.solve_graph(&z, &b.conj(), b.w()) else { continue };
        let zp = Point::from_zw(&z, w + C64::from_polar(0.3 * rw * (k % 3) as f64 / 2.0, 2.3 * t));
        if !m.u1().contains(&zp) || m.near_x(&zp) {
            continue;
        }
        if let (Ok((a, _)), Ok((c, _))) = (segre_step(m, f, &zp, cfg), segre_step(m, g, &zp, cfg)) {
            out.push((a, c));
        }
    }
    out
}

/// `sigma` from its action `tau = H^-T sigma^-* H^T` on Segre-step values,
/// `H` the target quadric.
fn from_adjoint(tau: &ProjectiveMap, q: &HermitianQuadric) -> Result<ProjectiveMap> {
    let ht = q.matrix().transpose();
    let ht_inv = ht.clone().try_inverse().ok_or_else(|| Error::Singular("target quadric".into()))?;
    let sigma_inv = (&ht * tau.matrix() * ht_inv).adjoint();
    let sigma = sigma_inv.try_inverse().ok_or_else(|| Error::Singular("reflected monodromy".into()))?;
    ProjectiveMap::new(sigma)
}

/// `sigma`, `A`, Jordan data and finite order of `germ` around `l`.
pub fn compute_monodromy(
    m: &Hypersurface,
    germ: &MapGerm,
    l: &LoopSpec,
    mode: ContinuationMode,
    opts: &StepOptions,
    cfg: &Config,
) -> Result<MonodromyResult> {
    if !m.nonminimal() {
        // Without X every loop is contractible in U1; still computed.
    }
    let f0 = at_loop_base(m, germ, l, mode, opts, cfg)?;
    let cont = continue_along_path(m, &f0, &ContinuationPath::Loop(l.clone()), mode, opts, cfg)?;
    let f1 = cont.germ;
    let (sigma, fit, pairs) = fit_sigma(m, &f0, &f1, cfg)?;
    let tol = jordan_tolerance(cfg, fit);
    let tc = normalized(&sigma, tol)?;
    let log = matrix_log_branch(&sigma, tol, &[])?;
    let exp_log = linalg::max_abs(&(exp_2pi_i(&log.a) - &tc));
    let jordan = scaled_jordan(&sigma, tol)?;
    let order = finite_order(&sigma, cfg.k_max, cfg.tol.scalar.max(10.0 * fit));
    let stepped = !cont.steps.is_empty();
    Ok(MonodromyResult {
        sigma,
        a: log.a,
        jordan,
        finite_order: order,
        residuals: Residuals {
            fit,
            exp_log,
            pairs,
            table_error: stepped.then(|| cont.steps.iter().map(|s| s.table_error).fold(0.0, f64::max)),
            hyperplane: stepped.then(|| cont.steps.iter().map(|s| s.hyperplane_residual).fold(0.0, f64::max)),
        },
    })
}

/// Outcome of the single-valuedness check of `G = w^{-A} F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaCheck {
    pub deviation: f64,
    /// Branch shifts (turns per eigenvalue cluster) of the logarithm used.
    pub shifts: Vec<i64>,
    /// `G` at the base point, canonical representative.
    #[serde(with = "crate::json::complex_vec")]
    pub g_base: Vec<C64>,
}

/// `G = w^{-A} F` before and after the loop, at points near the base; the
/// logarithm of `w` is the germ's tracked `Lw`. Alternative branches of `A`
/// (shifts in `{-1, 0, 1}` per cluster) are tried when the principal one
/// fails the tolerance.
pub fn verify_monodromy_formula(
    m: &Hypersurface,
    germ: &MapGerm,
    result: &MonodromyResult,
    l: &LoopSpec,
    mode: ContinuationMode,
    opts: &StepOptions,
    cfg: &Config,
) -> Result<FormulaCheck> {
    let f0 = at_loop_base(m, germ, l, mode, opts, cfg)?;
    let f1 = continue_along_path(m, &f0, &ContinuationPath::Loop(l.clone()), mode, opts, cfg)?.germ;
    let base = f0.base().clone();
    let lw0 = base.w().ln() + C64::new(0.0, TWO_PI * f0.winding().unwrap_or(0) as f64);
    let pts = sample_near(&base, min_domain(f0.radius(), f1.radius()), 12, 0.5);
    let vals = pts
        .iter()
        .map(|p| Ok((p.w(), f0.eval(m, p)?, f1.eval(m, p)?)))
        .collect::<Result<Vec<_>>>()?;
    let fit = result.residuals.fit;
    let tol = jordan_tolerance(cfg, fit);
    let k = matrix_log_branch(&result.sigma, tol, &[])?.clusters.len();
    let mut best: Option<FormulaCheck> = None;
    let combos = 3usize.pow(k.min(4) as u32);
    for code in 0..combos {
        // shift pattern 0, +1, -1 per cluster
        let shifts: Vec<i64> = (0..k)
            .map(|i| match (code / 3usize.pow(i as u32)) % 3 {
                0 => 0,
                1 => 1,
                _ => -1,
            })
            .collect();
        let a = matrix_log_branch(&result.sigma, tol, &shifts)?.a;
        let mut dev = 0.0f64;
        for (w, v0, v1) in &vals {
            let lw = lw0 + (w / base.w()).ln();
            let g0 = w_power(&a, -lw) * linalg_vec(v0);
            let turns = C64::new(0.0, TWO_PI * l.turns as f64);
            let g1 = w_power(&a, -(lw + turns)) * linalg_vec(v1);
            dev = dev.max(projective_distance(g0.as_slice(), g1.as_slice()));
        }
        let g = w_power(&a, -lw0) * linalg_vec(&vals_at_base(m, &f0)?);
        let check = FormulaCheck {
            deviation: dev,
            shifts,
            g_base: ProjectivePoint::new(g.iter().copied().collect())?.canonical().homog().to_vec(),
        };
        let better = best.as_ref().map_or(true, |b| check.deviation < b.deviation);
        if better {
            best = Some(check);
        }
        if best.as_ref().map_or(false, |b| b.deviation < 1e-8) {
            break;
        }
    }
    Ok(best.expect("at least one branch"))
}

fn linalg_vec(v: &[C64]) -> linalg::CVec {
    linalg::CVec::from_column_slice(v)
}

fn vals_at_base(m: &Hypersurface, f: &MapGerm) -> Result<Vec<C64>> {
    f.eval(m, f.base())
}

/// Result of the finite-order search and, when possible, the `k`-root check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCheck {
    pub order: u32,
    /// Whether the `k`-root surface has scalar monodromy; `None` when no
    /// exponential form or closed-form germ is available.
    pub root_scalar: Option<bool>,
}

/// `F~(z, u) = F(z, u^k)` as a closed-form germ on the `k`-root surface.
pub fn root_germ(m_root: &Hypersurface, spec: &GermSpec, k: u32) -> Result<MapGerm> {
    let kf = k as f64;
    let comps: Vec<AnalyticExpr> = spec
        .components
        .iter()
        .map(|e| {
            e.substitute(|v| match v {
                Var::W => Some(Node::bin(BinOp::Pow, Node::Var(Var::W), Node::Num(kf))),
                Var::Lw => Some(Node::bin(BinOp::Mul, Node::Num(kf), Node::Var(Var::Lw))),
                _ => None,
            })
        })
        .collect();
    let b = spec.base.w();
    let lw = b.ln() + C64::new(0.0, TWO_PI * spec.winding as f64);
    let u = (lw / kf).exp();
    let winding = ((lw / kf - u.ln()).im / TWO_PI).round() as i64;
    let base = Point::from_zw(spec.base.z(), u);
    MapGerm::from_spec(m_root, &GermSpec { components: comps, winding, base, target: spec.target.clone() })
}

/// Smallest `k <= k_max` with `sigma^k` scalar; with an exponential form and
/// a closed-form germ, also checks that the `k`-root surface has scalar
/// monodromy.
pub fn finite_order_and_root(
    m: &Hypersurface,
    result: &MonodromyResult,
    germ: Option<&GermSpec>,
    opts: &StepOptions,
    cfg: &Config,
) -> Result<Option<RootCheck>> {
    let fit = result.residuals.fit;
    let Some(k) = finite_order(&result.sigma, cfg.k_max, cfg.tol.scalar.max(10.0 * fit)) else {
        return Ok(None);
    };
    let root_scalar = match (m.exp_form(), germ) {
        (Some(_), Some(spec)) if k > 1 => {
            let root = m.k_root(k)?;
            let g = root_germ(&root, spec, k)?;
            let l = loop_through(g.base(), 1);
            let r = compute_monodromy(&root, &g, &l, ContinuationMode::BranchTracking, opts, cfg)?;
            Some(r.sigma.is_scalar(cfg.tol.scalar.max(10.0 * r.residuals.fit)))
        }
        (Some(_), Some(_)) => Some(true),
        _ => None,
    };
    Ok(Some(RootCheck { order: k, root_scalar }))
}

/// Quadric fits of the images of both sides of `M \ X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferResult {
    pub plus: (usize, usize),
    pub minus: (usize, usize),
    pub residual_plus: f64,
    pub residual_minus: f64,
    pub quadric_plus: HermitianQuadric,
    pub quadric_minus: HermitianQuadric,
    /// Projective distance of the two fitted quadric matrices.
    pub distance: f64,
}

/// Points of `M` in the polydisc of a germ, by projecting random points of
/// the polydisc onto `M` along `w`.
fn surface_points_near<R: Rng>(m: &Hypersurface, germ: &MapGerm, count: usize, rng: &mut R) -> Result<Vec<Point>> {
    let (b, r) = (germ.base().clone(), germ.radius());
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > 20 * count {
            return Err(Error::SamplingFailed { failed: tries - out.len(), attempted: tries });
        }
        let z: Vec<C64> = b.z().iter().map(|c| c + random_in_disc(rng, 0.6 * r.z)).collect();
        let p0 = Point::from_zw(&z, b.w() + random_in_disc(rng, 0.3 * r.w));
        let Ok(p) = m.project_to_surface(&p0) else { continue };
        let inside = p.z().iter().zip(b.z()).all(|(x, y)| (x - y).norm() < 0.8 * r.z) && (p.w() - b.w()).norm() < 0.8 * r.w;
        if inside && !m.near_x(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

fn fit_side<R: Rng>(m: &Hypersurface, germ: &MapGerm, cfg: &Config, rng: &mut R) -> Result<(HermitianQuadric, f64, (usize, usize))> {
    let n = m.n();
    let pts = surface_points_near(m, germ, 3 * (n + 1) * (n + 1), rng)?;
    let imgs = pts.iter().map(|p| germ.eval_point(m, p)).collect::<Result<Vec<_>>>()?;
    let (q, res, sig) = fit_quadric(&imgs)?;
    if res > cfg.tol.quadric_fit {
        return Err(Error::Residual { context: "image of M is not a quadric".into(), residual: res, tolerance: cfg.tol.quadric_fit });
    }
    Ok((q, res, sig))
}

/// Half-loop path from the germ base (on `M+`) to `minus`, keeping `|w|`
/// fixed while `Arg w` increases by `pi`, then straight to `minus`.
pub fn half_loop(base: &Point, minus: &Point) -> ContinuationPath {
    let r = base.w().norm();
    let a0 = base.w().arg();
    let mut pts: Vec<Point> = (1..=8)
        .map(|k| Point::from_zw(base.z(), C64::from_polar(r, a0 + PI * k as f64 / 8.0)))
        .collect();
    pts.push(minus.clone());
    ContinuationPath::Waypoints(pts)
}

/// Fits the quadric images of `M+` near the germ base and of `M-` near
/// `minus` after continuing the germ along a half loop.
pub fn sphericity_transfer(
    m: &Hypersurface,
    germ: &MapGerm,
    minus: &Point,
    mode: ContinuationMode,
    opts: &StepOptions,
    cfg: &Config,
) -> Result<TransferResult> {
    let mut rng = cfg.rng(0x7a);
    let (qp, rp, sp) = fit_side(m, germ, cfg, &mut rng)?;
    let g_minus = continue_along_path(m, germ, &half_loop(germ.base(), minus), mode, opts, cfg)?.germ;
    let (qm, rm, sm) = fit_side(m, &g_minus, cfg, &mut rng)?;
    Ok(TransferResult {
        plus: sp,
        minus: sm,
        residual_plus: rp,
        residual_minus: rm,
        distance: qp.distance(&qm),
        quadric_plus: qp,
        quadric_minus: qm,
    })
}

/// Germ values at `count` points approaching `X` along a ray from the base,
/// and the spread of the last five values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCheck {
    /// Projective distances between consecutive values.
    pub steps: Vec<f64>,
    /// Max pairwise distance among the last five values.
    pub final_spread: f64,
    /// Consecutive distances decrease over the last five samples.
    pub monotone: bool,
}

pub fn cluster_point_check(m: &Hypersurface, germ: &MapGerm, count: usize, cfg: &Config) -> Result<ClusterCheck> {
    let b = germ.base().clone();
    // Stay clear of the distance at which branch tracking refuses to move.
    let floor = 10.0 * m.degeneracy_threshold().max(1e-8) / b.w().norm();
    let q = floor.powf(1.0 / (count as f64 - 1.0));
    let mut vals = Vec::with_capacity(count);
    let opts = StepOptions::for_dim(m.n());
    for k in 0..count {
        let p = b.with_w(b.w() * q.powi(k as i32));
        let g = continue_along_path(m, germ, &ContinuationPath::Waypoints(vec![p.clone()]), ContinuationMode::BranchTracking, &opts, cfg)?.germ;
        vals.push(g.eval(m, &p)?);
    }
    let steps: Vec<f64> = vals.windows(2).map(|v| projective_distance(&v[0], &v[1])).collect();
    let tail = &vals[count.saturating_sub(5)..];
    let mut spread = 0.0f64;
    for i in 0..tail.len() {
        for j in i + 1..tail.len() {
            spread = spread.max(projective_distance(&tail[i], &tail[j]));
        }
    }
    let last = &steps[steps.len().saturating_sub(4)..];
    let monotone = last.windows(2).all(|w| w[1] <= w[0]);
    Ok(ClusterCheck { steps, final_spread: spread, monotone })
}

/// One run of the invariance suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceRun {
    pub label: String,
    pub jordan: JordanForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub runs: Vec<InvarianceRun>,
    /// Max entrywise difference between any two Jordan forms.
    pub jordan_spread: f64,
    /// `|sigma~ - tau sigma tau^-1|` (projective) per random `tau`.
    pub conjugation: Vec<f64>,
    /// Distance between the two-turn `sigma` and the one-turn `sigma` squared.
    pub group_law: f64,
}

/// A well-conditioned random projective map `I + 0.3 X`.
pub fn random_tau<R: Rng>(n: usize, rng: &mut R) -> ProjectiveMap {
    let t = CMat::from_fn(n + 1, n + 1, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        C64::new(d, 0.0) + random_in_disc(rng, 0.3)
    });
    ProjectiveMap::new(t).expect("near identity")
}

fn matrix_distance(a: &CMat, b: &CMat) -> f64 {
    let x: Vec<C64> = a.iter().copied().collect();
    let y: Vec<C64> = b.iter().copied().collect();
    projective_distance(&x, &y)
}

/// Jordan invariance over alternative base points and loop radii, the
/// conjugation law for `taus` random transformed germs, and the group law.
pub fn invariance_suite(
    m: &Hypersurface,
    germ: &MapGerm,
    alt_bases: &[Point],
    radii: &[f64],
    taus: usize,
    mode: ContinuationMode,
    opts: &StepOptions,
    cfg: &Config,
) -> Result<InvarianceReport> {
    let n = m.n();
    let base = germ.base().clone();
    let main_loop = loop_through(&base, 1);
    let reference = compute_monodromy(m, germ, &main_loop, mode, opts, cfg)?;
    let mut runs = vec![InvarianceRun { label: "reference".into(), jordan: reference.jordan.clone() }];
    for (i, b) in alt_bases.iter().enumerate() {
        let r = compute_monodromy(m, germ, &loop_through(b, 1), mode, opts, cfg)?;
        runs.push(InvarianceRun { label: format!("base {i}"), jordan: r.jordan });
    }
    for &rad in radii {
        let l = LoopSpec { z0: base.z().to_vec(), w_radius: rad, turns: 1, start_arg: base.w().arg() };
        let r = compute_monodromy(m, germ, &l, mode, opts, cfg)?;
        runs.push(InvarianceRun { label: format!("radius {rad}"), jordan: r.jordan });
    }
    let mut rng = cfg.rng(0x7a0);
    let mut conjugation = Vec::new();
    for i in 0..taus {
        let tau = random_tau(n, &mut rng);
        let g = germ.transformed(&tau)?;
        let r = compute_monodromy(m, &g, &main_loop, mode, opts, cfg)?;
        let expect = tau.matrix() * reference.sigma.matrix() * tau.inverse()?.matrix();
        conjugation.push(matrix_distance(r.sigma.matrix(), &expect));
        if i == 0 {
            runs.push(InvarianceRun { label: "transformed germ".into(), jordan: r.jordan });
        }
    }
    let two = compute_monodromy(m, germ, &loop_through(&base, 2), mode, opts, cfg)?;
    let sq = reference.sigma.pow(2);
    let group_law = matrix_distance(two.sigma.matrix(), sq.matrix());
    let mut spread = 0.0f64;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            spread = spread.max(runs[i].jordan.difference(&runs[j].jordan));
        }
    }
    Ok(InvarianceReport { runs, jordan_spread: spread, conjugation, group_law })
}

/// Whether a fitted `sigma` is scalar at the configured tolerance, widened by
/// the fit residual.
pub fn sigma_is_scalar(r: &MonodromyResult, cfg: &Config) -> bool {
    is_scalar(&r.sigma.canonical(), cfg.tol.scalar.max(10.0 * r.residuals.fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn mlog() -> (Hypersurface, GermSpec) {
        let m = Hypersurface::from_exp_form("mlog", 2, parse("2*z1*cz1").unwrap(), Domain::new(0.95, 2.0), Domain::new(1.0, 50.0)).unwrap();
        let spec = GermSpec {
            components: vec![parse("z1").unwrap(), parse("Lw").unwrap(), parse("1").unwrap()],
            winding: 0,
            base: Point::new(vec![c(0.0, 0.0), c(1.0, 0.0)]),
            target: HermitianQuadric::standard(1, 0).unwrap(),
        };
        (m, spec)
    }

    #[test]
    fn log_monodromy_is_unipotent() {
        let (m, spec) = mlog();
        let cfg = Config::default();
        let g = MapGerm::from_spec(&m, &spec).unwrap();
        let opts = StepOptions::for_dim(2);
        let l = loop_through(g.base(), 1);
        let r = compute_monodromy(&m, &g, &l, ContinuationMode::BranchTracking, &opts, &cfg).unwrap();
        let sizes: Vec<usize> = r.jordan.blocks.iter().map(|b| b.size).collect();
        assert_eq!(sizes, vec![1, 2]);
        assert!(r.finite_order.is_none());
        let mut e23 = CMat::zeros(3, 3);
        e23[(1, 2)] = c(1.0, 0.0);
        assert!(linalg::max_abs(&(&r.a - e23)) < 1e-8);
        let f = verify_monodromy_formula(&m, &g, &r, &l, ContinuationMode::BranchTracking, &opts, &cfg).unwrap();
        assert!(f.deviation < 1e-8);
    }

    #[test]
    fn log_transfer_lands_on_shifted_quadric() {
        let (m, spec) = mlog();
        let cfg = Config::default();
        let g = MapGerm::from_spec(&m, &spec).unwrap();
        let minus = Point::new(vec![c(0.0, 0.0), c(-1.0, 0.0)]);
        let t = sphericity_transfer(&m, &g, &minus, ContinuationMode::BranchTracking, &StepOptions::for_dim(2), &cfg).unwrap();
        assert_eq!((t.plus, t.minus), ((1, 0), (1, 0)));
        assert!(t.quadric_minus.distance(&HermitianQuadric::standard_shifted(1, 0, PI).unwrap()) < 1e-8);
        assert!(t.distance > 1e-2);
    }
}
