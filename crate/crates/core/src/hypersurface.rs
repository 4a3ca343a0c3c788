//! Nonminimal real hypersurfaces `M = {rho(Z, conj Z) = 0}` containing
//! `X = {w = 0}`, with their Segre varieties `Q_zeta = {rho(Z, conj zeta) = 0}`.

use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{AnalyticExpr, Assignment, BinOp, Func, Jet, Node, Var};
use crate::linalg::{self, CMat};

const NEWTON_MAX_ITER: usize = 50;
const CACHE_LEN: usize = 32;

/// A point `(z_1, .., z_{n-1}, w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    #[serde(with = "crate::json::complex_vec")]
    coords: Vec<C64>,
}

impl Point {
    pub fn new(coords: Vec<C64>) -> Self {
        Point { coords }
    }

    pub fn from_zw(z: &[C64], w: C64) -> Self {
        let mut coords = z.to_vec();
        coords.push(w);
        Point { coords }
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[C64] {
        &self.coords
    }

    pub fn z(&self) -> &[C64] {
        &self.coords[..self.coords.len() - 1]
    }

    pub fn w(&self) -> C64 {
        self.coords[self.coords.len() - 1]
    }

    pub fn with_w(&self, w: C64) -> Point {
        Point::from_zw(self.z(), w)
    }

    /// Componentwise conjugate, i.e. the antiholomorphic arguments `conj(P)`.
    pub fn conj(&self) -> Vec<C64> {
        self.coords.iter().map(|c| c.conj()).collect()
    }

    /// Max-norm distance.
    pub fn dist(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}

/// Polydisc `{|z_j| < z, |w| < w}` centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub z: f64,
    pub w: f64,
}

impl Domain {
    pub fn new(z: f64, w: f64) -> Self {
        Domain { z, w }
    }

    pub fn ball(r: f64) -> Self {
        Domain { z: r, w: r }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.z().iter().all(|c| c.norm() < self.z) && p.w().norm() < self.w
    }

    pub fn contains_z(&self, z: &[C64]) -> bool {
        z.iter().all(|c| c.norm() < self.z)
    }
}

impl Serialize for Domain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.z == self.w {
            s.serialize_f64(self.z)
        } else {
            [self.z, self.w].serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Domain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(f64),
            Two([f64; 2]),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::One(r) => Domain::ball(r),
            Raw::Two([z, w]) => Domain::new(z, w),
        })
    }
}

/// Which component of `M \ X` to work on: `Plus` near `Arg w = 0`, `Minus`
/// near `Arg w = pi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn angle(self) -> f64 {
        match self {
            Side::Plus => 0.0,
            Side::Minus => PI,
        }
    }
}

/// Uniform sample of the disc of radius `r`.
pub fn random_in_disc<R: Rng>(rng: &mut R, r: f64) -> C64 {
    let rho = r * rng.gen::<f64>().sqrt();
    C64::from_polar(rho, rng.gen_range(-PI..PI))
}

/// Levi form eigenvalues at a point of `M \ X`, after orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeviForm {
    pub eigenvalues: Vec<f64>,
    pub positive: usize,
    pub negative: usize,
}

/// On-disk surface description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub name: String,
    pub n: usize,
    pub defining: AnalyticExpr,
    #[serde(default)]
    pub phi: Option<AnalyticExpr>,
    pub u1: Domain,
    pub u2: Domain,
}

#[derive(Debug, Clone)]
pub struct Hypersurface {
    name: String,
    n: usize,
    defining: AnalyticExpr,
    exp_form: Option<AnalyticExpr>,
    u1: Domain,
    u2: Domain,
    nonminimal: bool,
}

impl Hypersurface {
    /// Builds a surface; checks variable indices and whether `X` lies in `M`.
    pub fn new(
        name: impl Into<String>,
        n: usize,
        defining: AnalyticExpr,
        exp_form: Option<AnalyticExpr>,
        u1: Domain,
        u2: Domain,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSurface(format!("dimension {n} < 2")));
        }
        if !(u1.z > 0.0 && u1.w > 0.0 && u2.z >= u1.z && u2.w >= u1.w) {
            return Err(Error::InvalidSurface("need 0 < U1 <= U2".into()));
        }
        defining.check_dimension(n)?;
        if defining.variables().contains(&Var::Lw) {
            return Err(Error::InvalidSurface("defining equation may not use Lw".into()));
        }
        if let Some(phi) = &exp_form {
            phi.check_dimension(n)?;
            if phi.variables().iter().any(|v| matches!(v, Var::W | Var::Lw)) {
                return Err(Error::InvalidSurface("phi depends on z, cz, cw only".into()));
            }
        }
        let mut s = Hypersurface {
            name: name.into(),
            n,
            defining,
            exp_form,
            u1,
            u2,
            nonminimal: false,
        };
        let mut rng = crate::config::Config::default().rng(0xd0);
        s.nonminimal = s.x_residual(&mut rng, 100) < 1e-10;
        Ok(s)
    }

    /// Surface `w = cw * exp(i * phi(z, cz, cw))`.
    pub fn from_exp_form(name: impl Into<String>, n: usize, phi: AnalyticExpr, u1: Domain, u2: Domain) -> Result<Self> {
        let rho = Node::bin(
            BinOp::Sub,
            Node::Var(Var::W),
            Node::bin(
                BinOp::Mul,
                Node::Var(Var::Cw),
                Node::call(Func::Exp, Node::bin(BinOp::Mul, Node::I, phi.root().clone())),
            ),
        );
        Hypersurface::new(name, n, AnalyticExpr::new(rho), Some(phi), u1, u2)
    }

    pub fn from_file(f: SurfaceFile) -> Result<Self> {
        Hypersurface::new(f.name, f.n, f.defining, f.phi, f.u1, f.u2)
    }

    pub fn to_file(&self) -> SurfaceFile {
        SurfaceFile {
            name: self.name.clone(),
            n: self.n,
            defining: self.defining.clone(),
            phi: self.exp_form.clone(),
            u1: self.u1,
            u2: self.u2,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Hypersurface::from_file(serde_json::from_str(text)?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn defining(&self) -> &AnalyticExpr {
        &self.defining
    }

    pub fn exp_form(&self) -> Option<&AnalyticExpr> {
        self.exp_form.as_ref()
    }

    pub fn u1(&self) -> Domain {
        self.u1
    }

    pub fn u2(&self) -> Domain {
        self.u2
    }

    /// Whether `X = {w = 0}` was found to lie in `M`.
    pub fn nonminimal(&self) -> bool {
        self.nonminimal
    }

    /// Points with `|w|` below this are treated as lying on `X`.
    pub fn degeneracy_threshold(&self) -> f64 {
        1e-10 * self.u1.w
    }

    pub fn near_x(&self, p: &Point) -> bool {
        self.nonminimal && p.w().norm() < self.degeneracy_threshold()
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.n() != self.n {
            return Err(Error::Precondition(format!("point has {} coordinates, expected {}", p.n(), self.n)));
        }
        if !p.is_finite() {
            return Err(Error::Precondition("non-finite point".into()));
        }
        Ok(())
    }

    fn check_in_u1(&self, p: &Point) -> Result<()> {
        self.check_point(p)?;
        if !self.u1.contains(p) {
            return Err(Error::OutsideDomain(format!("{:?} not in U1", p.coords())));
        }
        Ok(())
    }

    /// Complexified defining function `rho(hol, anti)`.
    pub fn rho(&self, hol: &[C64], anti: &[C64]) -> Result<C64> {
        self.defining.eval(&Assignment::new(hol, anti))
    }

    pub fn rho_jet(&self, hol: &[C64], anti: &[C64], order: u8) -> Result<Jet> {
        self.defining.eval_jet(&Assignment::new(hol, anti), order)
    }

    /// `rho(P, conj P)`.
    pub fn rho_at(&self, p: &Point) -> Result<C64> {
        self.rho(p.coords(), &p.conj())
    }

    /// Solves `rho(z, w, anti) = 0` for `w` by Newton from `seed`.
    pub fn solve_graph(&self, z: &[C64], anti: &[C64], seed: C64) -> Result<C64> {
        let n = self.n;
        let mut hol = z.to_vec();
        hol.push(seed);
        for _ in 0..NEWTON_MAX_ITER {
            let jet = self.rho_jet(&hol, anti, 1)?;
            let d = jet.partials[n - 1];
            if d.norm() == 0.0 {
                return Err(Error::Singular(format!("d rho/dw = 0 at z = {z:?}")));
            }
            let step = jet.value / d;
            hol[n - 1] -= step;
            if !hol[n - 1].is_finite() {
                break;
            }
            if step.norm() <= 1e-13 * hol[n - 1].norm().max(1.0) {
                return Ok(hol[n - 1]);
            }
        }
        Err(Error::NoConvergence { at: format!("Segre graph at z = {z:?}") })
    }

    /// The Segre variety of `zeta`; `zeta` must lie in `U1`.
    pub fn segre_variety(&self, zeta: &Point) -> Result<SegreVariety<'_>> {
        self.check_in_u1(zeta)?;
        Ok(self.segre_variety_unchecked(zeta))
    }

    /// As [`segre_variety`](Self::segre_variety) without the domain check;
    /// used internally for points on the boundary of `U1`.
    pub fn segre_variety_unchecked(&self, zeta: &Point) -> SegreVariety<'_> {
        SegreVariety {
            surface: self,
            anti: zeta.conj(),
            degenerate: self.near_x(zeta),
            base: zeta.clone(),
            cache: Mutex::new(Vec::new()),
        }
    }

    /// `|rho(P, conj P)| < tol`.
    pub fn on_surface(&self, p: &Point, tol: f64) -> bool {
        self.check_point(p).is_ok() && self.rho_at(p).map(|r| r.norm() < tol).unwrap_or(false)
    }

    /// Gradient normalization `c` with `rho = c * r`, `r` real, `|dr| = 1` and
    /// `Im(dr/dw) > 0`, evaluated from a first-order jet at `(P, conj P)`.
    fn orientation(&self, jet: &Jet) -> Result<C64> {
        let n = self.n;
        let s: C64 = (0..n).map(|a| jet.partials[a] * jet.partials[n + a]).sum();
        if s.norm() == 0.0 {
            return Err(Error::Singular("vanishing gradient of rho".into()));
        }
        let mut c0 = s.sqrt();
        let rw = jet.partials[n - 1] / c0;
        let flip = if rw.im.abs() > 1e-12 * rw.norm() {
            rw.im < 0.0
        } else {
            // dr/dw real: fall back to the sign of its real part.
            rw.re < 0.0
        };
        if flip {
            c0 = -c0;
        }
        Ok(c0)
    }

    /// Oriented Levi form eigenvalues at `p` on `M \ X`.
    pub fn levi_form(&self, p: &Point) -> Result<LeviForm> {
        self.check_point(p)?;
        if self.near_x(p) {
            return Err(Error::NearExceptional(p.w().norm()));
        }
        let n = self.n;
        let anti = p.conj();
        let jet = self.rho_jet(p.coords(), &anti, 2)?;
        let grad_norm = jet.partials[..n].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if jet.value.norm() > 1e-8 * grad_norm.max(1e-300) {
            return Err(Error::Precondition(format!(
                "point not on surface: |rho| = {:.3e}",
                jet.value.norm()
            )));
        }
        let c0 = self.orientation(&jet)?;
        let h = jet.second.as_ref().expect("order-2 jet");
        let kernel = linalg::functional_kernel(&jet.partials[..n]);
        let m = kernel.ncols();
        let mut r = CMat::zeros(m, m);
        for k in 0..m {
            for l in 0..m {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        acc += h[a * 2 * n + n + b] * kernel[(a, k)] * kernel[(b, l)].conj();
                    }
                }
                r[(k, l)] = acc / c0;
            }
        }
        let (eigenvalues, _) = linalg::hermitian_eigen(&r);
        let positive = eigenvalues.iter().filter(|&&e| e > 0.0).count();
        Ok(LeviForm {
            negative: eigenvalues.len() - positive,
            positive,
            eigenvalues,
        })
    }

    /// Signature `(k, l)` of the oriented Levi form.
    pub fn levi_signature(&self, p: &Point, tol: f64) -> Result<(usize, usize)> {
        let form = self.levi_form(p)?;
        let smallest = form.eigenvalues.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
        if smallest < tol {
            return Err(Error::DegenerateLevi(smallest));
        }
        // the sign of rho is a convention; report (k, l) with k >= l
        Ok((form.positive.max(form.negative), form.positive.min(form.negative)))
    }

    /// Taylor data of the Segre graph `z -> h(z, anti)` at `z0` up to degree
    /// `d <= 2`: `[h, dh/dz_i, d2h/dz_i dz_j (i <= j)]`.
    pub fn segre_coefficients(&self, anti: &[C64], z0: &[C64], seed: C64, d: usize) -> Result<Vec<C64>> {
        if d > 2 {
            return Err(Error::Precondition(format!("jet degree {d} > 2 not supported")));
        }
        let n = self.n;
        let m = n - 1;
        let w0 = self.solve_graph(z0, anti, seed)?;
        let mut out = vec![w0];
        if d == 0 {
            return Ok(out);
        }
        let mut hol = z0.to_vec();
        hol.push(w0);
        let jet = self.rho_jet(&hol, anti, d as u8)?;
        let rw = jet.partials[n - 1];
        let h1: Vec<C64> = (0..m).map(|i| -jet.partials[i] / rw).collect();
        out.extend_from_slice(&h1);
        if d == 2 {
            let s = jet.second.as_ref().expect("order-2 jet");
            let at = |a: usize, b: usize| s[a * 2 * n + b];
            let w = n - 1;
            for i in 0..m {
                for j in i..m {
                    let v = at(i, j) + at(i, w) * h1[j] + at(j, w) * h1[i] + at(w, w) * h1[i] * h1[j];
                    out.push(-v / rw);
                }
            }
        }
        Ok(out)
    }

    /// Rank of the Segre map `Z -> (jet of Q_Z at P_z)` at `p`.
    pub fn segre_map_rank(&self, p: &Point, d: usize, rel: f64) -> Result<usize> {
        self.check_in_u1(p)?;
        if self.near_x(p) {
            return Err(Error::NearExceptional(p.w().norm()));
        }
        let anti0 = p.conj();
        let base = self.segre_coefficients(&anti0, p.z(), p.w(), d)?;
        let mut jac = CMat::zeros(base.len(), self.n);
        for k in 0..self.n {
            let h = 1e-6 * anti0[k].norm().max(1e-3);
            let mut plus = anti0.clone();
            let mut minus = anti0.clone();
            plus[k] += h;
            minus[k] -= h;
            let fp = self.segre_coefficients(&plus, p.z(), base[0], d)?;
            let fm = self.segre_coefficients(&minus, p.z(), base[0], d)?;
            for r in 0..base.len() {
                jac[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        Ok(linalg::rank(&jac, rel))
    }

    /// The `k`-root `w = cw * exp((i/k) phi(z, cz, cw^k))`, validated on 100
    /// sampled points through `nu(z, w) = (z, w^k)`.
    pub fn k_root(&self, k: u32) -> Result<Hypersurface> {
        let phi = self
            .exp_form
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("{} has no exponential form", self.name)))?;
        if k == 0 {
            return Err(Error::Precondition("k must be positive".into()));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let kf = k as f64;
        let substituted = phi.substitute(|v| {
            (v == Var::Cw).then(|| Node::bin(BinOp::Pow, Node::Var(Var::Cw), Node::Num(kf)))
        });
        let root_phi = AnalyticExpr::new(Node::bin(BinOp::Div, substituted.root().clone(), Node::Num(kf)));
        let dom = |d: Domain| Domain::new(d.z, d.w.powf(1.0 / kf));
        let root = Hypersurface::from_exp_form(
            format!("{}-root{k}", self.name),
            self.n,
            root_phi,
            dom(self.u1),
            dom(self.u2),
        )?;
        let mut rng = crate::config::Config::default().rng(0xd1 + k as u64);
        let mut worst = 0.0f64;
        for i in 0..100 {
            let side = if i % 2 == 0 { Side::Plus } else { Side::Minus };
            let p = root.sample_surface_point(&mut rng, side)?;
            let mut image = p.coords().to_vec();
            image[self.n - 1] = p.w().powu(k);
            worst = worst.max(self.rho_at(&Point::new(image))?.norm());
        }
        if worst > 1e-10 {
            return Err(Error::Residual {
                context: format!("{k}-root pullback"),
                residual: worst,
                tolerance: 1e-10,
            });
        }
        Ok(root)
    }

    /// Moves `p0` onto `M` along a single real direction in `w`.
    pub fn project_to_surface(&self, p0: &Point) -> Result<Point> {
        self.check_point(p0)?;
        let n = self.n;
        let mut p = p0.clone();
        for _ in 0..60 {
            let jet = self.rho_jet(p.coords(), &p.conj(), 1)?;
            if jet.value.norm() < 1e-15 * p.w().norm().max(1e-3) {
                return Ok(p);
            }
            let (rw, rcw) = (jet.partials[n - 1], jet.partials[2 * n - 1]);
            // Direction u maximizing |rw u + rcw conj(u)|.
            let mut best = (0.0, C64::new(1.0, 0.0), C64::new(0.0, 0.0));
            for k in 0..32 {
                let u = C64::from_polar(1.0, PI * k as f64 / 32.0);
                let dd = rw * u + rcw * u.conj();
                if dd.norm() > best.0 {
                    best = (dd.norm(), u, dd);
                }
            }
            let (_, u, dd) = best;
            if dd.norm() == 0.0 {
                return Err(Error::Singular("rho has no w-gradient".into()));
            }
            let t = -(dd.conj() * jet.value).re / dd.norm_sqr();
            p = p.with_w(p.w() + t * u);
        }
        let r = self.rho_at(&p)?.norm();
        if r < 1e-12 {
            return Ok(p);
        }
        Err(Error::NoConvergence { at: format!("surface projection from {:?}", p0.coords()) })
    }

    /// A random point of `M` on the given side, with `|z_j| < 0.7 U1.z` and
    /// `0.2 U1.w < |w| < 0.8 U1.w` before projection.
    pub fn sample_surface_point<R: Rng>(&self, rng: &mut R, side: Side) -> Result<Point> {
        for _ in 0..20 {
            let z: Vec<C64> = (0..self.n - 1).map(|_| random_in_disc(rng, 0.7 * self.u1.z)).collect();
            let r = self.u1.w * rng.gen_range(0.2..0.8);
            let p0 = Point::from_zw(&z, C64::from_polar(r, side.angle()));
            if let Ok(p) = self.project_to_surface(&p0) {
                if self.u1.contains(&p) && !self.near_x(&p) {
                    return Ok(p);
                }
            }
        }
        Err(Error::SamplingFailed { failed: 20, attempted: 20 })
    }

    /// Max `|rho(z, 0, cz, 0)|` over random `z` in `U1`.
    pub fn x_residual<R: Rng>(&self, rng: &mut R, count: usize) -> f64 {
        let zero = C64::new(0.0, 0.0);
        let mut worst = 0.0f64;
        for _ in 0..count {
            let z: Vec<C64> = (0..self.n - 1).map(|_| random_in_disc(rng, self.u1.z)).collect();
            let mut hol = z.clone();
            hol.push(zero);
            let mut anti: Vec<C64> = z.iter().map(|c| c.conj()).collect();
            anti.push(zero);
            match self.rho(&hol, &anti) {
                Ok(v) => worst = worst.max(v.norm()),
                Err(_) => return f64::INFINITY,
            }
        }
        worst
    }

    /// Segre symmetry: for random `zeta` and `z`, with `Z = (z, h(z, conj zeta))`,
    /// returns the max `|rho(zeta, conj Z)|`.
    pub fn segre_symmetry_residual<R: Rng>(&self, rng: &mut R, count: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        let mut done = 0;
        let mut tries = 0;
        while done < count {
            tries += 1;
            if tries > 4 * count {
                return Err(Error::SamplingFailed { failed: tries - done, attempted: tries });
            }
            let zeta = self.random_point(rng, 0.7);
            let q = self.segre_variety_unchecked(&zeta);
            let z: Vec<C64> = (0..self.n - 1).map(|_| random_in_disc(rng, 0.7 * self.u1.z)).collect();
            let Ok(big) = q.point(&z) else { continue };
            if !self.u2.contains(&big) || self.near_x(&big) {
                continue;
            }
            worst = worst.max(self.rho(zeta.coords(), &big.conj())?.norm());
            done += 1;
        }
        Ok(worst)
    }

    /// Reality residual: the bar-conjugate of `rho` vanishes on sampled
    /// surface points, Segre symmetry holds, and, when an exponential form is
    /// present, `phi(z, cz, w exp(-i phibar)) = phibar` at complexified points.
    pub fn reality_residual<R: Rng>(&self, rng: &mut R, count: usize) -> Result<f64> {
        let bar = self.defining.conjugate();
        let mut worst = 0.0f64;
        for i in 0..count {
            let side = if i % 2 == 0 { Side::Plus } else { Side::Minus };
            let p = self.sample_surface_point(rng, side)?;
            worst = worst.max(bar.eval(&Assignment::real_point(p.coords()))?.norm());
        }
        worst = worst.max(self.segre_symmetry_residual(rng, count)?);
        if let Some(phi) = &self.exp_form {
            let phibar = phi.conjugate();
            let n = self.n;
            for _ in 0..count {
                let z: Vec<C64> = (0..n - 1).map(|_| random_in_disc(rng, 0.5 * self.u1.z)).collect();
                let cz: Vec<C64> = (0..n - 1).map(|_| random_in_disc(rng, 0.5 * self.u1.z)).collect();
                let w = C64::from_polar(self.u1.w * rng.gen_range(0.2..0.8), rng.gen_range(-PI..PI));
                let zero = C64::new(0.0, 0.0);
                let mut hol = z.clone();
                hol.push(w);
                let mut anti = cz.clone();
                anti.push(zero);
                let rhs = phibar.eval(&Assignment::new(&hol, &anti))?;
                let mut hol2 = z.clone();
                hol2.push(zero);
                let mut anti2 = cz;
                anti2.push(w * (-C64::i() * rhs).exp());
                let lhs = phi.eval(&Assignment::new(&hol2, &anti2))?;
                let d = lhs - rhs;
                let k = (d.re / (2.0 * PI)).round();
                worst = worst.max((d - 2.0 * PI * k).norm());
            }
        }
        Ok(worst)
    }

    /// A uniform random point of the polydisc `frac * U1` off `X`.
    pub fn random_point<R: Rng>(&self, rng: &mut R, frac: f64) -> Point {
        loop {
            let z: Vec<C64> = (0..self.n - 1).map(|_| random_in_disc(rng, frac * self.u1.z)).collect();
            let w = random_in_disc(rng, frac * self.u1.w);
            if w.norm() > 0.05 * self.u1.w {
                return Point::from_zw(&z, w);
            }
        }
    }
}

/// `Q_zeta` as the graph `w = h(z, conj zeta)`, memoizing solved pairs.
#[derive(Debug)]
pub struct SegreVariety<'a> {
    surface: &'a Hypersurface,
    base: Point,
    anti: Vec<C64>,
    degenerate: bool,
    cache: Mutex<Vec<(Vec<C64>, C64)>>,
}

impl<'a> SegreVariety<'a> {
    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn anti(&self) -> &[C64] {
        &self.anti
    }

    /// `zeta` on `X`: the variety is `X` itself.
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn surface(&self) -> &'a Hypersurface {
        self.surface
    }

    /// `w = h(z, conj zeta)`, path-following from the nearest solved point.
    pub fn graph(&self, z: &[C64]) -> Result<C64> {
        if self.degenerate {
            return Ok(C64::new(0.0, 0.0));
        }
        let s = self.surface;
        if z.len() != s.n - 1 {
            return Err(Error::Precondition("wrong number of z coordinates".into()));
        }
        if !s.u2.contains_z(z) {
            return Err(Error::OutsideDomain(format!("z = {z:?} outside U2")));
        }
        let start = {
            let cache = self.cache.lock().expect("cache poisoned");
            cache
                .iter()
                .min_by(|a, b| zdist(&a.0, z).total_cmp(&zdist(&b.0, z)))
                .cloned()
        };
        let (z0, w0) = match start {
            Some(entry) => entry,
            None => {
                let w = s.solve_graph(self.base.z(), &self.anti, self.base.w())?;
                let entry = (self.base.z().to_vec(), w);
                self.remember(entry.clone());
                entry
            }
        };
        let w = if zdist(&z0, z) == 0.0 { w0 } else { self.follow(&z0, w0, z)? };
        self.remember((z.to_vec(), w));
        Ok(w)
    }

    /// The point `(z, h(z))` of the variety.
    pub fn point(&self, z: &[C64]) -> Result<Point> {
        Ok(Point::from_zw(z, self.graph(z)?))
    }

    /// `|rho(P, conj zeta)| < tol`.
    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.surface.rho(p.coords(), &self.anti).map(|r| r.norm() < tol).unwrap_or(false)
    }

    fn remember(&self, entry: (Vec<C64>, C64)) {
        let mut cache = self.cache.lock().expect("cache poisoned");
        if cache.len() >= CACHE_LEN {
            cache.remove(0);
        }
        cache.push(entry);
    }

    /// Predictor-corrector continuation of the graph along the segment
    /// `z0 -> z1`, keeping each predicted `|dw|` below `0.1 * U2.w`.
    fn follow(&self, z0: &[C64], w0: C64, z1: &[C64]) -> Result<C64> {
        let s = self.surface;
        let n = s.n;
        let dw_max = 0.1 * s.u2.w;
        let dz_max = 0.25 * s.u2.z;
        let mut t = 0.0f64;
        let mut w = w0;
        let at = |t: f64| -> Vec<C64> { z0.iter().zip(z1).map(|(a, b)| a + (b - a) * t).collect() };
        let mut frac = 1.0f64;
        while t < 1.0 {
            let z = at(t);
            let mut hol = z.clone();
            hol.push(w);
            let jet = s.rho_jet(&hol, &self.anti, 1)?;
            let rw = jet.partials[n - 1];
            let dz: Vec<C64> = z0.iter().zip(z1).map(|(a, b)| b - a).collect();
            let slope: C64 = (0..n - 1).map(|j| -jet.partials[j] / rw * dz[j]).sum();
            let dz_norm = zdist(z0, z1);
            let mut h = (1.0 - t).min(frac);
            if slope.norm() * h > dw_max {
                h = dw_max / slope.norm();
            }
            if dz_norm * h > dz_max {
                h = dz_max / dz_norm;
            }
            loop {
                let zt = at(t + h);
                let pred = w + slope * h;
                match s.solve_graph(&zt, &self.anti, pred) {
                    Ok(wn) if (wn - pred).norm() <= dw_max => {
                        w = wn;
                        t += h;
                        if 1.0 - t < 1e-15 {
                            t = 1.0;
                        }
                        frac = (2.0 * h).min(1.0);
                        break;
                    }
                    _ => {
                        h *= 0.5;
                        if h < 1e-8 {
                            return Err(Error::NoConvergence { at: format!("Segre graph path to z = {z1:?}") });
                        }
                    }
                }
            }
        }
        Ok(w)
    }
}

fn zdist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::expr::parse;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn mlog() -> Hypersurface {
        Hypersurface::from_exp_form(
            "mlog",
            2,
            parse("2*z1*cz1").unwrap(),
            Domain::new(0.95, 2.0),
            Domain::new(1.0, 50.0),
        )
        .unwrap()
    }

    fn sphere3() -> Hypersurface {
        Hypersurface::new(
            "quadric",
            3,
            parse("(w - cw)/(2*i) - z1*cz1 - z2*cz2").unwrap(),
            None,
            Domain::ball(1.0),
            Domain::ball(2.0),
        )
        .unwrap()
    }

    #[test]
    fn mlog_segre_variety_of_base_point_is_level_set() {
        let m = mlog();
        let q = m.segre_variety(&Point::new(vec![c(0.0, 0.0), c(1.0, 0.0)])).unwrap();
        for z in [c(0.3, 0.1), c(-0.5, 0.4), c(0.0, -0.9)] {
            assert!((q.graph(&[z]).unwrap() - 1.0).norm() < 1e-14);
        }
    }

    #[test]
    fn mlog_segre_graph_matches_closed_form() {
        let m = mlog();
        let mut rng = Config::default().rng(1);
        for _ in 0..5 {
            let zeta = m.random_point(&mut rng, 0.9);
            let q = m.segre_variety(&zeta).unwrap();
            for _ in 0..20 {
                let z = random_in_disc(&mut rng, 0.9);
                let want = zeta.w().conj() * (2.0 * C64::i() * z * zeta.z()[0].conj()).exp();
                let got = q.graph(&[z]).unwrap();
                assert!((got - want).norm() < 1e-12 * want.norm().max(1.0), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn segre_variety_of_x_point_is_degenerate() {
        let m = mlog();
        let q = m.segre_variety(&Point::new(vec![c(0.2, 0.1), c(0.0, 0.0)])).unwrap();
        assert!(q.degenerate());
        assert_eq!(q.graph(&[c(0.5, 0.0)]).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn segre_variety_requires_u1() {
        let m = mlog();
        assert!(matches!(
            m.segre_variety(&Point::new(vec![c(0.0, 0.0), c(3.0, 0.0)])),
            Err(Error::OutsideDomain(_))
        ));
    }

    #[test]
    fn membership_examples() {
        let m = mlog();
        assert!(m.on_surface(&Point::new(vec![c(0.3, 0.0), C64::from_polar(1.0, 0.09)]), 1e-12));
        assert!(m.on_surface(&Point::new(vec![c(0.4, 0.2), c(0.0, 0.0)]), 1e-12));
        assert!(!m.on_surface(&Point::new(vec![c(0.0, 0.0), c(1.0, 1.0)]), 1e-4));
        let r = m.rho_at(&Point::new(vec![c(0.0, 0.0), c(1.0, 1.0)])).unwrap();
        assert!((r - c(0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn projection_and_own_segre_variety() {
        let m = mlog();
        let mut rng = Config::default().rng(2);
        for i in 0..100 {
            let side = if i % 2 == 0 { Side::Plus } else { Side::Minus };
            let p = m.sample_surface_point(&mut rng, side).unwrap();
            assert!(m.on_surface(&p, 1e-10));
            assert!(m.segre_variety(&p).unwrap().contains(&p, 1e-10));
            let off = p.with_w(p.w() * c(1.0, 0.3));
            assert!(m.rho_at(&off).unwrap().norm() > 1e-4);
        }
    }

    #[test]
    fn x_lies_in_catalog_like_surfaces() {
        assert!(mlog().nonminimal());
        assert!(!sphere3().nonminimal());
    }

    #[test]
    fn levi_quadric_and_orientation() {
        let q = sphere3();
        let p = Point::new(vec![c(0.1, 0.2), c(-0.3, 0.0), c(0.5, 0.1 * 0.1 + 0.2 * 0.2 + 0.3 * 0.3)]);
        assert!(q.on_surface(&p, 1e-14));
        assert_eq!(q.levi_signature(&p, 1e-8).unwrap(), (2, 0));
        // Rescaling by positive constants leaves the orientation unchanged;
        // reversing the sign of the form (k,l) <-> (l,k).
        let scaled = Hypersurface::new(
            "scaled",
            3,
            parse("3*((w - cw)/(2*i) - z1*cz1 - z2*cz2)").unwrap(),
            None,
            Domain::ball(1.0),
            Domain::ball(2.0),
        )
        .unwrap();
        assert_eq!(scaled.levi_signature(&p, 1e-8).unwrap(), (2, 0));
        let flipped = Hypersurface::new(
            "flipped",
            3,
            parse("(w - cw)/(2*i) + z1*cz1 - z2*cz2").unwrap(),
            None,
            Domain::ball(1.0),
            Domain::ball(2.0),
        )
        .unwrap();
        let p2 = Point::new(vec![c(0.1, 0.2), c(-0.3, 0.0), c(0.5, -(0.05) + 0.09)]);
        assert_eq!(flipped.levi_signature(&p2, 1e-8).unwrap(), (1, 1));
    }

    #[test]
    fn levi_mlog_plus_side() {
        let m = mlog();
        let p = m.project_to_surface(&Point::new(vec![c(0.3, 0.0), c(1.0, 0.0)])).unwrap();
        assert!(p.w().re > 0.0);
        assert_eq!(m.levi_signature(&p, 1e-8).unwrap(), (1, 0));
        assert!(matches!(
            m.levi_form(&Point::new(vec![c(0.3, 0.0), c(0.0, 0.0)])),
            Err(Error::NearExceptional(_))
        ));
    }

    #[test]
    fn segre_rank_examples() {
        let m = mlog();
        assert_eq!(m.segre_map_rank(&Point::new(vec![c(0.1, 0.0), c(0.5, 0.0)]), 2, 1e-8).unwrap(), 2);
        assert!(matches!(
            m.segre_map_rank(&Point::new(vec![c(0.1, 0.0), c(1e-14, 0.0)]), 2, 1e-8),
            Err(Error::NearExceptional(_))
        ));
        let q = sphere3();
        assert_eq!(q.segre_map_rank(&Point::new(vec![c(0.1, 0.0), c(0.0, 0.2), c(0.3, 0.1)]), 2, 1e-8).unwrap(), 3);
    }

    #[test]
    fn segre_symmetry_and_reality() {
        let m = mlog();
        let mut rng = Config::default().rng(3);
        assert!(m.segre_symmetry_residual(&mut rng, 200).unwrap() < 1e-10);
        assert!(m.reality_residual(&mut rng, 100).unwrap() < 1e-10);
    }

    #[test]
    fn k_root_of_mlog() {
        let m = mlog();
        let r = m.k_root(2).unwrap();
        assert_eq!(r.exp_form().unwrap().to_string(), "(((2.0 * z1) * cz1) / 2.0)");
        assert_eq!(m.k_root(1).unwrap().defining(), m.defining());
        let plain = Hypersurface::new("plain", 2, parse("w - cw").unwrap(), None, Domain::ball(1.0), Domain::ball(1.0)).unwrap();
        assert!(matches!(plain.k_root(2), Err(Error::Precondition(_))));
    }

    #[test]
    fn surface_file_round_trip() {
        let json = r#"{"name":"t","n":2,"defining":"w - cw*exp(2*i*z1*cz1)","phi":null,"u1":0.9,"u2":[1.0,3.0]}"#;
        let s = Hypersurface::from_json(json).unwrap();
        assert_eq!(s.u1(), Domain::ball(0.9));
        assert_eq!(s.u2(), Domain::new(1.0, 3.0));
        let back = serde_json::to_string(&s.to_file()).unwrap();
        let again = Hypersurface::from_json(&back).unwrap();
        assert_eq!(again.defining(), s.defining());
    }
}
