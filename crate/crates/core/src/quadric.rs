//! Hermitian quadrics in `CP^n`, their hyperplane Segre varieties, and the
//! projective linear algebra used by continuation and monodromy.
//!
//! Homogeneous coordinates are ordered `(z_1*, .., z_{n-1}*, w*, t)`; the
//! affine chart is `t = 1`. A quadric is `{xi : xi^T H conj(xi) = 0}`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};

const TWO_PI: f64 = 2.0 * PI;

fn cz() -> C64 {
    C64::new(0.0, 0.0)
}

/// A point of `CP^n` given by homogeneous coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProjectivePoint {
    #[serde(with = "crate::json::complex_vec")]
    homog: Vec<C64>,
}

impl ProjectivePoint {
    pub fn new(homog: Vec<C64>) -> Result<Self> {
        if homog.iter().all(|c| c.norm() == 0.0) || homog.iter().any(|c| !c.is_finite()) {
            return Err(Error::Degenerate("homogeneous coordinates must be finite and not all zero".into()));
        }
        Ok(ProjectivePoint { homog })
    }

    /// The point `[x : 1]` of the affine chart.
    pub fn affine(x: &[C64]) -> Self {
        let mut homog = x.to_vec();
        homog.push(C64::new(1.0, 0.0));
        ProjectivePoint { homog }
    }

    pub fn homog(&self) -> &[C64] {
        &self.homog
    }

    pub fn dim(&self) -> usize {
        self.homog.len() - 1
    }

    pub fn to_vector(&self) -> CVec {
        CVec::from_column_slice(&self.homog)
    }

    pub fn from_vector(v: &CVec) -> Result<Self> {
        ProjectivePoint::new(v.iter().copied().collect())
    }

    /// Unit norm with the first non-negligible entry positive real.
    pub fn canonical(&self) -> ProjectivePoint {
        let norm = self.homog.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let lead = self
            .homog
            .iter()
            .find(|c| c.norm() > 1e-12 * norm)
            .copied()
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = lead.conj() / lead.norm();
        ProjectivePoint {
            homog: self.homog.iter().map(|c| c * phase / norm).collect(),
        }
    }

    /// Affine coordinates `x / t`.
    pub fn to_affine(&self) -> Result<Vec<C64>> {
        let t = *self.homog.last().expect("nonempty");
        let norm = self.homog.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if t.norm() < 1e-14 * norm {
            return Err(Error::Degenerate("point at infinity".into()));
        }
        Ok(self.homog[..self.homog.len() - 1].iter().map(|c| c / t).collect())
    }

    /// Sine of the angle between representatives: 0 iff equal in `CP^n`.
    pub fn distance(&self, other: &ProjectivePoint) -> f64 {
        projective_distance(&self.homog, &other.homog)
    }
}

/// Sine of the angle between two complex lines.
pub fn projective_distance(a: &[C64], b: &[C64]) -> f64 {
    // |a ∧ b| / (|a| |b|): no cancellation for nearby lines.
    let na: f64 = a.iter().map(|c| c.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|c| c.norm_sqr()).sum();
    let mut wedge = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            wedge += (a[i] * b[j] - a[j] * b[i]).norm_sqr();
        }
    }
    (wedge / (na * nb)).sqrt().min(1.0)
}

/// A hyperplane `{xi : sum_a c_a xi_a = 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hyperplane {
    #[serde(with = "crate::json::complex_vec")]
    covector: Vec<C64>,
}

impl Hyperplane {
    pub fn new(covector: Vec<C64>) -> Result<Self> {
        if covector.iter().all(|c| c.norm() == 0.0) {
            return Err(Error::Degenerate("zero covector".into()));
        }
        Ok(Hyperplane { covector })
    }

    pub fn covector(&self) -> &[C64] {
        &self.covector
    }

    /// Normalized incidence `|c . x| / (|c| |x|)`.
    pub fn incidence(&self, p: &ProjectivePoint) -> f64 {
        let s: C64 = self.covector.iter().zip(p.homog()).map(|(c, x)| c * x).sum();
        let nc = self.covector.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let nx = p.homog().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        s.norm() / (nc * nx)
    }

    pub fn distance(&self, other: &Hyperplane) -> f64 {
        projective_distance(&self.covector, &other.covector)
    }
}

/// A nondegenerate Hermitian form `H` and its quadric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuadricRepr", into = "QuadricRepr")]
pub struct HermitianQuadric {
    h: CMat,
    h_inv: CMat,
    positive: usize,
    negative: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct QuadricRepr(#[serde(with = "crate::json::matrix")] CMat);

impl TryFrom<QuadricRepr> for HermitianQuadric {
    type Error = Error;
    fn try_from(r: QuadricRepr) -> Result<Self> {
        HermitianQuadric::new(r.0)
    }
}

impl From<HermitianQuadric> for QuadricRepr {
    fn from(q: HermitianQuadric) -> Self {
        QuadricRepr(q.h)
    }
}

impl HermitianQuadric {
    pub fn new(h: CMat) -> Result<Self> {
        if !h.is_square() || h.nrows() < 3 {
            return Err(Error::Degenerate("quadric matrix must be square of size >= 3".into()));
        }
        let scale = linalg::max_abs(&h);
        if scale == 0.0 || linalg::max_abs(&(&h - h.adjoint())) > 1e-12 * scale {
            return Err(Error::Degenerate("matrix is not Hermitian".into()));
        }
        let (vals, _) = linalg::hermitian_eigen(&h);
        let smallest = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        if smallest < 1e-10 * scale {
            return Err(Error::Degenerate(format!("degenerate Hermitian form (|eig| = {smallest:.3e})")));
        }
        let h_inv = h.clone().try_inverse().ok_or_else(|| Error::Degenerate("singular quadric".into()))?;
        let positive = vals.iter().filter(|&&v| v > 0.0).count();
        Ok(HermitianQuadric {
            negative: vals.len() - positive,
            positive,
            h,
            h_inv,
        })
    }

    /// `Im w* = sum_{j<=k} |z_j*|^2 - sum_{j>k} |z_j*|^2` in `C^n`, `k + l = n - 1`.
    pub fn standard(k: usize, l: usize) -> Result<Self> {
        let n = k + l + 1;
        let mut h = CMat::zeros(n + 1, n + 1);
        for j in 0..n - 1 {
            h[(j, j)] = C64::new(if j < k { 1.0 } else { -1.0 }, 0.0);
        }
        h[(n - 1, n)] = C64::new(0.0, 0.5);
        h[(n, n - 1)] = C64::new(0.0, -0.5);
        HermitianQuadric::new(h)
    }

    /// `Im w* - shift = |z*|^2 ...`: the standard form translated in `Re`-free
    /// direction `w* -> w* - i shift`.
    pub fn standard_shifted(k: usize, l: usize, shift: f64) -> Result<Self> {
        let q = HermitianQuadric::standard(k, l)?;
        let n = k + l + 1;
        let mut t = CMat::identity(n + 1, n + 1);
        t[(n - 1, n)] = C64::new(0.0, shift);
        // Points xi on the translated quadric satisfy T^{-1} xi on the standard one.
        let ti = t.clone().try_inverse().expect("unipotent");
        HermitianQuadric::new(ti.transpose() * &q.h * ti.map(|c| c.conj()))
    }

    pub fn matrix(&self) -> &CMat {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.h.nrows() - 1
    }

    /// `(k, l)` with `k >= l`: the form has signature `(k+1, l+1)` up to sign.
    pub fn signature(&self) -> (usize, usize) {
        let (a, b) = (self.positive.max(self.negative), self.positive.min(self.negative));
        (a.saturating_sub(1), b.saturating_sub(1))
    }

    /// `xi^T H conj(eta)`.
    pub fn form(&self, xi: &[C64], eta: &[C64]) -> C64 {
        let mut s = cz();
        for a in 0..xi.len() {
            for b in 0..eta.len() {
                s += self.h[(a, b)] * xi[a] * eta[b].conj();
            }
        }
        s
    }

    /// Normalized value `|H(x, x)| / (|H| |x|^2)`.
    pub fn residual(&self, p: &ProjectivePoint) -> f64 {
        let x = p.homog();
        let nx: f64 = x.iter().map(|c| c.norm_sqr()).sum();
        self.form(x, x).norm() / (linalg::max_abs(&self.h) * nx)
    }

    /// The Segre hyperplane `Q'_zeta = {H(xi, conj zeta) = 0}`, covector `H conj(zeta)`.
    pub fn segre_hyperplane(&self, zeta: &ProjectivePoint) -> Hyperplane {
        let zb = CVec::from_iterator(zeta.homog().len(), zeta.homog().iter().map(|c| c.conj()));
        let c = &self.h * zb;
        Hyperplane { covector: c.iter().copied().collect() }
    }

    /// The point whose Segre hyperplane is `h`: `zeta = conj(H^{-1} c)`.
    pub fn inverse_segre(&self, h: &Hyperplane) -> ProjectivePoint {
        let c = CVec::from_column_slice(h.covector());
        let v = &self.h_inv * c;
        ProjectivePoint { homog: v.iter().map(|x| x.conj()).collect() }
    }

    /// Projective distance between the matrices, as vectors.
    pub fn distance(&self, other: &HermitianQuadric) -> f64 {
        let a: Vec<C64> = self.h.iter().copied().collect();
        let b: Vec<C64> = other.h.iter().copied().collect();
        projective_distance(&a, &b)
    }

    /// The image quadric under a projective map: `tau(Q) = {tau xi : xi in Q}`.
    pub fn transformed(&self, tau: &ProjectiveMap) -> Result<HermitianQuadric> {
        let ti = tau.inverse()?.t;
        let h = ti.transpose() * &self.h * ti.map(|c| c.conj());
        HermitianQuadric::new((&h + h.adjoint()) * C64::new(0.5, 0.0))
    }
}

/// An invertible projective linear map, stored as a matrix up to scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProjectiveMap {
    #[serde(with = "crate::json::matrix")]
    t: CMat,
}

impl ProjectiveMap {
    pub fn new(t: CMat) -> Result<Self> {
        if !t.is_square() {
            return Err(Error::Degenerate("projective map must be square".into()));
        }
        let sv = linalg::singular_values(&t);
        if sv.is_empty() || sv[sv.len() - 1] <= 1e-13 * sv[0] {
            return Err(Error::Degenerate("projective map is not invertible".into()));
        }
        Ok(ProjectiveMap { t })
    }

    pub fn identity(n: usize) -> Self {
        ProjectiveMap { t: CMat::identity(n + 1, n + 1) }
    }

    pub fn matrix(&self) -> &CMat {
        &self.t
    }

    pub fn dim(&self) -> usize {
        self.t.nrows() - 1
    }

    pub fn apply(&self, p: &ProjectivePoint) -> ProjectivePoint {
        let v = &self.t * p.to_vector();
        ProjectivePoint { homog: v.iter().copied().collect() }
    }

    pub fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        (&self.t * CVec::from_column_slice(x)).iter().copied().collect()
    }

    pub fn compose(&self, other: &ProjectiveMap) -> ProjectiveMap {
        ProjectiveMap { t: &self.t * &other.t }
    }

    pub fn inverse(&self) -> Result<ProjectiveMap> {
        let t = self.t.clone().try_inverse().ok_or_else(|| Error::Degenerate("not invertible".into()))?;
        Ok(ProjectiveMap { t })
    }

    pub fn pow(&self, k: u32) -> ProjectiveMap {
        let mut out = CMat::identity(self.t.nrows(), self.t.nrows());
        for _ in 0..k {
            out = &out * &self.t;
        }
        ProjectiveMap { t: out }
    }

    /// `T / det(T)^{1/(n+1)}` with the root of argument in `[0, 2 pi/(n+1))`.
    pub fn canonical(&self) -> CMat {
        let m = self.t.nrows() as f64;
        let det = self.t.determinant();
        let mut theta = det.arg();
        if theta < 0.0 {
            theta += TWO_PI;
        }
        if TWO_PI - theta < 1e-9 {
            theta -= TWO_PI;
        }
        let root = C64::from_polar(det.norm().powf(1.0 / m), theta / m);
        &self.t / root
    }

    /// Projective distance between the matrices as vectors.
    pub fn distance(&self, other: &ProjectiveMap) -> f64 {
        let a: Vec<C64> = self.t.iter().copied().collect();
        let b: Vec<C64> = other.t.iter().copied().collect();
        projective_distance(&a, &b)
    }

    /// Whether the matrix is a scalar multiple of the identity: off-diagonal
    /// entries below `tol * |T|` and relative diagonal spread below `tol`.
    pub fn is_scalar(&self, tol: f64) -> bool {
        is_scalar(&self.t, tol)
    }
}

pub fn is_scalar(t: &CMat, tol: f64) -> bool {
    let norm = linalg::frobenius(t);
    let m = t.nrows();
    let mut off = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                off = off.max(t[(i, j)].norm());
            }
        }
    }
    let d0 = t[(0, 0)];
    let spread = (0..m).map(|i| (t[(i, i)] - d0).norm()).fold(0.0, f64::max);
    off < tol * norm && spread < tol * d0.norm()
}

/// Least-squares hyperplane through points; residual is `s_min / s_max` of
/// the stacked unit-normalized coordinates.
pub fn fit_hyperplane(points: &[ProjectivePoint]) -> Result<(Hyperplane, f64)> {
    let m = points.first().map_or(0, |p| p.homog().len());
    if points.len() < m || m == 0 {
        return Err(Error::Precondition(format!("need at least {m} points, got {}", points.len())));
    }
    let mut a = CMat::zeros(points.len(), m);
    for (i, p) in points.iter().enumerate() {
        let c = p.canonical();
        for j in 0..m {
            a[(i, j)] = c.homog()[j];
        }
    }
    let (v, sv) = linalg::null_vector(&a);
    let top = sv[0];
    if sv[m - 2] < 1e-11 * top {
        return Err(Error::Degenerate("points span too small a subspace for a hyperplane fit".into()));
    }
    Ok((Hyperplane { covector: v.iter().copied().collect() }, sv[m - 1] / top))
}

/// Estimates `T` with `T x_i ~ y_i` from cross-product conditions; residual
/// is the smallest singular value of the condition matrix.
pub fn fit_projective_map(pairs: &[(ProjectivePoint, ProjectivePoint)]) -> Result<(ProjectiveMap, f64)> {
    let m = pairs.first().map_or(0, |p| p.0.homog().len());
    if pairs.len() < m + 2 {
        return Err(Error::Precondition(format!("need at least {} pairs, got {}", m + 2, pairs.len())));
    }
    let per = m * (m - 1) / 2;
    let mut a = CMat::zeros(pairs.len() * per, m * m);
    let mut row = 0;
    for (x, y) in pairs {
        let x = x.canonical();
        let y = y.canonical();
        let (x, y) = (x.homog(), y.homog());
        for p in 0..m {
            for q in p + 1..m {
                // y_p (T x)_q - y_q (T x)_p = 0
                for k in 0..m {
                    a[(row, q * m + k)] += y[p] * x[k];
                    a[(row, p * m + k)] -= y[q] * x[k];
                }
                row += 1;
            }
        }
    }
    let (v, sv) = linalg::null_vector(&a);
    let k = sv.len();
    if sv[k - 2] < 1e-9 * sv[0] {
        return Err(Error::Degenerate("projective map fit has a multi-dimensional solution space".into()));
    }
    let t = CMat::from_fn(m, m, |i, j| v[i * m + j]);
    Ok((ProjectiveMap::new(t)?, sv[k - 1]))
}

/// Hermitian `H` minimizing `sum |x_i^T H conj(x_i)|^2` over unit parameter
/// vectors; residual is `s_min / s_max` of the real design matrix.
pub fn fit_quadric(points: &[ProjectivePoint]) -> Result<(HermitianQuadric, f64, (usize, usize))> {
    let m = points.first().map_or(0, |p| p.homog().len());
    let params = m * m;
    if points.len() < params {
        return Err(Error::Precondition(format!("need at least {params} points, got {}", points.len())));
    }
    let mut a = DMatrix::<f64>::zeros(points.len(), params);
    for (i, p) in points.iter().enumerate() {
        let c = p.canonical();
        let x = c.homog();
        let mut col = 0;
        for d in 0..m {
            a[(i, col)] = x[d].norm_sqr();
            col += 1;
        }
        for r in 0..m {
            for s in r + 1..m {
                let prod = x[r] * x[s].conj();
                a[(i, col)] = 2.0 * prod.re;
                a[(i, col + 1)] = -2.0 * prod.im;
                col += 2;
            }
        }
    }
    let rows = a.nrows();
    let padded = if rows < params {
        let mut p = DMatrix::<f64>::zeros(params, params);
        p.view_mut((0, 0), (rows, params)).copy_from(&a);
        p
    } else {
        a
    };
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut idx: Vec<usize> = (0..params).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let top = svd.singular_values[idx[0]];
    let low = idx[params - 1];
    if svd.singular_values[idx[params - 2]] < 1e-9 * top {
        return Err(Error::Degenerate("quadric fit is not unique".into()));
    }
    let v: Vec<f64> = (0..params).map(|j| vt[(low, j)]).collect();
    let mut h = CMat::zeros(m, m);
    let mut col = 0;
    for d in 0..m {
        h[(d, d)] = C64::new(v[col], 0.0);
        col += 1;
    }
    for r in 0..m {
        for s in r + 1..m {
            h[(r, s)] = C64::new(v[col], v[col + 1]);
            h[(s, r)] = h[(r, s)].conj();
            col += 2;
        }
    }
    let h = &h / C64::new(linalg::frobenius(&h), 0.0);
    let q = HermitianQuadric::new(h)?;
    let sig = q.signature();
    Ok((q, svd.singular_values[low] / top, sig))
}

/// An eigenvalue cluster of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCluster {
    pub eigenvalue: C64,
    pub multiplicity: usize,
    /// Basis of the generalized eigenspace (columns).
    pub basis: CMat,
}

/// Clusters eigenvalues within `tol` (relative to the spectral radius).
/// Pairs at a distance in `[tol/100, tol)` are ambiguous.
fn cluster_eigenvalues(t: &CMat, tol: f64) -> Result<Vec<(C64, usize)>> {
    let eig = linalg::eigenvalues(t);
    let scale = eig.iter().map(|e| e.norm()).fold(0.0, f64::max).max(1e-300);
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    for e in eig {
        match clusters
            .iter_mut()
            .find(|c| c.iter().any(|x| (x - e).norm() < tol * scale))
        {
            Some(c) => c.push(e),
            None => clusters.push(vec![e]),
        }
    }
    // Merge clusters connected transitively.
    let mut merged = true;
    while merged {
        merged = false;
        'outer: for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                if clusters[i].iter().any(|a| clusters[j].iter().any(|b| (a - b).norm() < tol * scale)) {
                    let c = clusters.remove(j);
                    clusters[i].extend(c);
                    merged = true;
                    break 'outer;
                }
            }
        }
    }
    let means: Vec<(C64, usize)> = clusters
        .iter()
        .map(|c| (c.iter().sum::<C64>() / c.len() as f64, c.len()))
        .collect();
    for i in 0..clusters.len() {
        for j in i + 1..clusters.len() {
            for a in &clusters[i] {
                for b in &clusters[j] {
                    let d = (a - b).norm() / scale;
                    if d < tol * 1e2 && d >= tol {
                        return Err(Error::AmbiguousClustering(d));
                    }
                }
            }
        }
    }
    Ok(means)
}

/// Dimension of the kernel of `a` at relative threshold `rel`.
fn kernel_dim(a: &CMat, rel: f64, scale: f64) -> usize {
    let sv = linalg::singular_values(a);
    sv.iter().filter(|&&s| s <= rel * scale).count()
}

/// Generalized eigenspaces of `t`.
pub fn eigen_clusters(t: &CMat, tol: f64) -> Result<Vec<EigenCluster>> {
    let n = t.nrows();
    let mut out = Vec::new();
    for (lambda, mult) in cluster_eigenvalues(t, tol)? {
        let shifted = t - CMat::identity(n, n) * lambda;
        let mut p = CMat::identity(n, n);
        for _ in 0..mult {
            p = &p * &shifted;
        }
        let (_, v) = linalg::right_singular(&p);
        let basis = v.columns(n - mult, mult).into_owned();
        out.push(EigenCluster { eigenvalue: lambda, multiplicity: mult, basis });
    }
    Ok(out)
}

/// Default clustering radius given an estimate `err` of the entrywise error of
/// a matrix: defective eigenvalues split like `sqrt(err)`.
pub fn cluster_tolerance(base: f64, err: f64) -> f64 {
    base.max(10.0 * err.max(0.0).sqrt())
}

/// `log(T_c)` with per-cluster branch shifts (in turns) added to `log lambda`.
fn log_with_shifts(tc: &CMat, clusters: &[EigenCluster], shifts: &[i64]) -> Result<CMat> {
    let n = tc.nrows();
    let mut v = CMat::zeros(n, n);
    let mut col = 0;
    for c in clusters {
        v.view_mut((0, col), (n, c.multiplicity)).copy_from(&c.basis);
        col += c.multiplicity;
    }
    let vi = v
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("generalized eigenspaces do not span".into()))?;
    let b = &vi * tc * &v;
    let mut logb = CMat::zeros(n, n);
    let mut off = 0;
    for (ci, c) in clusters.iter().enumerate() {
        let m = c.multiplicity;
        let block = b.view((off, off), (m, m)).into_owned();
        let lambda = c.eigenvalue;
        let x = (&block - CMat::identity(m, m) * lambda) / lambda;
        let mut term = CMat::identity(m, m);
        let mut series = CMat::zeros(m, m);
        for k in 1..=30 {
            term = &term * &x;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            series += &term * C64::new(sign / k as f64, 0.0);
            if linalg::max_abs(&term) < 1e-18 {
                break;
            }
        }
        let shift = shifts.get(ci).copied().unwrap_or(0);
        let l = lambda.ln() + C64::new(0.0, TWO_PI * shift as f64);
        let blk = CMat::identity(m, m) * l + series;
        logb.view_mut((off, off), (m, m)).copy_from(&blk);
        off += m;
    }
    Ok(&v * logb * vi)
}

/// Result of a matrix logarithm: `A = log(T_c) / (2 pi i)`.
#[derive(Debug, Clone)]
pub struct MatrixLog {
    pub a: CMat,
    pub clusters: Vec<EigenCluster>,
    /// Some defective cluster sits on the negative real axis.
    pub branch_cut_warning: bool,
}

/// `A = (1/2 pi i) log(T_n)` for the normalized representative `T_n`, principal
/// branch per eigenvalue cluster; `shifts` adds integer turns per cluster.
pub fn matrix_log_branch(t: &ProjectiveMap, tol: f64, shifts: &[i64]) -> Result<MatrixLog> {
    let tc = normalized(t, tol)?;
    let clusters = eigen_clusters(&tc, tol)?;
    let warn = clusters.iter().any(|c| {
        c.multiplicity > 1 && c.eigenvalue.re < 0.0 && c.eigenvalue.im.abs() < 1e-9 * c.eigenvalue.norm()
    });
    let l = log_with_shifts(&tc, &clusters, shifts)?;
    Ok(MatrixLog {
        a: l / C64::new(0.0, TWO_PI),
        clusters,
        branch_cut_warning: warn,
    })
}

pub fn matrix_log(t: &ProjectiveMap) -> Result<CMat> {
    Ok(matrix_log_branch(t, 1e-7, &[])?.a)
}

/// `exp(2 pi i A)`.
pub fn exp_2pi_i(a: &CMat) -> CMat {
    linalg::expm(&(a * C64::new(0.0, TWO_PI)))
}

/// `w^A = exp(A * lw)` with `lw` a tracked logarithm of `w`.
pub fn w_power(a: &CMat, lw: C64) -> CMat {
    linalg::expm(&(a * lw))
}

/// `w^A` with `log w = Log w + 2 pi i winding`.
pub fn w_power_winding(a: &CMat, w: C64, winding: i64) -> CMat {
    w_power(a, w.ln() + C64::new(0.0, TWO_PI * winding as f64))
}

/// A Jordan block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanBlock {
    #[serde(with = "crate::json::complex")]
    pub eigenvalue: C64,
    pub size: usize,
}

/// Jordan form of the canonical representative, modulo roots of unity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanForm {
    pub blocks: Vec<JordanBlock>,
}

impl JordanForm {
    /// Block-diagonal matrix with `lambda` on the diagonal and `2 pi i lambda`
    /// on each block's superdiagonal.
    pub fn matrix(&self) -> CMat {
        let n: usize = self.blocks.iter().map(|b| b.size).sum();
        let mut m = CMat::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            for i in 0..b.size {
                m[(off + i, off + i)] = b.eigenvalue;
                if i + 1 < b.size {
                    m[(off + i, off + i + 1)] = b.eigenvalue * C64::new(0.0, TWO_PI);
                }
            }
            off += b.size;
        }
        m
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat(b.eigenvalue).take(b.size))
            .collect()
    }

    /// Max entrywise difference of the matrices; infinite for mismatched
    /// block structure.
    pub fn difference(&self, other: &JordanForm) -> f64 {
        let sizes = |j: &JordanForm| j.blocks.iter().map(|b| b.size).collect::<Vec<_>>();
        if sizes(self) != sizes(other) {
            return f64::INFINITY;
        }
        linalg::max_abs(&(self.matrix() - other.matrix()))
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.blocks.iter().all(|b| b.size == 1 && (b.eigenvalue - 1.0).norm() < tol)
    }
}

fn arg_0_2pi(z: C64, tol: f64) -> f64 {
    let mut a = z.arg();
    if a < 0.0 {
        a += TWO_PI;
    }
    if TWO_PI - a < tol {
        a = 0.0;
    }
    a
}

/// Lexicographic comparison of eigenvalue lists by `(|lambda|, Arg)` with tolerance.
fn cmp_spectra(a: &[C64], b: &[C64], tol: f64) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    for (x, y) in a.iter().zip(b) {
        let (mx, my) = (x.norm(), y.norm());
        if (mx - my).abs() > tol {
            return mx.total_cmp(&my);
        }
        let (ax, ay) = (arg_0_2pi(*x, tol), arg_0_2pi(*y, tol));
        if (ax - ay).abs() > tol {
            return ax.total_cmp(&ay);
        }
    }
    Ordering::Equal
}

fn sort_spectrum(v: &mut [C64], tol: f64) {
    v.sort_by(|x, y| cmp_spectra(std::slice::from_ref(x), std::slice::from_ref(y), tol));
}

/// Root of unity `omega` such that `omega * spectrum` is smallest in the
/// `(|lambda|, Arg)` order: fixes the scalar left free by the canonical scaling.
fn spectral_rotation(clusters: &[(C64, usize)], m: usize) -> C64 {
    let spectrum: Vec<C64> = clusters
        .iter()
        .flat_map(|(l, k)| std::iter::repeat(*l).take(*k))
        .collect();
    let mut best: Option<(Vec<C64>, C64)> = None;
    for k in 0..m {
        let omega = C64::from_polar(1.0, TWO_PI * k as f64 / m as f64);
        let mut rotated: Vec<C64> = spectrum.iter().map(|l| l * omega).collect();
        sort_spectrum(&mut rotated, 1e-6);
        let better = match &best {
            None => true,
            Some((b, _)) => cmp_spectra(&rotated, b, 1e-6) == std::cmp::Ordering::Less,
        };
        if better {
            best = Some((rotated, omega));
        }
    }
    best.expect("nonempty").1
}

/// `omega * T_c`, the representative whose spectrum is smallest in the
/// `(|lambda|, Arg)` order.
pub fn normalized(t: &ProjectiveMap, tol: f64) -> Result<CMat> {
    let tc = t.canonical();
    let clusters = cluster_eigenvalues(&tc, tol)?;
    Ok(tc * spectral_rotation(&clusters, t.matrix().nrows()))
}

/// Jordan normal form of `T_c` up to the `(n+1)`-th roots of unity left by
/// the canonical scaling. `tol` is the eigenvalue clustering radius.
pub fn scaled_jordan(t: &ProjectiveMap, tol: f64) -> Result<JordanForm> {
    let tc = t.canonical();
    let m = tc.nrows();
    let clusters = cluster_eigenvalues(&tc, tol)?;
    let omega = spectral_rotation(&clusters, m);
    let scale = linalg::frobenius(&tc);
    let rank_rel = (tol * 10.0).max(1e-6);
    let mut blocks = Vec::new();
    for (lambda, mult) in clusters {
        let shifted = &tc - CMat::identity(m, m) * lambda;
        let mut p = CMat::identity(m, m);
        let mut dims = vec![0usize];
        for _ in 0..mult {
            p = &p * &shifted;
            let s = scale.powi(dims.len() as i32);
            dims.push(kernel_dim(&p, rank_rel, s).min(mult));
        }
        // Number of blocks of size >= k is dims[k] - dims[k-1].
        let ge: Vec<usize> = (1..=mult).map(|k| dims[k].saturating_sub(dims[k - 1])).collect();
        for k in 1..=mult {
            let at_least_k = ge[k - 1];
            let at_least_k1 = if k < mult { ge[k] } else { 0 };
            for _ in 0..at_least_k.saturating_sub(at_least_k1) {
                blocks.push(JordanBlock { eigenvalue: lambda * omega, size: k });
            }
        }
        let counted: usize = blocks.iter().filter(|b| (b.eigenvalue - lambda * omega).norm() == 0.0).map(|b| b.size).sum();
        if counted != mult {
            return Err(Error::AmbiguousClustering(tol));
        }
    }
    blocks.sort_by(|a, b| {
        cmp_spectra(&[a.eigenvalue], &[b.eigenvalue], 1e-6).then(a.size.cmp(&b.size))
    });
    Ok(JordanForm { blocks })
}

/// Smallest `k <= k_max` with `T^k` scalar.
pub fn finite_order(t: &ProjectiveMap, k_max: u32, tol: f64) -> Option<u32> {
    let tc = t.canonical();
    let mut p = tc.clone();
    for k in 1..=k_max {
        if is_scalar(&p, tol * k as f64) {
            return Some(k);
        }
        p = &p * &tc;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::hypersurface::random_in_disc;
    use rand::Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix<R: Rng>(rng: &mut R, n: usize) -> CMat {
        CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn random_point<R: Rng>(rng: &mut R, n: usize) -> ProjectivePoint {
        ProjectivePoint::new((0..=n).map(|_| random_in_disc(rng, 1.0)).collect()).unwrap()
    }

    #[test]
    fn segre_hyperplane_of_base_point() {
        let q = HermitianQuadric::standard(1, 0).unwrap();
        // [0 : 1 : 1]: z* = 0, w* = 1 -- i.e. the Segre variety w* = 1 + 2i z* conj(0).
        let zeta = ProjectivePoint::affine(&[c(0.0, 0.0), c(1.0, 0.0)]);
        let h = q.segre_hyperplane(&zeta);
        for z in [c(0.1, 0.2), c(-0.3, 0.0), c(0.5, -0.5), c(0.0, 0.0), c(1.0, 1.0)] {
            // Q'_(0,1): w* = 1 for every z*.
            assert!(h.incidence(&ProjectivePoint::affine(&[z, c(1.0, 0.0)])) < 1e-12);
        }
    }

    #[test]
    fn hyperplane_contains_point_iff_on_quadric() {
        let q = HermitianQuadric::standard(1, 0).unwrap();
        let on = ProjectivePoint::affine(&[c(0.3, 0.4), c(0.7, 0.25)]);
        assert!(q.residual(&on) < 1e-15);
        assert!(q.segre_hyperplane(&on).incidence(&on) < 1e-15);
        let off = ProjectivePoint::affine(&[c(0.3, 0.4), c(0.7, 0.5)]);
        assert!(q.segre_hyperplane(&off).incidence(&off) > 1e-3);
    }

    #[test]
    fn inverse_segre_round_trip() {
        let mut rng = Config::default().rng(10);
        let q = HermitianQuadric::standard(1, 1).unwrap();
        for _ in 0..200 {
            let p = random_point(&mut rng, 3);
            let back = q.inverse_segre(&q.segre_hyperplane(&p));
            assert!(back.distance(&p) < 1e-12);
            let h = Hyperplane::new((0..4).map(|_| random_in_disc(&mut rng, 1.0)).collect()).unwrap();
            assert!(q.segre_hyperplane(&q.inverse_segre(&h)).distance(&h) < 1e-12);
        }
        let a = random_point(&mut rng, 3);
        let b = random_point(&mut rng, 3);
        assert!(q.segre_hyperplane(&a).distance(&q.segre_hyperplane(&b)) > 1e-6);
    }

    #[test]
    fn hyperplane_fits() {
        let mut rng = Config::default().rng(11);
        let cov = [c(0.3, 0.1), c(-1.0, 0.2), c(0.5, 0.5)];
        let pts: Vec<ProjectivePoint> = (0..7)
            .map(|_| {
                let x0 = random_in_disc(&mut rng, 1.0);
                let x1 = random_in_disc(&mut rng, 1.0);
                let x2 = -(cov[0] * x0 + cov[1] * x1) / cov[2];
                ProjectivePoint::new(vec![x0, x1, x2]).unwrap()
            })
            .collect();
        let (h, r) = fit_hyperplane(&pts).unwrap();
        assert!(r < 1e-12);
        assert!(h.distance(&Hyperplane::new(cov.to_vec()).unwrap()) < 1e-12);
        let random: Vec<ProjectivePoint> = (0..12).map(|_| random_point(&mut rng, 2)).collect();
        assert!(fit_hyperplane(&random).unwrap().1 > 1e-2);
        let same = vec![pts[0].clone(); 5];
        assert!(matches!(fit_hyperplane(&same), Err(Error::Degenerate(_))));
    }

    #[test]
    fn projective_map_recovery() {
        let mut rng = Config::default().rng(12);
        let t = ProjectiveMap::new(random_matrix(&mut rng, 3)).unwrap();
        let pairs: Vec<_> = (0..8)
            .map(|_| {
                let x = random_point(&mut rng, 2);
                (x.clone(), t.apply(&x))
            })
            .collect();
        let (fit, r) = fit_projective_map(&pairs).unwrap();
        assert!(r < 1e-12);
        let s = fit.matrix()[(0, 0)] / t.matrix()[(0, 0)];
        assert!(linalg::max_abs(&(fit.matrix() / s - t.matrix())) < 1e-10);
        let mut bad = pairs.clone();
        bad[0].1 = ProjectivePoint::new(bad[0].1.homog().iter().map(|v| v + c(1e-2, 0.0)).collect()).unwrap();
        assert!(fit_projective_map(&bad).unwrap().1 > 1e-4);
    }

    #[test]
    fn quadric_fits() {
        let mut rng = Config::default().rng(13);
        let q = HermitianQuadric::standard(1, 0).unwrap();
        let on: Vec<ProjectivePoint> = (0..60)
            .map(|_| {
                let z = random_in_disc(&mut rng, 1.0);
                let u: f64 = rng.gen_range(-1.0..1.0);
                ProjectivePoint::affine(&[z, c(u, z.norm_sqr())])
            })
            .collect();
        let (fit, r, sig) = fit_quadric(&on).unwrap();
        assert!(r < 1e-10);
        assert_eq!(sig, (1, 0));
        assert!(fit.distance(&q) < 1e-10);
        let bumpy: Vec<ProjectivePoint> = (0..40)
            .map(|_| {
                let z = random_in_disc(&mut rng, 1.0);
                let u: f64 = rng.gen_range(-1.0..1.0);
                ProjectivePoint::affine(&[z, c(u, z.norm_sqr() + 0.1 * z.norm_sqr() * z.norm_sqr() * u)])
            })
            .collect();
        match fit_quadric(&bumpy) {
            Ok((_, r, _)) => assert!(r > 1e-3),
            Err(_) => {}
        }
    }

    #[test]
    fn shifted_quadric_contains_translated_points() {
        let q = HermitianQuadric::standard_shifted(1, 0, PI).unwrap();
        let z = c(0.3, -0.2);
        assert!(q.residual(&ProjectivePoint::affine(&[z, c(0.4, PI + z.norm_sqr())])) < 1e-15);
        assert!(q.distance(&HermitianQuadric::standard(1, 0).unwrap()) > 0.1);
    }

    #[test]
    fn log_examples() {
        assert!(linalg::max_abs(&matrix_log(&ProjectiveMap::identity(2)).unwrap()) < 1e-15);
        let mut t = CMat::identity(3, 3);
        t[(1, 2)] = c(0.0, TWO_PI);
        let a = matrix_log(&ProjectiveMap::new(t.clone()).unwrap()).unwrap();
        let mut want = CMat::zeros(3, 3);
        want[(1, 2)] = c(1.0, 0.0);
        assert!(linalg::max_abs(&(a - want)) < 1e-14);

        let d = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::from_polar(1.0, 0.6 * PI),
            C64::from_polar(1.0, 1.2 * PI),
            c(1.0, 0.0),
        ]));
        let map = ProjectiveMap::new(d).unwrap();
        let a = matrix_log(&map).unwrap();
        assert!(linalg::max_abs(&(exp_2pi_i(&a) - normalized(&map, 1e-7).unwrap())) < 1e-12);
        // Same as diag(0.3, 0.6, 0) up to a scalar shift (projectively equal).
        let shift = a[(2, 2)];
        assert!((a[(0, 0)] - shift - 0.3).norm() < 1e-12);
        assert!((a[(1, 1)] - shift - 0.6).norm() < 1e-12);
    }

    #[test]
    fn log_round_trip_random() {
        let mut rng = Config::default().rng(14);
        for _ in 0..100 {
            let t = ProjectiveMap::new(random_matrix(&mut rng, 3)).unwrap();
            let a = matrix_log(&t).unwrap();
            assert!(linalg::max_abs(&(exp_2pi_i(&a) - normalized(&t, 1e-7).unwrap())) < 1e-10);
        }
    }

    #[test]
    fn jordan_examples() {
        let mut t = CMat::identity(3, 3);
        t[(1, 2)] = c(0.0, TWO_PI);
        let j = scaled_jordan(&ProjectiveMap::new(t.clone()).unwrap(), 1e-7).unwrap();
        assert_eq!(j.blocks.iter().map(|b| b.size).collect::<Vec<_>>(), vec![1, 2]);
        assert!(linalg::max_abs(&(j.matrix() - t)) < 1e-12);

        let s = ProjectiveMap::new(CMat::identity(3, 3) * c(0.3, 2.0)).unwrap();
        assert!(scaled_jordan(&s, 1e-7).unwrap().is_identity(1e-12));
        assert_eq!(finite_order(&s, 64, 1e-8), Some(1));
    }

    #[test]
    fn jordan_is_conjugation_invariant() {
        let mut rng = Config::default().rng(15);
        let t = ProjectiveMap::new(random_matrix(&mut rng, 3)).unwrap();
        let j0 = scaled_jordan(&t, 1e-7).unwrap();
        for _ in 0..20 {
            let p = ProjectiveMap::new(random_matrix(&mut rng, 3)).unwrap();
            let c = p.compose(&t).compose(&p.inverse().unwrap()).compose(&ProjectiveMap::new(CMat::identity(3, 3) * c(-1.7, 0.4)).unwrap());
            let j = scaled_jordan(&c, 1e-7).unwrap();
            assert!(j.difference(&j0) < 1e-8, "{j:?} vs {j0:?}");
        }
    }

    #[test]
    fn finite_order_of_half_turn() {
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(-1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]));
        assert_eq!(finite_order(&ProjectiveMap::new(d).unwrap(), 64, 1e-8), Some(2));
        let irr = 2f64.sqrt() / 2.0;
        let d = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::from_polar(1.0, TWO_PI * irr),
            C64::from_polar(1.0, 2.0 * TWO_PI * irr),
            c(1.0, 0.0),
        ]));
        assert_eq!(finite_order(&ProjectiveMap::new(d).unwrap(), 64, 1e-8), None);
    }

    #[test]
    fn json_round_trip() {
        let q = HermitianQuadric::standard(1, 0).unwrap();
        let s = serde_json::to_string(&q).unwrap();
        assert!(s.starts_with("[[[1.0,0.0]"));
        let back: HermitianQuadric = serde_json::from_str(&s).unwrap();
        assert_eq!(back.matrix(), q.matrix());
    }
}
