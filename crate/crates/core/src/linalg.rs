//! Small dense complex linear algebra on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Singular values (descending) and right singular vectors (as columns, same
/// order) of `a`. Wide matrices are padded with zero rows so that the full
/// right singular basis is always returned.
pub fn right_singular(a: &CMat) -> (Vec<f64>, CMat) {
    let (m, k) = a.shape();
    let padded = if m < k {
        let mut p = CMat::zeros(k, k);
        p.view_mut((0, 0), (m, k)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = CMat::zeros(k, k);
    for (col, &i) in idx.iter().enumerate() {
        for r in 0..k {
            v[(r, col)] = vt[(i, r)].conj();
        }
    }
    (sv, v)
}

/// Unit vector minimizing `|a x|`, with all singular values.
pub fn null_vector(a: &CMat) -> (CVec, Vec<f64>) {
    let (sv, v) = right_singular(a);
    let k = v.ncols();
    (v.column(k - 1).into_owned(), sv)
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    let mut sv: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Numerical rank with threshold `rel * sigma_max`.
pub fn rank(a: &CMat, rel: f64) -> usize {
    let sv = singular_values(a);
    let Some(&top) = sv.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel * top).count()
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let sym = (h + h.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Eigenvalues of a general complex matrix: shifted QR on the Hessenberg
/// form, splitting at negligible subdiagonals. (nalgebra's complex Schur
/// stalls on nearly diagonal input with repeated eigenvalues.)
pub fn eigenvalues(a: &CMat) -> Vec<C64> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    let h = a.clone().hessenberg().h();
    let mut out = Vec::with_capacity(n);
    qr_eigen(h, &mut out);
    out
}

fn negligible(h: &CMat, k: usize) -> bool {
    let scale = h[(k - 1, k - 1)].norm() + h[(k, k)].norm();
    let scale = if scale == 0.0 { frobenius(h) } else { scale };
    h[(k, k - 1)].norm() <= f64::EPSILON * scale
}

fn qr_eigen(mut h: CMat, out: &mut Vec<C64>) {
    let n = h.nrows();
    if n == 1 {
        out.push(h[(0, 0)]);
        return;
    }
    for iter in 0..60 * n {
        if let Some(k) = (1..n).rev().find(|&k| negligible(&h, k)) {
            qr_eigen(h.view((0, 0), (k, k)).into_owned(), out);
            qr_eigen(h.view((k, k), (n - k, n - k)).into_owned(), out);
            return;
        }
        let (p, q) = (n - 2, n - 1);
        let (a, b, cc, d) = (h[(p, p)], h[(p, q)], h[(q, p)], h[(q, q)]);
        let half = (a - d) * 0.5;
        let disc = (half * half + b * cc).sqrt();
        let (m1, m2) = ((a + d) * 0.5 + disc, (a + d) * 0.5 - disc);
        let mut mu = if (m1 - d).norm() < (m2 - d).norm() { m1 } else { m2 };
        if iter % 11 == 10 {
            // exceptional shift
            mu = d + c(0.75, 0.35) * h[(q, p)].norm();
        }
        let shifted = &h - CMat::identity(n, n) * mu;
        let qr = shifted.qr();
        h = qr.r() * qr.q() + CMat::identity(n, n) * mu;
    }
    out.extend((0..n).map(|i| h[(i, i)]));
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.norm()).sum::<f64>();
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * c(scale, 0.0);
    let mut term = CMat::identity(n, n);
    let mut sum = CMat::identity(n, n);
    for k in 1..=20 {
        term = &term * &x * c(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormal basis (columns) of the kernel of the row functional `a`,
/// i.e. of `{v : sum_i a_i v_i = 0}`.
pub fn functional_kernel(a: &[C64]) -> CMat {
    let row = CMat::from_row_slice(1, a.len(), a);
    let (_, v) = right_singular(&row);
    v.columns(1, a.len() - 1).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_vector_of_rank_deficient() {
        let a = CMat::from_row_slice(2, 3, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let (v, sv) = null_vector(&a);
        assert!((&a * &v).norm() < 1e-14);
        assert!(sv[2] < 1e-14);
    }

    #[test]
    fn expm_of_nilpotent() {
        let mut a = CMat::zeros(3, 3);
        a[(1, 2)] = c(0.0, 2.0 * std::f64::consts::PI);
        let e = expm(&a);
        let mut want = CMat::identity(3, 3);
        want[(1, 2)] = c(0.0, 2.0 * std::f64::consts::PI);
        assert!(max_abs(&(e - want)) < 1e-13);
    }

    #[test]
    fn expm_of_diagonal() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(0.0, 3.0), c(-1.0, 0.5), c(2.0, 0.0)]));
        let e = expm(&a);
        for i in 0..3 {
            assert!((e[(i, i)] - a[(i, i)].exp()).norm() < 1e-12 * a[(i, i)].exp().norm().max(1.0));
        }
    }

    #[test]
    fn kernel_is_orthogonal_to_functional() {
        let a = [c(1.0, 2.0), c(-0.5, 0.1), c(0.0, 3.0)];
        let k = functional_kernel(&a);
        assert_eq!(k.ncols(), 2);
        for j in 0..2 {
            let s: C64 = (0..3).map(|i| a[i] * k[(i, j)]).sum();
            assert!(s.norm() < 1e-14);
        }
    }

    #[test]
    fn hermitian_eigenvalues_sorted() {
        let h = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let (vals, _) = hermitian_eigen(&h);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
    }
}
