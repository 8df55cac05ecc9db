//! Dense helpers shared by the solvers.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Dyn, SVD};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex<f64>>;
pub type C64 = Complex<f64>;

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn zeros(r: usize, c: usize) -> Mat {
    Mat::zeros(r, c)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn diag(d: &[f64]) -> Mat {
    Mat::from_diagonal(&DVector::from_column_slice(d))
}

pub fn from_rows(rows: &[&[f64]]) -> Mat {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

/// Horizontal concatenation. Blocks must share the row count.
pub fn hcat(blocks: &[&Mat]) -> Mat {
    let r = blocks.iter().map(|b| b.nrows()).max().unwrap_or(0);
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(r, c);
    let mut j = 0;
    for b in blocks {
        if b.ncols() > 0 {
            assert_eq!(b.nrows(), r, "hcat row mismatch");
            out.view_mut((0, j), (r, b.ncols())).copy_from(*b);
        }
        j += b.ncols();
    }
    out
}

pub fn vcat(blocks: &[&Mat]) -> Mat {
    let c = blocks.iter().map(|b| b.ncols()).max().unwrap_or(0);
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(r, c);
    let mut i = 0;
    for b in blocks {
        if b.nrows() > 0 {
            assert_eq!(b.ncols(), c, "vcat column mismatch");
            out.view_mut((i, 0), (b.nrows(), c)).copy_from(*b);
        }
        i += b.nrows();
    }
    out
}

/// Block matrix from explicit row and column sizes, so empty blocks are fine.
pub fn block(rows: &[usize], cols: &[usize], blocks: &[&[&Mat]]) -> Mat {
    let mut out = Mat::zeros(rows.iter().sum(), cols.iter().sum());
    let mut i0 = 0;
    for (bi, &r) in rows.iter().enumerate() {
        let mut j0 = 0;
        for (bj, &c) in cols.iter().enumerate() {
            let b = blocks[bi][bj];
            if r > 0 && c > 0 {
                assert_eq!((b.nrows(), b.ncols()), (r, c), "block ({bi},{bj}) has wrong shape");
                out.view_mut((i0, j0), (r, c)).copy_from(b);
            }
            j0 += c;
        }
        i0 += r;
    }
    out
}

pub fn blockdiag(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut(a.shape(), b.shape()).copy_from(b);
    out
}

pub fn sub(m: &Mat, r0: usize, c0: usize, r: usize, c: usize) -> Mat {
    m.view((r0, c0), (r, c)).into_owned()
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub fn cmax_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.norm()))
}

pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// SVD with `U` and `Vᵀ`, checked by reconstruction. The plain
/// Golub–Kahan result is occasionally inaccurate; the adjoint and then
/// seeded random orthogonal rotations of the matrix are tried in turn and
/// the most accurate decomposition is kept.
pub fn checked_svd<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> SVD<T, Dyn, Dyn> {
    use rand::{Rng, SeedableRng};
    let (r, c) = m.shape();
    let tol = 100.0 * f64::EPSILON * r.max(c) as f64 * m.norm();
    let error = |d: &SVD<T, Dyn, Dyn>| -> f64 {
        let (Some(u), Some(vt)) = (&d.u, &d.v_t) else { return f64::INFINITY };
        (u * DMatrix::from_diagonal(&d.singular_values.map(T::from_real)) * vt - m).norm()
    };
    let mut best = m.clone().svd(true, true);
    let mut best_err = error(&best);
    if best_err <= tol {
        return best;
    }
    let mut consider = |cand: SVD<T, Dyn, Dyn>| -> bool {
        let e = error(&cand);
        if e < best_err {
            best = cand;
            best_err = e;
        }
        best_err <= tol
    };
    let t = m.adjoint().svd(true, true);
    let flipped =
        SVD { u: t.v_t.as_ref().map(|v| v.adjoint()), v_t: t.u.as_ref().map(|u| u.adjoint()), singular_values: t.singular_values };
    if !consider(flipped) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5bd);
        for _ in 0..8 {
            let q = Mat::from_fn(r, r, |_, _| rng.random_range(-1.0..1.0)).qr().q().map(T::from_real);
            let p = Mat::from_fn(c, c, |_, _| rng.random_range(-1.0..1.0)).qr().q().map(T::from_real);
            let d = (q.adjoint() * m * &p).svd(true, true);
            let cand = SVD { u: d.u.map(|u| &q * u), v_t: d.v_t.map(|vt| vt * p.adjoint()), singular_values: d.singular_values };
            if consider(cand) {
                break;
            }
        }
    }
    best
}

pub fn norm2(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    checked_svd(m).singular_values.max()
}

pub fn cnorm2(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    checked_svd(m).singular_values.max()
}

/// Singular values in decreasing order.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    csingular_values(m)
}

pub fn csingular_values<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Vec<f64> {
    if m.is_empty() {
        return vec![];
    }
    let mut s: Vec<f64> = checked_svd(m).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Minimum eigenvalue of the symmetric part. `+inf` for an empty matrix.
pub fn min_eig_sym(m: &Mat) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    sym(m).symmetric_eigenvalues().min()
}

pub fn eigenvalues(m: &Mat) -> Vec<C64> {
    if m.is_empty() {
        return vec![];
    }
    let (_, t) = complex_schur(m);
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Complex Schur form `m = Q T Q*`. The QR iteration is capped; on a stall
/// the matrix is rotated by a seeded random orthogonal similarity and retried.
pub fn complex_schur(m: &Mat) -> (CMat, CMat) {
    use rand::{Rng, SeedableRng};
    let n = m.nrows();
    let cm = to_complex(m);
    let cap = 200 * n.max(1);
    if let Some(s) = cm.clone().try_schur(f64::EPSILON, cap) {
        return tidy_schur(s.unpack());
    }
    // a random unitary similarity breaks shift stagnation; clustered
    // eigenvalues may also need a slightly looser deflation threshold
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5c4u64);
    for eps in [f64::EPSILON, 16.0 * f64::EPSILON, 256.0 * f64::EPSILON] {
        for _ in 0..4 {
            let g = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let q0 = to_complex(&g.qr().q());
            let rotated = q0.adjoint() * &cm * &q0;
            if let Some(s) = rotated.try_schur(eps, cap) {
                let (q, t) = s.unpack();
                return tidy_schur((q0 * q, t));
            }
        }
    }
    panic!("complex Schur iteration failed to converge");
}

fn tidy_schur((q, mut t): (CMat, CMat)) -> (CMat, CMat) {
    for i in 0..t.nrows() {
        for j in 0..i {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    (q, t)
}

pub fn spectral_abscissa(m: &Mat) -> f64 {
    eigenvalues(m).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn spectral_radius(m: &Mat) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Numerical rank: count of singular values above `n·σ₁·1e-12`.
pub fn rank(m: &Mat) -> usize {
    let s = singular_values(m);
    rank_of(&s, m.nrows().max(m.ncols()))
}

fn rank_of(s: &[f64], n: usize) -> usize {
    match s.first() {
        None => 0,
        Some(&0.0) => 0,
        Some(&s1) => s.iter().filter(|&&x| x > n as f64 * s1 * 1e-12).count(),
    }
}

/// Orthonormal basis for the span of singular directions above `thr`.
pub fn orth_above(m: &Mat, thr: f64) -> Mat {
    if m.is_empty() {
        return Mat::zeros(m.nrows(), 0);
    }
    let svd = checked_svd(m);
    let u = svd.u.unwrap();
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > thr).collect();
    Mat::from_fn(m.nrows(), keep.len(), |i, k| u[(i, keep[k])])
}

/// Orthonormal basis for the column range, via SVD.
pub fn orth(m: &Mat) -> Mat {
    if m.is_empty() {
        return Mat::zeros(m.nrows(), 0);
    }
    let svd = checked_svd(m);
    let u = svd.u.unwrap();
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let r = rank_of(&s, m.nrows().max(m.ncols()));
    let mut q = Mat::zeros(m.nrows(), r);
    for (k, &i) in idx.iter().take(r).enumerate() {
        q.set_column(k, &u.column(i));
    }
    q
}

/// Orthonormal basis for the null space.
pub fn null_space(m: &Mat) -> Mat {
    let n = m.ncols();
    if m.nrows() == 0 {
        return eye(n);
    }
    // pad to square so the SVD returns a full right basis
    let padded = if m.nrows() < n { vcat(&[m, &zeros(n - m.nrows(), n)]) } else { m.clone() };
    let svd = checked_svd(&padded);
    let vt = svd.v_t.unwrap();
    let s = &svd.singular_values;
    let s1 = s.max();
    let tol = n.max(m.nrows()) as f64 * s1 * 1e-12;
    let cols: Vec<usize> = (0..s.len()).filter(|&i| s1 == 0.0 || s[i] <= tol).collect();
    let mut out = Mat::zeros(n, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        out.set_column(k, &vt.row(i).transpose());
    }
    out
}

/// Range and kernel bases of a square matrix, split at the same rank.
pub fn range_and_kernel(m: &Mat) -> (Mat, Mat) {
    let n = m.nrows();
    if n == 0 {
        return (Mat::zeros(0, 0), Mat::zeros(0, 0));
    }
    let svd = checked_svd(m);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let r = rank_of(&s, n);
    let mut range = Mat::zeros(n, r);
    let mut ker = Mat::zeros(n, n - r);
    for (k, &i) in idx.iter().enumerate() {
        if k < r {
            range.set_column(k, &u.column(i));
        } else {
            ker.set_column(k - r, &vt.row(i).transpose());
        }
    }
    (range, ker)
}

pub fn cond(m: &Mat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(a), Some(b)) if *b > 0.0 => a / b,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

pub fn inverse(m: &Mat) -> Result<Mat> {
    if m.is_empty() {
        return Ok(m.clone());
    }
    let c = cond(m);
    if !c.is_finite() || c > 1e14 {
        return Err(Error::Singular(format!("condition number {c:.3e}")));
    }
    m.clone().try_inverse().ok_or_else(|| Error::Singular("LU failed".into()))
}

/// Solve `m x = rhs`.
pub fn solve(m: &Mat, rhs: &Mat) -> Result<Mat> {
    if m.is_empty() {
        return Ok(Mat::zeros(0, rhs.ncols()));
    }
    let c = cond(m);
    if !c.is_finite() || c > 1e14 {
        return Err(Error::Singular(format!("condition number {c:.3e}")));
    }
    m.clone().lu().solve(rhs).ok_or_else(|| Error::Singular("LU failed".into()))
}

/// Symmetric square root; `pow = 0.5` or `-0.5`, needs a positive spectrum
/// (for `-0.5`) or a nonnegative one (for `0.5`).
pub fn sym_pow(m: &Mat, pow: f64) -> Result<Mat> {
    let n = m.nrows();
    if n == 0 {
        return Ok(m.clone());
    }
    let e = sym(m).symmetric_eigen();
    let scale = 1.0 + e.eigenvalues.amax();
    let mut d = e.eigenvalues.clone();
    for x in d.iter_mut() {
        if *x < -1e-12 * scale || (pow < 0.0 && *x <= 0.0) {
            return Err(Error::Definiteness { condition: "positive definite".into(), eigenvalue: *x });
        }
        *x = x.max(0.0).powf(pow);
    }
    let v = &e.eigenvectors;
    Ok(sym(&(v * Mat::from_diagonal(&d) * v.transpose())))
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Complex Schur form `m = Q T Q*` with eigenvalues selected by `pick` moved
/// to the leading block. Returns `(Q, T, count)`.
pub fn ordered_schur(m: &Mat, pick: impl Fn(C64) -> bool) -> (CMat, CMat, usize) {
    let n = m.nrows();
    let (mut q, mut t) = complex_schur(m);
    let mut count = 0;
    for i in 0..n {
        if pick(t[(i, i)]) {
            let mut k = i;
            while k > count {
                swap_adjacent(&mut q, &mut t, k - 1);
                k -= 1;
            }
            count += 1;
        }
    }
    (q, t, count)
}

/// Exchange the diagonal entries at positions k and k+1 of an upper
/// triangular T with a Givens rotation.
fn swap_adjacent(q: &mut CMat, t: &mut CMat, k: usize) {
    let n = t.nrows();
    let a = t[(k, k)];
    let b = t[(k, k + 1)];
    let c = t[(k + 1, k + 1)];
    let y = c - a;
    let r = (b.norm_sqr() + y.norm_sqr()).sqrt();
    if r == 0.0 {
        return;
    }
    let cs = b / r;
    let sn = y / r;
    for j in 0..n {
        let t1 = t[(k, j)];
        let t2 = t[(k + 1, j)];
        t[(k, j)] = cs.conj() * t1 + sn.conj() * t2;
        t[(k + 1, j)] = -sn * t1 + cs * t2;
    }
    for i in 0..n {
        let t1 = t[(i, k)];
        let t2 = t[(i, k + 1)];
        t[(i, k)] = t1 * cs + t2 * sn;
        t[(i, k + 1)] = -t1 * sn.conj() + t2 * cs.conj();
        let q1 = q[(i, k)];
        let q2 = q[(i, k + 1)];
        q[(i, k)] = q1 * cs + q2 * sn;
        q[(i, k + 1)] = -q1 * sn.conj() + q2 * cs.conj();
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A matrix on which the unchecked decomposition reconstructs with an
    /// error near 1e-2.
    fn hard_svd_case() -> Mat {
        from_rows(&[
            &[
                -3.3243479187825335e-16,
                -2.220446049250313e-16,
                -1.0000000000000002e0,
                5.043772168445189e-1,
                -5.426475980910517e-1,
                -5.61170338838325e-17,
            ],
            &[8.473039977974217e-17, -2.0483030899258073e-16, 4.202878610724539e-15, -2.938491796707601e-19, 0e0, -2.6364852244069703e-14],
            &[
                -8.73110521288704e-1,
                -4.529750217326258e-1,
                3.0214338445619055e-16,
                -8.049004754152932e-17,
                -5.376206475193853e-17,
                -2.421228147834989e-1,
            ],
            &[
                3.592022365692392e-2,
                3.0895932434252626e-1,
                -5.634487394856764e-16,
                -1.3305893851798226e-16,
                -8.887463092548264e-17,
                -4.0025575471869407e-1,
            ],
            &[
                -4.8619723893436956e-1,
                8.362761299882573e-1,
                3.2979748878617293e-16,
                -2.1015202553878392e-16,
                -1.4036774917964563e-16,
                -6.321601429002874e-1,
            ],
            &[-1.0842021724855044e-19, 0e0, -9.727721585715244e-15, -2.29643133912699e-16, 5.551475527040865e-16, -1.1390979130635358e-14],
        ])
    }

    #[test]
    fn checked_svd_reconstructs() {
        let m = hard_svd_case();
        let d = checked_svd(&m);
        let rec = d.u.as_ref().unwrap() * Mat::from_diagonal(&d.singular_values) * d.v_t.as_ref().unwrap();
        assert!(max_abs(&(rec - &m)) < 1e-13);
        // rows 2 and 6 are numerically zero, so the range misses them
        let q = orth(&m);
        assert_eq!(q.ncols(), 4);
        assert!(q.row(1).amax() < 1e-12 && q.row(5).amax() < 1e-12);
    }

    #[test]
    fn ordered_schur_moves_stable_block_first() {
        let m = from_rows(&[&[3.0, 1.0, 0.0], &[0.0, -1.0, 2.0], &[1.0, 0.0, -4.0]]);
        let (q, t, k) = ordered_schur(&m, |z| z.re < 0.0);
        assert_eq!(k, 2);
        for i in 0..3 {
            assert_eq!(t[(i, i)].re < 0.0, i < 2);
        }
        let back = &q * &t * q.adjoint();
        assert!(cmax_abs(&(back - to_complex(&m))) < 1e-12);
        let id = q.adjoint() * &q;
        assert!(cmax_abs(&(id - CMat::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn rank_and_orth() {
        let m = from_rows(&[&[1.0, 2.0], &[2.0, 4.0], &[0.0, 0.0]]);
        assert_eq!(rank(&m), 1);
        let q = orth(&m);
        assert_eq!(q.ncols(), 1);
        assert!((q.norm() - 1.0).abs() < 1e-14);
        let ns = null_space(&m);
        assert_eq!(ns.ncols(), 1);
        assert!(max_abs(&(&m * &ns)) < 1e-14);
    }

    #[test]
    fn sym_pow_roundtrip() {
        let m = from_rows(&[&[4.0, 1.0], &[1.0, 3.0]]);
        let r = sym_pow(&m, 0.5).unwrap();
        assert!(max_abs(&(&r * &r - &m)) < 1e-13);
        let ri = sym_pow(&m, -0.5).unwrap();
        assert!(max_abs(&(&r * &ri - eye(2))) < 1e-13);
        assert!(sym_pow(&from_rows(&[&[-1.0]]), 0.5).is_err());
    }

    #[test]
    fn block_with_empty_pieces() {
        let a = from_rows(&[&[1.0]]);
        let e = zeros(1, 0);
        let et = zeros(0, 1);
        let z = zeros(0, 0);
        let m = block(&[1, 0], &[1, 0], &[&[&a, &e], &[&et, &z]]);
        assert_eq!(m.shape(), (1, 1));
    }
}
