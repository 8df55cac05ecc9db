//! Algebraic Riccati and Lyapunov solvers, system norms, and the H∞
//! solvability test.

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::linalg::*;
use crate::plant::GeneralizedPlant;
use crate::structured::{resolvent_transfer, StructuredRealization};

pub const TAU_RIC: f64 = 1e-9;
/// Relative distance from the imaginary axis treated as "on" it.
pub const IMAG_AXIS_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub x: Mat,
    pub residual: f64,
    pub closed_loop_abscissa: f64,
}

fn are_residual(a: &Mat, g: &Mat, q: &Mat, x: &Mat) -> Mat {
    a.transpose() * x + x * a - x * g * x + q
}

/// Stabilizing solution of `AᵀX + XA − XGX + Q = 0` from the stable
/// invariant subspace of `[[A, −G], [−Q, −Aᵀ]]`.
pub fn solve_are(a: &Mat, g: &Mat, q: &Mat) -> Result<RiccatiSolution> {
    let n = a.nrows();
    if g.shape() != (n, n) || q.shape() != (n, n) {
        return Err(Error::Dimension("Riccati data".into()));
    }
    if n == 0 {
        return Ok(RiccatiSolution { x: zeros(0, 0), residual: 0.0, closed_loop_abscissa: f64::NEG_INFINITY });
    }
    let h = block(&[n, n], &[n, n], &[&[a, &(-g)], &[&(-q), &(-a.transpose())]]);
    let hn = norm2(&h);
    let axis = IMAG_AXIS_TOL * hn.max(f64::MIN_POSITIVE);
    let (qs, t, k) = ordered_schur(&h, |z| z.re < 0.0);
    let closest = (0..2 * n).map(|i| t[(i, i)].re.abs()).fold(f64::INFINITY, f64::min);
    if closest < axis {
        return Err(Error::ImaginaryAxis(closest));
    }
    if k != n {
        return Err(Error::NotStabilizing(format!("{k} stable eigenvalues, need {n}")));
    }
    let u1 = qs.view((0, 0), (n, n)).into_owned();
    let u2 = qs.view((n, 0), (n, n)).into_owned();
    let sv = csingular_values(&u1);
    let (smax, smin) = (sv[0], sv[n - 1]);
    if smin <= 1e-12 * smax {
        return Err(Error::Conditioning(format!("stable subspace basis has condition {:.3e}", smax / smin)));
    }
    let xt = u1.transpose().lu().solve(&u2.transpose()).ok_or_else(|| Error::Conditioning("singular U11".into()))?;
    let mut x = sym(&xt.transpose().map(|z| z.re));
    let mut res = are_residual(a, g, q, &x).norm();
    // Newton refinement on the Lyapunov form of the residual
    for _ in 0..3 {
        let bound = TAU_RIC * (1.0 + x.norm()).powi(2);
        if res < 1e-3 * bound {
            break;
        }
        let ac = a - g * &x;
        let r = are_residual(a, g, q, &x);
        let dx = match solve_lyapunov(&ac.transpose(), &r) {
            Ok(dx) => dx,
            Err(_) => break,
        };
        let cand = sym(&(&x + dx));
        let cres = are_residual(a, g, q, &cand).norm();
        if cres < res {
            x = cand;
            res = cres;
        } else {
            break;
        }
    }
    let abscissa = spectral_abscissa(&(a - g * &x));
    if abscissa >= 0.0 {
        return Err(Error::NotStabilizing(format!("closed-loop abscissa {abscissa:.3e}")));
    }
    if res >= TAU_RIC * (1.0 + x.norm()).powi(2) {
        return Err(Error::Conditioning(format!("Riccati residual {res:.3e}")));
    }
    Ok(RiccatiSolution { x, residual: res, closed_loop_abscissa: abscissa })
}

/// `AᵀX + XA − XBR⁻¹BᵀX + Q = 0`, stabilizing.
pub fn solve_care(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Result<RiccatiSolution> {
    if min_eig_sym(r) <= 0.0 {
        return Err(Error::Definiteness { condition: "R ≻ 0".into(), eigenvalue: min_eig_sym(r) });
    }
    let g = b * solve(r, &b.transpose())?;
    solve_are(a, &sym(&g), q)
}

/// `AP + PAᵀ + W = 0` for Hurwitz A.
pub fn solve_lyapunov(a: &Mat, w: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    let abscissa = spectral_abscissa(a);
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz(abscissa));
    }
    let (q, t) = complex_schur(a);
    let f = -(q.adjoint() * to_complex(w) * &q);
    let mut y = CMat::zeros(n, n);
    for j in (0..n).rev() {
        let mut rhs = f.column(j).into_owned();
        for k in (j + 1)..n {
            let c = t[(j, k)].conj();
            for i in 0..n {
                rhs[i] -= c * y[(i, k)];
            }
        }
        let shift = t[(j, j)].conj();
        // back substitution on (T + shift·I)
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for l in (i + 1)..n {
                acc -= t[(i, l)] * y[(l, j)];
            }
            y[(i, j)] = acc / (t[(i, i)] + shift);
        }
    }
    let p = (&q * y * q.adjoint()).map(|z| z.re);
    Ok(sym(&p))
}

pub fn h2_norm(real: &StructuredRealization) -> Result<f64> {
    let dmax = max_abs(real.d());
    if dmax > 1e-12 {
        return Err(Error::NonzeroD(dmax));
    }
    if real.n() == 0 {
        return Ok(0.0);
    }
    let p = solve_lyapunov(real.a(), &(real.b() * real.b().transpose()))?;
    let tr = (real.c() * p * real.c().transpose()).trace();
    Ok(tr.max(0.0).sqrt())
}

fn sigma_max_at(real: &StructuredRealization, w: f64) -> Result<f64> {
    let g = resolvent_transfer(real.a(), real.b(), real.c(), real.d(), Complex::new(0.0, w))?;
    Ok(cnorm2(&g))
}

/// Frequencies of imaginary-axis eigenvalues of the bounded-real
/// Hamiltonian at level γ (empty means γ exceeds the norm).
fn bounded_real_crossings(real: &StructuredRealization, gamma: f64) -> Result<Vec<f64>> {
    let (a, b, c, d) = (real.a(), real.b(), real.c(), real.d());
    let (n, m, p) = (real.n(), real.m(), real.p());
    let r = eye(m) * (gamma * gamma) - d.transpose() * d;
    let ri = inverse(&r)?;
    let ae = a + b * &ri * d.transpose() * c;
    let top_right = b * &ri * b.transpose();
    let bottom_left = -(c.transpose() * (eye(p) + d * &ri * d.transpose()) * c);
    let h = block(&[n, n], &[n, n], &[&[&ae, &top_right], &[&bottom_left, &(-ae.transpose())]]);
    let tol = IMAG_AXIS_TOL * norm2(&h);
    Ok(eigenvalues(&h).into_iter().filter(|z| z.re.abs() < tol).map(|z| z.im.abs()).collect())
}

/// Largest gain seen at the Hamiltonian crossings and between consecutive
/// crossings, when it exceeds `gamma`. Evaluating the gain rejects
/// near-axis eigenvalues of flat responses that do not cross the level.
fn exceeds(real: &StructuredRealization, gamma: f64) -> Result<Option<f64>> {
    let mut ws = bounded_real_crossings(real, gamma)?;
    if ws.is_empty() {
        return Ok(None);
    }
    ws.sort_by(f64::total_cmp);
    let mut probes = ws.clone();
    probes.extend(ws.windows(2).map(|p| 0.5 * (p[0] + p[1])));
    let mut peak: f64 = 0.0;
    for w in probes {
        peak = peak.max(sigma_max_at(real, w)?);
    }
    Ok((peak > gamma).then_some(peak))
}

/// H∞ norm by bisection on the bounded-real Hamiltonian; relative
/// accuracy `tol`.
pub fn hinf_norm(real: &StructuredRealization, tol: f64) -> Result<f64> {
    let sd = norm2(real.d());
    if real.n() == 0 {
        return Ok(sd);
    }
    let abscissa = spectral_abscissa(real.a());
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz(abscissa));
    }
    let eigs = eigenvalues(real.a());
    let lo_mag = eigs.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min).max(1e-6);
    let hi_mag = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(lo_mag);
    let mut freqs = vec![0.0];
    let (l0, l1) = ((0.01 * lo_mag).ln(), (100.0 * hi_mag).ln());
    for i in 0..19 {
        freqs.push((l0 + (l1 - l0) * i as f64 / 18.0).exp());
    }
    freqs.extend(eigs.iter().map(|z| z.im.abs()));
    let mut lo = sd;
    for &w in &freqs {
        lo = lo.max(sigma_max_at(real, w)?);
    }
    if lo == 0.0 {
        return Ok(0.0);
    }
    let mut hi = 2.0 * lo;
    while let Some(peak) = exceeds(real, hi)? {
        lo = lo.max(peak);
        hi = 2.0 * peak.max(hi);
        if !hi.is_finite() {
            return Err(Error::NoConvergence("H∞ bracket".into()));
        }
    }
    while hi - lo > tol * lo {
        let mid = 0.5 * (lo + hi);
        match exceeds(real, mid)? {
            Some(peak) => lo = peak.min(hi).max(mid),
            None => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Stabilizing solutions of the two H∞ Riccati equations at level γ.
#[derive(Debug, Clone)]
pub struct HinfRiccati {
    pub x: RiccatiSolution,
    pub y: RiccatiSolution,
}

pub fn hinf_riccati_x(plant: &GeneralizedPlant, gamma: f64) -> Result<RiccatiSolution> {
    let g2 = gamma.powi(-2);
    let g = &plant.b2 * plant.b2.transpose() - &plant.b1 * plant.b1.transpose() * g2;
    solve_are(&plant.a, &sym(&g), &(plant.c1.transpose() * &plant.c1))
}

pub fn hinf_riccati_y(plant: &GeneralizedPlant, gamma: f64) -> Result<RiccatiSolution> {
    let g2 = gamma.powi(-2);
    let g = plant.c2.transpose() * &plant.c2 - plant.c1.transpose() * &plant.c1 * g2;
    solve_are(&plant.a.transpose(), &sym(&g), &(&plant.b1 * plant.b1.transpose()))
}

/// Classical sub-optimal H∞ test: both Riccati equations have stabilizing
/// solutions X, Y ⪰ 0 with ρ(XY) < γ².
pub fn hinf_solvable(plant: &GeneralizedPlant, gamma: f64) -> Result<bool> {
    plant.check_dgkf()?;
    if !(gamma > 0.0) {
        return Ok(false);
    }
    let x = match hinf_riccati_x(plant, gamma) {
        Ok(x) => x,
        Err(Error::ImaginaryAxis(_) | Error::NotStabilizing(_) | Error::Conditioning(_) | Error::Singular(_)) => return Ok(false),
        Err(e) => return Err(e),
    };
    let y = match hinf_riccati_y(plant, gamma) {
        Ok(y) => y,
        Err(Error::ImaginaryAxis(_) | Error::NotStabilizing(_) | Error::Conditioning(_) | Error::Singular(_)) => return Ok(false),
        Err(e) => return Err(e),
    };
    let psd_ok = |m: &Mat| min_eig_sym(m) > -1e-9 * (1.0 + norm2(m));
    if !psd_ok(&x.x) || !psd_ok(&y.x) {
        return Ok(false);
    }
    Ok(psd_product_radius(&x.x, &y.x) < gamma * gamma)
}

/// `ρ(XY)` for symmetric positive semidefinite `X`, `Y`, computed as the
/// largest eigenvalue of `X^{1/2} Y X^{1/2}`.
fn psd_product_radius(x: &Mat, y: &Mat) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    let e = sym(x).symmetric_eigen();
    let d = e.eigenvalues.map(|l| l.max(0.0).sqrt());
    let xh = &e.eigenvectors * Mat::from_diagonal(&d) * e.eigenvectors.transpose();
    let m = sym(&(&xh * y * &xh));
    m.symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::embed_problem2;

    fn scalar(x: f64) -> Mat {
        from_rows(&[&[x]])
    }

    #[test]
    fn scalar_care_cases() {
        let s = solve_care(&scalar(0.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert!((s.x[(0, 0)] - 1.0).abs() < 1e-12);
        let s = solve_care(&scalar(1.0), &scalar(1.0), &scalar(0.0), &scalar(1.0)).unwrap();
        assert!((s.x[(0, 0)] - 2.0).abs() < 1e-12);
        assert!(s.closed_loop_abscissa < 0.0);
    }

    #[test]
    fn lossless_care_gives_identity() {
        let a = from_rows(&[&[0.0, 2.0, 0.0], &[-2.0, 0.0, 1.0], &[0.0, -1.0, 0.0]]);
        let b = from_rows(&[&[1.0], &[0.0], &[0.5]]);
        let s = solve_care(&a, &b, &(&b * b.transpose()), &eye(1)).unwrap();
        assert!(max_abs(&(&s.x - eye(3))) < 1e-10);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn imaginary_axis_reported() {
        // A = 0, B = 0: Hamiltonian is zero
        let r = solve_care(&scalar(0.0), &scalar(0.0), &scalar(1.0), &scalar(1.0));
        assert!(matches!(r, Err(Error::ImaginaryAxis(_)) | Err(Error::NotStabilizing(_))));
    }

    #[test]
    fn lyapunov_cases() {
        let p = solve_lyapunov(&scalar(-1.0), &scalar(2.0)).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-14);
        let p = solve_lyapunov(&(-eye(2)), &eye(2)).unwrap();
        assert!(max_abs(&(p - eye(2) * 0.5)) < 1e-14);
        let a = from_rows(&[&[-1.0, 1.0], &[0.0, -2.0]]);
        let p = solve_lyapunov(&a, &eye(2)).unwrap();
        let r = &a * &p + &p * a.transpose() + eye(2);
        assert!(r.norm() < 1e-10 * (1.0 + p.norm()));
        // independent oracle: solve the 3 unknowns p11, p12, p22 directly
        let m = from_rows(&[&[-2.0, 2.0, 0.0], &[0.0, -3.0, 1.0], &[0.0, 0.0, -4.0]]);
        let sol = solve(&m, &from_rows(&[&[-1.0], &[0.0], &[-1.0]])).unwrap();
        assert!((p[(0, 0)] - sol[0]).abs() < 1e-13);
        assert!((p[(0, 1)] - sol[1]).abs() < 1e-13);
        assert!((p[(1, 1)] - sol[2]).abs() < 1e-13);
        assert!(matches!(solve_lyapunov(&scalar(1.0), &scalar(1.0)), Err(Error::NotHurwitz(_))));
    }

    fn first_order(a: f64) -> StructuredRealization {
        StructuredRealization::new(scalar(-a), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap()
    }

    #[test]
    fn norms_of_first_order_lag() {
        let g = first_order(1.0);
        assert!((h2_norm(&g).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((hinf_norm(&g, 1e-10).unwrap() - 1.0).abs() < 1e-9);
        let z = StructuredRealization::new(scalar(-1.0), scalar(1.0), scalar(0.0), scalar(0.0)).unwrap();
        assert_eq!(h2_norm(&z).unwrap(), 0.0);
        let s = StructuredRealization::new(zeros(0, 0), zeros(0, 1), zeros(1, 0), scalar(3.0)).unwrap();
        assert_eq!(hinf_norm(&s, 1e-9).unwrap(), 3.0);
        let d = StructuredRealization::new(scalar(-1.0), scalar(1.0), scalar(1.0), scalar(1.0)).unwrap();
        assert!(matches!(h2_norm(&d), Err(Error::NonzeroD(_))));
    }

    #[test]
    fn damped_resonator_peak() {
        let a = from_rows(&[&[0.0, 1.0], &[-1.0, -0.1]]);
        let g = StructuredRealization::new(a, from_rows(&[&[0.0], &[1.0]]), from_rows(&[&[1.0, 0.0]]), scalar(0.0)).unwrap();
        let expect = 1.0 / (0.1 * (1.0f64 - 0.0025).sqrt());
        assert!((hinf_norm(&g, 1e-10).unwrap() - expect).abs() < 1e-6 * expect);
    }

    #[test]
    fn integrator_hinf_threshold() {
        let one = eye(1);
        let g = embed_problem2(&zeros(1, 1), &one, &one);
        assert!(!hinf_solvable(&g, 1.0).unwrap());
        assert!(hinf_solvable(&g, 2.0).unwrap());
        let gamma: f64 = 1.5;
        assert!(hinf_solvable(&g, gamma).unwrap());
        let x = hinf_riccati_x(&g, gamma).unwrap();
        assert!((x.x[(0, 0)] - gamma / (gamma * gamma - 1.0).sqrt()).abs() < 1e-10);
    }
}
