//! Controller construction and closed-loop assembly.
//!
//! Every controller acts as `u = −C_K x_K − D_K y`, `dx_K/dt = A_K x_K + B_K y`.

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::linalg::*;
use crate::plant::{GeneralizedPlant, PlantSignatures, Problem2Plant, Problem3Plant};
use crate::riccati::{hinf_norm, hinf_riccati_x, hinf_solvable, solve_care, RiccatiSolution};
use crate::structured::{
    controllable_basis, resolvent_transfer, validate_structure, ClassTag, Signature, StructuredRealization, TAU_STRUCT,
};

/// How a controller can be built as a network.
#[derive(Debug, Clone, PartialEq)]
pub enum ImplHint {
    /// A resistor of the given value across every plant port.
    TerminateResistors { ohms: f64 },
    /// A copy of the plant network with a resistor of the given value in
    /// series with every port.
    CopyNetworkPlusResistors { ohms: f64 },
    /// A network given in netlist text.
    DualNetwork { netlist: String },
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    pub impl_hint: Option<ImplHint>,
}

impl Controller {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let nk = a.nrows();
        let (nu, ny) = d.shape();
        let b = if nk == 0 { zeros(0, ny) } else { b };
        let c = if nk == 0 { zeros(nu, 0) } else { c };
        if a.ncols() != nk || b.shape() != (nk, ny) || c.shape() != (nu, nk) {
            return Err(Error::Dimension("controller blocks do not conform".into()));
        }
        Ok(Controller { a, b, c, d, impl_hint: None })
    }

    pub fn static_gain(d: Mat) -> Self {
        let (nu, ny) = d.shape();
        Controller { a: zeros(0, 0), b: zeros(0, ny), c: zeros(nu, 0), d, impl_hint: None }
    }

    pub fn with_hint(mut self, hint: ImplHint) -> Self {
        self.impl_hint = Some(hint);
        self
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// `K(s) = C_K (sI − A_K)⁻¹ B_K + D_K`; the applied law is `u = −K y`.
    pub fn transfer(&self, s: Complex<f64>) -> Result<CMat> {
        resolvent_transfer(&self.a, &self.b, &self.c, &self.d, s)
    }

    pub fn as_realization(&self) -> Result<StructuredRealization> {
        StructuredRealization::new(self.a.clone(), self.b.clone(), self.c.clone(), self.d.clone())
    }
}

/// Residual of `diag(Σ_int, Σ_K)·[−A_K −B_K; C_K D_K]` being symmetric.
pub fn controller_symmetry_residual(k: &Controller, sigma_int: &Signature, sigma_k: &Signature) -> Result<f64> {
    let (nk, ny, nu) = (k.n(), k.b.ncols(), k.c.nrows());
    if sigma_int.len() != nk || sigma_k.len() != ny || ny != nu {
        return Err(Error::Dimension("controller signature".into()));
    }
    let mm = block(&[nk, nu], &[nk, ny], &[&[&(-&k.a), &(-&k.b)], &[&k.c, &k.d]]);
    let s = sigma_int.concat(sigma_k).matrix();
    Ok(max_abs(&(&s * &mm - mm.transpose() * &s)))
}

/// Lower LFT of the plant with `u = −K y`, mapping w to z.
pub fn close_loop(plant: &GeneralizedPlant, k: &Controller) -> Result<StructuredRealization> {
    plant.check_dims()?;
    let (n, nw, nu, nz, ny) = (plant.n(), plant.nw(), plant.nu(), plant.nz(), plant.ny());
    let nk = k.n();
    if k.d.shape() != (nu, ny) || k.b.shape() != (nk, ny) || k.c.shape() != (nu, nk) {
        return Err(Error::Dimension(format!("controller is {}x{}, plant needs {}x{}", k.d.nrows(), k.d.ncols(), nu, ny)));
    }
    let w = eye(nu) + &k.d * &plant.d22;
    let ri = match inverse(&w) {
        Ok(r) => r,
        Err(_) => return Err(Error::IllPosed("I + D_K·D₂₂ is singular".into())),
    };
    // u = Ux x + Uk xk + Uw w
    let ux = -(&ri * &k.d * &plant.c2);
    let uk = -(&ri * &k.c);
    let uw = -(&ri * &k.d * &plant.d21);
    let yx = &plant.c2 + &plant.d22 * &ux;
    let yk = &plant.d22 * &uk;
    let yw = &plant.d21 + &plant.d22 * &uw;
    let a = block(&[n, nk], &[n, nk], &[&[&(&plant.a + &plant.b2 * &ux), &(&plant.b2 * &uk)], &[&(&k.b * &yx), &(&k.a + &k.b * &yk)]]);
    let b = vcat(&[&(&plant.b1 + &plant.b2 * &uw), &(&k.b * &yw)]);
    let c = hcat(&[&(&plant.c1 + &plant.d12 * &ux), &(&plant.d12 * &uk)]);
    let d = &plant.d11 + &plant.d12 * &uw;
    let b = if n + nk == 0 { zeros(0, nw) } else { b };
    let c = if n + nk == 0 { zeros(nz, 0) } else { c };
    StructuredRealization::new(a, b, c, d)
}

fn check_symmetric_plant(plant: &GeneralizedPlant, sigs: &PlantSignatures) -> Result<()> {
    let r = plant.symmetry_residual(sigs)?;
    let scale = 1.0 + max_abs(&plant.m_matrix());
    if r >= TAU_STRUCT * scale {
        return Err(Error::SymmetryResidual(r));
    }
    Ok(())
}

/// H2 controller from a single Riccati solve, using `Y = Σ_int X Σ_int`.
pub fn h2_symmetric(plant: &GeneralizedPlant, sigs: &PlantSignatures) -> Result<Controller> {
    check_symmetric_plant(plant, sigs)?;
    plant.check_dgkf()?;
    let x = solve_care(&plant.a, &plant.b2, &(plant.c1.transpose() * &plant.c1), &eye(plant.nu()))?.x;
    let s = sigs.int.matrix();
    let sk = sigs.k.matrix();
    let bb = &plant.b2 * plant.b2.transpose();
    let a_k = &plant.a - &bb * &x - &s * &x * &bb * &s;
    let b_k = -(&s * &x * &plant.b2 * &sk);
    let c_k = plant.b2.transpose() * &x;
    let k = Controller::new(a_k, b_k, c_k, zeros(plant.nu(), plant.ny()))?;
    let res = controller_symmetry_residual(&k, &sigs.int, &sigs.k)?;
    let scale = 1.0 + max_abs(&k.a).max(max_abs(&k.b)).max(max_abs(&k.c));
    if res >= 1e-8 * scale {
        return Err(Error::Internal(format!("controller symmetry residual {res:.3e}")));
    }
    Ok(k)
}

/// Standard two-Riccati H2 controller (no symmetry used).
pub fn h2_two_riccati(plant: &GeneralizedPlant) -> Result<(Controller, RiccatiSolution, RiccatiSolution)> {
    plant.check_dgkf()?;
    let x = solve_care(&plant.a, &plant.b2, &(plant.c1.transpose() * &plant.c1), &eye(plant.nu()))?;
    let y = solve_care(&plant.a.transpose(), &plant.c2.transpose(), &(&plant.b1 * plant.b1.transpose()), &eye(plant.ny()))?;
    let f = plant.b2.transpose() * &x.x;
    let l = &y.x * plant.c2.transpose();
    let a_k = &plant.a - &plant.b2 * &f - &l * &plant.c2;
    let k = Controller::new(a_k, l, f, zeros(plant.nu(), plant.ny()))?;
    Ok((k, x, y))
}

/// LQG controller for `(A, B, C)` with state weight Q, input weight R,
/// process covariance W and sensor covariance V.
pub fn lqg(a: &Mat, b: &Mat, c: &Mat, q: &Mat, r: &Mat, w: &Mat, v: &Mat) -> Result<Controller> {
    let x = solve_care(a, b, q, r)?.x;
    let y = solve_care(&a.transpose(), &c.transpose(), w, v)?.x;
    let f = solve(r, &(b.transpose() * &x))?;
    let l = &y * c.transpose() * inverse(v)?;
    Controller::new(a - b * &f - &l * c, l, f, zeros(b.ncols(), c.nrows()))
}

/// `(1 − γ⁻²λ)^(−1/2)` applied to `P = Σ X Σ X`, i.e. `Z∞^(1/2)` and its inverse.
fn z_half(x: &Mat, s: &Mat, gamma: f64) -> Result<(Mat, Mat)> {
    let n = x.nrows();
    let g2 = gamma.powi(-2);
    let p = s * x * s * x;
    let rho = spectral_radius(&p);
    if rho * g2 >= 1.0 {
        return Err(Error::Internal(format!("ρ(ΣXΣX) = {rho:.6e} ≥ γ²")));
    }
    if n == 0 {
        return Ok((zeros(0, 0), zeros(0, 0)));
    }
    if min_eig_sym(x) > 0.0 && cond(x) < 1e8 {
        let xh = sym_pow(x, 0.5)?;
        let xih = sym_pow(x, -0.5)?;
        let sm = &xh * s * &xh;
        let e = sym(&(&sm * &sm)).symmetric_eigen();
        let f = |pw: f64| -> Mat {
            let d = e.eigenvalues.map(|l| (1.0 - g2 * l.max(0.0)).powf(pw));
            &e.eigenvectors * Mat::from_diagonal(&d) * e.eigenvectors.transpose()
        };
        let zh = &xih * f(-0.5) * &xh;
        let zih = &xih * f(0.5) * &xh;
        return Ok((zh, zih));
    }
    // binomial series for (1 − t)^(∓1/2), convergent since ρ(t) < 1
    let t = &p * g2;
    let series = |alpha: f64| -> Mat {
        let mut out = eye(n);
        let mut term = eye(n);
        let mut coef = 1.0;
        for k in 1..200_000 {
            coef *= (alpha + (k - 1) as f64) / k as f64;
            term = &term * &t;
            let add = &term * coef;
            out += &add;
            if max_abs(&add) < 1e-17 * max_abs(&out) {
                break;
            }
        }
        out
    };
    // (1 − t)^(−1/2) = Σ (1/2)_k t^k / k!,  (1 − t)^(1/2) = Σ (−1/2)_k t^k / k!
    Ok((series(0.5), series(-0.5)))
}

/// Central H∞ controller at level γ, transformed by `Z∞^(1/2)` so that it
/// satisfies the controller symmetry.
pub fn hinf_symmetric(plant: &GeneralizedPlant, sigs: &PlantSignatures, gamma: f64) -> Result<Controller> {
    check_symmetric_plant(plant, sigs)?;
    plant.check_dgkf()?;
    if !hinf_solvable(plant, gamma)? {
        return Err(Error::NotSolvable(gamma));
    }
    if !hinf_solvable(plant, gamma * (1.0 - 1e-6))? {
        return Err(Error::NearOptimal { gamma, suggested: gamma * (1.0 + 1e-3) });
    }
    let x = hinf_riccati_x(plant, gamma)?.x;
    let n = plant.n();
    let s = sigs.int.matrix();
    let sk = sigs.k.matrix();
    let g2 = gamma.powi(-2);
    let z = inverse(&(eye(n) - &s * &x * &s * &x * g2))?;
    let bb2 = &plant.b2 * plant.b2.transpose();
    let bb1 = &plant.b1 * plant.b1.transpose();
    let a_k = &plant.a - (&bb2 - &bb1 * g2) * &x - &z * &s * &x * &bb2 * &s;
    let b_k = -(&z * &s * &x * &plant.b2 * &sk);
    let c_k = plant.b2.transpose() * &x;
    let (zh, zih) = z_half(&x, &s, gamma)?;
    let k = Controller::new(&zih * a_k * &zh, &zih * b_k, c_k * &zh, zeros(plant.nu(), plant.ny()))?;
    let res = controller_symmetry_residual(&k, &sigs.int, &sigs.k)?;
    let scale = 1.0 + max_abs(&k.a).max(max_abs(&k.b)).max(max_abs(&k.c));
    if res >= 1e-8 * scale {
        return Err(Error::Internal(format!("controller symmetry residual {res:.3e}")));
    }
    let cl = close_loop(plant, &k)?;
    let achieved = hinf_norm(&cl, 1e-9)?;
    if achieved >= gamma {
        return Err(Error::Internal(format!("closed-loop norm {achieved} not below γ = {gamma}")));
    }
    Ok(k)
}

fn check_lct(plant: &Problem2Plant, need_minimal: bool) -> Result<()> {
    let rep = validate_structure(&plant.real, ClassTag::LCT)?;
    if !rep.passed {
        return Err(Error::Structure(rep.summary()));
    }
    if need_minimal && controllable_basis(plant.a(), plant.b()).ncols() != plant.real.n() {
        return Err(Error::Structure("plant is not controllable; reduce it first".into()));
    }
    Ok(())
}

/// Optimal H2 law for a lossless plant: `(A − 2BBᵀ, B, Bᵀ, 0)`.
pub fn lct_h2(plant: &Problem2Plant) -> Result<Controller> {
    check_lct(plant, true)?;
    let b = plant.b();
    let k = Controller::new(plant.a() - b * b.transpose() * 2.0, b.clone(), b.transpose(), zeros(b.ncols(), b.ncols()))?;
    Ok(k.with_hint(ImplHint::CopyNetworkPlusResistors { ohms: 2.0 }))
}

/// Optimal H∞ law for a lossless plant: `D_K = √2·I`.
pub fn lct_hinf(plant: &Problem2Plant) -> Result<Controller> {
    check_lct(plant, false)?;
    let m = plant.real.m();
    Ok(Controller::static_gain(eye(m) * 2f64.sqrt()).with_hint(ImplHint::TerminateResistors { ohms: 1.0 / 2f64.sqrt() }))
}

/// Coprime-factor robust law for a lossless plant: `D_K = I`.
pub fn lct_coprime(plant: &Problem2Plant) -> Result<Controller> {
    check_lct(plant, false)?;
    let m = plant.real.m();
    Ok(Controller::static_gain(eye(m)).with_hint(ImplHint::TerminateResistors { ohms: 1.0 }))
}

/// Closed-loop map `[G; I](I + KG)⁻¹[K I]` as a realization.
pub fn coprime_factor_loop(a: &Mat, b: &Mat, c: &Mat, k: &Controller) -> Result<StructuredRealization> {
    let (n, m, p) = (a.nrows(), b.ncols(), c.nrows());
    let g = GeneralizedPlant {
        a: a.clone(),
        b1: hcat(&[&zeros(n, p), b]),
        b2: b.clone(),
        c1: vcat(&[c, &zeros(m, n)]),
        c2: c.clone(),
        d11: block(&[p, m], &[p, m], &[&[&zeros(p, p), &zeros(p, m)], &[&zeros(m, p), &eye(m)]]),
        d12: vcat(&[&zeros(p, m), &eye(m)]),
        d21: hcat(&[&(-eye(p)), &zeros(p, m)]),
        d22: zeros(p, m),
    };
    close_loop(&g, k)
}

fn split_b(real: &StructuredRealization) -> (Mat, Mat) {
    let k = real.partition().map(|p| p.col_split).unwrap_or(0);
    let (n, m) = (real.n(), real.m());
    (sub(real.b(), 0, 0, n, k), sub(real.b(), 0, k, n, m - k))
}

/// `G(0) = D − C A⁻¹ B`.
pub fn dc_gain(real: &StructuredRealization) -> Result<Mat> {
    if real.n() == 0 {
        return Ok(real.d().clone());
    }
    let ainv_b = solve(real.a(), real.b()).map_err(|_| Error::Singular("A".into()))?;
    Ok(real.d() - real.c() * ainv_b)
}

fn check_strict(plant: &Problem3Plant) -> Result<()> {
    let r = &plant.real;
    let (n, m) = (r.n(), r.m());
    let k = r.partition().map(|p| p.col_split).unwrap_or(0);
    let q = m - k;
    let (b1, b2) = split_b(r);
    let d = r.d();
    let (strict, weak, names) = match r.class_tag() {
        ClassTag::RLT => (
            block(&[n, q], &[n, q], &[&[&(-r.a()), &b2], &[&b2.transpose(), &sub(d, k, k, q, q)]]),
            sub(d, 0, 0, k, k),
            ("RLT: [−A B₂; B₂ᵀ D₂₂] ≻ 0", "RLT: D₁₁ ⪰ 0"),
        ),
        ClassTag::RCT => (
            block(&[n, k], &[n, k], &[&[&(-r.a()), &b1], &[&b1.transpose(), &sub(d, 0, 0, k, k)]]),
            sub(d, k, k, q, q),
            ("RCT: [−A B₁; B₁ᵀ D₁₁] ≻ 0", "RCT: D₂₂ ⪰ 0"),
        ),
        t => return Err(Error::Structure(format!("static law needs RLT or RCT, got {t}"))),
    };
    let rep = validate_structure(r, r.class_tag())?;
    if !rep.passed {
        return Err(Error::Structure(rep.summary()));
    }
    let lam = min_eig_sym(&strict);
    if lam.is_finite() && lam <= crate::structured::tau_psd(&strict) {
        return Err(Error::Definiteness { condition: names.0.into(), eigenvalue: lam });
    }
    let lam = min_eig_sym(&weak);
    if lam.is_finite() && lam <= -crate::structured::tau_psd(&weak) {
        return Err(Error::Definiteness { condition: names.1.into(), eigenvalue: lam });
    }
    Ok(())
}

fn static_law(plant: &Problem3Plant, sign1: f64, sign2: f64) -> Result<Controller> {
    check_strict(plant)?;
    let r = &plant.real;
    let n = r.n();
    let (b1, b2) = split_b(r);
    let dk = if n == 0 {
        r.d().transpose()
    } else {
        let ainv = inverse(r.a()).map_err(|_| Error::Singular("A".into()))?;
        let left = vcat(&[&b1.transpose(), &b2.transpose()]);
        let right = hcat(&[&(&b1 * sign1), &(&b2 * sign2)]);
        r.d().transpose() - left * ainv * right
    };
    let g0t = dc_gain(r)?.transpose();
    let err = max_abs(&(&dk - &g0t)) / (1.0 + max_abs(&g0t));
    if err > 1e-10 {
        return Err(Error::Internal(format!("static law differs from G(0)ᵀ by {err:.3e}")));
    }
    Ok(Controller::static_gain(dk))
}

/// Optimal static law for a strict RLT plant: `D_K = G(0)ᵀ`.
pub fn rlt_static(plant: &Problem3Plant) -> Result<Controller> {
    if plant.real.class_tag() != ClassTag::RLT {
        return Err(Error::Structure("rlt_static needs an RLT plant".into()));
    }
    static_law(plant, 1.0, -1.0)
}

/// Optimal static law for a strict RCT plant: `D_K = G(0)ᵀ`.
pub fn rct_static(plant: &Problem3Plant) -> Result<Controller> {
    if plant.real.class_tag() != ClassTag::RCT {
        return Err(Error::Structure("rct_static needs an RCT plant".into()));
    }
    static_law(plant, -1.0, 1.0)
}

/// Lower bound on the achievable closed-loop H∞ norm for the full-information problem,
/// attained by the static law.
pub fn gamma_star(plant: &Problem3Plant) -> Result<f64> {
    let r = &plant.real;
    if r.n() == 0 {
        return Ok(0.0);
    }
    let abscissa = spectral_abscissa(r.a());
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz(abscissa));
    }
    let ainv = inverse(r.a()).map_err(|_| Error::Singular("A".into()))?;
    let g0 = dc_gain(r)?;
    let p = r.p();
    let mid = inverse(&(eye(p) + &g0 * g0.transpose()))?;
    let m = vcat(&[&eye(p), &(-g0.transpose())]) * mid * r.c() * ainv;
    Ok(norm2(&m))
}
