//! Recovering internal element currents and voltages from a structured
//! realization plus reactance data `(Θ, Γ, Φ)`.
//!
//! With `E = Φ^{-1/2}ΓΘ⁻¹`, `Δ = (Φ − ΓΘ⁻¹Γᵀ)^{1/2}`, `Ω = Φ^{-1/2}ΔΦ^{-1/2}`
//! and `Θ = Q₁Λ₁Q₁ᵀ`, `Φ = Q₂Λ₂Q₂ᵀ`, the hybrid variables are
//!
//! ```text
//! e† = −Q₁ᵀEᵀx                    h† = −Q₁ᵀΘEᵀ(Ax + Bu)
//! e  =  Q₂ᵀΦ^{1/2}ΔΦ^{-1/2}(Ax + Bu)   h  =  Q₂ᵀΩx
//! e_ext = y                        h_ext = u
//! ```
//! and `Σ = diag(−Σ†, Σ_int, Σ_ext)` picks currents from `e` where `Σ = +1`
//! and from `h` where `Σ = −1`; voltages take the other half. `i = P ī`.

use crate::error::{Error, Result};
use crate::linalg::*;
use crate::structured::{tau_psd, Signature, StructuredRealization, ValidationReport};

#[derive(Debug, Clone)]
pub struct InternalData {
    pub theta: Mat,
    pub gamma: Mat,
    pub phi: Mat,
    pub sigma_int_dagger: Signature,
    pub sigma_int: Signature,
    pub sigma_ext: Signature,
    /// `i[permutation[k]] = ī[k]`
    pub permutation: Vec<usize>,
    pub n_c: usize,
    pub n_l: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reactive {
    Capacitor,
    Inductor,
}

impl InternalData {
    pub fn n_dagger(&self) -> usize {
        self.theta.nrows()
    }
    pub fn n_int(&self) -> usize {
        self.phi.nrows()
    }
    pub fn n_total(&self) -> usize {
        self.n_dagger() + self.n_int() + self.sigma_ext.len()
    }

    /// `Σ = diag(−Σ†, Σ_int, Σ_ext)`
    pub fn hybrid_signature(&self) -> Signature {
        self.sigma_int_dagger.negated().concat(&self.sigma_int).concat(&self.sigma_ext)
    }

    /// Element kind and value for each reactive index in hybrid order.
    pub fn elements(&self) -> Result<Vec<(Reactive, f64)>> {
        let q1 = commuting_eigvecs(&self.theta, &self.sigma_int_dagger)?;
        let q2 = commuting_eigvecs(&self.phi, &self.sigma_int)?;
        let l1 = q1.transpose() * &self.theta * &q1;
        let l2 = q2.transpose() * &self.phi * &q2;
        let kind = |s: i8| if s > 0 { Reactive::Capacitor } else { Reactive::Inductor };
        let mut out = vec![];
        for (k, &s) in self.sigma_int_dagger.entries().iter().enumerate() {
            out.push((kind(s), l1[(k, k)]));
        }
        for (k, &s) in self.sigma_int.entries().iter().enumerate() {
            out.push((kind(s), l2[(k, k)]));
        }
        Ok(out)
    }
}

/// Orthogonal `Q` with `QᵀMQ` diagonal and `QΣ = ΣQ`, built block by block
/// over the `+1` and `−1` index sets.
pub fn commuting_eigvecs(m: &Mat, sigma: &Signature) -> Result<Mat> {
    let n = m.nrows();
    if m.ncols() != n || sigma.len() != n {
        return Err(Error::Dimension("commuting_eigvecs: shapes".into()));
    }
    let s = sigma.matrix();
    let res = max_abs(&(&s * m - m * &s));
    if res > 1e-10 * (1.0 + max_abs(m)) {
        return Err(Error::Structure(format!("matrix does not commute with its signature (residual {res:.3e})")));
    }
    let mut q = zeros(n, n);
    for sign in [1i8, -1] {
        let idx: Vec<usize> = (0..n).filter(|&i| sigma.entries()[i] == sign).collect();
        if idx.is_empty() {
            continue;
        }
        let blk = Mat::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])]);
        let off = (0..idx.len())
            .flat_map(|i| (0..idx.len()).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| blk[(i, j)].abs())
            .fold(0.0, f64::max);
        let v = if off == 0.0 { eye(idx.len()) } else { sym(&blk).symmetric_eigen().eigenvectors };
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                q[(i, j)] = v[(a, b)];
            }
        }
    }
    Ok(q)
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &i in p {
        if i >= p.len() || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

/// Checks the four realizability conditions for `real` with `internal`.
pub fn validate_reactance_data(real: &StructuredRealization, internal: &InternalData) -> ValidationReport {
    let mut rep = ValidationReport::new("reactance data");
    let (nd, ni) = (internal.n_dagger(), internal.n_int());
    let dims_ok = internal.gamma.shape() == (ni, nd)
        && internal.theta.ncols() == nd
        && internal.phi.ncols() == ni
        && internal.sigma_int_dagger.len() == nd
        && internal.sigma_int.len() == ni
        && real.n() == ni
        && real.m() == internal.sigma_ext.len()
        && real.p() == real.m();
    rep.check("dimensions consistent", if dims_ok { 0.0 } else { 1.0 }, dims_ok);
    if !dims_ok {
        return rep;
    }

    // a) passivity and signature symmetry
    let mm = real.m_matrix();
    let sig = internal.sigma_int.concat(&internal.sigma_ext).matrix();
    let r = max_abs(&(&sig * &mm - mm.transpose() * &sig));
    rep.check("Σ M = Mᵀ Σ", r, r <= 1e-9 * (1.0 + max_abs(&mm)));
    rep.psd("M + Mᵀ ⪰ 0", &(&mm + mm.transpose()));

    // b) permutation
    let total = internal.n_total();
    let perm_ok = internal.permutation.len() == total && is_permutation(&internal.permutation);
    rep.check("P is a permutation", if perm_ok { 0.0 } else { 1.0 }, perm_ok);

    // c) element counts
    let count_ok = nd + ni == internal.n_c + internal.n_l;
    rep.check("n† + n_int = n_C + n_L", (nd + ni).abs_diff(internal.n_c + internal.n_l) as f64, count_ok);
    let tr = internal.sigma_int_dagger.trace() + internal.sigma_int.trace();
    let want = internal.n_c as i64 - internal.n_l as i64;
    rep.check("tr Σ† + tr Σ_int = n_C − n_L", (tr - want).unsigned_abs() as f64, tr == want);

    // d) commuting, positive definite reactance matrix
    let k = block(&[nd, ni], &[nd, ni], &[&[&internal.theta, &internal.gamma.transpose()], &[&internal.gamma, &internal.phi]]);
    let sd = internal.sigma_int_dagger.concat(&internal.sigma_int).matrix();
    let tol = 1e-9 * (1.0 + max_abs(&k));
    let r = max_abs(&(&sd * &k - &k * &sd));
    rep.check("diag(Σ†, Σ_int) K = K diag(Σ†, Σ_int)", r, r <= tol);
    let r = max_abs(&(&k - k.transpose()));
    rep.check("K symmetric", r, r <= tol);
    if k.nrows() > 0 {
        rep.pd("[Θ Γᵀ; Γ Φ] ≻ 0", &k);
    }
    rep
}

/// `[i; v] = F [x; u; y]`, a `2n × (n_int + m + p)` matrix.
pub fn build_f(real: &StructuredRealization, internal: &InternalData) -> Result<Mat> {
    let rep = validate_reactance_data(real, internal);
    if !rep.passed {
        return Err(Error::Structure(rep.summary()));
    }
    let (nd, ni, m) = (internal.n_dagger(), internal.n_int(), real.m());
    let (a, b) = (real.a(), real.b());
    let theta_inv = inverse(&internal.theta)?;
    let schur = &internal.phi - &internal.gamma * &theta_inv * internal.gamma.transpose();
    let lam = min_eig_sym(&schur);
    if lam.is_finite() && lam <= tau_psd(&schur) {
        return Err(Error::Definiteness { condition: "Φ − ΓΘ⁻¹Γᵀ ≻ 0".into(), eigenvalue: lam });
    }
    let delta = sym_pow(&schur, 0.5)?;
    let phi_h = sym_pow(&internal.phi, 0.5)?;
    let phi_mh = sym_pow(&internal.phi, -0.5)?;
    let e = &phi_mh * &internal.gamma * &theta_inv;
    let omega = &phi_mh * &delta * &phi_mh;
    let q1 = commuting_eigvecs(&internal.theta, &internal.sigma_int_dagger)?;
    let q2 = commuting_eigvecs(&internal.phi, &internal.sigma_int)?;

    let cols = ni + m + m;
    let ab = hcat(&[a, b, &zeros(ni, m)]);
    let xsel = hcat(&[&eye(ni), &zeros(ni, 2 * m)]);
    let usel = hcat(&[&zeros(m, ni), &eye(m), &zeros(m, m)]);
    let ysel = hcat(&[&zeros(m, ni + m), &eye(m)]);

    let ge = vcat(&[&(-(q1.transpose() * e.transpose()) * &xsel), &(q2.transpose() * &phi_h * &delta * &phi_mh * &ab), &ysel]);
    let gh = vcat(&[&(-(q1.transpose() * &internal.theta * e.transpose()) * &ab), &(q2.transpose() * &omega * &xsel), &usel]);
    let n = nd + ni + m;
    let sig = internal.hybrid_signature();
    let mut ibar = zeros(n, cols);
    let mut vbar = zeros(n, cols);
    for k in 0..n {
        let (cur, vol) = if sig.entries()[k] > 0 { (&ge, &gh) } else { (&gh, &ge) };
        ibar.set_row(k, &cur.row(k));
        vbar.set_row(k, &vol.row(k));
    }
    let mut f = zeros(2 * n, cols);
    for k in 0..n {
        let r = internal.permutation[k];
        f.set_row(r, &ibar.row(k));
        f.set_row(n + r, &vbar.row(k));
    }
    Ok(f)
}

/// Largest element-law violation along an RK4 trajectory driven by a
/// smooth two-state oscillator. Derivatives of `(i, v)` come from the
/// model equations, not finite differences.
pub fn element_law_residual(real: &StructuredRealization, internal: &InternalData, f: &Mat) -> Result<f64> {
    let (n, m) = (real.n(), real.m());
    let total = internal.n_total();
    let kinds = internal.elements()?;
    let (a, b, c, d) = (real.a(), real.b(), real.c(), real.d());
    // oscillator w' = [[0, 1], [−1, −0.1]] w, u_k = w₀ + k·w₁/2
    let osc = from_rows(&[&[0.0, 1.0], &[-1.0, -0.1]]);
    let mix = Mat::from_fn(m, 2, |k, j| if j == 0 { 1.0 } else { 0.5 * (k as f64) + 0.3 });
    let big_a = block(&[n, 2], &[n, 2], &[&[a, &(b * &mix)], &[&zeros(2, n), &osc]]);
    let mut z = DVector::zeros(n + 2);
    z[n] = 1.0;
    let h = 1e-3;
    let steps = 5000;
    let mut worst: f64 = 0.0;
    for step in 0..=steps {
        if step % 10 == 0 {
            let x = z.rows(0, n).into_owned();
            let w = z.rows(n, 2).into_owned();
            let u = &mix * &w;
            let wd = &osc * &w;
            let ud = &mix * &wd;
            let xd = a * &x + b * &u;
            let y = c * &x + d * &u;
            let yd = c * &xd + d * &ud;
            let arg = DVector::from_iterator(n + 2 * m, x.iter().chain(u.iter()).chain(y.iter()).copied());
            let argd = DVector::from_iterator(n + 2 * m, xd.iter().chain(ud.iter()).chain(yd.iter()).copied());
            let iv = f * &arg;
            let ivd = f * &argd;
            for (k, &(kind, val)) in kinds.iter().enumerate() {
                let r = internal.permutation[k];
                let (i, v, di, dv) = (iv[r], iv[total + r], ivd[r], ivd[total + r]);
                let res = match kind {
                    Reactive::Capacitor => val * dv - i,
                    Reactive::Inductor => val * di - v,
                };
                worst = worst.max(res.abs());
            }
        }
        let k1 = &big_a * &z;
        let k2 = &big_a * (&z + &k1 * (h / 2.0));
        let k3 = &big_a * (&z + &k2 * (h / 2.0));
        let k4 = &big_a * (&z + &k3 * h);
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged(step as f64 * h));
        }
    }
    Ok(worst)
}

type DVector = nalgebra::DVector<f64>;
