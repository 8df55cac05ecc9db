//! Generalized plants for the synthesis problems.
//!
//! ```text
//! dx/dt = A x + B1 w + B2 u
//!     z = C1 x + D11 w + D12 u
//!     y = C2 x + D21 w + D22 u
//! ```
//! Controllers act as `u = −C_K x_K − D_K y`.

use crate::error::{Error, Result};
use crate::linalg::*;
use crate::structured::{ClassTag, Signature, StructuredRealization, TAU_STRUCT};

#[derive(Debug, Clone)]
pub struct GeneralizedPlant {
    pub a: Mat,
    pub b1: Mat,
    pub b2: Mat,
    pub c1: Mat,
    pub c2: Mat,
    pub d11: Mat,
    pub d12: Mat,
    pub d21: Mat,
    pub d22: Mat,
}

/// `(Σ_int, Σ_ext, Σ_K)` for a signature-symmetric generalized plant.
#[derive(Debug, Clone)]
pub struct PlantSignatures {
    pub int: Signature,
    pub ext: Signature,
    pub k: Signature,
}

impl GeneralizedPlant {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    /// disturbance width
    pub fn nw(&self) -> usize {
        self.b1.ncols()
    }
    pub fn nu(&self) -> usize {
        self.b2.ncols()
    }
    pub fn nz(&self) -> usize {
        self.c1.nrows()
    }
    pub fn ny(&self) -> usize {
        self.c2.nrows()
    }

    pub fn check_dims(&self) -> Result<()> {
        let (n, nw, nu, nz, ny) = (self.n(), self.nw(), self.nu(), self.nz(), self.ny());
        let ok = self.a.shape() == (n, n)
            && self.b1.nrows() == n
            && self.b2.nrows() == n
            && self.c1.ncols() == n
            && self.c2.ncols() == n
            && self.d11.shape() == (nz, nw)
            && self.d12.shape() == (nz, nu)
            && self.d21.shape() == (ny, nw)
            && self.d22.shape() == (ny, nu);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("generalized plant blocks do not conform".into()))
        }
    }

    /// `[−A −B1 −B2; C1 D11 D12; C2 D21 D22]`
    pub fn m_matrix(&self) -> Mat {
        let (n, nw, nu, nz, ny) = (self.n(), self.nw(), self.nu(), self.nz(), self.ny());
        block(
            &[n, nz, ny],
            &[n, nw, nu],
            &[&[&(-&self.a), &(-&self.b1), &(-&self.b2)], &[&self.c1, &self.d11, &self.d12], &[&self.c2, &self.d21, &self.d22]],
        )
    }

    /// `max|Σ M − Mᵀ Σ|` with `Σ = diag(Σ_int, Σ_ext, Σ_K)`.
    pub fn symmetry_residual(&self, sigs: &PlantSignatures) -> Result<f64> {
        let mm = self.m_matrix();
        if mm.nrows() != mm.ncols() || sigs.int.len() != self.n() || sigs.ext.len() != self.nw() || sigs.k.len() != self.nu() {
            return Err(Error::Dimension("signatures do not match plant".into()));
        }
        let s = sigs.int.concat(&sigs.ext).concat(&sigs.k).matrix();
        Ok(max_abs(&(&s * &mm - mm.transpose() * &s)))
    }

    /// Signatures making `M` symmetric, with the first external entry +1.
    pub fn infer_signatures(&self) -> Option<PlantSignatures> {
        let mm = self.m_matrix();
        if mm.nrows() != mm.ncols() {
            return None;
        }
        let sig = crate::structured::infer_square_signature(&mm)?;
        let (n, nw) = (self.n(), self.nw());
        let sig = Signature::new(sig).ok()?;
        let e = sig.entries();
        Some(PlantSignatures {
            int: Signature::new(e[..n].to_vec()).ok()?,
            ext: Signature::new(e[n..n + nw].to_vec()).ok()?,
            k: Signature::new(e[n + nw..].to_vec()).ok()?,
        })
    }

    /// Regularity assumptions: (A,B1) stabilizable, (C1,A) detectable,
    /// D12ᵀ[C1 D12] = [0 I], D11 = 0, plus the dual pair for the
    /// measurement channel.
    pub fn check_dgkf(&self) -> Result<()> {
        self.check_dims()?;
        let tol = 1e-9;
        let reg = |name: &str, residual: f64| -> Result<()> {
            if residual > tol {
                Err(Error::Regularity { name: name.into(), residual })
            } else {
                Ok(())
            }
        };
        let nu = self.nu();
        let ny = self.ny();
        reg("D₁₁ = 0", max_abs(&self.d11))?;
        reg("D₁₂ᵀD₁₂ = I", max_abs(&(self.d12.transpose() * &self.d12 - eye(nu))))?;
        reg("D₁₂ᵀC₁ = 0", max_abs(&(self.d12.transpose() * &self.c1)))?;
        reg("D₂₁D₂₁ᵀ = I", max_abs(&(&self.d21 * self.d21.transpose() - eye(ny))))?;
        reg("B₁D₂₁ᵀ = 0", max_abs(&(&self.b1 * self.d21.transpose())))?;
        reg("(A,B₁) stabilizable", pbh_gap(&self.a, &self.b1))?;
        reg("(C₁,A) detectable", pbh_gap(&self.a.transpose(), &self.c1.transpose()))?;
        reg("(A,B₂) stabilizable", pbh_gap(&self.a, &self.b2))?;
        reg("(C₂,A) detectable", pbh_gap(&self.a.transpose(), &self.c2.transpose()))?;
        Ok(())
    }
}

/// PBH test over the closed right half plane: returns 0 when every
/// eigenvalue with `Re λ ≥ 0` is reachable, else the deficiency measure.
pub fn pbh_gap(a: &Mat, b: &Mat) -> f64 {
    let n = a.nrows();
    let scale = 1.0 + norm2(a) + norm2(b);
    let mut worst: f64 = 0.0;
    for lam in eigenvalues(a) {
        if lam.re < -1e-9 * scale {
            continue;
        }
        let mut m = CMat::zeros(n, n + b.ncols());
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = C64::new(a[(i, j)], 0.0) - if i == j { lam } else { C64::new(0.0, 0.0) };
            }
            for j in 0..b.ncols() {
                m[(i, n + j)] = C64::new(b[(i, j)], 0.0);
            }
        }
        let smin = csingular_values(&m).last().copied().unwrap_or(f64::INFINITY);
        if smin < 1e-8 * scale {
            worst = worst.max(1.0 - smin / (1e-8 * scale));
        }
    }
    worst
}

/// Output-feedback problem data: `dx/dt = Ax + B(u + w₁)`, `y = Cx + w₂`.
#[derive(Debug, Clone)]
pub struct Problem2Plant {
    pub real: StructuredRealization,
}

impl Problem2Plant {
    pub fn new(real: StructuredRealization) -> Result<Self> {
        let dmax = max_abs(real.d());
        if dmax > 0.0 {
            return Err(Error::NonzeroD(dmax));
        }
        Ok(Problem2Plant { real })
    }

    pub fn a(&self) -> &Mat {
        self.real.a()
    }
    pub fn b(&self) -> &Mat {
        self.real.b()
    }
    pub fn c(&self) -> &Mat {
        self.real.c()
    }

    pub fn embed(&self) -> GeneralizedPlant {
        embed_problem2(self.a(), self.b(), self.c())
    }
}

/// Generalized plant form of the output-feedback problem: `w = (w₁, w₂)`, `z = (Cx, u)`.
pub fn embed_problem2(a: &Mat, b: &Mat, c: &Mat) -> GeneralizedPlant {
    let (n, m, p) = (a.nrows(), b.ncols(), c.nrows());
    GeneralizedPlant {
        a: a.clone(),
        b1: hcat(&[b, &zeros(n, p)]),
        b2: b.clone(),
        c1: vcat(&[c, &zeros(m, n)]),
        c2: c.clone(),
        d11: zeros(p + m, m + p),
        d12: vcat(&[&zeros(p, m), &eye(m)]),
        d21: hcat(&[&zeros(p, m), &eye(p)]),
        d22: zeros(p, m),
    }
}

/// Full-information problem data: `dx/dt = Ax + Bu + w`, `y = Cx + Du`, `z = (y, u)`.
#[derive(Debug, Clone)]
pub struct Problem3Plant {
    pub real: StructuredRealization,
}

impl Problem3Plant {
    pub fn new(real: StructuredRealization) -> Result<Self> {
        match real.class_tag() {
            ClassTag::RLT | ClassTag::RCT => {}
            t => return Err(Error::Structure(format!("the full-information problem needs an RLT or RCT plant, got {t}"))),
        }
        if real.partition().is_none() {
            return Err(Error::MissingPartition(real.class_tag().name().into()));
        }
        Ok(Problem3Plant { real })
    }

    pub fn to_generalized(&self) -> GeneralizedPlant {
        let r = &self.real;
        let (n, m, p) = (r.n(), r.m(), r.p());
        GeneralizedPlant {
            a: r.a().clone(),
            b1: eye(n),
            b2: r.b().clone(),
            c1: vcat(&[r.c(), &zeros(m, n)]),
            c2: r.c().clone(),
            d11: zeros(p + m, n),
            d12: vcat(&[r.d(), &eye(m)]),
            d21: zeros(p, n),
            d22: r.d().clone(),
        }
    }
}

/// True when every entry is within `TAU_STRUCT` of zero.
pub fn is_zero(m: &Mat) -> bool {
    max_abs(m) < TAU_STRUCT
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrator_embedding() {
        let one = eye(1);
        let g = embed_problem2(&zeros(1, 1), &one, &one);
        g.check_dims().unwrap();
        assert_eq!(g.nw(), 2);
        assert_eq!(g.nz(), 2);
        assert_eq!(&g.d12.transpose() * &g.d12, eye(1));
        g.check_dgkf().unwrap();
    }

    #[test]
    fn nonzero_d_rejected() {
        let r = StructuredRealization::new(zeros(1, 1), eye(1), eye(1), eye(1)).unwrap();
        assert!(matches!(Problem2Plant::new(r), Err(Error::NonzeroD(_))));
    }

    #[test]
    fn integrator_signatures() {
        let one = eye(1);
        let g = embed_problem2(&zeros(1, 1), &one, &one);
        let s = g.infer_signatures().unwrap();
        assert_eq!(g.symmetry_residual(&s).unwrap(), 0.0);
        assert_eq!(s.int.entries(), &[1]);
        assert_eq!(s.ext.entries(), &[-1, -1]);
        assert_eq!(s.k.entries(), &[-1]);
    }

    #[test]
    fn uncontrollable_unstable_mode_flagged() {
        let a = diag(&[1.0, -1.0]);
        let b = from_rows(&[&[0.0], &[1.0]]);
        assert!(pbh_gap(&a, &b) > 0.0);
        let b = from_rows(&[&[1.0], &[0.0]]);
        assert_eq!(pbh_gap(&a, &b), 0.0);
    }
}
