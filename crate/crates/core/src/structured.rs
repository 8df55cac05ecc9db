//! Signature-symmetric state-space realizations and their structural classes.

use std::fmt;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::*;

/// Absolute tolerance for zero-pattern and equality entries.
pub const TAU_STRUCT: f64 = 1e-9;

/// Semidefinite tolerance, scaled by the block's 2-norm.
pub fn tau_psd(block: &Mat) -> f64 {
    1e-9 * (1.0 + norm2(block))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature(Vec<i8>);

impl Signature {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.iter().any(|&e| e != 1 && e != -1) {
            return Err(Error::Structure("signature entries must be +1 or -1".into()));
        }
        Ok(Signature(entries))
    }

    pub fn plus(n: usize) -> Self {
        Signature(vec![1; n])
    }

    pub fn minus(n: usize) -> Self {
        Signature(vec![-1; n])
    }

    /// `diag(I_k, -I_{n-k})`
    pub fn split(k: usize, n: usize) -> Self {
        Signature((0..n).map(|i| if i < k { 1 } else { -1 }).collect())
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn trace(&self) -> i64 {
        self.0.iter().map(|&e| e as i64).sum()
    }

    pub fn count_plus(&self) -> usize {
        self.0.iter().filter(|&&e| e == 1).count()
    }

    pub fn matrix(&self) -> Mat {
        Mat::from_fn(self.len(), self.len(), |i, j| if i == j { self.0[i] as f64 } else { 0.0 })
    }

    pub fn concat(&self, other: &Signature) -> Signature {
        Signature(self.0.iter().chain(other.0.iter()).copied().collect())
    }

    pub fn negated(&self) -> Signature {
        Signature(self.0.iter().map(|e| -e).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassTag {
    T,
    LT,
    CT,
    LCT,
    RT,
    RLT,
    RCT,
    RLCT,
    Unstructured,
}

impl ClassTag {
    pub fn name(&self) -> &'static str {
        match self {
            ClassTag::T => "T",
            ClassTag::LT => "LT",
            ClassTag::CT => "CT",
            ClassTag::LCT => "LCT",
            ClassTag::RT => "RT",
            ClassTag::RLT => "RLT",
            ClassTag::RCT => "RCT",
            ClassTag::RLCT => "RLCT",
            ClassTag::Unstructured => "Unstructured",
        }
    }

    pub fn parse(s: &str) -> Option<ClassTag> {
        Some(match s {
            "T" => ClassTag::T,
            "LT" => ClassTag::LT,
            "CT" => ClassTag::CT,
            "LCT" => ClassTag::LCT,
            "RT" => ClassTag::RT,
            "RLT" => ClassTag::RLT,
            "RCT" => ClassTag::RCT,
            "RLCT" => ClassTag::RLCT,
            "Unstructured" => ClassTag::Unstructured,
            _ => return None,
        })
    }
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the +1 external block ends for outputs (`row_split`) and inputs
/// (`col_split`). `state_split` is the size of the +1 internal block for
/// LCT realizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPartition {
    pub row_split: usize,
    pub col_split: usize,
    pub state_split: Option<usize>,
}

impl BlockPartition {
    pub fn ports(k: usize) -> Self {
        BlockPartition { row_split: k, col_split: k, state_split: None }
    }
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub condition: String,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub subject: String,
    pub passed: bool,
    pub checked: Vec<Violation>,
    pub violations: Vec<Violation>,
    pub worst_residual: f64,
}

impl ValidationReport {
    pub fn new(subject: impl Into<String>) -> Self {
        ValidationReport { subject: subject.into(), passed: true, checked: vec![], violations: vec![], worst_residual: 0.0 }
    }

    /// Record an equality / zero-pattern condition.
    pub fn zero(&mut self, condition: impl Into<String>, residual: f64) {
        self.record(condition.into(), residual, residual < TAU_STRUCT);
    }

    /// Record a semidefinite condition on `block` (min eigenvalue > -tau).
    pub fn psd(&mut self, condition: impl Into<String>, block: &Mat) {
        let lam = min_eig_sym(block);
        let res = if lam.is_finite() { (-lam).max(0.0) } else { 0.0 };
        self.record(condition.into(), res, !lam.is_finite() || lam > -tau_psd(block));
    }

    /// Record a strict definiteness condition (min eigenvalue > tau).
    pub fn pd(&mut self, condition: impl Into<String>, block: &Mat) {
        let lam = min_eig_sym(block);
        let res = if lam.is_finite() { (-lam).max(0.0) } else { 0.0 };
        self.record(condition.into(), res, !lam.is_finite() || lam > tau_psd(block));
    }

    pub fn check(&mut self, condition: impl Into<String>, residual: f64, ok: bool) {
        self.record(condition.into(), residual, ok);
    }

    fn record(&mut self, condition: String, residual: f64, ok: bool) {
        let v = Violation { condition, residual };
        if residual.is_finite() {
            self.worst_residual = self.worst_residual.max(residual);
        }
        if !ok {
            self.passed = false;
            self.violations.push(v.clone());
        }
        self.checked.push(v);
    }

    pub fn merge(&mut self, other: ValidationReport) {
        for v in other.checked {
            let failed = other.violations.iter().any(|x| x.condition == v.condition);
            self.record(v.condition, v.residual, !failed);
        }
    }

    pub fn summary(&self) -> String {
        if self.passed {
            format!("{}: pass (worst residual {:.3e})", self.subject, self.worst_residual)
        } else {
            let names: Vec<String> = self.violations.iter().map(|v| format!("{} [{:.3e}]", v.condition, v.residual)).collect();
            format!("{}: fail: {}", self.subject, names.join("; "))
        }
    }

    pub fn violated(&self, condition: &str) -> bool {
        self.violations.iter().any(|v| v.condition == condition)
    }
}

#[derive(Debug, Clone)]
pub struct StructuredRealization {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
    sigma_int: Option<Signature>,
    sigma_ext: Option<Signature>,
    class_tag: ClassTag,
    partition: Option<BlockPartition>,
}

impl StructuredRealization {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}", n, a.ncols())));
        }
        let m = b.ncols();
        let p = c.nrows();
        // allow empty state with unspecified B/C widths
        let b = if n == 0 { Mat::zeros(0, d.ncols()) } else { b };
        let c = if n == 0 { Mat::zeros(d.nrows(), 0) } else { c };
        let (m, p) = if n == 0 { (d.ncols(), d.nrows()) } else { (m, p) };
        if b.nrows() != n || c.ncols() != n || d.shape() != (p, m) {
            return Err(Error::Dimension(format!("A {n}x{n}, B {:?}, C {:?}, D {:?}", b.shape(), c.shape(), d.shape())));
        }
        Ok(StructuredRealization { a, b, c, d, sigma_int: None, sigma_ext: None, class_tag: ClassTag::Unstructured, partition: None })
    }

    /// Attach signatures; signature symmetry and passivity must hold.
    pub fn with_signatures(mut self, sigma_int: Signature, sigma_ext: Signature) -> Result<Self> {
        if sigma_int.len() != self.n() || sigma_ext.len() != self.m() || self.m() != self.p() {
            return Err(Error::Dimension("signature lengths".into()));
        }
        let r = signature_report(&self, &sigma_int, &sigma_ext, "signatures");
        if !r.passed {
            return Err(Error::Structure(r.summary()));
        }
        self.sigma_int = Some(sigma_int);
        self.sigma_ext = Some(sigma_ext);
        Ok(self)
    }

    /// Attach a class tag (and partition), validating the class sign pattern.
    pub fn with_tag(mut self, tag: ClassTag, partition: Option<BlockPartition>) -> Result<Self> {
        if let Some(p) = partition {
            if p.row_split > self.p() || p.col_split > self.m() || p.state_split.is_some_and(|s| s > self.n()) {
                return Err(Error::Dimension("partition split beyond dimension".into()));
            }
        }
        self.partition = partition;
        let r = validate_structure(&self, tag)?;
        if !r.passed {
            return Err(Error::Structure(r.summary()));
        }
        self.class_tag = tag;
        Ok(self)
    }

    /// Attach metadata without validation (used by deserialization after its
    /// own checks and by internal constructors that are correct by assembly).
    pub(crate) fn with_raw_meta(
        mut self,
        sigma_int: Option<Signature>,
        sigma_ext: Option<Signature>,
        tag: ClassTag,
        partition: Option<BlockPartition>,
    ) -> Self {
        self.sigma_int = sigma_int;
        self.sigma_ext = sigma_ext;
        self.class_tag = tag;
        self.partition = partition;
        self
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
    pub fn sigma_int(&self) -> Option<&Signature> {
        self.sigma_int.as_ref()
    }
    pub fn sigma_ext(&self) -> Option<&Signature> {
        self.sigma_ext.as_ref()
    }
    pub fn class_tag(&self) -> ClassTag {
        self.class_tag
    }
    pub fn partition(&self) -> Option<BlockPartition> {
        self.partition
    }

    /// `M = [-A -B; C D]`
    pub fn m_matrix(&self) -> Mat {
        let (n, m, p) = (self.n(), self.m(), self.p());
        block(&[n, p], &[n, m], &[&[&(-&self.a), &(-&self.b)], &[&self.c, &self.d]])
    }

    pub fn transfer(&self, s: Complex<f64>) -> Result<CMat> {
        transfer_eval(self, s)
    }
}

fn sym_residual(m: &Mat, sigma: &[i8]) -> f64 {
    let n = m.nrows();
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            r = r.max((sigma[i] as f64 * m[(i, j)] - sigma[j] as f64 * m[(j, i)]).abs());
        }
    }
    r
}

fn signature_report(real: &StructuredRealization, si: &Signature, se: &Signature, subject: &str) -> ValidationReport {
    let mut rep = ValidationReport::new(subject);
    let m = real.m_matrix();
    let sig = si.concat(se);
    rep.zero("Σ·M = Mᵀ·Σ", sym_residual(&m, sig.entries()));
    rep.psd("M + Mᵀ ⪰ 0", &(&m + m.transpose()));
    rep
}

/// Residual of the signature symmetry `ΣM = MᵀΣ`, `max|Σ M − Mᵀ Σ|`.
pub fn symmetry_residual(real: &StructuredRealization, si: &Signature, se: &Signature) -> f64 {
    sym_residual(&real.m_matrix(), si.concat(se).entries())
}

struct Blocks {
    k_out: usize,
    k_in: usize,
}

fn ext_split(real: &StructuredRealization, tag: ClassTag) -> Result<Blocks> {
    let part = real.partition();
    let (k_out, k_in) = match (tag, part) {
        (_, Some(p)) => (p.row_split, p.col_split),
        (ClassTag::LT, None) => (real.p(), real.m()),
        (ClassTag::CT, None) => (0, 0),
        _ => return Err(Error::MissingPartition(tag.name().into())),
    };
    if k_out > real.p() || k_in > real.m() {
        return Err(Error::Dimension("partition split beyond dimension".into()));
    }
    Ok(Blocks { k_out, k_in })
}

/// Check the sign pattern of `tag` against `real`.
pub fn validate_structure(real: &StructuredRealization, tag: ClassTag) -> Result<ValidationReport> {
    let (n, m, p) = (real.n(), real.m(), real.p());
    let (a, b, c, d) = (real.a(), real.b(), real.c(), real.d());
    let t = tag.name();
    let mut rep = ValidationReport::new(t);

    let square_ext = |rep: &mut ValidationReport| {
        rep.check(format!("{t}: p = m"), (p as f64 - m as f64).abs(), p == m);
    };

    match tag {
        ClassTag::Unstructured => {}
        ClassTag::T | ClassTag::LT | ClassTag::CT | ClassTag::RT | ClassTag::RLT | ClassTag::RCT => {
            square_ext(&mut rep);
            if p != m {
                return Ok(rep);
            }
            let Blocks { k_out, k_in } = ext_split(real, tag)?;
            if k_out != k_in {
                rep.check(format!("{t}: input/output partitions agree"), 1.0, false);
                return Ok(rep);
            }
            let k = k_in;
            let q = m - k;
            let d11 = sub(d, 0, 0, k, k);
            let d12 = sub(d, 0, k, k, q);
            let d21 = sub(d, k, 0, q, k);
            let d22 = sub(d, k, k, q, q);
            let b1 = sub(b, 0, 0, n, k);
            let b2 = sub(b, 0, k, n, q);
            let c1 = sub(c, 0, 0, k, n);
            let c2 = sub(c, k, 0, q, n);
            let lossless = matches!(tag, ClassTag::T | ClassTag::LT | ClassTag::CT);
            rep.zero(format!("{t}: D₂₁ = −D₁₂ᵀ"), max_abs(&(&d21 + d12.transpose())));
            if lossless {
                rep.zero(format!("{t}: D₁₁ = 0"), max_abs(&d11));
                rep.zero(format!("{t}: D₂₂ = 0"), max_abs(&d22));
            } else {
                rep.zero(format!("{t}: D₁₁ = D₁₁ᵀ"), max_abs(&(&d11 - d11.transpose())));
                rep.zero(format!("{t}: D₂₂ = D₂₂ᵀ"), max_abs(&(&d22 - d22.transpose())));
            }
            match tag {
                ClassTag::T | ClassTag::RT => {
                    rep.check(format!("{t}: n = 0"), n as f64, n == 0);
                    if tag == ClassTag::RT {
                        rep.psd("RT: D₁₁ ⪰ 0", &d11);
                        rep.psd("RT: D₂₂ ⪰ 0", &d22);
                    }
                }
                ClassTag::LT => {
                    rep.zero("LT: A = 0", max_abs(a));
                    rep.zero("LT: B₂ = 0", max_abs(&b2));
                    rep.zero("LT: C₂ = 0", max_abs(&c2));
                    rep.zero("LT: C₁ = B₁ᵀ", max_abs(&(&c1 - b1.transpose())));
                }
                ClassTag::CT => {
                    rep.zero("CT: A = 0", max_abs(a));
                    rep.zero("CT: B₁ = 0", max_abs(&b1));
                    rep.zero("CT: C₁ = 0", max_abs(&c1));
                    rep.zero("CT: C₂ = B₂ᵀ", max_abs(&(&c2 - b2.transpose())));
                }
                ClassTag::RLT => {
                    rep.zero("RLT: A = Aᵀ", max_abs(&(a - a.transpose())));
                    rep.zero("RLT: C₁ = B₁ᵀ", max_abs(&(&c1 - b1.transpose())));
                    rep.zero("RLT: C₂ = −B₂ᵀ", max_abs(&(&c2 + b2.transpose())));
                    let blk = block(&[n, q], &[n, q], &[&[&(-a), &b2], &[&b2.transpose(), &d22]]);
                    rep.psd("RLT: [−A B₂; B₂ᵀ D₂₂] ⪰ 0", &blk);
                    rep.psd("RLT: D₁₁ ⪰ 0", &d11);
                }
                ClassTag::RCT => {
                    rep.zero("RCT: A = Aᵀ", max_abs(&(a - a.transpose())));
                    rep.zero("RCT: C₁ = −B₁ᵀ", max_abs(&(&c1 + b1.transpose())));
                    rep.zero("RCT: C₂ = B₂ᵀ", max_abs(&(&c2 - b2.transpose())));
                    let blk = block(&[n, k], &[n, k], &[&[&(-a), &b1], &[&b1.transpose(), &d11]]);
                    rep.psd("RCT: [−A B₁; B₁ᵀ D₁₁] ⪰ 0", &blk);
                    rep.psd("RCT: D₂₂ ⪰ 0", &d22);
                }
                _ => unreachable!(),
            }
        }
        ClassTag::LCT => {
            square_ext(&mut rep);
            if p != m {
                return Ok(rep);
            }
            rep.zero("LCT: A = −Aᵀ", max_abs(&(a + a.transpose())));
            rep.zero("LCT: C = Bᵀ", max_abs(&(c - b.transpose())));
            rep.zero("LCT: D = −Dᵀ", max_abs(&(d + d.transpose())));
            let mm = real.m_matrix();
            match real.partition().and_then(|pt| pt.state_split.map(|s| (s, pt))) {
                Some((s, pt)) => {
                    if pt.row_split != pt.col_split {
                        rep.check("LCT: input/output partitions agree", 1.0, false);
                    }
                    let sig = Signature::split(s, n).concat(&Signature::split(pt.col_split, m));
                    rep.zero("LCT: block pattern of Σ_int = diag(I, −I)", same_sign_coupling(&mm, sig.entries()));
                }
                None => {
                    let ok = infer_bipartite(&mm).is_some();
                    rep.check("LCT: bipartite sign pattern", if ok { 0.0 } else { 1.0 }, ok);
                }
            }
        }
        ClassTag::RLCT => {
            square_ext(&mut rep);
            if p != m {
                return Ok(rep);
            }
            let sigs = match (real.sigma_int(), real.sigma_ext()) {
                (Some(si), Some(se)) => Some((si.clone(), se.clone())),
                _ => infer_signatures(real),
            };
            match sigs {
                Some((si, se)) => {
                    let r = signature_report(real, &si, &se, t);
                    for v in &r.checked {
                        let failed = r.violated(&v.condition);
                        rep.check(format!("RLCT: {}", v.condition), v.residual, !failed);
                    }
                }
                None => rep.check("RLCT: consistent signature exists", 1.0, false),
            }
        }
    }

    if let (Some(si), Some(se)) = (real.sigma_int(), real.sigma_ext()) {
        if tag != ClassTag::RLCT && si.len() == n && se.len() == m {
            let r = signature_report(real, si, se, t);
            for v in &r.checked {
                let failed = r.violated(&v.condition);
                rep.check(format!("{t}: attached signatures, {}", v.condition), v.residual, !failed);
            }
        }
    }
    Ok(rep)
}

/// Largest entry of M linking two indices of equal sign.
fn same_sign_coupling(mm: &Mat, sig: &[i8]) -> f64 {
    let n = mm.nrows();
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if sig[i] == sig[j] {
                r = r.max(mm[(i, j)].abs());
            }
        }
    }
    r
}

/// Two-colouring of the nonzero graph of a skew M, if one exists.
fn infer_bipartite(mm: &Mat) -> Option<Vec<i8>> {
    let n = mm.nrows();
    let mut uf = ParityUf::new(n);
    for i in 0..n {
        if mm[(i, i)].abs() >= TAU_STRUCT {
            return None;
        }
        for j in (i + 1)..n {
            if (mm[(i, j)].abs() >= TAU_STRUCT || mm[(j, i)].abs() >= TAU_STRUCT) && !uf.union(i, j, true) {
                return None;
            }
        }
    }
    Some(uf.assign())
}

/// Union-find tracking whether each element has the same sign as its root.
struct ParityUf {
    parent: Vec<usize>,
    flip: Vec<bool>,
}

impl ParityUf {
    fn new(n: usize) -> Self {
        ParityUf { parent: (0..n).collect(), flip: vec![false; n] }
    }

    fn find(&mut self, i: usize) -> (usize, bool) {
        if self.parent[i] == i {
            return (i, false);
        }
        let (r, f) = self.find(self.parent[i]);
        self.parent[i] = r;
        self.flip[i] ^= f;
        (r, self.flip[i])
    }

    /// Record `sign(i) = sign(j)` (or opposite when `opposite`). False on conflict.
    fn union(&mut self, i: usize, j: usize, opposite: bool) -> bool {
        let (ri, fi) = self.find(i);
        let (rj, fj) = self.find(j);
        if ri == rj {
            return (fi ^ fj) == opposite;
        }
        // keep the smaller index as root so it anchors the component
        let (root, child, fc) = if ri < rj { (ri, rj, fi ^ fj ^ opposite) } else { (rj, ri, fi ^ fj ^ opposite) };
        self.parent[child] = root;
        self.flip[child] = fc;
        true
    }

    fn assign(&mut self) -> Vec<i8> {
        (0..self.parent.len()).map(|i| if self.find(i).1 { -1 } else { 1 }).collect()
    }

    fn root(&mut self, i: usize) -> usize {
        self.find(i).0
    }
}

/// Signs σ with `σᵢ Mᵢⱼ = σⱼ Mⱼᵢ` for a square M. Each component's smallest
/// index gets +1. None if the constraints conflict.
pub fn infer_square_signature(mm: &Mat) -> Option<Vec<i8>> {
    let n = mm.nrows();
    let mut uf = ParityUf::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (x, y) = (mm[(i, j)], mm[(j, i)]);
            let small_x = x.abs() < TAU_STRUCT;
            let small_y = y.abs() < TAU_STRUCT;
            if small_x && small_y {
                continue;
            }
            if small_x || small_y {
                return None;
            }
            let scale = 1.0 + x.abs().max(y.abs());
            let ok = if (x - y).abs() < TAU_STRUCT * scale {
                uf.union(i, j, false)
            } else if (x + y).abs() < TAU_STRUCT * scale {
                uf.union(i, j, true)
            } else {
                false
            };
            if !ok {
                return None;
            }
        }
    }
    Some(uf.assign())
}

/// Infer `(Σ_int, Σ_ext)` so that the signature symmetry `ΣM = MᵀΣ` holds, with
/// `Σ_ext[0] = +1`.
pub fn infer_signatures(real: &StructuredRealization) -> Option<(Signature, Signature)> {
    if real.p() != real.m() {
        return None;
    }
    let n = real.n();
    let mm = real.m_matrix();
    let mut sig = infer_square_signature(&mm)?;
    if real.m() > 0 && sig[n] == -1 {
        let mut uf = ParityUf::new(mm.nrows());
        // recompute component membership of the first external index
        for i in 0..mm.nrows() {
            for j in (i + 1)..mm.nrows() {
                if mm[(i, j)].abs() >= TAU_STRUCT || mm[(j, i)].abs() >= TAU_STRUCT {
                    uf.union(i, j, sig[i] != sig[j]);
                }
            }
        }
        let r = uf.root(n);
        for (i, s) in sig.iter_mut().enumerate() {
            if uf.root(i) == r {
                *s = -*s;
            }
        }
    }
    let si = Signature(sig[..n].to_vec());
    let se = Signature(sig[n..].to_vec());
    Some((si, se))
}

/// `C (sI − A)⁻¹ B + D`.
pub fn transfer_eval(real: &StructuredRealization, s: Complex<f64>) -> Result<CMat> {
    resolvent_transfer(real.a(), real.b(), real.c(), real.d(), s)
}

pub fn resolvent_transfer(a: &Mat, b: &Mat, c: &Mat, d: &Mat, s: Complex<f64>) -> Result<CMat> {
    let n = a.nrows();
    let dc = to_complex(d);
    if n == 0 {
        return Ok(dc);
    }
    let mut r = -to_complex(a);
    for i in 0..n {
        r[(i, i)] += s;
    }
    let lu = r.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if dmin <= 1e-14 * dmax.max(1e-300) {
        return Err(Error::ResolventSingular(s));
    }
    let x = lu.solve(&to_complex(b)).ok_or(Error::ResolventSingular(s))?;
    Ok(to_complex(c) * x + dc)
}

/// Internal signature implied by the tag when none is attached.
fn implied_sigma_int(real: &StructuredRealization) -> Result<Signature> {
    if let Some(s) = real.sigma_int() {
        return Ok(s.clone());
    }
    let n = real.n();
    match real.class_tag() {
        ClassTag::T | ClassTag::RT => Ok(Signature::plus(n)),
        ClassTag::LT | ClassTag::RLT => Ok(Signature::minus(n)),
        ClassTag::CT | ClassTag::RCT => Ok(Signature::plus(n)),
        ClassTag::LCT => {
            if let Some(s) = real.partition().and_then(|p| p.state_split) {
                Ok(Signature::split(s, n))
            } else {
                infer_signatures(real)
                    .map(|(si, _)| si)
                    .ok_or_else(|| Error::Structure("LCT realization has no consistent signature".into()))
            }
        }
        t => Err(Error::Structure(format!("controllable reduction needs LCT, RLT, RCT or a subclass, got {t}"))),
    }
}

/// Orthonormal basis of the reachable subspace of (A, B).
pub fn controllable_basis(a: &Mat, b: &Mat) -> Mat {
    let n = a.nrows();
    let mut v = orth(b);
    loop {
        let av = a * &v;
        let next = orth(&hcat(&[&v, &av]));
        if next.ncols() == v.ncols() || next.ncols() == n {
            return if next.ncols() == n { eye(n) } else { v };
        }
        v = next;
    }
}

fn orient_columns(q: &mut Mat) {
    for j in 0..q.ncols() {
        let mut best = 0.0;
        let mut sign = 1.0;
        for i in 0..q.nrows() {
            if q[(i, j)].abs() > best + 1e-12 {
                best = q[(i, j)].abs();
                sign = q[(i, j)].signum();
            }
        }
        if sign < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
}

/// Reachable subspace grown one sign block at a time, so it stays invariant
/// under the signature and both blocks share one rank threshold.
fn signed_reachable(a: &Mat, b: &Mat, plus: &[usize], minus: &[usize]) -> (Mat, Mat) {
    let n = a.nrows();
    let scale = norm2(a).max(norm2(b)).max(f64::MIN_POSITIVE);
    let thr = 1e-10 * n.max(1) as f64 * scale;
    let restrict = |m: &Mat, idx: &[usize]| Mat::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)]);
    let lift = |q: &Mat, idx: &[usize]| {
        let mut full = Mat::zeros(n, q.ncols());
        for (i, &r) in idx.iter().enumerate() {
            full.set_row(r, &q.row(i));
        }
        full
    };
    let mut vp = Mat::zeros(n, 0);
    let mut vm = Mat::zeros(n, 0);
    let mut fresh = b.clone();
    loop {
        let basis = hcat(&[&vp, &vm]);
        let w = &fresh - &basis * (basis.transpose() * &fresh);
        let np = lift(&orth_above(&restrict(&w, plus), thr), plus);
        let nm = lift(&orth_above(&restrict(&w, minus), thr), minus);
        if np.ncols() + nm.ncols() == 0 {
            return (vp, vm);
        }
        // re-orthonormalize against the existing block
        let np = orth_above(&(&np - &vp * (vp.transpose() * &np)), 0.5);
        let nm = orth_above(&(&nm - &vm * (vm.transpose() * &nm)), 0.5);
        if np.ncols() + nm.ncols() == 0 {
            return (vp, vm);
        }
        fresh = a * hcat(&[&np, &nm]);
        vp = hcat(&[&vp, &np]);
        vm = hcat(&[&vm, &nm]);
        if vp.ncols() + vm.ncols() >= n {
            return (vp, vm);
        }
    }
}

/// Restrict to the controllable subspace, keeping the structure.
pub fn reduce_to_controllable(real: &StructuredRealization) -> Result<StructuredRealization> {
    let sig = implied_sigma_int(real)?;
    let n = real.n();
    let plus: Vec<usize> = (0..n).filter(|&i| sig.entries()[i] == 1).collect();
    let minus: Vec<usize> = (0..n).filter(|&i| sig.entries()[i] == -1).collect();
    let (mut vp, mut vm) = signed_reachable(real.a(), real.b(), &plus, &minus);
    orient_columns(&mut vp);
    orient_columns(&mut vm);
    let q1 = hcat(&[&vp, &vm]);
    let a = q1.transpose() * real.a() * &q1;
    let b = q1.transpose() * real.b();
    let c = real.c() * &q1;
    // clean exact structural zeros
    let a = match real.class_tag() {
        ClassTag::LCT => (&a - a.transpose()) * 0.5,
        ClassTag::RLT | ClassTag::RCT => sym(&a),
        _ => a,
    };
    let new_sig = Signature::split(vp.ncols(), vp.ncols() + vm.ncols());
    let out = StructuredRealization::new(a, b, c, real.d().clone())?;
    let partition = real.partition().map(|p| BlockPartition {
        state_split: if real.class_tag() == ClassTag::LCT { Some(vp.ncols()) } else { p.state_split.map(|_| vp.ncols()) },
        ..p
    });
    let partition = match (partition, real.class_tag()) {
        (None, ClassTag::LCT) => None,
        (p, _) => p,
    };
    let sigma_ext = real.sigma_ext().cloned();
    let sigma_int = sigma_ext.as_ref().map(|_| new_sig.clone());
    let reduced = out.with_raw_meta(sigma_int, sigma_ext, real.class_tag(), partition);
    let rep = validate_structure(&reduced, real.class_tag())?;
    if !rep.passed {
        return Err(Error::Internal(format!("reduction broke structure: {}", rep.summary())));
    }
    Ok(reduced)
}

/// Random probe points in the open right half plane.
pub fn probe_points(count: usize, seed: u64) -> Vec<Complex<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Complex::new(rng.random_range(0.1..3.0), rng.random_range(-3.0..3.0))).collect()
}

pub fn rel_err(a: &CMat, b: &CMat) -> f64 {
    let diff = cmax_abs(&(a - b));
    diff / (1.0 + cmax_abs(b))
}

/// Lossless network with Σ_int = diag(I_s, −I) and Σ_ext = diag(I_k, −I).
/// `A12` is s×(n−s), `B12` is s×(m−k), `B21` is (n−s)×k, `D12` is k×(m−k).
pub fn build_lct(a12: &Mat, b12: &Mat, b21: &Mat, d12: Option<&Mat>) -> Result<StructuredRealization> {
    let s = a12.nrows();
    let r = a12.ncols();
    let k = b21.ncols();
    let q = b12.ncols();
    if b12.nrows() != s || b21.nrows() != r {
        return Err(Error::Dimension("LCT blocks do not conform".into()));
    }
    let zd = Mat::zeros(k, q);
    let d12 = d12.unwrap_or(&zd);
    if d12.shape() != (k, q) {
        return Err(Error::Dimension("D12 shape".into()));
    }
    let a = block(&[s, r], &[s, r], &[&[&zeros(s, s), a12], &[&(-a12.transpose()), &zeros(r, r)]]);
    let b = block(&[s, r], &[k, q], &[&[&zeros(s, k), b12], &[b21, &zeros(r, q)]]);
    let c = b.transpose();
    let d = block(&[k, q], &[k, q], &[&[&zeros(k, k), d12], &[&(-d12.transpose()), &zeros(q, q)]]);
    let real = StructuredRealization::new(a, b, c, d)?;
    let part = BlockPartition { row_split: k, col_split: k, state_split: Some(s) };
    real.with_tag(ClassTag::LCT, Some(part))?.with_signatures(Signature::split(s, s + r), Signature::split(k, k + q))
}

fn lossy_parts(a: &Mat, b1: &Mat, b2: &Mat, d11: &Mat, d12: &Mat, d22: &Mat) -> Result<(usize, usize, usize, Mat, Mat)> {
    let n = a.nrows();
    let k = d11.nrows();
    let q = d22.nrows();
    let b1 = if b1.is_empty() { zeros(n, k) } else { b1.clone() };
    let b2 = if b2.is_empty() { zeros(n, q) } else { b2.clone() };
    let d12 = if d12.is_empty() { zeros(k, q) } else { d12.clone() };
    if a.ncols() != n || b1.shape() != (n, k) || b2.shape() != (n, q) || d12.shape() != (k, q) || d11.ncols() != k || d22.ncols() != q {
        return Err(Error::Dimension("lossy builder blocks do not conform".into()));
    }
    Ok((n, k, q, hcat(&[&b1, &b2]), d12))
}

fn check_pd_like(cond: &str, blk: &Mat) -> Result<()> {
    let lam = min_eig_sym(blk);
    if lam.is_finite() && lam <= -tau_psd(blk) {
        return Err(Error::Definiteness { condition: cond.into(), eigenvalue: lam });
    }
    Ok(())
}

/// Resistor–inductor–transformer network (Σ_int = −I).
pub fn build_rlt(a: &Mat, b1: &Mat, b2: &Mat, d11: &Mat, d12: &Mat, d22: &Mat) -> Result<StructuredRealization> {
    let (n, k, q, b, d12) = lossy_parts(a, b1, b2, d11, d12, d22)?;
    let b1 = sub(&b, 0, 0, n, k);
    let b2 = sub(&b, 0, k, n, q);
    let a = sym(a);
    let blk = block(&[n, q], &[n, q], &[&[&(-&a), &b2], &[&b2.transpose(), d22]]);
    check_pd_like("−A ⪰ 0 (as part of [−A B₂; B₂ᵀ D₂₂] ⪰ 0)", &blk)?;
    check_pd_like("D₁₁ ⪰ 0", d11)?;
    let c = vcat(&[&b1.transpose(), &(-b2.transpose())]);
    let d = block(&[k, q], &[k, q], &[&[d11, &d12], &[&(-d12.transpose()), d22]]);
    StructuredRealization::new(a, b, c, d)?
        .with_tag(ClassTag::RLT, Some(BlockPartition::ports(k)))?
        .with_signatures(Signature::minus(n), Signature::split(k, k + q))
}

/// Resistor–capacitor–transformer network (Σ_int = I).
pub fn build_rct(a: &Mat, b1: &Mat, b2: &Mat, d11: &Mat, d12: &Mat, d22: &Mat) -> Result<StructuredRealization> {
    let (n, k, q, b, d12) = lossy_parts(a, b1, b2, d11, d12, d22)?;
    let b1 = sub(&b, 0, 0, n, k);
    let b2 = sub(&b, 0, k, n, q);
    let a = sym(a);
    let blk = block(&[n, k], &[n, k], &[&[&(-&a), &b1], &[&b1.transpose(), d11]]);
    check_pd_like("−A ⪰ 0 (as part of [−A B₁; B₁ᵀ D₁₁] ⪰ 0)", &blk)?;
    check_pd_like("D₂₂ ⪰ 0", d22)?;
    let c = vcat(&[&(-b1.transpose()), &b2.transpose()]);
    let d = block(&[k, q], &[k, q], &[&[d11, &d12], &[&(-d12.transpose()), d22]]);
    StructuredRealization::new(a, b, c, d)?
        .with_tag(ClassTag::RCT, Some(BlockPartition::ports(k)))?
        .with_signatures(Signature::plus(n), Signature::split(k, k + q))
}
