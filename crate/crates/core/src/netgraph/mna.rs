//! Modified nodal analysis and descriptor reduction.
//!
//! Unknowns: non-ground node voltages, inductor currents, transformer
//! winding currents, then currents of voltage-driven ports.

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::linalg::*;
use crate::netgraph::netlist::{Element, ElementKind, Netlist};
use crate::structured::StructuredRealization;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Drive {
    /// port current in, port voltage out (impedance)
    Current,
    /// port voltage in, port current out (admittance)
    Voltage,
}

/// `E dx/dt = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone)]
pub struct Descriptor {
    pub e: Mat,
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

pub fn mna_descriptor(net: &Netlist, drive: &[Drive]) -> Result<Descriptor> {
    let np = net.ports().len();
    if drive.len() != np {
        return Err(Error::Dimension(format!("{} drive kinds for {} ports", drive.len(), np)));
    }
    let nv = net.num_nodes() - 1;
    let nl = net.count(ElementKind::L);
    let nt = net.transformer_count();
    let nvp = drive.iter().filter(|d| **d == Drive::Voltage).count();
    let nx = nv + nl + 2 * nt + nvp;
    let mut e = zeros(nx, nx);
    let mut a = zeros(nx, nx);
    let mut b = zeros(nx, np);
    let mut c = zeros(np, nx);
    let d = zeros(np, np);
    let v = |node: usize| if node == 0 { None } else { Some(node - 1) };

    // stamp `val` onto the conductance-like pattern between two nodes
    fn stamp(m: &mut Mat, p: Option<usize>, n: Option<usize>, val: f64) {
        if let Some(p) = p {
            m[(p, p)] += val;
        }
        if let Some(n) = n {
            m[(n, n)] += val;
        }
        if let (Some(p), Some(n)) = (p, n) {
            m[(p, n)] -= val;
            m[(n, p)] -= val;
        }
    }
    // branch current `k` leaves node p and enters node n
    fn branch(a: &mut Mat, p: Option<usize>, n: Option<usize>, k: usize) {
        if let Some(p) = p {
            a[(p, k)] -= 1.0;
            a[(k, p)] += 1.0;
        }
        if let Some(n) = n {
            a[(n, k)] += 1.0;
            a[(k, n)] -= 1.0;
        }
    }

    let mut k = nv;
    for el in net.elements() {
        match *el {
            Element::TwoTerminal { kind, pos, neg, value, .. } => match kind {
                ElementKind::R => stamp(&mut a, v(pos), v(neg), -1.0 / value),
                ElementKind::C => stamp(&mut e, v(pos), v(neg), value),
                ElementKind::L => {
                    branch(&mut a, v(pos), v(neg), k);
                    e[(k, k)] = value;
                    k += 1;
                }
            },
            Element::Transformer { p1, n1, p2, n2, ratio, .. } => {
                let (i1, i2) = (k, k + 1);
                for (p, n, i) in [(p1, n1, i1), (p2, n2, i2)] {
                    if let Some(p) = v(p) {
                        a[(p, i)] -= 1.0;
                    }
                    if let Some(n) = v(n) {
                        a[(n, i)] += 1.0;
                    }
                }
                // 0 = v1 − n v2
                if let Some(p) = v(p1) {
                    a[(i1, p)] += 1.0;
                }
                if let Some(n) = v(n1) {
                    a[(i1, n)] -= 1.0;
                }
                if let Some(p) = v(p2) {
                    a[(i1, p)] -= ratio;
                }
                if let Some(n) = v(n2) {
                    a[(i1, n)] += ratio;
                }
                // 0 = i2 + n i1
                a[(i2, i2)] = 1.0;
                a[(i2, i1)] = ratio;
                k += 2;
            }
        }
    }
    for (j, (port, dk)) in net.ports().iter().zip(drive).enumerate() {
        let (p, n) = (v(port.pos), v(port.neg));
        match dk {
            Drive::Current => {
                if let Some(p) = p {
                    b[(p, j)] += 1.0;
                    c[(j, p)] += 1.0;
                }
                if let Some(n) = n {
                    b[(n, j)] -= 1.0;
                    c[(j, n)] -= 1.0;
                }
            }
            Drive::Voltage => {
                // source current enters the network at pos
                if let Some(p) = p {
                    a[(p, k)] += 1.0;
                    a[(k, p)] += 1.0;
                }
                if let Some(n) = n {
                    a[(n, k)] -= 1.0;
                    a[(k, n)] -= 1.0;
                }
                b[(k, j)] = -1.0;
                c[(j, k)] = 1.0;
                k += 1;
            }
        }
    }
    Ok(Descriptor { e, a, b, c, d })
}

/// Solve `(sE − A) X = B` by partial-pivot LU; `None` when singular.
fn pencil_solve(e: &Mat, a: &Mat, b: &Mat, s: C64) -> Option<CMat> {
    let n = e.nrows();
    if n == 0 {
        return Some(CMat::zeros(0, b.ncols()));
    }
    let m = to_complex(e) * s - to_complex(a);
    let lu = m.clone().lu();
    let u = lu.u();
    let dmax = (0..n).map(|i| u[(i, i)].norm()).fold(0.0, f64::max);
    let dmin = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if dmax == 0.0 || dmin < 1e-13 * dmax.max(cmax_abs(&m)) {
        return None;
    }
    lu.solve(&to_complex(b))
}

/// `C (sE − A)⁻¹ B + D`.
pub fn descriptor_transfer(d: &Descriptor, s: C64) -> Result<CMat> {
    let x = pencil_solve(&d.e, &d.a, &d.b, s).ok_or(Error::PencilSingular(s))?;
    Ok(to_complex(&d.c) * x + to_complex(&d.d))
}

/// Port impedance (current drive) or admittance (voltage drive) at `s`.
pub fn impedance_at(net: &Netlist, s: C64, drive: &[Drive]) -> Result<CMat> {
    let d = mna_descriptor(net, drive)?;
    descriptor_transfer(&d, s)
}

fn check_regular(d: &Descriptor) -> Result<()> {
    let n = d.e.nrows();
    if n == 0 {
        return Ok(());
    }
    let probes = [Complex::new(0.37, 1.21), Complex::new(2.9, -0.4), Complex::new(-1.3, 7.7)];
    for s in probes {
        let m = to_complex(&d.e) * s - to_complex(&d.a);
        let sv = csingular_values(&m);
        let (mx, mn) = (sv[0], sv[sv.len() - 1]);
        let r = if mx > 0.0 { mn / mx } else { 0.0 };
        if r > 1e-13 {
            return Ok(());
        }
    }
    Err(Error::IrregularPencil(probes.to_vec()))
}

/// State-space model with the same transfer function. The finite part of
/// the pencil is isolated with a spectral projection of `(s₀E − A)⁻¹E`;
/// the nilpotent part must only feed through.
pub fn descriptor_to_statespace(d: &Descriptor) -> Result<StructuredRealization> {
    check_regular(d)?;
    let n = d.e.nrows();
    let (np_in, np_out) = (d.b.ncols(), d.c.nrows());
    if n == 0 {
        return StructuredRealization::new(zeros(0, 0), zeros(0, np_in), zeros(np_out, 0), d.d.clone());
    }
    let mut best: Option<(f64, f64)> = None;
    for s0 in [1.0, 2.3, 0.57, 3.7, 0.19, 7.1, 13.3] {
        let cnd = cond(&(&d.e * s0 - &d.a));
        if best.is_none_or(|b| cnd < b.1) {
            best = Some((s0, cnd));
        }
        if cnd < 1e8 {
            break;
        }
    }
    let (s0, cnd) = best.unwrap();
    if !(cnd < 1e13) {
        return Err(Error::PencilSingular(Complex::new(s0, 0.0)));
    }
    let m = inverse(&(&d.e * s0 - &d.a))?;
    let nmat = &m * &d.e;
    let mb = &m * &d.b;

    // index: smallest ν with rank Nᵛ = rank Nᵛ⁺¹
    let mut pow = nmat.clone();
    let mut r = rank(&pow);
    let mut nu = 1;
    loop {
        let next = &pow * &nmat;
        let rn = rank(&next);
        if rn == r || nu > n {
            break;
        }
        pow = next;
        r = rn;
        nu += 1;
    }
    let (v1, v0) = range_and_kernel(&pow);
    let t = hcat(&[&v1, &v0]);
    let tinv = inverse(&t)?;
    let nt = &tinv * &nmat * &t;
    let bt = &tinv * &mb;
    let ct = &d.c * &t;
    let k = v1.ncols();
    let n1 = sub(&nt, 0, 0, k, k);
    let n0 = sub(&nt, k, k, n - k, n - k);
    let (b1, b0) = (sub(&bt, 0, 0, k, np_in), sub(&bt, k, 0, n - k, np_in));
    let (c1, c0) = (sub(&ct, 0, 0, np_out, k), sub(&ct, 0, k, np_out, n - k));

    let scale = 1.0 + max_abs(&c0) * max_abs(&b0) * (1.0 + max_abs(&n0));
    let mut p = b0.clone();
    for _ in 0..(n - k) {
        p = &n0 * &p;
        let g = max_abs(&(&c0 * &p));
        if g > 1e-9 * scale {
            return Err(Error::Improper(format!("port response grows like s (coefficient {g:.3e})")));
        }
    }
    let n1inv = inverse(&n1)?;
    let ar = eye(k) * s0 - &n1inv;
    let cr = &c1 * &n1inv;
    let dr = &d.d + &c0 * &b0;
    StructuredRealization::new(ar, b1, cr, dr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::netlist::parse_netlist;

    fn c(re: f64, im: f64) -> C64 {
        Complex::new(re, im)
    }

    #[test]
    fn series_rlc_impedance() {
        let net = parse_netlist("R a b 2\nL b c 0.5\nC c 0 0.25\nP a 0\n").unwrap();
        let s = c(0.3, 1.7);
        let z = impedance_at(&net, s, &[Drive::Current]).unwrap();
        let want = c(2.0, 0.0) + s * 0.5 + (s * 0.25).inv();
        assert!((z[(0, 0)] - want).norm() < 1e-12 * want.norm());
        let y = impedance_at(&net, s, &[Drive::Voltage]).unwrap();
        assert!((y[(0, 0)] - want.inv()).norm() < 1e-12);
    }

    #[test]
    fn transformer_scales_impedance() {
        let net = parse_netlist("T a 0 b 0 3\nR b 0 2\nP a 0\n").unwrap();
        let z = impedance_at(&net, c(1.0, 0.0), &[Drive::Current]).unwrap();
        assert!((z[(0, 0)].re - 18.0).abs() < 1e-12);
    }

    #[test]
    fn statespace_matches_pencil() {
        let net = parse_netlist("R a b 2\nL b c 0.5\nC c 0 0.25\nC a 0 1\nP a 0\n").unwrap();
        let d = mna_descriptor(&net, &[Drive::Current]).unwrap();
        let r = descriptor_to_statespace(&d).unwrap();
        for s in [c(0.2, 0.9), c(1.5, -2.0), c(0.01, 30.0)] {
            let z0 = descriptor_transfer(&d, s).unwrap();
            let z1 = r.transfer(s).unwrap();
            assert!((&z0 - &z1).norm() < 1e-9 * z0.norm());
        }
    }

    #[test]
    fn voltage_driven_capacitor_is_improper() {
        let net = parse_netlist("C a 0 1\nP a 0\n").unwrap();
        let d = mna_descriptor(&net, &[Drive::Voltage]).unwrap();
        assert!(matches!(descriptor_to_statespace(&d), Err(Error::Improper(_))));
    }

    #[test]
    fn floating_node_is_irregular() {
        let net = parse_netlist("R a 0 1\nP a 0\nR x y 1\n").unwrap();
        let d = mna_descriptor(&net, &[Drive::Current]).unwrap();
        assert!(matches!(descriptor_to_statespace(&d), Err(Error::IrregularPencil(_))));
    }
}
