//! Plant builders for power grids and optimisation circuits, plus
//! netlists that realise the closed-form controllers.

use crate::error::{Error, Result};
use crate::linalg::*;
use crate::netgraph::kron::kron_reduce;
use crate::netgraph::netlist::{ElementKind, Netlist};
use crate::structured::{build_lct, StructuredRealization};

/// Linearised swing-equation grid seen from its renewable buses.
#[derive(Debug, Clone)]
pub struct SwingGrid {
    pub real: StructuredRealization,
    /// Kron-reduced Laplacian over `buses`
    pub y: Mat,
    /// renewable buses first, then machine buses
    pub buses: Vec<usize>,
    /// number of line-flow states
    pub flows: usize,
}

fn check_bus_sets(n: usize, renewable: &[usize], inertias: &[(usize, f64)]) -> Result<Vec<usize>> {
    if renewable.is_empty() {
        return Err(Error::Structure("no renewable buses".into()));
    }
    let mut buses: Vec<usize> = renewable.to_vec();
    for &(k, m) in inertias {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Structure(format!("inertia at bus {k} must be positive, got {m}")));
        }
        buses.push(k);
    }
    let mut seen = vec![false; n];
    for &b in &buses {
        if b >= n {
            return Err(Error::Dimension(format!("bus {b} out of range")));
        }
        if seen[b] {
            return Err(Error::Structure(format!("bus {b} listed twice")));
        }
        seen[b] = true;
    }
    Ok(buses)
}

/// Build the lossless grid model. State is line flows then `√M ω` at the
/// machines; inputs are renewable injections, outputs their frequencies.
pub fn build_swing_grid(l: &Mat, renewable: &[usize], inertias: &[(usize, f64)]) -> Result<SwingGrid> {
    let buses = check_bus_sets(l.nrows(), renewable, inertias)?;
    let y = kron_reduce(l, &buses)?;
    let q = renewable.len();
    let scale = 1.0 + max_abs(&y);
    for i in 0..q {
        if y[(i, i)] <= 1e-12 * scale {
            return Err(Error::Structure(format!("renewable bus {} is disconnected from the grid", renewable[i])));
        }
    }
    let eig = y.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..y.nrows()).filter(|&i| eig.eigenvalues[i] > 1e-10 * lmax.max(1e-300)).collect();
    let r = keep.len();
    let nb = y.nrows();
    let mut rf = zeros(nb, r);
    for (k, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for row in 0..nb {
            rf[(row, k)] = eig.eigenvectors[(row, i)] * s;
        }
    }
    let nm = inertias.len();
    let rr = sub(&rf, 0, 0, q, r);
    let rm = sub(&rf, q, 0, nm, r);
    let minv_half = diag(&inertias.iter().map(|&(_, m)| 1.0 / m.sqrt()).collect::<Vec<_>>());
    let a12 = rm.transpose() * minv_half;
    let real = build_lct(&a12, &rr.transpose(), &zeros(nm, 0), None)?;
    Ok(SwingGrid { real, y, buses, flows: r })
}

/// Electrical analogue of the grid: an inductor `1/w` per line, a
/// capacitor `M` to ground at each machine bus, a voltage-driven port at
/// each renewable bus. Bus `i` is node `n{i+1}`.
pub fn swing_grid_netlist(l: &Mat, renewable: &[usize], inertias: &[(usize, f64)]) -> Result<Netlist> {
    crate::netgraph::kron::check_laplacian(l)?;
    check_bus_sets(l.nrows(), renewable, inertias)?;
    let name = |i: usize| format!("n{}", i + 1);
    let mut net = Netlist::new();
    let n = l.nrows();
    for i in 0..n {
        net.node(&name(i));
    }
    for i in 0..n {
        for j in i + 1..n {
            if l[(i, j)] < 0.0 {
                net.add(ElementKind::L, &name(i), &name(j), -1.0 / l[(i, j)])?;
            }
        }
    }
    for &(k, m) in inertias {
        net.add(ElementKind::C, &name(k), "0", m)?;
    }
    for &k in renewable {
        net.add_port(&name(k), "0")?;
    }
    Ok(net)
}

/// Copy of `net` with a resistor of `ohms` in series with every port.
/// With voltage drive the result is `G(I + ohms·G)⁻¹` for port admittance `G`.
pub fn with_series_port_resistors(net: &Netlist, ohms: f64) -> Result<Netlist> {
    let mut out = Netlist::new();
    for name in net.nodes().iter().skip(1) {
        out.node(name);
    }
    for e in net.elements() {
        match e {
            crate::netgraph::netlist::Element::TwoTerminal { kind, label, pos, neg, value } => {
                out.add_labeled(*kind, label, net.node_name(*pos), net.node_name(*neg), *value)?
            }
            crate::netgraph::netlist::Element::Transformer { label, p1, n1, p2, n2, ratio } => {
                out.add_transformer(label, [net.node_name(*p1), net.node_name(*n1), net.node_name(*p2), net.node_name(*n2)], *ratio)?
            }
        }
    }
    for (i, p) in net.ports().iter().enumerate() {
        let mut t = format!("t{}", i + 1);
        while net.node_index(&t).is_some() {
            t.push('_');
        }
        out.add_labeled(ElementKind::R, &format!("k{}", i + 1), &t, net.node_name(p.pos), ohms)?;
        out.add_port(&t, net.node_name(p.neg))?;
    }
    Ok(out)
}

/// Resistors of `ohms` across each of `ports` port pairs.
pub fn termination_netlist(ports: usize, ohms: f64) -> Result<Netlist> {
    let mut net = Netlist::new();
    for i in 0..ports {
        let a = format!("p{}", i + 1);
        net.add_labeled(ElementKind::R, &format!("{}", i + 1), &a, "0", ohms)?;
        net.add_port(&a, "0")?;
    }
    Ok(net)
}

/// Lossless circuit whose steady state solves
/// `min ½‖A_ls x − b‖²` subject to `C_ls x = d`.
#[derive(Debug, Clone)]
pub struct LeastSquaresCircuit {
    /// control input `u` through `B`, output `y = A_ls x₁`
    pub plant: StructuredRealization,
    /// reference injection for `r₁`
    pub b_r1: Mat,
    /// reference injection for `r₂`
    pub b_r2: Mat,
    pub n: usize,
    pub p: usize,
}

/// Requires `C_ls` of full row rank and `[A_ls; C_ls]` of full column rank.
pub fn build_least_squares_circuit(a_ls: &Mat, c_ls: &Mat) -> Result<LeastSquaresCircuit> {
    let n = a_ls.ncols();
    let p = c_ls.nrows();
    if c_ls.ncols() != n && p > 0 {
        return Err(Error::Dimension("A_ls and C_ls column counts differ".into()));
    }
    let c_ls = if p == 0 { zeros(0, n) } else { c_ls.clone() };
    if rank(&c_ls) != p {
        return Err(Error::Structure("C_ls is not right invertible".into()));
    }
    if rank(&vcat(&[a_ls, &c_ls])) != n {
        return Err(Error::Structure("[A_ls; C_ls] is not left invertible".into()));
    }
    let plant = build_lct(&(-c_ls.transpose()), &a_ls.transpose(), &zeros(p, 0), None)?;
    let b_r1 = -plant.b().clone();
    let b_r2 = vcat(&[&zeros(n, p), &eye(p)]);
    Ok(LeastSquaresCircuit { plant, b_r1, b_r2, n, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::mna::{impedance_at, Drive};
    use nalgebra::Complex;

    #[test]
    fn one_line_grid_has_two_states() {
        let l = from_rows(&[&[2.0, -2.0], &[-2.0, 2.0]]);
        let g = build_swing_grid(&l, &[0], &[(1, 0.5)]).unwrap();
        assert_eq!(g.real.n(), 2);
        assert_eq!(g.flows, 1);
    }

    #[test]
    fn grid_admittance_matches_netlist() {
        let l = from_rows(&[&[3.0, -1.0, -2.0, 0.0], &[-1.0, 2.5, 0.0, -1.5], &[-2.0, 0.0, 2.5, -0.5], &[0.0, -1.5, -0.5, 2.0]]);
        let ren = [0, 3];
        let inert = [(1, 2.0), (2, 0.7)];
        let g = build_swing_grid(&l, &ren, &inert).unwrap();
        let net = swing_grid_netlist(&l, &ren, &inert).unwrap();
        for s in [Complex::new(0.3, 0.8), Complex::new(1.1, -2.5)] {
            let y = impedance_at(&net, s, &[Drive::Voltage; 2]).unwrap();
            let t = g.real.transfer(s).unwrap();
            assert!((&y - &t).norm() < 1e-10 * t.norm(), "{y} vs {t}");
        }
    }

    #[test]
    fn disconnected_renewable_rejected() {
        let l = from_rows(&[&[0.0, 0.0, 0.0], &[0.0, 1.0, -1.0], &[0.0, -1.0, 1.0]]);
        assert!(build_swing_grid(&l, &[0], &[(1, 1.0)]).is_err());
    }

    #[test]
    fn scalar_least_squares_plant() {
        let a = from_rows(&[&[1.0], &[1.0]]);
        let c = build_least_squares_circuit(&a, &zeros(0, 1)).unwrap();
        assert_eq!(c.plant.n(), 1);
        assert_eq!(c.plant.b().clone(), from_rows(&[&[1.0, 1.0]]));
        assert_eq!(c.plant.a().clone(), zeros(1, 1));
    }

    #[test]
    fn series_resistor_copy_admittance() {
        let net = crate::netgraph::netlist::parse_netlist("L a 0 2\nC a 0 1\nP a 0\n").unwrap();
        let k = with_series_port_resistors(&net, 2.0).unwrap();
        let s = Complex::new(0.4, 1.3);
        let g = impedance_at(&net, s, &[Drive::Voltage]).unwrap()[(0, 0)];
        let want = g / (g * 2.0 + 1.0);
        let got = impedance_at(&k, s, &[Drive::Voltage]).unwrap()[(0, 0)];
        assert!((got - want).norm() < 1e-12);
    }
}
