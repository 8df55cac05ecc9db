//! Seeded random instances for property tests and benchmarks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::*;
use crate::netgraph::{ElementKind, Netlist};
use crate::plant::{embed_problem2, GeneralizedPlant, PlantSignatures};
use crate::structured::{build_lct, build_rct, build_rlt, controllable_basis, Signature, StructuredRealization};
use crate::synthesis::{lqg, Controller};

pub fn gaussian_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Symmetric positive definite with eigenvalues in `[lo, hi]`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Mat {
    let q = gaussian_matrix(rng, n, n).qr().q();
    let d = diag(&(0..n).map(|_| rng.random_range(lo..=hi)).collect::<Vec<_>>());
    sym(&(&q * d * q.transpose()))
}

/// Controllable lossless plant with `D = 0` and `n ≤ n_max` states.
pub fn random_lct<R: Rng>(rng: &mut R, n_max: usize, m_max: usize) -> StructuredRealization {
    loop {
        let n = rng.random_range(2..=n_max.max(2));
        let s = rng.random_range(1..n);
        let r = n - s;
        let m = rng.random_range(1..=m_max.max(1));
        let k = rng.random_range(0..=m);
        let q = m - k;
        let a12 = gaussian_matrix(rng, s, r);
        let b12 = gaussian_matrix(rng, s, q);
        let b21 = gaussian_matrix(rng, r, k);
        let Ok(real) = build_lct(&a12, &b12, &b21, None) else { continue };
        if controllable_basis(real.a(), real.b()).ncols() == n {
            return real;
        }
    }
}

/// Generalized plant embedding a signature-symmetric `(A, B, C)`:
/// `Σ_int A` symmetric and `C = BᵀΣ_int`, with the signatures it satisfies.
pub fn random_symmetric_plant<R: Rng>(rng: &mut R, n_max: usize, m_max: usize) -> (GeneralizedPlant, PlantSignatures) {
    loop {
        let n = rng.random_range(1..=n_max.max(1));
        let m = rng.random_range(1..=m_max.max(1));
        let sig: Vec<i8> = (0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        let s = Signature::new(sig).expect("±1 entries").matrix();
        let h = gaussian_matrix(rng, n, n);
        let a = &s * sym(&h);
        let b = gaussian_matrix(rng, n, m);
        let c = b.transpose() * &s;
        let g = embed_problem2(&a, &b, &c);
        if g.check_dgkf().is_err() {
            continue;
        }
        if let Some(sigs) = g.infer_signatures() {
            return (g, sigs);
        }
    }
}

/// Parts `(A, B₁, B₂, D₁₁, D₁₂, D₂₂)` with a positive definite coupling
/// block `[−A B_s; B_sᵀ D_ss]` for the strict side and `D_ww ⪰ 0` on the
/// weak side; `strict_first` puts the strict ports first.
#[allow(clippy::type_complexity)]
fn lossy_parts<R: Rng>(rng: &mut R, n_max: usize, strict_first: bool) -> (Mat, Mat, Mat, Mat, Mat, Mat) {
    let n = rng.random_range(1..=n_max.max(1));
    let ks = rng.random_range(1..=3);
    let kw = rng.random_range(0..=2);
    let p = random_spd(rng, n + ks, 0.2, 3.0);
    let a = -sub(&p, 0, 0, n, n);
    let bs = sub(&p, 0, n, n, ks);
    let ds = sub(&p, n, n, ks, ks);
    let bw = gaussian_matrix(rng, n, kw);
    let g = gaussian_matrix(rng, kw, kw);
    let dw = sym(&(&g * g.transpose())) * 0.5;
    if strict_first {
        let d12 = gaussian_matrix(rng, ks, kw);
        (a, bs, bw, ds, d12, dw)
    } else {
        let d12 = gaussian_matrix(rng, kw, ks);
        (a, bw, bs, dw, d12, ds)
    }
}

/// RLT plant with `[−A B₂; B₂ᵀ D₂₂] ≻ 0`.
pub fn random_strict_rlt<R: Rng>(rng: &mut R, n_max: usize) -> StructuredRealization {
    loop {
        let (a, b1, b2, d11, d12, d22) = lossy_parts(rng, n_max, false);
        if let Ok(r) = build_rlt(&a, &b1, &b2, &d11, &d12, &d22) {
            return r;
        }
    }
}

/// RCT plant with `[−A B₁; B₁ᵀ D₁₁] ≻ 0`.
pub fn random_strict_rct<R: Rng>(rng: &mut R, n_max: usize) -> StructuredRealization {
    loop {
        let (a, b1, b2, d11, d12, d22) = lossy_parts(rng, n_max, true);
        if let Ok(r) = build_rct(&a, &b1, &b2, &d11, &d12, &d22) {
            return r;
        }
    }
}

/// Observer-based controller from random LQG weights; stabilizing whenever
/// the plant is stabilizable and detectable through `(B₂, C₂)`.
pub fn random_stabilizing_controller<R: Rng>(rng: &mut R, g: &GeneralizedPlant) -> Result<Controller> {
    let (n, nu, ny) = (g.n(), g.nu(), g.ny());
    let q = random_spd(rng, n, 0.05, 5.0);
    let r = random_spd(rng, nu, 0.05, 5.0);
    let w = random_spd(rng, n, 0.05, 5.0);
    let v = random_spd(rng, ny, 0.05, 5.0);
    lqg(&g.a, &g.b2, &g.c2, &q, &r, &w, &v)
}

/// Series-parallel resistor network between `a` and ground with a port
/// across it and a planar embedding. Face 0 carries the port edge.
pub fn random_series_parallel<R: Rng>(rng: &mut R, ops: usize) -> Result<Netlist> {
    // edge 0 is the port; darts are (edge, forward)
    let mut ends: Vec<(usize, usize)> = vec![(1, 0), (1, 0)];
    let mut faces: Vec<Vec<(usize, bool)>> = vec![vec![(0, true), (1, false)], vec![(1, true), (0, false)]];
    let mut n_nodes = 2;
    for _ in 0..ops {
        let e = rng.random_range(1..ends.len());
        let (u, v) = ends[e];
        let new = ends.len();
        if rng.random_bool(0.5) {
            let w = n_nodes;
            n_nodes += 1;
            ends[e] = (u, w);
            ends.push((w, v));
            for f in faces.iter_mut() {
                let mut out = Vec::with_capacity(f.len() + 1);
                for &(d, fwd) in f.iter() {
                    match (d == e, fwd) {
                        (true, true) => out.extend([(e, true), (new, true)]),
                        (true, false) => out.extend([(new, false), (e, false)]),
                        _ => out.push((d, fwd)),
                    }
                }
                *f = out;
            }
        } else {
            ends.push((u, v));
            let fi = faces.iter().position(|f| f.contains(&(e, true))).ok_or_else(|| Error::Internal("dart lost".into()))?;
            for d in faces[fi].iter_mut() {
                if *d == (e, true) {
                    *d = (new, true);
                }
            }
            faces.push(vec![(e, true), (new, false)]);
        }
    }
    let name = |i: usize| match i {
        0 => "0".to_string(),
        1 => "a".to_string(),
        k => format!("n{}", k - 1),
    };
    let mut net = Netlist::new();
    for i in 1..n_nodes {
        net.node(&name(i));
    }
    for &(u, v) in &ends[1..] {
        net.add(ElementKind::R, &name(u), &name(v), rng.random_range(0.2..5.0))?;
    }
    net.add_port("a", "0")?;
    let idx: Vec<usize> = (0..n_nodes).map(|i| net.node_index(&name(i)).expect("node added")).collect();
    let node_faces = faces.iter().map(|f| f.iter().map(|&(d, fwd)| idx[if fwd { ends[d].0 } else { ends[d].1 }]).collect()).collect();
    net.set_faces(Some(node_faces))?;
    let ne = ends.len() - 1;
    let mut sides = vec![vec![]; ends.len()];
    for (fi, f) in faces.iter().enumerate() {
        for (t, &(d, _)) in f.iter().enumerate() {
            sides[if d == 0 { ne } else { d - 1 }].push((fi, t));
        }
    }
    net.set_side_hint(Some(sides.into_iter().map(|s| [s[0], s[1]]).collect()))?;
    Ok(net)
}

/// Connected weighted Laplacian on `n` buses with weights in `[0.5, 2]`.
pub fn random_laplacian<R: Rng>(rng: &mut R, n: usize) -> Mat {
    let mut l = zeros(n, n);
    let link = |l: &mut Mat, i: usize, j: usize, w: f64| {
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    };
    for j in 1..n {
        let i = rng.random_range(0..j);
        link(&mut l, i, j, rng.random_range(0.5..2.0));
    }
    for _ in 0..n / 2 {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j && l[(i, j)] == 0.0 {
            link(&mut l, i, j, rng.random_range(0.5..2.0));
        }
    }
    l
}

/// Random grid on `3..=n_max` buses: Laplacian, renewable buses and
/// `(bus, inertia)` machines; remaining buses are interior.
pub fn random_grid<R: Rng>(rng: &mut R, n_max: usize) -> (Mat, Vec<usize>, Vec<(usize, f64)>) {
    let n = rng.random_range(3..=n_max.max(3));
    let l = random_laplacian(rng, n);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let q = rng.random_range(1..=(n / 3).max(1));
    let nm = rng.random_range(1..=(n - q).min(4));
    let renewable = order[..q].to_vec();
    let machines = order[q..q + nm].iter().map(|&k| (k, rng.random_range(0.5..3.0))).collect();
    (l, renewable, machines)
}

/// `(A_ls, b, C_ls, d)` with `C_ls` of full row rank and `[A_ls; C_ls]` of
/// full column rank, singular values bounded away from zero.
pub fn random_ls_instance<R: Rng>(rng: &mut R, max_dim: usize) -> (Mat, Vec<f64>, Mat, Vec<f64>) {
    let n = rng.random_range(1..=max_dim.max(1));
    let m = rng.random_range(n..=max_dim.max(n));
    let p = rng.random_range(0..n);
    let well = |rng: &mut R, r: usize, c: usize| -> Mat {
        let k = r.min(c);
        let u = gaussian_matrix(rng, r, r).qr().q();
        let v = gaussian_matrix(rng, c, c).qr().q();
        let mut s = zeros(r, c);
        for i in 0..k {
            s[(i, i)] = rng.random_range(0.5..2.0);
        }
        u * s * v.transpose()
    };
    let a = well(rng, m, n);
    let c = well(rng, p, n);
    let b = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
    let d = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
    (a, b, c, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::validate_embedding;
    use crate::structured::{validate_structure, ClassTag};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lct_plants_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let r = random_lct(&mut rng, 8, 3);
            assert!(validate_structure(&r, ClassTag::LCT).unwrap().passed);
            assert_eq!(max_abs(r.d()), 0.0);
        }
    }

    #[test]
    fn symmetric_plants_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let (g, s) = random_symmetric_plant(&mut rng, 6, 3);
            assert!(g.symmetry_residual(&s).unwrap() < 1e-12);
        }
    }

    #[test]
    fn lossy_plants_carry_tags() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            assert_eq!(random_strict_rlt(&mut rng, 6).class_tag(), ClassTag::RLT);
            assert_eq!(random_strict_rct(&mut rng, 6).class_tag(), ClassTag::RCT);
        }
    }

    #[test]
    fn series_parallel_embeddings_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let net = random_series_parallel(&mut rng, 8).unwrap();
            validate_embedding(&net).unwrap();
            let dual = crate::netgraph::planar_dual(&net, 0).unwrap();
            let z =
                crate::netgraph::impedance_at(&net, nalgebra::Complex::new(1.0, 0.0), &[crate::netgraph::Drive::Current]).unwrap()[(0, 0)];
            let zd =
                crate::netgraph::impedance_at(&dual, nalgebra::Complex::new(1.0, 0.0), &[crate::netgraph::Drive::Current]).unwrap()[(0, 0)];
            assert!((z * zd - 1.0).norm() < 1e-10, "{}", net.to_text());
        }
    }

    #[test]
    fn laplacians_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = random_laplacian(&mut rng, 9);
        crate::netgraph::check_laplacian(&l).unwrap();
        let eig = l.symmetric_eigen().eigenvalues;
        assert_eq!(eig.iter().filter(|&&x| x.abs() < 1e-9).count(), 1);
    }
}
