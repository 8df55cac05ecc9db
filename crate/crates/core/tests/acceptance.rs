//! Acceptance suite: one PASS/FAIL line per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{Complex, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rlct::generators::*;
use rlct::internal_map::{build_f, element_law_residual, validate_reactance_data, InternalData};
use rlct::linalg::*;
use rlct::netgraph::*;
use rlct::plant::{GeneralizedPlant, Problem2Plant, Problem3Plant};
use rlct::riccati::{h2_norm, hinf_norm, hinf_solvable, solve_care};
use rlct::sim::solve_constrained_ls;
use rlct::structured::*;
use rlct::synthesis::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

const BOTT_DUFFIN: &str = "\
R1 a c 1
L5 a b 1/2
L4 c b 3/4
C1 c b 2/3
L6 b d 1/6
C2 d 0 3
R2 b 0 1/4
C3 b 0 2
P a 0
";

fn bott_duffin_realization() -> StructuredRealization {
    let (r2, r3) = (2f64.sqrt(), 3f64.sqrt());
    let a = from_rows(&[
        &[-2.0, 0.0, 0.0, -r3, 0.0, 0.0],
        &[0.0, 0.0, 0.0, -r2, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 0.0, r2, -r3],
        &[r3, r2, 0.0, 0.0, 0.0, 0.0],
        &[0.0, 0.0, -r2, 0.0, 0.0, 0.0],
        &[0.0, 0.0, r3, 0.0, 0.0, -2.0],
    ]);
    let b = from_rows(&[&[-r2], &[0.0], &[0.0], &[1.5f64.sqrt()], &[0.0], &[0.5f64.sqrt()]]);
    let c = from_rows(&[&[r2, 0.0, 0.0, 1.5f64.sqrt(), 0.0, 0.5f64.sqrt()]]);
    StructuredRealization::new(a, b, c, eye(1)).unwrap()
}

fn log_freqs(count: usize, lo: f64, hi: f64) -> Vec<Complex<f64>> {
    (0..count).map(|k| Complex::new(0.0, lo * (hi / lo).powf(k as f64 / (count - 1) as f64))).collect()
}

fn criterion_1() -> Outcome {
    let real = bott_duffin_realization();
    let (si, se) = infer_signatures(&real).ok_or("no signature makes M symmetric")?;
    ensure(si.entries() == [1, 1, 1, -1, -1, -1], || format!("inferred Σ_int = {:?}", si.entries()))?;
    let real = real.with_signatures(si, se).map_err(e)?;
    let net = parse_netlist(BOTT_DUFFIN).map_err(e)?;
    let mut worst: f64 = 0.0;
    for s in log_freqs(20, 1e-2, 1e2) {
        let g = transfer_eval(&real, s).map_err(e)?;
        let z = impedance_at(&net, s, &[Drive::Current]).map_err(e)?;
        worst = worst.max(rel_err(&g, &z));
    }
    ensure(worst < 1e-8, || format!("worst relative error {worst:.3e}"))?;
    Ok(format!("worst relative error {worst:.2e} over 20 frequencies"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_x: f64 = 0.0;
    let mut worst_k: f64 = 0.0;
    for _ in 0..50 {
        let (g, sigs) = random_symmetric_plant(&mut rng, 10, 3);
        let x = solve_care(&g.a, &g.b2, &(g.c1.transpose() * &g.c1), &eye(g.nu())).map_err(e)?.x;
        let y = solve_care(&g.a.transpose(), &g.c2.transpose(), &(&g.b1 * g.b1.transpose()), &eye(g.ny())).map_err(e)?.x;
        let s = sigs.int.matrix();
        let gap = (&x - &s * &y * &s).norm() / (1.0 + x.norm());
        worst_x = worst_x.max(gap);
        let k = h2_symmetric(&g, &sigs).map_err(e)?;
        let res = controller_symmetry_residual(&k, &sigs.int, &sigs.k).map_err(e)?;
        let scale = 1.0 + k.a.norm().max(k.b.norm()).max(k.c.norm());
        worst_k = worst_k.max(res / scale);
    }
    ensure(worst_x < 1e-8, || format!("‖X − ΣYΣ‖ ratio {worst_x:.3e}"))?;
    ensure(worst_k < 1e-8, || format!("controller symmetry ratio {worst_k:.3e}"))?;
    Ok(format!("50 plants, Riccati gap {worst_x:.2e}, controller symmetry {worst_k:.2e}"))
}

fn lct_plants() -> Vec<Problem2Plant> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..30).map(|_| Problem2Plant::new(random_lct(&mut rng, 8, 3)).unwrap()).collect()
}

fn care_residual(g: &GeneralizedPlant, x: &Mat) -> f64 {
    let r = g.a.transpose() * x + x * &g.a - x * &g.b2 * g.b2.transpose() * x + g.c1.transpose() * &g.c1;
    max_abs(&r)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let (mut worst_ric, mut worst_gap, mut worst_margin): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
    for p in lct_plants() {
        let g = p.embed();
        worst_ric = worst_ric.max(care_residual(&g, &eye(g.n())));
        let k = lct_h2(&p).map_err(e)?;
        let h_analytic = h2_norm(&close_loop(&g, &k).map_err(e)?).map_err(e)?;
        let sigs = g.infer_signatures().ok_or("plant signatures not found")?;
        let h_sym = h2_norm(&close_loop(&g, &h2_symmetric(&g, &sigs).map_err(e)?).map_err(e)?).map_err(e)?;
        worst_gap = worst_gap.max((h_analytic - h_sym).abs());
        for _ in 0..20 {
            let kr = random_stabilizing_controller(&mut rng, &g).map_err(e)?;
            let cl = close_loop(&g, &kr).map_err(e)?;
            ensure(spectral_abscissa(cl.a()) < 0.0, || "random controller not stabilizing".into())?;
            let h = h2_norm(&cl).map_err(e)?;
            worst_margin = worst_margin.min(h - h_analytic);
        }
    }
    ensure(worst_ric < 1e-10, || format!("X = I residual {worst_ric:.3e}"))?;
    ensure(worst_gap < 1e-8, || format!("analytic vs symmetric H2 gap {worst_gap:.3e}"))?;
    ensure(worst_margin >= -1e-9, || format!("a random controller beat the analytic one by {:.3e}", -worst_margin))?;
    Ok(format!(
        "30 plants, X = I residual {worst_ric:.1e}, H2 gap {worst_gap:.2e}, smallest margin over 600 random controllers {worst_margin:.3e}"
    ))
}

fn criterion_4() -> Outcome {
    let r2 = 2f64.sqrt();
    let mut worst: f64 = 0.0;
    for p in lct_plants() {
        let g = p.embed();
        let k = lct_hinf(&p).map_err(e)?;
        let n = hinf_norm(&close_loop(&g, &k).map_err(e)?, 1e-10).map_err(e)?;
        worst = worst.max((n - r2).abs());
        ensure(!hinf_solvable(&g, 0.999 * r2).map_err(e)?, || "solvable below √2".into())?;
        ensure(hinf_solvable(&g, 1.001 * r2).map_err(e)?, || "not solvable above √2".into())?;
    }
    ensure(worst <= 1e-6, || format!("closed-loop norm off √2 by {worst:.3e}"))?;
    Ok(format!("30 plants, |‖T‖∞ − √2| ≤ {worst:.2e}, solvability switches at √2"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_d, mut worst_g): (f64, f64) = (0.0, 0.0);
    for i in 0..60 {
        let real = if i % 2 == 0 { random_strict_rlt(&mut rng, 8) } else { random_strict_rct(&mut rng, 8) };
        let p = Problem3Plant::new(real).map_err(e)?;
        let k = if i % 2 == 0 { rlt_static(&p) } else { rct_static(&p) }.map_err(e)?;
        let g0t = dc_gain(&p.real).map_err(e)?.transpose();
        worst_d = worst_d.max(max_abs(&(&k.d - &g0t)));
        let gs = gamma_star(&p).map_err(e)?;
        let n = hinf_norm(&close_loop(&p.to_generalized(), &k).map_err(e)?, 1e-10).map_err(e)?;
        worst_g = worst_g.max((n - gs).abs());
    }
    ensure(worst_d < 1e-10, || format!("D_K − G(0)ᵀ = {worst_d:.3e}"))?;
    ensure(worst_g <= 1e-6, || format!("‖T‖∞ − γ* = {worst_g:.3e}"))?;
    Ok(format!("30 RLT + 30 RCT, D_K gap {worst_d:.1e}, norm gap {worst_g:.2e}"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (a, b, c, d) = random_ls_instance(&mut rng, 6);
        let (n, p) = (a.ncols(), c.nrows());
        let kkt = block(&[n, p], &[n, p], &[&[&(a.transpose() * &a), &c.transpose()], &[&c, &zeros(p, p)]]);
        let rhs = vcat(&[&(a.transpose() * Mat::from_column_slice(b.len(), 1, &b)), &Mat::from_column_slice(p, 1, &d)]);
        let direct = solve(&kkt, &rhs).map_err(e)?;
        let sol = solve_constrained_ls(&a, &b, &c, &d).map_err(e)?;
        let got = DVector::from_iterator(n + p, sol.x.iter().chain(sol.z.iter()).copied());
        worst = worst.max((got - direct.column(0)).amax()).max(sol.kkt_residual);
    }
    ensure(worst < 1e-6, || format!("deviation from direct KKT solve {worst:.3e}"))?;
    let scalar = solve_constrained_ls(&from_rows(&[&[1.0], &[1.0]]), &[1.0, 3.0], &zeros(0, 1), &[]).map_err(e)?;
    ensure((scalar.x[0] - 2.0).abs() <= 1e-6, || format!("scalar case x̄ = {}", scalar.x[0]))?;
    Ok(format!("20 instances, worst deviation {worst:.2e}; scalar x̄ = {:.9}", scalar.x[0]))
}

fn grid_check(l: &Mat, ren: &[usize], inert: &[(usize, f64)], seed: u64) -> Result<f64, String> {
    let grid = build_swing_grid(l, ren, inert).map_err(e)?;
    let plant = Problem2Plant::new(reduce_to_controllable(&grid.real).map_err(e)?).map_err(e)?;
    let k = lct_h2(&plant).map_err(e)?;
    ensure(matches!(k.impl_hint, Some(ImplHint::CopyNetworkPlusResistors { ohms }) if ohms == 2.0), || "wrong hint".into())?;
    let net = with_series_port_resistors(&swing_grid_netlist(l, ren, inert).map_err(e)?, 2.0).map_err(e)?;
    let drives = vec![Drive::Voltage; ren.len()];
    let mut worst: f64 = 0.0;
    for s in probe_points(10, seed) {
        let kt = k.transfer(s).map_err(e)?;
        let z = impedance_at(&net, s, &drives).map_err(e)?;
        worst = worst.max(rel_err(&kt, &z));
    }
    Ok(worst)
}

fn criterion_7() -> Outcome {
    // three buses joined through a central node by unit lines
    let l = from_rows(&[&[1.0, 0.0, 0.0, -1.0], &[0.0, 1.0, 0.0, -1.0], &[0.0, 0.0, 1.0, -1.0], &[-1.0, -1.0, -1.0, 3.0]]);
    let mut worst = grid_check(&l, &[0, 1], &[(2, 1.0)], 70)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..5 {
        let (l, ren, inert) = random_grid(&mut rng, 12);
        worst = worst.max(grid_check(&l, &ren, &inert, 71 + i)?);
    }
    ensure(worst < 1e-8, || format!("controller vs network relative error {worst:.3e}"))?;
    Ok(format!("three-bus grid and 5 random grids, worst relative error {worst:.2e}"))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let ops = rng.random_range(3..12);
        let net = random_series_parallel(&mut rng, ops).map_err(e)?;
        let dual = planar_dual(&net, 0).map_err(e)?;
        for s in probe_points(5, 80 + i) {
            let z = impedance_at(&net, s, &[Drive::Current]).map_err(e)?[(0, 0)];
            let zd = impedance_at(&dual, s, &[Drive::Current]).map_err(e)?[(0, 0)];
            worst = worst.max((z * zd - 1.0).norm());
        }
        let back = planar_dual(&dual, 0).map_err(e)?;
        ensure(isomorphic(&net, &back, 1e-12), || format!("dual of dual differs from\n{}", net.to_text()))?;
    }
    ensure(worst < 1e-10, || format!("|Z·Z_dual − 1| = {worst:.3e}"))?;
    Ok(format!("10 networks, |Z·Z_dual − 1| ≤ {worst:.1e}, dual of dual isomorphic"))
}

fn single_capacitor(c: f64) -> (StructuredRealization, InternalData) {
    let g = 1.0 / c.sqrt();
    let real = StructuredRealization::new(zeros(1, 1), from_rows(&[&[g]]), from_rows(&[&[g]]), zeros(1, 1)).unwrap();
    let data = InternalData {
        theta: zeros(0, 0),
        gamma: zeros(1, 0),
        phi: from_rows(&[&[c]]),
        sigma_int_dagger: Signature::new(vec![]).unwrap(),
        sigma_int: Signature::new(vec![1]).unwrap(),
        sigma_ext: Signature::new(vec![-1]).unwrap(),
        permutation: vec![0, 1],
        n_c: 1,
        n_l: 0,
    };
    (real, data)
}

/// Inductors L5, L4, L6 then capacitors C1, C2, C3; the port is current driven.
fn bott_duffin_internal() -> (StructuredRealization, InternalData) {
    let data = InternalData {
        theta: zeros(0, 0),
        gamma: zeros(6, 0),
        phi: diag(&[0.5, 0.75, 1.0 / 6.0, 2.0 / 3.0, 3.0, 2.0]),
        sigma_int_dagger: Signature::new(vec![]).unwrap(),
        sigma_int: Signature::new(vec![-1, -1, -1, 1, 1, 1]).unwrap(),
        sigma_ext: Signature::new(vec![-1]).unwrap(),
        permutation: (0..7).collect(),
        n_c: 3,
        n_l: 3,
    };
    (bott_duffin_realization(), data)
}

fn criterion_9() -> Outcome {
    let mut worst: f64 = 0.0;
    for (name, (real, data)) in [("single capacitor", single_capacitor(2.5)), ("bott_duffin", bott_duffin_internal())] {
        let rep = validate_reactance_data(&real, &data);
        ensure(rep.passed, || format!("{name}: {}", rep.summary()))?;
        let f = build_f(&real, &data).map_err(e)?;
        let r = element_law_residual(&real, &data, &f).map_err(e)?;
        ensure(r < 1e-6, || format!("{name}: element-law residual {r:.3e}"))?;
        worst = worst.max(r);
    }
    Ok(format!("both fixtures, worst element-law residual {worst:.2e}"))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_h2: f64 = 0.0;
    for _ in 0..20 {
        let a: f64 = rng.random_range(0.05..20.0);
        let real = StructuredRealization::new(from_rows(&[&[-a]]), eye(1), eye(1), zeros(1, 1)).unwrap();
        let got = h2_norm(&real).map_err(e)?;
        worst_h2 = worst_h2.max((got - 1.0 / (2.0 * a).sqrt()).abs());
    }
    ensure(worst_h2 < 1e-10, || format!("first-order H2 error {worst_h2:.3e}"))?;
    let mut worst_hinf: f64 = 0.0;
    for &(w, z) in &[(1.0, 0.1), (3.0, 0.05), (0.5, 0.3), (2.0, 0.6)] {
        let real = StructuredRealization::new(
            from_rows(&[&[0.0, 1.0], &[-w * w, -2.0 * z * w]]),
            from_rows(&[&[0.0], &[w * w]]),
            from_rows(&[&[1.0, 0.0]]),
            zeros(1, 1),
        )
        .unwrap();
        let peak = 1.0 / (2.0 * z * (1.0 - z * z).sqrt());
        let got = hinf_norm(&real, 1e-9).map_err(e)?;
        worst_hinf = worst_hinf.max((got - peak).abs() / peak);
    }
    ensure(worst_hinf < 1e-6, || format!("resonator peak relative error {worst_hinf:.3e}"))?;
    Ok(format!("H2 error {worst_h2:.1e}, resonator peak relative error {worst_hinf:.1e}"))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("bott_duffin realization matches nodal analysis", criterion_1),
        ("single Riccati solve suffices for symmetric plants", criterion_2),
        ("lossless plants: closed-form H2 law is optimal", criterion_3),
        ("lossless plants: static √2 law attains the H∞ infimum", criterion_4),
        ("lossy plants: static G(0)ᵀ law attains γ*", criterion_5),
        ("least-squares circuit solves the KKT system", criterion_6),
        ("grid controller equals copy network with 2 Ω ports", criterion_7),
        ("planar duals invert impedance", criterion_8),
        ("internal map satisfies element laws", criterion_9),
        ("norm oracles", criterion_10),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("[{}] {name}: PASS ({detail}; {:.2}s)", k + 1, t.elapsed().as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("[{}] {name}: FAIL ({why})", k + 1);
            }
        }
    }
    println!("{} of 10 criteria passed in {:.1}s", 10 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
