//! Fixed-step RK4 simulation and the least-squares circuit driver.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::*;
use crate::netgraph::build_least_squares_circuit;
use crate::structured::StructuredRealization;

pub const EPS_SS: f64 = 1e-8;
/// fraction of `t_final` used for the steady-state test
pub const WINDOW: f64 = 0.05;
const MAX_SAMPLES: usize = 2000;

#[derive(Debug, Clone)]
pub enum InputSignal {
    Zero,
    Step(Vec<f64>),
    Sinusoid { amplitude: Vec<f64>, omega: f64 },
}

impl InputSignal {
    fn at(&self, t: f64, m: usize) -> DVector<f64> {
        match self {
            InputSignal::Zero => DVector::zeros(m),
            InputSignal::Step(v) => DVector::from_vec(v.clone()),
            InputSignal::Sinusoid { amplitude, omega } => DVector::from_iterator(m, amplitude.iter().map(|a| a * (omega * t).sin())),
        }
    }

    fn width(&self) -> Option<usize> {
        match self {
            InputSignal::Zero => None,
            InputSignal::Step(v) => Some(v.len()),
            InputSignal::Sinusoid { amplitude, .. } => Some(amplitude.len()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub steady_state: Option<Vec<f64>>,
    pub converged: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub x0: Option<Vec<f64>>,
}

/// `t_final = 20/|α|` with `α` the slowest decay rate, `dt = 1/(20ρ(A))`.
pub fn default_horizon(a: &Mat) -> (f64, f64) {
    let eig = eigenvalues(a);
    let slow = eig.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    let rho = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let t_final = if slow.is_finite() && slow > 1e-12 { 20.0 / slow } else { 20.0 };
    let dt = if rho > 0.0 { 1.0 / (20.0 * rho) } else { 1e-2 };
    (t_final, dt.min(t_final / 100.0))
}

pub fn simulate(real: &StructuredRealization, input: &InputSignal, opts: &SimOptions) -> Result<SimulationResult> {
    let (n, m) = (real.n(), real.m());
    if let Some(w) = input.width() {
        if w != m {
            return Err(Error::Dimension(format!("input has {w} channels, system has {m}")));
        }
    }
    let (tf_d, dt_d) = default_horizon(real.a());
    let t_final = opts.t_final.unwrap_or(tf_d);
    let dt = opts.dt.unwrap_or(dt_d);
    if !(dt > 0.0) || !(t_final > dt) {
        return Err(Error::Dimension(format!("need dt > 0 and t_final > dt (dt = {dt}, t_final = {t_final})")));
    }
    let steps = (t_final / dt).ceil() as usize;
    let dt = t_final / steps as f64;
    let window_step = steps - ((WINDOW * steps as f64).round() as usize).clamp(1, steps);
    let stride = steps.div_ceil(MAX_SAMPLES).max(1);

    let a = real.a();
    let b = real.b();
    let mut x = match &opts.x0 {
        Some(v) if v.len() == n => DVector::from_vec(v.clone()),
        Some(v) => return Err(Error::Dimension(format!("x0 has {} entries, expected {n}", v.len()))),
        None => DVector::zeros(n),
    };
    let out = |x: &DVector<f64>, t: f64| -> Vec<f64> {
        let u = input.at(t, m);
        (real.c() * x + real.d() * u).iter().copied().collect()
    };
    let mut res = SimulationResult { times: vec![], states: vec![], outputs: vec![], steady_state: None, converged: false };
    let mut x_window = x.clone();
    let (mut k1, mut k2, mut k3, mut k4) = (DVector::zeros(n), DVector::zeros(n), DVector::zeros(n), DVector::zeros(n));
    let mut tmp = DVector::zeros(n);
    let f = |x: &DVector<f64>, t: f64, out: &mut DVector<f64>| {
        out.gemv(1.0, a, x, 0.0);
        if m > 0 {
            out.gemv(1.0, b, &input.at(t, m), 1.0);
        }
    };
    for k in 0..=steps {
        let t = k as f64 * dt;
        if k % stride == 0 || k == steps {
            res.times.push(t);
            res.states.push(x.iter().copied().collect());
            res.outputs.push(out(&x, t));
        }
        if k == window_step {
            x_window.copy_from(&x);
        }
        if k == steps {
            break;
        }
        f(&x, t, &mut k1);
        tmp.copy_from(&x);
        tmp.axpy(dt / 2.0, &k1, 1.0);
        f(&tmp, t + dt / 2.0, &mut k2);
        tmp.copy_from(&x);
        tmp.axpy(dt / 2.0, &k2, 1.0);
        f(&tmp, t + dt / 2.0, &mut k3);
        tmp.copy_from(&x);
        tmp.axpy(dt, &k3, 1.0);
        f(&tmp, t + dt, &mut k4);
        x.axpy(dt / 6.0, &k1, 1.0);
        x.axpy(dt / 3.0, &k2, 1.0);
        x.axpy(dt / 3.0, &k3, 1.0);
        x.axpy(dt / 6.0, &k4, 1.0);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged(t + dt));
        }
    }
    let xf_norm = x.amax();
    let drift = (&x - &x_window).amax();
    res.converged = drift < EPS_SS * (1.0 + xf_norm);
    if res.converged {
        res.steady_state = Some(x.iter().copied().collect());
    }
    Ok(res)
}

/// Solution of `min ‖A x − b‖` subject to `C x = d`, with its multiplier.
#[derive(Debug, Clone)]
pub struct LsSolution {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// max-norm residual of the optimality conditions
    pub kkt_residual: f64,
    pub t_final: f64,
}

pub fn kkt_residual(a_ls: &Mat, b: &[f64], c_ls: &Mat, d: &[f64], x: &[f64], z: &[f64]) -> f64 {
    let p = d.len();
    let xv = DVector::from_column_slice(x);
    let zv = DVector::from_column_slice(z);
    let bv = DVector::from_column_slice(b);
    let dv = DVector::from_column_slice(d);
    let mut r1 = -(a_ls.transpose() * a_ls) * &xv + a_ls.transpose() * &bv;
    if p > 0 {
        r1 -= c_ls.transpose() * &zv;
    }
    let r2 = if p > 0 { c_ls * &xv - dv } else { DVector::zeros(0) };
    r1.amax().max(if p > 0 { r2.amax() } else { 0.0 })
}

/// Steady state of the least-squares circuit under unit-resistor feedback
/// `u = −y` and step references. The steps are applied as `r₁ = −b`,
/// `r₂ = −d` so that the capacitor voltages settle at `x̄` and the inductor
/// currents at `z̄`. The horizon doubles until the state settles.
pub fn solve_constrained_ls(a_ls: &Mat, b: &[f64], c_ls: &Mat, d: &[f64]) -> Result<LsSolution> {
    if a_ls.nrows() != b.len() {
        return Err(Error::Dimension("b length must equal rows of A_ls".into()));
    }
    if c_ls.nrows() != d.len() {
        return Err(Error::Dimension("d length must equal rows of C_ls".into()));
    }
    let circ = build_least_squares_circuit(a_ls, c_ls)?;
    let plant = &circ.plant;
    let (n, p) = (circ.n, circ.p);
    let acl = plant.a() - plant.b() * plant.c();
    let bref = hcat(&[&circ.b_r1, &circ.b_r2]);
    let r: Vec<f64> = b.iter().chain(d.iter()).map(|v| -v).collect();
    let cl = StructuredRealization::new(acl.clone(), bref, eye(n + p), zeros(n + p, r.len()))?;
    let abscissa = spectral_abscissa(&acl);
    if !(abscissa < 0.0) {
        return Err(Error::NotHurwitz(abscissa));
    }
    let (mut t_final, dt) = default_horizon(&acl);
    for _ in 0..6 {
        let sim = simulate(&cl, &InputSignal::Step(r.clone()), &SimOptions { t_final: Some(t_final), dt: Some(dt), x0: None })?;
        if let Some(ss) = sim.steady_state {
            let (x, z) = (ss[..n].to_vec(), ss[n..].to_vec());
            let res = kkt_residual(a_ls, b, c_ls, d, &x, &z);
            return Ok(LsSolution { x, z, kkt_residual: res, t_final });
        }
        t_final *= 2.0;
    }
    Err(Error::NoConvergence(format!("state still drifting after t = {t_final}")))
}
