//! Command-line front end: netlist parsing, realization, synthesis,
//! verification, the least-squares circuit, swing grids and planar duals.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rlct::linalg::*;
use rlct::netgraph::*;
use rlct::plant::{GeneralizedPlant, Problem2Plant, Problem3Plant};
use rlct::riccati::{h2_norm, hinf_norm};
use rlct::serialization::{controller_from_json, controller_to_json, realization_from_json, realization_to_json};
use rlct::sim::{simulate, solve_constrained_ls, InputSignal, SimOptions};
use rlct::structured::{probe_points, rel_err, transfer_eval, ClassTag, StructuredRealization};
use rlct::synthesis::*;
use rlct::{Error, ErrorClass, Result};

const HINF_TOL: f64 = 1e-10;
const REALIZE_TOL: f64 = 1e-8;
const TRACE_POINTS: usize = 200;

#[derive(Parser)]
#[command(name = "rlct", version, about = "Passive network models and closed-form H2/H-infinity synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Output {
    /// write the primary result here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// write time or frequency data as CSV
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a netlist and summarize it
    Parse {
        netlist: PathBuf,
        #[command(flatten)]
        io: Output,
    },
    /// State-space realization of a netlist, checked against nodal analysis
    Realize {
        netlist: PathBuf,
        #[arg(long, value_enum, default_value_t = DriveArg::Current)]
        drive: DriveArg,
        #[command(flatten)]
        io: Output,
    },
    /// Synthesize a controller for a serialized plant
    Synthesize {
        realization: PathBuf,
        #[arg(long, value_parser = ["2", "3"])]
        problem: String,
        #[arg(long, value_enum)]
        norm: NormArg,
        #[arg(long)]
        gamma: Option<f64>,
        #[command(flatten)]
        io: Output,
    },
    /// Closed-loop norms and stability margin of a plant and controller
    Verify {
        plant: PathBuf,
        controller: PathBuf,
        #[arg(long, value_parser = ["2", "3"])]
        problem: String,
        #[command(flatten)]
        io: Output,
    },
    /// Solve a constrained least-squares problem with its lossless circuit
    Lsq {
        #[arg(long = "A")]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long = "C", requires = "d")]
        c: Option<PathBuf>,
        #[arg(long, requires = "c")]
        d: Option<PathBuf>,
        #[command(flatten)]
        io: Output,
    },
    /// Swing-equation grid plant and its optimal distributed controller
    Grid {
        #[arg(long)]
        laplacian: PathBuf,
        /// renewable bus indices (0-based)
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        renewable: Vec<usize>,
        /// lines of `bus inertia`
        #[arg(long)]
        inertia: PathBuf,
        /// write the controller here
        #[arg(long)]
        controller: Option<PathBuf>,
        /// write the controller netlist here
        #[arg(long)]
        netlist: Option<PathBuf>,
        #[command(flatten)]
        io: Output,
    },
    /// Planar dual of a resistive netlist with faces
    Dual {
        netlist: PathBuf,
        /// face that becomes ground in the dual
        #[arg(long, default_value_t = 0)]
        outer: usize,
        #[command(flatten)]
        io: Output,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DriveArg {
    Current,
    Voltage,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum NormArg {
    H2,
    Hinf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &CliError) -> u8 {
    match err {
        CliError::Lib(e) => match e.class() {
            ErrorClass::Parse => 2,
            ErrorClass::Structure => 3,
            ErrorClass::Solver => 4,
            ErrorClass::NonConvergence => 5,
        },
        CliError::Io(_) | CliError::Usage(_) => 1,
    }
}

#[derive(Debug)]
enum CliError {
    Lib(Error),
    Io(String),
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(s) | CliError::Usage(s) => f.write_str(s),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Send `text` to `--out` when given, else to stdout.
fn emit(io: &Output, text: &str) -> CliResult<()> {
    match &io.out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

/// Status lines go to stdout only when it is not carrying the result.
fn note(io: &Output, line: &str) {
    if io.out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Parse { netlist, io } => cmd_parse(&netlist, &io),
        Command::Realize { netlist, drive, io } => cmd_realize(&netlist, drive, &io),
        Command::Synthesize { realization, problem, norm, gamma, io } => cmd_synthesize(&realization, &problem, norm, gamma, &io),
        Command::Verify { plant, controller, problem, io } => cmd_verify(&plant, &controller, &problem, &io),
        Command::Lsq { a, b, c, d, io } => cmd_lsq(&a, &b, c.as_deref(), d.as_deref(), &io),
        Command::Grid { laplacian, renewable, inertia, controller, netlist, io } => {
            cmd_grid(&laplacian, &renewable, &inertia, controller.as_deref(), netlist.as_deref(), &io)
        }
        Command::Dual { netlist, outer, io } => cmd_dual(&netlist, outer, &io),
    }
}

// ---------- traces ----------

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let io_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(r.iter().map(|&v| fmt_num(v))).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Sweep range spanning two decades either side of the pole magnitudes.
fn sweep_for(a: &Mat) -> Vec<f64> {
    let mags: Vec<f64> = eigenvalues(a).iter().map(|z| z.norm()).filter(|&m| m > 1e-9).collect();
    let lo = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().cloned().fold(0.0, f64::max);
    if lo.is_finite() {
        log_grid(0.01 * lo, 100.0 * hi, TRACE_POINTS)
    } else {
        log_grid(1e-3, 1e3, TRACE_POINTS)
    }
}

/// Frequency response CSV: `omega`, then real and imaginary parts of
/// every entry, then the largest singular value.
fn frequency_trace(path: &Path, omegas: &[f64], rows: usize, cols: usize, eval: impl Fn(C64) -> Result<CMat>) -> CliResult<()> {
    let mut header = vec!["omega".to_string()];
    for i in 0..rows {
        for j in 0..cols {
            header.push(format!("re_{}_{}", i + 1, j + 1));
            header.push(format!("im_{}_{}", i + 1, j + 1));
        }
    }
    header.push("sigma_max".into());
    let mut data = Vec::with_capacity(omegas.len());
    for &w in omegas {
        let g = eval(C64::new(0.0, w))?;
        let mut row = vec![w];
        for i in 0..rows {
            for j in 0..cols {
                row.push(g[(i, j)].re);
                row.push(g[(i, j)].im);
            }
        }
        row.push(cnorm2(&g));
        data.push(row);
    }
    write_csv(path, &header, &data)
}

fn realization_trace(path: &Path, real: &StructuredRealization) -> CliResult<()> {
    frequency_trace(path, &sweep_for(real.a()), real.p(), real.m(), |s| transfer_eval(real, s))
}

// ---------- numeric text files ----------

/// Rows of numbers separated by whitespace or commas; `#` starts a comment.
fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = vec![];
    for (ln, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        let mut row = vec![];
        let mut start = None;
        for (i, ch) in body.char_indices().chain(std::iter::once((body.len(), ' '))) {
            let sep = ch.is_whitespace() || ch == ',';
            match (sep, start) {
                (false, None) => start = Some(i),
                (true, Some(s0)) => {
                    let tok = &body[s0..i];
                    let column = body[..s0].chars().count() + 1;
                    let v: f64 = tok.parse().map_err(|_| Error::Parse { line: ln + 1, column, msg: format!("not a number: {tok:?}") })?;
                    row.push(v);
                    start = None;
                }
                _ => {}
            }
        }
        if !row.is_empty() {
            rows.push(row);
        }
    }
    Ok(rows)
}

fn read_matrix(path: &Path) -> CliResult<Mat> {
    let rows = parse_rows(&read(path)?)?;
    let cols = rows.first().map_or(0, |r| r.len());
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::Parse { line: i + 1, column: 1, msg: format!("row has {} entries, expected {cols}", rows[i].len()) }.into());
    }
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    Ok(parse_rows(&read(path)?)?.into_iter().flatten().collect())
}

// ---------- commands ----------

fn cmd_parse(path: &Path, io: &Output) -> CliResult<()> {
    let net = parse_netlist(&read(path)?)?;
    let mut summary = format!(
        "nodes {}\nresistors {}\ninductors {}\ncapacitors {}\ntransformers {}\nports {}\n",
        net.used_nodes().len(),
        net.count(ElementKind::R),
        net.count(ElementKind::L),
        net.count(ElementKind::C),
        net.transformer_count(),
        net.ports().len()
    );
    summary.push_str(&match net.faces() {
        Some(f) => format!("faces {}\n", f.len()),
        None => "faces none\n".into(),
    });
    match &io.out {
        Some(p) => {
            write(p, &net.to_text())?;
            print!("{summary}");
        }
        None => print!("{summary}"),
    }
    if let Some(t) = &io.trace {
        if net.ports().is_empty() {
            return Err(CliError::Usage("a frequency trace needs at least one port".into()));
        }
        let drive = vec![Drive::Current; net.ports().len()];
        let k = net.ports().len();
        frequency_trace(t, &log_grid(1e-3, 1e3, TRACE_POINTS), k, k, |s| impedance_at(&net, s, &drive))?;
    }
    Ok(())
}

fn cmd_realize(path: &Path, drive: DriveArg, io: &Output) -> CliResult<()> {
    let net = parse_netlist(&read(path)?)?;
    let d = match drive {
        DriveArg::Current => Drive::Current,
        DriveArg::Voltage => Drive::Voltage,
    };
    let drives = vec![d; net.ports().len()];
    let real = descriptor_to_statespace(&mna_descriptor(&net, &drives)?)?;
    let mut worst: f64 = 0.0;
    for s in probe_points(10, 0x5eed) {
        let g = transfer_eval(&real, s)?;
        let z = impedance_at(&net, s, &drives)?;
        worst = worst.max(rel_err(&g, &z));
    }
    if !(worst < REALIZE_TOL) {
        return Err(Error::OracleMismatch(format!("realization differs from nodal analysis by {worst:.3e}")).into());
    }
    emit(io, &realization_to_json(&real)?)?;
    note(io, &format!("states {}, ports {}, nodal-analysis check: worst relative error {worst:.3e} over 10 probes", real.n(), real.m()));
    if let Some(t) = &io.trace {
        realization_trace(t, &real)?;
    }
    Ok(())
}

/// Signature-symmetric path when signatures can be inferred, else the
/// general two-Riccati path.
fn h2_general(g: &GeneralizedPlant) -> Result<Controller> {
    match g.infer_signatures() {
        Some(sigs) => h2_symmetric(g, &sigs),
        None => Ok(h2_two_riccati(g)?.0),
    }
}

fn closed_loop_norm(g: &GeneralizedPlant, k: &Controller, norm: NormArg) -> Result<f64> {
    let cl = close_loop(g, k)?;
    match norm {
        NormArg::H2 => h2_norm(&cl),
        NormArg::Hinf => hinf_norm(&cl, HINF_TOL),
    }
}

fn cmd_synthesize(path: &Path, problem: &str, norm: NormArg, gamma: Option<f64>, io: &Output) -> CliResult<()> {
    let real = realization_from_json(&read(path)?)?;
    let (g, k, label) = if problem == "2" {
        let plant = Problem2Plant::new(real)?;
        let g = plant.embed();
        let lct = plant.real.class_tag() == ClassTag::LCT;
        match (norm, gamma, lct) {
            (NormArg::H2, _, true) => (g, lct_h2(&plant)?, "closed-form lossless H2 law"),
            (NormArg::H2, _, false) => {
                let k = h2_general(&g)?;
                (g, k, "H2 law")
            }
            (NormArg::Hinf, None, true) => (g, lct_hinf(&plant)?, "static lossless H-infinity law"),
            (NormArg::Hinf, Some(gm), _) => {
                let sigs = g.infer_signatures().ok_or_else(|| Error::Structure("plant has no consistent signatures".into()))?;
                let k = hinf_symmetric(&g, &sigs, gm)?;
                (g, k, "central H-infinity controller")
            }
            (NormArg::Hinf, None, false) => {
                return Err(CliError::Usage("--gamma is required for H-infinity synthesis on plants that are not lossless".into()));
            }
        }
    } else {
        if norm != NormArg::Hinf {
            return Err(CliError::Usage("the full-information problem is solved for the H-infinity norm only".into()));
        }
        let plant = Problem3Plant::new(real)?;
        let k = match plant.real.class_tag() {
            ClassTag::RCT => rct_static(&plant)?,
            _ => rlt_static(&plant)?,
        };
        note(io, &format!("lower bound gamma* = {}", fmt_num(gamma_star(&plant)?)));
        (plant.to_generalized(), k, "static lossy H-infinity law")
    };
    let achieved = closed_loop_norm(&g, &k, norm)?;
    emit(io, &controller_to_json(&k)?)?;
    let name = if norm == NormArg::H2 { "H2" } else { "H-infinity" };
    note(io, &format!("{label}: controller states {}, achieved closed-loop {name} norm {achieved:.5}", k.n()));
    note(io, &format!("achieved norm = {}", fmt_num(achieved)));
    if let Some(t) = &io.trace {
        let omegas = if k.n() > 0 { sweep_for(&k.a) } else { log_grid(1e-3, 1e3, TRACE_POINTS) };
        frequency_trace(t, &omegas, k.d.nrows(), k.d.ncols(), |s| k.transfer(s))?;
    }
    Ok(())
}

fn cmd_verify(plant: &Path, controller: &Path, problem: &str, io: &Output) -> CliResult<()> {
    let real = realization_from_json(&read(plant)?)?;
    let k = controller_from_json(&read(controller)?)?;
    let g = if problem == "2" { Problem2Plant::new(real)?.embed() } else { Problem3Plant::new(real)?.to_generalized() };
    let cl = close_loop(&g, &k)?;
    let margin = if cl.n() == 0 { f64::INFINITY } else { -spectral_abscissa(cl.a()) };
    if !(margin > 0.0) {
        return Err(Error::NotHurwitz(-margin).into());
    }
    let h2 = if max_abs(cl.d()) > 1e-12 { None } else { Some(h2_norm(&cl)?) };
    let hinf = hinf_norm(&cl, HINF_TOL)?;
    let report = json!({
        "stable": true,
        "stability_margin": margin,
        "h2_norm": h2,
        "hinf_norm": hinf,
        "closed_loop_states": cl.n(),
    });
    let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    if io.out.is_some() {
        emit(io, &text)?;
    }
    println!("closed loop stable, margin {}", fmt_num(margin));
    match h2 {
        Some(v) => println!("H2 norm = {}", fmt_num(v)),
        None => println!("H2 norm = inf (nonzero feedthrough)"),
    }
    println!("H-infinity norm = {}", fmt_num(hinf));
    if let Some(t) = &io.trace {
        realization_trace(t, &cl)?;
    }
    Ok(())
}

fn cmd_lsq(a: &Path, b: &Path, c: Option<&Path>, d: Option<&Path>, io: &Output) -> CliResult<()> {
    let a_ls = read_matrix(a)?;
    let b = read_vector(b)?;
    let (c_ls, d) = match (c, d) {
        (Some(c), Some(d)) => (read_matrix(c)?, read_vector(d)?),
        _ => (zeros(0, a_ls.ncols()), vec![]),
    };
    let sol = solve_constrained_ls(&a_ls, &b, &c_ls, &d)?;
    let text = serde_json::to_string_pretty(&json!({
        "x": sol.x,
        "z": sol.z,
        "kkt_residual": sol.kkt_residual,
    }))
    .map_err(Error::from)?;
    emit(io, &text)?;
    note(io, &format!("KKT residual {:.3e}", sol.kkt_residual));
    if let Some(t) = &io.trace {
        let circ = build_least_squares_circuit(&a_ls, &c_ls)?;
        let plant = &circ.plant;
        let (n, p) = (circ.n, circ.p);
        let acl = plant.a() - plant.b() * plant.c();
        let bref = hcat(&[&circ.b_r1, &circ.b_r2]);
        let r: Vec<f64> = b.iter().chain(d.iter()).map(|v| -v).collect();
        let cl = StructuredRealization::new(acl, bref, eye(n + p), zeros(n + p, r.len()))?;
        let sim = simulate(&cl, &InputSignal::Step(r), &SimOptions { t_final: Some(sol.t_final), ..Default::default() })?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=p).map(|i| format!("z{i}")));
        let rows: Vec<Vec<f64>> =
            sim.times.iter().zip(&sim.states).map(|(t, x)| std::iter::once(*t).chain(x.iter().copied()).collect()).collect();
        write_csv(t, &header, &rows)?;
    }
    Ok(())
}

fn read_inertias(path: &Path) -> CliResult<Vec<(usize, f64)>> {
    let rows = parse_rows(&read(path)?)?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| match r.as_slice() {
            [bus, m] if *bus >= 0.0 && bus.fract() == 0.0 => Ok((*bus as usize, *m)),
            _ => Err(Error::Parse { line: i + 1, column: 1, msg: "expected `bus inertia`".into() }.into()),
        })
        .collect()
}

fn cmd_grid(
    laplacian: &Path,
    renewable: &[usize],
    inertia: &Path,
    controller: Option<&Path>,
    netlist: Option<&Path>,
    io: &Output,
) -> CliResult<()> {
    let l = read_matrix(laplacian)?;
    let inertias = read_inertias(inertia)?;
    let grid = build_swing_grid(&l, renewable, &inertias)?;
    let plant = Problem2Plant::new(grid.real.clone())?;
    let k = lct_h2(&plant)?;
    let knet = with_series_port_resistors(&swing_grid_netlist(&l, renewable, &inertias)?, 2.0)?;
    emit(io, &realization_to_json(&grid.real)?)?;
    if let Some(p) = controller {
        write(p, &controller_to_json(&k)?)?;
    }
    match netlist {
        Some(p) => write(p, &knet.to_text())?,
        None => note(io, &knet.to_text()),
    }
    let h2 = closed_loop_norm(&plant.embed(), &k, NormArg::H2)?;
    note(io, &format!("grid plant: {} states, {} renewable ports; closed-loop H2 norm {}", grid.real.n(), renewable.len(), fmt_num(h2)));
    if let Some(t) = &io.trace {
        realization_trace(t, &grid.real)?;
    }
    Ok(())
}

fn cmd_dual(path: &Path, outer: usize, io: &Output) -> CliResult<()> {
    let net = parse_netlist(&read(path)?)?;
    let dual = planar_dual(&net, outer)?;
    emit(io, &dual.to_text())?;
    if let Some(t) = &io.trace {
        let k = dual.ports().len();
        if k == 0 {
            return Err(CliError::Usage("a frequency trace needs at least one port".into()));
        }
        let drive = vec![Drive::Current; k];
        frequency_trace(t, &log_grid(1e-3, 1e3, TRACE_POINTS), k, k, |s| impedance_at(&dual, s, &drive))?;
    }
    Ok(())
}
