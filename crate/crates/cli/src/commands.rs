//! The four subcommands. Each returns an [`Exit`] code; I/O and setup
//! problems come back as errors and map to exit 1.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use dualmp::exponents::{existence_check, AdmissibilityReport};
use dualmp::mesh::{MeshParams, RadialMesh};
use dualmp::mountain_pass::{self, SolveReport};
use dualmp::potential::suggest_envelopes;
use dualmp::verify::{embedding_rate_fit, residual_report, RateFit, ResidualReport, Side};
use dualmp::{DualFunctional, DualTransform, Envelope, RadialFunction, Rational};
use serde::Serialize;

use crate::config::{RateSides, RunConfig};
use crate::profile;

/// Process exit codes: 0 ok, 1 error, 2 failed hypothesis or trivial result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Error = 1,
    Hypothesis = 2,
}

/// A JSON report: a fixed header, the effective config and the body.
#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    command: &'static str,
    version: &'static str,
    /// Wall-clock time of the run; the only field that differs between
    /// otherwise identical runs.
    timestamp: String,
    status: &'a str,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

fn write_json<T: Serialize>(path: &Path, command: &'static str, status: &str, config: &RunConfig, body: T) -> Result<()> {
    let doc = Document {
        command,
        version: env!("CARGO_PKG_VERSION"),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        status,
        config,
        body,
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn output_dir(config: &RunConfig) -> Result<&Path> {
    let dir = config.output.as_path();
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir)
}

/// Admissibility plus the envelope suggestions printed for missing sides.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub admissibility: AdmissibilityReport,
    /// `sup r^2 V(r)` over `(0, 1)`, finite when `V <= C / r^2` near 0.
    pub h_constant: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suggested_zero: Option<Vec<Envelope>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suggested_infinity: Option<Vec<Envelope>>,
}

pub fn check(config: &RunConfig) -> Result<CheckReport> {
    let g = config.nonlinearity()?;
    let Some((q1, q2)) = config.exponents() else {
        bail!("the zero nonlinearity has no growth exponents to check");
    };
    let admissibility =
        existence_check(&config.envelope.zero, &config.envelope.infinity, q1, q2, g.theta(), config.dimension);
    let (zero, infinity) = suggest_envelopes(&config.v, &config.k);
    Ok(CheckReport {
        admissibility,
        h_constant: config.v.hypothesis_h_constant(),
        suggested_zero: config.envelope.zero.is_empty().then_some(zero),
        suggested_infinity: config.envelope.infinity.is_empty().then_some(infinity),
    })
}

fn fmt_opt(q: Option<Rational>) -> String {
    q.map_or_else(|| "-".into(), |q| q.to_string())
}

fn fmt_env(e: Option<Envelope>) -> String {
    e.map_or_else(|| "-".into(), |e| format!("alpha = {}, beta = {}, radius = {}", e.alpha, e.beta, e.radius))
}

fn fmt_interval(i: Option<dualmp::exponents::OpenInterval>) -> String {
    i.map_or_else(|| "empty".into(), |i| format!("({}, {})", i.lower, i.upper))
}

pub fn print_check(report: &CheckReport, out: &mut impl Write) -> std::io::Result<()> {
    let a = &report.admissibility;
    let rows = [
        ("N", a.dimension.get().to_string()),
        ("q1, q2", format!("{}, {}", a.q1, a.q2)),
        ("theta", a.theta.to_string()),
        ("envelope at 0", fmt_env(a.envelope_zero)),
        ("envelope at inf", fmt_env(a.envelope_infinity)),
        ("alpha*(beta0)", fmt_opt(a.alpha_star_0)),
        ("q0*", fmt_opt(a.q0_star)),
        ("qinf*", fmt_opt(a.q_inf_star)),
        ("q1 range", fmt_interval(a.q1_interval)),
        ("q1 existence", fmt_interval(a.q1_existence_interval)),
        ("q2 lower bound", fmt_opt(a.q2_lower)),
        ("single power q", fmt_interval(a.single_power_interval)),
        ("delta0", fmt_opt(a.delta_zero)),
        ("delta_inf", fmt_opt(a.delta_infinity)),
        ("sup r^2 V, r<1", format!("{:e}", report.h_constant)),
    ];
    for (name, value) in rows {
        writeln!(out, "{name:<16} {value}")?;
    }
    if a.normalized_order {
        writeln!(out, "note: q1 > q2 was given; the pair was swapped")?;
    }
    for (side, list) in [("0", &report.suggested_zero), ("inf", &report.suggested_infinity)] {
        if let Some(list) = list {
            let text: Vec<String> = list.iter().map(|e| format!("(alpha {}, beta {})", e.alpha, e.beta)).collect();
            writeln!(out, "suggested envelopes at {side}: {}", if text.is_empty() { "none".into() } else { text.join(", ") })?;
        }
    }
    if a.existence_ok {
        writeln!(out, "status           admissible")
    } else {
        writeln!(out, "status           inadmissible")?;
        for r in &a.reasons {
            writeln!(out, "  - {r}")?;
        }
        Ok(())
    }
}

pub fn cmd_check(config: &RunConfig) -> Result<Exit> {
    let report = check(config)?;
    print_check(&report, &mut std::io::stdout().lock())?;
    let dir = output_dir(config)?;
    let ok = report.admissibility.existence_ok;
    write_json(&dir.join("check.json"), "check", if ok { "admissible" } else { "inadmissible" }, config, &report)?;
    Ok(if ok { Exit::Ok } else { Exit::Hypothesis })
}

pub fn functional(config: &RunConfig, mesh: Arc<RadialMesh>) -> Result<DualFunctional> {
    Ok(DualFunctional::new(mesh, config.v.clone(), config.k.clone(), config.nonlinearity()?, DualTransform::new())?)
}

pub fn base_mesh(config: &RunConfig) -> Result<Arc<RadialMesh>> {
    Ok(Arc::new(RadialMesh::new(config.dimension, config.mesh)?))
}

#[derive(Serialize)]
struct SolveBody<'a> {
    outside_hypotheses: bool,
    reasons: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    report: Option<&'a SolveReport>,
}

/// Run the solver and write `u.csv`, `w.csv`, `history.csv` and
/// `solve.json`. Without `force`, an inadmissible config stops with exit 2.
pub fn cmd_solve(config: &RunConfig, force: bool) -> Result<Exit> {
    let admissible = match check(config) {
        Ok(c) => c.admissibility,
        Err(e) if force => {
            eprintln!("warning: {e:#}");
            return run_solve(config, true, vec![format!("{e:#}")]);
        }
        Err(e) => return Err(e),
    };
    let reasons: Vec<String> = admissible.reasons.iter().map(|r| r.to_string()).collect();
    if !admissible.existence_ok {
        if !force {
            eprintln!("config is outside the existence hypotheses (use --force to solve anyway):");
            for r in &reasons {
                eprintln!("  - {r}");
            }
            return Ok(Exit::Hypothesis);
        }
        eprintln!("warning: solving outside the existence hypotheses");
        return run_solve(config, true, reasons);
    }
    run_solve(config, false, reasons)
}

fn run_solve(config: &RunConfig, outside: bool, reasons: Vec<String>) -> Result<Exit> {
    let dir = output_dir(config)?;
    let path = dir.join("solve.json");
    let f = functional(config, base_mesh(config)?)?;
    let report = match mountain_pass::solve(&f, &config.solver) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            let body = SolveBody { outside_hypotheses: outside, reasons, error: Some(e.to_string()), report: None };
            write_json(&path, "solve", "failed", config, body)?;
            return Ok(Exit::Error);
        }
    };
    profile::write(&dir.join("u.csv"), &report.solution)?;
    profile::write(&dir.join("w.csv"), &report.w)?;
    write_history(&dir.join("history.csv"), &report)?;
    let status = if report.converged { "converged" } else { "not_converged" };
    let error = (!report.converged).then(|| {
        format!("gradient norm {:e} above refine_tol {:e}", report.grad_norm, config.solver.refine_tol)
    });
    print_solve(&report, outside);
    let body = SolveBody { outside_hypotheses: outside, reasons, error, report: Some(&report) };
    write_json(&path, "solve", status, config, body)?;
    Ok(if report.converged { Exit::Ok } else { Exit::Error })
}

fn write_history(path: &Path, report: &SolveReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    for row in &report.history {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn print_solve(r: &SolveReport, outside: bool) {
    if outside {
        println!("note: outside the existence hypotheses");
    }
    println!("{:<18} {}", "converged", r.converged);
    println!("{:<18} {:.10}", "I(u)", r.energy);
    println!("{:<18} {:e}", "gradient norm", r.grad_norm);
    println!("{:<18} {:e}", "min u", r.min_value);
    println!("{:<18} {}", "nodes", r.mesh.nodes);
    println!("{:<18} {:e} (rho {:e})", "alpha_hat", r.certificate.alpha_hat, r.certificate.rho);
    println!("{:<18} {:e}", "endpoint lambda", r.lambda);
    println!("{:<18} {} ({})", "deform iterations", r.deform_iterations, if r.deform_stalled { "stalled" } else { "done" });
    println!("{:<18} {}", "Newton iterations", r.refine_iterations);
    println!("{:>8} {:>16} {:>10} {:>10} {:>10} {:>10}", "nodes", "I", "grad", "ode", "original", "weak");
    for l in &r.levels {
        println!(
            "{:>8} {:>16.10} {:>10.2e} {:>10.2e} {:>10.2e} {:>10.2e}",
            l.nodes, l.energy, l.grad_norm, l.dual_ode_smooth, l.original_smooth, l.weak_form_defect
        );
    }
}

/// Rebuild the mesh a profile lives on: the config's `[mesh]` refined
/// zero or more times.
pub fn profile_mesh(config: &RunConfig, p: &profile::Profile) -> Result<Arc<RadialMesh>> {
    let m = config.mesh;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    let (lo, hi, n) = (p.r[0], p.r[p.r.len() - 1], p.r.len());
    if !close(lo, m.r_min) || !close(hi, m.r_max) {
        bail!("mesh mismatch: profile spans [{lo:e}, {hi:e}], config mesh spans [{:e}, {:e}]", m.r_min, m.r_max);
    }
    let mut nodes = m.nodes;
    while nodes < n {
        nodes = 2 * nodes - 1;
    }
    if nodes != n {
        bail!("mesh mismatch: {n} rows is not a refinement of the {}-node config mesh", m.nodes);
    }
    let mesh = RadialMesh::new(config.dimension, MeshParams { nodes: n, ..m })?;
    for (i, (a, b)) in p.r.iter().zip(mesh.nodes()).enumerate() {
        if (a - b).abs() > 1e-9 * b {
            bail!("mesh mismatch at row {}: r = {a:e}, expected {b:e}", i + 2);
        }
    }
    Ok(Arc::new(mesh))
}

#[derive(Debug, Clone, Serialize)]
pub struct Threshold {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub solution: PathBuf,
    pub nodes: usize,
    pub energy: f64,
    pub grad_norm: f64,
    /// `max |w - f(u)|` against `w.csv` next to the solution, if present.
    pub w_mismatch: Option<f64>,
    pub residuals: ResidualReport,
    pub thresholds: Vec<Threshold>,
    pub passed: bool,
}

pub fn verify(config: &RunConfig, solution: &Path) -> Result<VerifyReport> {
    let p = profile::read(solution)?;
    let mesh = profile_mesh(config, &p)?;
    let last = *p.values.last().expect("nonempty");
    if last != 0.0 {
        bail!("row {}: boundary value {last:e} must be 0", p.r.len() + 1);
    }
    let f = functional(config, mesh.clone())?;
    let u = RadialFunction::from_values(mesh, p.values)?;
    let residuals = residual_report(&u, &f)?;
    let energy = f.value(&u)?;
    let grad_norm = f.grad_norm(&u)?;
    let w_path = solution.with_file_name("w.csv");
    let w_mismatch = if w_path.exists() && w_path != solution {
        let w = profile::read(&w_path)?;
        if w.r.len() != u.values().len() {
            bail!("{} has {} rows, the solution {}", w_path.display(), w.r.len(), u.values().len());
        }
        let ft = f.transform();
        Some(u.values().iter().zip(&w.values).map(|(x, y)| (ft.value(*x) - y).abs()).fold(0.0, f64::max))
    } else {
        None
    };
    let t = config.verify;
    let mut thresholds = vec![
        Threshold { name: "grad_norm", value: grad_norm, limit: t.grad_norm, pass: grad_norm <= t.grad_norm },
        Threshold {
            name: "weak_form_defect",
            value: residuals.weak_form_defect,
            limit: t.weak_form_defect,
            pass: residuals.weak_form_defect <= t.weak_form_defect,
        },
        Threshold {
            name: "min_value",
            value: residuals.min_value,
            limit: t.min_value,
            pass: residuals.min_value >= t.min_value,
        },
        Threshold {
            name: "decay_constant",
            value: residuals.decay_constant,
            limit: t.decay_factor * residuals.decay_library_max,
            pass: residuals.decay_constant <= t.decay_factor * residuals.decay_library_max,
        },
        Threshold { name: "energy", value: energy, limit: 0.0, pass: energy > 0.0 },
    ];
    if let Some(m) = w_mismatch {
        thresholds.push(Threshold { name: "w_mismatch", value: m, limit: 1e-10, pass: m <= 1e-10 });
    }
    let passed = thresholds.iter().all(|t| t.pass);
    Ok(VerifyReport {
        solution: solution.to_path_buf(),
        nodes: u.values().len(),
        energy,
        grad_norm,
        w_mismatch,
        residuals,
        thresholds,
        passed,
    })
}

/// Check a solution file (default `<output>/u.csv`) against the thresholds
/// in `[verify]`. A zero profile exits 2.
pub fn cmd_verify(config: &RunConfig, solution: Option<&Path>) -> Result<Exit> {
    let default = config.output.join("u.csv");
    let solution = solution.unwrap_or(&default);
    let report = verify(config, solution)?;
    let r = &report.residuals;
    println!("{:<20} {}", "nodes", report.nodes);
    println!("{:<20} {:.10}", "I(u)", report.energy);
    println!("{:<20} {:e} (smooth {:e})", "dual ODE residual", r.dual_ode.max_rel, r.dual_ode.max_rel_smooth);
    println!(
        "{:<20} {:e} (smooth {:e})",
        "original residual", r.original_equation.max_rel, r.original_equation.max_rel_smooth
    );
    println!("{:<20} {:e}", "identity mismatch", r.identity_mismatch);
    for t in &report.thresholds {
        let mark = if t.pass { "ok" } else { "FAIL" };
        println!("{:<20} {:e} (limit {:e}) {mark}", t.name, t.value, t.limit);
    }
    let (status, exit) = if !r.nontrivial {
        println!("trivial solution");
        ("trivial", Exit::Hypothesis)
    } else if report.passed {
        ("passed", Exit::Ok)
    } else {
        ("failed", Exit::Error)
    };
    let dir = output_dir(config)?;
    write_json(&dir.join("verify.json"), "verify", status, config, &report)?;
    Ok(exit)
}

#[derive(Debug, Clone, Serialize)]
pub struct RateCheck {
    pub fit: RateFit,
    /// `δ̂ > 0` at the origin, `δ̂ < 0` at infinity.
    pub sign_ok: bool,
    /// `δ̂0 >= 0.8 δ_pred` at the origin, `δ̂∞ <= 0.8 δ_pred` at infinity.
    pub one_sided_ok: bool,
}

pub fn rates(config: &RunConfig) -> Result<Result<Vec<RateCheck>, Vec<String>>> {
    let a = check(config)?.admissibility;
    let sides: &[Side] = match config.rates.side {
        RateSides::Zero => &[Side::Zero],
        RateSides::Infinity => &[Side::Infinity],
        RateSides::Both => &[Side::Zero, Side::Infinity],
    };
    let mut missing = Vec::new();
    let mut plan = Vec::new();
    for &side in sides {
        let (env, q) = match side {
            Side::Zero => (a.envelope_zero, config.rates.q_zero.unwrap_or(a.q1)),
            Side::Infinity => (a.envelope_infinity, config.rates.q_infinity.unwrap_or(a.q2)),
        };
        match env {
            Some(e) => plan.push((side, e, q)),
            None => missing.push(format!("no envelope declared at {}", side_name(side))),
        }
    }
    if !missing.is_empty() {
        return Ok(Err(missing));
    }
    let params = config.rates.params();
    let ft = DualTransform::new();
    let mut out = Vec::new();
    for (side, env, q) in plan {
        let fit = embedding_rate_fit(q, &env, side, &config.v, &config.k, &ft, config.dimension, &params)?;
        let pred = dualmp::exponents::to_f64(fit.delta_predicted);
        let (sign_ok, one_sided_ok) = match side {
            Side::Zero => (fit.delta_hat > 0.0, fit.delta_hat >= 0.8 * pred),
            Side::Infinity => (fit.delta_hat < 0.0, fit.delta_hat <= 0.8 * pred),
        };
        out.push(RateCheck { fit, sign_ok, one_sided_ok });
    }
    Ok(Ok(out))
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Zero => "zero",
        Side::Infinity => "infinity",
    }
}

#[derive(Serialize)]
struct RatesBody<'a> {
    fits: &'a [RateCheck],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    reasons: Vec<String>,
}

/// Fit the decay of `S0` / `S∞` and write `rates_<side>.csv` and
/// `rates.json`. A side without an envelope exits 2.
pub fn cmd_rates(config: &RunConfig) -> Result<Exit> {
    let dir = output_dir(config)?;
    let fits = match rates(config)? {
        Ok(f) => f,
        Err(reasons) => {
            for r in &reasons {
                eprintln!("{r}");
            }
            write_json(&dir.join("rates.json"), "rates", "inadmissible", config, RatesBody { fits: &[], reasons })?;
            return Ok(Exit::Hypothesis);
        }
    };
    for c in &fits {
        let path = dir.join(format!("rates_{}.csv", side_name(c.fit.side)));
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record(["R", "S_estimate"])?;
        for (r, s) in &c.fit.ladder {
            w.write_record([format!("{r:e}"), format!("{s:e}")])?;
        }
        w.flush()?;
        println!(
            "{:<9} q = {:<6} delta_hat = {:>9.4}  predicted = {} ({:.4})  sign {}  one-sided {}  monotone {}",
            side_name(c.fit.side),
            c.fit.q.to_string(),
            c.fit.delta_hat,
            c.fit.delta_predicted,
            dualmp::exponents::to_f64(c.fit.delta_predicted),
            c.sign_ok,
            c.one_sided_ok,
            c.fit.monotone
        );
    }
    write_json(&dir.join("rates.json"), "rates", "done", config, RatesBody { fits: &fits, reasons: Vec::new() })?;
    Ok(Exit::Ok)
}
