//! Numerical mountain pass for the discrete dual functional: endpoint
//! search, an empirical ρ-certificate, Choi-McKenna path deformation and a
//! damped Newton polish.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::DualFunctional;
use crate::error::{EvalError, SolveError};
use crate::exponents::to_f64;
use crate::linalg::dot;
use crate::mesh::{grad_seminorm_sq, MeshParams, RadialFunction};
use crate::verify::{self, random_profile, sample_rng, ResidualReport};

/// Solver knobs, all with defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    /// Number of path segments `P` (the path has `P + 1` points).
    pub path_points: usize,
    /// Fixed ρ; when absent, `rho_factor * J(v) / 2`.
    pub rho: Option<f64>,
    pub rho_factor: f64,
    pub certificate_samples: usize,
    pub deform_tol: f64,
    pub deform_max_iter: usize,
    pub respace_every: usize,
    /// Stop deforming once the path maximum has not decreased for this many
    /// iterations and the gradient norm is below `refine_start` (0 disables).
    pub stall_window: usize,
    /// Relative decrease of the path maximum that resets the stall count.
    pub stall_tol: f64,
    /// Mesh refinements (each halving the log-spacing) after the first polish.
    pub polish_levels: usize,
    /// Gradient norm below which the Newton polish may start.
    pub refine_start: f64,
    pub refine_tol: f64,
    pub refine_max_iter: usize,
    pub armijo_c: f64,
    pub seed: u64,
    /// Height of the tent `u0` supported on `[1, 2]`.
    pub u0_height: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            path_points: 21,
            rho: None,
            rho_factor: 1e-3,
            certificate_samples: 64,
            deform_tol: 1e-8,
            deform_max_iter: 20_000,
            respace_every: 10,
            stall_window: 50,
            stall_tol: 1e-5,
            polish_levels: 3,
            refine_start: 1.0,
            refine_tol: 1e-10,
            refine_max_iter: 100,
            armijo_c: 1e-4,
            seed: 0,
            u0_height: 3.0,
        }
    }
}

/// Tent of height `height` supported on `[1, 2]`.
pub fn default_u0(mesh: &Arc<crate::mesh::RadialMesh>, height: f64) -> RadialFunction {
    RadialFunction::from_fn(mesh.clone(), |r| height * (1.0 - 2.0 * (r - 1.5).abs()).max(0.0))
}

/// Double `λ` from 1 until `I(λ u0) < 0` and `J(λ u0) > ρ`.
pub fn find_endpoint(
    f: &DualFunctional,
    u0: &RadialFunction,
    rho: f64,
) -> Result<(f64, RadialFunction), SolveError> {
    let limit = 2f64.powi(40);
    let mut lambda = 1.0;
    while lambda <= limit {
        let v = u0.scaled(lambda);
        match (f.value(&v), f.j_value(&v)) {
            (Ok(i), Ok(j)) if i < 0.0 && j > rho => return Ok((lambda, v)),
            (Ok(_), Ok(_)) => {}
            (Err(_), _) | (_, Err(_)) => break,
        }
        lambda *= 2.0;
    }
    Err(SolveError::EndpointSearch(limit))
}

/// Outcome of [`rho_certificate`]. The bound is sampled, not proven.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub rho: f64,
    pub samples: usize,
    pub used: usize,
    pub skipped: usize,
    /// Minimum of `I` over the rescaled samples on `J = ρ`.
    pub alpha_hat: f64,
    pub empirical: bool,
    /// Exponents `q1/2`, `q2/2` of the bound `ρ - C5 ρ^{q1/2} - C6 ρ^{q2/2}`.
    pub bound_exponents: (f64, f64),
    /// `(ρ - α̂) / ρ^{q1/2}`: the constant the bound would need if the
    /// second term were absent.
    pub implied_constant: f64,
}

/// `λ > 0` with `J(λ u) = ρ`, by bracketing and bisection.
fn rescale_to_level(f: &DualFunctional, u: &RadialFunction, rho: f64) -> Option<f64> {
    let j = |l: f64| f.j_value(&u.scaled(l)).ok();
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut guard = 0;
    while j(hi)? < rho {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if j(mid)? < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Sample `samples` random profiles, rescale each onto `S_ρ = {J = ρ}` and
/// return the minimum of `I` over them.
pub fn rho_certificate(f: &DualFunctional, rho: f64, samples: usize, seed: u64) -> Certificate {
    let mesh = f.mesh().clone();
    let values: Vec<Option<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let u = random_profile(&mesh, &mut rng);
            let lambda = rescale_to_level(f, &u, rho)?;
            f.value(&u.scaled(lambda)).ok()
        })
        .collect();
    let used: Vec<f64> = values.iter().flatten().copied().collect();
    let alpha_hat = used.iter().copied().fold(f64::INFINITY, f64::min);
    let (q1, q2) = f
        .nonlinearity()
        .kind()
        .exponents()
        .map_or((f64::INFINITY, f64::INFINITY), |(a, b)| (to_f64(a) / 2.0, to_f64(b) / 2.0));
    Certificate {
        rho,
        samples,
        used: used.len(),
        skipped: samples - used.len(),
        alpha_hat,
        empirical: true,
        bound_exponents: (q1, q2),
        implied_constant: (rho - alpha_hat) / rho.powf(q1),
    }
}

/// One row of the iteration history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub max_energy: f64,
    pub grad_norm: f64,
}

/// A discrete path from 0 to the endpoint `v`.
#[derive(Debug, Clone)]
pub struct PathState {
    pub points: Vec<RadialFunction>,
    pub energies: Vec<f64>,
    pub max_index: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Deformation stopped because the path maximum stopped decreasing.
    pub stalled: bool,
    pub grad_norm: f64,
    pub history: Vec<HistoryRow>,
    /// Energy of the moved point before and after each accepted step.
    pub steps: Vec<(f64, f64)>,
    /// Level `ρ`; a truncated endpoint must still satisfy `J > ρ`.
    pub rho: f64,
}

impl PathState {
    /// Straight path `t v`, `t = k / P`.
    pub fn straight(f: &DualFunctional, v: &RadialFunction, segments: usize, rho: f64) -> Result<Self, EvalError> {
        let points: Vec<RadialFunction> =
            (0..=segments).map(|k| v.scaled(k as f64 / segments as f64)).collect();
        let energies = points.par_iter().map(|p| f.value(p)).collect::<Result<Vec<_>, _>>()?;
        let mut state = Self {
            points,
            energies,
            max_index: 0,
            iterations: 0,
            converged: false,
            stalled: false,
            grad_norm: f64::INFINITY,
            history: Vec::new(),
            steps: Vec::new(),
            rho,
        };
        state.update_max();
        Ok(state)
    }

    fn update_max(&mut self) {
        let n = self.points.len();
        self.max_index = (1..n - 1)
            .max_by(|&a, &b| self.energies[a].total_cmp(&self.energies[b]))
            .unwrap_or(0);
    }

    pub fn max_energy(&self) -> f64 {
        self.energies[self.max_index]
    }

    pub fn max_point(&self) -> &RadialFunction {
        &self.points[self.max_index]
    }

    /// Replace the maximal point by the maximum of `I` along its two
    /// adjacent chords when that is higher.
    pub fn locate_max(&mut self, f: &DualFunctional) {
        let m = self.max_index;
        let mut best = (self.energies[m], None);
        for (a, b) in [(m - 1, m), (m, m + 1)] {
            let (pa, pb) = (&self.points[a], &self.points[b]);
            let diff = pb.axpy(-1.0, pa);
            let phi = |t: f64| f.value(&pa.axpy(t, &diff)).unwrap_or(f64::NEG_INFINITY);
            let (t, e) = golden_max(phi, 0.0, 1.0, 1e-6);
            if e > best.0 {
                best = (e, Some(pa.axpy(t, &diff)));
            }
        }
        if let (e, Some(p)) = best {
            self.points[m] = p;
            self.energies[m] = e;
        }
    }

    /// Re-parametrize the polyline to equal E-norm spacing, after cutting
    /// it at the first point past the maximum with `I < 0` and `J > ρ`.
    fn respace(&mut self, f: &DualFunctional) -> Result<(), EvalError> {
        let n = self.points.len();
        let mut end = n - 1;
        for k in self.max_index + 1..n - 1 {
            if self.energies[k] < 0.0 && f.j_value(&self.points[k])? > self.rho {
                end = k;
                break;
            }
        }
        let lengths = (0..end)
            .into_par_iter()
            .map(|k| f.e_norm(&self.points[k + 1].axpy(-1.0, &self.points[k])))
            .collect::<Result<Vec<f64>, _>>()?;
        let total: f64 = lengths.iter().sum();
        if !(total > 0.0) {
            return Ok(());
        }
        let mut cumulative = vec![0.0];
        for l in &lengths {
            cumulative.push(cumulative.last().expect("nonempty") + l);
        }
        let mut fresh = Vec::with_capacity(n);
        fresh.push(self.points[0].clone());
        for j in 1..n - 1 {
            let s = total * j as f64 / (n - 1) as f64;
            let k = cumulative.partition_point(|&c| c <= s).clamp(1, end) - 1;
            let t = if lengths[k] > 0.0 { (s - cumulative[k]) / lengths[k] } else { 0.0 };
            let diff = self.points[k + 1].axpy(-1.0, &self.points[k]);
            fresh.push(self.points[k].axpy(t.clamp(0.0, 1.0), &diff));
        }
        fresh.push(self.points[end].clone());
        self.energies = fresh.par_iter().map(|p| f.value(p)).collect::<Result<Vec<_>, _>>()?;
        self.points = fresh;
        self.update_max();
        Ok(())
    }
}

/// Golden-section maximization of a unimodal `phi` on `[a, b]`.
fn golden_max(phi: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv * (b - a);
    let mut d = a + inv * (b - a);
    let (mut fc, mut fd) = (phi(c), phi(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv * (b - a);
            fd = phi(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Move the highest path point downhill along `-A^{-1} I'(u)` with Armijo
/// backtracking, re-spacing the path every `respace_every` iterations,
/// until the gradient norm there is at most `tol`.
pub fn deform_path(
    mut state: PathState,
    f: &DualFunctional,
    tol: f64,
    max_iter: usize,
    params: &SolverParams,
) -> Result<PathState, SolveError> {
    let start = state.iterations;
    let (mut best, mut since_best) = (f64::INFINITY, 0);
    loop {
        state.update_max();
        state.locate_max(f);
        let m = state.max_index;
        if state.energies[m] < best - params.stall_tol * best.abs() {
            best = state.energies[m];
            since_best = 0;
        } else {
            since_best += 1;
        }
        let u = state.points[m].clone();
        let grad = f.gradient(&u)?;
        let dir = f.riesz(&grad);
        let gn2 = dot(&grad, &dir).max(0.0);
        let gn = gn2.sqrt();
        state.grad_norm = gn;
        state.history.push(HistoryRow { iter: state.iterations, max_energy: state.energies[m], grad_norm: gn });
        if gn <= tol {
            state.converged = true;
            return Ok(state);
        }
        if state.iterations - start >= max_iter {
            return Ok(state);
        }
        if params.stall_window > 0 && since_best >= params.stall_window && gn <= params.refine_start {
            state.stalled = true;
            return Ok(state);
        }
        let direction = RadialFunction::from_values(f.mesh().clone(), dir)?;
        let e0 = state.energies[m];
        let seg = |k: usize| grad_seminorm_sq(&state.points[k + 1].axpy(-1.0, &state.points[k])).sqrt();
        let reach = seg(m - 1).min(seg(m));
        let mut t = if gn > reach && gn > 0.0 { reach / gn } else { 1.0 };
        let mut accepted = None;
        while t > 1e-30 {
            let cand = u.axpy(-t, &direction);
            if let Ok(e) = f.value(&cand) {
                if e <= e0 - params.armijo_c * t * gn2 {
                    accepted = Some((cand, e));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, e)) = accepted else {
            // no descent possible at this resolution
            return Ok(state);
        };
        state.points[m] = cand;
        state.energies[m] = e;
        state.steps.push((e0, e));
        state.iterations += 1;
        if params.respace_every > 0 && state.iterations % params.respace_every == 0 {
            state.respace(f)?;
        }
    }
}

/// Result of [`refine`].
#[derive(Debug, Clone)]
pub struct Refined {
    pub u: RadialFunction,
    pub grad_norm: f64,
    pub iterations: usize,
    pub history: Vec<HistoryRow>,
    /// Nodes whose negative values were projected to 0.
    pub projected: usize,
}

/// Damped Newton on `I'(u) = 0`, merit `‖I'(u)‖`, until the gradient norm
/// is at most `tol`; then project tiny negative values to 0.
pub fn refine(
    f: &DualFunctional,
    u: &RadialFunction,
    tol: f64,
    params: &SolverParams,
) -> Result<Refined, SolveError> {
    let mut u = u.clone();
    let mut gn = f.grad_norm(&u)?;
    if gn > params.refine_start {
        return Err(SolveError::RefineStart(gn));
    }
    let mut history = vec![HistoryRow { iter: 0, max_energy: f.value(&u)?, grad_norm: gn }];
    let mut iterations = 0;
    let mut worse = 0;
    while gn > tol {
        if iterations >= params.refine_max_iter {
            return Err(SolveError::Diverged { iterations, grad_norm: gn, dump: u.into_values() });
        }
        let grad = f.gradient(&u)?;
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let step = f
            .hessian(&u)?
            .solve_pivoting(&neg)
            .ok_or_else(|| SolveError::Diverged { iterations, grad_norm: gn, dump: u.values().to_vec() })?;
        let step = RadialFunction::from_values(f.mesh().clone(), step)?;
        let mut t = 1.0;
        let (next, next_gn) = loop {
            let cand = u.axpy(t, &step);
            let cand_gn = f.grad_norm(&cand).unwrap_or(f64::INFINITY);
            if cand_gn <= (1.0 - 1e-4 * t) * gn || t < 1e-6 {
                break (cand, cand_gn);
            }
            t *= 0.5;
        };
        worse = if next_gn >= gn { worse + 1 } else { 0 };
        iterations += 1;
        u = next;
        gn = next_gn;
        history.push(HistoryRow { iter: iterations, max_energy: f.value(&u)?, grad_norm: gn });
        if worse >= 10 || !gn.is_finite() {
            return Err(SolveError::Diverged { iterations, grad_norm: gn, dump: u.into_values() });
        }
    }
    let mut projected = 0;
    for (i, x) in u.values_mut().iter_mut().enumerate() {
        if *x < 0.0 {
            if *x >= -1e-12 {
                *x = 0.0;
                projected += 1;
            } else {
                return Err(SolveError::Negative { node: i, value: *x });
            }
        }
    }
    if projected > 0 {
        gn = f.grad_norm(&u)?;
    }
    Ok(Refined { u, grad_norm: gn, iterations, history, projected })
}

/// Per-level summary of the multilevel polish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub nodes: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub newton_iterations: usize,
    /// Largest relative dual-ODE residual away from corners of `V`, `K`.
    pub dual_ode_smooth: f64,
    /// Same for the original quasilinear equation in `w`.
    pub original_smooth: f64,
    pub weak_form_defect: f64,
}

/// Everything produced by [`solve`].
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub energy: f64,
    pub j_value: f64,
    pub grad_norm: f64,
    pub min_value: f64,
    pub e_norm: f64,
    pub lambda: f64,
    pub endpoint_energy: f64,
    pub certificate: Certificate,
    pub initial_max_energy: f64,
    pub path_max_energy: f64,
    pub deform_iterations: usize,
    pub deform_converged: bool,
    pub deform_stalled: bool,
    pub deform_grad_norm: f64,
    pub refine_iterations: usize,
    pub projected_nodes: usize,
    /// `α̂ <= I(u*) <= initial path maximum`.
    pub level_ok: bool,
    /// Mesh of the reported solution.
    pub mesh: MeshParams,
    /// One entry per mesh, coarsest first.
    pub levels: Vec<LevelSummary>,
    pub residuals: ResidualReport,
    #[serde(skip)]
    pub solution: RadialFunction,
    #[serde(skip)]
    pub w: RadialFunction,
    #[serde(skip)]
    pub history: Vec<HistoryRow>,
}

/// Full pipeline: endpoint, certificate, deformation, Newton polish on the
/// mesh of `f`, then `polish_levels` rounds of mesh refinement, each
/// interpolating the previous solution and polishing it again.
pub fn solve(f: &DualFunctional, params: &SolverParams) -> Result<SolveReport, SolveError> {
    let u0 = default_u0(f.mesh(), params.u0_height);
    let (lambda, v) = find_endpoint(f, &u0, 0.0)?;
    let j_v = f.j_value(&v)?;
    let rho = params.rho.unwrap_or(params.rho_factor * j_v / 2.0);
    if j_v <= rho {
        return Err(SolveError::EndpointSearch(lambda));
    }
    let certificate = rho_certificate(f, rho, params.certificate_samples, params.seed);
    if !(certificate.alpha_hat > 0.0) {
        return Err(SolveError::CertificateRefused { rho, alpha: certificate.alpha_hat });
    }
    let mut path = PathState::straight(f, &v, params.path_points, rho)?;
    path.locate_max(f);
    let initial_max_energy = path.max_energy();
    let path = deform_path(path, f, params.deform_tol, params.deform_max_iter, params)?;

    let mut history = path.history.clone();
    let mut refined = refine(f, path.max_point(), params.refine_tol, params)?;
    append_history(&mut history, &refined.history);
    let mut residuals = verify::residual_report(&refined.u, f)?;
    let mut levels = vec![summary(f, &refined, &residuals)?];
    let mut current = f.clone();
    let mut refine_iterations = refined.iterations;
    for _ in 0..params.polish_levels {
        let fine = Arc::new(current.mesh().refined());
        current = current.on_mesh(fine.clone())?;
        refined = refine(&current, &refined.u.interpolate(fine), params.refine_tol, params)?;
        append_history(&mut history, &refined.history);
        residuals = verify::residual_report(&refined.u, &current)?;
        levels.push(summary(&current, &refined, &residuals)?);
        refine_iterations += refined.iterations;
    }

    let u = refined.u;
    let energy = current.value(&u)?;
    let ft = *current.transform();
    Ok(SolveReport {
        converged: refined.grad_norm <= params.refine_tol && energy > 0.0,
        energy,
        j_value: current.j_value(&u)?,
        grad_norm: refined.grad_norm,
        min_value: u.min_value(),
        e_norm: residuals.e_norm,
        lambda,
        endpoint_energy: f.value(&v)?,
        level_ok: certificate.alpha_hat <= energy && energy <= initial_max_energy,
        certificate,
        initial_max_energy,
        path_max_energy: path.max_energy(),
        deform_iterations: path.iterations,
        deform_converged: path.converged,
        deform_stalled: path.stalled,
        deform_grad_norm: path.grad_norm,
        refine_iterations,
        projected_nodes: refined.projected,
        mesh: current.mesh().params(),
        levels,
        residuals,
        w: u.map(|x| ft.value(x)),
        solution: u,
        history,
    })
}

fn append_history(history: &mut Vec<HistoryRow>, more: &[HistoryRow]) {
    let offset = history.last().map_or(0, |h| h.iter);
    history.extend(more.iter().skip(1).map(|h| HistoryRow { iter: h.iter + offset, ..*h }));
}

fn summary(f: &DualFunctional, refined: &Refined, residuals: &ResidualReport) -> Result<LevelSummary, SolveError> {
    Ok(LevelSummary {
        nodes: f.mesh().len(),
        energy: f.value(&refined.u)?,
        grad_norm: refined.grad_norm,
        newton_iterations: refined.iterations,
        dual_ode_smooth: residuals.dual_ode.max_rel_smooth,
        original_smooth: residuals.original_equation.max_rel_smooth,
        weak_form_defect: residuals.weak_form_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::{Dimension, Rational};
    use crate::mesh::RadialMesh;
    use crate::nonlinearity::{Nonlinearity, NonlinearityKind};
    use crate::potential::Potential;
    use crate::transform::DualTransform;

    fn functional(kind: NonlinearityKind, nodes: usize) -> DualFunctional {
        let mesh = RadialMesh::new(Dimension::new(3).unwrap(), MeshParams { r_min: 1e-4, r_max: 200.0, nodes });
        DualFunctional::new(
            Arc::new(mesh.unwrap()),
            Potential::parse("r^-2").unwrap(),
            Potential::parse("min(r^3, 1)").unwrap(),
            Nonlinearity::new(kind, Rational::from_integer(4), true).unwrap(),
            DualTransform::new(),
        )
        .unwrap()
    }

    fn power8(nodes: usize) -> DualFunctional {
        functional(NonlinearityKind::SinglePower { q: Rational::from_integer(8) }, nodes)
    }

    fn quick() -> SolverParams {
        SolverParams { certificate_samples: 8, polish_levels: 0, ..SolverParams::default() }
    }

    #[test]
    fn endpoint_is_first_doubling() {
        let f = power8(400);
        let u0 = default_u0(f.mesh(), 3.0);
        let (lambda, v) = find_endpoint(&f, &u0, 0.0).unwrap();
        assert!(f.value(&v).unwrap() < 0.0);
        if lambda > 1.0 {
            assert!(f.value(&u0.scaled(lambda / 2.0)).unwrap() >= 0.0);
        }
        let big = u0.scaled(lambda);
        assert_eq!(find_endpoint(&f, &big, 0.0).unwrap().0, 1.0);
    }

    #[test]
    fn endpoint_fails_without_nonlinearity() {
        let f = functional(NonlinearityKind::Zero, 200);
        let u0 = default_u0(f.mesh(), 3.0);
        assert!(matches!(find_endpoint(&f, &u0, 0.0), Err(SolveError::EndpointSearch(_))));
    }

    #[test]
    fn certificate_without_nonlinearity_is_rho() {
        let f = functional(NonlinearityKind::Zero, 200);
        let c = rho_certificate(&f, 0.7, 6, 3);
        assert_eq!(c.used, 6);
        assert!((c.alpha_hat - 0.7).abs() < 1e-12, "{}", c.alpha_hat);
    }

    #[test]
    fn certificate_is_positive_for_small_rho_and_refused_for_large() {
        let f = power8(400);
        assert!(rho_certificate(&f, 1e-3, 16, 0).alpha_hat > 0.0);
        assert!(rho_certificate(&f, 1e3, 16, 0).alpha_hat <= 0.0);
    }

    #[test]
    fn certificate_is_deterministic() {
        let f = power8(300);
        assert_eq!(rho_certificate(&f, 0.1, 8, 42), rho_certificate(&f, 0.1, 8, 42));
    }

    #[test]
    fn accepted_steps_never_raise_the_moved_point() {
        let f = power8(300);
        let u0 = default_u0(f.mesh(), 3.0);
        let (_, v) = find_endpoint(&f, &u0, 0.0).unwrap();
        let path = PathState::straight(&f, &v, 11, 1e-3).unwrap();
        let path = deform_path(path, &f, 1e-8, 60, &quick()).unwrap();
        assert!(!path.steps.is_empty());
        assert!(path.steps.iter().all(|(a, b)| b <= a));
        assert!(path.energies.iter().all(|e| e.is_finite()));
        assert_eq!(path.energies[0], 0.0);
        assert!(*path.energies.last().unwrap() < 0.0);
    }

    #[test]
    fn pipeline_on_coarse_mesh() {
        let f = power8(500);
        let report = solve(&f, &quick()).unwrap();
        assert!(report.converged);
        assert!(report.grad_norm <= 1e-10);
        assert!(report.energy > 0.0 && report.level_ok);
        assert!(report.min_value >= -1e-12);
        assert!(report.residuals.nontrivial);
        let tail: Vec<f64> = report.history.iter().rev().take(3).map(|h| h.grad_norm).collect();
        assert!(tail.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn critical_point_is_left_alone() {
        let f = power8(500);
        let report = solve(&f, &quick()).unwrap();
        let again = refine(&f, &report.solution, 1e-10, &quick()).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(again.u.values(), report.solution.values());

        let u = &report.solution;
        let path = PathState {
            points: vec![u.scaled(0.0), u.scaled(0.5), u.clone(), u.scaled(3.0)],
            energies: vec![0.0, f.value(&u.scaled(0.5)).unwrap(), report.energy, f.value(&u.scaled(3.0)).unwrap()],
            max_index: 2,
            iterations: 0,
            converged: false,
            stalled: false,
            grad_norm: f64::INFINITY,
            history: Vec::new(),
            steps: Vec::new(),
            rho: 1e-3,
        };
        let out = deform_path(path, &f, 1e-3, 10, &quick()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn scaling_k_keeps_the_chain_working() {
        let f = power8(400).with_k_scaled(10.0).unwrap();
        let base = solve(&power8(400), &quick()).unwrap();
        let scaled = solve(&f, &quick()).unwrap();
        assert!(scaled.converged && scaled.certificate.alpha_hat > 0.0);
        assert!((scaled.energy - base.energy).abs() > 1e-3 * base.energy);
    }

    #[test]
    fn params_reject_unknown_fields() {
        assert!(serde_json::from_str::<SolverParams>(r#"{"path_points": 9}"#).is_ok());
        assert!(serde_json::from_str::<SolverParams>(r#"{"bogus": 1}"#).is_err());
    }
}
