//! Post-hoc checks of a computed critical point: finite-difference
//! residuals of the dual and original radial equations, weak-form defects
//! against a battery of smooth bumps, the radial decay constant, and
//! empirical decay rates of the embedding suprema `S0`, `S∞`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::DualFunctional;
use crate::error::{DomainError, EvalError};
use crate::exponents::{delta_rate_infinity, delta_rate_zero, to_f64, Dimension, Envelope, Rational};
use crate::mesh::{self, MeshParams, RadialFunction, RadialMesh};
use crate::potential::Potential;
use crate::transform::DualTransform;

/// Number of nodes dropped at each end before taking residual maxima.
pub const TRIM: usize = 5;

/// Maximum of a pointwise residual over the interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// Largest absolute residual.
    pub max_abs: f64,
    /// Largest residual relative to the sum of the magnitudes of the terms.
    pub max_rel: f64,
    /// Node of `max_rel`.
    pub node: usize,
    pub r: f64,
    /// Largest relative residual once stencils touching a corner of `V` or
    /// `K` are also excluded.
    pub max_rel_smooth: f64,
    /// Number of such excluded nodes.
    pub nonsmooth_nodes: usize,
}

impl Residual {
    fn zero() -> Self {
        Self { max_abs: 0.0, max_rel: 0.0, node: 0, r: 0.0, max_rel_smooth: 0.0, nonsmooth_nodes: 0 }
    }

    fn push(&mut self, node: usize, r: f64, raw: f64, scale: f64, smooth: bool) {
        let rel = if scale > 0.0 { raw.abs() / scale } else { 0.0 };
        self.max_abs = self.max_abs.max(raw.abs());
        if rel > self.max_rel {
            self.max_rel = rel;
            self.node = node;
            self.r = r;
        }
        if smooth {
            self.max_rel_smooth = self.max_rel_smooth.max(rel);
        } else {
            self.nonsmooth_nodes += 1;
        }
    }
}

/// Three-point first and second derivative weights on a nonuniform grid.
fn stencil(r: &[f64], i: usize) -> ([f64; 3], [f64; 3]) {
    let h1 = r[i] - r[i - 1];
    let h2 = r[i + 1] - r[i];
    let d1 = [-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))];
    let d2 = [2.0 / (h1 * (h1 + h2)), -2.0 / (h1 * h2), 2.0 / (h2 * (h1 + h2))];
    (d1, d2)
}

fn apply(w: [f64; 3], v: &[f64], i: usize) -> f64 {
    w[0] * v[i - 1] + w[1] * v[i] + w[2] * v[i + 1]
}

/// Nodes whose stencil straddles a corner of one of the potentials,
/// detected as a jump of the log-log slope between neighbouring cells.
pub fn nonsmooth_nodes(mesh: &RadialMesh, potentials: &[&Potential]) -> Vec<bool> {
    let r = mesh.nodes();
    let n = r.len();
    let mut flag = vec![false; n];
    for p in potentials {
        let vals: Vec<f64> = r.iter().map(|&x| p.eval(x)).collect();
        let slope = |k: usize| {
            let (a, b) = (vals[k], vals[k + 1]);
            (a > 0.0 && b > 0.0).then(|| (b.ln() - a.ln()) / (r[k + 1].ln() - r[k].ln()))
        };
        for i in 1..n - 1 {
            if let (Some(sl), Some(sr)) = (slope(i - 1), slope(i)) {
                if (sr - sl).abs() > 0.05 * (sl.abs() + sr.abs()) + 0.05 {
                    for j in i.saturating_sub(2)..(i + 3).min(n) {
                        flag[j] = true;
                    }
                }
            }
        }
    }
    flag
}

/// Residual of `u'' + (N-1)/r u' - V f(u) f'(u) + K g(f(u)) f'(u) (+ s) = 0`.
pub fn dual_ode_residual(u: &RadialFunction, functional: &DualFunctional) -> Residual {
    dual_ode_residual_with_source(u, functional, None)
}

/// [`dual_ode_residual`] with an optional source density `s(r)`.
pub fn dual_ode_residual_with_source(
    u: &RadialFunction,
    functional: &DualFunctional,
    source: Option<&(dyn Fn(f64) -> f64 + Sync)>,
) -> Residual {
    let mesh = u.mesh();
    let r = mesh.nodes();
    let v = u.values();
    let nm1 = mesh.dim().get() as f64 - 1.0;
    let (vp, kp, g, ft) = (functional.v(), functional.k(), functional.nonlinearity(), functional.transform());
    let corner = nonsmooth_nodes(mesh, &[vp, kp]);
    let mut out = Residual::zero();
    for i in TRIM.max(1)..r.len().saturating_sub(TRIM).max(1) {
        if i + 1 >= r.len() {
            break;
        }
        let (d1, d2) = stencil(r, i);
        let (w, d, _) = ft.triple(v[i]);
        let terms = [
            apply(d2, v, i),
            nm1 / r[i] * apply(d1, v, i),
            -vp.eval(r[i]) * w * d,
            kp.eval(r[i]) * g.g(w) * d,
            source.map_or(0.0, |s| s(r[i])),
        ];
        let raw: f64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|t| t.abs()).sum();
        out.push(i, r[i], raw, scale, !corner[i]);
    }
    out
}

/// Residual of the radial quasilinear equation
/// `-(1+2w^2)(w'' + (N-1)w'/r) - 2w w'^2 + V w - K g(w) = 0`, together with
/// the largest relative mismatch in `Δw + wΔ(w^2) = Δu / f'(u)`.
pub fn original_equation_residual(
    w: &RadialFunction,
    u: &RadialFunction,
    functional: &DualFunctional,
) -> (Residual, f64) {
    let mesh = u.mesh();
    let r = mesh.nodes();
    let (wv, uv) = (w.values(), u.values());
    let w2: Vec<f64> = wv.iter().map(|x| x * x).collect();
    let nm1 = mesh.dim().get() as f64 - 1.0;
    let (vp, kp, g) = (functional.v(), functional.k(), functional.nonlinearity());
    let corner = nonsmooth_nodes(mesh, &[vp, kp]);
    let mut out = Residual::zero();
    let mut identity = 0.0f64;
    for i in TRIM.max(1)..r.len().saturating_sub(TRIM) {
        if i + 1 >= r.len() {
            break;
        }
        let (d1, d2) = stencil(r, i);
        let (x, dx, ddx) = (wv[i], apply(d1, wv, i), apply(d2, wv, i));
        let lap_w = ddx + nm1 / r[i] * dx;
        let terms = [
            -(1.0 + 2.0 * x * x) * ddx,
            -(1.0 + 2.0 * x * x) * nm1 / r[i] * dx,
            -2.0 * x * dx * dx,
            vp.eval(r[i]) * x,
            -kp.eval(r[i]) * g.g(x),
        ];
        let raw: f64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|t| t.abs()).sum();
        out.push(i, r[i], raw, scale, !corner[i]);

        let lap = |vals: &[f64]| apply(d2, vals, i) + nm1 / r[i] * apply(d1, vals, i);
        let lhs = lap_w + x * lap(&w2);
        let rhs = lap(uv) * (1.0 + 2.0 * x * x).sqrt();
        let scale = (1.0 + 2.0 * x * x) * (ddx.abs() + (nm1 / r[i] * dx).abs()) + 2.0 * x.abs() * dx * dx + rhs.abs();
        if scale > 0.0 && !corner[i] {
            identity = identity.max((lhs - rhs).abs() / scale);
        }
    }
    (out, identity)
}

/// Smooth bump `exp(-1/(1-x^2))` in `x = ln(r/center)/width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
}

impl Bump {
    fn x(&self, r: f64) -> f64 {
        (r / self.center).ln() / self.width
    }

    pub fn value(&self, r: f64) -> f64 {
        let x = self.x(r);
        if x.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - x * x)).exp()
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let x = self.x(r);
        if x.abs() >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - x * x;
        (-1.0 / s).exp() * (-2.0 * x / (s * s)) / (r * self.width)
    }
}

/// Twelve bumps centred at `2^-6, ..., 2^5`.
pub fn default_battery() -> Vec<Bump> {
    (-6..=5).map(|j| Bump { center: 2f64.powi(j), width: std::f64::consts::LN_2 }).collect()
}

/// Largest normalized defect of the weak form
/// `∫(1+2w^2) w'h' + ∫2w w'^2 h + ∫V w h = ∫K g(w) h` over the battery,
/// with `w = f(u)` and `u` piecewise linear.
pub fn weak_form_defect(u: &RadialFunction, functional: &DualFunctional, tests: &[Bump]) -> f64 {
    weak_form_defect_with_source(u, functional, tests, None)
}

/// [`weak_form_defect`] with a source `s` of the dual equation, which
/// contributes `∫ s h / f'(u)`.
pub fn weak_form_defect_with_source(
    u: &RadialFunction,
    functional: &DualFunctional,
    tests: &[Bump],
    source: Option<&(dyn Fn(f64) -> f64 + Sync)>,
) -> f64 {
    let mesh = u.mesh();
    let r = mesh.nodes();
    let vals = u.values();
    let ft = functional.transform();
    let g = functional.nonlinearity();
    let (vg, kg) = functional.sampled_potentials();
    let ug = u.at_gauss();
    tests
        .iter()
        .map(|h| {
            let mut terms = [0.0f64; 5];
            for (idx, gp) in mesh.gauss().iter().enumerate() {
                let (hv, hd) = (h.value(gp.r), h.derivative(gp.r));
                if hv == 0.0 && hd == 0.0 {
                    continue;
                }
                let c = gp.cell;
                let du = (vals[c + 1] - vals[c]) / (r[c + 1] - r[c]);
                let (w, d, _) = ft.triple(ug[idx]);
                let dw = d * du;
                terms[0] += gp.weight * (1.0 + 2.0 * w * w) * dw * hd;
                terms[1] += gp.weight * 2.0 * w * dw * dw * hv;
                terms[2] += gp.weight * vg[idx] * w * hv;
                terms[3] -= gp.weight * kg[idx] * g.g(w) * hv;
                if let Some(s) = source {
                    terms[4] -= gp.weight * s(gp.r) * hv / d;
                }
            }
            let scale: f64 = terms.iter().map(|t| t.abs()).sum();
            if scale > 0.0 {
                terms.iter().sum::<f64>().abs() / scale
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// `max |u| r^{(N-2)/2} / ‖∇u‖` over a library of `D^{1,2}` profiles:
/// Green's-function shapes `min(1, (s/r)^{N-2})`, capped powers
/// `max(r, s)^{-(N-2)/2}` with log tapers, and smooth bumps.
pub fn decay_library_constant(mesh: &Arc<RadialMesh>) -> f64 {
    let p = (mesh.dim().get() as f64 - 2.0) / 2.0;
    let (lo, hi) = (mesh.nodes()[0], mesh.nodes()[mesh.len() - 1]);
    let mut best = 0.0f64;
    let green = 2.0 * p;
    for j in -40..=20 {
        let s = 2f64.powf(j as f64 / 2.0);
        if s <= lo * 4.0 || s >= hi / 64.0 {
            continue;
        }
        let u = RadialFunction::from_fn(mesh.clone(), |r| (s / r).powf(green).min(1.0));
        if let Ok(c) = mesh::sup_decay_check(&u) {
            best = best.max(c);
        }
    }
    for j in -20..=12 {
        let s = 2f64.powi(j);
        if s <= lo * 4.0 || s >= hi / 8.0 {
            continue;
        }
        for m in [2, 6, 12] {
            let l = (s * 2f64.powi(m)).min(hi / 4.0);
            let u = RadialFunction::from_fn(mesh.clone(), |r| capped_power(r, s, l, p));
            if let Ok(c) = mesh::sup_decay_check(&u) {
                best = best.max(c);
            }
        }
    }
    for b in default_battery() {
        let u = RadialFunction::from_fn(mesh.clone(), |r| b.value(r));
        if let Ok(c) = mesh::sup_decay_check(&u) {
            best = best.max(c);
        }
    }
    best
}

/// `max(r, s)^{-p}` on `r <= l`, tapering linearly in `log r` to 0 at `2l`.
fn capped_power(r: f64, s: f64, l: f64, p: f64) -> f64 {
    let base = r.max(s).min(l).powf(-p);
    if r <= l {
        base
    } else {
        base * (1.0 - (r / l).log2()).max(0.0)
    }
}

/// Summary of all checks on a computed solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub dual_ode: Residual,
    pub original_equation: Residual,
    pub identity_mismatch: f64,
    pub weak_form_defect: f64,
    /// `max |u| r^{(N-2)/2} / ‖∇u‖` for the solution.
    pub decay_constant: f64,
    /// Same ratio maximized over the profile library.
    pub decay_library_max: f64,
    pub decay_ok: bool,
    pub min_value: f64,
    pub e_norm: f64,
    pub nontrivial: bool,
}

/// Run every residual check on `u` (and `w = f(u)`).
pub fn residual_report(u: &RadialFunction, functional: &DualFunctional) -> Result<ResidualReport, EvalError> {
    let ft = functional.transform();
    let w = u.map(|x| ft.value(x));
    let dual_ode = dual_ode_residual(u, functional);
    let (original_equation, identity_mismatch) = original_equation_residual(&w, u, functional);
    let weak = weak_form_defect(u, functional, &default_battery());
    let e_norm = functional.e_norm(u)?;
    let nontrivial = u.values().iter().any(|x| *x != 0.0);
    let decay_constant = if nontrivial { mesh::sup_decay_check(u).unwrap_or(0.0) } else { 0.0 };
    let decay_library_max = decay_library_constant(u.mesh());
    Ok(ResidualReport {
        dual_ode,
        original_equation,
        identity_mismatch,
        weak_form_defect: weak,
        decay_constant,
        decay_library_max,
        decay_ok: decay_constant <= 1.05 * decay_library_max,
        min_value: u.min_value(),
        e_norm,
        nontrivial,
    })
}

/// Which end of `(0, ∞)` an embedding estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Zero,
    Infinity,
}

/// Settings of [`embedding_rate_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateParams {
    #[serde(default = "rate_defaults::samples")]
    pub samples: usize,
    #[serde(default = "rate_defaults::seed")]
    pub seed: u64,
    #[serde(default = "rate_defaults::mesh")]
    pub mesh: MeshParams,
}

mod rate_defaults {
    use super::MeshParams;
    pub fn samples() -> usize {
        256
    }
    pub fn seed() -> u64 {
        0
    }
    pub fn mesh() -> MeshParams {
        MeshParams { r_min: 1e-6, r_max: 1e5, nodes: 3000 }
    }
}

impl Default for RateParams {
    fn default() -> Self {
        Self { samples: rate_defaults::samples(), seed: rate_defaults::seed(), mesh: rate_defaults::mesh() }
    }
}

/// Empirical decay rate of `S0(q, ·)` or `S∞(q, ·)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub side: Side,
    #[serde(with = "crate::exponents::rational_str")]
    pub q: Rational,
    pub delta_hat: f64,
    #[serde(with = "crate::exponents::rational_str")]
    pub delta_predicted: Rational,
    /// `(R, S_estimate)` along the ladder.
    pub ladder: Vec<(f64, f64)>,
    pub monotone: bool,
    pub profiles: usize,
}

/// The eight dyadic radii used for a side.
pub fn ladder(side: Side) -> Vec<f64> {
    match side {
        Side::Zero => (4..=11).map(|k| 2f64.powi(-k)).collect(),
        Side::Infinity => (4..=11).map(|k| 2f64.powi(k)).collect(),
    }
}

/// Random nonnegative profile: a sum of 1 to 4 bumps with log-uniform
/// centres and widths.
pub fn random_profile(mesh: &Arc<RadialMesh>, rng: &mut ChaCha8Rng) -> RadialFunction {
    let (lo, hi) = (mesh.nodes()[0].ln() + 2.0, mesh.nodes()[mesh.len() - 1].ln() - 2.0);
    let count = rng.gen_range(1..=4);
    let bumps: Vec<(Bump, f64)> = (0..count)
        .map(|_| {
            let center = rng.gen_range(lo..hi).exp();
            let width = rng.gen_range(0.2f64.ln()..3f64.ln()).exp();
            let height = rng.gen_range(0.1f64.ln()..10f64.ln()).exp();
            (Bump { center, width }, height)
        })
        .collect();
    RadialFunction::from_fn(mesh.clone(), |r| bumps.iter().map(|(b, h)| h * b.value(r)).sum())
}

/// Deterministic generator for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Estimate `S(R) = sup_{‖u‖=1} ∫_{B_R} K|u|^q` (or over the complement of
/// `B_R`) on the dyadic ladder and fit `log S` against `log R`.
///
/// The supremum runs over `samples` random profiles plus a family of
/// capped `r^{-(N-2)/2}` profiles; each is normalized by dividing by its
/// E-norm. Because every radius uses the same finite family and the balls
/// are nested, the estimates are exactly monotone.
#[allow(clippy::too_many_arguments)]
pub fn embedding_rate_fit(
    q: Rational,
    env: &Envelope,
    side: Side,
    v: &Potential,
    k: &Potential,
    ft: &DualTransform,
    dim: Dimension,
    params: &RateParams,
) -> Result<RateFit, EvalError> {
    let delta_predicted = match side {
        Side::Zero => delta_rate_zero(q, env, dim)?,
        Side::Infinity => delta_rate_infinity(q, env, dim)?,
    };
    let mesh = Arc::new(RadialMesh::new(dim, params.mesh)?);
    let vg = mesh.sample(v)?;
    let kg = mesh.sample(k)?;
    let radii = ladder(side);
    let qf = to_f64(q);
    let p = (dim.get() as f64 - 2.0) / 2.0;
    let (lo, hi) = (mesh.nodes()[0], mesh.nodes()[mesh.len() - 1]);

    let mut family: Vec<(f64, f64)> = Vec::new();
    for j in -30..=30 {
        let s = 2f64.powi(j);
        if s <= lo * 4.0 || s >= hi / 8.0 {
            continue;
        }
        for m in [2, 5, 9, 14] {
            let l = s * 2f64.powi(m);
            if l <= hi / 4.0 {
                family.push((s, l));
            }
        }
    }
    let total = family.len() + params.samples;
    let per_profile: Vec<Result<Vec<f64>, EvalError>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let u = if idx < family.len() {
                let (s, l) = family[idx];
                RadialFunction::from_fn(mesh.clone(), |r| capped_power(r, s, l, p))
            } else {
                let mut rng = sample_rng(params.seed, (idx - family.len()) as u64);
                random_profile(&mesh, &mut rng)
            };
            let norm = mesh::e_norm_sampled(&u, &vg, ft)?;
            if !(norm > 0.0) {
                return Ok(vec![0.0; radii.len()]);
            }
            let ug = u.at_gauss();
            let integrand = |i: usize| kg[i] * (ug[i].abs() / norm).powf(qf) * mesh.gauss()[i].weight;
            Ok(radii
                .iter()
                .map(|&radius| {
                    let inside = mesh.gauss().partition_point(|g| g.r < radius);
                    match side {
                        Side::Zero => (0..inside).map(integrand).sum(),
                        Side::Infinity => (inside..ug.len()).map(integrand).sum(),
                    }
                })
                .collect())
        })
        .collect();
    let mut best = vec![0.0f64; radii.len()];
    for row in per_profile {
        for (b, s) in best.iter_mut().zip(row?) {
            *b = b.max(s);
        }
    }
    let ladder: Vec<(f64, f64)> = radii.iter().copied().zip(best.iter().copied()).collect();
    // the ladder runs towards the limit on both sides, where S shrinks
    let monotone = ladder.windows(2).all(|w| w[1].1 <= w[0].1);
    let delta_hat = fit_slope(&ladder).ok_or_else(|| {
        EvalError::Domain(DomainError::Other("rate fit needs positive estimates on the ladder".into()))
    })?;
    Ok(RateFit { side, q, delta_hat, delta_predicted, ladder, monotone, profiles: total })
}

/// Least-squares slope of `log S` against `log R`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|(_, s)| !(*s > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|(r, _)| r.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, s)| s.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}
