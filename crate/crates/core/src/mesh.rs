//! Geometric radial mesh, `r^{N-1}`-weighted quadrature and the norms of
//! `D^{1,2}_r` and `E`.

use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{DomainError, EvalError};
use crate::exponents::Dimension;
use crate::potential::Potential;
use crate::transform::DualTransform;

const GAUSS_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Quadrature point inside cell `cell`: position, weight (including the
/// sphere area and `r^{N-1}`) and the two linear basis values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussPoint {
    pub cell: usize,
    pub r: f64,
    pub weight: f64,
    pub phi: [f64; 2],
}

/// Mesh parameters as they appear in configs and reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshParams {
    #[serde(default = "defaults::r_min")]
    pub r_min: f64,
    #[serde(default = "defaults::r_max")]
    pub r_max: f64,
    #[serde(default = "defaults::nodes")]
    pub nodes: usize,
}

mod defaults {
    pub fn r_min() -> f64 {
        1e-6
    }
    pub fn r_max() -> f64 {
        1e3
    }
    pub fn nodes() -> usize {
        2000
    }
}

impl Default for MeshParams {
    fn default() -> Self {
        Self { r_min: defaults::r_min(), r_max: defaults::r_max(), nodes: defaults::nodes() }
    }
}

/// Log-uniform grid `r_k = r_min * ρ^k` on `[r_min, r_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMesh {
    dim: Dimension,
    params: MeshParams,
    nodes: Vec<f64>,
    cell_measure: Vec<f64>,
    gauss: Vec<GaussPoint>,
    omega: f64,
}

/// Area of the unit sphere in `R^N`.
pub fn sphere_area(n: u32) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma(half)
}

fn gamma(x: f64) -> f64 {
    // half-integers and integers only
    if (x - x.round()).abs() < 1e-12 {
        (1..x.round() as u64).map(|k| k as f64).product()
    } else {
        let mut v = std::f64::consts::PI.sqrt();
        let mut a = 0.5;
        while a < x - 0.25 {
            v *= a;
            a += 1.0;
        }
        v
    }
}

impl RadialMesh {
    pub fn new(dim: Dimension, params: MeshParams) -> Result<Self, DomainError> {
        let MeshParams { r_min, r_max, nodes: n } = params;
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
            return Err(DomainError::Other(format!("need 0 < r_min < r_max, got {r_min}, {r_max}")));
        }
        if n < 8 {
            return Err(DomainError::Other(format!("mesh needs at least 8 nodes, got {n}")));
        }
        let log_ratio = (r_max / r_min).ln() / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|k| r_min * (k as f64 * log_ratio).exp()).collect();
        nodes[n - 1] = r_max;
        let nd = dim.get() as f64;
        let omega = sphere_area(dim.get());
        let cell_measure = nodes
            .windows(2)
            .map(|c| omega * (c[1].powf(nd) - c[0].powf(nd)) / nd)
            .collect();
        let mut gauss = Vec::with_capacity(3 * (n - 1));
        for (cell, c) in nodes.windows(2).enumerate() {
            let (a, b) = (c[0], c[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, w) in GAUSS_X.iter().zip(GAUSS_W) {
                let r = mid + half * x;
                let s = (r - a) / (b - a);
                gauss.push(GaussPoint {
                    cell,
                    r,
                    weight: omega * w * half * r.powf(nd - 1.0),
                    phi: [1.0 - s, s],
                });
            }
        }
        Ok(Self { dim, params, nodes, cell_measure, gauss, omega })
    }

    pub fn with_defaults(dim: Dimension) -> Self {
        Self::new(dim, MeshParams::default()).expect("default mesh parameters are valid")
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn params(&self) -> MeshParams {
        self.params
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn gauss(&self) -> &[GaussPoint] {
        &self.gauss
    }

    /// `ω ∫_cell r^{N-1} dr` for each cell.
    pub fn cell_measures(&self) -> &[f64] {
        &self.cell_measure
    }

    pub fn sphere_area(&self) -> f64 {
        self.omega
    }

    /// Mesh with the same range and twice as many cells.
    pub fn refined(&self) -> Self {
        let params = MeshParams { nodes: 2 * self.len() - 1, ..self.params };
        Self::new(self.dim, params).expect("refinement of a valid mesh")
    }

    /// Evaluate a potential at every Gauss point.
    pub fn sample(&self, p: &Potential) -> Result<Vec<f64>, EvalError> {
        self.gauss
            .iter()
            .map(|g| {
                let v = p.eval(g.r);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(EvalError::Overflow {
                        what: format!("potential {:?}", p.source()),
                        node: g.cell,
                        r: g.r,
                    })
                }
            })
            .collect()
    }

    /// `∫ φ(r) r^{N-1} dr` over `[r_min, r_max]`, times the sphere area.
    pub fn integrate(&self, phi: impl Fn(f64) -> f64) -> f64 {
        self.gauss.iter().map(|g| g.weight * phi(g.r)).sum()
    }
}

/// Nodal values on a mesh; the value at `r_max` is held at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    mesh: Arc<RadialMesh>,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn zeros(mesh: Arc<RadialMesh>) -> Self {
        let n = mesh.len();
        Self { mesh, values: vec![0.0; n] }
    }

    /// Wrap nodal values; the last one is forced to 0.
    pub fn from_values(mesh: Arc<RadialMesh>, mut values: Vec<f64>) -> Result<Self, EvalError> {
        if values.len() != mesh.len() {
            return Err(EvalError::MeshMismatch(format!(
                "{} values for a mesh of {} nodes",
                values.len(),
                mesh.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EvalError::Overflow { what: "nodal value".into(), node: i, r: mesh.nodes[i] });
        }
        *values.last_mut().expect("nonempty") = 0.0;
        Ok(Self { mesh, values })
    }

    pub fn from_fn(mesh: Arc<RadialMesh>, f: impl Fn(f64) -> f64) -> Self {
        let mut values: Vec<f64> = mesh.nodes.iter().map(|&r| f(r)).collect();
        *values.last_mut().expect("nonempty") = 0.0;
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<RadialMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        self.map(|v| lambda * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        *values.last_mut().expect("nonempty") = 0.0;
        Self { mesh: self.mesh.clone(), values }
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &RadialFunction) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + t * b).collect();
        Self { mesh: self.mesh.clone(), values }
    }

    /// Values at the Gauss points of the mesh.
    pub fn at_gauss(&self) -> Vec<f64> {
        self.mesh
            .gauss
            .iter()
            .map(|g| g.phi[0] * self.values[g.cell] + g.phi[1] * self.values[g.cell + 1])
            .collect()
    }

    /// Piecewise-linear value at `r`; 0 outside `[r_min, r_max]` except that
    /// the first value is extended to `r < r_min`.
    pub fn value_at(&self, r: f64) -> f64 {
        let nodes = &self.mesh.nodes;
        if r <= nodes[0] {
            return self.values[0];
        }
        if r >= nodes[nodes.len() - 1] {
            return 0.0;
        }
        let k = nodes.partition_point(|&x| x <= r) - 1;
        let s = (r - nodes[k]) / (nodes[k + 1] - nodes[k]);
        (1.0 - s) * self.values[k] + s * self.values[k + 1]
    }

    /// Piecewise-linear interpolation onto another mesh.
    pub fn interpolate(&self, mesh: Arc<RadialMesh>) -> Self {
        Self::from_fn(mesh, |r| self.value_at(r))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV with header `r,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "r,value")?;
        for (r, v) in self.mesh.nodes.iter().zip(&self.values) {
            writeln!(out, "{r:e},{v:e}")?;
        }
        Ok(())
    }
}

/// `∫ |∇u|^2 dx`, exact for piecewise-linear `u`.
pub fn grad_seminorm_sq(u: &RadialFunction) -> f64 {
    let mesh = &u.mesh;
    mesh.nodes
        .windows(2)
        .zip(u.values.windows(2))
        .zip(&mesh.cell_measure)
        .map(|((r, v), m)| {
            let slope = (v[1] - v[0]) / (r[1] - r[0]);
            slope * slope * m
        })
        .sum()
}

/// `∫ weight(|x|) f(u)^2 dx`, or `∫ weight u^2 dx` without a transform.
pub fn weighted_l2(
    u: &RadialFunction,
    weight: &Potential,
    transform: Option<&DualTransform>,
) -> Result<f64, EvalError> {
    let w = u.mesh.sample(weight)?;
    Ok(weighted_l2_sampled(u, &w, transform))
}

pub(crate) fn weighted_l2_sampled(u: &RadialFunction, w: &[f64], transform: Option<&DualTransform>) -> f64 {
    u.at_gauss()
        .iter()
        .zip(&u.mesh.gauss)
        .zip(w)
        .map(|((&ug, g), &wg)| {
            let v = match transform {
                Some(ft) => ft.value(ug),
                None => ug,
            };
            g.weight * wg * v * v
        })
        .sum()
}

/// `inf_{k>0} (1 + ∫ V f(k u)^2 dx) / k`.
pub fn orlicz_norm(u: &RadialFunction, v: &Potential, ft: &DualTransform) -> Result<f64, EvalError> {
    let w = u.mesh.sample(v)?;
    orlicz_norm_sampled(u, &w, ft)
}

pub(crate) fn orlicz_norm_sampled(u: &RadialFunction, w: &[f64], ft: &DualTransform) -> Result<f64, EvalError> {
    let ug = u.at_gauss();
    let gauss = &u.mesh.gauss;
    let modular = |k: f64| -> f64 {
        ug.iter()
            .zip(gauss)
            .zip(w)
            .filter(|((&x, _), &wg)| x != 0.0 && wg != 0.0)
            .map(|((&x, g), &wg)| {
                let f = ft.value(k * x);
                g.weight * wg * f * f
            })
            .sum()
    };
    if modular(1.0) == 0.0 {
        return Ok(0.0);
    }
    let phi = |s: f64| {
        let k = s.exp();
        (1.0 + modular(k)) / k
    };
    let (mut a, mut b) = (-60.0 * std::f64::consts::LN_2, 60.0 * std::f64::consts::LN_2);
    if !phi(a).is_finite() {
        return Err(EvalError::NotInE);
    }
    let inv_golden = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_golden * (b - a);
    let mut d = a + inv_golden * (b - a);
    let (mut fc, mut fd) = (phi(c), phi(d));
    while b - a > 1e-10 {
        if fc <= fd || !fd.is_finite() {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_golden * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_golden * (b - a);
            fd = phi(d);
        }
    }
    let best = phi(0.5 * (a + b)).min(fc).min(fd);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(EvalError::NotInE)
    }
}

/// `‖u‖ = ‖∇u‖_2 + ‖u‖_o`.
pub fn e_norm(u: &RadialFunction, v: &Potential, ft: &DualTransform) -> Result<f64, EvalError> {
    Ok(grad_seminorm_sq(u).sqrt() + orlicz_norm(u, v, ft)?)
}

pub(crate) fn e_norm_sampled(u: &RadialFunction, w: &[f64], ft: &DualTransform) -> Result<f64, EvalError> {
    Ok(grad_seminorm_sq(u).sqrt() + orlicz_norm_sampled(u, w, ft)?)
}

/// `max_k |u(r_k)| r_k^{(N-2)/2} / ‖∇u‖_2`, the empirical constant of the
/// radial decay bound.
pub fn sup_decay_check(u: &RadialFunction) -> Result<f64, DomainError> {
    sup_decay_ratio(u, grad_seminorm_sq(u).sqrt())
}

/// Same ratio with a caller-supplied norm (for instance the full E-norm).
pub fn sup_decay_ratio(u: &RadialFunction, norm: f64) -> Result<f64, DomainError> {
    if !(norm > 0.0) {
        return Err(DomainError::Other("sup decay check needs a nonzero norm".into()));
    }
    let p = (u.mesh.dim.get() as f64 - 2.0) / 2.0;
    Ok(u.mesh
        .nodes
        .iter()
        .zip(&u.values)
        .map(|(r, v)| v.abs() * r.powf(p))
        .fold(0.0, f64::max)
        / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn dim3() -> Dimension {
        Dimension::new(3).unwrap()
    }

    fn mesh(nodes: usize, r_min: f64, r_max: f64) -> Arc<RadialMesh> {
        Arc::new(RadialMesh::new(dim3(), MeshParams { r_min, r_max, nodes }).unwrap())
    }

    fn random_profile(mesh: &Arc<RadialMesh>, seed: u64) -> RadialFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bumps: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.2..1.0), rng.gen_range(0.1..2.0)))
            .collect();
        RadialFunction::from_fn(mesh.clone(), |r| {
            bumps.iter().map(|(c, w, h)| h * (-((r.ln() - c * 2.3) / w).powi(2)).exp()).sum()
        })
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-12);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn nodes_increase_and_weights_positive() {
        let m = RadialMesh::with_defaults(dim3());
        assert_eq!(m.len(), 2000);
        assert!(m.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(m.gauss().iter().all(|g| g.weight > 0.0));
        assert_eq!(m.nodes()[1999], 1e3);
    }

    #[test]
    fn volume_is_stable_under_refinement() {
        let m = RadialMesh::with_defaults(dim3());
        let a = m.integrate(|_| 1.0);
        let b = m.refined().integrate(|_| 1.0);
        assert!(((a - b) / a).abs() < 1e-10);
        let exact = 4.0 * PI * (1e9 - 1e-18) / 3.0;
        assert!(((a - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn grad_of_zero_and_hat() {
        let m = mesh(40, 0.1, 10.0);
        assert_eq!(grad_seminorm_sq(&RadialFunction::zeros(m.clone())), 0.0);
        let k = 17;
        let mut hat = RadialFunction::zeros(m.clone());
        hat.values_mut()[k] = 1.0;
        let r = m.nodes();
        let expected = 4.0 * PI / 3.0
            * ((r[k].powi(3) - r[k - 1].powi(3)) / (r[k] - r[k - 1]).powi(2)
                + (r[k + 1].powi(3) - r[k].powi(3)) / (r[k + 1] - r[k]).powi(2));
        assert!((grad_seminorm_sq(&hat) - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn tent_gradient() {
        // r = 1 is node 20000, so the tent is exactly piecewise linear
        let m = mesh(21001, 2f64.powi(-20), 2.0);
        let u = RadialFunction::from_fn(m, |r| if r < 1.0 - 1e-12 { 1.0 - r } else { 0.0 });
        let g = grad_seminorm_sq(&u);
        assert!((g - 4.0 * PI / 3.0).abs() < 1e-6, "{g}");
    }

    #[test]
    fn weighted_l2_step_profile() {
        let m = mesh(4001, 1e-3, 100.0);
        let v = Potential::parse("r^-2").unwrap();
        let (a, b, c) = (m.nodes()[1500], m.nodes()[2500], 0.7);
        let u = RadialFunction::from_fn(m.clone(), |r| if r >= a && r <= b { c } else { 0.0 });
        let plain = weighted_l2(&u, &v, None).unwrap();
        // the linear ramps on the two edge cells add a small exact correction
        let h0 = a - m.nodes()[1499];
        let h1 = m.nodes()[2501] - b;
        let expected = 4.0 * PI * c * c * (b - a + (h0 + h1) / 3.0);
        assert!(((plain - expected) / expected).abs() < 1e-12, "{plain} {expected}");
        let dual = weighted_l2(&u, &v, Some(&DualTransform::new())).unwrap();
        assert!(dual <= plain);
        assert_eq!(weighted_l2(&RadialFunction::zeros(m), &v, None).unwrap(), 0.0);
    }

    #[test]
    fn weighted_l2_converges() {
        let v = Potential::parse("r^-2").unwrap();
        let smooth = |r: f64| (-r * r).exp();
        // ∫ 4π r^2 r^-2 e^{-2r^2} dr on (0, inf) = 4π sqrt(π/8)
        let exact = 4.0 * PI * (PI / 8.0).sqrt();
        let mut last = f64::INFINITY;
        for nodes in [201, 401, 801] {
            let m = mesh(nodes, 1e-8, 20.0);
            let u = RadialFunction::from_fn(m, smooth);
            let err = (weighted_l2(&u, &v, None).unwrap() - exact).abs();
            assert!(err * 3.0 <= last || err < 1e-10, "{err} vs {last}");
            last = err;
        }
    }

    #[test]
    fn overflow_names_node() {
        let m = mesh(100, 1e-3, 1e3);
        let v = Potential::parse("exp(2*r)").unwrap();
        let u = RadialFunction::from_fn(m, |_| 1.0);
        match weighted_l2(&u, &v, None) {
            Err(EvalError::Overflow { r, .. }) => assert!(r > 300.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn orlicz_trivial_cases() {
        let m = mesh(200, 1e-4, 100.0);
        let ft = DualTransform::new();
        let v = Potential::parse("r^-2").unwrap();
        let zero = Potential::parse("0").unwrap();
        assert_eq!(orlicz_norm(&RadialFunction::zeros(m.clone()), &v, &ft).unwrap(), 0.0);
        assert_eq!(orlicz_norm(&random_profile(&m, 3), &zero, &ft).unwrap(), 0.0);
    }

    #[test]
    fn orlicz_doubling() {
        let m = mesh(400, 1e-4, 100.0);
        let ft = DualTransform::new();
        let c = ft.doubling_constant();
        let v = Potential::parse("r^-2").unwrap();
        for seed in 0..5 {
            let u = random_profile(&m, seed);
            let a = orlicz_norm(&u, &v, &ft).unwrap();
            let b = orlicz_norm(&u.scaled(2.0), &v, &ft).unwrap();
            assert!(b <= 2.0 * a * c, "{b} {a}");
        }
    }

    #[test]
    fn e_norm_is_a_norm() {
        let m = mesh(400, 1e-4, 100.0);
        let ft = DualTransform::new();
        let v = Potential::parse("1 + r^-2").unwrap();
        for seed in 0..5 {
            let u = random_profile(&m, seed);
            let n = e_norm(&u, &v, &ft).unwrap();
            for s in [0.5, 2.0, 7.0, -2.0] {
                let ns = e_norm(&u.scaled(s), &v, &ft).unwrap();
                assert!((ns - s.abs() * n).abs() <= 1e-8 * ns, "{s}: {ns} vs {}", s.abs() * n);
            }
            let w = random_profile(&m, seed + 100);
            let sum = e_norm(&u.axpy(1.0, &w), &v, &ft).unwrap();
            assert!(sum <= n + e_norm(&w, &v, &ft).unwrap() + 1e-9);
        }
    }

    #[test]
    fn sup_decay() {
        let m = mesh(400, 1e-2, 100.0);
        assert!(sup_decay_check(&RadialFunction::zeros(m.clone())).is_err());
        let tent = RadialFunction::from_fn(m.clone(), |r| (1.0 - (r - 2.0).abs()).max(0.0));
        let c = sup_decay_check(&tent).unwrap();
        assert!(c.is_finite() && c > 0.0);
        let p = RadialFunction::from_fn(m.clone(), |r| r.powf(-0.5));
        let norm = grad_seminorm_sq(&p).sqrt();
        let ratios: Vec<f64> = p.values()[..398].iter().zip(m.nodes()).map(|(v, r)| v * r.sqrt() / norm).collect();
        assert!(ratios.iter().all(|x| (x - 1.0 / norm).abs() < 1e-12));
    }

    #[test]
    fn csv_header() {
        let m = mesh(10, 1.0, 2.0);
        let mut buf = Vec::new();
        RadialFunction::zeros(m).write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("r,value\n1e0,0e0\n"));
        assert_eq!(s.lines().count(), 11);
    }
}
