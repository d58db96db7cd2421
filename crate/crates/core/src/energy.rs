//! The dual functional
//!
//! ```text
//! I(u) = 1/2 ∫|∇u|^2 + 1/2 ∫ V f(u)^2 - ∫ K G(f(u)),    J = I_1 + I_2,
//! ```
//!
//! discretized with piecewise-linear `u` and three Gauss points per cell.
//! The gradient and Hessian are the exact derivatives of the discrete `I`.

use std::sync::Arc;

use crate::error::EvalError;
use crate::linalg::{dot, Tridiagonal};
use crate::mesh::{self, RadialFunction, RadialMesh};
use crate::nonlinearity::Nonlinearity;
use crate::potential::Potential;
use crate::transform::DualTransform;

/// `I`, `J` and their derivatives for fixed `V`, `K`, `g` on one mesh.
#[derive(Debug, Clone)]
pub struct DualFunctional {
    mesh: Arc<RadialMesh>,
    v: Potential,
    k: Potential,
    g: Nonlinearity,
    ft: DualTransform,
    v_gauss: Vec<f64>,
    k_gauss: Vec<f64>,
    stiffness: Tridiagonal,
    dirichlet_stiffness: Tridiagonal,
    source: Option<Vec<f64>>,
}

impl DualFunctional {
    pub fn new(
        mesh: Arc<RadialMesh>,
        v: Potential,
        k: Potential,
        g: Nonlinearity,
        ft: DualTransform,
    ) -> Result<Self, EvalError> {
        let v_gauss = mesh.sample(&v)?;
        let k_gauss = mesh.sample(&k)?;
        let n = mesh.len();
        let mut stiffness = Tridiagonal::zeros(n);
        for (c, (r, m)) in mesh.nodes().windows(2).zip(mesh.cell_measures()).enumerate() {
            let a = m / (r[1] - r[0]).powi(2);
            stiffness.diag[c] += a;
            stiffness.diag[c + 1] += a;
            stiffness.off[c] -= a;
        }
        let mut dirichlet_stiffness = stiffness.clone();
        dirichlet_stiffness.diag[n - 1] = 1.0;
        dirichlet_stiffness.off[n - 2] = 0.0;
        Ok(Self { mesh, v, k, g, ft, v_gauss, k_gauss, stiffness, dirichlet_stiffness, source: None })
    }

    /// Add a linear source: `I(u) - <b, u>`, with `b` a nodal co-vector.
    pub fn with_source(mut self, b: Vec<f64>) -> Result<Self, EvalError> {
        if b.len() != self.mesh.len() {
            return Err(EvalError::MeshMismatch(format!("source of length {}", b.len())));
        }
        self.source = Some(b);
        Ok(self)
    }

    /// Same problem with `K` multiplied by `c`.
    pub fn with_k_scaled(&self, c: f64) -> Result<Self, EvalError> {
        Self::new(self.mesh.clone(), self.v.clone(), self.k.scaled(c), self.g.clone(), self.ft)
    }

    /// Same problem on another mesh.
    pub fn on_mesh(&self, mesh: Arc<RadialMesh>) -> Result<Self, EvalError> {
        Self::new(mesh, self.v.clone(), self.k.clone(), self.g.clone(), self.ft)
    }

    pub fn mesh(&self) -> &Arc<RadialMesh> {
        &self.mesh
    }

    pub fn v(&self) -> &Potential {
        &self.v
    }

    pub fn k(&self) -> &Potential {
        &self.k
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.g
    }

    pub fn transform(&self) -> &DualTransform {
        &self.ft
    }

    pub fn stiffness(&self) -> &Tridiagonal {
        &self.stiffness
    }

    /// `V` and `K` at the Gauss points.
    pub fn sampled_potentials(&self) -> (&[f64], &[f64]) {
        (&self.v_gauss, &self.k_gauss)
    }

    fn check(&self, u: &RadialFunction) -> Result<(), EvalError> {
        if Arc::ptr_eq(u.mesh(), &self.mesh) || **u.mesh() == *self.mesh {
            Ok(())
        } else {
            Err(EvalError::MeshMismatch("profile and functional use different meshes".into()))
        }
    }

    fn quadratic(&self, u: &RadialFunction) -> f64 {
        0.5 * dot(u.values(), &self.stiffness.apply(u.values()))
    }

    fn finite(&self, x: f64, what: &str) -> Result<f64, EvalError> {
        if x.is_finite() {
            Ok(x)
        } else {
            Err(EvalError::Overflow { what: what.into(), node: 0, r: self.mesh.nodes()[0] })
        }
    }

    /// `I(u)`.
    pub fn value(&self, u: &RadialFunction) -> Result<f64, EvalError> {
        self.check(u)?;
        let mut total = self.quadratic(u);
        for (((x, gp), v), k) in u.at_gauss().iter().zip(self.mesh.gauss()).zip(&self.v_gauss).zip(&self.k_gauss) {
            if *x == 0.0 {
                continue;
            }
            let w = self.ft.value(*x);
            total += gp.weight * (0.5 * v * w * w - k * self.g.G(w));
        }
        if let Some(b) = &self.source {
            total -= dot(b, u.values());
        }
        self.finite(total, "energy I")
    }

    /// `J(u) = 1/2 ∫|∇u|^2 + 1/2 ∫ V f(u)^2`.
    pub fn j_value(&self, u: &RadialFunction) -> Result<f64, EvalError> {
        self.check(u)?;
        let total = self.quadratic(u) + 0.5 * mesh::weighted_l2_sampled(u, &self.v_gauss, Some(&self.ft));
        self.finite(total, "energy J")
    }

    /// Nodal co-vector `∂I/∂u_k`; the Dirichlet entry at `r_max` is 0.
    pub fn gradient(&self, u: &RadialFunction) -> Result<Vec<f64>, EvalError> {
        self.check(u)?;
        let mut grad = self.stiffness.apply(u.values());
        for (((x, gp), v), k) in u.at_gauss().iter().zip(self.mesh.gauss()).zip(&self.v_gauss).zip(&self.k_gauss) {
            if *x == 0.0 {
                continue;
            }
            let (w, d, _) = self.ft.triple(*x);
            let s = gp.weight * (v * w * d - k * self.g.g(w) * d);
            grad[gp.cell] += s * gp.phi[0];
            grad[gp.cell + 1] += s * gp.phi[1];
        }
        if let Some(b) = &self.source {
            for (gi, bi) in grad.iter_mut().zip(b) {
                *gi -= bi;
            }
        }
        *grad.last_mut().expect("nonempty") = 0.0;
        if let Some(i) = grad.iter().position(|x| !x.is_finite()) {
            return Err(EvalError::Overflow { what: "gradient".into(), node: i, r: self.mesh.nodes()[i] });
        }
        Ok(grad)
    }

    /// Gradient as a [`RadialFunction`] of nodal partials.
    pub fn gradient_function(&self, u: &RadialFunction) -> Result<RadialFunction, EvalError> {
        RadialFunction::from_values(self.mesh.clone(), self.gradient(u)?)
    }

    /// Tridiagonal Hessian of the discrete `I`, with an identity row at the
    /// Dirichlet node.
    pub fn hessian(&self, u: &RadialFunction) -> Result<Tridiagonal, EvalError> {
        self.check(u)?;
        let mut h = self.stiffness.clone();
        for (((x, gp), v), k) in u.at_gauss().iter().zip(self.mesh.gauss()).zip(&self.v_gauss).zip(&self.k_gauss) {
            let (w, d, dd) = self.ft.triple(*x);
            let density = v * (d * d + w * dd) - k * (self.g.g_prime(w) * d * d + self.g.g(w) * dd);
            let s = gp.weight * density;
            h.diag[gp.cell] += s * gp.phi[0] * gp.phi[0];
            h.diag[gp.cell + 1] += s * gp.phi[1] * gp.phi[1];
            h.off[gp.cell] += s * gp.phi[0] * gp.phi[1];
        }
        let n = h.len();
        h.diag[n - 1] = 1.0;
        h.off[n - 2] = 0.0;
        Ok(h)
    }

    /// Riesz representative `A^{-1} g` of a co-vector in the `D^{1,2}`
    /// inner product.
    pub fn riesz(&self, covector: &[f64]) -> Vec<f64> {
        let mut rhs = covector.to_vec();
        *rhs.last_mut().expect("nonempty") = 0.0;
        self.dirichlet_stiffness.solve_spd(&rhs).expect("stiffness matrix is positive definite")
    }

    /// Dual norm `sqrt(g^T A^{-1} g)` of a co-vector.
    pub fn dual_norm(&self, covector: &[f64]) -> f64 {
        let x = self.riesz(covector);
        dot(covector, &x).max(0.0).sqrt()
    }

    /// Norm of `I'(u)` in the dual of `D^{1,2}`.
    pub fn grad_norm(&self, u: &RadialFunction) -> Result<f64, EvalError> {
        Ok(self.dual_norm(&self.gradient(u)?))
    }

    /// E-norm of `u` with this functional's `V`.
    pub fn e_norm(&self, u: &RadialFunction) -> Result<f64, EvalError> {
        mesh::e_norm_sampled(u, &self.v_gauss, &self.ft)
    }
}

/// `I(u)` for one-off evaluations.
pub fn i_eval(
    u: &RadialFunction,
    v: &Potential,
    k: &Potential,
    g: &Nonlinearity,
    ft: &DualTransform,
) -> Result<f64, EvalError> {
    DualFunctional::new(u.mesh().clone(), v.clone(), k.clone(), g.clone(), *ft)?.value(u)
}

/// `J(u)` for one-off evaluations.
pub fn j_eval(u: &RadialFunction, v: &Potential, ft: &DualTransform) -> Result<f64, EvalError> {
    let w = u.mesh().sample(v)?;
    Ok(0.5 * mesh::grad_seminorm_sq(u) + 0.5 * mesh::weighted_l2_sampled(u, &w, Some(ft)))
}

/// `I'(u)` as nodal partials, for one-off evaluations.
pub fn i_gradient(
    u: &RadialFunction,
    v: &Potential,
    k: &Potential,
    g: &Nonlinearity,
    ft: &DualTransform,
) -> Result<RadialFunction, EvalError> {
    DualFunctional::new(u.mesh().clone(), v.clone(), k.clone(), g.clone(), *ft)?.gradient_function(u)
}
