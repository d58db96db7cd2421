//! Tridiagonal solvers for the 1-D assembled operators.

/// Symmetric tridiagonal matrix stored by diagonals; `off[i]` couples `i`
/// and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self { diag: vec![0.0; n], off: vec![0.0; n.saturating_sub(1)] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y: Vec<f64> = (0..n).map(|i| self.diag[i] * x[i]).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        y
    }

    /// Thomas algorithm without pivoting; for diagonally dominant or SPD
    /// systems. Returns `None` on a vanishing pivot.
    pub fn solve_spd(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.len();
        if n == 0 {
            return Some(Vec::new());
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot.abs() < f64::MIN_POSITIVE {
            return None;
        }
        c[0] = if n > 1 { self.off[0] / pivot } else { 0.0 };
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.off[i - 1] * c[i - 1];
            if pivot.abs() < f64::MIN_POSITIVE || !pivot.is_finite() {
                return None;
            }
            if i + 1 < n {
                c[i] = self.off[i] / pivot;
            }
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Some(d)
    }

    /// Gaussian elimination with partial pivoting, for indefinite systems
    /// such as the Hessian at a saddle point.
    pub fn solve_pivoting(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.len();
        if n == 0 {
            return Some(Vec::new());
        }
        // rows stored as (sub, diag, sup, sup2) after elimination
        let mut dl: Vec<f64> = self.off.clone();
        let mut d: Vec<f64> = self.diag.clone();
        let mut du: Vec<f64> = self.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut b = rhs.to_vec();
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return None;
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                b[i + 1] -= fact * b[i];
                dl[i] = 0.0;
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 1 < n - 1 {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du2[i];
                }
                du[i] = temp;
                b.swap(i, i + 1);
                b[i + 1] -= fact * b[i];
            }
        }
        if d[n - 1] == 0.0 {
            return None;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = b[n - 1] / d[n - 1];
        if n > 1 {
            x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (b[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, shift: f64, seed: u64) -> Tridiagonal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tridiagonal {
            diag: (0..n).map(|_| rng.gen_range(-1.0..1.0) + shift).collect(),
            off: (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn spd_solve_round_trips() {
        let a = random(50, 3.0, 1);
        let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let b = a.apply(&x);
        let y = a.solve_spd(&b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn pivoting_solve_handles_indefinite() {
        for seed in 0..20 {
            let mut a = random(40, 0.0, seed);
            a.diag[0] = 0.0;
            let x: Vec<f64> = (0..40).map(|i| 1.0 + (i as f64).cos()).collect();
            let b = a.apply(&x);
            let y = a.solve_pivoting(&b).unwrap();
            let resid: f64 = a.apply(&y).iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(resid < 1e-9, "seed {seed}: {resid}");
        }
    }

    #[test]
    fn small_systems() {
        let a = Tridiagonal { diag: vec![2.0], off: vec![] };
        assert_eq!(a.solve_pivoting(&[4.0]).unwrap(), vec![2.0]);
        assert_eq!(a.solve_spd(&[4.0]).unwrap(), vec![2.0]);
        let a = Tridiagonal { diag: vec![0.0, 0.0], off: vec![1.0] };
        assert_eq!(a.solve_pivoting(&[3.0, 5.0]).unwrap(), vec![5.0, 3.0]);
    }
}
