//! The catalog of nonlinearities `g` and their primitives `G`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::exponents::{rational_str, to_f64, Rational};
use crate::transform::standard_sweep;

/// Shape of `g` on `t >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `min{t^{q1-1}, t^{q2-1}}`.
    MinPower {
        #[serde(with = "rational_str")]
        q1: Rational,
        #[serde(with = "rational_str")]
        q2: Rational,
    },
    /// `t^{q2-1} / (1 + t^{q2-q1})`.
    RatioPower {
        #[serde(with = "rational_str")]
        q1: Rational,
        #[serde(with = "rational_str")]
        q2: Rational,
    },
    /// `t^{q-1}`.
    SinglePower {
        #[serde(with = "rational_str")]
        q: Rational,
    },
    /// `g ≡ 0`; degenerate, for tests of the quadratic part.
    Zero,
}

impl NonlinearityKind {
    /// `(q1, q2)` with `q1 <= q2`; `None` for [`NonlinearityKind::Zero`].
    pub fn exponents(&self) -> Option<(Rational, Rational)> {
        match *self {
            Self::MinPower { q1, q2 } | Self::RatioPower { q1, q2 } => Some((q1.min(q2), q1.max(q2))),
            Self::SinglePower { q } => Some((q, q)),
            Self::Zero => None,
        }
    }

    /// `min{q1, q2} / 2`, the largest `θ` for which `2θG <= g t` holds.
    pub fn default_theta(&self) -> Rational {
        match self.exponents() {
            Some((q1, _)) => q1 / 2,
            None => Rational::from_integer(0),
        }
    }
}

/// `g` together with `θ` and the negative truncation flag.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    theta: Rational,
    truncate_negative: bool,
    p_small: f64,
    p_large: f64,
    table: Option<Arc<PrimitiveTable>>,
}

impl PartialEq for Nonlinearity {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.theta == other.theta && self.truncate_negative == other.truncate_negative
    }
}

impl Nonlinearity {
    /// Build `g`; exponents are reordered so that `q1 <= q2`, and each must
    /// exceed 2.
    pub fn new(kind: NonlinearityKind, theta: Rational, truncate_negative: bool) -> Result<Self, DomainError> {
        let kind = match kind {
            NonlinearityKind::MinPower { q1, q2 } => NonlinearityKind::MinPower { q1: q1.min(q2), q2: q1.max(q2) },
            NonlinearityKind::RatioPower { q1, q2 } => {
                NonlinearityKind::RatioPower { q1: q1.min(q2), q2: q1.max(q2) }
            }
            other => other,
        };
        let (p_small, p_large) = match kind.exponents() {
            Some((q1, q2)) => {
                if q1 <= Rational::from_integer(2) {
                    return Err(DomainError::Exponent(format!("exponent {q1} must exceed 2")));
                }
                // small t follows the larger exponent
                (to_f64(q2), to_f64(q1))
            }
            None => (0.0, 0.0),
        };
        let mut out = Self { kind, theta, truncate_negative, p_small, p_large, table: None };
        if matches!(kind, NonlinearityKind::RatioPower { .. }) {
            out.table = Some(Arc::new(PrimitiveTable::build(|t| out.g_pos(t), p_small)));
        }
        Ok(out)
    }

    /// `g` with `θ = min{q1,q2}/2` and truncation on.
    pub fn with_default_theta(kind: NonlinearityKind) -> Result<Self, DomainError> {
        Self::new(kind, kind.default_theta(), true)
    }

    pub fn kind(&self) -> NonlinearityKind {
        self.kind
    }

    pub fn theta(&self) -> Rational {
        self.theta
    }

    pub fn truncate_negative(&self) -> bool {
        self.truncate_negative
    }

    /// `g` on `t >= 0`.
    #[inline]
    fn g_pos(&self, t: f64) -> f64 {
        match self.kind {
            NonlinearityKind::MinPower { .. } => {
                if t <= 1.0 {
                    t.powf(self.p_small - 1.0)
                } else {
                    t.powf(self.p_large - 1.0)
                }
            }
            NonlinearityKind::RatioPower { .. } => {
                if t <= 1.0 {
                    t.powf(self.p_small - 1.0) / (1.0 + t.powf(self.p_small - self.p_large))
                } else {
                    // divide through by t^{q2-q1} to stay finite
                    t.powf(self.p_large - 1.0) / (t.powf(self.p_large - self.p_small) + 1.0)
                }
            }
            NonlinearityKind::SinglePower { .. } => t.powf(self.p_small - 1.0),
            NonlinearityKind::Zero => 0.0,
        }
    }

    #[inline]
    fn dg_pos(&self, t: f64) -> f64 {
        match self.kind {
            NonlinearityKind::MinPower { .. } => {
                if t <= 1.0 {
                    (self.p_small - 1.0) * t.powf(self.p_small - 2.0)
                } else {
                    (self.p_large - 1.0) * t.powf(self.p_large - 2.0)
                }
            }
            NonlinearityKind::RatioPower { .. } => {
                if t == 0.0 {
                    return 0.0;
                }
                let s = if t <= 1.0 {
                    let x = t.powf(self.p_small - self.p_large);
                    x / (1.0 + x)
                } else {
                    1.0 / (1.0 + t.powf(self.p_large - self.p_small))
                };
                self.g_pos(t) / t * ((self.p_small - 1.0) - (self.p_small - self.p_large) * s)
            }
            NonlinearityKind::SinglePower { .. } => (self.p_small - 1.0) * t.powf(self.p_small - 2.0),
            NonlinearityKind::Zero => 0.0,
        }
    }

    #[inline]
    fn primitive_pos(&self, t: f64) -> f64 {
        match self.kind {
            NonlinearityKind::MinPower { .. } => {
                if t <= 1.0 {
                    t.powf(self.p_small) / self.p_small
                } else {
                    1.0 / self.p_small + (t.powf(self.p_large) - 1.0) / self.p_large
                }
            }
            NonlinearityKind::RatioPower { .. } => {
                self.table.as_ref().expect("ratio table").eval(t, |s| self.g_pos(s))
            }
            NonlinearityKind::SinglePower { .. } => t.powf(self.p_small) / self.p_small,
            NonlinearityKind::Zero => 0.0,
        }
    }

    /// `g(t)`; zero for `t < 0` when truncated, odd extension otherwise.
    #[inline]
    pub fn g(&self, t: f64) -> f64 {
        if t >= 0.0 {
            self.g_pos(t)
        } else if self.truncate_negative {
            0.0
        } else {
            -self.g_pos(-t)
        }
    }

    /// `g'(t)`, one-sided (from the left of `t = 1`) at the kink of
    /// `min_power`.
    #[inline]
    pub fn g_prime(&self, t: f64) -> f64 {
        if t >= 0.0 {
            self.dg_pos(t)
        } else if self.truncate_negative {
            0.0
        } else {
            self.dg_pos(-t)
        }
    }

    /// `G(t) = ∫_0^t g`.
    #[inline]
    #[allow(non_snake_case)]
    pub fn G(&self, t: f64) -> f64 {
        if t >= 0.0 {
            self.primitive_pos(t)
        } else if self.truncate_negative {
            0.0
        } else {
            self.primitive_pos(-t)
        }
    }

    /// Check `0 <= 2θ G(t) <= g(t) t` on the standard sweep; returns the
    /// worst violation `2θG - g t` (nonpositive when the condition holds).
    pub fn ar_condition_margin(&self) -> f64 {
        let two_theta = 2.0 * to_f64(self.theta);
        standard_sweep()
            .into_iter()
            .map(|t| {
                let big = self.G(t);
                let lhs = two_theta * big;
                let rhs = self.g(t) * t;
                if big < 0.0 {
                    -big
                } else {
                    (lhs - rhs) / rhs.abs().max(f64::MIN_POSITIVE)
                }
            })
            .filter(|m| m.is_finite())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sweep supremum of `|g(t)| / min{|t|^{q1-1}, |t|^{q2-1}}`.
    pub fn growth_constant(&self) -> f64 {
        standard_sweep()
            .into_iter()
            .filter(|t| *t != 0.0)
            .map(|t| {
                let a = t.abs();
                let bound = a.powf(self.p_small - 1.0).min(a.powf(self.p_large - 1.0));
                self.g(t).abs() / bound
            })
            .filter(|c| c.is_finite())
            .fold(0.0, f64::max)
    }
}

/// Memoized primitive: `G` at geometric knots, plus Gauss-Legendre on the
/// last partial interval.
#[derive(Debug)]
struct PrimitiveTable {
    log_lo: f64,
    step: f64,
    values: Vec<f64>,
    p_small: f64,
}

const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gauss8(g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    GL8_X.iter().zip(GL8_W).map(|(x, w)| w * g(m + h * x)).sum::<f64>() * h
}

impl PrimitiveTable {
    const LO: f64 = 1e-12;
    const HI: f64 = 1e12;
    const PER_DECADE: usize = 64;

    fn build(g: impl Fn(f64) -> f64, p_small: f64) -> Self {
        let log_lo = Self::LO.ln();
        let step = std::f64::consts::LN_10 / Self::PER_DECADE as f64;
        let n = ((Self::HI.ln() - log_lo) / step).ceil() as usize + 1;
        let mut values = Vec::with_capacity(n);
        // below LO, g(t) = t^{p-1} (1 + O(t^{q2-q1})) integrates exactly
        let mut acc = Self::LO.powf(p_small) / p_small;
        values.push(acc);
        for k in 1..n {
            let a = (log_lo + (k - 1) as f64 * step).exp();
            let b = (log_lo + k as f64 * step).exp();
            acc += gauss8(&g, a, b);
            values.push(acc);
        }
        Self { log_lo, step, values, p_small }
    }

    fn eval(&self, t: f64, g: impl Fn(f64) -> f64) -> f64 {
        if t <= Self::LO {
            return t.powf(self.p_small) / self.p_small;
        }
        let pos = ((t.ln() - self.log_lo) / self.step).floor() as usize;
        let k = pos.min(self.values.len() - 1);
        let knot = (self.log_lo + k as f64 * self.step).exp();
        if knot >= t {
            return self.values[k];
        }
        // beyond the table, integrate the tail in geometric panels
        let mut acc = self.values[k];
        let mut a = knot;
        while a < t {
            let b = (a * (self.step.exp())).min(t);
            acc += gauss8(&g, a, b);
            a = b;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    fn min57() -> Nonlinearity {
        Nonlinearity::with_default_theta(NonlinearityKind::MinPower { q1: q(5), q2: q(7) }).unwrap()
    }

    /// Composite Simpson oracle for `∫_0^t g`.
    fn simpson(g: impl Fn(f64) -> f64, t: f64, n: usize) -> f64 {
        let h = t / n as f64;
        let mut s = g(0.0) + g(t);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn min_power_values() {
        let g = min57();
        assert_eq!(g.g(1.0), 1.0);
        assert_eq!(g.g(0.5), 0.5f64.powi(6));
        assert_eq!(g.g(2.0), 16.0);
        assert_eq!(g.g(-3.0), 0.0);
        assert_eq!(g.G(0.0), 0.0);
        assert!((g.G(1.0) - 1.0 / 7.0).abs() < 1e-15);
        assert!((g.G(2.0) - (1.0 / 7.0 + 31.0 / 5.0)).abs() < 1e-14);
    }

    #[test]
    fn order_is_normalized() {
        let a = Nonlinearity::with_default_theta(NonlinearityKind::MinPower { q1: q(7), q2: q(5) }).unwrap();
        assert_eq!(a, min57());
        assert!(Nonlinearity::with_default_theta(NonlinearityKind::SinglePower { q: q(2) }).is_err());
    }

    #[test]
    fn odd_extension() {
        let g = Nonlinearity::new(NonlinearityKind::SinglePower { q: q(4) }, q(2), false).unwrap();
        assert_eq!(g.g(-2.0), -8.0);
        assert_eq!(g.G(-2.0), 4.0);
        assert_eq!(g.g_prime(-2.0), 12.0);
    }

    #[test]
    fn ratio_primitive_matches_simpson() {
        let g = Nonlinearity::with_default_theta(NonlinearityKind::RatioPower { q1: q(5), q2: q(7) }).unwrap();
        for t in [0.01, 0.5, 1.0, 1.7, 9.0] {
            let oracle = simpson(|s| g.g(s), t, 20000);
            let got = g.G(t);
            assert!((got - oracle).abs() <= 1e-12 * oracle.max(1e-300) + 1e-18, "{t}: {got} vs {oracle}");
        }
        let big = 1e13;
        assert!(g.G(big).is_finite() && g.G(big) > g.G(1e12));
    }

    #[test]
    fn derivatives_match_differences() {
        let kinds = [
            NonlinearityKind::MinPower { q1: q(5), q2: q(7) },
            NonlinearityKind::RatioPower { q1: q(5), q2: q(7) },
            NonlinearityKind::SinglePower { q: Rational::new(17, 2) },
        ];
        for kind in kinds {
            let g = Nonlinearity::with_default_theta(kind).unwrap();
            for t in [0.3, 0.9, 1.4, 3.0] {
                let e = 1e-6;
                let fd = (g.g(t + e) - g.g(t - e)) / (2.0 * e);
                assert!((fd - g.g_prime(t)).abs() < 1e-6 * (1.0 + fd.abs()), "{kind:?} {t}");
                let fd_big = (g.G(t + e) - g.G(t - e)) / (2.0 * e);
                assert!((fd_big - g.g(t)).abs() < 1e-6 * (1.0 + fd_big.abs()), "{kind:?} {t}");
            }
        }
    }

    #[test]
    fn ambrosetti_rabinowitz_sweep() {
        let kinds = [
            NonlinearityKind::MinPower { q1: q(5), q2: q(7) },
            NonlinearityKind::RatioPower { q1: q(5), q2: q(7) },
            NonlinearityKind::SinglePower { q: q(8) },
        ];
        for kind in kinds {
            let g = Nonlinearity::with_default_theta(kind).unwrap();
            assert!(g.ar_condition_margin() <= 1e-12, "{kind:?}: {}", g.ar_condition_margin());
            for t in standard_sweep() {
                assert!(g.G(t) >= 0.0);
            }
        }
    }

    #[test]
    fn growth_constants() {
        assert!((min57().growth_constant() - 1.0).abs() < 1e-12);
        let r = Nonlinearity::with_default_theta(NonlinearityKind::RatioPower { q1: q(5), q2: q(7) }).unwrap();
        let c = r.growth_constant();
        assert!(c <= 1.0 && c > 0.4, "{c}");
    }

    #[test]
    fn kind_serializes_with_tag() {
        let k = NonlinearityKind::MinPower { q1: q(5), q2: Rational::new(15, 2) };
        let json = serde_json::to_string(&k).unwrap();
        assert_eq!(json, r#"{"kind":"min_power","q1":"5","q2":"15/2"}"#);
    }
}
