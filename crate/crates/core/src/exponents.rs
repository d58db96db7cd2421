//! Exact-rational exponent formulas for the admissible growth of `g`.
//!
//! Given envelopes `K(r) <= C r^α V(r)^β` near the origin and near infinity,
//! the functions here give the interval of exponents `q1` for which the
//! `K`-weighted `q1`-integral over small balls vanishes, the lower bound for
//! `q2` at infinity, the decay rates `δ` of the corresponding suprema, and
//! the full existence check that combines them with the Ambrosetti-Rabinowitz
//! constant `θ`.
//!
//! Everything is computed with `Ratio<i64>`; floats appear only at the API
//! boundary (envelope radii).

use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::DomainError;

pub type Rational = Ratio<i64>;

fn r(n: i64) -> Rational {
    Rational::from_integer(n)
}

fn half() -> Rational {
    Rational::new(1, 2)
}

/// Parse `"3"`, `"-1/2"` or a finite decimal such as `"0.25"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational, DomainError> {
    let s = s.trim();
    let bad = || DomainError::Other(format!("cannot parse {s:?} as a rational number"));
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 15 {
            return Err(bad());
        }
        let negative = int.trim_start().starts_with('-');
        let whole: i64 = match int.trim() {
            "" | "-" | "+" => 0,
            other => other.parse().map_err(|_| bad())?,
        };
        let den = 10i64.pow(frac.len() as u32);
        let num: i64 = frac.parse().map_err(|_| bad())?;
        let magnitude = Rational::from_integer(whole.abs()) + Rational::new(num, den);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    s.parse::<Rational>().map_err(|_| bad())
}

/// Serde helpers writing rationals as strings (`"16/3"`). Reading also
/// accepts plain integers.
pub mod rational_str {
    use super::*;
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    struct RationalVisitor;

    impl Visitor<'_> for RationalVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("an integer or a rational string such as \"16/3\"")
        }

        fn visit_str<E: de::Error>(self, s: &str) -> Result<Rational, E> {
            parse_rational(s).map_err(E::custom)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(Rational::from_integer(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            i64::try_from(v).map(Rational::from_integer).map_err(E::custom)
        }
    }

    struct Wrapped(Rational);

    impl<'de> Deserialize<'de> for Wrapped {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            d.deserialize_any(RationalVisitor).map(Wrapped)
        }
    }

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(q)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        d.deserialize_any(RationalVisitor)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(q: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
            match q {
                Some(q) => s.collect_str(q),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
            Ok(Option::<Wrapped>::deserialize(d)?.map(|w| w.0))
        }
    }
}

/// Spatial dimension, at least 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dimension(u32);

impl Dimension {
    pub fn new(n: u32) -> Result<Self, DomainError> {
        if n >= 3 {
            Ok(Self(n))
        } else {
            Err(DomainError::Dimension(n))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    fn q(self) -> Rational {
        r(self.0 as i64)
    }
}

impl TryFrom<u32> for Dimension {
    type Error = DomainError;
    fn try_from(n: u32) -> Result<Self, Self::Error> {
        Self::new(n)
    }
}

impl From<Dimension> for u32 {
    fn from(d: Dimension) -> u32 {
        d.0
    }
}

/// Power envelope `K(r) <= C r^alpha V(r)^beta` on `(0, radius)` (at the
/// origin) or on `(radius, inf)` (at infinity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    #[serde(with = "rational_str")]
    pub alpha: Rational,
    #[serde(with = "rational_str")]
    pub beta: Rational,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    1.0
}

impl Envelope {
    pub fn new(alpha: Rational, beta: Rational) -> Result<Self, DomainError> {
        Self::with_radius(alpha, beta, 1.0)
    }

    pub fn with_radius(alpha: Rational, beta: Rational, radius: f64) -> Result<Self, DomainError> {
        check_beta(beta)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(DomainError::Other(format!("envelope radius {radius} must be positive")));
        }
        Ok(Self { alpha, beta, radius })
    }

    /// Convenience constructor from integer alpha and a rational beta `p/q`.
    pub fn ints(alpha: i64, beta_num: i64, beta_den: i64) -> Self {
        Self::new(r(alpha), Rational::new(beta_num, beta_den)).expect("beta in [0,1]")
    }
}

fn check_beta(beta: Rational) -> Result<(), DomainError> {
    if beta < Rational::zero() || beta > Rational::one() {
        Err(DomainError::BetaOutOfRange(beta.to_string()))
    } else {
        Ok(())
    }
}

/// Open interval `(lower, upper)` of rationals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenInterval {
    #[serde(with = "rational_str")]
    pub lower: Rational,
    #[serde(with = "rational_str")]
    pub upper: Rational,
}

impl OpenInterval {
    /// `None` when the interval would be empty.
    pub fn new(lower: Rational, upper: Rational) -> Option<Self> {
        (lower < upper).then_some(Self { lower, upper })
    }

    pub fn contains(&self, q: Rational) -> bool {
        self.lower < q && q < self.upper
    }
}

impl fmt::Display for OpenInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lower, self.upper)
    }
}

/// `α*(β) = max{β(N+2)/2 - 1 - N/2, β(3N-2)/2 - N}`.
pub fn alpha_star(beta: Rational, n: Dimension) -> Result<Rational, DomainError> {
    check_beta(beta)?;
    let n = n.q();
    let first = beta * (n + r(2)) * half() - r(1) - n * half();
    let second = beta * (r(3) * n - r(2)) * half() - n;
    Ok(first.max(second))
}

/// `q0*(α, β) = (2α + 2N - β(N+2)) / (N-2)`.
pub fn q0_star(alpha: Rational, beta: Rational, n: Dimension) -> Rational {
    let n = n.q();
    (r(2) * alpha + r(2) * n - beta * (n + r(2))) / (n - r(2))
}

/// `q∞*(α, β) = 2(α + N - 2β) / (N-2)`.
pub fn q_inf_star(alpha: Rational, beta: Rational, n: Dimension) -> Rational {
    let n = n.q();
    r(2) * (alpha + n - r(2) * beta) / (n - r(2))
}

fn lower_exponent(beta: Rational) -> Rational {
    r(1).max(r(2) * beta)
}

/// `(max{1, 2β0}, q0*(α0, β0))` when `α0 > α*(β0)`, otherwise `None`.
pub fn q1_range(env: &Envelope, n: Dimension) -> Option<OpenInterval> {
    let star = alpha_star(env.beta, n).ok()?;
    if env.alpha <= star {
        return None;
    }
    OpenInterval::new(lower_exponent(env.beta), q0_star(env.alpha, env.beta, n))
}

/// Strict lower bound `max{1, 2β∞, q∞*(α∞, β∞)}` for `q2`.
pub fn q2_lower_bound(env: &Envelope, n: Dimension) -> Rational {
    lower_exponent(env.beta).max(q_inf_star(env.alpha, env.beta, n))
}

/// Rate `δ > 0` with `S0(q1, R) <= C R^δ` as `R -> 0`.
pub fn delta_rate_zero(q1: Rational, env: &Envelope, n: Dimension) -> Result<Rational, DomainError> {
    let range = q1_range(env, n).ok_or_else(|| {
        DomainError::Exponent(format!("alpha0 = {} does not exceed alpha*(beta0)", env.alpha))
    })?;
    if !range.contains(q1) {
        return Err(DomainError::Exponent(format!("q1 = {q1} outside {range}")));
    }
    let nq = n.q();
    let (alpha, beta) = (env.alpha, env.beta);
    let sobolev = (nq - r(2)) * half() * (q0_star(alpha, beta, n) - q1);
    let delta = if beta.is_zero() {
        sobolev
    } else if beta < r(1) {
        sobolev.min(alpha + nq * (r(1) - beta))
    } else {
        alpha - (nq - r(2)) * (q1 - r(1)) * half()
    };
    Ok(delta)
}

/// Rate `δ < 0` with `S∞(q2, R) <= C R^δ` as `R -> ∞`.
///
/// Each branch is written as it arises from the Hölder splitting; all three
/// reduce to `(N-2)/2 (q∞* - q2)`, which the unit tests check.
pub fn delta_rate_infinity(q2: Rational, env: &Envelope, n: Dimension) -> Result<Rational, DomainError> {
    let bound = q2_lower_bound(env, n);
    if q2 <= bound {
        return Err(DomainError::Exponent(format!("q2 = {q2} must exceed {bound}")));
    }
    let nq = n.q();
    let (alpha, beta) = (env.alpha, env.beta);
    let delta = if beta <= half() {
        let denom = nq + r(2) * (r(1) - r(2) * beta);
        let exponent = (r(2) * alpha - r(4) * beta + r(2) * nq - (nq - r(2)) * q2) / denom * nq;
        exponent * denom / (r(2) * nq)
    } else if beta < r(1) {
        // integrating |x|^a over the complement of B_R adds N to the exponent
        let exponent = (r(2) * alpha - (nq - r(2)) * (q2 - r(2) * beta)) / (r(2) * (r(1) - beta)) + nq;
        exponent * (r(1) - beta)
    } else {
        (r(2) * alpha - (nq - r(2)) * (q2 - r(2))) * half()
    };
    Ok(delta)
}

/// Why an existence check failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum Reason {
    MissingEnvelope { side: String },
    Q1RangeEmpty { message: String },
    Q1TooLow { message: String },
    Q1TooHigh { message: String },
    Q2TooLow { message: String },
    Q1NotAbove4 { message: String },
    Q2NotAbove4 { message: String },
    ThetaNotAbove2 { message: String },
    BelowTwoTheta { message: String },
}

impl Reason {
    pub fn message(&self) -> String {
        match self {
            Reason::MissingEnvelope { side } => format!("no envelope declared at {side}"),
            Reason::Q1RangeEmpty { message }
            | Reason::Q1TooLow { message }
            | Reason::Q1TooHigh { message }
            | Reason::Q2TooLow { message }
            | Reason::Q1NotAbove4 { message }
            | Reason::Q2NotAbove4 { message }
            | Reason::ThetaNotAbove2 { message }
            | Reason::BelowTwoTheta { message } => message.clone(),
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message())
    }
}

/// Outcome of [`existence_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub dimension: Dimension,
    #[serde(with = "rational_str")]
    pub q1: Rational,
    #[serde(with = "rational_str")]
    pub q2: Rational,
    #[serde(with = "rational_str")]
    pub theta: Rational,
    /// True when the caller passed `q1 > q2` and the pair was swapped.
    pub normalized_order: bool,
    pub envelope_zero: Option<Envelope>,
    pub envelope_infinity: Option<Envelope>,
    #[serde(with = "rational_str::option")]
    pub alpha_star_0: Option<Rational>,
    #[serde(with = "rational_str::option")]
    pub q0_star: Option<Rational>,
    #[serde(with = "rational_str::option")]
    pub q_inf_star: Option<Rational>,
    pub q1_interval: Option<OpenInterval>,
    #[serde(with = "rational_str::option")]
    pub q2_lower: Option<Rational>,
    /// `q1_interval` intersected with `q > 4`.
    pub q1_existence_interval: Option<OpenInterval>,
    /// Admissible `q` for a single power `g(t) = t^{q-1}` (`q1 = q2 = q`).
    pub single_power_interval: Option<OpenInterval>,
    #[serde(with = "rational_str::option")]
    pub delta_zero: Option<Rational>,
    #[serde(with = "rational_str::option")]
    pub delta_infinity: Option<Rational>,
    pub existence_ok: bool,
    pub reasons: Vec<Reason>,
}

/// Pick the envelope at the origin whose interval contains `q1` with the
/// largest `q0*`, falling back to the largest `q0*` overall.
fn choose_zero(envs: &[Envelope], q1: Rational, n: Dimension) -> Option<Envelope> {
    let by_upper = |a: &&Envelope, b: &&Envelope| {
        q0_star(a.alpha, a.beta, n).cmp(&q0_star(b.alpha, b.beta, n))
    };
    envs.iter()
        .filter(|e| q1_range(e, n).is_some_and(|i| i.contains(q1)))
        .max_by(by_upper)
        .or_else(|| {
            let valid: Vec<_> = envs.iter().filter(|e| q1_range(e, n).is_some()).collect();
            if valid.is_empty() {
                envs.iter().max_by(by_upper)
            } else {
                valid.into_iter().max_by(by_upper)
            }
        })
        .copied()
}

fn choose_infinity(envs: &[Envelope], n: Dimension) -> Option<Envelope> {
    envs.iter()
        .min_by(|a, b| q2_lower_bound(a, n).cmp(&q2_lower_bound(b, n)))
        .copied()
}

/// Check the hypotheses of the existence theorem for `g` with growth
/// exponents `q1` (origin) and `q2` (infinity) and constant `θ`.
pub fn existence_check(
    zero: &[Envelope],
    infinity: &[Envelope],
    q1: Rational,
    q2: Rational,
    theta: Rational,
    n: Dimension,
) -> AdmissibilityReport {
    let normalized_order = q1 > q2;
    let (q1, q2) = if normalized_order { (q2, q1) } else { (q1, q2) };
    let four = r(4);
    let mut reasons = Vec::new();

    let env0 = choose_zero(zero, q1, n);
    let env_inf = choose_infinity(infinity, n);

    let alpha_star_0 = env0.and_then(|e| alpha_star(e.beta, n).ok());
    let q0 = env0.map(|e| q0_star(e.alpha, e.beta, n));
    let qinf = env_inf.map(|e| q_inf_star(e.alpha, e.beta, n));
    let q1_interval = env0.and_then(|e| q1_range(&e, n));
    let q2_lower = env_inf.map(|e| q2_lower_bound(&e, n));

    match (env0, q1_interval) {
        (None, _) => reasons.push(Reason::MissingEnvelope { side: "zero".into() }),
        (Some(e), None) => reasons.push(Reason::Q1RangeEmpty {
            message: format!(
                "alpha0 = {} must exceed alpha*(beta0) = {}",
                e.alpha,
                alpha_star_0.unwrap_or_default()
            ),
        }),
        (Some(_), Some(i)) => {
            if q1 <= i.lower {
                reasons.push(Reason::Q1TooLow { message: format!("q1 must be > {} strictly", i.lower) });
            }
            if q1 >= i.upper {
                reasons.push(Reason::Q1TooHigh { message: format!("q1 must be < {} strictly", i.upper) });
            }
        }
    }
    match q2_lower {
        None => reasons.push(Reason::MissingEnvelope { side: "infinity".into() }),
        Some(b) if q2 <= b => {
            reasons.push(Reason::Q2TooLow { message: format!("q2 must be > {b} strictly") })
        }
        Some(_) => {}
    }
    if q1 <= four {
        reasons.push(Reason::Q1NotAbove4 { message: "q1 must exceed 4".into() });
    }
    if q2 <= four {
        reasons.push(Reason::Q2NotAbove4 { message: "q2 must exceed 4".into() });
    }
    if theta <= r(2) {
        reasons.push(Reason::ThetaNotAbove2 { message: format!("theta = {theta} must exceed 2") });
    }
    if q1 < r(2) * theta {
        reasons.push(Reason::BelowTwoTheta {
            message: format!("q1 = {q1} must be at least 2*theta = {}", r(2) * theta),
        });
    }

    let q1_existence_interval = q1_interval.and_then(|i| OpenInterval::new(i.lower.max(four), i.upper));
    let single_power_interval = match (q1_existence_interval, q2_lower) {
        (Some(i), Some(b)) => OpenInterval::new(i.lower.max(b), i.upper),
        _ => None,
    };
    let delta_zero = env0.and_then(|e| delta_rate_zero(q1, &e, n).ok());
    let delta_infinity = env_inf.and_then(|e| delta_rate_infinity(q2, &e, n).ok());

    AdmissibilityReport {
        dimension: n,
        q1,
        q2,
        theta,
        normalized_order,
        envelope_zero: env0,
        envelope_infinity: env_inf,
        alpha_star_0,
        q0_star: q0,
        q_inf_star: qinf,
        q1_interval,
        q2_lower,
        q1_existence_interval,
        single_power_interval,
        delta_zero,
        delta_infinity,
        existence_ok: reasons.is_empty(),
        reasons,
    }
}

/// Compare a rational with a float, used when envelopes meet sampled data.
pub fn to_f64(q: Rational) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Closest rational with denominator at most `max_den` (continued fractions).
pub fn approximate(x: f64, max_den: i64) -> Rational {
    if !x.is_finite() {
        return Rational::zero();
    }
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut v = x.abs();
    for _ in 0..64 {
        let a = v.floor();
        if a > i64::MAX as f64 / 4.0 {
            break;
        }
        let a = a as i64;
        let (h2, k2) = (a.saturating_mul(h1).saturating_add(h0), a.saturating_mul(k1).saturating_add(k0));
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = v - a as f64;
        if frac.abs() < 1e-12 {
            break;
        }
        v = 1.0 / frac;
    }
    let q = Rational::new(h1, k1.max(1));
    if x.is_sign_negative() { -q } else { q }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn dims() -> Vec<Dimension> {
        [3, 4, 5, 6, 7, 10].into_iter().map(|n| Dimension::new(n).unwrap()).collect()
    }

    #[test]
    fn alpha_star_endpoints() {
        for n in dims() {
            let nn = n.get() as i64;
            assert_eq!(alpha_star(r(0), n).unwrap(), q(-(nn + 2), 2));
            assert_eq!(alpha_star(r(1), n).unwrap(), q(nn - 2, 2));
        }
    }

    #[test]
    fn alpha_star_branches_meet_at_half() {
        let n = Dimension::new(3).unwrap();
        let nq = r(3);
        let b = half();
        let first = b * (nq + r(2)) / r(2) - r(1) - nq / r(2);
        let second = b * (r(3) * nq - r(2)) / r(2) - nq;
        assert_eq!(first, second);
        assert_eq!(alpha_star(b, n).unwrap(), q(-5, 4));
    }

    #[test]
    fn alpha_star_rejects_bad_beta() {
        let n = Dimension::new(3).unwrap();
        assert!(alpha_star(q(-1, 2), n).is_err());
        assert!(alpha_star(q(3, 2), n).is_err());
    }

    #[test]
    fn golden_q_stars() {
        for n in dims() {
            let nn = n.get() as i64;
            // K between r^{2N} and r^{3N}
            assert_eq!(q0_star(r(2 * nn), r(0), n), q(6 * nn, nn - 2));
            assert_eq!(q_inf_star(r(3 * nn), r(0), n), q(8 * nn, nn - 2));
            // K = r^N
            assert_eq!(q0_star(r(nn), r(0), n), q(4 * nn, nn - 2));
            // K = r^N e^r, V = e^{2r}
            assert_eq!(q_inf_star(r(nn), half(), n), q(2 * (2 * nn - 1), nn - 2));
            // K = r^alpha V at infinity
            assert_eq!(q_inf_star(r(0), r(0), n), q(2 * nn, nn - 2));
            for a in [-3, 0, 2, 7] {
                assert_eq!(q_inf_star(r(a), r(1), n), q(2 * a, nn - 2) + r(2));
            }
        }
        let n3 = Dimension::new(3).unwrap();
        assert_eq!(q0_star(q(-1, 2), r(0), n3), r(5));
        assert_eq!(q_inf_star(q(-1, 3), r(0), n3), q(16, 3));
    }

    #[test]
    fn q1_ranges() {
        for n in dims() {
            let nn = n.get() as i64;
            let env = Envelope::ints(2 * nn, 0, 1);
            assert_eq!(q1_range(&env, n), OpenInterval::new(r(1), q(6 * nn, nn - 2)));
            let b = q(1, 3);
            let boundary = Envelope::new(alpha_star(b, n).unwrap(), b).unwrap();
            assert_eq!(q1_range(&boundary, n), None);
        }
        let n3 = Dimension::new(3).unwrap();
        assert_eq!(q1_range(&Envelope::ints(3, 0, 1), n3), OpenInterval::new(r(1), r(12)));
    }

    #[test]
    fn q2_bounds() {
        for n in dims() {
            let nn = n.get() as i64;
            assert_eq!(q2_lower_bound(&Envelope::ints(3 * nn, 0, 1), n), q(8 * nn, nn - 2));
            // beta = 1, alpha = 0: max{1, 2, 2(N-2)/(N-2)} = 2
            let expected = r(1).max(r(2)).max(r(2) * (r(0) + r(nn) - r(2)) / r(nn - 2));
            assert_eq!(q2_lower_bound(&Envelope::ints(0, 1, 1), n), expected);
            assert_eq!(expected, r(2));
        }
    }

    #[test]
    fn delta_zero_cases() {
        let n = Dimension::new(3).unwrap();
        let env = Envelope::ints(6, 0, 1);
        let eps = q(1, 7);
        let q1 = q0_star(env.alpha, env.beta, n) - eps;
        assert_eq!(delta_rate_zero(q1, &env, n).unwrap(), eps / r(2));

        let env1 = Envelope::ints(3, 1, 1);
        // q1 = 1 is outside (max{1,2}, q0*) = (2, ..), use the formula at q1 = 3
        assert_eq!(delta_rate_zero(r(3), &env1, n).unwrap(), r(3) - r(1));
        // the (q1 - 1) term vanishes at q1 = 1
        assert_eq!(env1.alpha - (r(3) - r(2)) * (r(1) - r(1)) * half(), env1.alpha);

        let envh = Envelope::ints(1, 1, 2);
        let expected = (half() * (q0_star(r(1), half(), n) - r(4))).min(r(1) + q(3, 2));
        assert_eq!(expected, q(3, 4));
        assert_eq!(delta_rate_zero(r(4), &envh, n).unwrap(), expected);

        assert!(delta_rate_zero(r(20), &env, n).is_err());
    }

    #[test]
    fn delta_infinity_cases() {
        for n in dims() {
            let nn = n.get() as i64;
            for (a, bn, bd) in [(0, 0, 1), (3, 1, 4), (2, 1, 2), (5, 3, 4), (4, 1, 1)] {
                let env = Envelope::ints(a, bn, bd);
                let bound = q2_lower_bound(&env, n);
                let qs = q_inf_star(env.alpha, env.beta, n);
                for extra in [q(1, 1000), r(1), r(2), r(5)] {
                    let q2 = bound + extra;
                    let d = delta_rate_infinity(q2, &env, n).unwrap();
                    assert_eq!(d, r(nn - 2) / r(2) * (qs - q2));
                    assert!(d < r(0));
                }
                assert!(delta_rate_infinity(bound, &env, n).is_err());
            }
            let env = Envelope::ints(0, 0, 1);
            let qs = q_inf_star(r(0), r(0), n);
            assert_eq!(delta_rate_infinity(qs + r(2), &env, n).unwrap(), -r(nn - 2));
        }
        let n3 = Dimension::new(3).unwrap();
        let env = Envelope::ints(9, 0, 1);
        assert_eq!(delta_rate_infinity(r(25), &env, n3).unwrap(), q(-1, 2));
    }

    #[test]
    fn existence_examples() {
        let n3 = Dimension::new(3).unwrap();
        let rep = existence_check(
            &[Envelope::ints(6, 0, 1)],
            &[Envelope::ints(9, 0, 1)],
            r(5),
            r(27),
            q(5, 2),
            n3,
        );
        assert!(rep.existence_ok, "{:?}", rep.reasons);
        assert_eq!(rep.q1_existence_interval, OpenInterval::new(r(4), r(18)));
        assert_eq!(rep.q2_lower, Some(r(24)));

        let rep = existence_check(&[Envelope::ints(3, 0, 1)], &[Envelope::ints(0, 0, 1)], r(8), r(8), r(4), n3);
        assert!(rep.existence_ok, "{:?}", rep.reasons);
        assert_eq!(rep.single_power_interval, OpenInterval::new(r(6), r(12)));

        let rep = existence_check(&[Envelope::ints(3, 0, 1)], &[Envelope::ints(0, 0, 1)], r(4), r(8), r(2), n3);
        assert!(!rep.existence_ok);
        assert!(rep.reasons.iter().any(|x| x.message() == "q1 must exceed 4"));
    }

    #[test]
    fn example_two_boundary() {
        let n3 = Dimension::new(3).unwrap();
        let rep = existence_check(
            &[Envelope::new(q(-1, 2), r(0)).unwrap()],
            &[Envelope::new(q(-1, 3), r(0)).unwrap()],
            r(5),
            r(6),
            q(5, 2),
            n3,
        );
        assert!(!rep.existence_ok);
        assert_eq!(rep.reasons[0].message(), "q1 must be < 5 strictly");
    }

    #[test]
    fn swapped_order_is_normalized() {
        let n3 = Dimension::new(3).unwrap();
        let rep = existence_check(&[Envelope::ints(6, 0, 1)], &[Envelope::ints(9, 0, 1)], r(27), r(5), q(5, 2), n3);
        assert!(rep.normalized_order);
        assert_eq!((rep.q1, rep.q2), (r(5), r(27)));
        assert!(rep.existence_ok);
    }

    #[test]
    fn multiple_envelopes_pick_widest() {
        let n3 = Dimension::new(3).unwrap();
        let rep = existence_check(
            &[Envelope::ints(1, 0, 1), Envelope::ints(6, 0, 1)],
            &[Envelope::ints(9, 0, 1)],
            r(10),
            r(27),
            r(5),
            n3,
        );
        assert_eq!(rep.envelope_zero, Some(Envelope::ints(6, 0, 1)));
        assert!(rep.existence_ok);
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("3").unwrap(), r(3));
        assert_eq!(parse_rational("-1/2").unwrap(), q(-1, 2));
        assert_eq!(parse_rational("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), q(-3, 2));
        assert!(parse_rational("abc").is_err());
        assert_eq!(approximate(0.3333333333, 100), q(1, 3));
        assert_eq!(approximate(-2.5, 10), q(-5, 2));
    }

    #[test]
    fn report_serializes_with_exact_field_names() {
        let n3 = Dimension::new(3).unwrap();
        let rep = existence_check(&[Envelope::ints(3, 0, 1)], &[Envelope::ints(0, 0, 1)], r(8), r(8), r(4), n3);
        let json = serde_json::to_value(&rep).unwrap();
        for key in [
            "alpha_star_0",
            "q0_star",
            "q_inf_star",
            "q1_interval",
            "q2_lower",
            "delta_zero",
            "delta_infinity",
            "existence_ok",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["q0_star"], "12");
        assert_eq!(json["q2_lower"], "6");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn betas() -> Vec<Rational> {
            vec![r(0), q(1, 4), q(1, 2), q(3, 4), r(1)]
        }

        #[test]
        fn interval_nonempty_iff_alpha_exceeds_star() {
            for n in dims() {
                for beta in betas() {
                    let star = alpha_star(beta, n).unwrap();
                    for k in -12..=12 {
                        let alpha = star + q(k, 4);
                        let lhs = lower_exponent(beta) < q0_star(alpha, beta, n);
                        assert_eq!(lhs, alpha > star, "N={} beta={beta} alpha={alpha}", n.get());
                        let env = Envelope::new(alpha, beta).unwrap();
                        assert_eq!(q1_range(&env, n).is_some(), alpha > star);
                    }
                }
            }
        }

        #[test]
        fn alpha_star_above_minus_n_one_minus_beta() {
            for n in dims() {
                for k in 0..=40 {
                    let beta = q(k, 40);
                    assert!(alpha_star(beta, n).unwrap() >= -r(n.get() as i64) * (r(1) - beta));
                }
            }
        }

        proptest! {
            #[test]
            fn q0_monotone(a in -20i64..40, b in 0i64..=8, nn in 3u32..12) {
                let n = Dimension::new(nn).unwrap();
                let beta = q(b, 8);
                prop_assert!(q0_star(r(a + 1), beta, n) > q0_star(r(a), beta, n));
                if b < 8 {
                    prop_assert!(q0_star(r(a), q(b + 1, 8), n) < q0_star(r(a), beta, n));
                }
            }

            #[test]
            fn rates_have_the_right_sign(a in -2i64..30, b in 0i64..=4, nn in 3u32..9, t in 1i64..99) {
                let n = Dimension::new(nn).unwrap();
                let env = Envelope::new(r(a), q(b, 4)).unwrap();
                if let Some(range) = q1_range(&env, n) {
                    let q1 = range.lower + (range.upper - range.lower) * q(t, 100);
                    prop_assert!(delta_rate_zero(q1, &env, n).unwrap() > r(0));
                }
                let q2 = q2_lower_bound(&env, n) + q(t, 10);
                prop_assert!(delta_rate_infinity(q2, &env, n).unwrap() < r(0));
            }
        }
    }
}
