//! Exact base-p logarithmic arithmetic.
//!
//! Every norm, radius and slope in the crate lives on the base-p logarithmic
//! scale, so `log_p |p| = -1` and `log_p omega = -1/(p-1)`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact rational number.
pub type Q = BigRational;

/// Builds the rational `n / d`.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Builds the integer `n` as a rational.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Canonical string form: `"a"` for integers, `"a/b"` otherwise.
pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `"a"`, `"-a"`, or `"a/b"` (surrounding whitespace allowed).
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid rational {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
            let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Q::new(n, d))
        }
        None => Ok(Q::from_integer(BigInt::from_str(s).map_err(|_| bad())?)),
    }
}

/// Floating point approximation, for human-readable echoes only.
pub fn approx(x: &Q) -> f64 {
    let n = x.numer().to_f64().unwrap_or(f64::NAN);
    let d = x.denom().to_f64().unwrap_or(f64::NAN);
    n / d
}

/// Serde adapter storing a [`Q`] as its canonical string.
pub mod q_serde {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<Q>`.
pub mod qvec_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> std::result::Result<S::Ok, S::Error> {
        let strs: Vec<String> = v.iter().map(fmt_q).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Q>, D::Error> {
        let strs = Vec::<String>::deserialize(d)?;
        strs.iter().map(|s| parse_q(s).map_err(serde::de::Error::custom)).collect()
    }
}

/// A residue characteristic, checked prime at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Prime(u64);

impl Prime {
    pub fn new(p: u64) -> Result<Self> {
        if p < 2 || (2..).take_while(|d| d * d <= p).any(|d| p.is_multiple_of(d)) {
            return Err(Error::NotPrime(p));
        }
        Ok(Prime(p))
    }

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn big(self) -> BigInt {
        BigInt::from(self.0)
    }

    pub fn q(self) -> Q {
        Q::from_integer(self.big())
    }
}

impl<'de> Deserialize<'de> for Prime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let p = u64::deserialize(d)?;
        Prime::new(p).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Exact rational on the base-p log scale, extended by `-inf` and `+inf`.
///
/// `-inf` is the log of `0` and the log-radius of type-1 points; it absorbs
/// everything under addition. `+inf` appears as a Newton polygon entry for
/// vanishing coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QLog {
    NegInf,
    Fin(Q),
    PosInf,
}

impl QLog {
    pub fn zero() -> Self {
        QLog::Fin(Q::zero())
    }

    pub fn from_int(n: i64) -> Self {
        QLog::Fin(qi(n))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, QLog::Fin(_))
    }

    /// The finite value, if any.
    pub fn fin(&self) -> Option<&Q> {
        match self {
            QLog::Fin(x) => Some(x),
            _ => None,
        }
    }

    /// The finite value; panics on a sentinel.
    pub fn expect_fin(&self) -> &Q {
        self.fin().expect("finite log value expected")
    }

    /// Multiplication by an exact rational. `0 * (+-inf) = 0`.
    pub fn scale(&self, c: &Q) -> QLog {
        if c.is_zero() {
            return QLog::zero();
        }
        match self {
            QLog::Fin(x) => QLog::Fin(x * c),
            QLog::NegInf if c.is_positive() => QLog::NegInf,
            QLog::NegInf => QLog::PosInf,
            QLog::PosInf if c.is_positive() => QLog::PosInf,
            QLog::PosInf => QLog::NegInf,
        }
    }

    pub fn max(self, other: QLog) -> QLog {
        std::cmp::max(self, other)
    }

    pub fn min(self, other: QLog) -> QLog {
        std::cmp::min(self, other)
    }
}

impl From<Q> for QLog {
    fn from(x: Q) -> Self {
        QLog::Fin(x)
    }
}

impl Ord for QLog {
    fn cmp(&self, other: &Self) -> Ordering {
        use QLog::*;
        match (self, other) {
            (Fin(a), Fin(b)) => a.cmp(b),
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
        }
    }
}

impl PartialOrd for QLog {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &QLog {
    type Output = QLog;
    fn add(self, rhs: &QLog) -> QLog {
        use QLog::*;
        match (self, rhs) {
            (NegInf, _) | (_, NegInf) => NegInf,
            (PosInf, _) | (_, PosInf) => PosInf,
            (Fin(a), Fin(b)) => Fin(a + b),
        }
    }
}

impl Add for QLog {
    type Output = QLog;
    fn add(self, rhs: QLog) -> QLog {
        &self + &rhs
    }
}

impl Add<&Q> for &QLog {
    type Output = QLog;
    fn add(self, rhs: &Q) -> QLog {
        match self {
            QLog::Fin(a) => QLog::Fin(a + rhs),
            other => other.clone(),
        }
    }
}

impl Neg for &QLog {
    type Output = QLog;
    fn neg(self) -> QLog {
        match self {
            QLog::NegInf => QLog::PosInf,
            QLog::PosInf => QLog::NegInf,
            QLog::Fin(a) => QLog::Fin(-a),
        }
    }
}

impl Neg for QLog {
    type Output = QLog;
    fn neg(self) -> QLog {
        -&self
    }
}

impl Sub for &QLog {
    type Output = QLog;
    fn sub(self, rhs: &QLog) -> QLog {
        self + &(-rhs)
    }
}

impl Sub for QLog {
    type Output = QLog;
    fn sub(self, rhs: QLog) -> QLog {
        &self - &rhs
    }
}

impl fmt::Display for QLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QLog::NegInf => write!(f, "-inf"),
            QLog::PosInf => write!(f, "+inf"),
            QLog::Fin(x) => write!(f, "{}", fmt_q(x)),
        }
    }
}

impl FromStr for QLog {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "-inf" => Ok(QLog::NegInf),
            "+inf" | "inf" => Ok(QLog::PosInf),
            other => parse_q(other).map(QLog::Fin),
        }
    }
}

impl Serialize for QLog {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for QLog {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// p-adic valuation of a nonzero integer.
pub fn vp_int(n: &BigInt, p: Prime) -> i64 {
    assert!(!n.is_zero());
    let pb = p.big();
    let mut n = n.abs();
    let mut v = 0;
    loop {
        let (quo, rem) = n.div_rem(&pb);
        if !rem.is_zero() {
            return v;
        }
        n = quo;
        v += 1;
    }
}

/// p-adic valuation `v_p(q)` of a nonzero rational.
pub fn vp(q: &Q, p: Prime) -> i64 {
    vp_int(q.numer(), p) - vp_int(q.denom(), p)
}

/// `log_p |q| = -v_p(q)`.
pub fn val_rational(q: &Q, p: Prime) -> Result<QLog> {
    if q.is_zero() {
        return Err(Error::ZeroValuation);
    }
    Ok(QLog::Fin(qi(-vp(q, p))))
}

/// `log_p |q|`, with `-inf` for `q = 0`.
pub fn log_abs(q: &Q, p: Prime) -> QLog {
    if q.is_zero() {
        QLog::NegInf
    } else {
        QLog::Fin(qi(-vp(q, p)))
    }
}

/// `log_p |n!| = -v_p(n!)`, by Legendre's digit-sum formula.
pub fn val_factorial(n: u64, p: Prime) -> QLog {
    let pp = p.get();
    let mut digits = 0u64;
    let mut m = n;
    while m > 0 {
        digits += m % pp;
        m /= pp;
    }
    let v = (n - digits) / (pp - 1);
    QLog::Fin(-Q::from_integer(BigInt::from(v)))
}

/// The exact finite rational `-v_p(n!)`.
pub fn val_factorial_q(n: u64, p: Prime) -> Q {
    val_factorial(n, p).expect_fin().clone()
}

/// `log_p omega = -1/(p-1)`.
pub fn omega_log(p: Prime) -> QLog {
    QLog::Fin(omega_q(p))
}

/// `log_p omega` as a bare rational.
pub fn omega_q(p: Prime) -> Q {
    Q::new(BigInt::from(-1), BigInt::from(p.get() - 1))
}

/// The canonical representative of `z` modulo `p^m`: the truncation of the
/// p-adic expansion of `z` to the digits of index `< m`.
///
/// Two rationals have the same truncation iff `v_p(z - z') >= m`.
pub fn p_adic_truncate(z: &Q, m: i64, p: Prime) -> Q {
    if z.is_zero() {
        return Q::zero();
    }
    let v = vp(z, p);
    if v >= m {
        return Q::zero();
    }
    let pb = p.big();
    let unit = z / pow_q(&Q::from_integer(pb.clone()), v);
    let k = (m - v) as u32;
    let modulus = num_traits::pow(pb.clone(), k as usize);
    let phi = num_traits::pow(pb.clone(), (k - 1) as usize) * (&pb - BigInt::one());
    let dinv = unit.denom().modpow(&(phi - BigInt::one()), &modulus);
    let t = (unit.numer() * dinv).mod_floor(&modulus);
    Q::from_integer(t) * pow_q(&Q::from_integer(pb), v)
}

/// Integer power of a rational, negative exponents allowed.
pub fn pow_q(x: &Q, e: i64) -> Q {
    if e >= 0 {
        num_traits::pow(x.clone(), e as usize)
    } else {
        num_traits::pow(x.recip(), (-e) as usize)
    }
}

/// Smallest integer `>= x`.
pub fn ceil_q(x: &Q) -> i64 {
    x.ceil().to_integer().to_i64().expect("exponent out of range")
}

/// Largest integer `<= x`.
pub fn floor_q(x: &Q) -> i64 {
    x.floor().to_integer().to_i64().expect("exponent out of range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(n: u64) -> Prime {
        Prime::new(n).unwrap()
    }

    #[test]
    fn val_rational_examples() {
        assert_eq!(val_rational(&q(1, 3), p(3)).unwrap(), QLog::from_int(1));
        assert_eq!(val_rational(&qi(12), p(2)).unwrap(), QLog::from_int(-2));
        assert_eq!(val_rational(&q(5, 7), p(3)).unwrap(), QLog::from_int(0));
        assert_eq!(val_rational(&qi(0), p(3)), Err(Error::ZeroValuation));
    }

    #[test]
    fn val_factorial_examples() {
        assert_eq!(val_factorial(4, p(2)), QLog::from_int(-3));
        assert_eq!(val_factorial(4, p(5)), QLog::from_int(0));
        assert_eq!(val_factorial(9, p(3)), QLog::from_int(-4));
        assert_eq!(val_factorial(0, p(7)), QLog::from_int(0));
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega_log(p(2)), QLog::from_int(-1));
        assert_eq!(omega_log(p(3)), QLog::Fin(q(-1, 2)));
        assert_eq!(omega_log(p(5)), QLog::Fin(q(-1, 4)));
    }

    #[test]
    fn primality() {
        assert!(Prime::new(1).is_err());
        assert!(Prime::new(9).is_err());
        assert!(Prime::new(97).is_ok());
    }

    #[test]
    fn factorial_matches_enumeration() {
        for pr in [2u64, 3, 5, 7] {
            let pr = p(pr);
            let mut acc = QLog::zero();
            for n in 1..=200u64 {
                acc = &acc + &val_rational(&qi(n as i64), pr).unwrap();
                assert_eq!(val_factorial(n, pr), acc, "n = {n}");
            }
        }
    }

    #[test]
    fn factorial_growth_bound() {
        for pr in [2u64, 3, 5] {
            let pr = p(pr);
            let om = approx(&omega_q(pr));
            for n in pr.get()..400 {
                let v = approx(val_factorial(n, pr).expect_fin()) / n as f64;
                let bound = 2.0 * (n as f64).ln() / (pr.get() as f64).ln() / n as f64;
                assert!((v - om).abs() < bound, "p = {pr}, n = {n}");
            }
        }
    }

    #[test]
    fn sentinels() {
        let a = QLog::Fin(q(1, 2));
        assert_eq!(&QLog::NegInf + &a, QLog::NegInf);
        assert_eq!(&QLog::NegInf + &QLog::PosInf, QLog::NegInf);
        assert_eq!(&QLog::PosInf + &a, QLog::PosInf);
        assert!(QLog::NegInf < a && a < QLog::PosInf);
        assert_eq!(QLog::NegInf.scale(&qi(0)), QLog::zero());
        assert_eq!(QLog::NegInf.scale(&qi(-2)), QLog::PosInf);
    }

    #[test]
    fn string_round_trip() {
        for s in ["0", "-3", "7/2", "-1/9", "-inf", "+inf"] {
            let x: QLog = s.parse().unwrap();
            assert_eq!(x.to_string(), s);
        }
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("x").is_err());
    }

    #[test]
    fn truncation() {
        let pr = p(3);
        // 5 = 2 + 1*3 in base 3
        assert_eq!(p_adic_truncate(&qi(5), 1, pr), qi(2));
        assert_eq!(p_adic_truncate(&qi(5), 2, pr), qi(5));
        assert_eq!(p_adic_truncate(&qi(9), 2, pr), qi(0));
        // 1/2 = 2 + 1*3 + 1*9 + ... in Z_3
        assert_eq!(p_adic_truncate(&q(1, 2), 1, pr), qi(2));
        assert_eq!(p_adic_truncate(&q(1, 2), 3, pr), qi(14));
        assert_eq!(p_adic_truncate(&q(1, 3), 0, pr), q(1, 3));
    }

    proptest! {
        #[test]
        fn valuation_is_homomorphism(a in 1i64..10_000, b in 1i64..10_000, c in 1i64..10_000, d in 1i64..10_000, pr in prop::sample::select(vec![2u64, 3, 5, 7])) {
            let pr = p(pr);
            let x = q(a, b);
            let y = q(c, d);
            let lhs = val_rational(&(&x * &y), pr).unwrap();
            let rhs = &val_rational(&x, pr).unwrap() + &val_rational(&y, pr).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn truncation_is_congruent(a in -10_000i64..10_000, b in 1i64..1000, m in -3i64..6, pr in prop::sample::select(vec![2u64, 3, 5])) {
            let pr = p(pr);
            let z = q(a, b);
            let t = p_adic_truncate(&z, m, pr);
            let diff = &z - &t;
            prop_assert!(diff.is_zero() || vp(&diff, pr) >= m);
            prop_assert_eq!(p_adic_truncate(&t, m, pr), t);
        }
    }
}
