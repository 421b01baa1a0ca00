//! Polynomials and rational functions over `Q`, with Gauss valuations at
//! points of the line.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::line::Point;
use crate::piecewise::Paf;
use crate::scalars::{fmt_q, log_abs, parse_q, qi, Prime, QLog, Q};

/// A polynomial in `T`, coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    coeffs: Vec<Q>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Q>) -> Poly {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Poly {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Q) -> Poly {
        Poly::new(vec![c])
    }

    /// The monomial `c T^n`.
    pub fn monomial(c: Q, n: usize) -> Poly {
        let mut v = vec![Q::zero(); n + 1];
        v[n] = c;
        Poly::new(v)
    }

    /// `T - z`.
    pub fn linear(z: &Q) -> Poly {
        Poly::new(vec![-z, Q::one()])
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> Q {
        self.coeffs.get(n).cloned().unwrap_or_else(Q::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Q {
        self.coeffs.last().cloned().unwrap_or_else(Q::zero)
    }

    /// Order of vanishing at `T = 0`.
    pub fn low_degree(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn scale(&self, c: &Q) -> Poly {
        Poly::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Multiplication by `T^k`.
    pub fn shift_up(&self, k: usize) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![Q::zero(); k];
        v.extend(self.coeffs.iter().cloned());
        Poly { coeffs: v }
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(self.coeffs.iter().enumerate().skip(1).map(|(n, a)| a * qi(n as i64)).collect())
    }

    pub fn eval(&self, t: &Q) -> Q {
        self.coeffs.iter().rev().fold(Q::zero(), |acc, a| acc * t + a)
    }

    /// Coefficients of `f` in powers of `T - c`.
    pub fn taylor_shift(&self, c: &Q) -> Poly {
        if c.is_zero() {
            return self.clone();
        }
        // Horner in the variable U = T - c, with T = U + c.
        let u_plus_c = Poly::new(vec![c.clone(), Q::one()]);
        self.coeffs.iter().rev().fold(Poly::zero(), |acc, a| &(&acc * &u_plus_c) + &Poly::constant(a.clone()))
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut out = Poly::constant(Q::one());
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    /// Euclidean division.
    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "division by the zero polynomial");
        let dd = d.degree().unwrap();
        let lead = d.leading();
        let mut r = self.coeffs.clone();
        if r.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut qc = vec![Q::zero(); r.len() - dd];
        for k in (0..qc.len()).rev() {
            let c = &r[k + dd] / &lead;
            if !c.is_zero() {
                for (j, b) in d.coeffs.iter().enumerate() {
                    r[k + j] -= &c * b;
                }
            }
            qc[k] = c;
        }
        (Poly::new(qc), Poly::new(r))
    }

    /// Monic greatest common divisor; zero when both are zero.
    pub fn gcd(&self, o: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r;
        }
        if a.is_zero() {
            return a;
        }
        let lead = a.leading();
        a.scale(&lead.recip())
    }

    pub fn lcm(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let g = self.gcd(o);
        let l = (self * o).div_exact(&g).unwrap();
        let lead = l.leading();
        l.scale(&lead.recip())
    }

    /// `c T^m` with a single nonzero coefficient.
    pub fn as_monomial(&self) -> Option<(Q, usize)> {
        let k = self.low_degree()?;
        (k == self.degree().unwrap()).then(|| (self.coeffs[k].clone(), k))
    }

    /// Exact quotient; `None` when `d` does not divide `self`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        let (q, r) = self.div_rem(d);
        r.is_zero().then_some(q)
    }

    /// `max_n (log|a_n| + n L)` with `a_n` the Taylor coefficients at the
    /// center of `x`; `-inf` for the zero polynomial.
    pub fn gauss_val(&self, x: &Point, p: Prime) -> QLog {
        if self.is_zero() {
            return QLog::NegInf;
        }
        let l = match &x.log_radius {
            QLog::Fin(l) => l.clone(),
            _ => return log_abs(&self.eval(&x.center), p),
        };
        let a = self.taylor_shift(&x.center);
        let mut best = QLog::NegInf;
        for (n, c) in a.coeffs.iter().enumerate() {
            if !c.is_zero() {
                best = best.max(&log_abs(c, p) + &(&l * qi(n as i64)));
            }
        }
        best
    }

    /// `L -> gauss_val(f, x_{c,L})` on `[lo, hi]`: the upper envelope of the
    /// lines `log|a_n| + n L`.
    pub fn gauss_profile(&self, c: &Q, lo: &QLog, hi: &Q, p: Prime) -> Result<Paf> {
        if self.is_zero() {
            return Err(Error::Precondition("profile of the zero polynomial".into()));
        }
        let a = self.taylor_shift(c);
        let mut env: Option<Paf> = None;
        for (n, cn) in a.coeffs.iter().enumerate() {
            if cn.is_zero() {
                continue;
            }
            let n = qi(n as i64);
            let v_hi = log_abs(cn, p).expect_fin() + &n * hi;
            let line = Paf::affine(lo.clone(), hi.clone(), n, v_hi);
            env = Some(match env {
                None => line,
                Some(e) => e.max(&line)?,
            });
        }
        Ok(env.unwrap())
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) - o.coeff(i)).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![Q::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly::new(v)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|a| -a).collect() }
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (n, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            let body = match n {
                0 => fmt_q(&a),
                _ => {
                    let mono = if n == 1 { "T".to_string() } else { format!("T^{n}") };
                    if a.is_one() {
                        mono
                    } else {
                        format!("{}{}", fmt_q(&a), mono)
                    }
                }
            };
            match (first, neg) {
                (true, true) => write!(f, "-{body}")?,
                (true, false) => f.write_str(&body)?,
                (false, true) => write!(f, " - {body}")?,
                (false, false) => write!(f, " + {body}")?,
            }
            first = false;
        }
        Ok(())
    }
}

impl FromStr for Poly {
    type Err = Error;

    /// Parses sums of terms `c`, `cT`, `cT^n` (optionally `c*T^n`).
    fn from_str(s: &str) -> Result<Poly> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(Error::Parse("empty polynomial".into()));
        }
        let mut terms: Vec<(bool, String)> = Vec::new();
        let mut cur = String::new();
        let mut neg = false;
        for (i, ch) in s.char_indices() {
            if (ch == '+' || ch == '-') && !(i > 0 && s[..i].ends_with('^')) {
                if i > 0 {
                    terms.push((neg, std::mem::take(&mut cur)));
                }
                neg = ch == '-';
            } else {
                cur.push(ch);
            }
        }
        terms.push((neg, cur));
        let mut out = Poly::zero();
        for (neg, t) in terms {
            if t.is_empty() {
                return Err(Error::Parse(format!("dangling sign in {s:?}")));
            }
            let (coef, deg) = match t.find(['T', 't']) {
                None => (parse_q(&t)?, 0usize),
                Some(k) => {
                    let c = t[..k].trim_end_matches('*');
                    let c = if c.is_empty() { Q::one() } else { parse_q(c)? };
                    let rest = &t[k + 1..];
                    let d = if rest.is_empty() {
                        1
                    } else {
                        rest.strip_prefix('^')
                            .and_then(|e| e.parse::<usize>().ok())
                            .ok_or_else(|| Error::Parse(format!("bad exponent in {t:?}")))?
                    };
                    (c, d)
                }
            };
            let coef = if neg { -coef } else { coef };
            out = &out + &Poly::monomial(coef, deg);
        }
        Ok(out)
    }
}

impl Serialize for Poly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Poly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Poly, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `constant * prod (T - z_j)^{m_j}` with distinct rational `z_j` and
/// nonzero `m_j`. The zero function has constant 0 and no factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactoredRatFun {
    constant: Q,
    factors: Vec<(Q, i64)>,
}

impl FactoredRatFun {
    pub fn new(constant: Q, factors: Vec<(Q, i64)>) -> Result<Self> {
        if constant.is_zero() {
            return Ok(FactoredRatFun::zero());
        }
        for (i, (z, m)) in factors.iter().enumerate() {
            if *m == 0 {
                return Err(Error::Parse(format!("zero multiplicity for root {}", fmt_q(z))));
            }
            if factors[..i].iter().any(|(w, _)| w == z) {
                return Err(Error::Parse(format!("repeated root {}", fmt_q(z))));
            }
        }
        let mut factors = factors;
        factors.sort();
        Ok(FactoredRatFun { constant, factors })
    }

    pub fn zero() -> Self {
        FactoredRatFun { constant: Q::zero(), factors: Vec::new() }
    }

    pub fn constant(c: Q) -> Self {
        FactoredRatFun::new(c, Vec::new()).unwrap()
    }

    pub fn one() -> Self {
        FactoredRatFun::constant(Q::one())
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero()
    }

    pub fn leading_constant(&self) -> &Q {
        &self.constant
    }

    pub fn factors(&self) -> &[(Q, i64)] {
        &self.factors
    }

    /// Zeros and poles.
    pub fn roots(&self) -> impl Iterator<Item = &Q> {
        self.factors.iter().map(|(z, _)| z)
    }

    pub fn mul(&self, o: &FactoredRatFun) -> FactoredRatFun {
        if self.is_zero() || o.is_zero() {
            return FactoredRatFun::zero();
        }
        let mut f = self.factors.clone();
        for (z, m) in &o.factors {
            match f.iter_mut().find(|(w, _)| w == z) {
                Some(e) => e.1 += m,
                None => f.push((z.clone(), *m)),
            }
        }
        f.retain(|(_, m)| *m != 0);
        FactoredRatFun::new(&self.constant * &o.constant, f).unwrap()
    }

    pub fn pow(&self, e: i64) -> Result<FactoredRatFun> {
        if self.is_zero() {
            return if e > 0 { Ok(FactoredRatFun::zero()) } else { Err(Error::Pole("0".into())) };
        }
        let c = crate::scalars::pow_q(&self.constant, e);
        let f = if e == 0 { Vec::new() } else { self.factors.iter().map(|(z, m)| (z.clone(), m * e)).collect() };
        FactoredRatFun::new(c, f)
    }

    /// The function `f(T + c)`.
    pub fn translate(&self, c: &Q) -> FactoredRatFun {
        let f = self.factors.iter().map(|(z, m)| (z - c, *m)).collect();
        FactoredRatFun::new(self.constant.clone(), f).unwrap()
    }

    /// Numerator and denominator expanded.
    pub fn to_num_den(&self) -> (Poly, Poly) {
        let mut num = Poly::constant(self.constant.clone());
        let mut den = Poly::constant(Q::one());
        for (z, m) in &self.factors {
            let lin = Poly::linear(z).pow(m.unsigned_abs() as u32);
            if *m > 0 {
                num = &num * &lin;
            } else {
                den = &den * &lin;
            }
        }
        (num, den)
    }

    pub fn eval(&self, t: &Q) -> Result<Q> {
        let mut v = self.constant.clone();
        for (z, m) in &self.factors {
            let d = t - z;
            if d.is_zero() {
                if *m < 0 {
                    return Err(Error::Pole(fmt_q(t)));
                }
                return Ok(Q::zero());
            }
            v *= crate::scalars::pow_q(&d, *m);
        }
        Ok(v)
    }

    /// `log|constant| + sum m_j max(log|c - z_j|, L)`. At a type-1 zero the
    /// value is `-inf`, at a type-1 pole `+inf`.
    pub fn gauss_val(&self, x: &Point, p: Prime) -> QLog {
        if self.is_zero() {
            return QLog::NegInf;
        }
        let mut fin = log_abs(&self.constant, p).expect_fin().clone();
        for (z, m) in &self.factors {
            match log_abs(&(&x.center - z), p).max(x.log_radius.clone()) {
                QLog::Fin(b) => fin += b * qi(*m),
                _ => return if *m > 0 { QLog::NegInf } else { QLog::PosInf },
            }
        }
        QLog::Fin(fin)
    }

    /// `L -> gauss_val(f, x_{c,L})` on `[lo, hi]`.
    pub fn gauss_profile(&self, c: &Q, lo: &QLog, hi: &Q, p: Prime) -> Result<Paf> {
        if self.is_zero() {
            return Err(Error::Precondition("profile of the zero function".into()));
        }
        let base = log_abs(&self.constant, p).expect_fin().clone();
        let mut acc = Paf::constant(lo.clone(), hi.clone(), base);
        for (z, m) in &self.factors {
            let id = Paf::identity(lo.clone(), hi.clone());
            let term = match log_abs(&(c - z), p) {
                QLog::Fin(d) => id.max(&Paf::constant(lo.clone(), hi.clone(), d))?,
                _ => id,
            };
            acc = acc.add(&term.scale(&qi(*m)))?;
        }
        Ok(acc)
    }
}

#[derive(Serialize, Deserialize)]
struct FactoredRepr {
    constant: String,
    #[serde(default)]
    factors: Vec<(String, i64)>,
}

impl Serialize for FactoredRatFun {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FactoredRepr {
            constant: fmt_q(&self.constant),
            factors: self.factors.iter().map(|(z, m)| (fmt_q(z), *m)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FactoredRatFun {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = FactoredRepr::deserialize(d)?;
        let c = parse_q(&r.constant).map_err(D::Error::custom)?;
        let f = r
            .factors
            .into_iter()
            .map(|(z, m)| parse_q(&z).map(|z| (z, m)))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        FactoredRatFun::new(c, f).map_err(D::Error::custom)
    }
}

/// A rational function either in factored form or as a dense quotient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RatFun {
    Factored(FactoredRatFun),
    Dense { num: Poly, den: Poly },
}

impl RatFun {
    pub fn dense(num: Poly, den: Poly) -> Result<RatFun> {
        if den.is_zero() {
            return Err(Error::Precondition("zero denominator".into()));
        }
        Ok(RatFun::Dense { num, den })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RatFun::Factored(f) => f.is_zero(),
            RatFun::Dense { num, .. } => num.is_zero(),
        }
    }

    pub fn to_num_den(&self) -> (Poly, Poly) {
        match self {
            RatFun::Factored(f) => f.to_num_den(),
            RatFun::Dense { num, den } => (num.clone(), den.clone()),
        }
    }

    pub fn is_factored(&self) -> bool {
        matches!(self, RatFun::Factored(_))
    }

    pub fn gauss_val(&self, x: &Point, p: Prime) -> QLog {
        match self {
            RatFun::Factored(f) => f.gauss_val(x, p),
            RatFun::Dense { num, den } => {
                let (a, b) = (num.gauss_val(x, p), den.gauss_val(x, p));
                match (a, b) {
                    (QLog::NegInf, _) => QLog::NegInf,
                    (_, QLog::NegInf) => QLog::PosInf,
                    (a, b) => a - b,
                }
            }
        }
    }

    /// The function `f(T + c)`.
    pub fn translate(&self, c: &Q) -> RatFun {
        match self {
            RatFun::Factored(f) => RatFun::Factored(f.translate(c)),
            RatFun::Dense { num, den } => RatFun::Dense { num: num.taylor_shift(c), den: den.taylor_shift(c) },
        }
    }

    pub fn eval(&self, t: &Q) -> Result<Q> {
        match self {
            RatFun::Factored(f) => f.eval(t),
            RatFun::Dense { num, den } => {
                let d = den.eval(t);
                if d.is_zero() {
                    return Err(Error::Pole(fmt_q(t)));
                }
                Ok(num.eval(t) / d)
            }
        }
    }

    pub fn gauss_profile(&self, c: &Q, lo: &QLog, hi: &Q, p: Prime) -> Result<Paf> {
        match self {
            RatFun::Factored(f) => f.gauss_profile(c, lo, hi, p),
            RatFun::Dense { num, den } => num.gauss_profile(c, lo, hi, p)?.sub(&den.gauss_profile(c, lo, hi, p)?),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RatFunRepr {
    Factored(FactoredRatFun),
    Dense { num: Poly, den: Poly },
}

impl Serialize for RatFun {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RatFun::Factored(f) => f.serialize(s),
            RatFun::Dense { num, den } => RatFunRepr::Dense { num: num.clone(), den: den.clone() }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for RatFun {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RatFunRepr::deserialize(d)? {
            RatFunRepr::Factored(f) => Ok(RatFun::Factored(f)),
            RatFunRepr::Dense { num, den } => RatFun::dense(num, den).map_err(serde::de::Error::custom),
        }
    }
}

impl From<FactoredRatFun> for RatFun {
    fn from(f: FactoredRatFun) -> Self {
        RatFun::Factored(f)
    }
}

/// Clears denominators: returns an integer polynomial and the positive
/// rational `s` with `f = s * g`.
pub fn integer_scaled(f: &Poly) -> (Vec<num_bigint::BigInt>, Q) {
    use num_bigint::BigInt;
    use num_integer::Integer;
    if f.is_zero() {
        return (Vec::new(), Q::one());
    }
    let l = f.coeffs().iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let ints: Vec<BigInt> = f.coeffs().iter().map(|c| (c * Q::from_integer(l.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
    let ints = ints.into_iter().map(|c| c / &g).collect();
    (ints, Q::new(g, l))
}
