//! Continuous piecewise-affine functions of the log-radius.
//!
//! A [`Paf`] lives on `[a, b]` with `b` finite and `a` finite or `-inf`. It
//! is stored as its knots `(L, value)`; on an infinite left end the leftmost
//! piece extends to `-inf` with slope `tail_slope`.

use std::cmp::Ordering;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::line::{DirectionId, Point};
use crate::scalars::{fmt_q, q_serde, qi, QLog, Q};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Knot {
    #[serde(with = "q_serde")]
    pub at: Q,
    #[serde(with = "q_serde")]
    pub value: Q,
}

/// A maximal affine piece of a [`Paf`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub lo: QLog,
    pub hi: Q,
    pub slope: Q,
    pub value_hi: Q,
}

impl Piece {
    pub fn value_at(&self, l: &Q) -> Q {
        &self.value_hi + &self.slope * (l - &self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Min,
    Max,
}

/// A continuous piecewise-affine function with exact rational breakpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paf {
    lo: QLog,
    knots: Vec<Knot>,
    #[serde(with = "q_serde")]
    tail_slope: Q,
}

impl Paf {
    /// Builds a function from its knots; collinear knots are removed.
    pub fn from_knots(lo: QLog, knots: Vec<(Q, Q)>, tail_slope: Q) -> Result<Paf> {
        if knots.is_empty() {
            return Err(Error::Precondition("a piecewise function needs a knot".into()));
        }
        if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Precondition("knots must be strictly increasing".into()));
        }
        match &lo {
            QLog::Fin(a) if *a != knots[0].0 => {
                return Err(Error::Precondition("first knot must sit at a finite left end".into()))
            }
            QLog::PosInf => return Err(Error::Precondition("left end cannot be +inf".into())),
            _ => {}
        }
        let tail_slope = if lo.is_finite() { Q::zero() } else { tail_slope };
        let mut f = Paf { lo, knots: knots.into_iter().map(|(at, value)| Knot { at, value }).collect(), tail_slope };
        f.normalize();
        Ok(f)
    }

    pub fn constant(lo: QLog, hi: Q, v: Q) -> Paf {
        Paf::affine(lo, hi, Q::zero(), v)
    }

    /// The affine function with the given slope and value at `hi`.
    pub fn affine(lo: QLog, hi: Q, slope: Q, value_hi: Q) -> Paf {
        match &lo {
            QLog::Fin(a) if *a != hi => {
                let va = &value_hi - &slope * (&hi - a);
                Paf::from_knots(lo.clone(), vec![(a.clone(), va), (hi, value_hi)], Q::zero()).unwrap()
            }
            QLog::Fin(_) => Paf::from_knots(lo.clone(), vec![(hi, value_hi)], Q::zero()).unwrap(),
            _ => Paf::from_knots(QLog::NegInf, vec![(hi, value_hi)], slope).unwrap(),
        }
    }

    /// `L -> L`.
    pub fn identity(lo: QLog, hi: Q) -> Paf {
        Paf::affine(lo, hi.clone(), qi(1), hi)
    }

    pub fn lo(&self) -> &QLog {
        &self.lo
    }

    pub fn hi(&self) -> &Q {
        &self.knots.last().unwrap().at
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn tail_slope(&self) -> &Q {
        &self.tail_slope
    }

    /// Interior breakpoints.
    pub fn breakpoints(&self) -> Vec<Q> {
        let n = self.knots.len();
        let start = if self.lo.is_finite() { 1 } else { 0 };
        if n < 2 {
            return Vec::new();
        }
        self.knots[start..n - 1].iter().map(|k| k.at.clone()).collect()
    }

    /// The maximal affine pieces, left to right.
    pub fn pieces(&self) -> Vec<Piece> {
        let mut out = Vec::new();
        if !self.lo.is_finite() {
            out.push(Piece {
                lo: QLog::NegInf,
                hi: self.knots[0].at.clone(),
                slope: self.tail_slope.clone(),
                value_hi: self.knots[0].value.clone(),
            });
        }
        for w in self.knots.windows(2) {
            out.push(Piece {
                lo: QLog::Fin(w[0].at.clone()),
                hi: w[1].at.clone(),
                slope: (&w[1].value - &w[0].value) / (&w[1].at - &w[0].at),
                value_hi: w[1].value.clone(),
            });
        }
        out
    }

    /// Points strictly inside a piece where `f(L) = a L + b`; pieces parallel
    /// to the line are skipped.
    pub fn line_crossings(&self, a: &Q, b: &Q) -> Vec<Q> {
        let mut out = Vec::new();
        for pc in self.pieces() {
            let ds = &pc.slope - a;
            if ds.is_zero() {
                continue;
            }
            // pc.value_hi + pc.slope (L - hi) = a L + b
            let x = (b - &pc.value_hi + &pc.slope * &pc.hi) / &ds;
            let inside = match &pc.lo {
                QLog::Fin(l) => x > *l,
                _ => true,
            };
            if inside && x < pc.hi {
                out.push(x);
            }
        }
        out
    }

    /// Slopes of the pieces, left to right.
    pub fn slopes(&self) -> Vec<Q> {
        self.pieces().into_iter().map(|p| p.slope).collect()
    }

    pub fn is_constant(&self) -> bool {
        self.slopes().iter().all(Zero::is_zero)
    }

    /// Whether `l` lies in the domain.
    pub fn contains(&self, l: &QLog) -> bool {
        *l >= self.lo && *l <= QLog::Fin(self.hi().clone())
    }

    fn check(&self, l: &QLog) -> Result<()> {
        if self.contains(l) {
            Ok(())
        } else {
            Err(Error::OutOfRange { lo: self.lo.to_string(), hi: fmt_q(self.hi()), at: l.to_string() })
        }
    }

    /// Value at a point of the domain; `-inf` is allowed on an infinite left end.
    pub fn eval(&self, l: &QLog) -> Result<QLog> {
        self.check(l)?;
        match l {
            QLog::Fin(x) => Ok(QLog::Fin(self.eval_fin(x))),
            _ => Ok(match self.tail_slope.cmp(&Q::zero()) {
                Ordering::Equal => QLog::Fin(self.knots[0].value.clone()),
                Ordering::Greater => QLog::NegInf,
                Ordering::Less => QLog::PosInf,
            }),
        }
    }

    /// Value at a finite point, assumed inside the domain.
    pub fn eval_fin(&self, x: &Q) -> Q {
        let k = &self.knots;
        if *x <= k[0].at {
            return &k[0].value + &self.tail_slope * (x - &k[0].at);
        }
        let i = k.partition_point(|kn| kn.at < *x);
        if i >= k.len() {
            return k.last().unwrap().value.clone();
        }
        if k[i].at == *x {
            return k[i].value.clone();
        }
        let (a, b) = (&k[i - 1], &k[i]);
        &a.value + (&b.value - &a.value) * (x - &a.at) / (&b.at - &a.at)
    }

    /// One-sided slope at `l`; `None` where that side leaves the domain.
    pub fn slope_at(&self, l: &QLog, side: Side) -> Result<Option<Q>> {
        self.check(l)?;
        let x = match l {
            QLog::Fin(x) => x,
            _ => return Ok(if side == Side::Right { Some(self.tail_slope.clone()) } else { None }),
        };
        if side == Side::Left && QLog::Fin(x.clone()) == self.lo {
            return Ok(None);
        }
        if side == Side::Right && x == self.hi() {
            return Ok(None);
        }
        for pc in self.pieces() {
            let inside = match side {
                Side::Left => QLog::Fin(x.clone()) > pc.lo && *x <= pc.hi,
                Side::Right => QLog::Fin(x.clone()) >= pc.lo && *x < pc.hi,
            };
            if inside {
                return Ok(Some(pc.slope));
            }
        }
        Ok(None)
    }

    fn normalize(&mut self) {
        let mut out: Vec<Knot> = Vec::with_capacity(self.knots.len());
        for k in self.knots.drain(..) {
            if out.len() >= 2 {
                let a = &out[out.len() - 2];
                let b = &out[out.len() - 1];
                let s1 = (&b.value - &a.value) / (&b.at - &a.at);
                let s2 = (&k.value - &b.value) / (&k.at - &b.at);
                if s1 == s2 {
                    out.pop();
                }
            }
            out.push(k);
        }
        if !self.lo.is_finite() && out.len() >= 2 {
            let s = (&out[1].value - &out[0].value) / (&out[1].at - &out[0].at);
            if s == self.tail_slope {
                out.remove(0);
            }
        }
        self.knots = out;
    }

    fn same_domain(&self, other: &Paf) -> Result<()> {
        if self.lo != other.lo || self.hi() != other.hi() {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    /// Pointwise `op(self, other)`; min and max insert exact crossing points.
    pub fn combine(&self, other: &Paf, op: Op) -> Result<Paf> {
        self.same_domain(other)?;
        let mut xs: Vec<Q> = self.knots.iter().chain(other.knots.iter()).map(|k| k.at.clone()).collect();
        xs.sort();
        xs.dedup();
        if op != Op::Add {
            let mut extra = Vec::new();
            for w in xs.windows(2) {
                let d0 = self.eval_fin(&w[0]) - other.eval_fin(&w[0]);
                let d1 = self.eval_fin(&w[1]) - other.eval_fin(&w[1]);
                if (d0.is_positive() && d1.is_negative()) || (d0.is_negative() && d1.is_positive()) {
                    extra.push(&w[0] + &d0 / (&d0 - &d1) * (&w[1] - &w[0]));
                }
            }
            if !self.lo.is_finite() {
                let x0 = &xs[0];
                let ds = &self.tail_slope - &other.tail_slope;
                if !ds.is_zero() {
                    let d0 = self.eval_fin(x0) - other.eval_fin(x0);
                    let cross = x0 - &d0 / &ds;
                    if cross < *x0 {
                        extra.push(cross);
                    }
                }
            }
            xs.extend(extra);
            xs.sort();
            xs.dedup();
        }
        let pick = |a: Q, b: Q| match op {
            Op::Add => a + b,
            Op::Min => std::cmp::min(a, b),
            Op::Max => std::cmp::max(a, b),
        };
        let knots: Vec<(Q, Q)> = xs.iter().map(|x| (x.clone(), pick(self.eval_fin(x), other.eval_fin(x)))).collect();
        let tail = if self.lo.is_finite() {
            Q::zero()
        } else {
            let probe = &xs[0] - qi(1);
            let (a, b) = (self.eval_fin(&probe), other.eval_fin(&probe));
            match op {
                Op::Add => &self.tail_slope + &other.tail_slope,
                Op::Min if a <= b => self.tail_slope.clone(),
                Op::Max if a >= b => self.tail_slope.clone(),
                _ => other.tail_slope.clone(),
            }
        };
        Paf::from_knots(self.lo.clone(), knots, tail)
    }

    pub fn add(&self, other: &Paf) -> Result<Paf> {
        self.combine(other, Op::Add)
    }

    pub fn min(&self, other: &Paf) -> Result<Paf> {
        self.combine(other, Op::Min)
    }

    pub fn max(&self, other: &Paf) -> Result<Paf> {
        self.combine(other, Op::Max)
    }

    pub fn sub(&self, other: &Paf) -> Result<Paf> {
        self.add(&other.scale(&qi(-1)))
    }

    /// `c * f`.
    pub fn scale(&self, c: &Q) -> Paf {
        let knots = self.knots.iter().map(|k| (k.at.clone(), &k.value * c)).collect();
        Paf::from_knots(self.lo.clone(), knots, &self.tail_slope * c).unwrap()
    }

    /// `f + c`.
    pub fn add_const(&self, c: &Q) -> Paf {
        let knots = self.knots.iter().map(|k| (k.at.clone(), &k.value + c)).collect();
        Paf::from_knots(self.lo.clone(), knots, self.tail_slope.clone()).unwrap()
    }

    /// `f(L) + a*L + b`.
    pub fn add_affine(&self, a: &Q, b: &Q) -> Paf {
        let knots = self.knots.iter().map(|k| (k.at.clone(), &k.value + a * &k.at + b)).collect();
        Paf::from_knots(self.lo.clone(), knots, &self.tail_slope + a).unwrap()
    }

    /// `L -> f(k L)` for `k > 0`, on the domain divided by `k`.
    pub fn rescale_arg(&self, k: &Q) -> Paf {
        assert!(k.is_positive());
        let lo = match &self.lo {
            QLog::Fin(a) => QLog::Fin(a / k),
            other => other.clone(),
        };
        let knots = self.knots.iter().map(|kn| (&kn.at / k, kn.value.clone())).collect();
        Paf::from_knots(lo, knots, &self.tail_slope * k).unwrap()
    }

    /// Restriction to `[a, b]`, a sub-interval of the domain.
    pub fn restrict(&self, a: &QLog, b: &Q) -> Result<Paf> {
        self.check(a)?;
        self.check(&QLog::Fin(b.clone()))?;
        if *a > QLog::Fin(b.clone()) {
            return Err(Error::Precondition("empty restriction".into()));
        }
        let mut knots: Vec<(Q, Q)> = Vec::new();
        if let QLog::Fin(x) = a {
            knots.push((x.clone(), self.eval_fin(x)));
        }
        for k in &self.knots {
            if QLog::Fin(k.at.clone()) > *a && k.at < *b {
                knots.push((k.at.clone(), k.value.clone()));
            }
        }
        if knots.last().map(|k| &k.0) != Some(b) {
            knots.push((b.clone(), self.eval_fin(b)));
        }
        Paf::from_knots(a.clone(), knots, self.tail_slope.clone())
    }

    /// Joins functions on consecutive intervals; values must match at the
    /// junctions.
    pub fn concat(parts: &[Paf]) -> Result<Paf> {
        let first = parts.first().ok_or_else(|| Error::Precondition("nothing to join".into()))?;
        let mut knots: Vec<(Q, Q)> = first.knots.iter().map(|k| (k.at.clone(), k.value.clone())).collect();
        for f in &parts[1..] {
            let last = knots.last().unwrap().clone();
            if f.lo != QLog::Fin(last.0.clone()) {
                return Err(Error::DomainMismatch);
            }
            if f.knots[0].value != last.1 {
                return Err(Error::Precondition(format!("discontinuity at L = {}", fmt_q(&last.0))));
            }
            knots.extend(f.knots[1..].iter().map(|k| (k.at.clone(), k.value.clone())));
        }
        Paf::from_knots(first.lo.clone(), knots, first.tail_slope.clone())
    }

    /// Slopes non-increasing on the whole domain.
    pub fn is_concave(&self) -> bool {
        self.slopes().windows(2).all(|w| w[0] >= w[1])
    }

    /// Slopes non-increasing on `[l, r]`.
    pub fn is_concave_on(&self, l: &QLog, r: &Q) -> Result<bool> {
        Ok(self.restrict(l, r)?.is_concave())
    }

    /// End of the initial stretch on which `f(L) = L`; the left end if there
    /// is none. Requires `f(a) >= a`.
    pub fn diagonal_crossing(&self) -> Result<QLog> {
        let bad = || Error::Precondition("diagonal_crossing requires f(a) >= a".into());
        let k0 = &self.knots[0];
        let start = match &self.lo {
            QLog::Fin(a) => match k0.value.cmp(a) {
                Ordering::Greater => return Ok(self.lo.clone()),
                Ordering::Less => return Err(bad()),
                Ordering::Equal => 0,
            },
            _ => {
                let one = qi(1);
                match self.tail_slope.cmp(&one) {
                    Ordering::Less => return Ok(QLog::NegInf),
                    Ordering::Greater => return Err(bad()),
                    Ordering::Equal => match k0.value.cmp(&k0.at) {
                        Ordering::Greater => return Ok(QLog::NegInf),
                        Ordering::Less => return Err(bad()),
                        Ordering::Equal => 0,
                    },
                }
            }
        };
        let mut i = start;
        while i + 1 < self.knots.len() && self.knots[i + 1].value == self.knots[i + 1].at {
            i += 1;
        }
        Ok(QLog::Fin(self.knots[i].at.clone()))
    }

    /// Smallest nonzero slope magnitude, if any piece is not flat.
    pub fn min_nonzero_abs_slope(&self) -> Option<Q> {
        self.slopes().into_iter().filter(|s| !s.is_zero()).map(|s| s.abs()).min()
    }

    /// CSV rows `L,value,slope_right` at both ends and every breakpoint.
    pub fn csv_rows(&self) -> Vec<[String; 3]> {
        let mut rows = Vec::new();
        if !self.lo.is_finite() {
            let v = self.eval(&QLog::NegInf).unwrap();
            rows.push(["-inf".to_string(), v.to_string(), fmt_q(&self.tail_slope)]);
        }
        let pcs = self.pieces();
        for (i, k) in self.knots.iter().enumerate() {
            let slope = pcs
                .iter()
                .find(|p| QLog::Fin(k.at.clone()) >= p.lo && k.at < p.hi)
                .map(|p| fmt_q(&p.slope))
                .unwrap_or_default();
            let _ = i;
            rows.push([fmt_q(&k.at), fmt_q(&k.value), slope]);
        }
        rows
    }

    /// CSV text with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("L,value,slope_right\n");
        for r in self.csv_rows() {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Outward slopes of a function at a point, one per direction; unlisted
/// directions have slope zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSlopes {
    pub at: Point,
    pub entries: Vec<(DirectionId, SlopeQ)>,
}

/// A rational slope serialized as a string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlopeQ(#[serde(with = "q_serde")] pub Q);

impl BranchSlopes {
    pub fn new(at: Point) -> Self {
        BranchSlopes { at, entries: Vec::new() }
    }

    pub fn push(&mut self, dir: DirectionId, slope: Q) {
        self.entries.push((dir, SlopeQ(slope)));
    }

    pub fn slope(&self, dir: &DirectionId) -> Q {
        self.entries.iter().filter(|(d, _)| d == dir).map(|(_, s)| s.0.clone()).sum()
    }

    pub fn slopes(&self) -> impl Iterator<Item = &Q> {
        self.entries.iter().map(|(_, s)| &s.0)
    }
}

/// `dd^c F(x)`: the sum of the outward slopes (all multiplicities are 1).
pub fn laplacian(bs: &BranchSlopes) -> Q {
    bs.slopes().sum()
}
