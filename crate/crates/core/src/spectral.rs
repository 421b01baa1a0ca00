//! Differential operators and connection matrices: Young's polygon at points
//! and along segments, the Taylor recursion oracle, and cyclic vectors.

// Matrix code indexes several arrays by the same loop variable.
#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::line::Point;
use crate::piecewise::Paf;
use crate::polygon::{np_from_values, NewtonPolygon};
use crate::ratfun::{FactoredRatFun, Poly, RatFun};
use crate::scalars::{omega_q, qi, val_factorial_q, vp_int, Prime, QLog, Q};

/// `L = (d/dT)^r + g_1 (d/dT)^{r-1} + ... + g_r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "OperatorRepr", into = "OperatorRepr")]
pub struct DifferentialOperator {
    coeffs: Vec<RatFun>,
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr {
    rank: usize,
    coeffs: Vec<RatFun>,
}

impl TryFrom<OperatorRepr> for DifferentialOperator {
    type Error = Error;
    fn try_from(r: OperatorRepr) -> Result<Self> {
        if r.coeffs.len() != r.rank {
            return Err(Error::RankMismatch { expected: r.rank, found: r.coeffs.len() });
        }
        DifferentialOperator::new(r.coeffs)
    }
}

impl From<DifferentialOperator> for OperatorRepr {
    fn from(op: DifferentialOperator) -> Self {
        OperatorRepr { rank: op.rank(), coeffs: op.coeffs }
    }
}

impl DifferentialOperator {
    pub fn new(coeffs: Vec<RatFun>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Precondition("an operator needs rank >= 1".into()));
        }
        Ok(DifferentialOperator { coeffs })
    }

    /// Operator with factored coefficients `g_1, ..., g_r`.
    pub fn factored(coeffs: Vec<FactoredRatFun>) -> Result<Self> {
        DifferentialOperator::new(coeffs.into_iter().map(RatFun::Factored).collect())
    }

    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[RatFun] {
        &self.coeffs
    }

    /// `g_i` for `1 <= i <= r`.
    pub fn coeff(&self, i: usize) -> &RatFun {
        &self.coeffs[i - 1]
    }

    pub fn is_factored(&self) -> bool {
        self.coeffs.iter().all(RatFun::is_factored)
    }

    /// Zeros and poles of the factored coefficients, sorted and deduplicated.
    pub fn roots(&self) -> Vec<Q> {
        let mut out: Vec<Q> = self
            .coeffs
            .iter()
            .filter_map(|g| match g {
                RatFun::Factored(f) => Some(f.roots().cloned().collect::<Vec<_>>()),
                RatFun::Dense { .. } => None,
            })
            .flatten()
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// The same operator in the coordinate `T - c`.
    pub fn translate(&self, c: &Q) -> DifferentialOperator {
        DifferentialOperator { coeffs: self.coeffs.iter().map(|g| g.translate(c)).collect() }
    }

    /// Matrix of the system `Y' = G Y` with `Y = (y, y', ..., y^{(r-1)})`.
    pub fn companion(&self) -> ConnectionMatrix {
        let r = self.rank();
        let one = (Poly::constant(Q::one()), Poly::constant(Q::one()));
        let zero = (Poly::zero(), Poly::constant(Q::one()));
        let mut entries = vec![zero; r * r];
        for i in 0..r - 1 {
            entries[i * r + i + 1] = one.clone();
        }
        for j in 0..r {
            let (n, d) = self.coeff(r - j).to_num_den();
            entries[(r - 1) * r + j] = (-&n, d);
        }
        ConnectionMatrix { rank: r, entries }
    }
}

/// `Y' = G Y`, entries stored row-major as numerator/denominator pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct ConnectionMatrix {
    rank: usize,
    entries: Vec<(Poly, Poly)>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rank: usize,
    entries: Vec<(Poly, Poly)>,
}

impl TryFrom<MatrixRepr> for ConnectionMatrix {
    type Error = Error;
    fn try_from(r: MatrixRepr) -> Result<Self> {
        ConnectionMatrix::new(r.rank, r.entries)
    }
}

impl From<ConnectionMatrix> for MatrixRepr {
    fn from(m: ConnectionMatrix) -> Self {
        MatrixRepr { rank: m.rank, entries: m.entries }
    }
}

impl ConnectionMatrix {
    pub fn new(rank: usize, entries: Vec<(Poly, Poly)>) -> Result<Self> {
        if rank == 0 || entries.len() != rank * rank {
            return Err(Error::RankMismatch { expected: rank * rank, found: entries.len() });
        }
        if entries.iter().any(|(_, d)| d.is_zero()) {
            return Err(Error::Precondition("zero denominator in a matrix entry".into()));
        }
        Ok(ConnectionMatrix { rank, entries })
    }

    /// Matrix with polynomial entries.
    pub fn polynomial(rank: usize, entries: Vec<Poly>) -> Result<Self> {
        ConnectionMatrix::new(rank, entries.into_iter().map(|n| (n, Poly::constant(Q::one()))).collect())
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn entry(&self, i: usize, j: usize) -> &(Poly, Poly) {
        &self.entries[i * self.rank + j]
    }

    pub fn entries(&self) -> &[(Poly, Poly)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|(n, _)| n.is_zero())
    }

    /// The same system in the coordinate `T - c`.
    pub fn translate(&self, c: &Q) -> ConnectionMatrix {
        let entries = self.entries.iter().map(|(n, d)| (n.taylor_shift(c), d.taylor_shift(c))).collect();
        ConnectionMatrix { rank: self.rank, entries }
    }

    /// `diag(self, other)`.
    pub fn block_diag(&self, other: &ConnectionMatrix) -> ConnectionMatrix {
        let r = self.rank + other.rank;
        let zero = (Poly::zero(), Poly::constant(Q::one()));
        let mut entries = vec![zero; r * r];
        for i in 0..self.rank {
            for j in 0..self.rank {
                entries[i * r + j] = self.entry(i, j).clone();
            }
        }
        for i in 0..other.rank {
            for j in 0..other.rank {
                entries[(i + self.rank) * r + j + self.rank] = other.entry(i, j).clone();
            }
        }
        ConnectionMatrix { rank: r, entries }
    }

    /// `G = A / D` with a monic common denominator `D`.
    pub fn common_denominator(&self) -> (Vec<Poly>, Poly) {
        let mut d = Poly::constant(Q::one());
        for (_, den) in &self.entries {
            d = d.lcm(den);
        }
        let a = self.entries.iter().map(|(n, den)| n * &d.div_exact(den).unwrap()).collect();
        (a, d)
    }

    /// Each entry as a Laurent polynomial `exponent -> coefficient`.
    pub fn laurent(&self) -> Result<Vec<BTreeMap<i64, Q>>> {
        self.entries
            .iter()
            .map(|(n, d)| {
                let (c, m) = d.as_monomial().ok_or_else(|| Error::NonLaurent(format!("({n})/({d})")))?;
                Ok(n.coeffs()
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| !a.is_zero())
                    .map(|(e, a)| (e as i64 - m as i64, a / &c))
                    .collect())
            })
            .collect()
    }

    pub(crate) fn from_laurent(rank: usize, terms: Vec<BTreeMap<i64, Q>>) -> ConnectionMatrix {
        let entries = terms
            .into_iter()
            .map(|t| {
                let m = t.keys().next().copied().unwrap_or(0).min(0);
                let mut num = vec![Q::zero(); t.keys().last().map_or(0, |&e| (e - m + 1) as usize)];
                for (e, c) in t {
                    num[(e - m) as usize] = c;
                }
                (Poly::new(num), Poly::monomial(Q::one(), (-m) as usize))
            })
            .collect();
        ConnectionMatrix { rank, entries }
    }
}

/// How a spectral radius was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Certification {
    /// Small radius read off the operator polygon.
    Young,
    /// Young-certified after this many Frobenius push-forwards.
    Frobenius { level: u32 },
    /// Not certified; the truncated value equals the generic radius.
    Solvable,
    /// Not certified; truncated value below the generic radius.
    Undetermined,
}

impl Certification {
    pub fn is_certified(self) -> bool {
        matches!(self, Certification::Young | Certification::Frobenius { .. })
    }
}

/// Spectral radii `s_1 <= ... <= s_r` at a point (log scale).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralRadii {
    pub at: Point,
    pub values: Vec<QLog>,
    pub status: Vec<Certification>,
}

impl SpectralRadii {
    pub fn all_certified(&self) -> bool {
        self.status.iter().all(|s| s.is_certified())
    }
}

/// `v_i = -log|g_i|(x) + i log(omega)`; `+inf` for vanishing coefficients.
pub fn spectral_values(op: &DifferentialOperator, x: &Point, p: Prime) -> Result<Vec<QLog>> {
    if x.is_rigid() {
        return Err(Error::Precondition("spectral polygon at a type-1 point".into()));
    }
    let w = omega_q(p);
    let mut v = vec![QLog::zero()];
    for i in 1..=op.rank() {
        let g = op.coeff(i).gauss_val(x, p);
        v.push(match g {
            QLog::NegInf => QLog::PosInf,
            QLog::PosInf => return Err(Error::Pole(x.label())),
            QLog::Fin(a) => QLog::Fin(qi(i as i64) * &w - a),
        });
    }
    Ok(v)
}

pub fn spectral_polygon_at(op: &DifferentialOperator, x: &Point, p: Prime) -> Result<NewtonPolygon> {
    np_from_values(&spectral_values(op, x, p)?)
}

/// Slopes below `log(omega) + r(x)` are certified; the rest are truncated at
/// `r(x)` and left uncertified.
pub fn small_radius_certify(np: &NewtonPolygon, x: &Point, p: Prime) -> SpectralRadii {
    let r = x.log_radius.clone();
    let bound = &r + &omega_q(p);
    let mut values = Vec::new();
    let mut status = Vec::new();
    for s in np.slopes() {
        if s < bound {
            values.push(s);
            status.push(Certification::Young);
        } else {
            let t = s.min(r.clone());
            status.push(if t == r { Certification::Solvable } else { Certification::Undetermined });
            values.push(t);
        }
    }
    SpectralRadii { at: x.clone(), values, status }
}

/// Hull heights `h_0, ..., h_r` of pointwise valuation profiles (`None` is
/// `+inf`): `h_k = min` over `i <= k <= j` of the chord through `v_i, v_j`.
pub fn hull_heights_along(v: &[Option<Paf>]) -> Result<Vec<Option<Paf>>> {
    let r = v.len() - 1;
    let mut out = Vec::with_capacity(r + 1);
    for k in 0..=r {
        let mut best: Option<Paf> = v[k].clone();
        for i in 0..k {
            let Some(vi) = &v[i] else { continue };
            for j in k + 1..=r {
                let Some(vj) = &v[j] else { continue };
                let w = qi((j - i) as i64);
                let chord = vi.scale(&(qi((j - k) as i64) / &w)).add(&vj.scale(&(qi((k - i) as i64) / &w)))?;
                best = Some(match best {
                    None => chord,
                    Some(b) => b.min(&chord)?,
                });
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// The functions `L -> v_i(x_{c,L})` on `[lo, hi]`.
pub fn spectral_values_along(
    op: &DifferentialOperator,
    c: &Q,
    lo: &QLog,
    hi: &Q,
    p: Prime,
) -> Result<Vec<Option<Paf>>> {
    let w = omega_q(p);
    let mut v = vec![Some(Paf::constant(lo.clone(), hi.clone(), Q::zero()))];
    for i in 1..=op.rank() {
        let g = op.coeff(i);
        if g.is_zero() {
            v.push(None);
            continue;
        }
        let prof = g.gauss_profile(c, lo, hi, p)?;
        v.push(Some(prof.scale(&qi(-1)).add_const(&(qi(i as i64) * &w))));
    }
    Ok(v)
}

/// Untruncated Young slopes `s_1, ..., s_r` along `x_{c,L}`, `None` for `+inf`.
pub fn spectral_slopes_along(
    op: &DifferentialOperator,
    c: &Q,
    lo: &QLog,
    hi: &Q,
    p: Prime,
) -> Result<Vec<Option<Paf>>> {
    let h = hull_heights_along(&spectral_values_along(op, c, lo, hi, p)?)?;
    h.windows(2)
        .map(|w| match (&w[0], &w[1]) {
            (Some(a), Some(b)) => b.sub(a).map(Some),
            _ => Ok(None),
        })
        .collect()
}

/// Partial heights `h_1, ..., h_r` of the polygon truncated at `r(x) = L`
/// along `x_{c,L}`.
pub fn spectral_profile_along(op: &DifferentialOperator, c: &Q, lo: &QLog, hi: &Q, p: Prime) -> Result<Vec<Paf>> {
    let id = Paf::identity(lo.clone(), hi.clone());
    let mut acc = Paf::constant(lo.clone(), hi.clone(), Q::zero());
    let mut out = Vec::new();
    for s in spectral_slopes_along(op, c, lo, hi, p)? {
        let t = match s {
            Some(s) => s.min(&id)?,
            None => id.clone(),
        };
        acc = acc.add(&t)?;
        out.push(acc.clone());
    }
    Ok(out)
}

/// Merge of two sorted radii lists, multiplicities kept.
pub fn direct_sum_radii(a: &[QLog], b: &[QLog]) -> Vec<QLog> {
    let mut out: Vec<QLog> = a.iter().chain(b.iter()).cloned().collect();
    out.sort();
    out
}

// Integer polynomials for the Taylor recursion.
type IPoly = Vec<BigInt>;

fn ip_trim(mut v: IPoly) -> IPoly {
    while v.last().is_some_and(Zero::is_zero) {
        v.pop();
    }
    v
}

fn ip_add(a: &IPoly, b: &IPoly) -> IPoly {
    let n = a.len().max(b.len());
    ip_trim((0..n).map(|i| a.get(i).cloned().unwrap_or_default() + b.get(i).cloned().unwrap_or_default()).collect())
}

fn ip_mul(a: &IPoly, b: &IPoly) -> IPoly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut v = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            v[i + j] += x * y;
        }
    }
    ip_trim(v)
}

fn ip_deriv(a: &IPoly) -> IPoly {
    ip_trim(a.iter().enumerate().skip(1).map(|(n, x)| x * BigInt::from(n)).collect())
}

fn ip_scale(a: &IPoly, k: &BigInt) -> IPoly {
    ip_trim(a.iter().map(|x| x * k).collect())
}

/// Gauss valuation at `x_{0,L}`.
fn ip_gauss(a: &IPoly, l: &Q, p: Prime) -> QLog {
    let mut best = QLog::NegInf;
    for (n, c) in a.iter().enumerate() {
        if !c.is_zero() {
            best = best.max(QLog::Fin(qi(-vp_int(c, p)) + l * qi(n as i64)));
        }
    }
    best
}

/// Integer numerators `A` and denominator `D` with `G = A / D`.
fn integer_system(g: &ConnectionMatrix) -> (Vec<IPoly>, IPoly) {
    let (a, d) = g.common_denominator();
    let mut l = BigInt::one();
    for poly in a.iter().chain(std::iter::once(&d)) {
        for c in poly.coeffs() {
            l = l.lcm(c.denom());
        }
    }
    let lq = Q::from_integer(l);
    let conv = |f: &Poly| -> IPoly { f.coeffs().iter().map(|c| (c * &lq).to_integer()).collect() };
    (a.iter().map(conv).collect(), conv(&d))
}

/// `G_0 = 1`, `G_{n+1} = G_n' + G_n G`; `Y^{(n)} = G_n Y` for solutions.
pub fn taylor_matrix_seq(g: &ConnectionMatrix, n: usize) -> Vec<ConnectionMatrix> {
    let r = g.rank();
    let (a, d) = g.common_denominator();
    let dd = d.derivative();
    let mut p: Vec<Poly> =
        (0..r * r).map(|k| Poly::constant(if k % (r + 1) == 0 { Q::one() } else { Q::zero() })).collect();
    let mut dpow = Poly::constant(Q::one());
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        out.push(ConnectionMatrix { rank: r, entries: p.iter().map(|e| (e.clone(), dpow.clone())).collect() });
        if k == n {
            break;
        }
        let mut next = Vec::with_capacity(r * r);
        for i in 0..r {
            for j in 0..r {
                let mut acc = &(&p[i * r + j].derivative() * &d) - &(&p[i * r + j] * &dd).scale(&qi(k as i64));
                for m in 0..r {
                    acc = &acc + &(&p[i * r + m] * &a[m * r + j]);
                }
                next.push(acc);
            }
        }
        p = next;
        dpow = &dpow * &d;
    }
    out
}

/// Estimate of `log R^Y(x) = liminf -(1/n) log|G_n / n!|(x)` as the minimum
/// over `n` in `[N/2, N]`; `+inf` when every `G_n`, `n >= 1`, vanishes.
pub fn radius_oracle(g: &ConnectionMatrix, x: &Point, n_max: usize, p: Prime) -> Result<QLog> {
    let l = x.log_radius.fin().ok_or_else(|| Error::Precondition("oracle at a type-1 point".into()))?.clone();
    let gt = g.translate(&x.center);
    let r = gt.rank();
    let (a, d) = integer_system(&gt);
    let dd = ip_deriv(&d);
    let gd = ip_gauss(&d, &l, p);
    if !gd.is_finite() {
        return Err(Error::Pole(x.label()));
    }
    let gd = gd.expect_fin().clone();
    let mut pm: Vec<IPoly> =
        (0..r * r).map(|k| if k % (r + 1) == 0 { vec![BigInt::one()] } else { Vec::new() }).collect();
    // log|c| of the integer factors divided out of `pm` so far
    let mut removed = Q::zero();
    let mut best = QLog::PosInf;
    let start = n_max.div_ceil(2).max(1);
    for n in 0..=n_max {
        if n >= start {
            let w = pm.iter().map(|e| ip_gauss(e, &l, p)).max().unwrap_or(QLog::NegInf);
            if let QLog::Fin(w) = w {
                let w = w + &removed - &gd * qi(n as i64) - val_factorial_q(n as u64, p);
                best = best.min(QLog::Fin(-w / qi(n as i64)));
            }
        }
        if n == n_max || pm.iter().all(Vec::is_empty) {
            break;
        }
        let nk = BigInt::from(n);
        let mut next = Vec::with_capacity(r * r);
        for i in 0..r {
            for j in 0..r {
                let e = &pm[i * r + j];
                let mut acc = ip_add(&ip_mul(&ip_deriv(e), &d), &ip_scale(&ip_mul(e, &dd), &-&nk));
                for m in 0..r {
                    acc = ip_add(&acc, &ip_mul(&pm[i * r + m], &a[m * r + j]));
                }
                next.push(acc);
            }
        }
        let content = next.iter().flatten().fold(BigInt::zero(), |g, c| g.gcd(c));
        if !content.is_zero() && !content.is_one() {
            for e in next.iter_mut() {
                for c in e.iter_mut() {
                    *c = &*c / &content;
                }
            }
            removed += qi(-vp_int(&content, p));
        }
        pm = next;
    }
    Ok(best)
}

/// Radius oracle for an operator, through its companion system.
pub fn radius_oracle_op(op: &DifferentialOperator, x: &Point, n_max: usize, p: Prime) -> Result<QLog> {
    radius_oracle(&op.companion(), x, n_max, p)
}

/// Witness that an operator annihilates `y = e Y` for the solutions of a
/// system: `rows[k] / denominator^k` is the row vector with `y^{(k)} = w_k Y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicCertificate {
    pub vector: Vec<Poly>,
    pub rows: Vec<Vec<Poly>>,
    pub denominator: Poly,
    pub attempts: usize,
}

fn det_at(m: &[Vec<Poly>], t: &Q) -> Q {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m.iter().map(|row| row.iter().map(|f| f.eval(t)).collect()).collect();
    let mut det = Q::one();
    for k in 0..n {
        let Some(piv) = (k..n).find(|&i| !a[i][k].is_zero()) else { return Q::zero() };
        if piv != k {
            a.swap(piv, k);
            det = -det;
        }
        let pk = a[k][k].clone();
        det *= &pk;
        for i in k + 1..n {
            let f = &a[i][k] / &pk;
            if f.is_zero() {
                continue;
            }
            for j in k..n {
                let sub = &f * &a[k][j];
                a[i][j] -= sub;
            }
        }
    }
    det
}

/// Fraction-free determinant over `Q[T]`.
pub fn det_bareiss(mut m: Vec<Vec<Poly>>) -> Poly {
    let n = m.len();
    if n == 0 {
        return Poly::constant(Q::one());
    }
    let mut prev = Poly::constant(Q::one());
    let mut negate = false;
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                Some(i) => {
                    m.swap(i, k);
                    negate = !negate;
                }
                None => return Poly::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &(&m[k][k] * &m[i][j]) - &(&m[i][k] * &m[k][j]);
                m[i][j] = num.div_exact(&prev).expect("Bareiss division is exact");
            }
        }
        prev = m[k][k].clone();
    }
    let d = m[n - 1][n - 1].clone();
    if negate {
        -&d
    } else {
        d
    }
}

fn candidate_vectors(r: usize, max_attempts: usize) -> Vec<Vec<Poly>> {
    let unit =
        |j: usize| -> Vec<Poly> { (0..r).map(|k| Poly::constant(if j == k { Q::one() } else { Q::zero() })).collect() };
    let mut out = vec![unit(0)];
    for k in 0..max_attempts {
        out.push((0..r).map(|j| Poly::monomial(Q::one(), j * k)).collect());
    }
    out.truncate(max_attempts.saturating_sub(r - 1).max(2));
    out.extend((1..r).map(unit));
    let mut s = 1i64;
    while out.len() < max_attempts {
        out.push((0..r).map(|j| Poly::constant(qi(((j as i64 + 1) * s) % 7 + 1))).collect());
        s += 1;
    }
    out.truncate(max_attempts);
    out
}

const SAMPLE_POINTS: [(i64, i64); 8] = [(1, 1), (2, 1), (-1, 1), (3, 1), (1, 2), (5, 1), (-7, 3), (11, 1)];

/// An operator `L` such that `y = e Y` satisfies `L y = 0` for every solution
/// of `Y' = G Y`, for the first cyclic `e` in a deterministic schedule.
pub fn cyclic_operator(g: &ConnectionMatrix, max_attempts: usize) -> Result<(DifferentialOperator, CyclicCertificate)> {
    let r = g.rank();
    let (a, d) = g.common_denominator();
    let dd = d.derivative();
    for (attempt, e) in candidate_vectors(r, max_attempts.max(r)).into_iter().enumerate() {
        // w_k = P_k / D^k, P_{k+1} = P_k' D - k D' P_k + P_k A
        let mut rows = vec![e.clone()];
        for k in 0..r {
            let pk = &rows[k];
            let next: Vec<Poly> = (0..r)
                .map(|j| {
                    let mut acc = &(&pk[j].derivative() * &d) - &(&pk[j] * &dd).scale(&qi(k as i64));
                    for m in 0..r {
                        acc = &acc + &(&pk[m] * &a[m * r + j]);
                    }
                    acc
                })
                .collect();
            rows.push(next);
        }
        let m: Vec<Vec<Poly>> = rows[..r].to_vec();
        let cyclic = SAMPLE_POINTS.iter().any(|&(n, dn)| !det_at(&m, &Q::new(n.into(), dn.into())).is_zero());
        if !cyclic {
            continue;
        }
        // c M = -P_r, solved as M^t c^t = -P_r^t; x_k = det c_k
        let at: Vec<Vec<Poly>> = (0..r).map(|j| (0..r).map(|k| rows[k][j].clone()).collect()).collect();
        let b: Vec<Poly> = rows[r].iter().map(|f| -f).collect();
        let Some((det, x)) = solve_fraction_free(at, b) else { continue };
        let mut coeffs = vec![RatFun::Factored(FactoredRatFun::zero()); r];
        let mut dpow = Poly::constant(Q::one());
        for k in (0..r).rev() {
            dpow = &dpow * &d;
            // g_{r-k} = c_k / D^{r-k}
            let (num, den) = reduce(x[k].clone(), &det * &dpow);
            coeffs[r - k - 1] =
                if num.is_zero() { RatFun::Factored(FactoredRatFun::zero()) } else { RatFun::dense(num, den)? };
        }
        // certificate: det P_r + sum_k x_k P_k = 0
        for j in 0..r {
            let mut acc = &det * &rows[r][j];
            for k in 0..r {
                acc = &acc + &(&x[k] * &rows[k][j]);
            }
            if !acc.is_zero() {
                return Err(Error::Precondition("cyclic certificate failed".into()));
            }
        }
        let op = DifferentialOperator::new(coeffs)?;
        return Ok((
            op,
            CyclicCertificate { vector: e, rows: rows[..r].to_vec(), denominator: d, attempts: attempt + 1 },
        ));
    }
    Err(Error::NonCyclic(max_attempts.max(r)))
}

/// Fraction-free elimination for `A x = b` over `Q[T]`: returns `det` and
/// `det x`, `None` when `A` is singular.
pub fn solve_fraction_free(mut a: Vec<Vec<Poly>>, b: Vec<Poly>) -> Option<(Poly, Vec<Poly>)> {
    let n = a.len();
    for (row, bi) in a.iter_mut().zip(b) {
        row.push(bi);
    }
    let mut prev = Poly::constant(Q::one());
    for k in 0..n {
        if a[k][k].is_zero() {
            let i = (k + 1..n).find(|&i| !a[i][k].is_zero())?;
            a.swap(i, k);
        }
        for i in k + 1..n {
            for j in k + 1..=n {
                let num = &(&a[k][k] * &a[i][j]) - &(&a[i][k] * &a[k][j]);
                a[i][j] = num.div_exact(&prev).expect("Bareiss division is exact");
            }
            a[i][k] = Poly::zero();
        }
        prev = a[k][k].clone();
    }
    let det = prev;
    let mut x = vec![Poly::zero(); n];
    for i in (0..n).rev() {
        let mut acc = &det * &a[i][n];
        for j in i + 1..n {
            acc = &acc - &(&a[i][j] * &x[j]);
        }
        x[i] = acc.div_exact(&a[i][i]).expect("fraction-free back substitution is exact");
    }
    Some((det, x))
}

/// Cancels the monic gcd and makes the denominator monic.
fn reduce(num: Poly, den: Poly) -> (Poly, Poly) {
    if num.is_zero() {
        return (num, Poly::constant(Q::one()));
    }
    let g = num.gcd(&den);
    let (n, d) = (num.div_exact(&g).unwrap(), den.div_exact(&g).unwrap());
    let lead = d.leading().recip();
    (n.scale(&lead), d.scale(&lead))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::q;
    use num_traits::Signed;

    fn pr(n: u64) -> Prime {
        Prime::new(n).unwrap()
    }

    fn konst(c: Q) -> FactoredRatFun {
        FactoredRatFun::constant(c)
    }

    fn x00() -> Point {
        Point::new(qi(0), qi(0))
    }

    #[test]
    fn young_examples() {
        let op = DifferentialOperator::factored(vec![konst(q(-1, 3))]).unwrap();
        let np = spectral_polygon_at(&op, &x00(), pr(3)).unwrap();
        assert_eq!(np.slopes(), vec![QLog::Fin(q(-3, 2))]);
        let sr = small_radius_certify(&np, &x00(), pr(3));
        assert_eq!(sr.status, vec![Certification::Young]);
        for pp in [2u64, 3, 5, 7] {
            let op = DifferentialOperator::factored(vec![konst(qi(-1))]).unwrap();
            let np = spectral_polygon_at(&op, &x00(), pr(pp)).unwrap();
            assert_eq!(np.slopes(), vec![QLog::Fin(omega_q(pr(pp)))]);
            let sr = small_radius_certify(&np, &x00(), pr(pp));
            assert_eq!(sr.status, vec![Certification::Undetermined]);
        }
        // v = (0, -1, -3) by the formula; hull slopes (-3/2, -3/2)
        let op2 = DifferentialOperator::factored(vec![konst(qi(-1)), konst(q(-1, 2))]).unwrap();
        let v = spectral_values(&op2, &x00(), pr(2)).unwrap();
        assert_eq!(v, vec![QLog::zero(), QLog::from_int(-1), QLog::from_int(-3)]);
        let np2 = np_from_values(&v).unwrap();
        assert_eq!(np2.slopes(), vec![QLog::Fin(q(-3, 2)), QLog::Fin(q(-3, 2))]);
    }

    #[test]
    fn certification_boundaries() {
        let x = x00();
        let np = NewtonPolygon::from_slopes(&[QLog::Fin(q(-3, 2))]);
        assert!(small_radius_certify(&np, &x, pr(3)).all_certified());
        let np0 = NewtonPolygon::from_slopes(&[QLog::zero()]);
        let s0 = small_radius_certify(&np0, &x, pr(3));
        assert_eq!((s0.values[0].clone(), s0.status[0]), (QLog::zero(), Certification::Solvable));
        let npw = NewtonPolygon::from_slopes(&[QLog::Fin(q(-1, 2))]);
        assert!(!small_radius_certify(&npw, &x, pr(3)).all_certified());
    }

    #[test]
    fn profile_examples() {
        let op = DifferentialOperator::factored(vec![konst(qi(5))]).unwrap();
        let h = spectral_profile_along(&op, &qi(0), &QLog::from_int(-2), &qi(0), pr(3)).unwrap();
        // min(-1/2, L) on [-2, 0]
        assert_eq!(h[0].breakpoints(), vec![q(-1, 2)]);
        assert_eq!(h[0].eval_fin(&qi(0)), q(-1, 2));
        assert_eq!(h[0].eval_fin(&qi(-2)), qi(-2));
        let g = FactoredRatFun::new(qi(-1), vec![(qi(0), 1)]).unwrap();
        let op = DifferentialOperator::factored(vec![g]).unwrap();
        let s = spectral_slopes_along(&op, &qi(0), &QLog::from_int(-2), &qi(0), pr(3)).unwrap();
        let s = s[0].clone().unwrap();
        assert_eq!(s.slopes(), vec![qi(-1)]);
        for k in 0..5 {
            let l = q(-k, 2);
            let np = spectral_polygon_at(&op, &Point::new(qi(0), l.clone()), pr(3)).unwrap();
            assert_eq!(np.slopes()[0], QLog::Fin(s.eval_fin(&l)));
        }
        let g2 = FactoredRatFun::new(qi(-1), vec![(qi(1), 1)]).unwrap();
        let op2 = DifferentialOperator::factored(vec![konst(qi(1)), g2]).unwrap();
        let h2 = spectral_profile_along(&op2, &qi(0), &QLog::from_int(-2), &qi(1), pr(3)).unwrap();
        let v = spectral_values_along(&op2, &qi(0), &QLog::from_int(-2), &qi(1), pr(3)).unwrap();
        assert!(v[2].as_ref().unwrap().breakpoints().contains(&qi(0)));
        for k in -4..=2 {
            let l = q(k, 2);
            let x = Point::new(qi(0), l.clone());
            let np = spectral_polygon_at(&op2, &x, pr(3)).unwrap();
            let t: Vec<QLog> = crate::polygon::truncate_slopes(&np.slopes(), &QLog::Fin(l.clone()));
            let tn = NewtonPolygon::from_slopes(&t);
            assert_eq!(tn.height(2), &QLog::Fin(h2[1].eval_fin(&l)));
        }
    }

    #[test]
    fn taylor_examples() {
        let a = ConnectionMatrix::polynomial(1, vec![Poly::constant(qi(3))]).unwrap();
        let seq = taylor_matrix_seq(&a, 4);
        assert_eq!(seq[4].entry(0, 0).0, Poly::constant(qi(81)));
        let z = ConnectionMatrix::polynomial(1, vec![Poly::zero()]).unwrap();
        assert!(taylor_matrix_seq(&z, 3)[1..].iter().all(ConnectionMatrix::is_zero));
        let nil =
            ConnectionMatrix::polynomial(2, vec![Poly::zero(), Poly::constant(qi(1)), Poly::zero(), Poly::zero()])
                .unwrap();
        assert!(taylor_matrix_seq(&nil, 2)[2].is_zero());
    }

    #[test]
    fn oracle_examples() {
        let a = ConnectionMatrix::polynomial(1, vec![Poly::constant(q(1, 3))]).unwrap();
        let est = radius_oracle(&a, &x00(), 100, pr(3)).unwrap();
        let d = est.expect_fin() - q(-3, 2);
        assert!(d.abs() <= q(1, 10), "{est}");
        let z = ConnectionMatrix::polynomial(1, vec![Poly::zero()]).unwrap();
        assert_eq!(radius_oracle(&z, &x00(), 50, pr(3)).unwrap(), QLog::PosInf);
        let one = ConnectionMatrix::polynomial(1, vec![Poly::constant(qi(1))]).unwrap();
        let e1 = radius_oracle(&one, &x00(), 150, pr(3)).unwrap();
        assert!((e1.expect_fin() - q(-1, 2)).abs() <= q(1, 10), "{e1}");
    }

    #[test]
    fn cyclic_examples() {
        let op =
            DifferentialOperator::factored(vec![konst(qi(2)), FactoredRatFun::new(q(1, 3), vec![(qi(1), 1)]).unwrap()])
                .unwrap();
        let (l, cert) = cyclic_operator(&op.companion(), 8).unwrap();
        assert_eq!(cert.attempts, 1);
        for i in 1..=2 {
            let (n, d) = l.coeff(i).to_num_den();
            let (n0, d0) = op.coeff(i).to_num_den();
            assert_eq!(&n * &d0, &n0 * &d);
        }
        let diag = ConnectionMatrix::polynomial(
            2,
            vec![Poly::constant(qi(2)), Poly::zero(), Poly::zero(), Poly::constant(qi(5))],
        )
        .unwrap();
        let (l, cert) = cyclic_operator(&diag, 8).unwrap();
        assert_eq!(cert.attempts, 2);
        // (D - 2)(D - 5) = D^2 - 7 D + 10
        assert_eq!(l.coeff(1).eval(&qi(0)).unwrap(), qi(-7));
        assert_eq!(l.coeff(2).eval(&qi(0)).unwrap(), qi(10));
        let r1 = ConnectionMatrix::polynomial(1, vec![Poly::linear(&qi(4))]).unwrap();
        let (l1, _) = cyclic_operator(&r1, 4).unwrap();
        assert_eq!(l1.coeff(1).eval(&qi(1)).unwrap(), qi(3));
        let scalar = ConnectionMatrix::polynomial(
            2,
            vec![Poly::constant(qi(1)), Poly::zero(), Poly::zero(), Poly::constant(qi(1))],
        )
        .unwrap();
        // constant vectors are never cyclic for a scalar matrix
        assert_eq!(cyclic_operator(&scalar, 2).unwrap_err(), Error::NonCyclic(2));
        assert_eq!(cyclic_operator(&scalar, 6).unwrap().1.attempts, 3);
    }

    #[test]
    fn bareiss_matches_expansion() {
        let m = vec![
            vec!["T".parse::<Poly>().unwrap(), "1".parse().unwrap(), "0".parse().unwrap()],
            vec!["2".parse().unwrap(), "T^2".parse().unwrap(), "1 - T".parse().unwrap()],
            vec!["0".parse().unwrap(), "3".parse().unwrap(), "T".parse().unwrap()],
        ];
        // T (T^3 - 3 + 3T) - 1 (2T) = T^4 + 3T^2 - 5T
        assert_eq!(det_bareiss(m), "-5T + 3T^2 + T^4".parse().unwrap());
    }

    #[test]
    fn direct_sum_examples() {
        let a = vec![QLog::from_int(-1)];
        let b = vec![QLog::from_int(-2)];
        assert_eq!(direct_sum_radii(&a, &b), vec![QLog::from_int(-2), QLog::from_int(-1)]);
        assert_eq!(direct_sum_radii(&[], &b), b);
        assert_eq!(direct_sum_radii(&a, &a).len(), 2);
    }

    #[test]
    fn operator_json() {
        let s =
            r#"{"rank":2,"coeffs":[{"constant":"1/3","factors":[["2",1],["0",-2]]},{"constant":"-1","factors":[]}]}"#;
        let op: DifferentialOperator = serde_json::from_str(s).unwrap();
        assert_eq!(serde_json::to_string(&op).unwrap(), s.replace(r#"["2",1],["0",-2]"#, r#"["0",-2],["2",1]"#));
        let m = r#"{"rank":1,"entries":[["1 - 2T + T^2","T"]]}"#;
        let g: ConnectionMatrix = serde_json::from_str(m).unwrap();
        assert_eq!(serde_json::to_string(&g).unwrap(), m);
        assert!(serde_json::from_str::<DifferentialOperator>(r#"{"rank":2,"coeffs":[{"constant":"1"}]}"#).is_err());
    }
}
