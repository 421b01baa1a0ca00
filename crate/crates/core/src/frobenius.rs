//! The Frobenius `T -> T^p`: radius maps, images of points, radii of
//! push-forwards, index maps, push-forward of systems and the descent loop
//! that certifies radii outside the small-radius range.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::line::Point;
use crate::piecewise::Paf;
use crate::scalars::{log_abs, omega_q, qi, Prime, QLog, Q};
use crate::spectral::{
    cyclic_operator, small_radius_certify, spectral_polygon_at, spectral_slopes_along, Certification, ConnectionMatrix,
    DifferentialOperator, SpectralRadii,
};

/// Default number of push-forwards tried by the descent loop.
pub const DEFAULT_MAX_ITER: u32 = 6;
/// Largest rank `r p^k` the descent loop will build.
pub const DEFAULT_RANK_CAP: usize = 64;

fn pq(p: Prime) -> Q {
    p.q()
}

/// `log phi(sigma, rho) = max(p L, -1 + (p-1) sigma + L)`.
pub fn phi_radius(sigma: &QLog, l: &QLog, p: Prime) -> QLog {
    let a = l.scale(&pq(p));
    let b = &(&sigma.scale(&qi(p.get() as i64 - 1)) + l) + &qi(-1);
    a.max(b)
}

/// `log psi(sigma, rho') = min(L'/p, L' + 1 - (p-1) sigma)`.
pub fn psi_radius(sigma: &QLog, l: &QLog, p: Prime) -> QLog {
    let a = l.scale(&(Q::from_integer(1.into()) / pq(p)));
    let b = l - &(&sigma.scale(&qi(p.get() as i64 - 1)) + &qi(-1));
    a.min(b)
}

/// `phi(x_{c,rho}) = x_{c^p, phi(|c|, rho)}`.
pub fn phi_point(x: &Point, p: Prime) -> Point {
    let x = x.canonical(p);
    let sigma = log_abs(&x.center, p);
    let c = num_traits::pow(x.center.clone(), p.get() as usize);
    Point { center: c, log_radius: phi_radius(&sigma, &x.log_radius, p) }
}

/// Number of preimages of `phi(x)` in the fiber: 1 when
/// `L >= log(omega) + log|c|`, otherwise `p`.
pub fn fiber_size(x: &Point, p: Prime) -> usize {
    let x = x.canonical(p);
    let sigma = log_abs(&x.center, p);
    if x.log_radius >= &sigma + &omega_q(p) {
        1
    } else {
        p.get() as usize
    }
}

/// Data of the working point needed by the index bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrobContext {
    pub p: Prime,
    /// `log|t|` at the working point, `max(log|c|, L)`.
    #[serde(with = "crate::scalars::q_serde")]
    pub t_log: Q,
    /// Number of radii `<= log(omega) + t_log`.
    pub i_1: usize,
}

impl FrobContext {
    pub fn new(x: &Point, radii: &[QLog], p: Prime) -> Result<FrobContext> {
        let x = x.canonical(p);
        let t = log_abs(&x.center, p).max(x.log_radius.clone());
        let t_log = t.fin().cloned().ok_or_else(|| Error::Precondition("push-forward at the point 0".into()))?;
        let bound = QLog::Fin(&t_log + &omega_q(p));
        let i_1 = radii.iter().filter(|s| **s <= bound).count();
        Ok(FrobContext { p, t_log, i_1 })
    }

    /// `-1 + (p-1) t_log`, the log of `|p t^{p-1}|`.
    pub fn ell_unit(&self) -> Q {
        qi(self.p.get() as i64 - 1) * &self.t_log - qi(1)
    }

    /// `p (log(omega) + t_log)`.
    pub fn upper_level_threshold(&self) -> Q {
        pq(self.p) * (&self.t_log + omega_q(self.p))
    }
}

/// Spectral radii of the push-forward at `phi(x)`, sorted, each copy keeping
/// the status of the index it comes from.
pub fn pushforward_radii(s: &SpectralRadii, ctx: &FrobContext) -> SpectralRadii {
    let p = ctx.p;
    let pn = p.get() as usize;
    let r = s.values.len();
    let small = ctx.ell_unit();
    let rest = QLog::Fin(ctx.upper_level_threshold());
    let mut out: Vec<(QLog, Certification)> = Vec::with_capacity(pn * r);
    for (i, (v, st)) in s.values.iter().zip(&s.status).enumerate() {
        if i < ctx.i_1 {
            out.extend(std::iter::repeat_n((v + &small, *st), pn));
        } else {
            out.push((v.scale(&pq(p)), *st));
            out.extend(std::iter::repeat_n((rest.clone(), *st), pn - 1));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    SpectralRadii {
        at: phi_point(&s.at, p),
        values: out.iter().map(|x| x.0.clone()).collect(),
        status: out.iter().map(|x| x.1).collect(),
    }
}

/// Index `phi(i, x)` of the push-forward height matching `H_i`, the exponent
/// `d_i(x)` and `log|l_{i,x}|(x) = d_i (-1 + (p-1) t_log)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMap {
    pub phi_i: usize,
    pub d_i: usize,
    #[serde(with = "crate::scalars::q_serde")]
    pub ell_val: Q,
}

/// `1 <= i <= r`.
pub fn index_map(i: usize, r: usize, ctx: &FrobContext) -> IndexMap {
    let pn = ctx.p.get() as usize;
    let (phi_i, d_i) = if i <= ctx.i_1 { (pn * i, i) } else { ((pn - 1) * r + i, r) };
    IndexMap { phi_i, d_i, ell_val: qi(d_i as i64) * ctx.ell_unit() }
}

/// `H_i(x) = H_{phi(i)}(phi(x)) / p - log|l_{i,x}|(x)`.
pub fn partial_height_descent(h_phi: &QLog, i: usize, r: usize, ctx: &FrobContext) -> QLog {
    let m = index_map(i, r, ctx);
    &h_phi.scale(&(qi(1) / pq(ctx.p))) + &(-m.ell_val)
}

/// Radii at `x` recovered from the sorted radii `m` of the push-forward at
/// `phi(x)` (rank `p r`), with `t_log = log|t|(x)`.
pub fn descend_radii(m: &[QLog], t_log: &Q, p: Prime) -> Vec<(QLog, usize)> {
    let pn = p.get() as usize;
    let r = m.len() / pn;
    let u = QLog::Fin(pq(p) * (t_log + omega_q(p)));
    let below = m.iter().filter(|v| **v <= u).count();
    let i_1 = below.saturating_sub((pn - 1) * r).min(r);
    let shift = qi(1) - qi(pn as i64 - 1) * t_log;
    (1..=r)
        .map(|i| {
            if i <= i_1 {
                let k = pn * i - 1;
                (&m[k] + &shift, k)
            } else {
                let k = (pn - 1) * r + i - 1;
                (m[k].scale(&(qi(1) / pq(p))), k)
            }
        })
        .collect()
}

/// Matrix of the push-forward of `Y' = G Y` (entries Laurent in `T~`) along
/// `T = T~^p`, in the basis `T~^k e_j`, index `k r + j`.
pub fn pushforward_matrix(g: &ConnectionMatrix, p: Prime) -> Result<ConnectionMatrix> {
    let r = g.rank();
    let pn = p.get() as i64;
    let n = r * pn as usize;
    let terms = g.laurent()?;
    let mut out: Vec<BTreeMap<i64, Q>> = vec![BTreeMap::new(); n * n];
    let inv_p = qi(1) / pq(p);
    for a in 0..r {
        for b in 0..r {
            for (&e, c) in &terms[a * r + b] {
                let c = c * &inv_p;
                for k in 0..pn {
                    let s = e + k - pn + 1;
                    let (q, j) = (s.div_euclid(pn), s.rem_euclid(pn));
                    let row = j as usize * r + a;
                    let col = k as usize * r + b;
                    *out[row * n + col].entry(q).or_insert_with(Q::zero) += &c;
                }
            }
        }
    }
    for k in 1..pn {
        for a in 0..r {
            let idx = k as usize * r + a;
            *out[idx * n + idx].entry(-1).or_insert_with(Q::zero) -= qi(k) * &inv_p;
        }
    }
    for t in out.iter_mut() {
        t.retain(|_, v| !v.is_zero());
    }
    Ok(ConnectionMatrix::from_laurent(n, out))
}

/// Why the descent loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentStop {
    Certified,
    MaxIter,
    RankCap,
    NonLaurent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentReport {
    pub radii: SpectralRadii,
    /// Number of push-forwards computed.
    pub levels: u32,
    pub stop: DescentStop,
}

/// Limits of the descent loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub max_iter: u32,
    pub rank_cap: usize,
    pub cyclic_attempts: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig { max_iter: DEFAULT_MAX_ITER, rank_cap: DEFAULT_RANK_CAP, cyclic_attempts: 12 }
    }
}

/// The tower of operators `L_k` with `L_0 = L` translated to center `c` and
/// `L_k` a cyclic operator of the `k`-th push-forward.
#[derive(Debug, Clone)]
pub struct FrobeniusTower {
    pub p: Prime,
    pub center: Q,
    pub ops: Vec<DifferentialOperator>,
    matrix: ConnectionMatrix,
    pub stop: Option<DescentStop>,
}

impl FrobeniusTower {
    pub fn new(op: &DifferentialOperator, center: &Q, p: Prime) -> FrobeniusTower {
        let op0 = op.translate(center);
        let matrix = op0.companion();
        FrobeniusTower { p, center: center.clone(), ops: vec![op0], matrix, stop: None }
    }

    pub fn levels(&self) -> u32 {
        self.ops.len() as u32 - 1
    }

    /// Makes `L_k` available; `false` when a limit was hit first.
    pub fn ensure(&mut self, k: u32, cfg: &DescentConfig) -> Result<bool> {
        while self.levels() < k {
            if self.stop.is_some() {
                return Ok(false);
            }
            if self.levels() >= cfg.max_iter {
                self.stop = Some(DescentStop::MaxIter);
                return Ok(false);
            }
            if self.matrix.rank() * self.p.get() as usize > cfg.rank_cap {
                self.stop = Some(DescentStop::RankCap);
                return Ok(false);
            }
            let next = match pushforward_matrix(&self.matrix, self.p) {
                Ok(m) => m,
                Err(Error::NonLaurent(_)) => {
                    self.stop = Some(DescentStop::NonLaurent);
                    return Ok(false);
                }
                Err(e) => return Err(e),
            };
            let (op, _) = cyclic_operator(&next, cfg.cyclic_attempts)?;
            self.ops.push(op);
            self.matrix = next;
        }
        Ok(true)
    }
}

/// Combines the untruncated Young slopes of `L_0, ..., L_K` at the points
/// `x_{0, p^k L}` into radii at `x_{0,L}`.
pub fn combine_levels(levels: &[Vec<QLog>], l: &Q, p: Prime) -> (Vec<QLog>, Vec<Certification>) {
    let w = omega_q(p);
    let pl = |k: usize| -> Q { num_traits::pow(pq(p), k) * l };
    let young = |k: usize| -> Vec<Option<QLog>> {
        let bound = QLog::Fin(pl(k) + &w);
        levels[k].iter().map(|s| (*s < bound).then(|| s.clone())).collect()
    };
    let top = levels.len() - 1;
    let tk = QLog::Fin(pl(top));
    let mut vals: Vec<(QLog, Certification)> = young(top)
        .into_iter()
        .zip(&levels[top])
        .map(|(y, s)| match y {
            Some(v) => (v, level_cert(top)),
            None => (s.clone().min(tk.clone()), Certification::Undetermined),
        })
        .collect();
    for k in (0..top).rev() {
        // `vals` is sorted at level k + 1
        let sorted = sort_pairs(vals);
        let m: Vec<QLog> = sorted.iter().map(|x| x.0.clone()).collect();
        let down = descend_radii(&m, &pl(k), p);
        let y = young(k);
        vals = down
            .into_iter()
            .zip(y)
            .map(|((v, src), y)| match y {
                Some(yv) => (yv, level_cert(k)),
                None => (v, sorted[src].1),
            })
            .collect();
    }
    let lq = QLog::Fin(l.clone());
    let vals = sort_pairs(vals);
    let mut out_v = Vec::with_capacity(vals.len());
    let mut out_s = Vec::with_capacity(vals.len());
    for (v, st) in vals {
        if st.is_certified() {
            out_v.push(v);
            out_s.push(st);
        } else {
            let t = v.min(lq.clone());
            out_s.push(if t == lq { Certification::Solvable } else { Certification::Undetermined });
            out_v.push(t);
        }
    }
    (out_v, out_s)
}

fn level_cert(k: usize) -> Certification {
    if k == 0 {
        Certification::Young
    } else {
        Certification::Frobenius { level: k as u32 }
    }
}

fn sort_pairs(mut v: Vec<(QLog, Certification)>) -> Vec<(QLog, Certification)> {
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

/// Spectral radii at `x` certified by Young's theorem, pushing forward until
/// every index is certified or a limit is hit.
pub fn descent_certify(op: &DifferentialOperator, x: &Point, p: Prime, cfg: &DescentConfig) -> Result<DescentReport> {
    let mut tower = FrobeniusTower::new(op, &x.center, p);
    descent_certify_in(&mut tower, x.l(), cfg)
}

/// Same as [`descent_certify`] at `x_{c,L}` with `c` the tower's center.
pub fn descent_certify_in(tower: &mut FrobeniusTower, l: &Q, cfg: &DescentConfig) -> Result<DescentReport> {
    let p = tower.p;
    let x = Point::new(tower.center.clone(), l.clone());
    let mut levels = Vec::new();
    let mut k = 0u32;
    loop {
        if !tower.ensure(k, cfg)? {
            break;
        }
        let xk = Point::new(qi(0), num_traits::pow(pq(p), k as usize) * l);
        let np = spectral_polygon_at(&tower.ops[k as usize], &xk, p)?;
        levels.push(np.slopes());
        let (_, status) = combine_levels(&levels, l, p);
        if status.iter().all(|s| s.is_certified()) {
            return Ok(DescentReport { radii: radii_at(&x, &levels, l, p), levels: k, stop: DescentStop::Certified });
        }
        k += 1;
    }
    let stop = tower.stop.unwrap_or(DescentStop::MaxIter);
    Ok(DescentReport { radii: radii_at(&x, &levels, l, p), levels: levels.len() as u32 - 1, stop })
}

fn radii_at(x: &Point, levels: &[Vec<QLog>], l: &Q, p: Prime) -> SpectralRadii {
    let (values, status) = combine_levels(levels, l, p);
    SpectralRadii { at: x.clone(), values, status }
}

/// Young certification at `x` alone.
pub fn young_certify(op: &DifferentialOperator, x: &Point, p: Prime) -> Result<SpectralRadii> {
    let np = spectral_polygon_at(op, x, p)?;
    Ok(small_radius_certify(&np, x, p))
}

/// Radii along `x_{c,L}` for `L` in `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRadii {
    #[serde(with = "crate::scalars::q_serde")]
    pub center: Q,
    pub lo: QLog,
    #[serde(with = "crate::scalars::q_serde")]
    pub hi: Q,
    /// `L -> log R_i^{sp}(x_{c,L})`, sorted pointwise.
    pub values: Vec<Paf>,
    /// Intervals on which the certification of every index is constant.
    pub pieces: Vec<StatusPiece>,
    pub levels: u32,
    pub stop: DescentStop,
    /// Points where the one-sided limits of the recovered radii differ, or
    /// where an interval could not be resolved into affine pieces.
    #[serde(with = "crate::scalars::qvec_serde")]
    pub defects: Vec<Q>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusPiece {
    pub lo: QLog,
    #[serde(with = "crate::scalars::q_serde")]
    pub hi: Q,
    pub status: Vec<Certification>,
}

impl SegmentRadii {
    /// Certification at `L`; at a cut the left piece wins.
    pub fn status_at(&self, l: &QLog) -> &[Certification] {
        let i = self.pieces.iter().position(|pc| *l <= QLog::Fin(pc.hi.clone())).unwrap_or(self.pieces.len() - 1);
        &self.pieces[i].status
    }

    pub fn all_certified(&self) -> bool {
        self.pieces.iter().all(|pc| pc.status.iter().all(|s| s.is_certified()))
    }

    /// Radii and certification at the point `x_{c,L}` of the segment.
    pub fn at(&self, l: &QLog) -> Result<SpectralRadii> {
        let values = self.values.iter().map(|f| f.eval(l)).collect::<Result<Vec<_>>>()?;
        Ok(SpectralRadii {
            at: Point { center: self.center.clone(), log_radius: l.clone() },
            values,
            status: self.status_at(l).to_vec(),
        })
    }
}

/// Level slopes as functions of `L` (`None` is `+inf`).
type LevelSlopes = Vec<Vec<Option<Paf>>>;

fn levels_at(levels: &LevelSlopes, l: &Q) -> Vec<Vec<QLog>> {
    levels
        .iter()
        .map(|lv| lv.iter().map(|f| f.as_ref().map_or(QLog::PosInf, |f| QLog::Fin(f.eval_fin(l)))).collect())
        .collect()
}

/// Lines `a L + b` where a level-`k` slope may switch the way it is descended.
fn switch_lines(k: usize, p: Prime) -> Vec<(Q, Q)> {
    let w = omega_q(p);
    let pk = |j: usize| num_traits::pow(pq(p), j);
    let mut out = Vec::new();
    // value at level j = alpha f_k + beta + gamma L
    let mut stack = vec![(k, qi(1), qi(0), qi(0))];
    while let Some((j, alpha, beta, gamma)) = stack.pop() {
        let mut thresholds = vec![(pk(j), w.clone())];
        if j >= 1 {
            thresholds.push((pk(j), pq(p) * &w));
        }
        thresholds.push((pk(j), qi(0)));
        for (d, c) in thresholds {
            out.push(((&d - &gamma) / &alpha, (&c - &beta) / &alpha));
        }
        if j == 0 {
            continue;
        }
        // descending to level j - 1 with t = p^{j-1} L
        let t = pk(j - 1);
        stack.push((j - 1, &alpha / pq(p), &beta / pq(p), &gamma / pq(p)));
        stack.push((j - 1, alpha.clone(), &beta + qi(1), &gamma - qi(p.get() as i64 - 1) * &t));
    }
    out.sort();
    out.dedup();
    out
}

struct Fitted {
    lo: QLog,
    hi: Q,
    /// Per index: slope and value at `hi`.
    lines: Vec<(Q, Q)>,
    status: Vec<Certification>,
}

struct Assembler<'a> {
    levels: &'a LevelSlopes,
    p: Prime,
    defects: Vec<Q>,
}

/// Per index `(slope, value at the first sample)`, and the shared certification.
type AffineRun = (Vec<(Q, Q)>, Vec<Certification>);

impl Assembler<'_> {
    fn eval(&self, l: &Q) -> (Vec<Q>, Vec<Certification>) {
        let (v, s) = combine_levels(&levels_at(self.levels, l), l, self.p);
        (v.into_iter().map(|x| x.expect_fin().clone()).collect(), s)
    }

    fn affine_on(&self, pts: &[Q]) -> Option<AffineRun> {
        let evals: Vec<_> = pts.iter().map(|x| self.eval(x)).collect();
        if evals.iter().any(|e| e.1 != evals[0].1) {
            return None;
        }
        let r = evals[0].0.len();
        let (x0, x1) = (&pts[0], &pts[1]);
        let mut lines = Vec::with_capacity(r);
        for i in 0..r {
            let slope = (&evals[1].0[i] - &evals[0].0[i]) / (x1 - x0);
            for (x, e) in pts.iter().zip(&evals).skip(2) {
                if &evals[0].0[i] + &slope * (x - x0) != e.0[i] {
                    return None;
                }
            }
            lines.push((slope, evals[0].0[i].clone()));
        }
        Some((lines, evals[0].1.clone()))
    }

    /// Affine pieces on `[a, b]` (finite), bisecting where needed.
    fn fit(&mut self, a: &Q, b: &Q, depth: u32, out: &mut Vec<Fitted>) {
        let h = (b - a) / qi(4);
        let pts = [a + &h, a + &h * qi(2), a + &h * qi(3)];
        if let Some((lines, status)) = self.affine_on(&pts) {
            let lines = lines
                .into_iter()
                .map(|(s, v)| {
                    let vb = &v + &s * (b - &pts[0]);
                    (s, vb)
                })
                .collect();
            out.push(Fitted { lo: QLog::Fin(a.clone()), hi: b.clone(), lines, status });
            return;
        }
        if depth == 0 {
            let (v, status) = self.eval(&pts[1]);
            self.defects.push(pts[1].clone());
            let lines = v.into_iter().map(|x| (qi(0), x)).collect();
            out.push(Fitted { lo: QLog::Fin(a.clone()), hi: b.clone(), lines, status });
            return;
        }
        let cut = self.germ_cut(a, b).unwrap_or_else(|| pts[1].clone());
        self.fit(a, &cut, depth - 1, out);
        self.fit(&cut, b, depth - 1, out);
    }

    /// Intersection of the affine germs at both ends, when it lies inside.
    fn germ_cut(&self, a: &Q, b: &Q) -> Option<Q> {
        let e = (b - a) / qi(64);
        let left = self.affine_on(&[a + &e, a + &e * qi(2), a + &e * qi(3)])?;
        let right = self.affine_on(&[b - &e * qi(3), b - &e * qi(2), b - &e])?;
        let (xl, xr) = (a + &e, b - &e * qi(3));
        for i in 0..left.0.len() {
            let (sl, vl) = &left.0[i];
            let (sr, vr) = &right.0[i];
            if sl == sr {
                continue;
            }
            // vl + sl (x - xl) = vr + sr (x - xr)
            let x = (vr - vl + sl * &xl - sr * &xr) / (sl - sr);
            if x > a + &e * qi(3) && x < b - &e * qi(3) {
                return Some(x);
            }
        }
        None
    }

    /// Affine tail on `(-inf, b]`; returns the left end of the fitted tail.
    fn tail(&mut self, b: &Q, out: &mut Vec<Fitted>) {
        for j in 0..10 {
            let start = b - qi(1i64 << j) + qi(1);
            let pts = [&start - qi(3), &start - qi(2), &start - qi(1)];
            if let Some((lines, status)) = self.affine_on(&pts) {
                let lines: Vec<(Q, Q)> = lines
                    .into_iter()
                    .map(|(s, v)| {
                        let vb = &v + &s * (&start - &pts[0]);
                        (s, vb)
                    })
                    .collect();
                let mut rest = Vec::new();
                if start < *b {
                    self.fit(&start, b, 12, &mut rest);
                }
                out.push(Fitted { lo: QLog::NegInf, hi: start, lines, status });
                out.extend(rest);
                return;
            }
        }
        let (v, status) = self.eval(&(b - qi(1)));
        self.defects.push(b - qi(1));
        out.push(Fitted {
            lo: QLog::NegInf,
            hi: b.clone(),
            lines: v.into_iter().map(|x| (qi(0), x)).collect(),
            status,
        });
    }
}

/// Sorted, deduplicated cut points strictly inside `(lo, hi)`.
fn cut_points(levels: &LevelSlopes, lo: &QLog, hi: &Q, p: Prime) -> Vec<Q> {
    let mut cuts = Vec::new();
    for (k, lv) in levels.iter().enumerate() {
        let lines = switch_lines(k, p);
        for f in lv.iter().flatten() {
            cuts.extend(f.breakpoints());
            for (a, b) in &lines {
                cuts.extend(f.line_crossings(a, b));
            }
        }
    }
    cuts.retain(|x| QLog::Fin(x.clone()) > *lo && x < hi);
    cuts.sort();
    cuts.dedup();
    cuts
}

fn assemble(levels: &LevelSlopes, center: &Q, lo: &QLog, hi: &Q, p: Prime) -> Result<SegmentRadii> {
    let cuts = cut_points(levels, lo, hi, p);
    let mut asm = Assembler { levels, p, defects: Vec::new() };
    let mut fitted = Vec::new();
    let mut ends: Vec<Q> = cuts.clone();
    ends.push(hi.clone());
    match lo {
        QLog::Fin(a) if a == hi => {
            let (v, status) = asm.eval(a);
            fitted.push(Fitted {
                lo: lo.clone(),
                hi: hi.clone(),
                lines: v.into_iter().map(|x| (qi(0), x)).collect(),
                status,
            });
        }
        QLog::Fin(a) => {
            let mut prev = a.clone();
            for e in &ends {
                asm.fit(&prev, e, 12, &mut fitted);
                prev = e.clone();
            }
        }
        _ => {
            asm.tail(&ends[0], &mut fitted);
            for w in ends.windows(2) {
                asm.fit(&w[0], &w[1], 12, &mut fitted);
            }
        }
    }
    // continuity at the joints
    for w in fitted.windows(2) {
        let at = &w[0].hi;
        for (l, r) in w[0].lines.iter().zip(&w[1].lines) {
            let rv = &r.1 - &r.0 * (&w[1].hi - at);
            if l.1 != rv {
                asm.defects.push(at.clone());
                break;
            }
        }
    }
    let rank = fitted[0].lines.len();
    let mut values = Vec::with_capacity(rank);
    for i in 0..rank {
        let mut knots = Vec::new();
        if let QLog::Fin(a) = &fitted[0].lo {
            let f = &fitted[0];
            knots.push((a.clone(), &f.lines[i].1 - &f.lines[i].0 * (&f.hi - a)));
        }
        for f in &fitted {
            match knots.last() {
                Some((x, _)) if *x == f.hi => {}
                _ => knots.push((f.hi.clone(), f.lines[i].1.clone())),
            }
        }
        values.push(Paf::from_knots(lo.clone(), knots, fitted[0].lines[i].0.clone())?);
    }
    let mut pieces: Vec<StatusPiece> = Vec::new();
    for f in fitted {
        match pieces.last_mut() {
            Some(last) if last.status == f.status => last.hi = f.hi,
            _ => pieces.push(StatusPiece { lo: f.lo, hi: f.hi, status: f.status }),
        }
    }
    let mut defects = asm.defects;
    defects.sort();
    defects.dedup();
    Ok(SegmentRadii {
        center: center.clone(),
        lo: lo.clone(),
        hi: hi.clone(),
        values,
        pieces,
        levels: levels.len() as u32 - 1,
        stop: DescentStop::MaxIter,
        defects,
    })
}

/// Spectral radii along `x_{c,L}`, `L` in `[lo, hi]`, with `c` the center of
/// the tower, pushing forward until every piece is certified or a limit is hit.
pub fn segment_descent(tower: &mut FrobeniusTower, lo: &QLog, hi: &Q, cfg: &DescentConfig) -> Result<SegmentRadii> {
    let p = tower.p;
    let mut levels: LevelSlopes = Vec::new();
    let mut k = 0u32;
    let mut last = None;
    loop {
        if !tower.ensure(k, cfg)? {
            break;
        }
        let sc = num_traits::pow(pq(p), k as usize);
        let lo_k = lo.scale(&sc);
        let hi_k = hi * &sc;
        let sl = spectral_slopes_along(&tower.ops[k as usize], &qi(0), &lo_k, &hi_k, p)?;
        levels.push(sl.into_iter().map(|f| f.map(|f| f.rescale_arg(&sc))).collect());
        let mut res = assemble(&levels, &tower.center, lo, hi, p)?;
        if res.all_certified() {
            res.stop = DescentStop::Certified;
            return Ok(res);
        }
        last = Some(res);
        k += 1;
    }
    let mut res = last.expect("level 0 is always available");
    res.stop = tower.stop.unwrap_or(DescentStop::MaxIter);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratfun::{FactoredRatFun, Poly};
    use crate::scalars::q;

    fn pr(n: u64) -> Prime {
        Prime::new(n).unwrap()
    }

    fn l(n: i64, d: i64) -> QLog {
        QLog::Fin(q(n, d))
    }

    fn konst(c: Q) -> FactoredRatFun {
        FactoredRatFun::constant(c)
    }

    #[test]
    fn radius_maps() {
        let z = QLog::zero();
        assert_eq!(phi_radius(&z, &l(-1, 2), pr(2)), l(-1, 1));
        assert_eq!(phi_radius(&z, &l(-2, 1), pr(2)), l(-3, 1));
        for pp in [2u64, 3, 5] {
            let p = pr(pp);
            let s = l(2, 3);
            let corner = &s + &omega_q(p);
            let a = corner.scale(&p.q());
            let b = &(&s.scale(&qi(pp as i64 - 1)) + &corner) + &qi(-1);
            assert_eq!(a, b);
            assert_eq!(phi_radius(&s, &corner, p), a);
        }
        for (s, lp) in [(0, -1), (0, -3)] {
            let back = psi_radius(&QLog::from_int(s), &QLog::from_int(lp), pr(2));
            assert_eq!(phi_radius(&QLog::from_int(s), &back, pr(2)), QLog::from_int(lp));
        }
        assert_eq!(phi_radius(&QLog::NegInf, &l(-5, 2), pr(3)), l(-15, 2));
    }

    #[test]
    fn point_images() {
        assert_eq!(phi_point(&Point::new(qi(0), q(-1, 2)), pr(3)), Point::new(qi(0), q(-3, 2)));
        assert_eq!(phi_point(&Point::new(qi(1), qi(-2)), pr(2)), Point::new(qi(1), qi(-3)));
        assert_eq!(fiber_size(&Point::new(qi(1), qi(-2)), pr(2)), 2);
        assert_eq!(fiber_size(&Point::new(qi(1), q(-1, 2)), pr(2)), 1);
        assert_eq!(fiber_size(&Point::new(qi(0), qi(-7)), pr(2)), 1);
    }

    fn radii(vals: &[QLog]) -> SpectralRadii {
        SpectralRadii {
            at: Point::new(qi(0), qi(0)),
            values: vals.to_vec(),
            status: vec![Certification::Young; vals.len()],
        }
    }

    #[test]
    fn radii_transform() {
        let x = Point::new(qi(0), qi(0));
        let p = pr(2);
        let s = radii(&[l(-2, 1)]);
        let ctx = FrobContext::new(&x, &s.values, p).unwrap();
        assert_eq!(pushforward_radii(&s, &ctx).values, vec![l(-3, 1), l(-3, 1)]);
        let s = radii(&[l(-1, 4)]);
        let ctx = FrobContext::new(&x, &s.values, p).unwrap();
        assert_eq!(pushforward_radii(&s, &ctx).values, vec![l(-2, 1), l(-1, 2)]);
        let s = radii(&[l(-2, 1), l(-1, 4)]);
        let ctx = FrobContext::new(&x, &s.values, p).unwrap();
        assert_eq!(ctx.i_1, 1);
        let pf = pushforward_radii(&s, &ctx);
        assert_eq!(pf.values, vec![l(-3, 1), l(-3, 1), l(-2, 1), l(-1, 2)]);
        assert_eq!(pf.at, Point::new(qi(0), qi(0)));
    }

    #[test]
    fn index_maps_and_heights() {
        let x = Point::new(qi(0), qi(0));
        let p = pr(2);
        let s = radii(&[l(-2, 1)]);
        let ctx = FrobContext::new(&x, &s.values, p).unwrap();
        assert_eq!(index_map(1, 1, &ctx), IndexMap { phi_i: 2, d_i: 1, ell_val: qi(-1) });
        assert_eq!(partial_height_descent(&l(-6, 1), 1, 1, &ctx), l(-2, 1));
        let sm = radii(&[l(-2, 1), l(-1, 4)]);
        let ctx = FrobContext::new(&x, &sm.values, p).unwrap();
        assert_eq!(index_map(2, 2, &ctx).phi_i, 4);
        assert_eq!(index_map(2, 2, &ctx).d_i, 2);
        let pf = pushforward_radii(&sm, &ctx);
        let hp = crate::polygon::NewtonPolygon::from_slopes(&pf.values);
        let h = crate::polygon::NewtonPolygon::from_slopes(&sm.values);
        for i in 1..=2 {
            let m = index_map(i, 2, &ctx);
            assert_eq!(partial_height_descent(hp.height(m.phi_i), i, 2, &ctx), *h.height(i));
        }
        let ctx0 = FrobContext { p, t_log: qi(0), i_1: 0 };
        assert_eq!(index_map(1, 1, &ctx0).phi_i, 2);
        let back: Vec<QLog> = descend_radii(&pf.values, &qi(0), p).into_iter().map(|x| x.0).collect();
        assert_eq!(back, sm.values);
    }

    #[test]
    fn pushforward_examples() {
        let p = pr(2);
        let z = ConnectionMatrix::polynomial(1, vec![Poly::zero()]).unwrap();
        let pz = pushforward_matrix(&z, p).unwrap();
        assert!(pz.entry(0, 0).0.is_zero());
        assert_eq!(pz.entry(1, 1), &(Poly::constant(q(-1, 2)), Poly::monomial(qi(1), 1)));
        assert!(pz.entry(0, 1).0.is_zero() && pz.entry(1, 0).0.is_zero());
        let a = ConnectionMatrix::new(1, vec![(Poly::constant(qi(5)), Poly::monomial(qi(1), 1))]).unwrap();
        let pa = pushforward_matrix(&a, p).unwrap();
        assert_eq!(pa.entry(0, 0), &(Poly::constant(q(5, 2)), Poly::monomial(qi(1), 1)));
        assert_eq!(pa.entry(1, 1), &(Poly::constant(qi(2)), Poly::monomial(qi(1), 1)));
        let b = ConnectionMatrix::polynomial(1, vec![Poly::constant(qi(3))]).unwrap();
        let pb = pushforward_matrix(&b, p).unwrap();
        assert_eq!(pb.entry(0, 1), &(Poly::constant(q(3, 2)), Poly::constant(qi(1))));
        assert_eq!(pb.entry(1, 0), &(Poly::constant(q(3, 2)), Poly::monomial(qi(1), 1)));
        let bad = ConnectionMatrix::new(1, vec![(Poly::constant(qi(1)), Poly::linear(&qi(1)))]).unwrap();
        assert!(matches!(pushforward_matrix(&bad, p), Err(Error::NonLaurent(_))));
    }

    /// Solutions of the push-forward are the `p` "branches" of the original
    /// ones, so the oracle radius at `phi(x)` follows the radii transform.
    #[test]
    fn pushforward_matches_oracle() {
        let p = pr(3);
        let g = ConnectionMatrix::polynomial(1, vec![Poly::constant(q(1, 3))]).unwrap();
        let pg = pushforward_matrix(&g, p).unwrap();
        let x = Point::new(qi(0), qi(0));
        let est = crate::spectral::radius_oracle(&pg, &phi_point(&x, p), 120, p).unwrap();
        let s = radii(&[l(-3, 2)]);
        let ctx = FrobContext::new(&x, &s.values, p).unwrap();
        let pf = pushforward_radii(&s, &ctx);
        let d = est.expect_fin() - pf.values[0].expect_fin();
        assert!(d <= q(1, 10) && -d <= q(1, 10), "{est} vs {}", pf.values[0]);
    }

    #[test]
    fn descent_examples() {
        let cfg = DescentConfig::default();
        let x = Point::new(qi(0), qi(0));
        let p = pr(3);
        let op = DifferentialOperator::factored(vec![konst(q(-1, 3))]).unwrap();
        let rep = descent_certify(&op, &x, p, &cfg).unwrap();
        assert_eq!((rep.levels, rep.stop), (0, DescentStop::Certified));
        assert_eq!(rep.radii.values, vec![l(-3, 2)]);
        let op = DifferentialOperator::factored(vec![konst(qi(-1))]).unwrap();
        let rep = descent_certify(&op, &x, p, &cfg).unwrap();
        assert_eq!((rep.levels, rep.stop), (1, DescentStop::Certified));
        assert_eq!(rep.radii.values, vec![l(-1, 2)]);
        assert_eq!(rep.radii.status, vec![Certification::Frobenius { level: 1 }]);
        let trivial = DifferentialOperator::factored(vec![FactoredRatFun::zero()]).unwrap();
        let rep = descent_certify(&trivial, &x, p, &cfg).unwrap();
        assert_eq!(rep.radii.values, vec![QLog::zero()]);
        assert_eq!(rep.radii.status, vec![Certification::Solvable]);
    }
    fn small_cfg() -> DescentConfig {
        DescentConfig { max_iter: 3, rank_cap: 27, cyclic_attempts: 12 }
    }

    #[test]
    fn segment_exponential() {
        let p = pr(3);
        let op = DifferentialOperator::factored(vec![konst(qi(-1))]).unwrap();
        let mut tower = FrobeniusTower::new(&op, &qi(0), p);
        let seg = segment_descent(&mut tower, &QLog::NegInf, &qi(0), &small_cfg()).unwrap();
        let want = Paf::from_knots(QLog::NegInf, vec![(q(-1, 2), q(-1, 2)), (qi(0), q(-1, 2))], qi(1)).unwrap();
        assert_eq!(seg.values, vec![want]);
        assert!(seg.defects.is_empty(), "{:?}", seg.defects);
        assert_eq!(seg.status_at(&l(-1, 4)), &[Certification::Frobenius { level: 1 }]);
        assert_eq!(seg.status_at(&l(-1, 1)), &[Certification::Solvable]);
        assert_eq!(seg.status_at(&l(-1, 2)), &[Certification::Solvable]);
    }

    #[test]
    fn segment_matches_pointwise() {
        let p = pr(2);
        let cfg = small_cfg();
        let ops = vec![
            DifferentialOperator::factored(vec![konst(q(1, 2))]).unwrap(),
            DifferentialOperator::factored(vec![FactoredRatFun::new(q(-1, 3), vec![(qi(0), -1)]).unwrap()]).unwrap(),
            DifferentialOperator::factored(vec![konst(qi(-3)), konst(qi(2))]).unwrap(),
        ];
        for op in ops {
            let mut tower = FrobeniusTower::new(&op, &qi(0), p);
            let seg = segment_descent(&mut tower, &QLog::from_int(-3), &qi(1), &cfg).unwrap();
            assert!(seg.defects.is_empty(), "{:?}", seg.defects);
            for k in -6..=2 {
                let lq = q(k, 2);
                let rep = descent_certify_in(&mut tower, &lq, &cfg).unwrap();
                let here = seg.at(&QLog::Fin(lq.clone())).unwrap();
                for i in 0..op.rank() {
                    if rep.radii.status[i].is_certified() {
                        assert_eq!(rep.radii.values[i], here.values[i], "L = {lq}");
                    }
                }
            }
        }
    }

    #[test]
    fn switch_lines_include_thresholds() {
        let p = pr(3);
        let w = omega_q(p);
        let lines = switch_lines(1, p);
        assert!(lines.contains(&(qi(3), w.clone())));
        assert!(lines.contains(&(qi(3), qi(3) * &w)));
        assert!(lines.contains(&(qi(3), &w - qi(1))));
    }
}
