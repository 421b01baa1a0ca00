//! Convergence radii and partial heights over an affinoid domain, their
//! controlling graphs, the six-condition finiteness checker and the audit of
//! the structural properties of the radii.
//!
//! Everything is computed on the candidate graph `Gamma_X ∪ Sat(roots)`.
//! Off that graph every function is constant on the residue disks, so its
//! outward slopes there vanish.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frobenius::{descent_certify_in, segment_descent, DescentConfig, DescentStop, FrobeniusTower, StatusPiece};
use crate::line::AffinoidDomain;
use crate::line::{
    maximal_radius, maximal_radius_unchecked, membership, minimal_triangulation, point_eq, point_le, residue_direction,
    skeleton, skeleton_valence, DirectionId, Point, SkeletonGraph,
};
use crate::piecewise::{laplacian, BranchSlopes, Paf, Side, SlopeQ};
use crate::scalars::{floor_q, log_abs, q_serde, qi, qvec_serde, Prime, QLog, Q};
use crate::spectral::{Certification, DifferentialOperator};

/// Position of a convergence radius relative to the generic radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solvability {
    /// `R < r(x)`.
    Spectral,
    /// `R = r(x)`.
    Solvable,
    /// `R > r(x)`.
    OverSolvable,
}

pub fn classify(radius: &QLog, generic: &QLog) -> Solvability {
    match radius.cmp(generic) {
        std::cmp::Ordering::Less => Solvability::Spectral,
        std::cmp::Ordering::Equal => Solvability::Solvable,
        std::cmp::Ordering::Greater => Solvability::OverSolvable,
    }
}

fn check_spectral_bound(spec: &Paf) -> Result<()> {
    let bad = || Error::Precondition("spectral radius above the generic radius".into());
    if spec.knots().iter().any(|k| k.value > k.at) {
        return Err(bad());
    }
    if !spec.lo().is_finite() && *spec.tail_slope() < qi(1) {
        return Err(bad());
    }
    Ok(())
}

/// Whether `spec` starts on the diagonal `f(L) = L`.
fn starts_on_diagonal(spec: &Paf) -> bool {
    let k0 = &spec.knots()[0];
    match spec.lo() {
        QLog::Fin(a) => k0.value == *a,
        _ => *spec.tail_slope() == qi(1) && k0.value == k0.at,
    }
}

/// `log R_i(x)` from the spectral radius along `Lambda(x)` on
/// `[log r(x), log rho_{x,X}]`: the left value when it lies below the
/// diagonal, otherwise the end of the plateau `f(L) = L`.
pub fn convergence_from_spectral(spec: &Paf, x: &Point, dom: &AffinoidDomain, p: Prime) -> Result<QLog> {
    let rho = maximal_radius(x, dom, p)?;
    if *spec.lo() != x.log_radius || QLog::Fin(spec.hi().clone()) != rho {
        return Err(Error::Precondition("spectral profile must live on [log r(x), log rho(x,X)]".into()));
    }
    check_spectral_bound(spec)?;
    if starts_on_diagonal(spec) {
        Ok(spec.diagonal_crossing()?.min(rho))
    } else {
        spec.eval(spec.lo())
    }
}

/// Convergence radii along a path `L -> x_{c,L}` ending at the attachment
/// point, from the spectral radii on the same path. Interior stretches on the
/// diagonal would make the radius jump; they are reported and left as is.
fn convergence_along(spec: &Paf) -> Result<(Paf, Vec<Q>)> {
    check_spectral_bound(spec)?;
    let mut defects = Vec::new();
    let mut start = spec.lo().clone();
    let f = if starts_on_diagonal(spec) {
        let b = spec.diagonal_crossing()?.expect_fin().clone();
        if QLog::Fin(b.clone()) == *spec.lo() {
            spec.clone()
        } else {
            start = QLog::Fin(b.clone());
            let mut knots = Vec::new();
            if let QLog::Fin(a) = spec.lo() {
                knots.push((a.clone(), b.clone()));
            }
            knots.push((b.clone(), b.clone()));
            knots.extend(spec.knots().iter().filter(|k| k.at > b).map(|k| (k.at.clone(), k.value.clone())));
            Paf::from_knots(spec.lo().clone(), knots, Q::zero())?
        }
    } else {
        spec.clone()
    };
    for pc in spec.pieces() {
        if pc.slope == qi(1) && pc.value_hi == pc.hi && pc.lo.is_finite() && pc.lo > start {
            defects.push(pc.lo.expect_fin().clone());
        }
    }
    Ok((f, defects))
}

/// Joins functions on consecutive intervals; a mismatch at a junction is
/// recorded and resolved in favour of the upper function.
fn join(parts: &[&Paf], defects: &mut Vec<Q>) -> Result<Paf> {
    let first = parts.first().ok_or_else(|| Error::Precondition("nothing to join".into()))?;
    let mut knots: Vec<(Q, Q)> = first.knots().iter().map(|k| (k.at.clone(), k.value.clone())).collect();
    for f in &parts[1..] {
        let last = knots.last_mut().unwrap();
        if *f.lo() != QLog::Fin(last.0.clone()) {
            return Err(Error::DomainMismatch);
        }
        if f.knots()[0].value != last.1 {
            defects.push(last.0.clone());
            last.1 = f.knots()[0].value.clone();
        }
        knots.extend(f.knots()[1..].iter().map(|k| (k.at.clone(), k.value.clone())));
    }
    // a modified first knot leaves a single knot with the old tail
    Paf::from_knots(first.lo().clone(), knots, first.tail_slope().clone())
}

/// `L -> log rho_{x_{c,L},X}` on `[lo, hi]`.
pub fn max_radius_along(dom: &AffinoidDomain, c: &Q, lo: &QLog, hi: &Q, p: Prime) -> Result<Paf> {
    let mut f = Paf::constant(lo.clone(), hi.clone(), dom.outer.log_radius.clone());
    for h in &dom.holes {
        let id = Paf::identity(lo.clone(), hi.clone());
        let g = match log_abs(&(c - &h.center), p) {
            QLog::Fin(d) => id.max(&Paf::constant(lo.clone(), hi.clone(), d))?,
            _ => id,
        };
        f = f.min(&g)?;
    }
    Ok(f)
}

/// `log rho_Gamma(x) = inf{L >= log r(x) : lambda_x(L) in Gamma}`; `+inf` if
/// `Lambda(x)` misses the graph.
pub fn constancy_radius(gamma: &SkeletonGraph, x: &Point, p: Prime) -> QLog {
    let mut best = QLog::PosInf;
    for w in &gamma.vertices {
        if point_le(x, w, p) {
            best = best.min(w.log_radius.clone());
        }
    }
    for e in &gamma.edges {
        let l = x.log_radius.clone().max(e.lo.clone()).max(log_abs(&(&x.center - &e.center), p));
        if l <= QLog::Fin(e.hi.clone()) {
            best = best.min(l);
        }
    }
    best
}

/// A function on `X` given by its restrictions to the edges of a graph;
/// constant on every residue disk off the graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphFunction {
    pub graph: SkeletonGraph,
    /// `L -> log F(x_{c,L})` on each edge.
    pub edges: Vec<Paf>,
    pub vertex_values: Vec<QLog>,
}

impl GraphFunction {
    /// Outward slopes at a vertex. Directions without an edge, including
    /// those leaving `X`, are omitted.
    pub fn vertex_slopes(&self, v: usize, p: Prime) -> BranchSlopes {
        let g = &self.graph;
        let mut bs = BranchSlopes::new(g.vertices[v].clone());
        if let Some(e) = g.up_edge(v) {
            let ed = &g.edges[e];
            let s = self.edges[e].slope_at(&ed.lo, Side::Right).ok().flatten().unwrap_or_else(Q::zero);
            bs.push(DirectionId::Infinity, s);
        }
        for e in g.down_edges(v) {
            let ed = &g.edges[e];
            let s =
                self.edges[e].slope_at(&QLog::Fin(ed.hi.clone()), Side::Left).ok().flatten().unwrap_or_else(Q::zero);
            bs.push(g.direction_at(v, e, p), -s);
        }
        bs
    }

    /// Outward slopes at the point `L` in the interior of edge `e`.
    pub fn interior_slopes(&self, e: usize, l: &Q, p: Prime) -> BranchSlopes {
        let ed = &self.graph.edges[e];
        let f = &self.edges[e];
        let at = QLog::Fin(l.clone());
        let mut bs = BranchSlopes::new(ed.point_at(l));
        bs.push(DirectionId::Infinity, f.slope_at(&at, Side::Right).ok().flatten().unwrap_or_else(Q::zero));
        let down = f.slope_at(&at, Side::Left).ok().flatten().unwrap_or_else(Q::zero);
        bs.push(residue_direction(&ed.center, l, p), -down);
        bs
    }

    /// Outward slopes at any point of `X`; empty off the graph.
    pub fn slopes_at(&self, x: &Point, p: Prime) -> BranchSlopes {
        if let Some(v) = self.graph.find(x, p) {
            return self.vertex_slopes(v, p);
        }
        if let Some(e) = self.graph.edge_containing(x, p) {
            return self.interior_slopes(e, x.l(), p);
        }
        BranchSlopes::new(x.clone())
    }

    /// Value at any point of `X` below the root of the graph.
    pub fn value_at(&self, x: &Point, p: Prime) -> Option<QLog> {
        if let Some(v) = self.graph.find(x, p) {
            return Some(self.vertex_values[v].clone());
        }
        if let Some(e) = self.graph.edge_containing(x, p) {
            return self.edges[e].eval(&x.log_radius).ok();
        }
        let hit = constancy_radius(&self.graph, x, p);
        if hit == QLog::PosInf {
            return None;
        }
        self.value_at(&Point { center: x.center.clone(), log_radius: hit }, p)
    }

    /// Edges from `v` up to the first vertex satisfying `stop` (or the root).
    pub fn path_edges(&self, v: usize, stop: &dyn Fn(usize) -> bool) -> Vec<usize> {
        let mut out = Vec::new();
        for e in self.graph.path_to_root(v) {
            out.push(e);
            if stop(self.graph.edges[e].parent) {
                break;
            }
        }
        out
    }

    /// The function along a chain of edges.
    fn along(&self, edges: &[usize], defects: &mut Vec<Q>) -> Result<Paf> {
        let parts: Vec<&Paf> = edges.iter().map(|&e| &self.edges[e]).collect();
        join(&parts, defects)
    }

    /// The function on `x_{c,L}`, `L` in `[lo, hi]`, when this segment lies
    /// on the graph.
    pub fn segment(&self, c: &Q, lo: &QLog, hi: &Q, p: Prime) -> Option<Paf> {
        let x = Point { center: c.clone(), log_radius: lo.clone() };
        let mut chain = Vec::new();
        let mut cur = if let Some(v) = self.graph.find(&x, p) {
            self.graph.up_edge(v)
        } else {
            self.graph.edge_containing(&x, p)
        };
        while let Some(e) = cur {
            chain.push(e);
            if self.graph.edges[e].hi >= *hi {
                break;
            }
            cur = self.graph.up_edge(self.graph.edges[e].parent);
        }
        let last = *chain.last()?;
        if self.graph.edges[last].hi < *hi {
            return None;
        }
        let f = self.along(&chain, &mut Vec::new()).ok()?;
        f.restrict(lo, hi).ok()
    }

    /// Smallest nonzero slope magnitude over all edges.
    pub fn min_nonzero_slope(&self) -> Option<Q> {
        self.edges.iter().filter_map(Paf::min_nonzero_abs_slope).min()
    }
}

/// Profile data along one edge of the candidate graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeProfile {
    /// Whether the edge lies in `Gamma_X`.
    pub on_skeleton: bool,
    #[serde(with = "q_serde")]
    pub tower_center: Q,
    /// `log R_i^{sp}`.
    pub spectral: Vec<Paf>,
    /// `log R_i^F`.
    pub radii: Vec<Paf>,
    /// `log H_i^F`.
    pub heights: Vec<Paf>,
    /// `log rho_{x,X}`.
    pub max_radius: Paf,
    pub status: Vec<StatusPiece>,
    pub levels: u32,
    pub stop: DescentStop,
    #[serde(with = "qvec_serde")]
    pub defects: Vec<Q>,
}

impl EdgeProfile {
    /// Certification at `L`; at a cut the left piece wins.
    pub fn status_at(&self, l: &QLog) -> &[Certification] {
        let i = self.status.iter().position(|pc| *l <= QLog::Fin(pc.hi.clone())).unwrap_or(self.status.len() - 1);
        &self.status[i].status
    }
}

/// Profile data at one vertex of the candidate graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexProfile {
    pub point: Point,
    pub spectral: Vec<QLog>,
    pub radii: Vec<QLog>,
    pub status: Vec<Certification>,
    pub solvability: Vec<Solvability>,
    pub max_radius: QLog,
    /// Outward slopes of `log R_i^F`, one entry per index.
    pub radius_slopes: Vec<BranchSlopes>,
    /// Outward slopes of `log H_i^F`, one entry per index.
    pub height_slopes: Vec<BranchSlopes>,
}

/// Convergence radii of an operator on an affinoid domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadiiProfile {
    pub p: Prime,
    pub rank: usize,
    pub domain: AffinoidDomain,
    pub config: DescentConfig,
    /// `Gamma_X`.
    pub skeleton: SkeletonGraph,
    /// The candidate graph `Gamma_X ∪ Sat(roots in X)`.
    pub graph: SkeletonGraph,
    pub edges: Vec<EdgeProfile>,
    pub vertices: Vec<VertexProfile>,
    /// Vertices where incident edges disagree.
    pub defects: Vec<Point>,
}

impl RadiiProfile {
    fn function(
        &self,
        i: usize,
        pick: impl Fn(&EdgeProfile) -> Paf,
        at_vertex: impl Fn(&VertexProfile) -> QLog,
    ) -> GraphFunction {
        let _ = i;
        GraphFunction {
            graph: self.graph.clone(),
            edges: self.edges.iter().map(pick).collect(),
            vertex_values: self.vertices.iter().map(at_vertex).collect(),
        }
    }

    /// `log R_i^F` for `1 <= i <= r`.
    pub fn radius_fn(&self, i: usize) -> GraphFunction {
        self.function(i, |e| e.radii[i - 1].clone(), |v| v.radii[i - 1].clone())
    }

    /// `log H_i^F`.
    pub fn height_fn(&self, i: usize) -> GraphFunction {
        self.function(
            i,
            |e| e.heights[i - 1].clone(),
            |v| v.radii[..i].iter().cloned().fold(QLog::zero(), |a, b| a + b),
        )
    }

    /// `log H_i(x,F) = log H_i^F - i log rho_{x,X}`.
    pub fn normalized_height_fn(&self, i: usize) -> GraphFunction {
        let c = qi(-(i as i64));
        self.function(
            i,
            |e| e.heights[i - 1].add(&e.max_radius.scale(&c)).expect("same domain"),
            |v| v.radii[..i].iter().cloned().fold(QLog::zero(), |a, b| a + b) + v.max_radius.scale(&c),
        )
    }

    /// `log rho_{x,X}`.
    pub fn max_radius_fn(&self) -> GraphFunction {
        self.function(0, |e| e.max_radius.clone(), |v| v.max_radius.clone())
    }

    /// Radii and certification at any point of `X`.
    pub fn radii_at(&self, x: &Point) -> Option<(Vec<QLog>, Vec<Certification>)> {
        let p = self.p;
        if let Some(v) = self.graph.find(x, p) {
            let vp = &self.vertices[v];
            return Some((vp.radii.clone(), vp.status.clone()));
        }
        if let Some(e) = self.graph.edge_containing(x, p) {
            let ep = &self.edges[e];
            let vals = ep.radii.iter().map(|f| f.eval(&x.log_radius)).collect::<Result<Vec<_>>>().ok()?;
            return Some((vals, ep.status_at(&x.log_radius).to_vec()));
        }
        if !membership(x, &self.domain, p) {
            return None;
        }
        let hit = constancy_radius(&self.graph, x, p);
        self.radii_at(&Point { center: x.center.clone(), log_radius: hit })
    }
}

/// Classification of index `i` at `x`.
pub fn solvability_classify(x: &Point, i: usize, profile: &RadiiProfile) -> Result<Solvability> {
    let (vals, _) = profile.radii_at(x).ok_or_else(|| Error::NotInDomain(x.label()))?;
    let v = vals.get(i.wrapping_sub(1)).ok_or_else(|| Error::Precondition(format!("index {i} out of range")))?;
    Ok(classify(v, &x.log_radius))
}

/// Rank cap for profile construction. Cyclic vectors of rank `p^k r`
/// push-forwards with polynomial coefficients become the bottleneck above
/// it: rank 27 takes minutes per vector where rank 9 takes milliseconds.
pub const PROFILE_RANK_CAP: usize = 9;

/// Descent limits used for profiles.
pub fn profile_config() -> DescentConfig {
    DescentConfig { rank_cap: PROFILE_RANK_CAP, ..DescentConfig::default() }
}

/// Builds the radii profile of `op` on `dom`. Spectral radii come from the
/// Frobenius descent along every edge of the candidate graph; uncertified
/// indices are kept, truncated, and flagged in the status pieces.
pub fn build_profile(
    op: &DifferentialOperator,
    dom: &AffinoidDomain,
    p: Prime,
    cfg: &DescentConfig,
) -> Result<RadiiProfile> {
    dom.validate(p)?;
    if !op.is_factored() {
        return Err(Error::Precondition("profiles need factored coefficients".into()));
    }
    let r = op.rank();
    let gamma_x = skeleton(dom, p);
    let mut leaves: Vec<Point> = dom.holes.iter().map(|h| h.boundary_point()).collect();
    for z in op.roots() {
        let x = Point::rigid(z);
        if membership(&x, dom, p) {
            leaves.push(x);
        }
    }
    let graph = SkeletonGraph::saturate(&dom.root(), &leaves, p);
    let on_skel_v: Vec<bool> = graph.vertices.iter().map(|x| gamma_x.contains(x, p)).collect();

    // one tower per leaf center, shared by every edge above that leaf
    let mut centers: Vec<Option<Q>> = vec![None; graph.edges.len()];
    for leaf in graph.leaves() {
        let c = graph.vertices[leaf].center.clone();
        for e in graph.path_to_root(leaf) {
            if centers[e].is_none() {
                centers[e] = Some(c.clone());
            }
        }
    }
    let mut groups: BTreeMap<Q, Vec<usize>> = BTreeMap::new();
    for (e, c) in centers.iter().enumerate() {
        groups.entry(c.clone().expect("every edge lies above a leaf")).or_default().push(e);
    }
    let jobs: Vec<(Q, Vec<usize>)> = groups.into_iter().collect();
    let results: Vec<Result<Vec<(usize, crate::frobenius::SegmentRadii)>>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(c, es)| {
                let graph = &graph;
                s.spawn(move || {
                    let mut tower = FrobeniusTower::new(op, c, p);
                    es.iter()
                        .map(|&e| {
                            let ed = &graph.edges[e];
                            segment_descent(&mut tower, &ed.lo, &ed.hi, cfg).map(|sr| (e, sr))
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("descent thread panicked")).collect()
    });
    let mut segs: Vec<Option<crate::frobenius::SegmentRadii>> = vec![None; graph.edges.len()];
    for res in results {
        for (e, sr) in res? {
            segs[e] = Some(sr);
        }
    }
    let segs: Vec<crate::frobenius::SegmentRadii> = segs.into_iter().map(|s| s.expect("all edges computed")).collect();

    let spectral = GraphFunction { graph: graph.clone(), edges: Vec::new(), vertex_values: Vec::new() };
    let mut edges = Vec::with_capacity(graph.edges.len());
    for (e, ed) in graph.edges.iter().enumerate() {
        let sr = &segs[e];
        let on_skeleton = on_skel_v[ed.child];
        let mut defects = sr.defects.clone();
        let max_radius = max_radius_along(dom, &ed.center, &ed.lo, &ed.hi, p)?;
        let radii: Vec<Paf> = if on_skeleton {
            sr.values.clone()
        } else {
            let chain = spectral.path_edges(ed.child, &|v| on_skel_v[v]);
            let top = graph.edges[*chain.last().unwrap()].hi.clone();
            (0..r)
                .map(|i| {
                    let parts: Vec<&Paf> = chain.iter().map(|&k| &segs[k].values[i]).collect();
                    let path = join(&parts, &mut defects)?;
                    let (conv, d) = convergence_along(&path)?;
                    defects.extend(d.into_iter().filter(|x| QLog::Fin(x.clone()) >= ed.lo && *x < ed.hi));
                    let _ = &top;
                    conv.restrict(&ed.lo, &ed.hi)
                })
                .collect::<Result<_>>()?
        };
        let mut heights: Vec<Paf> = Vec::with_capacity(r);
        for (i, f) in radii.iter().enumerate() {
            heights.push(if i == 0 { f.clone() } else { heights[i - 1].add(f)? });
        }
        defects.sort();
        defects.dedup();
        edges.push(EdgeProfile {
            on_skeleton,
            tower_center: sr.center.clone(),
            spectral: sr.values.clone(),
            radii,
            heights,
            max_radius,
            status: sr.pieces.clone(),
            levels: sr.levels,
            stop: sr.stop,
            defects,
        });
    }

    let mut vertices = Vec::with_capacity(graph.vertices.len());
    let mut vdefects = Vec::new();
    for (v, x) in graph.vertices.iter().enumerate() {
        let mut seen: Vec<Vec<QLog>> = Vec::new();
        let mut from: Option<(Vec<QLog>, Vec<QLog>, Vec<Certification>)> = None;
        let incident: Vec<(usize, QLog)> = graph
            .up_edge(v)
            .map(|e| (e, graph.edges[e].lo.clone()))
            .into_iter()
            .chain(graph.down_edges(v).into_iter().map(|e| (e, QLog::Fin(graph.edges[e].hi.clone()))))
            .collect();
        for (e, l) in &incident {
            let ep = &edges[*e];
            let rad = ep.radii.iter().map(|f| f.eval(l)).collect::<Result<Vec<_>>>()?;
            seen.push(rad.clone());
            if from.is_none() {
                let sp = ep.spectral.iter().map(|f| f.eval(l)).collect::<Result<Vec<_>>>()?;
                from = Some((sp, rad, ep.status_at(l).to_vec()));
            }
        }
        let (spectral_v, radii_v, status_v) = match from {
            Some(t) => t,
            None => {
                let mut tower = FrobeniusTower::new(op, &x.center, p);
                let rep = descent_certify_in(&mut tower, x.l(), cfg)?;
                (rep.radii.values.clone(), rep.radii.values, rep.radii.status)
            }
        };
        if seen.windows(2).any(|w| w[0] != w[1]) {
            vdefects.push(x.clone());
        }
        let solvability = radii_v.iter().map(|rv| classify(rv, &x.log_radius)).collect();
        vertices.push(VertexProfile {
            point: x.clone(),
            spectral: spectral_v,
            radii: radii_v,
            status: status_v,
            solvability,
            max_radius: maximal_radius_unchecked(x, dom, p),
            radius_slopes: Vec::new(),
            height_slopes: Vec::new(),
        });
    }
    let mut profile = RadiiProfile {
        p,
        rank: r,
        domain: dom.clone(),
        config: *cfg,
        skeleton: gamma_x,
        graph,
        edges,
        vertices,
        defects: vdefects,
    };
    for i in 1..=r {
        let rf = profile.radius_fn(i);
        let hf = profile.height_fn(i);
        for v in 0..profile.vertices.len() {
            let a = rf.vertex_slopes(v, p);
            let b = hf.vertex_slopes(v, p);
            profile.vertices[v].radius_slopes.push(a);
            profile.vertices[v].height_slopes.push(b);
        }
    }
    Ok(profile)
}

/// An end point of a controlling graph off `Gamma_X`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndPoint {
    pub point: Point,
    pub value: QLog,
    /// The value equals the generic radius there.
    pub solvable: bool,
}

/// `Gamma(F) ∪ Gamma_X` with constancy flags on its edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllingGraph {
    pub graph: SkeletonGraph,
    /// Per edge of `graph`: whether the function is constant along it.
    pub constant: Vec<bool>,
    pub end_points: Vec<EndPoint>,
    /// Attachment points with a zero outward slope into a branch on which
    /// the function is not constant.
    pub anomalies: Vec<Point>,
}

/// The controlling graph of a function on its candidate graph: every branch
/// off `Gamma_X` is cut at the top of its initial constant stretch.
pub fn controlling_graph(f: &GraphFunction, gamma_x: &SkeletonGraph, p: Prime) -> ControllingGraph {
    let g = &f.graph;
    let on_skel: Vec<bool> = g.vertices.iter().map(|x| gamma_x.contains(x, p)).collect();
    let mut ends: Vec<Point> = gamma_x.leaves().into_iter().map(|v| gamma_x.vertices[v].clone()).collect();
    let mut end_points = Vec::new();
    let mut live_attach: Vec<(usize, usize)> = Vec::new();
    for leaf in g.leaves() {
        if on_skel[leaf] {
            continue;
        }
        let chain = f.path_edges(leaf, &|v| on_skel[v]);
        let Ok(path) = f.along(&chain, &mut Vec::new()) else { continue };
        let Some(pc) = path.pieces().into_iter().find(|pc| !pc.slope.is_zero()) else { continue };
        let c = g.vertices[leaf].center.clone();
        let x = Point { center: c, log_radius: pc.lo.clone() };
        let value = path.eval(&pc.lo).unwrap_or(QLog::NegInf);
        let solvable = value == x.log_radius;
        if !ends.iter().any(|y| point_eq(y, &x, p)) {
            ends.push(x.clone());
            end_points.push(EndPoint { point: x.canonical(p), value, solvable });
        }
        let top = *chain.last().unwrap();
        live_attach.push((g.edges[top].parent, top));
    }
    let mut anomalies = Vec::new();
    for (a, e) in live_attach {
        let ed = &g.edges[e];
        let s = f.edges[e].slope_at(&QLog::Fin(ed.hi.clone()), Side::Left).ok().flatten().unwrap_or_else(Q::zero);
        if s.is_zero() && !anomalies.iter().any(|y| point_eq(y, &g.vertices[a], p)) {
            anomalies.push(g.vertices[a].clone());
        }
    }
    let root = g.vertices[g.root].clone();
    let graph = SkeletonGraph::saturate(&root, &ends, p);
    let constant =
        graph.edges.iter().map(|e| f.segment(&e.center, &e.lo, &e.hi, p).is_some_and(|s| s.is_constant())).collect();
    ControllingGraph { graph, constant, end_points, anomalies }
}

/// `Gamma(R_i^F) ∪ Gamma_X`.
pub fn prune_to_controlling_graph(profile: &RadiiProfile, i: usize) -> ControllingGraph {
    controlling_graph(&profile.radius_fn(i), &profile.skeleton, profile.p)
}

/// Upper bound `max(0, floor(slope / nu) - 1)` on the number of bifurcation
/// points of the controlling graph inside a disk entered with `slope`.
pub fn branch_bound(slope: &Q, nu: &Q) -> i64 {
    assert!(nu.is_positive(), "nu must be positive");
    (floor_q(&(slope / nu)) - 1).max(0)
}

/// Bifurcations of a controlling graph inside one residue disk off `Gamma_X`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCount {
    pub attach: Point,
    pub direction: DirectionId,
    pub slope: SlopeQ,
    pub bifurcations: usize,
}

/// For every branch of the candidate graph leaving `Gamma_X`: the outward
/// slope at the attachment point and the bifurcations of `cg` inside.
pub fn branch_counts(f: &GraphFunction, cg: &ControllingGraph, gamma_x: &SkeletonGraph, p: Prime) -> Vec<BranchCount> {
    let g = &f.graph;
    let mut out = Vec::new();
    for (e, ed) in g.edges.iter().enumerate() {
        let (child, parent) = (&g.vertices[ed.child], &g.vertices[ed.parent]);
        if gamma_x.contains(child, p) || !gamma_x.contains(parent, p) {
            continue;
        }
        let l_a = parent.log_radius.clone();
        let s = f.edges[e].slope_at(&l_a, Side::Left).ok().flatten().unwrap_or_else(Q::zero);
        let inside = |w: &Point| w.log_radius < l_a && log_abs(&(&w.center - &child.center), p) < l_a;
        let bifurcations = cg.graph.bifurcations().into_iter().filter(|&w| inside(&cg.graph.vertices[w])).count();
        out.push(BranchCount {
            attach: parent.clone(),
            direction: g.direction_at(ed.parent, e, p),
            slope: SlopeQ(-s),
            bifurcations,
        });
    }
    out
}

/// `rho_Gamma` on its own graph: `L -> L` along every edge.
pub fn rho_gamma(gamma: &SkeletonGraph) -> GraphFunction {
    GraphFunction {
        graph: gamma.clone(),
        edges: gamma.edges.iter().map(|e| Paf::identity(e.lo.clone(), e.hi.clone())).collect(),
        vertex_values: gamma.vertices.iter().map(|x| x.log_radius.clone()).collect(),
    }
}

/// A witness for a failed condition or check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub at: Point,
    pub direction: Option<DirectionId>,
    pub slope: Option<SlopeQ>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub name: String,
    pub pass: bool,
    pub witnesses: Vec<Witness>,
}

/// Outcome of the six-condition finiteness criterion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub conditions: Vec<ConditionResult>,
    /// Smallest nonzero slope magnitude observed.
    pub nu: Option<SlopeQ>,
    pub exceptional: Vec<Point>,
    pub controlling_graph: ControllingGraph,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn witness(at: &Point, direction: Option<DirectionId>, slope: Option<Q>, detail: impl Into<String>) -> Witness {
    Witness { at: at.clone(), direction, slope: slope.map(SlopeQ), detail: detail.into() }
}

/// Checks (C1)-(C6) for `f` relative to the admissible graph `gamma`, with
/// exceptional set `exceptional` and slope floor `nu_floor` for (C4).
pub fn check_conditions(
    f: &GraphFunction,
    dom: &AffinoidDomain,
    p: Prime,
    gamma: &SkeletonGraph,
    exceptional: &[Point],
    nu_floor: &Q,
) -> CriterionReport {
    let g = &f.graph;
    let gamma_x = skeleton(dom, p);
    let cg = controlling_graph(f, &gamma_x, p);
    let mut conds = Vec::new();

    // (C1) constancy radius positive at type-1 points
    let mut w1 = Vec::new();
    for (e, ed) in g.edges.iter().enumerate() {
        if ed.lo == QLog::NegInf && !f.edges[e].tail_slope().is_zero() {
            w1.push(witness(
                &g.vertices[ed.child],
                Some(DirectionId::Infinity),
                Some(f.edges[e].tail_slope().clone()),
                "not constant near a type-1 point",
            ));
        }
    }
    conds.push(ConditionResult { name: "C1".into(), pass: w1.is_empty(), witnesses: w1 });

    // (C2) continuity at the vertices; finitely many breaks holds by representation
    let mut w2 = Vec::new();
    for (v, x) in g.vertices.iter().enumerate() {
        let mut vals: Vec<QLog> = vec![f.vertex_values[v].clone()];
        if let Some(e) = g.up_edge(v) {
            vals.push(f.edges[e].eval(&g.edges[e].lo).unwrap_or(QLog::PosInf));
        }
        for e in g.down_edges(v) {
            vals.push(f.edges[e].eval(&QLog::Fin(g.edges[e].hi.clone())).unwrap_or(QLog::PosInf));
        }
        if vals.windows(2).any(|w| w[0] != w[1]) {
            w2.push(witness(x, None, None, "values of the incident edges differ"));
        }
    }
    conds.push(ConditionResult { name: "C2".into(), pass: w2.is_empty(), witnesses: w2 });

    // (C3) concavity below rho_Gamma from every vertex off Gamma
    let mut w3 = Vec::new();
    for (v, x) in g.vertices.iter().enumerate() {
        if v == g.root || gamma.contains(x, p) {
            continue;
        }
        let hit = constancy_radius(gamma, x, p);
        let chain = f.path_edges(v, &|_| false);
        let Ok(path) = f.along(&chain, &mut Vec::new()) else { continue };
        let hi = match &hit {
            QLog::Fin(h) if h <= path.hi() => h.clone(),
            _ => path.hi().clone(),
        };
        if QLog::Fin(hi.clone()) <= x.log_radius {
            continue;
        }
        match path.restrict(&x.log_radius, &hi) {
            Ok(seg) if !seg.is_concave() => {
                let bad = seg.pieces().windows(2).find(|w| w[0].slope < w[1].slope).map(|w| w[0].hi.clone());
                let at = bad.map_or(x.clone(), |l| Point::new(x.center.clone(), l));
                w3.push(witness(&at, Some(DirectionId::Infinity), None, "convex break below rho_Gamma"));
            }
            _ => {}
        }
    }
    conds.push(ConditionResult { name: "C3".into(), pass: w3.is_empty(), witnesses: w3 });

    // (C4) nonzero slopes bounded away from zero
    let nu = f.min_nonzero_slope();
    let mut w4 = Vec::new();
    if let Some(n) = &nu {
        if n < nu_floor {
            for (e, ed) in g.edges.iter().enumerate() {
                if let Some(pc) = f.edges[e].pieces().into_iter().find(|pc| pc.slope.abs() == *n) {
                    w4.push(witness(
                        &ed.point_at(&pc.hi),
                        Some(DirectionId::Infinity),
                        Some(pc.slope),
                        "slope below the floor",
                    ));
                    break;
                }
            }
        }
    }
    conds.push(ConditionResult { name: "C4".into(), pass: w4.is_empty(), witnesses: w4 });

    // (C5) the graph is finite, so every bifurcation has finitely many
    // non-constant directions
    conds.push(ConditionResult { name: "C5".into(), pass: true, witnesses: Vec::new() });

    // (C6) super-harmonic at bifurcations of Gamma(F) off C ∪ ∂X
    let mut w6 = Vec::new();
    for v in cg.graph.bifurcations() {
        let x = &cg.graph.vertices[v];
        if dom.is_boundary(x, p) || exceptional.iter().any(|c| point_eq(c, x, p)) {
            continue;
        }
        let bs = f.slopes_at(x, p);
        let dd = laplacian(&bs);
        if dd.is_positive() {
            w6.push(witness(x, None, Some(dd), "positive laplacian at a bifurcation"));
        }
    }
    conds.push(ConditionResult { name: "C6".into(), pass: w6.is_empty(), witnesses: w6 });

    CriterionReport { conditions: conds, nu: nu.map(SlopeQ), exceptional: exceptional.to_vec(), controlling_graph: cg }
}

/// (C1)-(C6) for `log R_i^F`, with slope floor `1/r`.
pub fn check_criterion(
    profile: &RadiiProfile,
    i: usize,
    gamma: &SkeletonGraph,
    exceptional: &[Point],
) -> CriterionReport {
    let floor = Q::new(Q::one().numer().clone(), (profile.rank as i64).into());
    check_conditions(&profile.radius_fn(i), &profile.domain, profile.p, gamma, exceptional, &floor)
}

/// One violated property.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub index: usize,
    pub at: Point,
    pub direction: Option<DirectionId>,
    pub value: SlopeQ,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
    /// Failures are reported as gaps and do not make the audit unclean.
    pub informational: bool,
}

/// Outcome of the structural audit of a profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checks: Vec<CheckSummary>,
    pub violations: Vec<Violation>,
    /// Failures of the harmonicity equality. The model only has residue
    /// directions with rational centers, while the equality sums over all
    /// residue classes over an algebraically closed field; a slope carried
    /// by a missing class cannot be seen, so these are not violations.
    pub harmonic_gaps: Vec<Violation>,
    /// The exceptional sets `C_1, ..., C_r`.
    pub exceptional: Vec<Vec<Point>>,
    /// Points exempted from the super-harmonicity checks because some index
    /// is not certified there.
    pub undetermined: Vec<Point>,
    pub defects: Vec<Point>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations_of(&self, name: &str) -> usize {
        self.violations.iter().filter(|v| v.check == name).count()
    }
}

pub const CHECK_INTEGRALITY: &str = "integrality";
pub const CHECK_DENOMINATORS: &str = "denominators";
pub const CHECK_CONCAVITY: &str = "concavity";
pub const CHECK_SUPERHARMONIC: &str = "superharmonic";
pub const CHECK_BOUNDARY: &str = "boundary_bound";
pub const CHECK_R1: &str = "r1_superharmonic";
pub const CHECK_HARMONIC: &str = "harmonic_vertices";

const CHECKS: [&str; 7] = [
    CHECK_INTEGRALITY,
    CHECK_DENOMINATORS,
    CHECK_CONCAVITY,
    CHECK_SUPERHARMONIC,
    CHECK_BOUNDARY,
    CHECK_R1,
    CHECK_HARMONIC,
];

/// Where the audit evaluates slopes: every vertex, every breakpoint and one
/// point inside each affine piece.
#[derive(Debug, Clone)]
enum Site {
    Vertex(usize),
    Interior(usize, Q),
}

fn audit_sites(profile: &RadiiProfile) -> Vec<Site> {
    let mut out: Vec<Site> = (0..profile.graph.vertices.len()).map(Site::Vertex).collect();
    for (e, ep) in profile.edges.iter().enumerate() {
        let ed = &profile.graph.edges[e];
        let mut xs: Vec<Q> = ep
            .radii
            .iter()
            .chain(ep.heights.iter())
            .chain(std::iter::once(&ep.max_radius))
            .flat_map(|f| f.breakpoints())
            .collect();
        xs.extend(ep.status.iter().map(|s| s.hi.clone()));
        xs.retain(|x| QLog::Fin(x.clone()) > ed.lo && *x < ed.hi);
        let mut ends = xs.clone();
        if let QLog::Fin(a) = &ed.lo {
            ends.push(a.clone());
        }
        ends.push(ed.hi.clone());
        ends.sort();
        ends.dedup();
        let mut mids: Vec<Q> = ends.windows(2).map(|w| (&w[0] + &w[1]) / qi(2)).collect();
        if !ed.lo.is_finite() {
            mids.push(&ends[0] - qi(1));
        }
        xs.extend(mids);
        xs.sort();
        xs.dedup();
        out.extend(xs.into_iter().map(|x| Site::Interior(e, x)));
    }
    out
}

fn is_integer(x: &Q) -> bool {
    x.denom().is_one()
}

fn denominator_ok(x: &Q, r: usize) -> bool {
    x.denom() <= &num_bigint::BigInt::from(r)
}

/// Audits the properties of the radii: integrality of the slopes of `H_i` at
/// vertex indices, slope denominators at most `r`, concavity along the
/// skeleton and along branches, super-harmonicity of `H_i(-,F)` off
/// `S_X ∪ C_i` with the boundary bound on `S_X - ∂X`, super-harmonicity of
/// `R_1^F` off `∂X`. Harmonicity at solvability-free vertex indices is
/// evaluated and reported separately in `harmonic_gaps`.
pub fn audit_main_theorem(profile: &RadiiProfile) -> AuditReport {
    let p = profile.p;
    let r = profile.rank;
    let dom = &profile.domain;
    let gamma_x = &profile.skeleton;
    let s_x = minimal_triangulation(dom, p);
    let radius_fns: Vec<GraphFunction> = (1..=r).map(|i| profile.radius_fn(i)).collect();
    let height_fns: Vec<GraphFunction> = (1..=r).map(|i| profile.height_fn(i)).collect();
    let norm_fns: Vec<GraphFunction> = (1..=r).map(|i| profile.normalized_height_fn(i)).collect();
    let gamma_r: Vec<ControllingGraph> = radius_fns.iter().map(|f| controlling_graph(f, gamma_x, p)).collect();
    let gamma_h: Vec<ControllingGraph> = norm_fns.iter().map(|f| controlling_graph(f, gamma_x, p)).collect();

    let mut violations = Vec::new();
    let mut harmonic_gaps = Vec::new();
    let mut checked: BTreeMap<&str, usize> = CHECKS.iter().map(|c| (*c, 0)).collect();
    let mut bump = |name: &'static str| *checked.get_mut(name).unwrap() += 1;
    let push = |v: &mut Vec<Violation>,
                check: &str,
                index: usize,
                at: &Point,
                direction: Option<DirectionId>,
                value: Q,
                detail: String| {
        v.push(Violation { check: check.into(), index, at: at.clone(), direction, value: SlopeQ(value), detail });
    };

    // exceptional sets: solvable (or uncertified) end points of Gamma(R_k)
    // lying in Gamma(H_k) and in Gamma_{k-1}
    let mut exceptional: Vec<Vec<Point>> = Vec::new();
    let mut acc: Vec<Point> = Vec::new();
    let mut prev = gamma_x.clone();
    let root = profile.graph.vertices[profile.graph.root].clone();
    for k in 1..=r {
        let cg = &gamma_r[k - 1];
        for v in cg.graph.leaves() {
            let xi = &cg.graph.vertices[v];
            if dom.is_boundary(xi, p) {
                continue;
            }
            let Some((vals, status)) = profile.radii_at(xi) else { continue };
            let solvable = vals[k - 1] == xi.log_radius || !status[k - 1].is_certified();
            if solvable
                && gamma_h[k - 1].graph.contains(xi, p)
                && prev.contains(xi, p)
                && !acc.iter().any(|y| point_eq(y, xi, p))
            {
                acc.push(xi.clone());
            }
        }
        exceptional.push(acc.clone());
        let mut leaves: Vec<Point> = prev.leaves().into_iter().map(|v| prev.vertices[v].clone()).collect();
        leaves.extend(cg.graph.leaves().into_iter().map(|v| cg.graph.vertices[v].clone()));
        prev = SkeletonGraph::saturate(&root, &leaves, p);
    }

    let mut undetermined: Vec<Point> = Vec::new();
    for site in audit_sites(profile) {
        let (x, vals, status) = match &site {
            Site::Vertex(v) => {
                let vp = &profile.vertices[*v];
                (vp.point.clone(), vp.radii.clone(), vp.status.clone())
            }
            Site::Interior(e, l) => {
                let ep = &profile.edges[*e];
                let lq = QLog::Fin(l.clone());
                let vals = ep.radii.iter().map(|f| f.eval(&lq).expect("inside the edge")).collect();
                (profile.graph.edges[*e].point_at(l), vals, ep.status_at(&lq).to_vec())
            }
        };
        let slopes = |f: &GraphFunction| match &site {
            Site::Vertex(v) => f.vertex_slopes(*v, p),
            Site::Interior(e, l) => f.interior_slopes(*e, l, p),
        };
        let boundary = dom.is_boundary(&x, p);
        let in_sx = s_x.iter().any(|y| point_eq(y, &x, p));
        let n_x = skeleton_valence(gamma_x, &x, p) as i64;
        let i_sp = vals.iter().filter(|v| **v < x.log_radius).count();
        let uncertified = |i: usize| status[..i].iter().any(|s| !s.is_certified());
        if uncertified(r) && !undetermined.iter().any(|y| point_eq(y, &x, p)) {
            undetermined.push(x.clone());
        }
        for i in 1..=r {
            let vertex_index = i == r || vals[i - 1] < vals[i];
            let hf = slopes(&height_fns[i - 1]);
            let hn = slopes(&norm_fns[i - 1]);
            for bs in [&hf, &hn] {
                for (dir, s) in &bs.entries {
                    if vertex_index {
                        bump(CHECK_INTEGRALITY);
                        if !is_integer(&s.0) {
                            push(
                                &mut violations,
                                CHECK_INTEGRALITY,
                                i,
                                &x,
                                Some(dir.clone()),
                                s.0.clone(),
                                "slope of H_i at a vertex index".into(),
                            );
                        }
                    }
                    bump(CHECK_DENOMINATORS);
                    if !denominator_ok(&s.0, r) {
                        push(
                            &mut violations,
                            CHECK_DENOMINATORS,
                            i,
                            &x,
                            Some(dir.clone()),
                            s.0.clone(),
                            "slope denominator above the rank".into(),
                        );
                    }
                }
            }
            if boundary {
                continue;
            }
            let dd = laplacian(&hn);
            let exempt = uncertified(i);
            let in_c = exceptional[i - 1].iter().any(|c| point_eq(c, &x, p));
            let bound = if in_sx { qi((n_x - 2) * i.min(i_sp) as i64) } else { Q::zero() };
            if in_sx {
                bump(CHECK_BOUNDARY);
                if !exempt && dd > bound {
                    push(
                        &mut violations,
                        CHECK_BOUNDARY,
                        i,
                        &x,
                        None,
                        dd.clone(),
                        format!("laplacian of H_i above {}", crate::scalars::fmt_q(&bound)),
                    );
                }
            } else if !in_c {
                bump(CHECK_SUPERHARMONIC);
                if !exempt && dd.is_positive() {
                    push(
                        &mut violations,
                        CHECK_SUPERHARMONIC,
                        i,
                        &x,
                        None,
                        dd.clone(),
                        "positive laplacian of H_i".into(),
                    );
                }
            }
            let free = (0..i).all(|j| vals[j] != x.log_radius) && !exempt;
            if vertex_index && free && gamma_h[i - 1].graph.contains(&x, p) {
                bump(CHECK_HARMONIC);
                if dd != bound {
                    push(
                        &mut harmonic_gaps,
                        CHECK_HARMONIC,
                        i,
                        &x,
                        None,
                        dd.clone(),
                        format!("laplacian differs from {}", crate::scalars::fmt_q(&bound)),
                    );
                }
            }
        }
        if !boundary {
            bump(CHECK_R1);
            let dd = laplacian(&slopes(&radius_fns[0]));
            if dd.is_positive() {
                push(&mut violations, CHECK_R1, 1, &x, None, dd, "positive laplacian of R_1".into());
            }
        }
    }

    concavity_checks(profile, &height_fns, &radius_fns, &mut violations, &mut bump);

    let checks = CHECKS
        .iter()
        .map(|c| CheckSummary {
            name: (*c).into(),
            checked: checked[c],
            violations: violations.iter().chain(&harmonic_gaps).filter(|v| v.check == *c).count(),
            informational: *c == CHECK_HARMONIC,
        })
        .collect();
    let mut defects = profile.defects.clone();
    for (e, ep) in profile.edges.iter().enumerate() {
        defects.extend(ep.defects.iter().map(|l| profile.graph.edges[e].point_at(l)));
    }
    AuditReport { checks, violations, harmonic_gaps, exceptional, undetermined, defects }
}

/// Concavity of `H_i^F` along `Gamma_X` and along the paths from every
/// vertex off `Gamma_X` to its attachment point, where convex breaks are
/// allowed only at the radii of the starting point. On stretches free of
/// solvability `H_i^F` must not increase toward the attachment point.
fn concavity_checks(
    profile: &RadiiProfile,
    height_fns: &[GraphFunction],
    radius_fns: &[GraphFunction],
    violations: &mut Vec<Violation>,
    bump: &mut impl FnMut(&'static str),
) {
    let p = profile.p;
    let g = &profile.graph;
    let s_x = minimal_triangulation(&profile.domain, p);
    let on_skel: Vec<bool> = profile.edges.iter().map(|e| e.on_skeleton).collect();
    let v_on_skel: Vec<bool> = g.vertices.iter().map(|x| profile.skeleton.contains(x, p)).collect();
    let mut push = |i: usize, at: Point, value: Q, detail: &str| {
        violations.push(Violation {
            check: CHECK_CONCAVITY.into(),
            index: i,
            at,
            direction: None,
            value: SlopeQ(value),
            detail: detail.into(),
        });
    };
    for (i0, hf) in height_fns.iter().enumerate() {
        let i = i0 + 1;
        // along Gamma_X: inside edges, and through vertices off S_X
        for (e, ed) in g.edges.iter().enumerate() {
            if !on_skel[e] {
                continue;
            }
            bump(CHECK_CONCAVITY);
            for w in hf.edges[e].pieces().windows(2) {
                if w[0].slope < w[1].slope {
                    push(i, ed.point_at(&w[0].hi), &w[1].slope - &w[0].slope, "convex break of H_i on the skeleton");
                }
            }
        }
        for (v, x) in g.vertices.iter().enumerate() {
            if !v_on_skel[v] || s_x.iter().any(|y| point_eq(y, x, p)) {
                continue;
            }
            let Some(up) = g.up_edge(v) else { continue };
            let downs: Vec<usize> = g.down_edges(v).into_iter().filter(|&e| on_skel[e]).collect();
            if downs.len() != 1 {
                continue;
            }
            bump(CHECK_CONCAVITY);
            let right = hf.edges[up].slope_at(&g.edges[up].lo, Side::Right).ok().flatten().unwrap_or_else(Q::zero);
            let left = hf.edges[downs[0]]
                .slope_at(&QLog::Fin(g.edges[downs[0]].hi.clone()), Side::Left)
                .ok()
                .flatten()
                .unwrap_or_else(Q::zero);
            if right > left {
                push(i, x.clone(), &right - &left, "convex break of H_i on the skeleton");
            }
        }
        // along the branches
        for (v, x) in g.vertices.iter().enumerate() {
            if v_on_skel[v] {
                continue;
            }
            let chain = hf.path_edges(v, &|u| v_on_skel[u]);
            let Ok(path) = hf.along(&chain, &mut Vec::new()) else { continue };
            bump(CHECK_CONCAVITY);
            let allowed: Vec<QLog> = profile.vertices[v].radii[..i].to_vec();
            let pcs = path.pieces();
            for w in pcs.windows(2) {
                let at = QLog::Fin(w[0].hi.clone());
                if w[0].slope < w[1].slope && !allowed.contains(&at) {
                    push(
                        i,
                        Point::new(x.center.clone(), w[0].hi.clone()),
                        &w[1].slope - &w[0].slope,
                        "convex break of H_i on a branch",
                    );
                }
            }
            let rpaths: Vec<Paf> =
                radius_fns[..i].iter().filter_map(|rf| rf.along(&chain, &mut Vec::new()).ok()).collect();
            for pc in &pcs {
                if !pc.slope.is_positive() {
                    continue;
                }
                let mid = match &pc.lo {
                    QLog::Fin(a) => (a + &pc.hi) / qi(2),
                    _ => &pc.hi - qi(1),
                };
                let free = rpaths.iter().all(|f| f.eval_fin(&mid) != mid);
                if free {
                    push(
                        i,
                        Point::new(x.center.clone(), mid),
                        pc.slope.clone(),
                        "H_i increases toward the skeleton without solvability",
                    );
                }
            }
        }
    }
}
