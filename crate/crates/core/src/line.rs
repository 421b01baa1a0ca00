//! Points, affinoid domains, skeleta and directions of the Berkovich line.
//!
//! A point `x_{c,L}` is the sup-norm on the closed disk of center `c` and
//! log-radius `L`; `L = -inf` gives the type-1 point `c`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalars::{ceil_q, floor_q, fmt_q, log_abs, p_adic_truncate, q_serde, Prime, QLog, Q};

/// The point `x_{c,L}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    #[serde(with = "q_serde")]
    pub center: Q,
    pub log_radius: QLog,
}

impl Point {
    pub fn new(center: Q, log_radius: Q) -> Self {
        Point { center, log_radius: QLog::Fin(log_radius) }
    }

    /// The type-1 point `c`.
    pub fn rigid(center: Q) -> Self {
        Point { center, log_radius: QLog::NegInf }
    }

    pub fn is_rigid(&self) -> bool {
        self.log_radius == QLog::NegInf
    }

    /// Finite log-radius; panics on type-1 points.
    pub fn l(&self) -> &Q {
        self.log_radius.expect_fin()
    }

    /// The same point with the canonical center (p-adic truncation to the
    /// digits that matter for the disk).
    pub fn canonical(&self, p: Prime) -> Point {
        match &self.log_radius {
            QLog::Fin(l) => {
                Point { center: p_adic_truncate(&self.center, ceil_q(&-l), p), log_radius: self.log_radius.clone() }
            }
            _ => self.clone(),
        }
    }

    /// Label `x_{c,L}` used in reports and DOT output.
    pub fn label(&self) -> String {
        format!("x_{{{},{}}}", fmt_q(&self.center), self.log_radius)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Same closed disk: equal radii and `log|c - c'| <= L`.
pub fn point_eq(a: &Point, b: &Point, p: Prime) -> bool {
    a.log_radius == b.log_radius && log_abs(&(&a.center - &b.center), p) <= a.log_radius
}

/// `a <= b` in the tree order: the disk of `a` is contained in that of `b`.
pub fn point_le(a: &Point, b: &Point, p: Prime) -> bool {
    a.log_radius <= b.log_radius && log_abs(&(&a.center - &b.center), p) <= b.log_radius
}

/// The smallest point above both `a` and `b`.
pub fn meet(a: &Point, b: &Point, p: Prime) -> Point {
    let d = log_abs(&(&a.center - &b.center), p);
    let l = a.log_radius.clone().max(b.log_radius.clone()).max(d);
    Point { center: a.center.clone(), log_radius: l }
}

/// `lambda_x(L') = x_{c, max(L, L')}`.
pub fn lambda(x: &Point, l: &QLog) -> Point {
    Point { center: x.center.clone(), log_radius: x.log_radius.clone().max(l.clone()) }
}

/// Generic radius `r(x)`; for rational centers it is the log-radius itself.
pub fn generic_radius(x: &Point) -> QLog {
    x.log_radius.clone()
}

/// A closed or open disk, depending on context.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Disk {
    #[serde(with = "q_serde")]
    pub center: Q,
    #[serde(with = "q_serde")]
    pub log_radius: Q,
}

impl Disk {
    pub fn new(center: Q, log_radius: Q) -> Self {
        Disk { center, log_radius }
    }

    pub fn boundary_point(&self) -> Point {
        Point::new(self.center.clone(), self.log_radius.clone())
    }
}

/// `X = D^+(c_0, L_0)` minus the open disks `D^-(c_i, L_i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffinoidDomain {
    pub outer: Disk,
    #[serde(default)]
    pub holes: Vec<Disk>,
}

impl AffinoidDomain {
    pub fn disk(center: Q, log_radius: Q) -> Self {
        AffinoidDomain { outer: Disk::new(center, log_radius), holes: Vec::new() }
    }

    pub fn with_hole(mut self, center: Q, log_radius: Q) -> Self {
        self.holes.push(Disk::new(center, log_radius));
        self
    }

    /// Checks that the holes lie in the outer disk and are pairwise disjoint.
    pub fn validate(&self, p: Prime) -> Result<()> {
        let l0 = QLog::Fin(self.outer.log_radius.clone());
        for (i, h) in self.holes.iter().enumerate() {
            if log_abs(&(&h.center - &self.outer.center), p) > l0 {
                return Err(Error::InvalidDomain(format!("hole {i} center outside the outer disk")));
            }
            if h.log_radius > self.outer.log_radius {
                return Err(Error::InvalidDomain(format!("hole {i} larger than the outer disk")));
            }
            for (j, k) in self.holes.iter().enumerate().skip(i + 1) {
                let d = log_abs(&(&h.center - &k.center), p);
                let m = QLog::Fin(std::cmp::max(&h.log_radius, &k.log_radius).clone());
                if d < m {
                    return Err(Error::InvalidDomain(format!("holes {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Shilov boundary: the outer boundary point and the hole boundary points.
    pub fn boundary(&self) -> Vec<Point> {
        std::iter::once(self.outer.boundary_point()).chain(self.holes.iter().map(Disk::boundary_point)).collect()
    }

    pub fn is_boundary(&self, x: &Point, p: Prime) -> bool {
        self.boundary().iter().any(|b| point_eq(b, x, p))
    }

    pub fn root(&self) -> Point {
        self.outer.boundary_point()
    }
}

/// Whether `x` lies in `X`. Holes are open, so hole boundaries are members.
pub fn membership(x: &Point, dom: &AffinoidDomain, p: Prime) -> bool {
    let l0 = QLog::Fin(dom.outer.log_radius.clone());
    if x.log_radius > l0 || log_abs(&(&x.center - &dom.outer.center), p) > l0 {
        return false;
    }
    dom.holes.iter().all(|h| {
        let li = QLog::Fin(h.log_radius.clone());
        !(x.log_radius < li && log_abs(&(&x.center - &h.center), p) < li)
    })
}

/// Log-radius of the maximal open disk of `X` containing a generic point of
/// `x`: `min(L_0, min_i max(log|c - c_i|, L))`.
pub fn maximal_radius(x: &Point, dom: &AffinoidDomain, p: Prime) -> Result<QLog> {
    if !membership(x, dom, p) {
        return Err(Error::NotInDomain(x.label()));
    }
    Ok(maximal_radius_unchecked(x, dom, p))
}

pub(crate) fn maximal_radius_unchecked(x: &Point, dom: &AffinoidDomain, p: Prime) -> QLog {
    let mut best = QLog::Fin(dom.outer.log_radius.clone());
    for h in &dom.holes {
        let d = log_abs(&(&x.center - &h.center), p).max(x.log_radius.clone());
        best = best.min(d);
    }
    best
}

/// The minimal triangulation `S_X`: boundary points plus the points
/// `x_{c_i, log|c_i - c_j|}` for distinct holes.
pub fn minimal_triangulation(dom: &AffinoidDomain, p: Prime) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    let mut push = |x: Point| {
        if !out.iter().any(|y| point_eq(y, &x, p)) {
            out.push(x);
        }
    };
    for b in dom.boundary() {
        push(b);
    }
    for (i, a) in dom.holes.iter().enumerate() {
        for (j, b) in dom.holes.iter().enumerate() {
            if i != j {
                push(Point { center: a.center.clone(), log_radius: log_abs(&(&a.center - &b.center), p) });
            }
        }
    }
    out
}

/// Analytic skeleton `Gamma_X`: the union of the paths from the hole
/// boundaries to the outer boundary.
pub fn skeleton(dom: &AffinoidDomain, p: Prime) -> SkeletonGraph {
    let holes: Vec<Point> = dom.holes.iter().map(Disk::boundary_point).collect();
    SkeletonGraph::saturate(&dom.root(), &holes, p)
}

/// A germ of segment out of a point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DirectionId {
    /// Toward increasing radius.
    Infinity,
    /// The open residue disk `D^-(center, L)`; `center` is canonical.
    Disk {
        #[serde(with = "q_serde")]
        center: Q,
        #[serde(with = "q_serde")]
        log_radius: Q,
    },
}

/// Target of a direction query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Infinity,
    At(Q),
}

/// The germ out of `x` pointing at `target`. A rational strictly outside the
/// closed disk of `x` is reached through the direction toward infinity.
pub fn direction_of(x: &Point, target: &Target, p: Prime) -> Result<DirectionId> {
    let l = match &x.log_radius {
        QLog::Fin(l) => l.clone(),
        _ => return Err(Error::Precondition("directions are only defined at type-2/3 points".into())),
    };
    match target {
        Target::Infinity => Ok(DirectionId::Infinity),
        Target::At(z) => {
            if log_abs(&(&x.center - z), p) > x.log_radius {
                return Ok(DirectionId::Infinity);
            }
            Ok(residue_direction(z, &l, p))
        }
    }
}

/// The direction `D^-(z, L)` with a canonical center.
pub(crate) fn residue_direction(z: &Q, l: &Q, p: Prime) -> DirectionId {
    // v_p(z - z') > -L  iff  v_p(z - z') >= floor(-L) + 1
    let m = floor_q(&-l) + 1;
    DirectionId::Disk { center: p_adic_truncate(z, m, p), log_radius: l.clone() }
}

/// A segment `{x_{c,L} : L in [lo, hi]}` joining `child` to its parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub child: usize,
    pub parent: usize,
    #[serde(with = "q_serde")]
    pub center: Q,
    pub lo: QLog,
    #[serde(with = "q_serde")]
    pub hi: Q,
}

impl Edge {
    pub fn point_at(&self, l: &Q) -> Point {
        Point::new(self.center.clone(), l.clone())
    }
}

/// A finite rooted tree of points; edges run from each vertex up to its parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonGraph {
    pub vertices: Vec<Point>,
    pub root: usize,
    pub edges: Vec<Edge>,
}

impl SkeletonGraph {
    /// `Sat({root} ∪ leaves)`: the union of the paths from every leaf to the
    /// root, with all pairwise meeting points as vertices. Leaves must lie
    /// below the root.
    pub fn saturate(root: &Point, leaves: &[Point], p: Prime) -> SkeletonGraph {
        let mut pts: Vec<Point> = Vec::new();
        let push = |pts: &mut Vec<Point>, x: Point| {
            if !pts.iter().any(|y| point_eq(y, &x, p)) {
                pts.push(x);
            }
        };
        push(&mut pts, root.canonical(p));
        for a in leaves {
            push(&mut pts, a.canonical(p));
        }
        let base = pts.clone();
        for (i, a) in base.iter().enumerate() {
            for b in base.iter().skip(i + 1) {
                let m = meet(a, b, p);
                if m.log_radius <= root.log_radius {
                    push(&mut pts, m.canonical(p));
                }
            }
        }
        // Deterministic order: by decreasing radius, then by center.
        pts.sort_by(|a, b| b.log_radius.cmp(&a.log_radius).then_with(|| a.center.cmp(&b.center)));
        let root_idx = pts.iter().position(|x| point_eq(x, root, p)).expect("root present");
        let mut edges = Vec::new();
        for (v, x) in pts.iter().enumerate() {
            if v == root_idx {
                continue;
            }
            let parent = pts
                .iter()
                .enumerate()
                .filter(|(u, y)| *u != v && y.log_radius > x.log_radius && point_le(x, y, p))
                .min_by(|a, b| a.1.log_radius.cmp(&b.1.log_radius))
                .map(|(u, _)| u)
                .expect("every non-root vertex lies below the root");
            edges.push(Edge {
                child: v,
                parent,
                center: x.center.clone(),
                lo: x.log_radius.clone(),
                hi: pts[parent].l().clone(),
            });
        }
        SkeletonGraph { vertices: pts, root: root_idx, edges }
    }

    /// A single-vertex graph.
    pub fn point(x: Point) -> SkeletonGraph {
        SkeletonGraph { vertices: vec![x], root: 0, edges: Vec::new() }
    }

    /// Index of the edge leading from `v` to its parent.
    pub fn up_edge(&self, v: usize) -> Option<usize> {
        self.edges.iter().position(|e| e.child == v)
    }

    /// Indices of the edges hanging below `v`.
    pub fn down_edges(&self, v: usize) -> Vec<usize> {
        self.edges.iter().enumerate().filter(|(_, e)| e.parent == v).map(|(i, _)| i).collect()
    }

    /// Number of branches of the graph at `v`.
    pub fn degree(&self, v: usize) -> usize {
        self.down_edges(v).len() + usize::from(self.up_edge(v).is_some())
    }

    /// End points other than the root.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| v != self.root && self.down_edges(v).is_empty()).collect()
    }

    /// Vertices with at least three branches.
    pub fn bifurcations(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.degree(v) >= 3).collect()
    }

    pub fn find(&self, x: &Point, p: Prime) -> Option<usize> {
        self.vertices.iter().position(|y| point_eq(x, y, p))
    }

    /// The edge carrying `x` in its relative interior, if any.
    pub fn edge_containing(&self, x: &Point, p: Prime) -> Option<usize> {
        self.edges.iter().position(|e| {
            x.log_radius > e.lo
                && x.log_radius < QLog::Fin(e.hi.clone())
                && log_abs(&(&x.center - &e.center), p) <= x.log_radius
        })
    }

    /// Whether `x` is a vertex or lies on an edge.
    pub fn contains(&self, x: &Point, p: Prime) -> bool {
        self.find(x, p).is_some() || self.edge_containing(x, p).is_some()
    }

    /// Edges from `v` up to the root, bottom first.
    pub fn path_to_root(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = v;
        while let Some(e) = self.up_edge(cur) {
            out.push(e);
            cur = self.edges[e].parent;
        }
        out
    }

    /// Direction at vertex `v` of the edge `e` incident to it.
    pub fn direction_at(&self, v: usize, e: usize, p: Prime) -> DirectionId {
        let edge = &self.edges[e];
        if edge.child == v {
            DirectionId::Infinity
        } else {
            residue_direction(&self.vertices[edge.child].center, self.vertices[v].l(), p)
        }
    }

    /// Checks the tree invariants and that `gamma_x` is contained in the graph.
    pub fn check_admissible(&self, gamma_x: &SkeletonGraph, p: Prime) -> std::result::Result<(), String> {
        let n = self.vertices.len();
        if self.edges.len() + 1 != n {
            return Err(format!("{} vertices but {} edges", n, self.edges.len()));
        }
        for v in 0..n {
            if v != self.root && self.up_edge(v).is_none() {
                return Err(format!("vertex {} has no parent", self.vertices[v]));
            }
            if self.path_to_root(v).len() > n {
                return Err("cycle detected".into());
            }
        }
        for e in &self.edges {
            let (c, u) = (&self.vertices[e.child], &self.vertices[e.parent]);
            if !point_le(c, u, p) || c.log_radius >= u.log_radius {
                return Err(format!("edge {} -> {} is not monotone", c, u));
            }
        }
        for x in &gamma_x.vertices {
            if !self.contains(x, p) {
                return Err(format!("skeleton point {} missing", x));
            }
        }
        Ok(())
    }

    /// Compares two saturated graphs as point sets, through their roots and
    /// end points.
    pub fn same_point_set(&self, other: &SkeletonGraph, p: Prime) -> bool {
        if !point_eq(&self.vertices[self.root], &other.vertices[other.root], p) {
            return false;
        }
        let a: Vec<&Point> = self.leaves().into_iter().map(|v| &self.vertices[v]).collect();
        let b: Vec<&Point> = other.leaves().into_iter().map(|v| &other.vertices[v]).collect();
        a.len() == b.len()
            && a.iter().all(|x| b.iter().any(|y| point_eq(x, y, p)))
            && b.iter().all(|x| a.iter().any(|y| point_eq(x, y, p)))
    }

    pub fn is_single_point(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Number of branches of `Gamma_X` at `x` (`N_X(x)`).
pub fn skeleton_valence(gamma_x: &SkeletonGraph, x: &Point, p: Prime) -> usize {
    if let Some(v) = gamma_x.find(x, p) {
        gamma_x.degree(v)
    } else if gamma_x.edge_containing(x, p).is_some() {
        2
    } else {
        0
    }
}
