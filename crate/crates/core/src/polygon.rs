//! Lower convex hulls of valuation sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalars::{qi, QLog, Q};

/// A Newton polygon, stored as its partial heights `h_0 = 0, h_1, ..., h_r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewtonPolygon {
    heights: Vec<QLog>,
}

impl NewtonPolygon {
    pub fn rank(&self) -> usize {
        self.heights.len() - 1
    }

    pub fn heights(&self) -> &[QLog] {
        &self.heights
    }

    /// `h_i`.
    pub fn height(&self, i: usize) -> &QLog {
        &self.heights[i]
    }

    /// Rebuilds the polygon with the given slopes (`h_i = s_1 + ... + s_i`).
    pub fn from_slopes(s: &[QLog]) -> NewtonPolygon {
        let mut heights = vec![QLog::zero()];
        for si in s {
            let last = heights.last().unwrap().clone();
            heights.push(last + si.clone());
        }
        NewtonPolygon { heights }
    }

    /// `s_i = h_i - h_{i-1}`, `+inf` once a height is infinite.
    pub fn slopes(&self) -> Vec<QLog> {
        self.heights
            .windows(2)
            .map(|w| match (&w[0], &w[1]) {
                (QLog::Fin(a), QLog::Fin(b)) => QLog::Fin(b - a),
                _ => QLog::PosInf,
            })
            .collect()
    }

    /// Indices `i` in `1..=r` with `s_i < s_{i+1}`, and `r` itself.
    pub fn vertices(&self) -> Vec<usize> {
        vertices_of(&self.slopes())
    }
}

/// Vertices of a slope sequence.
pub fn vertices_of(s: &[QLog]) -> Vec<usize> {
    let r = s.len();
    (1..=r).filter(|&i| i == r || s[i - 1] < s[i]).collect()
}

/// The lower convex hull of the half-lines `{x = i, y >= v_i}`. Entries may
/// be `+inf`; `v_0` must be zero.
pub fn np_from_values(v: &[QLog]) -> Result<NewtonPolygon> {
    if v.first() != Some(&QLog::zero()) {
        return Err(Error::Precondition("v_0 must be 0".into()));
    }
    if v.contains(&QLog::NegInf) {
        return Err(Error::Precondition("-inf in a valuation sequence".into()));
    }
    let pts: Vec<(i64, &Q)> = v.iter().enumerate().filter_map(|(i, x)| x.fin().map(|y| (i as i64, y))).collect();
    // Monotone chain, lower hull; `pts` is sorted by abscissa.
    let mut hull: Vec<(i64, &Q)> = Vec::new();
    for pt in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b when it lies on or above the segment a..pt
            let lhs = (b.1 - a.1) * qi(pt.0 - a.0);
            let rhs = (pt.1 - a.1) * qi(b.0 - a.0);
            if lhs >= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let last = hull.last().unwrap().0 as usize;
    let mut heights = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        if i > last {
            heights.push(QLog::PosInf);
            continue;
        }
        let i = i as i64;
        let k = hull.partition_point(|h| h.0 < i);
        let h = if hull[k].0 == i {
            hull[k].1.clone()
        } else {
            let (a, b) = (hull[k - 1], hull[k]);
            a.1 + (b.1 - a.1) * Q::new((i - a.0).into(), (b.0 - a.0).into())
        };
        heights.push(QLog::Fin(h));
    }
    Ok(NewtonPolygon { heights })
}

/// `s'_i = min(s_i, C)`.
pub fn truncate_slopes(s: &[QLog], c: &QLog) -> Vec<QLog> {
    s.iter().map(|x| x.clone().min(c.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::q;
    use proptest::prelude::*;

    fn ql(v: &[i64]) -> Vec<QLog> {
        v.iter().map(|&x| QLog::from_int(x)).collect()
    }

    #[test]
    fn hull_examples() {
        let a = np_from_values(&ql(&[0, 3, 4])).unwrap();
        assert_eq!(a.heights(), ql(&[0, 2, 4]).as_slice());
        assert_eq!(a.slopes(), ql(&[2, 2]));
        assert_eq!(a.vertices(), vec![2]);
        let b = np_from_values(&ql(&[0, 1, 3])).unwrap();
        assert_eq!(b.heights(), ql(&[0, 1, 3]).as_slice());
        assert_eq!(b.vertices(), vec![1, 2]);
        let c = np_from_values(&[QLog::zero(), QLog::PosInf, QLog::from_int(2)]).unwrap();
        assert_eq!(c.heights(), ql(&[0, 1, 2]).as_slice());
        assert_eq!(np_from_values(&ql(&[0, 5])).unwrap().vertices(), vec![1]);
        let d = np_from_values(&[QLog::zero(), QLog::PosInf, QLog::PosInf]).unwrap();
        assert_eq!(d.slopes(), vec![QLog::PosInf, QLog::PosInf]);
        assert!(np_from_values(&ql(&[1, 2])).is_err());
    }

    #[test]
    fn first_height_is_min_ratio() {
        let v = ql(&[0, 7, 3, 12, 2]);
        let h1 = np_from_values(&v).unwrap().height(1).clone();
        assert_eq!(h1, QLog::Fin(q(1, 2)));
    }

    #[test]
    fn truncation() {
        let s = ql(&[1, 2]);
        assert_eq!(truncate_slopes(&s, &QLog::Fin(q(3, 2))), vec![QLog::from_int(1), QLog::Fin(q(3, 2))]);
        assert_eq!(truncate_slopes(&s, &QLog::PosInf), s);
        assert_eq!(truncate_slopes(&ql(&[-1, 0, 5]), &QLog::zero()), ql(&[-1, 0, 0]));
    }

    #[test]
    fn polygon_json() {
        let a = np_from_values(&ql(&[0, 3, 4])).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"{"heights":["0","2","4"]}"#);
        assert_eq!(serde_json::from_str::<NewtonPolygon>(&s).unwrap(), a);
    }

    /// `h_i = sup_s (s i + min_j (v_j - s j))`, with the supremum taken over
    /// the pairwise slopes of the finite points.
    fn supporting_lines(v: &[QLog]) -> Vec<QLog> {
        let pts: Vec<(i64, Q)> =
            v.iter().enumerate().filter_map(|(i, x)| x.fin().map(|y| (i as i64, y.clone()))).collect();
        let last = pts.last().unwrap().0;
        let mut cands = vec![qi(0)];
        for a in &pts {
            for b in &pts {
                if a.0 < b.0 {
                    cands.push((&b.1 - &a.1) / qi(b.0 - a.0));
                }
            }
        }
        (0..v.len() as i64)
            .map(|i| {
                if i > last {
                    return QLog::PosInf;
                }
                let best = cands
                    .iter()
                    .map(|s| s * qi(i) + pts.iter().map(|(j, y)| y - s * qi(*j)).min().unwrap())
                    .max()
                    .unwrap();
                QLog::Fin(best)
            })
            .collect()
    }

    fn arb_values() -> impl Strategy<Value = Vec<QLog>> {
        prop::collection::vec(prop::option::weighted(0.85, -20i64..20), 1..7).prop_map(|v| {
            std::iter::once(QLog::zero()).chain(v.into_iter().map(|x| x.map_or(QLog::PosInf, QLog::from_int))).collect()
        })
    }

    proptest! {
        #[test]
        fn matches_supporting_lines(v in arb_values()) {
            let np = np_from_values(&v).unwrap();
            prop_assert_eq!(np.heights().to_vec(), supporting_lines(&v));
        }

        #[test]
        fn idempotent_and_dominated(v in arb_values()) {
            let np = np_from_values(&v).unwrap();
            let again = np_from_values(np.heights()).unwrap();
            prop_assert_eq!(&again, &np);
            for (h, x) in np.heights().iter().zip(v.iter()) {
                prop_assert!(h <= x);
            }
            for i in np.vertices() {
                if np.height(i).is_finite() {
                    prop_assert_eq!(np.height(i), &v[i]);
                }
            }
            let s = np.slopes();
            prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
