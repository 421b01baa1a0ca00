//! Property tests over the profiles of the shared operator suite.

mod common;

use std::sync::OnceLock;

use common::{suite, Case};
use padic_polygon::frobenius::{phi_radius, psi_radius};
use padic_polygon::line::{generic_radius, lambda, maximal_radius, membership};
use padic_polygon::radii_engine::{constancy_radius, profile_config, CHECK_R1};
use padic_polygon::scalars::{q, qi};
use padic_polygon::{
    audit_main_theorem, build_profile, laplacian, prune_to_controlling_graph, Point, QLog, RadiiProfile, Q,
};
use proptest::prelude::*;

fn profiles() -> &'static [(Case, RadiiProfile)] {
    static CELL: OnceLock<Vec<(Case, RadiiProfile)>> = OnceLock::new();
    CELL.get_or_init(|| {
        suite()
            .into_iter()
            .map(|c| {
                let prof = build_profile(&c.op, &c.domain, c.p, &profile_config()).unwrap();
                (c, prof)
            })
            .collect()
    })
}

/// A point on edge `e` at fraction `t` of its interval; a `-inf` end is
/// replaced by `hi - 3`.
fn point_on_edge(prof: &RadiiProfile, e: usize, t: &Q) -> Point {
    let edge = &prof.graph.edges[e];
    let lo = match &edge.lo {
        QLog::Fin(l) => l.clone(),
        _ => &edge.hi - qi(3),
    };
    edge.point_at(&(&lo + &(t * (&edge.hi - &lo))))
}

fn fin(x: Q) -> QLog {
    QLog::Fin(x)
}

/// Points of the profile's domain: one on the graph, one in a residue disk
/// off it, selected by the pick indices.
fn sample_point(prof: &RadiiProfile, e: usize, t: &Q, center: i64, l: &Q) -> Vec<Point> {
    let mut out = Vec::new();
    if !prof.graph.edges.is_empty() {
        out.push(point_on_edge(prof, e % prof.graph.edges.len(), t));
    }
    let off = Point::new(qi(center), l.clone());
    if membership(&off, &prof.domain, prof.p) {
        out.push(off);
    }
    out
}

fn arb_sample() -> impl Strategy<Value = (usize, usize, Q, i64, Q)> {
    (0usize..64, 0usize..64, 0i64..=8, -10i64..10, -12i64..=0).prop_map(|(k, e, t, c, l)| (k, e, q(t, 8), c, q(l, 3)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn radii_are_ordered_and_bounded_by_the_maximal_radius((k, e, t, c, l) in arb_sample()) {
        let (_, prof) = &profiles()[k % profiles().len()];
        for x in sample_point(prof, e, &t, c, &l) {
            let (r, _) = prof.radii_at(&x).expect("point of the domain");
            let rho = maximal_radius(&x, &prof.domain, prof.p).unwrap();
            prop_assert!(generic_radius(&x) <= rho, "{x}");
            prop_assert!(rho <= fin(prof.domain.outer.log_radius.clone()));
            prop_assert!(r.windows(2).all(|w| w[0] <= w[1]), "{x}: {r:?}");
            prop_assert!(*r.last().unwrap() <= rho, "{x}: {r:?} above {rho}");
        }
    }

    #[test]
    fn constancy_radius_along_the_canonical_path((k, e, t, c, l) in arb_sample(), s in 0i64..=8, i in 0usize..2) {
        let (_, prof) = &profiles()[k % profiles().len()];
        let cg = prune_to_controlling_graph(prof, i % prof.rank + 1);
        for xi in sample_point(prof, e, &t, c, &l) {
            let QLog::Fin(top) = maximal_radius(&xi, &prof.domain, prof.p).unwrap() else { unreachable!() };
            let bottom = match &xi.log_radius { QLog::Fin(b) => b.clone(), _ => &top - qi(3) };
            let rho = fin(&bottom + &(q(s, 8) * (&top - &bottom)));
            let here = constancy_radius(&cg.graph, &xi, prof.p);
            let up = constancy_radius(&cg.graph, &lambda(&xi, &rho), prof.p);
            prop_assert_eq!(up, rho.clone().max(here), "xi = {}, rho = {}", xi, rho);
        }
    }

    #[test]
    fn frobenius_radius_maps_are_monotone(sigma in -4i64..=4, a in -24i64..=24, b in -24i64..=24, pp in prop::sample::select(vec![2u64, 3, 5])) {
        let p = common::prime(pp);
        let (a, b) = (fin(q(a.min(b), 4)), fin(q(a.max(b), 4)));
        let sigma = fin(q(sigma, 2));
        prop_assert!(phi_radius(&sigma, &a, p) <= phi_radius(&sigma, &b, p));
        prop_assert!(psi_radius(&sigma, &a, p) <= psi_radius(&sigma, &b, p));
    }

    #[test]
    fn lambda_is_idempotent(c in -20i64..20, l in -12i64..=0, m in -12i64..=0) {
        let x = Point::new(qi(c), q(l, 2));
        let m = fin(q(m, 2));
        let once = lambda(&x, &m);
        prop_assert_eq!(lambda(&once, &m), once.clone());
        prop_assert!(once.log_radius >= x.log_radius);
    }
}

#[test]
fn convergence_and_spectral_radii_agree_at_vertices() {
    for (case, prof) in profiles() {
        for v in &prof.vertices {
            let r = generic_radius(&v.point);
            for i in 0..prof.rank {
                if v.status[i].is_certified() {
                    assert_eq!(
                        v.radii[i].clone().min(r.clone()),
                        v.spectral[i],
                        "{}: {} index {}",
                        case.name,
                        v.point,
                        i + 1
                    );
                }
            }
        }
    }
}

#[test]
fn heights_are_partial_sums_of_radii() {
    for (case, prof) in profiles() {
        for (e, edge) in prof.edges.iter().enumerate() {
            let mut sum = edge.radii[0].clone();
            assert_eq!(edge.heights[0], sum, "{} edge {e}", case.name);
            for i in 1..prof.rank {
                sum = sum.add(&edge.radii[i]).unwrap();
                assert_eq!(edge.heights[i], sum, "{} edge {e} index {}", case.name, i + 1);
            }
        }
    }
}

#[test]
fn controlling_graphs_are_admissible() {
    for (case, prof) in profiles() {
        for i in 1..=prof.rank {
            let cg = prune_to_controlling_graph(prof, i);
            cg.graph
                .check_admissible(&prof.skeleton, prof.p)
                .unwrap_or_else(|e| panic!("{} index {i}: {e}", case.name));
            assert!(cg.anomalies.is_empty(), "{} index {i}: {:?}", case.name, cg.anomalies);
        }
    }
}

#[test]
fn first_radius_is_superharmonic_off_the_boundary() {
    for (case, prof) in profiles() {
        for v in &prof.vertices {
            if !prof.domain.is_boundary(&v.point, prof.p) && !v.point.is_rigid() {
                assert!(laplacian(&v.radius_slopes[0]) <= qi(0), "{} at {}", case.name, v.point);
            }
        }
        assert_eq!(audit_main_theorem(prof).violations_of(CHECK_R1), 0, "{}", case.name);
    }
}

#[test]
fn spectral_slopes_have_denominators_at_most_the_rank() {
    for (case, prof) in profiles() {
        for edge in &prof.edges {
            for f in &edge.spectral {
                for s in f.slopes() {
                    let d = s.denom().clone();
                    assert!(d <= (prof.rank as i64).into(), "{}: slope {s}", case.name);
                }
            }
        }
    }
}

#[test]
fn suite_profiles_join_without_defects() {
    for (case, prof) in profiles() {
        assert!(prof.defects.is_empty(), "{}: {:?}", case.name, prof.defects);
        assert!(prof.edges.iter().all(|e| e.defects.is_empty()), "{}", case.name);
    }
}
