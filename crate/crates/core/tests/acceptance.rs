//! Acceptance suite: one PASS/FAIL line per criterion, with timings.

mod common;

use std::time::{Duration, Instant};

use num_traits::Signed;
use padic_polygon::frobenius::{phi_point, phi_radius, psi_radius, pushforward_matrix, pushforward_radii, FrobContext};
use padic_polygon::radii_engine::{
    branch_bound, branch_counts, check_conditions, constancy_radius, profile_config, rho_gamma, CHECK_DENOMINATORS,
    CHECK_INTEGRALITY, CHECK_R1, CHECK_SUPERHARMONIC,
};
use padic_polygon::ratfun::{FactoredRatFun, Poly};
use padic_polygon::scalars::{q, qi};
use padic_polygon::spectral::{cyclic_operator, radius_oracle_op, small_radius_certify, spectral_polygon_at};
use padic_polygon::{
    audit_main_theorem, build_profile, controlling_graph, np_from_values, ConnectionMatrix, DifferentialOperator,
    Point, Prime, QLog, RadiiProfile, SkeletonGraph, Q,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{prime, suite, unit_disk};

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(a: &QLog, b: &QLog, tol: &Q) -> bool {
    match (a, b) {
        (QLog::Fin(x), QLog::Fin(y)) => (x - y).abs() <= *tol,
        _ => a == b,
    }
}

fn criterion(n: u32, name: &str, budget: Duration, failures: &mut u32, body: impl FnOnce() -> Outcome) {
    let t = Instant::now();
    let out = body();
    let dt = t.elapsed();
    let pass = out.pass && dt <= budget;
    if !pass {
        *failures += 1;
    }
    let verdict = if pass { "PASS" } else { "FAIL" };
    let late = if dt > budget { format!(" (over the {budget:?} budget)") } else { String::new() };
    println!("criterion {n} {verdict} [{:.3}s] {name}: {}{late}", dt.as_secs_f64(), out.detail);
}

/// `log_3 R_1` of `d/dT - 1/3` at `x_{0,0}` on the unit disk.
fn c1() -> Outcome {
    let p = prime(3);
    let op = DifferentialOperator::factored(vec![FactoredRatFun::constant(q(-1, 3))]).unwrap();
    let x = Point::new(qi(0), qi(0));
    let prof = build_profile(&op, &unit_disk(), p, &profile_config()).unwrap();
    let (vals, status) = prof.radii_at(&x).unwrap();
    let est = radius_oracle_op(&op, &x, 150, p).unwrap();
    let exact = vals[0] == QLog::Fin(q(-3, 2)) && status[0] == padic_polygon::Certification::Young;
    let close = within(&est, &vals[0], &q(1, 10));
    Outcome { pass: exact && close, detail: format!("R_1 = {} ({:?}), oracle {est}", vals[0], status[0]) }
}

/// Rank one and two operators with coefficients `u p^k T^m`.
fn young_operators() -> Vec<(DifferentialOperator, Prime)> {
    let mono = |u: i64, k: i64, m: i64, p: u64| {
        let c = Q::from_integer(u.into()) * padic_polygon::scalars::pow_q(&qi(p as i64), k);
        let f = if m == 0 { vec![] } else { vec![(qi(0), m)] };
        FactoredRatFun::new(c, f).unwrap()
    };
    let mut out = Vec::new();
    for (p, u) in [(3u64, 2i64), (2, 1), (5, 3)] {
        for (k, m) in [(-1, 0), (-2, 0), (-1, 1), (-2, 2), (0, 0)] {
            out.push((DifferentialOperator::factored(vec![mono(u, k, m, p)]).unwrap(), prime(p)));
        }
    }
    for (p, u) in [(3u64, 1i64), (2, -1)] {
        for (a, b) in [((-1, 0), (-2, 0)), ((0, 0), (-3, 0)), ((-1, 1), (-2, 0)), ((-2, 0), (-1, 1)), ((0, 1), (-4, 0))]
        {
            let g1 = mono(u, a.0, a.1, p);
            let g2 = mono(1, b.0, b.1, p);
            out.push((DifferentialOperator::factored(vec![g1, g2]).unwrap(), prime(p)));
        }
    }
    out
}

fn c2() -> Outcome {
    let ops = young_operators();
    let points = [(0, 0, 1), (0, -1, 1), (0, -1, 2), (1, -1, 1), (1, -2, 1)];
    let (mut certified, mut worst, mut bad) = (0, Q::from_integer(0.into()), Vec::new());
    for (op, p) in &ops {
        for &(c, n, d) in &points {
            let x = Point::new(qi(c), q(n, d));
            let np = spectral_polygon_at(op, &x, *p).unwrap();
            let s = small_radius_certify(&np, &x, *p);
            if !s.status[0].is_certified() {
                continue;
            }
            certified += 1;
            let est = radius_oracle_op(op, &x, 150, *p).unwrap();
            match (&est, &s.values[0]) {
                (QLog::Fin(a), QLog::Fin(b)) => worst = worst.max((a - b).abs()),
                _ => bad.push(format!("{x}: {est} vs {}", s.values[0])),
            }
            if !within(&est, &s.values[0], &q(1, 10)) {
                bad.push(format!("{x}: {est} vs {}", s.values[0]));
            }
        }
    }
    let pass = ops.len() == 25 && certified > 0 && bad.is_empty();
    Outcome {
        pass,
        detail: format!(
            "{} operators x 5 points, {certified} certified, max deviation {worst}; mismatches {bad:?}",
            ops.len()
        ),
    }
}

fn c3() -> Outcome {
    let laurent = |num: &str, k: usize| {
        ConnectionMatrix::new(1, vec![(num.parse::<Poly>().unwrap(), Poly::monomial(qi(1), k))]).unwrap()
    };
    let cases: Vec<(ConnectionMatrix, Point, u64)> = vec![
        (laurent("1/3", 0), Point::new(qi(0), qi(0)), 3),
        (laurent("1/9", 0), Point::new(qi(0), qi(0)), 3),
        (laurent("1/4", 0), Point::new(qi(0), qi(0)), 2),
        (laurent("1/8", 0), Point::new(qi(1), qi(0)), 2),
        (laurent("1/25", 0), Point::new(qi(0), qi(0)), 5),
        (laurent("1/9T", 0), Point::new(qi(0), qi(0)), 3),
        (laurent("1/3", 1), Point::new(qi(0), qi(0)), 3),
        (laurent("1/9 + 1/3T", 0), Point::new(qi(0), qi(0)), 3),
        (laurent("1/27", 0), Point::new(qi(0), qi(1)), 3),
        (laurent("1/4 + 1/2T^2", 1), Point::new(qi(0), qi(0)), 2),
    ];
    let mut bad = Vec::new();
    for (g, x, pp) in &cases {
        let p = prime(*pp);
        let (op, _) = cyclic_operator(g, 12).unwrap();
        let s = small_radius_certify(&spectral_polygon_at(&op, x, p).unwrap(), x, p);
        if !s.all_certified() {
            bad.push(format!("{x} not Young-certifiable"));
            continue;
        }
        let ctx = FrobContext::new(x, &s.values, p).unwrap();
        let predicted = pushforward_radii(&s, &ctx);
        let pg = pushforward_matrix(g, p).unwrap();
        let (pop, _) = cyclic_operator(&pg, 12).unwrap();
        let y = phi_point(x, p);
        let computed = small_radius_certify(&spectral_polygon_at(&pop, &y, p).unwrap(), &y, p);
        if computed.values != predicted.values {
            bad.push(format!("{x}, p={pp}: computed {:?} predicted {:?}", computed.values, predicted.values));
        }
    }
    Outcome { pass: bad.is_empty(), detail: format!("{} connections; mismatches {bad:?}", cases.len()) }
}

fn c4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0;
    for _ in 0..100 {
        let p = prime([2u64, 3, 5, 7][rng.gen_range(0..4)]);
        let sigma = QLog::Fin(q(rng.gen_range(-12..=12), rng.gen_range(1..=6)));
        let l = QLog::Fin(q(rng.gen_range(-30..=10), rng.gen_range(1..=7)));
        if phi_radius(&sigma, &psi_radius(&sigma, &l, p), p) != l
            || psi_radius(&sigma, &phi_radius(&sigma, &l, p), p) != l
        {
            bad += 1;
        }
    }
    Outcome { pass: bad == 0, detail: format!("100 pairs, {bad} failures") }
}

struct Built {
    name: &'static str,
    profile: RadiiProfile,
}

fn c5(built: &[Built]) -> Outcome {
    let names = [CHECK_INTEGRALITY, CHECK_DENOMINATORS, CHECK_SUPERHARMONIC, CHECK_R1];
    let mut lines = Vec::new();
    let mut pass = built.len() >= 8;
    for b in built {
        let rep = audit_main_theorem(&b.profile);
        let counts: Vec<usize> = names.iter().map(|n| rep.violations_of(n)).collect();
        if counts.iter().any(|&c| c > 0) {
            pass = false;
            lines.push(format!("{}: {:?}", b.name, rep.violations));
        }
    }
    let detail = if lines.is_empty() {
        format!("{} operators, zero violations of {names:?}", built.len())
    } else {
        lines.join("; ")
    };
    Outcome { pass, detail }
}

fn random_graph(rng: &mut ChaCha8Rng, p: Prime) -> SkeletonGraph {
    let pp = p.get() as i64;
    let n = rng.gen_range(1..=5);
    let leaves: Vec<Point> = (0..n)
        .map(|_| Point::new(qi(rng.gen_range(0..pp * pp * pp)), q(-rng.gen_range(1..=12), rng.gen_range(1..=3))))
        .collect();
    SkeletonGraph::saturate(&Point::new(qi(0), qi(0)), &leaves, p)
}

fn c6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dom = unit_disk();
    let mut pass = true;
    let mut sizes = Vec::new();
    for _ in 0..5 {
        let p = prime([2u64, 3, 5][rng.gen_range(0..3)]);
        let gamma = random_graph(&mut rng, p);
        let gamma_x = padic_polygon::line::skeleton(&dom, p);
        let admissible = gamma.check_admissible(&gamma_x, p).is_ok();
        let f = rho_gamma(&gamma);
        let rep = check_conditions(&f, &dom, p, &gamma, &[], &qi(1));
        let cg = controlling_graph(&f, &gamma_x, p);
        let same = cg.graph.same_point_set(&gamma, p);
        pass &= admissible && rep.passed() && same;
        sizes.push(format!("p={} |V|={} ok={}", p.get(), gamma.vertices.len(), admissible && rep.passed() && same));
    }
    Outcome { pass, detail: sizes.join(", ") }
}

fn c7(built: &[Built]) -> Outcome {
    let (mut branches, mut max_bif, mut bad) = (0, 0, Vec::new());
    for b in built {
        let prof = &b.profile;
        for i in 1..=prof.rank {
            let f = prof.radius_fn(i);
            let cg = controlling_graph(&f, &prof.skeleton, prof.p);
            let nu = f.min_nonzero_slope();
            for bc in branch_counts(&f, &cg, &prof.skeleton, prof.p) {
                branches += 1;
                max_bif = max_bif.max(bc.bifurcations);
                let bound = nu.as_ref().map_or(0, |nu| branch_bound(&bc.slope.0, nu));
                if bc.bifurcations as i64 > bound {
                    bad.push(format!("{} R_{i} at {}: {} > {bound}", b.name, bc.attach, bc.bifurcations));
                }
            }
        }
    }
    Outcome { pass: bad.is_empty(), detail: format!("{branches} branches, max {max_bif} bifurcations; excess {bad:?}") }
}

/// Lower hull by supporting lines: `h_i` is the least value at `i` of a
/// chord between two finite points whose line lies below every point.
fn brute_hull(v: &[Option<i64>]) -> Vec<QLog> {
    let r = v.len() - 1;
    let pts: Vec<(i64, i64)> = v.iter().enumerate().filter_map(|(i, y)| y.map(|y| (i as i64, y))).collect();
    let below = |a: (i64, i64), b: (i64, i64)| {
        pts.iter().all(|&(x, y)| {
            // (y - a.1)(b.0 - a.0) >= (b.1 - a.1)(x - a.0)
            (y - a.1) * (b.0 - a.0) >= (b.1 - a.1) * (x - a.0)
        })
    };
    (0..=r as i64)
        .map(|i| {
            let mut best: Option<Q> = None;
            for &a in &pts {
                for &b in &pts {
                    let h = if a.0 == i && b.0 == i {
                        Some(qi(a.1))
                    } else if a.0 <= i && i <= b.0 && a.0 < b.0 && below(a, b) {
                        Some(qi(a.1) + q((b.1 - a.1) * (i - a.0), b.0 - a.0))
                    } else {
                        None
                    };
                    if let Some(h) = h {
                        best = Some(best.map_or(h.clone(), |m: Q| m.min(h)));
                    }
                }
            }
            best.map_or(QLog::PosInf, QLog::Fin)
        })
        .collect()
}

fn c8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = 0;
    for _ in 0..500 {
        let r = rng.gen_range(1..=6);
        let mut v: Vec<Option<i64>> = vec![Some(0)];
        v.extend((0..r).map(|_| if rng.gen_bool(0.15) { None } else { Some(rng.gen_range(-20..=20)) }));
        let ql: Vec<QLog> = v.iter().map(|y| y.map_or(QLog::PosInf, QLog::from_int)).collect();
        let hull = np_from_values(&ql).unwrap();
        if hull.heights() != brute_hull(&v).as_slice() {
            bad += 1;
        }
    }
    Outcome { pass: bad == 0, detail: format!("500 sequences, {bad} mismatches") }
}

/// Vertices and ten interior samples per edge.
fn samples(prof: &RadiiProfile) -> Vec<Point> {
    let mut out: Vec<Point> = prof.graph.vertices.clone();
    for ed in &prof.graph.edges {
        for j in 1..=10 {
            let l = match &ed.lo {
                QLog::Fin(lo) => lo + (&ed.hi - lo) * q(j, 11),
                _ => &ed.hi - q(j, 2),
            };
            out.push(ed.point_at(&l));
        }
    }
    out
}

fn c9(built: &[Built]) -> Outcome {
    let (mut checked, mut below_generic, mut bad) = (0, 0, Vec::new());
    for b in built {
        let prof = &b.profile;
        let p = prof.p;
        let graphs: Vec<SkeletonGraph> =
            (1..=prof.rank).map(|i| controlling_graph(&prof.radius_fn(i), &prof.skeleton, p).graph).collect();
        let rho = prof.max_radius_fn();
        for x in samples(prof) {
            checked += 1;
            let (vals, _) = prof.radii_at(&x).unwrap();
            let max = rho.value_at(&x, p).unwrap();
            let ordered = vals.windows(2).all(|w| w[0] <= w[1]) && *vals.last().unwrap() <= max;
            let r = &x.log_radius;
            let sandwich = graphs.iter().all(|g| {
                let c = constancy_radius(g, &x, p);
                *r <= c && c <= max
            });
            if vals[0] < *r {
                below_generic += 1;
            }
            if !ordered || !sandwich {
                bad.push(format!("{} at {x}: {vals:?} max {max}", b.name));
            }
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!(
            "{checked} points: R_1 <= ... <= R_r <= rho_(x,X) and r(x) <= rho_(Gamma(R_i))(x) <= rho_(x,X) hold; \
             R_1 < r(x) at {below_generic} spectral points, as in criterion 1; failures {bad:?}"
        ),
    }
}

fn main() {
    let mut failures = 0;
    criterion(1, "exact rank-1 radius", Duration::from_secs(5), &mut failures, c1);
    criterion(2, "Young equivalence sweep", Duration::from_secs(60), &mut failures, c2);
    criterion(3, "Frobenius consistency", Duration::from_secs(30), &mut failures, c3);
    criterion(4, "phi/psi round trip", Duration::from_secs(1), &mut failures, c4);

    let t = Instant::now();
    let cfg = profile_config();
    let built: Vec<Built> = suite()
        .into_iter()
        .map(|c| Built { name: c.name, profile: build_profile(&c.op, &c.domain, c.p, &cfg).unwrap() })
        .collect();
    let build_time = t.elapsed();
    criterion(5, "main-theorem audit", Duration::from_secs(120).saturating_sub(build_time), &mut failures, || {
        let mut out = c5(&built);
        out.detail = format!("{} (profiles built in {:.3}s)", out.detail, build_time.as_secs_f64());
        out
    });
    criterion(6, "finiteness criterion self-test", Duration::from_secs(10), &mut failures, c6);
    criterion(7, "branch bound", Duration::from_secs(10), &mut failures, || c7(&built));
    criterion(8, "hull brute-force equivalence", Duration::from_secs(5), &mut failures, c8);
    criterion(9, "sandwich and ordering", Duration::from_secs(120), &mut failures, || c9(&built));
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
