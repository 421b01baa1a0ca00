//! Fixtures shared by the benchmarks in `benches/`.

use padic_polygon::ratfun::FactoredRatFun;
use padic_polygon::scalars::{q, qi};
use padic_polygon::{AffinoidDomain, ConnectionMatrix, DifferentialOperator, Poly, Prime, QLog};

pub fn prime(p: u64) -> Prime {
    Prime::new(p).expect("prime")
}

pub fn unit_disk() -> AffinoidDomain {
    AffinoidDomain::disk(qi(0), qi(0))
}

/// `d/dT - a` with `a = n/d`.
pub fn constant_rank1(n: i64, d: i64) -> DifferentialOperator {
    DifferentialOperator::factored(vec![FactoredRatFun::constant(q(-n, d))]).expect("operator")
}

/// `d/dT - (T)(T - 3)/243`: a bifurcating controlling graph at p = 3.
pub fn close_roots() -> DifferentialOperator {
    let g = FactoredRatFun::new(q(1, 243), vec![(qi(0), 1), (qi(3), 1)]).expect("coefficient");
    DifferentialOperator::factored(vec![g]).expect("operator")
}

/// The direct sum of `d/dT - 4/3` and `d/dT + 1/3`.
pub fn direct_sum() -> DifferentialOperator {
    DifferentialOperator::factored(vec![FactoredRatFun::constant(q(-1, 1)), FactoredRatFun::constant(q(-4, 9))])
        .expect("operator")
}

/// A dense rank-`r` polynomial connection matrix with small entries.
pub fn dense_matrix(r: usize) -> ConnectionMatrix {
    let entries = (0..r * r)
        .map(|k| {
            let (i, j) = (k / r, k % r);
            let text = match (i + 2 * j) % 3 {
                0 => format!("{} + T", i + j + 1),
                1 => format!("1/3T^{}", j + 1),
                _ => format!("{}", (i as i64) - (j as i64)),
            };
            text.parse::<Poly>().expect("polynomial")
        })
        .collect();
    ConnectionMatrix::polynomial(r, entries).expect("matrix")
}

/// Deterministic valuation sequences of length `r + 1` with `v_0 = 0`.
pub fn value_sequences(r: usize, count: usize) -> Vec<Vec<QLog>> {
    (0..count)
        .map(|s| {
            let mut v = vec![QLog::Fin(qi(0))];
            v.extend((1..=r).map(|i| {
                let x = ((s * 7 + i * 13) % 17) as i64 - 8;
                if x == 8 {
                    QLog::PosInf
                } else {
                    QLog::Fin(q(x, 2))
                }
            }));
            v
        })
        .collect()
}
