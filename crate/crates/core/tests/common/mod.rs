//! Operators and domains shared by the integration tests.

#![allow(dead_code)]

use padic_polygon::ratfun::FactoredRatFun as F;
use padic_polygon::scalars::{q, qi};
use padic_polygon::{AffinoidDomain, DifferentialOperator, Prime};

pub struct Case {
    pub name: &'static str,
    pub op: DifferentialOperator,
    pub domain: AffinoidDomain,
    pub p: Prime,
}

pub fn prime(p: u64) -> Prime {
    Prime::new(p).unwrap()
}

pub fn unit_disk() -> AffinoidDomain {
    AffinoidDomain::disk(qi(0), qi(0))
}

fn op(coeffs: Vec<F>) -> DifferentialOperator {
    DifferentialOperator::factored(coeffs).unwrap()
}

fn k(n: i64, d: i64) -> F {
    F::constant(q(n, d))
}

fn f(n: i64, d: i64, roots: &[(i64, i64)]) -> F {
    F::new(q(n, d), roots.iter().map(|&(z, m)| (qi(z), m)).collect()).unwrap()
}

/// Operators on unit disks, annuli and a disk with two holes: constant
/// coefficients, a pole at 0, rational roots, a direct sum.
pub fn suite() -> Vec<Case> {
    let (p2, p3) = (prime(2), prime(3));
    let annulus = unit_disk().with_hole(qi(0), qi(-1));
    let two_holes = unit_disk().with_hole(qi(0), qi(-1)).with_hole(qi(1), qi(-1));
    let case = |name, op, domain, p| Case { name, op, domain, p };
    vec![
        case("constant 1/3", op(vec![k(-1, 3)]), unit_disk(), p3),
        case("exponential p=3", op(vec![k(-1, 1)]), unit_disk(), p3),
        case("exponential p=2", op(vec![k(-1, 1)]), unit_disk(), p2),
        case("pole at 0", op(vec![f(-1, 3, &[(0, -1)])]), annulus.clone(), p3),
        case("euler 1/2", op(vec![f(-1, 2, &[(0, -1)])]), annulus, p3),
        case("two roots", op(vec![f(1, 3, &[(0, 1), (1, 1)])]), unit_disk(), p3),
        case("close roots", op(vec![f(1, 27, &[(0, 1), (3, 1)])]), unit_disk(), p3),
        case("deep close roots", op(vec![f(1, 243, &[(0, 1), (3, 1)])]), unit_disk(), p3),
        case("rank 2 polynomial", op(vec![f(1, 9, &[(0, 1)]), k(1, 27)]), unit_disk(), p3),
        case("T exponential", op(vec![f(-1, 1, &[(0, 1)])]), unit_disk(), p3),
        case("direct sum", op(vec![k(-4, 3), k(1, 3)]), unit_disk(), p3),
        case("two holes exponential", op(vec![k(-1, 1)]), two_holes.clone(), p3),
        case("two holes constant", op(vec![k(-1, 3)]), two_holes, p3),
    ]
}
