//! Convergence Newton polygons of p-adic differential equations on affinoid
//! domains of the Berkovich line.

pub mod error;
pub mod frobenius;
pub mod line;
pub mod piecewise;
pub mod polygon;
pub mod radii_engine;
pub mod ratfun;
pub mod scalars;
pub mod spectral;

pub use error::{Error, Result};
pub use frobenius::{DescentConfig, DescentReport, DescentStop};
pub use line::{AffinoidDomain, DirectionId, Disk, Edge, Point, SkeletonGraph, Target};
pub use piecewise::{laplacian, BranchSlopes, Paf};
pub use polygon::{np_from_values, truncate_slopes, NewtonPolygon};
pub use radii_engine::{
    audit_main_theorem, build_profile, check_criterion, controlling_graph, prune_to_controlling_graph, AuditReport,
    ControllingGraph, CriterionReport, GraphFunction, RadiiProfile, Solvability,
};
pub use ratfun::{FactoredRatFun, Poly, RatFun};
pub use scalars::{Prime, QLog, Q};
pub use spectral::{Certification, ConnectionMatrix, DifferentialOperator, SpectralRadii};
