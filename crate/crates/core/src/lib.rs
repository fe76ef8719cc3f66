//! Geometric partial matching and planar transportation.
//!
//! Exact minimum-cost size-`k` matchings are computed with a Hungarian
//! search driven by a dynamic weighted bichromatic-closest-pair structure
//! that is rewound between searches; `(1+ε)`-approximate matchings come from
//! a cost-scaling algorithm over a unit-capacity flow network; the
//! transportation problem is solved with excess scaling over a sparse,
//! acyclic support.

pub mod bcp;
pub mod cost_scaling;
pub mod dyadic;
pub mod error;
pub mod flow_network;
pub mod geometry;
pub mod hungarian;
pub mod matching;
pub mod oracle;
pub mod transport;

pub use error::{GpmError, Result};
pub use geometry::{cost, CostParams, Point};
pub use hungarian::{solve_exact, solve_exact_with};
pub use matching::Matching;
pub use cost_scaling::{solve_approx, ApproxSolution, ApproxStats};
pub use transport::{solve_transport, solve_transport_with, TransportConfig, TransportPlan, TransportSolution};
