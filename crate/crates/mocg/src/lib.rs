//! Solvers and benchmarking tools for multiobjective composite optimization.
//!
//! The problems handled here minimize a vector objective `F(x) = G(x) + H(x)`
//! over a box, where each `h_j` is smooth and each `g_j` is convex but
//! possibly nonsmooth (zero, or the support function of a polyhedral
//! uncertainty set, which is how robust counterparts of classic
//! multiobjective test problems are built).
//!
//! The main pieces:
//!
//! * [`problem`] / [`registry`] — problem model and the built-in test set;
//! * [`lp`] / [`qp`] — dense simplex and interior-point solvers for the
//!   direction-finding subproblems;
//! * [`gap`] — the gap function `theta(x)`, its minimizer `p(x)`, and the
//!   conditional-gradient / proximal-gradient directions;
//! * [`robust`] — construction of polyhedral uncertainty sets;
//! * [`solver`] — the conditional gradient method with Armijo, adaptive and
//!   diminishing step sizes, plus the proximal-gradient comparator;
//! * [`bench`] — multistart runner, Pareto metrics, performance profiles and
//!   report generation.

pub mod bench;
pub mod constants;
pub mod error;
pub mod gap;
pub mod lp;
pub mod problem;
pub mod qp;
pub mod registry;
pub mod robust;
pub mod solver;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
