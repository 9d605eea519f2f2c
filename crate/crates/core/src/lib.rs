//! Queue-length and waiting-time distributions of the two-level non-preemptive Markovian
//! priority queue.
//!
//! The wait-conditional joint PMF `P(ell, m)` of `ell` high-priority and `m` low-priority
//! waiting clients depends only on the traffic intensity `r` and the high-priority fraction
//! `nu`. Each PMF entry splits into a pole contribution at `z = 1/r` and a branch-cut integral;
//! the cut part is evaluated either by iterative Gauss-Chebyshev quadrature or by finite sums
//! of scaled Legendre polynomials and Q-functions.
//!
//! ```
//! use npq::{Engine, Model};
//!
//! let model = Model::from_r_nu(0.9, 0.5).unwrap();
//! let p = model.p_lo(3, Engine::Quadrature).unwrap();
//! assert!((p.value - (p.pole_part + p.cut_part)).abs() == 0.0);
//! let q = model.joint_pmf(0, 0, Engine::Exact).unwrap();
//! assert!((q.value - 0.1).abs() < 1e-14);
//! ```

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod joint;
pub mod marginal;
pub mod model;
pub mod oracle;
pub mod qfunc;
pub mod quadrature;
pub mod scalar;
pub mod validation;
pub mod waiting_time;

pub use error::{Error, Result};
pub use marginal::{Engine, Method, PmfResult};
pub use model::{derive, full_pmf, no_wait_probability, ComplexPoint, DerivedParams, TwoLevelModel, TwoLevelParams};
pub use quadrature::{QuadratureOptions, QuadratureState, Rule};
pub use scalar::Real;
pub use validation::{MarginalSource, MopKind, MopReport};
pub use waiting_time::{multilevel_waiting_pdf, waiting_pdf_laguerre, LaguerreCoeffs, MultiLevelParams};

/// Double-precision model.
pub type Model = model::TwoLevelModel<f64>;
/// Double-precision parameters.
pub type Params = model::TwoLevelParams<f64>;
/// Double-precision derived geometry.
pub type Derived = model::DerivedParams<f64>;
/// Double-precision PMF entry.
pub type Pmf = marginal::PmfResult<f64>;
