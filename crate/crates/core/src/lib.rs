//! Geometric verification of first- and second-order optimality conditions
//! for equality-constrained minimization `min f(x) s.t. g(x) = 0`.
//!
//! Derivatives come from exact forward-mode automatic differentiation of
//! parsed expressions. On top of them the crate computes second fundamental
//! forms of the objective level set and the constraint manifold, compares
//! them, traces normal-section curves, and samples the reduced functional
//! on the constraint manifold.
//!
//! ```
//! use socurv_core::{geometry, optimality, Problem};
//!
//! let p = Problem::parse(3, "x1", &["x1^2 + x2^2 + x3^2 - 1"]).unwrap();
//! let b = p.bundle(&[-1.0, 0.0, 0.0]).unwrap();
//! let ms = optimality::multipliers(&b).unwrap();
//! assert_eq!(ms.lambda, vec![-0.5]);
//! let v = geometry::tangent_basis(&b).unwrap();
//! let so = optimality::second_order_report(&b, &ms, &v, None).unwrap();
//! assert!(so.sufficient_holds);
//! ```

pub mod battery;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod implicit;
pub mod linalg;
pub mod optimality;
pub mod problem;
pub mod reduced;

pub use error::{DomainError, Error, ParseError, Result};
pub use expr::{parse, Expression, Jet2};
pub use geometry::{DerivativeBundle, PlanarCurvatureReport, Quadrant, TangentBasis};
pub use implicit::{TraceParams, TracedCurve};
pub use optimality::{CurvatureComparisonReport, MultiplierSet, SecondOrderReport};
pub use problem::Problem;
pub use reduced::{ReducedFunctional, SamplingParams, SufficiencyCertificate, Verdict};
