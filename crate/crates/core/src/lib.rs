//! Statevector simulation of quantum circuits that compute subset-lattice
//! (zeta/Möbius) transforms and marginals of probability tables through
//! Grover amplitude amplification, with classical oracles to check them.
//!
//! - [`subset`]: bit strings, set-function tables, naive and fast transforms.
//! - [`qsim`]: the register layout, gates, statevector and a state-prep compiler.
//! - [`circuits`]: the `T` operator, target projector, starting state `|s>` and
//!   its exact decomposition.
//! - [`grover`]: amplification toward `omega = 0` and value estimators.
//! - [`minfind`]: bit-fixing binary search for the minimum of an objective.

pub mod circuits;
pub mod error;
pub mod grover;
pub mod minfind;
pub mod qsim;
pub mod subset;

pub use circuits::{ClaimDecomposition, SCircuitSpec};
pub use error::{Error, Result};
pub use grover::{EstimateReport, GroverPlan};
pub use qsim::{Circuit, GateOp, Mode, Predicate, Register, RegisterLayout, StateVector};
pub use subset::{BitString, SubsetTable};
