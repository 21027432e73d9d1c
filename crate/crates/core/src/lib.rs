//! Simulation of multi-subsystem quantum states described relative to
//! quantum reference systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: labeled tensor-product spaces, partial traces, Schmidt and
//!   hermitian eigendecompositions.
//! * [`dynamics`]: spin eigenbases and premeasurement unitaries that couple a
//!   measured system to a pointer.
//! * [`postulates`]: possible internal states, joint probabilities for
//!   disjoint subsystems, sampling, and ordering-dependent pseudo-probabilities.
//! * [`lhv`]: local hidden-variable models, Bell's inequality and CHSH.
//! * [`scenarios`]: end-to-end measurement chains and the EPR-Bell experiment.

pub mod dynamics;
pub mod error;
pub mod lhv;
pub mod postulates;
pub mod scenarios;
pub mod tensor;

pub use error::{QrefError, Result};
pub use num_complex::Complex64;
pub use tensor::{
    eig_hermitian, partial_trace, pure_to_density, reduced_state, schmidt_decompose, tensor,
    CompositeSpace, DensityMatrix, PureState, SchmidtForm, SpectralDecomposition, SubsystemId,
};
