//! Numerical laboratory for infinity-harmonic mappings.
//!
//! The crate constructs explicit map families with exact second-order jets,
//! evaluates the second-order residual of the infinity-Laplace system together
//! with its tangential/normal decomposition, partitions gridded domains into
//! constant-rank phases with interfaces, verifies per-phase structure
//! (eikonal constancy, rank-one representations, straight-segment images),
//! and integrates gradient flows with conservation and affinity diagnostics.

pub mod error;
pub mod export;
pub mod flow;
pub mod grid;
pub mod kprofile;
pub mod map;
pub mod phase;
pub mod quad;
pub mod residual;
pub mod tensor;

pub use error::{Error, Result};
pub use flow::{
    check_identity_energy_rate, check_monotone_increasing, integrate_flow, FlowSpec,
    FlowTrajectory, FlowVariant, Termination, DEFAULT_EPS_STOP, DEFAULT_FLOW_DT,
};
pub use grid::Grid;
pub use kprofile::{KProfile, KProfileSpec, PlateauInterval};
pub use map::{
    jet_finite_difference, EmbedSpec, FamilySpec, Jet2, MapInstance, MapSpec, ScalarProfileSpec,
};
pub use phase::{
    classify, fit_rank_one, interface_report, line_fit_image, verify_eikonal,
    verify_scalar_infinity_harmonic, InterfaceReport, NodeLabel, PhaseComponent, PhaseMap,
    RankOneFit, ScalarHarmonicCheck, DEFAULT_MARGIN_FLOOR,
};
pub use residual::{
    eikonal_deviation, one_d_residual_at, residual_at, residual_field, scalar_residual_at,
    ResidualField, ResidualSample,
};
pub use tensor::{
    estimate_rank, infinity_contraction, range_complement_projection, svd, Matrix, RankDecision,
    Svd, Tensor3, DEFAULT_TAU_ABS, DEFAULT_TAU_REL,
};
