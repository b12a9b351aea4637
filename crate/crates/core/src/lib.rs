//! Sequential warped products: assembly, brute-force curvature, closed-form
//! component formulas and pseudo-projective diagnostics.

pub mod chart;
pub mod compare;
pub mod curvature;
pub mod error;
pub mod identities;
pub mod presets;
pub mod pseudo_projective;
pub mod random;
pub mod sampling;
pub mod structure;
pub mod sweep;
pub mod warped;

pub use chart::{Chart, ChartPoint, FactorChart, MetricAt, MetricJet, DEGENERACY_FLOOR};
pub use compare::{Discrepancy, FormulaRecord, RecordBuilder, Tolerance, VariantRecord, Verdict};
pub use curvature::{
    covariant_derivative_02, covariant_derivative_13, diff_ops, tensor_divergence, CurvatureBundle,
    CurvatureDerivatives, DiffOps, Divergence, TensorJet,
};
pub use error::{GeometryError, Result};
pub use pseudo_projective::{
    flatness_diagnostics, flatness_scan, pp_closed_form, pp_divergence, pp_tensor, projective_tensor,
    verify_pp, FlatnessDiagnostics, FlatnessScan, PPTensor, PseudoProjectiveParams,
};
pub use sampling::HaltonSampler;
pub use sweep::FAULT_SIZE;
pub use warped::{verify_lemmas, ClosedFormAux, ClosedFormContext, ModelKind, SequentialModel, VerifyOptions};
