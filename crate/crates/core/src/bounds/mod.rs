//! Theorem-level perturbation bounds with explicit constants, their
//! hypotheses and the matching empirical quantities.

mod classical;
mod empirical;
mod entrywise;
mod gaussian;
mod general;
mod params;
mod report;

pub use classical::{mirsky_check, wedin_check};
pub use empirical::{
    cross_term_direct_sum, cross_term_sum, empirical_quantity, left_pair, projected_singulars, right_pair,
    EmpiricalQuantity,
};
pub use entrywise::{entrywise_bound, linear_bilinear_bound, weighted_bound, EntrywiseForm, WeightedForm};
pub use gaussian::{
    gauss_subspace_bound, gauss_subspace_bound_with, gauss_sv_location_check, in_location_set, noise_norm_event,
    simplified_subspace_bound, SimplifiedVariant, SubspaceVariant,
};
pub use general::{
    fbounded_probability, fbounded_subspace_bound, gaussian_tail, general_subspace_bound, general_sv_bounds,
};
pub use params::{chi, xi, GaussianBoundParams, GeneralNoiseParams, IncoherenceStats, LeadingConstant};
pub use report::{exceeds, ratio, BoundReport, BoundRow, PreconditionFlags, VIOLATION_SLACK};
