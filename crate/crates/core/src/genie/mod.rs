//! Small-blocklength simulation of metric decoding with and without the
//! genie's list, plus the type-counting quantities used to analyze it.

mod decode;
mod lists;
mod omega;
mod types;

pub use decode::{
    build_list, exact_error, genie_decode, monte_carlo_error, plain_decode, Decoder, SimMode, SimResult,
    EXACT_POINT_CAP,
};
pub use lists::{list_posterior, list_size_experiment, pairwise_lower_bound_check, ListSizeReport, PairwiseReport};
pub use omega::{omega, omega_n, omega_relaxed, score_gap, Omega, OMEGA_N_CAP};
pub use types::{
    ln_conditional_class_size, ln_type_class_size, order_n_counts, sample_conditional, type_class_size, Codebook,
    CodebookRepr, JointType, TypeIndex,
};
