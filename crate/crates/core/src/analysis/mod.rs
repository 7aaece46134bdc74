//! Closed-form quantities, behaviour-table checkers and exhaustive oracles.

mod bounds;
mod chsh;
mod info;
mod rate;

pub use bounds::{azuma_tail, chernoff_subset, lemma6_exhaustive_check, Lemma6Outcome, Lemma6Report};
pub use chsh::{
    chsh_satisfied, classical_opt_bruteforce, classical_value, compute_opt, estimate_chsh, guessing_lemma_check,
    no_signalling_deviation, BehaviorTable, ChshEstimate, GuessingReport, GuessingVerdict, DEFAULT_TOLERANCE,
};
pub use info::{l1_distance_from_product, min_entropy_classical, mutual_information_classical};
pub use rate::{
    final_key_length, final_rate_zero_crossing, kappa_bound, kappa_zero_crossing, key_length_for_kappa, key_rate, rate_margin, KeyBasis,
    KeyRate, RateModel, ReconCost,
};
