//! Human-preference alignment: winning rates, correlations and weight fitting.

pub mod correlation;
pub mod fit;
pub mod grid;
pub mod terms;
pub mod votes;

pub use correlation::{average_ranks, kendall, pearson, spearman};
pub use fit::{fit_all, fit_criterion, fit_group, fit_weights, FitOptions, FitProblem, FitResult, FitStatus, GroupFit, Question};
pub use grid::{binomial, simplex_grid, SimplexGrid};
pub use terms::{group_applies, group_criterion, group_terms, groups_for, GroupTerms, TermPart};
pub use votes::{human_winning_rates, majority_vote, metric_credit, tally, PairOutcome, WinningRates};
