//! Comparing methods across datasets: Friedman average ranks with the Nemenyi
//! critical distance, and the Bayesian correlated t-test on per-fold scores.

mod bayes;
mod ranks;
pub mod special;

pub use bayes::{bayesian_correlated_ttest, BayesResult, DEFAULT_ROPE};
pub use ranks::{
    friedman_ranks, nemenyi_cd, rank_descending, read_fold_scores, read_score_table, significance_matrix, Alpha,
    FoldScores, ScoreTable,
};
