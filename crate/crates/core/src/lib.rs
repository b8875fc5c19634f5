//! Exact and sampled explanations of rankings under uncertain column
//! weights: expected ranking effects, SHAP scores of weights and Shapley
//! values of columns.

pub mod approx;
pub mod attribution;
pub mod domain;
pub mod error;
pub mod expectation;
pub mod oracle;
pub mod pairwise;
pub mod ranking;
pub mod reductions;

pub use domain::{
    apply_weights, int, parse_rational, rat, restrict_columns, ColumnDistribution, ColumnSet, Matrix,
    Permutation, ProductDistribution, Rational, WeightVector,
};
pub use attribution::{shap_all, shap_score, shapley_all, shapley_column, Attribution, ShapInstance};
pub use error::{Error, Hardness, Result};
pub use expectation::{expect_effect, Caps, ExpInstance, MethodTag, Mode};
pub use pairwise::{Encoding, TieOrientation};
pub use ranking::{
    effect_range, effect_value, normalize, rank_matrix, CanonicalRanking, Direction, EffectContext, EffectKind,
    EffectSpec, RankingSpec, Score,
};
