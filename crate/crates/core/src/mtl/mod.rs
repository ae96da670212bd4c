//! Meta transfer learning: transfer matrices, metamodel training, source
//! ranking, ensembling, and the experiment harnesses.

mod ablation;
mod evaluate;
mod experiment;
mod matrix;
mod metamodel;
mod metrics;
mod sparse;

pub use ablation::{penalty_ablation, PenaltyRow};
pub use evaluate::{canonical_mean, ensemble_predict, transfer_points, EvalPoints, DEEP_WATER_FRACTION};
pub use experiment::{
    experiment1, tune_ensemble_size, EnsembleSizeConfig, EnsembleSizeResult, Exp1Config, Exp1Report, Exp1Row,
    Exp1Summary, FamilyResult, FamilySummary, MethodSummary, PairResult, ENSEMBLE_SIZE_GRID,
};
pub use matrix::{build_transfer_matrix, LakeEntry, SourceLake, TransferMatrix, TransferRecord};
pub use metamodel::{rank_by_score, rank_sources, train_metamodel, Metamodel, MetamodelConfig, RankedSource, RankedSources};
pub use metrics::{
    average_ranks, matched_pairs, median, quantile, rmse, rmse_values, spearman, Quartiles,
    DEPTH_MATCH_TOLERANCE,
};
pub use sparse::{experiment2, Exp2Config, Exp2Draw, Exp2LakeMedian, Exp2Report, Exp2Treatment, PROFILE_COUNTS};

/// Ordered pairs among `n` sources.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1)
}
