//! The sparsity test and the coefficient confidence regions.

pub mod region;
pub mod sparsity;

pub use region::{
    coef_region, coef_region_membership, f_statistic, partial_coef_region, partial_f_statistic,
    region_volume_mc, ConfidenceRegion, Ellipsoid, RegionKind, RegionPiece, VolumeEstimate,
};
pub use sparsity::{
    best_fit_in_set, conditional_mc_quantile, conditional_mc_statistics, sparsity_test,
    sufficient_stats, test_statistic, CandidateFits, SparsityTestConfig, SparsityTestReport,
    SufficientStats,
};
