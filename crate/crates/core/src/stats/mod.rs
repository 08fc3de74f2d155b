//! Statistics used by the pipeline: moments and Z-scores, correlation,
//! standardized regression, the Student-t distribution and two-sample t-tests.

pub mod descriptive;
pub mod regression;
pub mod special;
pub mod ttest;

pub use descriptive::{mean, norm_params, pearson_r, sample_std, standardize, z_score, NormParams};
pub use regression::{ols_standardized, RegressionFit};
pub use special::{student_t_cdf, two_sided_p};
pub use ttest::{two_sample_t, TTest};
