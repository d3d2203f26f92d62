//! Small self-contained algorithmic building blocks.

pub mod assignment;
pub mod quadrature;
pub mod stats;
pub mod unionfind;

pub use assignment::min_cost_assignment;
pub use quadrature::{composite_midpoint, gauss_legendre};
pub use stats::{batch_stats, mean_stderr, ols_fit, sample_cumulants, BatchStat, Fit};
pub use unionfind::UnionFind;
