//! Numerical core: lattice discretization, FFT self-convolution,
//! positive-part expectations, delta evaluation with error terms, searches
//! over `eps` and `eps0`, and an exact small-`n` oracle.

pub mod bound;
pub mod convolve;
pub mod exact;
pub mod lattice;
pub mod report;
pub mod search;

pub use bound::{delta_bound, delta_bound_with_tail, discretization_slack, positive_part_mean, DeltaBound};
pub use convolve::{
    self_convolve, self_convolve_naive, self_convolve_windowed, Convolution, DEFAULT_TAIL, MAX_FFT_LEN,
};
pub use exact::delta_exact_smalln;
pub use lattice::{discretize, LatticeDist, Rounding};
pub use report::{bound_report, BoundReport};
pub use search::{
    curve, family_delta, find_eps0, find_epsilon, find_epsilon_lower, CurveRow, FamilyBuilder, FamilyDelta,
    StepRule,
};
