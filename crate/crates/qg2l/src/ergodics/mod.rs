//! Ergodicity machinery: semimetrics on state space, the explicit constants
//! of the contraction theorem, total-variation bounds for drifted Wiener
//! processes, empirical Wasserstein estimation by exact assignment, and the
//! verification of the four coupling assumptions on realized trajectories.

pub mod assignment;
pub mod constants;
pub mod ensemble;
pub mod semimetric;
pub mod verify;

pub use assignment::min_cost_assignment;
pub use constants::{compute_constants, tv_bound_large, tv_bound_small, ConditionFlags, ErgodicityConstants};
pub use ensemble::{empirical_wasserstein, generate_ensemble, Ensemble};
pub use semimetric::{d_n, d_tilde, lyapunov_v, theta_alpha, SemimetricParams};
pub use verify::{check_assumptions, AssumptionsReport};
