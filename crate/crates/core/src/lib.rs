//! Detailed-balance testing for scalar time series.
//!
//! A price series is turned into log-returns, consecutive return pairs are
//! binned into an empirical transition matrix `W(x, y)` (destination `x`,
//! source `y`), and the action
//!
//! ```text
//! S[w] = 1/K * sum_{x<y, a+b>0} ((a - b) / (a + b))^2,   a = W(x,y) w(y),  b = W(y,x) w(x)
//! ```
//!
//! is minimized over distributions `w` by multi-start simulated annealing.
//! `S = 0` means the dynamics satisfy detailed balance with respect to the
//! minimizer; `S = 1` is maximal violation. The [`controls`] module supplies
//! an exactly balanced Metropolis matrix and a uniform random matrix to
//! calibrate the signal.

pub mod action;
pub mod anneal;
pub mod cli;
pub mod controls;
pub mod error;
pub mod grid;
pub mod series;
pub mod tsv;

pub use action::{action, action_delta, balance_residuals, fixed_point_residual, ActionCache, ActionValue};
pub use anneal::{anneal_multi, anneal_one, make_schedule, random_start, AnnealConfig, AnnealResult, AnnealSchedule};
pub use error::{Error, Result};
pub use grid::{BinGrid, Distribution, MatrixKind, TransitionMatrix};
pub use series::{PriceSeries, ReturnsSeries};
