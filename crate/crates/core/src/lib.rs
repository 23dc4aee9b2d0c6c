//! Conditionally pure birth (CPB) change-point counting processes.
//!
//! A CPB process is, conditionally on an unobserved change point `U`, a pure
//! birth process with rates `λ₀(k)` before `U` and `λ₁(k)` after it, `k` being
//! the current arrival count. This crate computes the posterior
//! `P(U > t | h_t)` and the stochastic intensity given an observed history in
//! continuous and discrete time, simulates paths, applies the count-driven
//! random time change, and provides a harness for checking the monotonicity
//! of the intensity in the history order.

pub mod continuous;
pub mod discrete;
pub mod error;
pub mod history;
pub mod law;
pub mod numeric;
pub mod posterior;
pub mod rates;
pub mod timescale;
pub mod verify;

pub use error::{CpbError, Result};
pub use history::{history_dominates, shift_chain, shift_operator, DiscreteHistory, Dominance, History};
pub use law::{CdfTable, ChangePointLaw, ContinuousLaw, DiscreteHazard, HazardSequence};
pub use posterior::PosteriorResult;
pub use rates::{validate_rates, ConditionReport, RateSchedule, RateUnits, Regime, TailMode};
