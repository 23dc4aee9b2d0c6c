//! Observed arrival histories, the "more recent arrivals" order `⊵`, and the
//! one-slot shift operators that generate it in discrete time.

use serde::{Deserialize, Serialize};

use crate::error::{CpbError, Result};

#[derive(Serialize, Deserialize)]
struct RawHistory {
    horizon: f64,
    arrivals: Vec<f64>,
}

/// The event `{T₁ = t₁, …, T_k = t_k, T_{k+1} > t}` observed on `[0, t]`.
///
/// An arrival exactly at the horizon is admitted; conditioning is always on
/// `T_{k+1} > t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHistory", into = "RawHistory")]
pub struct History {
    horizon: f64,
    arrivals: Vec<f64>,
}

impl TryFrom<RawHistory> for History {
    type Error = CpbError;

    fn try_from(raw: RawHistory) -> Result<Self> {
        History::new(raw.horizon, raw.arrivals)
    }
}

impl From<History> for RawHistory {
    fn from(h: History) -> Self {
        RawHistory {
            horizon: h.horizon,
            arrivals: h.arrivals,
        }
    }
}

impl History {
    pub fn new(horizon: f64, arrivals: Vec<f64>) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(CpbError::InvalidHistory(format!("horizon must be positive, got {horizon}")));
        }
        let mut prev = 0.0;
        for (i, &a) in arrivals.iter().enumerate() {
            if !(a.is_finite() && a > prev) {
                return Err(CpbError::InvalidHistory(format!(
                    "arrival #{} = {a} must be strictly after {prev}",
                    i + 1
                )));
            }
            if a > horizon {
                return Err(CpbError::InvalidHistory(format!(
                    "arrival #{} = {a} lies beyond the horizon {horizon}",
                    i + 1
                )));
            }
            prev = a;
        }
        Ok(Self { horizon, arrivals })
    }

    /// History with no arrivals on `[0, horizon]`.
    pub fn silent(horizon: f64) -> Result<Self> {
        Self::new(horizon, Vec::new())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    pub fn count(&self) -> usize {
        self.arrivals.len()
    }
}

#[derive(Serialize, Deserialize)]
struct RawDiscreteHistory {
    horizon: usize,
    arrivals: Vec<usize>,
}

/// Discrete-time history: arrivals in slots `1 ≤ n₁ < … < n_k ≤ n`, none in the
/// remaining slots up to `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDiscreteHistory", into = "RawDiscreteHistory")]
pub struct DiscreteHistory {
    horizon: usize,
    arrivals: Vec<usize>,
}

impl TryFrom<RawDiscreteHistory> for DiscreteHistory {
    type Error = CpbError;

    fn try_from(raw: RawDiscreteHistory) -> Result<Self> {
        DiscreteHistory::new(raw.horizon, raw.arrivals)
    }
}

impl From<DiscreteHistory> for RawDiscreteHistory {
    fn from(h: DiscreteHistory) -> Self {
        RawDiscreteHistory {
            horizon: h.horizon,
            arrivals: h.arrivals,
        }
    }
}

impl DiscreteHistory {
    pub fn new(horizon: usize, arrivals: Vec<usize>) -> Result<Self> {
        if horizon == 0 {
            return Err(CpbError::InvalidHistory("horizon slot must be at least 1".into()));
        }
        let mut prev = 0;
        for (i, &a) in arrivals.iter().enumerate() {
            if a <= prev {
                return Err(CpbError::InvalidHistory(format!(
                    "arrival slot #{} = {a} must be strictly after {prev}",
                    i + 1
                )));
            }
            if a > horizon {
                return Err(CpbError::InvalidHistory(format!(
                    "arrival slot #{} = {a} lies beyond the horizon {horizon}",
                    i + 1
                )));
            }
            prev = a;
        }
        Ok(Self { horizon, arrivals })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn arrivals(&self) -> &[usize] {
        &self.arrivals
    }

    pub fn count(&self) -> usize {
        self.arrivals.len()
    }

    /// Whether `Φ_i` moves anything (1-based `i`).
    pub fn can_shift(&self, i: usize) -> Result<bool> {
        let k = self.count();
        if i == 0 || i > k {
            return Err(CpbError::IndexOutOfRange { index: i, len: k });
        }
        let next = self.arrivals[i - 1] + 1;
        Ok(if i < k {
            self.arrivals[i] > next
        } else {
            next <= self.horizon
        })
    }
}

/// The partial order `a ⊵ b`: same horizon and count, and `a`'s arrivals are
/// componentwise no earlier than `b`'s.
pub trait Dominance {
    fn dominates(&self, other: &Self) -> Result<bool>;
}

impl Dominance for History {
    fn dominates(&self, other: &Self) -> Result<bool> {
        if self.horizon != other.horizon || self.count() != other.count() {
            return Err(CpbError::Incomparable(format!(
                "(t = {}, k = {}) vs (t = {}, k = {})",
                self.horizon,
                self.count(),
                other.horizon,
                other.count()
            )));
        }
        Ok(self.arrivals.iter().zip(&other.arrivals).all(|(a, b)| a >= b))
    }
}

impl Dominance for DiscreteHistory {
    fn dominates(&self, other: &Self) -> Result<bool> {
        if self.horizon != other.horizon || self.count() != other.count() {
            return Err(CpbError::Incomparable(format!(
                "(n = {}, k = {}) vs (n = {}, k = {})",
                self.horizon,
                self.count(),
                other.horizon,
                other.count()
            )));
        }
        Ok(self.arrivals.iter().zip(&other.arrivals).all(|(a, b)| a >= b))
    }
}

pub fn history_dominates<H: Dominance>(a: &H, b: &H) -> Result<bool> {
    a.dominates(b)
}

/// `Φ_i`: moves the `i`-th arrival one slot later when the next slot is free
/// (and inside the horizon); otherwise returns the history unchanged.
pub fn shift_operator(h: &DiscreteHistory, i: usize) -> Result<DiscreteHistory> {
    let mut out = h.clone();
    if h.can_shift(i)? {
        out.arrivals[i - 1] += 1;
    }
    Ok(out)
}

/// Sequence of shift indices carrying `from` onto `to` (requires `to ⊵ from`).
///
/// Arrivals are advanced right to left, so every shift in the chain is admissible.
pub fn shift_chain(from: &DiscreteHistory, to: &DiscreteHistory) -> Result<Vec<usize>> {
    if !to.dominates(from)? {
        return Err(CpbError::Incomparable("target does not dominate source".into()));
    }
    let mut chain = Vec::new();
    for i in (1..=from.count()).rev() {
        let steps = to.arrivals[i - 1] - from.arrivals[i - 1];
        chain.extend(std::iter::repeat_n(i, steps));
    }
    Ok(chain)
}

/// Folds `shift_operator` over a chain.
pub fn apply_chain(h: &DiscreteHistory, chain: &[usize]) -> Result<DiscreteHistory> {
    chain.iter().try_fold(h.clone(), |acc, &i| shift_operator(&acc, i))
}
