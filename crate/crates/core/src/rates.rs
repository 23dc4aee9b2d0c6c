//! Birth-rate schedules and the ordering conditions checked on them.
//!
//! A schedule stores a finite prefix `λ_i(0), …, λ_i(K-1)` for both regimes and
//! a [`TailMode`] describing how the sequence continues past the prefix.

use serde::{Deserialize, Serialize};

use crate::error::{CpbError, Result};

/// How a schedule continues past its listed prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMode {
    /// The last listed rate repeats forever.
    RepeatLast,
    /// Rates are zero from index `K` on; the process is absorbed after `K` arrivals.
    ZeroAfterK,
}

/// Continuous schedules carry events per unit time, discrete ones per-slot
/// arrival probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateUnits {
    PerTime,
    PerSlot,
}

/// Which side of the change point a rate applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Before,
    After,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawSchedule {
    pre: Vec<f64>,
    post: Vec<f64>,
    tail: TailMode,
    units: RateUnits,
}

/// Pre- and post-change birth rates indexed by the current arrival count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct RateSchedule {
    pre: Vec<f64>,
    post: Vec<f64>,
    tail: TailMode,
    units: RateUnits,
}

impl TryFrom<RawSchedule> for RateSchedule {
    type Error = CpbError;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        RateSchedule::new(raw.pre, raw.post, raw.tail, raw.units)
    }
}

impl From<RateSchedule> for RawSchedule {
    fn from(s: RateSchedule) -> Self {
        RawSchedule {
            pre: s.pre,
            post: s.post,
            tail: s.tail,
            units: s.units,
        }
    }
}

impl RateSchedule {
    pub fn new(pre: Vec<f64>, post: Vec<f64>, tail: TailMode, units: RateUnits) -> Result<Self> {
        if pre.is_empty() {
            return Err(CpbError::InvalidSchedule("schedule must list at least one rate".into()));
        }
        if pre.len() != post.len() {
            return Err(CpbError::InvalidSchedule(format!(
                "pre-change and post-change lists differ in length ({} vs {})",
                pre.len(),
                post.len()
            )));
        }
        for (name, list) in [("pre", &pre), ("post", &post)] {
            for (k, &r) in list.iter().enumerate() {
                if !(r.is_finite() && r > 0.0) {
                    return Err(CpbError::InvalidSchedule(format!(
                        "{name}-change rate at index {k} must be positive and finite, got {r}"
                    )));
                }
                if units == RateUnits::PerSlot && r >= 1.0 {
                    return Err(CpbError::InvalidSchedule(format!(
                        "{name}-change per-slot probability at index {k} must be below 1, got {r}"
                    )));
                }
            }
        }
        Ok(Self {
            pre,
            post,
            tail,
            units,
        })
    }

    pub fn continuous(pre: Vec<f64>, post: Vec<f64>, tail: TailMode) -> Result<Self> {
        Self::new(pre, post, tail, RateUnits::PerTime)
    }

    pub fn discrete(pre: Vec<f64>, post: Vec<f64>, tail: TailMode) -> Result<Self> {
        Self::new(pre, post, tail, RateUnits::PerSlot)
    }

    /// Constant rates `λ₀ ≡ before`, `λ₁ ≡ after`.
    pub fn constant(before: f64, after: f64, units: RateUnits) -> Result<Self> {
        Self::new(vec![before], vec![after], TailMode::RepeatLast, units)
    }

    pub fn pre_listed(&self) -> &[f64] {
        &self.pre
    }

    pub fn post_listed(&self) -> &[f64] {
        &self.post
    }

    pub fn tail(&self) -> TailMode {
        self.tail
    }

    pub fn units(&self) -> RateUnits {
        self.units
    }

    /// Number of listed rates per regime.
    pub fn len(&self) -> usize {
        self.pre.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pre.is_empty()
    }

    /// Maximum number of arrivals the process can produce, if finite.
    pub fn capacity(&self) -> Option<usize> {
        match self.tail {
            TailMode::RepeatLast => None,
            TailMode::ZeroAfterK => Some(self.pre.len()),
        }
    }

    /// Tail-extended rate for regime and arrival count `k`.
    pub fn rate(&self, regime: Regime, k: usize) -> f64 {
        let list = match regime {
            Regime::Before => &self.pre,
            Regime::After => &self.post,
        };
        match list.get(k) {
            Some(&r) => r,
            None => match self.tail {
                TailMode::RepeatLast => *list.last().expect("non-empty schedule"),
                TailMode::ZeroAfterK => 0.0,
            },
        }
    }

    pub fn pre(&self, k: usize) -> f64 {
        self.rate(Regime::Before, k)
    }

    pub fn post(&self, k: usize) -> f64 {
        self.rate(Regime::After, k)
    }

    pub fn max_rate(&self) -> f64 {
        self.pre
            .iter()
            .chain(self.post.iter())
            .copied()
            .fold(0.0, f64::max)
    }

    /// Applies `f(k, λ₀(k), λ₁(k))` to every index in `0..len`, producing a new schedule.
    pub(crate) fn map_indexed(
        &self,
        len: usize,
        units: RateUnits,
        f: impl Fn(usize, f64, f64) -> (f64, f64),
    ) -> Result<Self> {
        let (pre, post): (Vec<f64>, Vec<f64>) =
            (0..len).map(|k| f(k, self.pre(k), self.post(k))).unzip();
        Self::new(pre, post, self.tail, units)
    }
}

/// Which of the ordering conditions a schedule satisfies up to an index bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Highest arrival count examined.
    pub bound: usize,
    /// `λ₁(k) > λ₀(k)` for every `k ≤ bound`.
    pub assu_strict: bool,
    /// `λ₁(k) ≥ λ₀(k)` for every `k ≤ bound`.
    pub assu_broad: bool,
    /// `λ₁(k) − λ₀(k)` strictly increasing over `0..=bound`.
    pub catania: bool,
    /// Discrete strict dominance; `None` for per-time schedules.
    pub plo: Option<bool>,
    /// Discrete ratio condition for `k = 1..=bound`; `None` for per-time schedules.
    pub ser: Option<bool>,
}

/// Default examination bound: one past the listed prefix.
pub fn default_bound(rates: &RateSchedule) -> usize {
    rates.len() + 1
}

/// Evaluates the ser ratio `(1−λ₁(k−1))(1−λ₀(k)) / ((1−λ₀(k−1))(1−λ₁(k)))` at `k ≥ 1`.
pub fn ser_ratio(rates: &RateSchedule, k: usize) -> f64 {
    let (num, den) = ser_terms(rates, k);
    num / den
}

fn ser_terms(rates: &RateSchedule, k: usize) -> (f64, f64) {
    debug_assert!(k >= 1);
    let num = (1.0 - rates.post(k - 1)) * (1.0 - rates.pre(k));
    let den = (1.0 - rates.pre(k - 1)) * (1.0 - rates.post(k));
    (num, den)
}

pub fn validate_rates(rates: &RateSchedule, bound: usize) -> Result<ConditionReport> {
    if bound < 1 {
        return Err(CpbError::InvalidParameter("condition bound must be at least 1".into()));
    }
    let diffs: Vec<f64> = (0..=bound).map(|k| rates.post(k) - rates.pre(k)).collect();
    let assu_strict = (0..=bound).all(|k| rates.post(k) > rates.pre(k));
    let assu_broad = (0..=bound).all(|k| rates.post(k) >= rates.pre(k));
    let catania = diffs.windows(2).all(|w| w[0] < w[1]);
    let (plo, ser) = match rates.units() {
        RateUnits::PerTime => (None, None),
        RateUnits::PerSlot => {
            // cross-multiplied so that equal factors compare exactly
            let ser = (1..=bound).all(|k| {
                let (num, den) = ser_terms(rates, k);
                num >= den
            });
            (Some(assu_strict), Some(ser))
        }
    };
    Ok(ConditionReport {
        bound,
        assu_strict,
        assu_broad,
        catania,
        plo,
        ser,
    })
}
