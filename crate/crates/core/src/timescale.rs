//! Count-driven random time change.
//!
//! The clock `g` runs at speed `γ_k` while the process holds `k` arrivals, so
//! interarrival `k` is stretched by `γ_{k−1}` and the transformed process is
//! again CPB with rates `λ_i(k)/γ_k`.

use serde::{Deserialize, Serialize};

use crate::continuous::{ContinuousModel, PathSample};
use crate::error::{CpbError, Result};
use crate::history::History;
use crate::rates::{validate_rates, ConditionReport, RateSchedule, TailMode};

/// Speeds `γ₀, γ₁, …`; the last listed value repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeScale {
    gammas: Vec<f64>,
}

impl TryFrom<Vec<f64>> for TimeScale {
    type Error = CpbError;

    fn try_from(gammas: Vec<f64>) -> Result<Self> {
        Self::new(gammas)
    }
}

impl From<TimeScale> for Vec<f64> {
    fn from(s: TimeScale) -> Self {
        s.gammas
    }
}

impl TimeScale {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(CpbError::InvalidParameter("time scale needs at least one speed".into()));
        }
        if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(CpbError::InvalidParameter(format!(
                "time-scale speeds must be positive and finite, got {g}"
            )));
        }
        Ok(Self { gammas })
    }

    pub fn constant(gamma: f64) -> Result<Self> {
        Self::new(vec![gamma])
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn gamma(&self, k: usize) -> f64 {
        *self.gammas.get(k).unwrap_or_else(|| self.gammas.last().expect("non-empty"))
    }

    /// The common speed if every `γ_k` is equal.
    pub fn constant_value(&self) -> Option<f64> {
        let g0 = self.gammas[0];
        self.gammas.iter().all(|&g| g == g0).then_some(g0)
    }

    pub fn inverse(&self) -> Self {
        Self {
            gammas: self.gammas.iter().map(|g| 1.0 / g).collect(),
        }
    }
}

/// `g(t)` along `arrivals`, for any `t ≥ 0`.
fn map_along(scale: &TimeScale, arrivals: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    let mut prev = 0.0;
    for (k, &a) in arrivals.iter().enumerate() {
        if a > t {
            return acc + scale.gamma(k) * (t - prev);
        }
        acc += scale.gamma(k) * (a - prev);
        prev = a;
    }
    acc + scale.gamma(arrivals.len()) * (t - prev)
}

pub fn time_map(scale: &TimeScale, h: &History, t: f64) -> Result<f64> {
    if !(0.0..=h.horizon()).contains(&t) {
        return Err(CpbError::Range {
            value: t,
            lo: 0.0,
            hi: h.horizon(),
        });
    }
    Ok(map_along(scale, h.arrivals(), t))
}

pub fn inverse_time_map(scale: &TimeScale, h: &History, s: f64) -> Result<f64> {
    let top = map_along(scale, h.arrivals(), h.horizon());
    if !(0.0..=top).contains(&s) {
        return Err(CpbError::Range { value: s, lo: 0.0, hi: top });
    }
    let mut acc = 0.0;
    let mut prev = 0.0;
    for (k, &a) in h.arrivals().iter().enumerate() {
        let next = acc + scale.gamma(k) * (a - prev);
        if s < next {
            return Ok(prev + (s - acc) / scale.gamma(k));
        }
        if s == next {
            return Ok(a);
        }
        acc = next;
        prev = a;
    }
    let t = prev + (s - acc) / scale.gamma(h.count());
    Ok(t.min(h.horizon()))
}

/// Arrivals `g(t_i)` and horizon `g(t)`.
pub fn transform_history(scale: &TimeScale, h: &History) -> Result<History> {
    let arrivals = h.arrivals();
    let mapped = transformed_arrivals(scale, arrivals);
    History::new(map_along(scale, arrivals, h.horizon()), mapped)
}

fn transformed_arrivals(scale: &TimeScale, arrivals: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut prev = 0.0;
    arrivals
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            acc += scale.gamma(k) * (a - prev);
            prev = a;
            acc
        })
        .collect()
}

/// Maps every time of a simulated path through its own clock. The change time
/// is mapped along the recorded arrivals, which is exact whenever it falls
/// inside the simulated window.
pub fn transform_path(scale: &TimeScale, path: &PathSample) -> PathSample {
    let arrivals = &path.arrival_times;
    PathSample {
        change_time: map_along(scale, arrivals, path.change_time),
        arrival_times: transformed_arrivals(scale, arrivals),
        horizon: if path.horizon.is_finite() {
            map_along(scale, arrivals, path.horizon)
        } else {
            f64::INFINITY
        },
        seed: path.seed,
    }
}

/// `λ̃_i(k) = λ_i(k)/γ_k`.
pub fn transform_rates(scale: &TimeScale, rates: &RateSchedule) -> Result<RateSchedule> {
    let len = match rates.tail() {
        TailMode::RepeatLast => rates.len().max(scale.gammas.len()),
        TailMode::ZeroAfterK => rates.len(),
    };
    rates.map_indexed(len, rates.units(), |k, a, b| {
        let g = scale.gamma(k);
        (a / g, b / g)
    })
}

/// The model seen on the clock `g(t) = γ₀t`: law of `γ₀U` and rates `λ/γ₀`.
pub fn transform_model_constant(scale: &TimeScale, model: &ContinuousModel) -> Result<ContinuousModel> {
    let g0 = scale.constant_value().ok_or_else(|| {
        CpbError::Precondition("model transform needs a constant time scale".into())
    })?;
    ContinuousModel::new(transform_rates(scale, model.rates())?, model.law().time_scaled(g0))
}

/// `c_k = 1/(1 + k/(K+1))` for `k = 0..=K`, `K` the listed schedule length.
pub fn default_regularizer(rates: &RateSchedule) -> Vec<f64> {
    let k_len = rates.len() as f64;
    (0..=rates.len()).map(|k| 1.0 / (1.0 + k as f64 / (k_len + 1.0))).collect()
}

/// `γ_k = c_k·(λ₁(k)−λ₀(k))/(λ₁(0)−λ₀(0))` for `k < len(c)`, after which the
/// last speed repeats. Transformed differences become `(λ₁(0)−λ₀(0))/c_k`.
pub fn regularizing_gammas(rates: &RateSchedule, c: &[f64]) -> Result<TimeScale> {
    if c.first() != Some(&1.0) {
        return Err(CpbError::InvalidParameter("c must start at 1".into()));
    }
    if c.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(CpbError::InvalidParameter("c must be positive".into()));
    }
    if c.windows(2).any(|w| w[1] > w[0]) {
        return Err(CpbError::InvalidParameter("c must be non-increasing".into()));
    }
    let diff = |k| rates.post(k) - rates.pre(k);
    if let Some(k) = (0..c.len()).find(|&k| !(diff(k) > 0.0)) {
        return Err(CpbError::Precondition(format!(
            "regularizing needs λ₁(k) > λ₀(k); fails at k = {k}"
        )));
    }
    let d0 = diff(0);
    TimeScale::new(c.iter().enumerate().map(|(k, ck)| ck * diff(k) / d0).collect())
}

/// Condition report of the regularized schedule over the indices `c` covers.
pub fn regularized_conditions(rates: &RateSchedule, c: &[f64]) -> Result<(TimeScale, ConditionReport)> {
    let scale = regularizing_gammas(rates, c)?;
    let transformed = transform_rates(&scale, rates)?;
    let report = validate_rates(&transformed, c.len().saturating_sub(1).max(1))?;
    Ok((scale, report))
}
