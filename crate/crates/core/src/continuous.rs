//! Continuous-time engine.
//!
//! Given `U = u`, the history likelihood is the pure-birth density: the product
//! of the active rate at each arrival times `exp(−∫₀ᵗ rate)`. Between two
//! consecutive arrivals the log-likelihood is linear in `u`, so
//! `∫₀ᵗ L(h|u) dG(u)` splits into per-segment exponential-linear integrals.
//! Those have a closed form for exponential and table laws; Weibull laws use
//! adaptive quadrature in the survival variable `q = Ḡ(u)`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::discrete::{self, DiscreteModel};
use crate::error::{CpbError, Result};
use crate::history::{DiscreteHistory, History};
use crate::law::{ContinuousLaw, DiscreteHazard};
use crate::numeric::{integrate_adaptive, ln_integral_exp_linear, log_sum_exp, seeded_rng};
use crate::posterior::PosteriorResult;
use crate::rates::{RateSchedule, RateUnits, Regime, TailMode};

/// Relative tolerance of the adaptive quadrature.
pub const QUADRATURE_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousModel {
    rates: RateSchedule,
    law: ContinuousLaw,
}

impl ContinuousModel {
    pub fn new(rates: RateSchedule, law: ContinuousLaw) -> Result<Self> {
        if rates.units() != RateUnits::PerTime {
            return Err(CpbError::InvalidSchedule(
                "continuous model needs per-time rates".into(),
            ));
        }
        law.validate()?;
        Ok(Self { rates, law })
    }

    pub fn rates(&self) -> &RateSchedule {
        &self.rates
    }

    pub fn law(&self) -> &ContinuousLaw {
        &self.law
    }

    fn rate(&self, regime: Regime, k: usize) -> f64 {
        self.rates.rate(regime, k)
    }
}

fn regime_at(s: f64, u: f64) -> Regime {
    if s >= u {
        Regime::After
    } else {
        Regime::Before
    }
}

/// `ln L(h | U = u)` by walking the elementary pieces cut at the arrivals, at
/// `u`, and at any `extra_cuts`. `u = +∞` gives the all-pre-change likelihood.
pub(crate) fn log_likelihood_with_cuts(
    model: &ContinuousModel,
    h: &History,
    u: f64,
    extra_cuts: &[f64],
) -> f64 {
    let t = h.horizon();
    let mut ln = 0.0;
    for (j, &tj) in h.arrivals().iter().enumerate() {
        ln += model.rate(regime_at(tj, u), j).ln();
    }
    let mut cuts: Vec<f64> = h.arrivals().to_vec();
    cuts.push(t);
    if u > 0.0 && u < t {
        cuts.push(u);
    }
    cuts.extend(extra_cuts.iter().copied().filter(|&c| c > 0.0 && c < t));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let arrivals = h.arrivals();
    let mut start = 0.0;
    for &end in &cuts {
        // count of arrivals at or before the left end of the piece
        let count = arrivals.partition_point(|&a| a <= start);
        ln -= model.rate(regime_at(start, u), count) * (end - start);
        start = end;
    }
    ln
}

pub fn log_likelihood_given_changepoint(model: &ContinuousModel, h: &History, u: f64) -> Result<f64> {
    if u.is_nan() || u < 0.0 {
        return Err(CpbError::InvalidParameter(format!("change point {u} must be >= 0")));
    }
    Ok(log_likelihood_with_cuts(model, h, u, &[]))
}

pub fn likelihood_given_changepoint(model: &ContinuousModel, h: &History, u: f64) -> Result<f64> {
    Ok(log_likelihood_given_changepoint(model, h, u)?.exp())
}

/// `ln L(h|u) = offset + slope·u` for `u ∈ (lo, hi]`.
#[derive(Debug, Clone, Copy)]
struct LinearSegment {
    lo: f64,
    hi: f64,
    offset: f64,
    slope: f64,
}

fn linear_segments(model: &ContinuousModel, h: &History) -> Vec<LinearSegment> {
    let k = h.count();
    let mut knots = Vec::with_capacity(k + 2);
    knots.push(0.0);
    knots.extend_from_slice(h.arrivals());
    knots.push(h.horizon());

    let pre = |i| model.rate(Regime::Before, i);
    let post = |i| model.rate(Regime::After, i);
    // pieces wholly before / after the change point
    let pre_cost: Vec<f64> = (0..=k).map(|i| pre(i) * (knots[i + 1] - knots[i])).collect();
    let post_cost: Vec<f64> = (0..=k).map(|i| post(i) * (knots[i + 1] - knots[i])).collect();

    (0..=k)
        .map(|i| {
            // arrivals 1..=i happen before u, i+1..=k at or after it
            let ln_arrivals: f64 = (1..=k)
                .map(|j| if j <= i { pre(j - 1).ln() } else { post(j - 1).ln() })
                .sum();
            let before: f64 = pre_cost[..i].iter().sum();
            let after: f64 = post_cost[i + 1..].iter().sum();
            LinearSegment {
                lo: knots[i],
                hi: knots[i + 1],
                offset: ln_arrivals - before - after + pre(i) * knots[i] - post(i) * knots[i + 1],
                slope: post(i) - pre(i),
            }
        })
        .collect()
}

/// The two unnormalised posterior masses, in log form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorTerms {
    /// `ln ∫₀ᵗ L(h|u) dG(u)`: mass of `{U ≤ t}`.
    pub ln_after: f64,
    /// `ln Ḡ(t)·L(h|∞)`: mass of `{U > t}`.
    pub ln_before: f64,
}

impl PosteriorTerms {
    pub fn ln_total(&self) -> f64 {
        log_sum_exp([self.ln_after, self.ln_before])
    }

    pub fn prob_before(&self) -> f64 {
        (self.ln_before - self.ln_total()).exp()
    }

    pub fn prob_after(&self) -> f64 {
        (self.ln_after - self.ln_total()).exp()
    }
}

pub fn posterior_terms(model: &ContinuousModel, h: &History) -> Result<PosteriorTerms> {
    let t = h.horizon();
    let ln_l0 = log_likelihood_with_cuts(model, h, f64::INFINITY, &[]);
    let ln_before = model.law.ln_survival(t) + ln_l0;

    let segments = linear_segments(model, h);
    let ln_after = match &model.law {
        ContinuousLaw::Exponential { rate } => log_sum_exp(segments.iter().map(|s| {
            rate.ln() + s.offset + ln_integral_exp_linear(s.slope - rate, s.lo, s.hi)
        })),
        ContinuousLaw::PointMass { at } => {
            if *at <= t {
                log_likelihood_with_cuts(model, h, *at, &[])
            } else {
                f64::NEG_INFINITY
            }
        }
        ContinuousLaw::Table { knots } => {
            let mut terms = Vec::new();
            for s in &segments {
                for (a, b, dens) in knots.pieces() {
                    let lo = s.lo.max(a);
                    let hi = s.hi.min(b);
                    if hi > lo {
                        terms.push(dens.ln() + s.offset + ln_integral_exp_linear(s.slope, lo, hi));
                    }
                }
            }
            log_sum_exp(terms)
        }
        ContinuousLaw::Weibull { .. } => {
            let law = &model.law;
            let mut terms = Vec::with_capacity(segments.len());
            for s in &segments {
                let q_hi = law.survival(s.lo);
                let q_lo = law.survival(s.hi);
                if q_hi <= q_lo {
                    continue;
                }
                let shift = s.offset + s.slope * if s.slope >= 0.0 { s.hi } else { s.lo };
                let f = |q: f64| {
                    let u = law.inverse_survival(q).clamp(s.lo, s.hi);
                    (s.offset + s.slope * u - shift).exp()
                };
                let r = integrate_adaptive(f, q_lo, q_hi, QUADRATURE_REL_TOL);
                if r.value > 0.0 {
                    terms.push(shift + r.value.ln());
                }
            }
            log_sum_exp(terms)
        }
    };
    if ln_after == f64::NEG_INFINITY && ln_before == f64::NEG_INFINITY
        || ln_after.is_nan()
        || ln_before.is_nan()
    {
        return Err(CpbError::DegenerateModel(
            "history has zero likelihood under the model".into(),
        ));
    }
    Ok(PosteriorTerms { ln_after, ln_before })
}

/// `P(U > t | h_t)`.
pub fn posterior_survival(model: &ContinuousModel, h: &History) -> Result<f64> {
    Ok(posterior_terms(model, h)?.prob_before())
}

/// Posterior masses and `μ_t(h_t) = λ₁(k)·P(U ≤ t | h_t) + λ₀(k)·P(U > t | h_t)`.
pub fn intensity(model: &ContinuousModel, h: &History) -> Result<PosteriorResult> {
    let s = posterior_survival(model, h)?;
    let k = h.count();
    Ok(PosteriorResult::mix(
        s,
        model.rate(Regime::Before, k),
        model.rate(Regime::After, k),
    ))
}

/// Where to stop a simulation: at the horizon (may be infinite for
/// finite-capacity schedules) or after a number of arrivals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationLimit {
    pub horizon: f64,
    pub max_arrivals: Option<usize>,
}

impl SimulationLimit {
    pub fn horizon(horizon: f64) -> Self {
        Self {
            horizon,
            max_arrivals: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub change_time: f64,
    pub arrival_times: Vec<f64>,
    /// End of the observation window (infinite when stopped by arrivals only).
    pub horizon: f64,
    pub seed: u64,
}

impl PathSample {
    /// Interarrival times `A_k = T_k − T_{k−1}`.
    pub fn interarrivals(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.arrival_times
            .iter()
            .map(|&t| {
                let a = t - prev;
                prev = t;
                a
            })
            .collect()
    }

    /// The history observed on `[0, t]`.
    pub fn history(&self, t: f64) -> Result<History> {
        History::new(t, self.arrival_times.iter().copied().filter(|&a| a <= t).collect())
    }
}

pub fn sample_path(model: &ContinuousModel, limit: SimulationLimit, seed: u64) -> Result<PathSample> {
    if !(limit.horizon > 0.0) {
        return Err(CpbError::InvalidParameter("simulation horizon must be positive".into()));
    }
    if limit.horizon.is_infinite()
        && limit.max_arrivals.is_none()
        && model.rates.tail() == TailMode::RepeatLast
    {
        return Err(CpbError::Precondition(
            "an infinite-arrival schedule needs a finite horizon or an arrival cap".into(),
        ));
    }
    let mut rng = seeded_rng(seed);
    Ok(sample_path_with(model, limit, &mut rng, seed))
}

pub(crate) fn sample_path_with<R: Rng + ?Sized>(
    model: &ContinuousModel,
    limit: SimulationLimit,
    rng: &mut R,
    seed: u64,
) -> PathSample {
    let change = model.law.sample(rng);
    let cap = limit.max_arrivals.unwrap_or(usize::MAX);
    let mut arrivals = Vec::new();
    let mut now = 0.0;
    while arrivals.len() < cap {
        let k = arrivals.len();
        let e: f64 = Exp1.sample(rng);
        let before = model.rate(Regime::Before, k);
        let after = model.rate(Regime::After, k);
        // hazard is `before` on [now, change), `after` from change on
        let next = if now < change {
            let budget = before * (change - now);
            if e < budget {
                now + e / before
            } else {
                change + (e - budget) / after
            }
        } else {
            now + e / after
        };
        if !next.is_finite() || next > limit.horizon {
            break;
        }
        arrivals.push(next);
        now = next;
    }
    PathSample {
        change_time: change,
        arrival_times: arrivals,
        horizon: limit.horizon,
        seed,
    }
}

/// Discrete-time model on the grid of step `1/m`: rates `λ_i(k)/m` and the grid
/// law of `U`.
pub fn discretize(model: &ContinuousModel, m: u32) -> Result<DiscreteModel> {
    if m == 0 {
        return Err(CpbError::InvalidParameter("m must be positive".into()));
    }
    let mf = m as f64;
    let max = model.rates.max_rate();
    if max / mf >= 1.0 {
        return Err(CpbError::RateOverflow { m, rate: max });
    }
    let rates = model
        .rates
        .map_indexed(model.rates.len(), RateUnits::PerSlot, |_, a, b| (a / mf, b / mf))?;
    DiscreteModel::new(
        rates,
        DiscreteHazard::Discretized {
            law: model.law.clone(),
            m,
        },
    )
}

fn grid_floor(x: f64, m: u32) -> usize {
    // absorb representation error such as 0.29 * 100 = 28.999999999999996
    (x * m as f64 * (1.0 + 1e-12)).floor() as usize
}

/// Snaps a history to the grid `{1/m, 2/m, …}` by flooring each time; `None`
/// when two arrivals collapse into one slot or an arrival lands in slot 0.
pub fn snap_history(h: &History, m: u32) -> Option<DiscreteHistory> {
    let n = grid_floor(h.horizon(), m);
    let slots: Vec<usize> = h.arrivals().iter().map(|&a| grid_floor(a, m)).collect();
    DiscreteHistory::new(n, slots).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub m: u32,
    pub discrete: Option<f64>,
    pub continuous: f64,
    pub error: Option<f64>,
    /// Why the row is inadmissible, if it is.
    pub note: Option<String>,
}

pub fn convergence_study(model: &ContinuousModel, h: &History, m_list: &[u32]) -> Result<Vec<ConvergenceRow>> {
    let continuous = posterior_survival(model, h)?;
    m_list
        .iter()
        .map(|&m| {
            let inadmissible = |note: String| ConvergenceRow {
                m,
                discrete: None,
                continuous,
                error: None,
                note: Some(note),
            };
            let dm = match discretize(model, m) {
                Ok(dm) => dm,
                Err(e @ CpbError::RateOverflow { .. }) => return Ok(inadmissible(e.to_string())),
                Err(e) => return Err(e),
            };
            let Some(dh) = snap_history(h, m) else {
                return Ok(inadmissible(format!("history collapses on the 1/{m} grid")));
            };
            let d = discrete::posterior_survival(&dm, &dh)?;
            Ok(ConvergenceRow {
                m,
                discrete: Some(d),
                continuous,
                error: Some((d - continuous).abs()),
                note: None,
            })
        })
        .collect()
}
