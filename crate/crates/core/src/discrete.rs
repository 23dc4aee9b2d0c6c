//! Exact discrete-time engine.
//!
//! Slots are numbered `1, 2, …`. Given `Ū = j`, slot `r` is post-change iff
//! `r > j`, and an arrival happens in slot `r` with probability
//! `λ̄_{1(r>j)}(c)` where `c` counts arrivals in earlier slots. The joint
//! weight `g_j = P(Ū = j, history)` therefore factorises slot by slot, and the
//! infinite sum over `j > n` collapses to `P(Ū > n)·L₀(h)` because every slot
//! up to `n` is pre-change for those `j`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CpbError, Result};
use crate::history::{shift_operator, DiscreteHistory};
use crate::law::DiscreteHazard;
use crate::numeric::{log_sum_exp, seeded_rng};
use crate::posterior::PosteriorResult;
use crate::rates::{RateSchedule, RateUnits, Regime};

/// Largest horizon accepted by the enumeration oracle.
pub const ORACLE_MAX_SLOTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModel {
    rates: RateSchedule,
    hazard: DiscreteHazard,
}

impl DiscreteModel {
    pub fn new(rates: RateSchedule, hazard: DiscreteHazard) -> Result<Self> {
        if rates.units() != RateUnits::PerSlot {
            return Err(CpbError::InvalidSchedule(
                "discrete model needs per-slot probabilities".into(),
            ));
        }
        if let DiscreteHazard::Discretized { law, m } = &hazard {
            law.validate()?;
            if *m == 0 {
                return Err(CpbError::InvalidParameter("grid resolution m must be positive".into()));
            }
        }
        Ok(Self { rates, hazard })
    }

    pub fn rates(&self) -> &RateSchedule {
        &self.rates
    }

    pub fn hazard(&self) -> &DiscreteHazard {
        &self.hazard
    }

    fn rate(&self, regime: Regime, k: usize) -> f64 {
        self.rates.rate(regime, k)
    }
}

/// Per-slot log factors of a history under each regime.
struct SlotLogs {
    /// `pre_prefix[j] = Σ_{r ≤ j}` log factor with pre-change rates.
    pre_prefix: Vec<f64>,
    /// `post_suffix[j] = Σ_{j < r ≤ n}` log factor with post-change rates.
    post_suffix: Vec<f64>,
}

fn ln_factor(rate: f64, arrival: bool) -> f64 {
    if arrival {
        rate.ln()
    } else {
        (-rate).ln_1p()
    }
}

fn slot_logs(model: &DiscreteModel, h: &DiscreteHistory) -> SlotLogs {
    let n = h.horizon();
    let mut pre = Vec::with_capacity(n);
    let mut post = Vec::with_capacity(n);
    let mut next = h.arrivals().iter().peekable();
    let mut count = 0;
    for r in 1..=n {
        let arrival = next.peek() == Some(&&r);
        pre.push(ln_factor(model.rate(Regime::Before, count), arrival));
        post.push(ln_factor(model.rate(Regime::After, count), arrival));
        if arrival {
            next.next();
            count += 1;
        }
    }
    let mut pre_prefix = vec![0.0; n + 1];
    for r in 1..=n {
        pre_prefix[r] = pre_prefix[r - 1] + pre[r - 1];
    }
    let mut post_suffix = vec![0.0; n + 1];
    for j in (0..n).rev() {
        post_suffix[j] = post_suffix[j + 1] + post[j];
    }
    SlotLogs {
        pre_prefix,
        post_suffix,
    }
}

/// Log joint weights: `ln g_j` for `j = 1..=n` and the tail `ln Σ_{j>n} g_j`.
struct LnWeights {
    finite: Vec<f64>,
    tail: f64,
}

fn ln_weights(model: &DiscreteModel, h: &DiscreteHistory) -> LnWeights {
    let n = h.horizon();
    let logs = slot_logs(model, h);
    let pmf = model.hazard.ln_pmf_upto(n);
    let finite = (1..=n)
        .map(|j| pmf[j - 1] + logs.pre_prefix[j] + logs.post_suffix[j])
        .collect();
    let tail = model.hazard.ln_survival(n as u64) + logs.pre_prefix[n];
    LnWeights { finite, tail }
}

/// `g_j = P(Ū = j, T̄₁ = n₁, …, T̄_k = n_k, T̄_{k+1} > n)`.
pub fn joint_weight(model: &DiscreteModel, h: &DiscreteHistory, j: u64) -> Result<f64> {
    if j == 0 {
        return Err(CpbError::InvalidParameter("change slot j starts at 1".into()));
    }
    let n = h.horizon();
    let logs = slot_logs(model, h);
    let ln_pmf = model.hazard.ln_pmf(j);
    let ln_slots = match usize::try_from(j) {
        Ok(j) if j <= n => logs.pre_prefix[j] + logs.post_suffix[j],
        _ => logs.pre_prefix[n],
    };
    Ok((ln_pmf + ln_slots).exp())
}

/// `P(Ū > n | h̄_n)`.
pub fn posterior_survival(model: &DiscreteModel, h: &DiscreteHistory) -> Result<f64> {
    let w = ln_weights(model, h);
    let ln_total = log_sum_exp(w.finite.iter().copied().chain(std::iter::once(w.tail)));
    if ln_total == f64::NEG_INFINITY || ln_total.is_nan() {
        return Err(CpbError::DegenerateModel(
            "history has zero probability under the model".into(),
        ));
    }
    Ok((w.tail - ln_total).exp().clamp(0.0, 1.0))
}

pub fn posterior(model: &DiscreteModel, h: &DiscreteHistory) -> Result<PosteriorResult> {
    let s = posterior_survival(model, h)?;
    let k = h.count();
    Ok(PosteriorResult::mix(
        s,
        model.rate(Regime::Before, k),
        model.rate(Regime::After, k),
    ))
}

/// `μ̄_n(h̄_n) = P(T̄_{k+1} = n + 1 | h̄_n)`.
pub fn step_intensity(model: &DiscreteModel, h: &DiscreteHistory) -> Result<f64> {
    Ok(posterior(model, h)?.intensity)
}

/// Factors by which the partial weight sums change under the shift `Φ_l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRatios {
    /// Multiplier of the sum over `j < n_l`.
    pub alpha: f64,
    /// Multiplier of the sums over `n_l < j ≤ n` and `j > n`.
    pub gamma: f64,
    /// Multiplier of `g_{n_l}`.
    pub delta: f64,
}

pub fn shift_ratios(model: &DiscreteModel, l: usize) -> Result<ShiftRatios> {
    if l == 0 {
        return Err(CpbError::InvalidParameter("shift index starts at 1".into()));
    }
    let pre = |k| model.rate(Regime::Before, k);
    let post = |k| model.rate(Regime::After, k);
    Ok(ShiftRatios {
        alpha: (1.0 - post(l - 1)) / (1.0 - post(l)),
        gamma: (1.0 - pre(l - 1)) / (1.0 - pre(l)),
        delta: (1.0 - pre(l - 1)) * post(l - 1) / (pre(l - 1) * (1.0 - post(l))),
    })
}

/// Log partial sums of the joint weights split around a pivot slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialSums {
    /// `ln Σ_{j < pivot} g_j` (−∞ when empty).
    pub ln_a: f64,
    /// `ln Σ_{pivot < j ≤ n} g_j`.
    pub ln_b: f64,
    /// `ln Σ_{j > n} g_j`.
    pub ln_c: f64,
    /// `ln g_pivot`.
    pub ln_g: f64,
}

impl PartialSums {
    pub fn posterior_survival(&self) -> f64 {
        (self.ln_c - log_sum_exp([self.ln_a, self.ln_b, self.ln_c, self.ln_g])).exp()
    }
}

pub fn partial_sums(model: &DiscreteModel, h: &DiscreteHistory, pivot: usize) -> Result<PartialSums> {
    let n = h.horizon();
    if pivot == 0 || pivot > n {
        return Err(CpbError::IndexOutOfRange { index: pivot, len: n });
    }
    let w = ln_weights(model, h);
    Ok(PartialSums {
        ln_a: log_sum_exp(w.finite[..pivot - 1].iter().copied()),
        ln_b: log_sum_exp(w.finite[pivot..].iter().copied()),
        ln_c: w.tail,
        ln_g: w.finite[pivot - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftIdentityReport {
    pub shift_index: usize,
    pub expected: ShiftRatios,
    /// `Â/A`; absent when `n_l = 1` leaves no `j < n_l`.
    pub alpha: Option<f64>,
    /// `B̂/B`.
    pub gamma_b: f64,
    /// `Ĉ/C`.
    pub gamma_c: f64,
    /// `ĝ/g`.
    pub delta: f64,
    pub max_rel_error: f64,
    pub posterior_before_shift: f64,
    pub posterior_after_shift: f64,
    pub holds: bool,
}

pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Measures how `A`, `B`, `C` and `g_{n_l}` change under `Φ_l` and compares the
/// ratios with [`shift_ratios`].
pub fn verify_shift_identities(
    model: &DiscreteModel,
    h: &DiscreteHistory,
    l: usize,
) -> Result<ShiftIdentityReport> {
    if !h.can_shift(l)? {
        return Err(CpbError::Precondition(format!(
            "shift Φ_{l} leaves the history unchanged"
        )));
    }
    let pivot = h.arrivals()[l - 1];
    let shifted = shift_operator(h, l)?;
    let before = partial_sums(model, h, pivot)?;
    let after = partial_sums(model, &shifted, pivot)?;
    let expected = shift_ratios(model, l)?;

    let ratio = |hat: f64, base: f64| (hat - base).exp();
    let alpha = (before.ln_a > f64::NEG_INFINITY).then(|| ratio(after.ln_a, before.ln_a));
    let gamma_b = ratio(after.ln_b, before.ln_b);
    let gamma_c = ratio(after.ln_c, before.ln_c);
    let delta = ratio(after.ln_g, before.ln_g);

    let rel = |got: f64, want: f64| ((got - want) / want).abs();
    let mut max_rel_error = rel(gamma_b, expected.gamma)
        .max(rel(gamma_c, expected.gamma))
        .max(rel(delta, expected.delta));
    if let Some(a) = alpha {
        max_rel_error = max_rel_error.max(rel(a, expected.alpha));
    }
    Ok(ShiftIdentityReport {
        shift_index: l,
        expected,
        alpha,
        gamma_b,
        gamma_c,
        delta,
        max_rel_error,
        posterior_before_shift: before.posterior_survival(),
        posterior_after_shift: after.posterior_survival(),
        holds: max_rel_error <= IDENTITY_TOLERANCE,
    })
}

/// Probability masses accumulated by exhaustive enumeration.
struct Enumeration {
    /// Mass of the observed pattern with the change at or before the horizon.
    matched_after: f64,
    /// Mass of the observed pattern with the change after the horizon.
    matched_before: f64,
    /// Same two masses restricted to an arrival in the extra look-ahead slot.
    next_after: f64,
    next_before: f64,
    total: f64,
}

/// Walks every change bucket `Ū ∈ {1, …, n} ∪ {> n}` and every arrival pattern
/// over `slots` slots, multiplying per-slot probabilities.
fn enumerate(model: &DiscreteModel, h: &DiscreteHistory, slots: usize) -> Enumeration {
    let n = h.horizon();
    let observed: u32 = h.arrivals().iter().map(|&r| 1u32 << (r - 1)).sum();
    let observed_mask = (1u32 << n) - 1;

    // priors by running the hazard forward
    let mut priors = Vec::with_capacity(n + 1);
    let mut survive = 1.0;
    for j in 1..=n as u64 {
        let nu = model.hazard.hazard(j);
        priors.push(survive * nu);
        survive *= 1.0 - nu;
    }
    priors.push(survive);

    let mut out = Enumeration {
        matched_after: 0.0,
        matched_before: 0.0,
        next_after: 0.0,
        next_before: 0.0,
        total: 0.0,
    };
    for (bucket, &prior) in priors.iter().enumerate() {
        // bucket n means Ū > n: every slot up to n+1 is pre-change
        let change = bucket + 1;
        let after_horizon = bucket == n;
        for pattern in 0u32..(1u32 << slots) {
            let mut p = prior;
            let mut count = 0;
            for r in 1..=slots {
                let regime = if !after_horizon && r > change {
                    Regime::After
                } else {
                    Regime::Before
                };
                let rate = model.rate(regime, count);
                if pattern & (1 << (r - 1)) != 0 {
                    p *= rate;
                    count += 1;
                } else {
                    p *= 1.0 - rate;
                }
            }
            out.total += p;
            if pattern & observed_mask == observed {
                let lookahead = slots > n && pattern & (1 << n) != 0;
                if after_horizon {
                    out.matched_before += p;
                    if lookahead {
                        out.next_before += p;
                    }
                } else {
                    out.matched_after += p;
                    if lookahead {
                        out.next_after += p;
                    }
                }
            }
        }
    }
    out
}

fn check_capacity(h: &DiscreteHistory) -> Result<()> {
    if h.horizon() > ORACLE_MAX_SLOTS {
        return Err(CpbError::Capacity {
            n: h.horizon(),
            max: ORACLE_MAX_SLOTS,
        });
    }
    Ok(())
}

/// `P(Ū > n | h̄_n)` by exhaustive enumeration; independent of the
/// factorised weights used by [`posterior_survival`].
pub fn brute_force_posterior(model: &DiscreteModel, h: &DiscreteHistory) -> Result<f64> {
    check_capacity(h)?;
    let e = enumerate(model, h, h.horizon());
    debug_assert!((e.total - 1.0).abs() < 1e-9, "enumerated mass {}", e.total);
    let matched = e.matched_after + e.matched_before;
    if matched <= 0.0 {
        return Err(CpbError::DegenerateModel("history has zero probability".into()));
    }
    Ok(e.matched_before / matched)
}

/// `P(arrival in slot n + 1 | h̄_n)` by enumerating one extra slot.
pub fn brute_force_step_intensity(model: &DiscreteModel, h: &DiscreteHistory) -> Result<f64> {
    check_capacity(h)?;
    let e = enumerate(model, h, h.horizon() + 1);
    let matched = e.matched_after + e.matched_before;
    if matched <= 0.0 {
        return Err(CpbError::DegenerateModel("history has zero probability".into()));
    }
    Ok((e.next_after + e.next_before) / matched)
}

/// One simulated discrete path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePath {
    pub change_slot: u64,
    pub arrival_slots: Vec<usize>,
    pub seed: u64,
}

impl DiscretePath {
    pub fn history(&self, horizon: usize) -> Result<DiscreteHistory> {
        DiscreteHistory::new(
            horizon,
            self.arrival_slots.iter().copied().filter(|&r| r <= horizon).collect(),
        )
    }
}

pub fn sample_discrete_path(model: &DiscreteModel, horizon: usize, seed: u64) -> DiscretePath {
    let mut rng = seeded_rng(seed);
    sample_discrete_path_with(model, horizon, &mut rng, seed)
}

pub(crate) fn sample_discrete_path_with<R: Rng + ?Sized>(
    model: &DiscreteModel,
    horizon: usize,
    rng: &mut R,
    seed: u64,
) -> DiscretePath {
    let change_slot = model.hazard.sample(rng);
    let mut arrival_slots = Vec::new();
    for r in 1..=horizon {
        let regime = if r as u64 > change_slot {
            Regime::After
        } else {
            Regime::Before
        };
        let rate = model.rate(regime, arrival_slots.len());
        if rng.random::<f64>() < rate {
            arrival_slots.push(r);
        }
    }
    DiscretePath {
        change_slot,
        arrival_slots,
        seed,
    }
}
