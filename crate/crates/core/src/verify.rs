//! Randomised checks of the monotonicity results and the supporting lemmas.
//!
//! Every instance draws from its own stream `(seed, index)`, so reports do not
//! depend on thread scheduling.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuous::{self, ContinuousModel, ConvergenceRow, SimulationLimit};
use crate::discrete::{self, DiscreteModel, ShiftIdentityReport, IDENTITY_TOLERANCE};
use crate::error::{CpbError, Result};
use crate::history::{shift_operator, DiscreteHistory, Dominance, History};
use crate::law::{ContinuousLaw, DiscreteHazard, HazardSequence};
use crate::numeric::{derive_seed, instance_rng};
use crate::posterior::PosteriorResult;
use crate::rates::{default_bound, ser_ratio, validate_rates, RateSchedule, RateUnits, Regime, TailMode};
use crate::timescale::{
    default_regularizer, regularized_conditions, transform_history, transform_model_constant,
    transform_path, transform_rates, TimeScale,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Discrete,
    DiscreteOracle,
    Continuous,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Discrete => "discrete",
            Engine::DiscreteOracle => "oracle",
            Engine::Continuous => "continuous",
        }
    }

    fn is_discrete(self) -> bool {
        self != Engine::Continuous
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "kebab-case")]
pub enum Model {
    Continuous(ContinuousModel),
    Discrete(DiscreteModel),
}

impl Model {
    pub fn rates(&self) -> &RateSchedule {
        match self {
            Model::Continuous(m) => m.rates(),
            Model::Discrete(m) => m.rates(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observed {
    Continuous(History),
    Discrete(DiscreteHistory),
}

impl Observed {
    pub fn count(&self) -> usize {
        match self {
            Observed::Continuous(h) => h.count(),
            Observed::Discrete(h) => h.count(),
        }
    }
}

/// Posterior and intensity of `h` under `model` with the chosen engine.
pub fn evaluate(model: &Model, h: &Observed, engine: Engine) -> Result<PosteriorResult> {
    match (model, h, engine) {
        (Model::Continuous(m), Observed::Continuous(h), Engine::Continuous) => continuous::intensity(m, h),
        (Model::Discrete(m), Observed::Discrete(h), Engine::Discrete) => discrete::posterior(m, h),
        (Model::Discrete(m), Observed::Discrete(h), Engine::DiscreteOracle) => {
            let s = discrete::brute_force_posterior(m, h)?;
            let k = h.count();
            Ok(PosteriorResult::mix(s, m.rates().pre(k), m.rates().post(k)))
        }
        _ => Err(CpbError::InvalidParameter(format!(
            "engine {} does not match the model and history",
            engine.name()
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    PosteriorSurvival,
    Intensity,
}

/// How the second history's value compares with the first's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Less,
    Equal,
    Greater,
}

fn relation(first: f64, second: f64) -> Relation {
    if second < first {
        Relation::Less
    } else if second > first {
        Relation::Greater
    } else {
        Relation::Equal
    }
}

/// A self-contained record of two evaluated histories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub model: Model,
    pub engine: Engine,
    pub quantity: Quantity,
    pub first: Observed,
    pub second: Observed,
    pub first_value: PosteriorResult,
    pub second_value: PosteriorResult,
    pub relation: Relation,
    pub note: String,
}

impl Witness {
    fn new(model: Model, engine: Engine, quantity: Quantity, first: Observed, second: Observed, note: String) -> Result<Self> {
        let first_value = evaluate(&model, &first, engine)?;
        let second_value = evaluate(&model, &second, engine)?;
        let pick = |r: &PosteriorResult| match quantity {
            Quantity::PosteriorSurvival => r.prob_before,
            Quantity::Intensity => r.intensity,
        };
        Ok(Self {
            relation: relation(pick(&first_value), pick(&second_value)),
            model,
            engine,
            quantity,
            first,
            second,
            first_value,
            second_value,
            note,
        })
    }

    pub fn reevaluate(&self) -> Result<(PosteriorResult, PosteriorResult)> {
        Ok((
            evaluate(&self.model, &self.first, self.engine)?,
            evaluate(&self.model, &self.second, self.engine)?,
        ))
    }

    /// Whether re-evaluation reproduces the stored values within `tol`.
    pub fn reproduces(&self, tol: f64) -> Result<bool> {
        let (a, b) = self.reevaluate()?;
        let close = |x: &PosteriorResult, y: &PosteriorResult| {
            (x.prob_before - y.prob_before).abs() <= tol && (x.intensity - y.intensity).abs() <= tol
        };
        Ok(close(&a, &self.first_value) && close(&b, &self.second_value))
    }

    /// `second − first` on the witnessed quantity.
    pub fn gap(&self) -> f64 {
        match self.quantity {
            Quantity::PosteriorSurvival => self.second_value.prob_before - self.first_value.prob_before,
            Quantity::Intensity => self.second_value.intensity - self.first_value.intensity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub engine: Engine,
    /// Comparable pairs to draw.
    pub pairs: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_arrivals: usize,
    /// Largest discrete horizon `n`.
    pub max_slots: usize,
    /// Range of continuous horizons `t`.
    pub horizon: (f64, f64),
    /// Largest listed schedule length when sampling models.
    pub max_listed: usize,
    /// Sample continuous schedules whose differences `λ₁(k) − λ₀(k)` never
    /// decrease. Without it, only `λ₁(k) ≥ λ₀(k)` is imposed and reversals occur.
    pub monotone_gaps: bool,
    /// Fixed model; sampled per instance when absent.
    pub model: Option<Model>,
}

impl SweepConfig {
    pub fn new(engine: Engine, pairs: usize, seed: u64) -> Self {
        let discrete = engine.is_discrete();
        Self {
            engine,
            pairs,
            seed,
            tolerance: if discrete { 1e-12 } else { 1e-9 },
            max_arrivals: if discrete { 5 } else { 4 },
            max_slots: 12,
            horizon: (0.5, 5.0),
            max_listed: 4,
            monotone_gaps: true,
            model: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(CpbError::InvalidParameter("pair count must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(CpbError::InvalidParameter("tolerance must be positive".into()));
        }
        if self.max_slots == 0 || self.max_listed == 0 {
            return Err(CpbError::InvalidParameter("slot and schedule bounds must be at least 1".into()));
        }
        let (lo, hi) = self.horizon;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(CpbError::InvalidParameter(format!("bad horizon range ({lo}, {hi})")));
        }
        if self.engine == Engine::DiscreteOracle && self.max_slots > discrete::ORACLE_MAX_SLOTS {
            return Err(CpbError::Capacity {
                n: self.max_slots,
                max: discrete::ORACLE_MAX_SLOTS,
            });
        }
        match (&self.model, self.engine.is_discrete()) {
            (None, _) => Ok(()),
            (Some(Model::Discrete(m)), true) => {
                let rep = validate_rates(m.rates(), default_bound(m.rates()))?;
                if rep.plo == Some(true) && rep.ser == Some(true) {
                    Ok(())
                } else {
                    Err(CpbError::Precondition(
                        "discrete sweep needs strict dominance and the ratio condition".into(),
                    ))
                }
            }
            (Some(Model::Continuous(m)), false) => {
                if validate_rates(m.rates(), default_bound(m.rates()))?.assu_broad {
                    Ok(())
                } else {
                    Err(CpbError::Precondition("continuous sweep needs λ₁(k) ≥ λ₀(k)".into()))
                }
            }
            _ => Err(CpbError::InvalidParameter(format!(
                "engine {} does not match the model",
                self.engine.name()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub engine: Engine,
    pub pairs: usize,
    /// Pairs where no shift was possible, so both histories coincide.
    pub equal_pairs: usize,
    pub violations: Vec<Witness>,
    /// Extremes of `P(U>t|h′) − P(U>t|h″)`.
    pub min_margin: f64,
    pub max_margin: f64,
    /// Smallest `μ(h″) − μ(h′)`.
    pub min_intensity_margin: f64,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

struct PairOutcome {
    equal: bool,
    margin: f64,
    intensity_margin: f64,
    violation: Option<Witness>,
}

/// Draws pairs `h″ ⊵ h′` and checks `P(U>t|h″) ≤ P(U>t|h′)` and
/// `μ(h″) ≥ μ(h′)` up to the tolerance.
pub fn theorem1_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let outcomes: Vec<PairOutcome> = (0..cfg.pairs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(cfg.seed, i);
            let model = match &cfg.model {
                Some(m) => m.clone(),
                None if cfg.engine.is_discrete() => {
                    Model::Discrete(sample_discrete_model(&mut rng, cfg.max_listed))
                }
                None if cfg.monotone_gaps => {
                    Model::Continuous(sample_monotone_gap_model(&mut rng, cfg.max_listed))
                }
                None => Model::Continuous(sample_continuous_model(&mut rng, cfg.max_listed, false)),
            };
            let (first, second) = match &model {
                Model::Discrete(m) => {
                    let (a, b) = sample_discrete_pair(&mut rng, cfg, m)?;
                    (Observed::Discrete(a), Observed::Discrete(b))
                }
                Model::Continuous(m) => {
                    let (a, b) = sample_continuous_pair(&mut rng, cfg, m);
                    (Observed::Continuous(a), Observed::Continuous(b))
                }
            };
            check_pair(model, first, second, cfg)
        })
        .collect::<Result<_>>()?;

    let mut report = SweepReport {
        engine: cfg.engine,
        pairs: cfg.pairs,
        equal_pairs: 0,
        violations: Vec::new(),
        min_margin: f64::INFINITY,
        max_margin: f64::NEG_INFINITY,
        min_intensity_margin: f64::INFINITY,
    };
    for o in outcomes {
        report.equal_pairs += o.equal as usize;
        report.min_margin = report.min_margin.min(o.margin);
        report.max_margin = report.max_margin.max(o.margin);
        report.min_intensity_margin = report.min_intensity_margin.min(o.intensity_margin);
        report.violations.extend(o.violation);
    }
    Ok(report)
}

fn check_pair(model: Model, first: Observed, second: Observed, cfg: &SweepConfig) -> Result<PairOutcome> {
    let a = evaluate(&model, &first, cfg.engine)?;
    let b = evaluate(&model, &second, cfg.engine)?;
    let margin = a.prob_before - b.prob_before;
    let intensity_margin = b.intensity - a.intensity;
    let scale = 1f64.max(a.intensity.abs()).max(b.intensity.abs());
    let quantity = if margin < -cfg.tolerance {
        Some(Quantity::PosteriorSurvival)
    } else if intensity_margin < -cfg.tolerance * scale {
        Some(Quantity::Intensity)
    } else {
        None
    };
    let equal = first == second;
    let violation = match quantity {
        Some(q) => Some(Witness::new(
            model,
            cfg.engine,
            q,
            first,
            second,
            "second history dominates the first".into(),
        )?),
        None => None,
    };
    Ok(PairOutcome {
        equal,
        margin,
        intensity_margin,
        violation,
    })
}

/// Per-slot schedule satisfying strict dominance and the ratio condition,
/// built forward from the lower bound the ratio condition imposes on `λ̄₁(k)`.
pub fn sample_discrete_rates<R: Rng + ?Sized>(rng: &mut R, max_listed: usize) -> RateSchedule {
    'draw: loop {
        let len = rng.random_range(1..=max_listed.max(1));
        let mut pre: Vec<f64> = Vec::with_capacity(len);
        let mut post: Vec<f64> = Vec::with_capacity(len);
        for k in 0..len {
            let p0: f64 = rng.random_range(0.02..0.6);
            let mut lower = p0 + 0.01;
            if k > 0 {
                lower = lower.max(1.0 - (1.0 - post[k - 1]) * (1.0 - p0) / (1.0 - pre[k - 1]));
            }
            if lower >= 0.97 {
                continue 'draw;
            }
            pre.push(p0);
            post.push(rng.random_range(lower..0.98));
        }
        let rates = RateSchedule::discrete(pre, post, TailMode::RepeatLast).expect("valid by construction");
        let rep = validate_rates(&rates, default_bound(&rates)).expect("bound >= 1");
        if rep.plo == Some(true) && rep.ser == Some(true) {
            return rates;
        }
    }
}

pub fn sample_hazard<R: Rng + ?Sized>(rng: &mut R) -> DiscreteHazard {
    let seq = if rng.random_bool(0.5) {
        HazardSequence::constant(rng.random_range(0.02..0.5))
    } else {
        let len = rng.random_range(1..=6);
        let values = (0..len).map(|_| rng.random_range(0.01..0.6)).collect();
        HazardSequence::new(values, rng.random_range(0.01..0.6))
    };
    DiscreteHazard::Sequence(seq.expect("values in (0, 1)"))
}

pub fn sample_discrete_model<R: Rng + ?Sized>(rng: &mut R, max_listed: usize) -> DiscreteModel {
    let rates = sample_discrete_rates(rng, max_listed);
    DiscreteModel::new(rates, sample_hazard(rng)).expect("per-slot schedule")
}

pub fn sample_law<R: Rng + ?Sized>(rng: &mut R) -> ContinuousLaw {
    let law = match rng.random_range(0..4) {
        0 => ContinuousLaw::exponential(rng.random_range(0.2..3.0)),
        1 => ContinuousLaw::weibull(rng.random_range(0.5..3.0), rng.random_range(0.5..4.0)),
        2 => {
            let n = rng.random_range(1..=3);
            let mut s = 0.0;
            let mut levels: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            levels.sort_by(f64::total_cmp);
            levels[n - 1] = 1.0;
            let knots = levels
                .into_iter()
                .map(|g| {
                    s += rng.random_range(0.2..2.0);
                    (s, g)
                })
                .collect();
            ContinuousLaw::table(knots)
        }
        _ => ContinuousLaw::point_mass(rng.random_range(0.0..6.0)),
    };
    law.expect("parameters in range")
}

/// Per-time schedule with `λ₁(k) ≥ λ₀(k)`; some indices are ties unless `strict`.
pub fn sample_continuous_rates<R: Rng + ?Sized>(rng: &mut R, max_listed: usize, strict: bool) -> RateSchedule {
    let len = rng.random_range(1..=max_listed.max(1));
    let pre: Vec<f64> = (0..len).map(|_| rng.random_range(0.1..4.0)).collect();
    let post = pre
        .iter()
        .map(|p| {
            if !strict && rng.random_bool(0.25) {
                *p
            } else {
                p + rng.random_range(0.01..4.0)
            }
        })
        .collect();
    RateSchedule::continuous(pre, post, TailMode::RepeatLast).expect("positive rates")
}

/// Per-time schedule whose differences start at `≥ 0` and never decrease;
/// ties (including `λ₁ ≡ λ₀`) occur with positive probability.
pub fn sample_monotone_gap_rates<R: Rng + ?Sized>(rng: &mut R, max_listed: usize) -> RateSchedule {
    let len = rng.random_range(1..=max_listed.max(1));
    let mut gap = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.01..3.0) };
    let mut pre = Vec::with_capacity(len);
    let mut post = Vec::with_capacity(len);
    for k in 0..len {
        if k > 0 && rng.random_bool(0.7) {
            gap += rng.random_range(0.01..3.0);
        }
        let p: f64 = rng.random_range(0.1..4.0);
        pre.push(p);
        post.push(p + gap);
    }
    RateSchedule::continuous(pre, post, TailMode::RepeatLast).expect("positive rates")
}

pub fn sample_monotone_gap_model<R: Rng + ?Sized>(rng: &mut R, max_listed: usize) -> ContinuousModel {
    let rates = sample_monotone_gap_rates(rng, max_listed);
    ContinuousModel::new(rates, sample_law(rng)).expect("per-time schedule")
}

pub fn sample_continuous_model<R: Rng + ?Sized>(rng: &mut R, max_listed: usize, strict: bool) -> ContinuousModel {
    let rates = sample_continuous_rates(rng, max_listed, strict);
    ContinuousModel::new(rates, sample_law(rng)).expect("per-time schedule")
}

fn arrival_cap(rates: &RateSchedule, max_arrivals: usize) -> usize {
    rates.capacity().map_or(max_arrivals, |c| c.min(max_arrivals))
}

/// A random history and its image under a random chain of admissible shifts.
fn sample_discrete_pair<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SweepConfig,
    model: &DiscreteModel,
) -> Result<(DiscreteHistory, DiscreteHistory)> {
    let n = rng.random_range(1..=cfg.max_slots);
    let k = rng.random_range(0..=arrival_cap(model.rates(), cfg.max_arrivals).min(n));
    let mut slots: Vec<usize> = sample_indices(rng, n, k).into_iter().map(|i| i + 1).collect();
    slots.sort_unstable();
    let first = DiscreteHistory::new(n, slots)?;
    let mut second = first.clone();
    let mut steps = 0;
    while steps < 4 * n && rng.random_bool(0.8) {
        let free: Vec<usize> = (1..=k).filter(|&i| second.can_shift(i).unwrap_or(false)).collect();
        if free.is_empty() {
            break;
        }
        second = shift_operator(&second, free[rng.random_range(0..free.len())])?;
        steps += 1;
    }
    Ok((first, second))
}

/// A random continuous history `h′` and `h″ ⊵ h′`, built from the last
/// arrival backwards so that each `t″_i ∈ [t′_i, t″_{i+1})`.
fn sample_continuous_pair<R: Rng + ?Sized>(rng: &mut R, cfg: &SweepConfig, model: &ContinuousModel) -> (History, History) {
    loop {
        let t = rng.random_range(cfg.horizon.0..=cfg.horizon.1);
        let k = rng.random_range(0..=arrival_cap(model.rates(), cfg.max_arrivals));
        let mut first: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..t)).collect();
        first.sort_by(f64::total_cmp);
        let mut second = first.clone();
        let mut next = t;
        for i in (0..k).rev() {
            if rng.random_bool(0.8) {
                second[i] = first[i] + rng.random::<f64>() * (next - first[i]);
            }
            next = second[i];
        }
        let last_ok = second.last().is_none_or(|&x| x <= t);
        if let (Ok(a), Ok(b), true) = (History::new(t, first), History::new(t, second), last_ok) {
            debug_assert!(b.dominates(&a).unwrap_or(false));
            return (a, b);
        }
    }
}

/// Outcome of the search for an added arrival lowering the intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub witness: Witness,
    pub t: f64,
    pub t1: f64,
    /// `μ_t(no arrivals) − μ_t({T₁ = t₁})`.
    pub margin: f64,
    /// Whether the comparison meets the hypotheses of the monotonicity theorem.
    pub theorem_applies: bool,
    pub evaluations: usize,
}

/// Best grid point of [`added_arrival_search`], whatever its sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AddedArrivalSearch {
    /// Largest `μ_t(no arrivals) − μ_t({T₁ = t₁})` and where it occurs.
    pub margin: f64,
    pub t: f64,
    pub t1: f64,
    /// Largest `P(U>t | {T₁ = t₁}) − P(U>t | no arrivals)`: positive when the
    /// arrival lowers the belief that the change has happened.
    pub posterior_gap: f64,
    pub evaluations: usize,
}

/// `λ₀ = (1, 1)`, `λ₁ = (2, M)` and change-point law `law`.
pub fn added_arrival_model(law: ContinuousLaw, big_m: f64) -> Result<ContinuousModel> {
    if !(big_m > 2.0 && big_m.is_finite()) {
        return Err(CpbError::Precondition(format!("M = {big_m} must exceed 2")));
    }
    ContinuousModel::new(
        RateSchedule::continuous(vec![1.0, 1.0], vec![2.0, big_m], TailMode::RepeatLast)?,
        law,
    )
}

/// Scans `t ∈ (0, 5]`, `t₁ ∈ (0, t)` on a 0.05 grid, then ×10 finer around
/// the best cell, comparing a silent history with a single arrival at `t₁`.
pub fn added_arrival_search(model: &ContinuousModel) -> Result<AddedArrivalSearch> {
    let compare = |t: f64, t1: f64| -> Result<(f64, f64)> {
        let silent = continuous::intensity(model, &History::silent(t)?)?;
        let one = continuous::intensity(model, &History::new(t, vec![t1])?)?;
        Ok((silent.intensity - one.intensity, one.prob_before - silent.prob_before))
    };
    let mut out = AddedArrivalSearch {
        margin: f64::NEG_INFINITY,
        t: 0.0,
        t1: 0.0,
        posterior_gap: f64::NEG_INFINITY,
        evaluations: 0,
    };
    let scan = |points: Vec<(f64, f64)>, out: &mut AddedArrivalSearch| -> Result<()> {
        for (t, t1) in points {
            let (m, p) = compare(t, t1)?;
            out.evaluations += 1;
            out.posterior_gap = out.posterior_gap.max(p);
            if m > out.margin {
                out.margin = m;
                out.t = t;
                out.t1 = t1;
            }
        }
        Ok(())
    };
    let coarse = 0.05;
    let points = grid(coarse, 5.0, coarse)
        .into_iter()
        .flat_map(|t| grid(coarse, t - 1e-9, coarse).into_iter().map(move |t1| (t, t1)))
        .collect();
    scan(points, &mut out)?;
    let (ct, ct1) = (out.t, out.t1);
    let fine = coarse / 10.0;
    let mut points = Vec::new();
    for i in -10..=10 {
        let t = ct + i as f64 * fine;
        if !(t > 0.0 && t <= 5.0 + 1e-9) {
            continue;
        }
        let t = t.min(5.0);
        for j in -10..=10 {
            let t1 = ct1 + j as f64 * fine;
            if t1 > 0.0 && t1 < t {
                points.push((t, t1));
            }
        }
    }
    scan(points, &mut out)?;
    Ok(out)
}

/// Witness of `μ_t({T₁ = t₁}) < μ_t(no arrivals)` under [`added_arrival_model`].
pub fn counterexample_added_arrival_with(law: ContinuousLaw, big_m: f64) -> Result<CounterexampleReport> {
    let model = added_arrival_model(law, big_m)?;
    let s = added_arrival_search(&model)?;
    if !(s.margin > 0.0) {
        return Err(CpbError::SearchFailure(format!(
            "no (t, t₁) where an arrival lowers the intensity for M = {big_m}; best margin {:.6e} at t = {}, t₁ = {}",
            s.margin, s.t, s.t1
        )));
    }
    let witness = Witness::new(
        Model::Continuous(model),
        Engine::Continuous,
        Quantity::Intensity,
        Observed::Continuous(History::silent(s.t)?),
        Observed::Continuous(History::new(s.t, vec![s.t1])?),
        "arrival counts differ (0 vs 1), so the histories are not comparable".into(),
    )?;
    let theorem_applies = witness.first.count() == witness.second.count();
    Ok(CounterexampleReport {
        witness,
        t: s.t,
        t1: s.t1,
        margin: s.margin,
        theorem_applies,
        evaluations: s.evaluations,
    })
}

/// The search with an Exponential(1) change point.
pub fn counterexample_added_arrival(big_m: f64) -> Result<CounterexampleReport> {
    counterexample_added_arrival_with(ContinuousLaw::exponential(1.0)?, big_m)
}

/// Change-point law with a decreasing hazard under which an added arrival
/// does lower the intensity.
pub fn decreasing_hazard_law() -> ContinuousLaw {
    ContinuousLaw::weibull(0.3, 1.0).expect("valid parameters")
}

/// `start, start + step, …` up to `end` inclusive, computed by multiplication.
fn grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    (0..)
        .map(|i| start + i as f64 * step)
        .take_while(|&x| x <= end + 1e-9 * step)
        .collect()
}

/// Two parameterisations with silent histories on `[0, t′]` and `[0, t″]`,
/// `t′ < t″`, whose posteriors order in opposite directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMismatch {
    /// `P(U > t′ | h′) < P(U > t″ | h″)`.
    pub longer_silence_raises: Witness,
    /// `P(U > t′ | h′) > P(U > t″ | h″)`.
    pub longer_silence_lowers: Witness,
}

pub fn interval_mismatch_examples() -> Result<IntervalMismatch> {
    let laws = [
        ContinuousLaw::weibull(0.3, 1.0)?,
        ContinuousLaw::weibull(0.5, 1.0)?,
        ContinuousLaw::table(vec![(0.1, 0.9), (10.0, 1.0)])?,
        ContinuousLaw::exponential(1.0)?,
    ];
    let pairs = [(0.1, 20.0), (1.0, 10.0), (1.0, 1.05), (1.0, 1.0)];
    let times = grid(0.1, 3.0, 0.1);

    // (gap, model, t′, t″) for each direction
    let mut raise: Option<(f64, ContinuousModel, f64, f64)> = None;
    let mut lower: Option<(f64, ContinuousModel, f64, f64)> = None;
    for law in &laws {
        for &(l0, l1) in &pairs {
            let model = ContinuousModel::new(
                RateSchedule::constant(l0, l1, RateUnits::PerTime)?,
                law.clone(),
            )?;
            let post: Vec<f64> = times
                .iter()
                .map(|&t| continuous::posterior_survival(&model, &History::silent(t)?))
                .collect::<Result<_>>()?;
            for i in 0..times.len() {
                for j in i + 1..times.len() {
                    let gap = post[j] - post[i];
                    if gap > raise.as_ref().map_or(0.0, |r| r.0) {
                        raise = Some((gap, model.clone(), times[i], times[j]));
                    }
                    if -gap > lower.as_ref().map_or(0.0, |r| r.0) {
                        lower = Some((-gap, model.clone(), times[i], times[j]));
                    }
                }
            }
        }
    }
    let to_witness = |found: Option<(f64, ContinuousModel, f64, f64)>, what: &str| -> Result<Witness> {
        let (_, model, t1, t2) =
            found.ok_or_else(|| CpbError::SearchFailure(format!("no parameterisation where {what}")))?;
        Witness::new(
            Model::Continuous(model),
            Engine::Continuous,
            Quantity::PosteriorSurvival,
            Observed::Continuous(History::silent(t1)?),
            Observed::Continuous(History::silent(t2)?),
            format!("silent histories on [0, {t1}] and [0, {t2}]; {what}"),
        )
    };
    Ok(IntervalMismatch {
        longer_silence_raises: to_witness(raise, "longer silence raises P(U > t)")?,
        longer_silence_lowers: to_witness(lower, "longer silence lowers P(U > t)")?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Remark5Outcome {
    pub theta: f64,
    pub theta_prime: f64,
    /// `α/γ ≥ 1` and `δ/γ ≥ 1`.
    pub preconditions: bool,
    /// `θ′ ≤ θ`, allowing a few ulps of rounding.
    pub holds: bool,
}

/// Compares `θ = C/(A+B+C+D)` with `θ′ = Cγ/(Aα+Bγ+Cγ+Dδ)`. In the shift
/// argument `D` is the pivot weight `g_{n_l}`.
pub fn remark5_check(a: f64, b: f64, c: f64, d: f64, alpha: f64, gamma: f64, delta: f64) -> Result<Remark5Outcome> {
    if [a, b, c, d, alpha, gamma, delta].iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(CpbError::InvalidParameter("all constants must be positive".into()));
    }
    let theta = c / (a + b + c + d);
    let theta_prime = c * gamma / (a * alpha + b * gamma + c * gamma + d * delta);
    Ok(Remark5Outcome {
        theta,
        theta_prime,
        preconditions: alpha >= gamma && delta >= gamma,
        holds: theta_prime <= theta * (1.0 + 8.0 * f64::EPSILON),
    })
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo..hi))
}

fn rng_bool<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random_bool(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Remark5SweepReport {
    pub draws: usize,
    pub failures: usize,
    /// Largest `(θ′ − θ)/θ` seen.
    pub worst_excess: f64,
}

/// Random positive constants with `α, δ ≥ γ`, some at equality.
pub fn remark5_sweep(draws: usize, seed: u64) -> Result<Remark5SweepReport> {
    const CHUNK: usize = 10_000;
    let chunks = draws.div_ceil(CHUNK);
    let parts: Vec<(usize, f64)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = instance_rng(seed, ci as u64);
            let mut failures = 0;
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..CHUNK.min(draws - ci * CHUNK) {
                let (a, b, c, d) = (
                    log_uniform(&mut rng, -3.0, 3.0),
                    log_uniform(&mut rng, -3.0, 3.0),
                    log_uniform(&mut rng, -3.0, 3.0),
                    log_uniform(&mut rng, -3.0, 3.0),
                );
                let gamma = log_uniform(&mut rng, -2.0, 2.0);
                let above = |rng: &mut _| {
                    if rng_bool(rng, 0.1) {
                        1.0
                    } else {
                        1.0 + log_uniform(rng, -3.0, 1.0)
                    }
                };
                let alpha = gamma * above(&mut rng);
                let delta = gamma * above(&mut rng);
                let o = remark5_check(a, b, c, d, alpha, gamma, delta)?;
                worst = worst.max((o.theta_prime - o.theta) / o.theta);
                failures += (!o.holds) as usize;
            }
            Ok((failures, worst))
        })
        .collect::<Result<_>>()?;
    Ok(Remark5SweepReport {
        draws,
        failures: parts.iter().map(|p| p.0).sum(),
        worst_excess: parts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySweepReport {
    pub shifts: usize,
    pub failures: Vec<ShiftIdentityReport>,
    pub max_rel_error: f64,
    /// Shifts where `α/γ < 1` or `δ/γ < 1` despite the model conditions.
    pub ratio_condition_failures: usize,
    /// Shifts that raised the posterior survival.
    pub posterior_increases: usize,
}

impl IdentitySweepReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.ratio_condition_failures == 0 && self.posterior_increases == 0
    }
}

/// Measures the shift identities on random admissible shifts of random
/// histories under models satisfying strict dominance and the ratio condition.
pub fn identity_sweep(shifts: usize, seed: u64, max_slots: usize) -> Result<IdentitySweepReport> {
    let max_slots = max_slots.max(2);
    let reports: Vec<ShiftIdentityReport> = (0..shifts as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, i);
            let model = sample_discrete_model(&mut rng, 4);
            loop {
                let n = rng.random_range(2..=max_slots);
                let k = rng.random_range(1..=n.min(5));
                let mut slots: Vec<usize> = sample_indices(&mut rng, n, k).into_iter().map(|i| i + 1).collect();
                slots.sort_unstable();
                let h = DiscreteHistory::new(n, slots)?;
                let free: Vec<usize> = (1..=k).filter(|&l| h.can_shift(l).unwrap_or(false)).collect();
                if free.is_empty() {
                    continue;
                }
                let l = free[rng.random_range(0..free.len())];
                return discrete::verify_shift_identities(&model, &h, l);
            }
        })
        .collect::<Result<_>>()?;
    let slack = 1.0 - 1e-12;
    Ok(IdentitySweepReport {
        shifts,
        max_rel_error: reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max),
        ratio_condition_failures: reports
            .iter()
            .filter(|r| r.expected.alpha / r.expected.gamma < slack || r.expected.delta / r.expected.gamma < slack)
            .count(),
        posterior_increases: reports
            .iter()
            .filter(|r| r.posterior_after_shift > r.posterior_before_shift + IDENTITY_TOLERANCE)
            .count(),
        failures: reports.into_iter().filter(|r| !r.holds).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeRow {
    pub m: u32,
    pub admissible: bool,
    pub ser: Option<bool>,
    /// Smallest ratio-condition ratio over `k = 1..=bound`.
    pub min_ratio: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CataniaBridgeReport {
    pub rows: Vec<BridgeRow>,
    /// Least listed `m` at which the discretised schedule meets the ratio condition.
    pub least_m: Option<u32>,
    pub assu_strict: bool,
    /// Strictly increasing differences over the listed indices.
    pub catania: bool,
    /// All listed differences equal: the ratio condition is then borderline.
    pub equal_differences: bool,
}

/// Discretises per-time rates at each `m` and evaluates the ratio condition.
pub fn catania_bridge_check(rates: &RateSchedule, m_list: &[u32]) -> Result<CataniaBridgeReport> {
    if rates.units() != RateUnits::PerTime {
        return Err(CpbError::InvalidSchedule("bridge check needs per-time rates".into()));
    }
    let listed = validate_rates(rates, rates.len().saturating_sub(1).max(1))?;
    let diffs: Vec<f64> = (0..rates.len()).map(|k| rates.post(k) - rates.pre(k)).collect();
    let bound = default_bound(rates);
    let rows: Vec<BridgeRow> = m_list
        .iter()
        .map(|&m| {
            let mf = m as f64;
            if m == 0 || rates.max_rate() / mf >= 1.0 {
                return Ok(BridgeRow {
                    m,
                    admissible: false,
                    ser: None,
                    min_ratio: None,
                    note: Some(format!("rate {} is not below m = {m}", rates.max_rate())),
                });
            }
            let scaled = rates.map_indexed(rates.len(), RateUnits::PerSlot, |_, a, b| (a / mf, b / mf))?;
            let rep = validate_rates(&scaled, bound)?;
            let min_ratio = (1..=bound).map(|k| ser_ratio(&scaled, k)).fold(f64::INFINITY, f64::min);
            Ok(BridgeRow {
                m,
                admissible: true,
                ser: rep.ser,
                min_ratio: Some(min_ratio),
                note: None,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CataniaBridgeReport {
        least_m: rows.iter().filter(|r| r.ser == Some(true)).map(|r| r.m).min(),
        rows,
        assu_strict: listed.assu_strict,
        catania: rates.len() == 1 || listed.catania,
        equal_differences: diffs.windows(2).all(|w| w[0] == w[1]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub n: usize,
    pub statistic: f64,
    pub critical: f64,
    pub passed: bool,
}

/// Asymptotic one-sample Kolmogorov–Smirnov critical value `√(−ln(α/2)/2)/√n`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

pub fn ks_test(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64, alpha: f64) -> KsOutcome {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let nf = n as f64;
    let statistic = samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let critical = ks_critical_value(n, alpha);
    KsOutcome {
        n,
        statistic,
        critical,
        passed: statistic <= critical,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub paths: usize,
    pub arrivals: usize,
    /// Largest `|Ã_k − γ_{k−1}A_k| / max(1, T̃_k)`.
    pub max_error: f64,
}

/// Simulates paths of random models, maps them through random clocks and
/// compares transformed interarrivals with `γ_{k−1}A_k`.
pub fn interarrival_scaling_check(paths: usize, seed: u64) -> Result<ScalingReport> {
    let per_path: Vec<(usize, f64)> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, i);
            let model = sample_continuous_model(&mut rng, 4, false);
            let scale = sample_scale(&mut rng);
            let horizon = rng.random_range(1.0..8.0);
            let path = continuous::sample_path(&model, SimulationLimit::horizon(horizon), derive_seed(seed, i))?;
            let mapped = transform_path(&scale, &path);
            let original = path.interarrivals();
            let err = mapped
                .interarrivals()
                .iter()
                .zip(&original)
                .zip(&mapped.arrival_times)
                .enumerate()
                .map(|(k, ((&ta, &a), &tt))| (ta - scale.gamma(k) * a).abs() / tt.max(1.0))
                .fold(0.0, f64::max);
            Ok((original.len(), err))
        })
        .collect::<Result<_>>()?;
    Ok(ScalingReport {
        paths,
        arrivals: per_path.iter().map(|p| p.0).sum(),
        max_error: per_path.iter().map(|p| p.1).fold(0.0, f64::max),
    })
}

fn sample_scale<R: Rng + ?Sized>(rng: &mut R) -> TimeScale {
    let len = rng.random_range(1..=5);
    TimeScale::new((0..len).map(|_| rng.random_range(0.2..5.0)).collect()).expect("positive speeds")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub instances: usize,
    pub max_diff: f64,
}

/// Posterior of a random instance against the posterior of its image under a
/// random constant clock `g(t) = γ₀t`.
pub fn constant_scale_invariance_check(instances: usize, seed: u64) -> Result<InvarianceReport> {
    let diffs: Vec<f64> = (0..instances as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, i);
            let cfg = SweepConfig::new(Engine::Continuous, 1, seed);
            let model = sample_continuous_model(&mut rng, cfg.max_listed, false);
            let (h, _) = sample_continuous_pair(&mut rng, &cfg, &model);
            let scale = TimeScale::constant(rng.random_range(0.2..5.0))?;
            let a = continuous::posterior_survival(&model, &h)?;
            let b = continuous::posterior_survival(
                &transform_model_constant(&scale, &model)?,
                &transform_history(&scale, &h)?,
            )?;
            Ok((a - b).abs())
        })
        .collect::<Result<_>>()?;
    Ok(InvarianceReport {
        instances,
        max_diff: diffs.into_iter().fold(0.0, f64::max),
    })
}

/// With the change fixed at 0 (`regime = After`) or far beyond every arrival
/// (`Before`), transformed interarrival `k` must be `Exp(λ̃_i(k−1))`. Returns
/// one KS outcome per arrival index.
pub fn degenerate_ks_check(
    rates: &RateSchedule,
    scale: &TimeScale,
    regime: Regime,
    paths: usize,
    seed: u64,
    alpha: f64,
) -> Result<Vec<KsOutcome>> {
    if rates.units() != RateUnits::PerTime {
        return Err(CpbError::InvalidSchedule("KS check needs per-time rates".into()));
    }
    let at = match regime {
        Regime::After => 0.0,
        Regime::Before => f64::MAX,
    };
    let model = ContinuousModel::new(rates.clone(), ContinuousLaw::point_mass(at)?)?;
    let arrivals = rates.capacity().unwrap_or(rates.len().max(scale.gammas().len()) + 1);
    let limit = SimulationLimit {
        horizon: f64::INFINITY,
        max_arrivals: Some(arrivals),
    };
    let gaps: Vec<Vec<f64>> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = continuous::sample_path(&model, limit, derive_seed(seed, i))?;
            Ok(transform_path(scale, &path).interarrivals())
        })
        .collect::<Result<_>>()?;
    let tilde = transform_rates(scale, rates)?;
    (0..arrivals)
        .map(|k| {
            let samples: Vec<f64> = gaps.iter().filter_map(|g| g.get(k).copied()).collect();
            if samples.len() != paths {
                return Err(CpbError::DegenerateModel(format!("paths stopped before arrival {}", k + 1)));
            }
            let rate = tilde.rate(regime, k);
            Ok(ks_test(samples, |x| -(-rate * x).exp_m1(), alpha))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerReport {
    pub instances: usize,
    pub catania_failures: usize,
}

/// Random strictly dominated schedules with the default and with random
/// strictly decreasing `c`; counts regularised schedules without increasing
/// differences.
pub fn regularized_catania_check(instances: usize, seed: u64) -> Result<RegularizerReport> {
    let failures: Vec<usize> = (0..instances as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, i);
            let rates = sample_continuous_rates(&mut rng, 6, true);
            let mut c = vec![1.0];
            for _ in 0..rng.random_range(1..=7) {
                let last = *c.last().expect("non-empty");
                c.push(last * rng.random_range(0.3..0.99));
            }
            let mut bad = 0;
            for cs in [default_regularizer(&rates), c] {
                let (_, rep) = regularized_conditions(&rates, &cs)?;
                bad += (!rep.catania) as usize;
            }
            Ok(bad)
        })
        .collect::<Result<_>>()?;
    Ok(RegularizerReport {
        instances,
        catania_failures: failures.into_iter().sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceInstance {
    pub model: ContinuousModel,
    pub history: History,
    pub rows: Vec<ConvergenceRow>,
    /// `error(m_i) / error(m_{i+1})`.
    pub ratios: Vec<f64>,
}

/// Smooth random instance whose times lie on the `1/64` grid, so that
/// snapping to any finer dyadic grid is exact.
pub fn sample_smooth_instance<R: Rng + ?Sized>(rng: &mut R) -> (ContinuousModel, History) {
    let len = rng.random_range(1..=3);
    let pre: Vec<f64> = (0..len).map(|_| rng.random_range(0.3..2.0)).collect();
    let post: Vec<f64> = pre.iter().map(|p| p + rng.random_range(0.5..3.0)).collect();
    let rates = RateSchedule::continuous(pre, post, TailMode::RepeatLast).expect("positive rates");
    let law = if rng.random_bool(0.5) {
        ContinuousLaw::exponential(rng.random_range(0.3..2.0))
    } else {
        ContinuousLaw::weibull(rng.random_range(1.5..3.0), rng.random_range(1.0..3.0))
    }
    .expect("parameters in range");
    let grid_n = rng.random_range(64..=192usize);
    let k = rng.random_range(0..=3);
    let mut slots: Vec<usize> = sample_indices(rng, grid_n - 1, k).into_iter().map(|i| i + 1).collect();
    slots.sort_unstable();
    let history = History::new(
        grid_n as f64 / 64.0,
        slots.into_iter().map(|s| s as f64 / 64.0).collect(),
    )
    .expect("distinct grid points");
    (ContinuousModel::new(rates, law).expect("per-time schedule"), history)
}

pub fn convergence_sweep(instances: usize, seed: u64, m_list: &[u32]) -> Result<Vec<ConvergenceInstance>> {
    (0..instances as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, i);
            let (model, history) = sample_smooth_instance(&mut rng);
            let rows = continuous::convergence_study(&model, &history, m_list)?;
            let ratios = rows
                .windows(2)
                .map(|w| match (w[0].error, w[1].error) {
                    (Some(a), Some(b)) => a / b,
                    _ => f64::NAN,
                })
                .collect();
            Ok(ConvergenceInstance {
                model,
                history,
                rows,
                ratios,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_sweep_small() {
        let r = theorem1_sweep(&SweepConfig::new(Engine::Discrete, 300, 1)).unwrap();
        assert!(r.passed(), "{:?}", r.violations.first());
        assert!(r.min_margin >= -1e-12 && r.min_intensity_margin >= -1e-12);
        assert!(r.max_margin > 0.0);
        assert!(r.equal_pairs < r.pairs);
    }

    #[test]
    fn oracle_and_exact_agree_on_shared_instances() {
        let mut cfg = SweepConfig::new(Engine::Discrete, 60, 5);
        cfg.max_slots = 9;
        let exact = theorem1_sweep(&cfg).unwrap();
        cfg.engine = Engine::DiscreteOracle;
        let oracle = theorem1_sweep(&cfg).unwrap();
        assert!(exact.passed() && oracle.passed());
        assert!((exact.min_margin - oracle.min_margin).abs() < 1e-12);
        assert!((exact.max_margin - oracle.max_margin).abs() < 1e-12);
        cfg.max_slots = 17;
        assert!(matches!(theorem1_sweep(&cfg), Err(CpbError::Capacity { .. })));
    }

    #[test]
    fn continuous_sweep_small() {
        let r = theorem1_sweep(&SweepConfig::new(Engine::Continuous, 200, 2)).unwrap();
        assert!(r.passed(), "{:?}", r.violations.first());
    }

    #[test]
    fn equal_rates_have_zero_margins() {
        let m = ContinuousModel::new(
            RateSchedule::constant(1.3, 1.3, RateUnits::PerTime).unwrap(),
            ContinuousLaw::exponential(0.7).unwrap(),
        )
        .unwrap();
        let mut cfg = SweepConfig::new(Engine::Continuous, 50, 3);
        cfg.model = Some(Model::Continuous(m));
        let r = theorem1_sweep(&cfg).unwrap();
        assert!(r.min_margin.abs() < 1e-15 && r.max_margin.abs() < 1e-15);
    }

    #[test]
    fn fixed_models_are_checked() {
        let m = ContinuousModel::new(
            RateSchedule::constant(2.0, 1.0, RateUnits::PerTime).unwrap(),
            ContinuousLaw::exponential(1.0).unwrap(),
        )
        .unwrap();
        let mut cfg = SweepConfig::new(Engine::Continuous, 10, 3);
        cfg.model = Some(Model::Continuous(m.clone()));
        assert!(matches!(theorem1_sweep(&cfg), Err(CpbError::Precondition(_))));
        cfg.engine = Engine::Discrete;
        assert!(matches!(theorem1_sweep(&cfg), Err(CpbError::InvalidParameter(_))));
    }

    #[test]
    fn sampled_discrete_rates_meet_conditions() {
        let mut rng = instance_rng(9, 0);
        for _ in 0..200 {
            let r = sample_discrete_rates(&mut rng, 5);
            let rep = validate_rates(&r, default_bound(&r)).unwrap();
            assert_eq!((rep.plo, rep.ser), (Some(true), Some(true)));
        }
    }

    #[test]
    fn exponential_change_point_admits_no_intensity_reversal() {
        // μ(no arrivals) = 1 + t/(1+t) while μ({T₁ = t₁}) stays near 2
        let model = added_arrival_model(ContinuousLaw::exponential(1.0).unwrap(), 100.0).unwrap();
        let s = added_arrival_search(&model).unwrap();
        assert!(s.margin < 0.0);
        assert!((s.margin + 1.0 / 6.0).abs() < 1e-3, "{s:?}");
        // the arrival still lowers the posterior probability of a change
        assert!(s.posterior_gap > 0.5);
        assert!(matches!(counterexample_added_arrival(100.0), Err(CpbError::SearchFailure(_))));
        let silent = continuous::intensity(&model, &History::silent(2.0).unwrap()).unwrap();
        assert!((silent.intensity - (1.0 + 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn decreasing_hazard_reverses_intensity() {
        let r = counterexample_added_arrival_with(decreasing_hazard_law(), 100.0).unwrap();
        assert!(r.margin > 1e-6);
        assert!(!r.theorem_applies);
        assert_eq!(r.witness.relation, Relation::Less);
        assert!(r.witness.reproduces(1e-10).unwrap());
        assert!(0.0 < r.t1 && r.t1 < r.t && r.t <= 5.0);
        assert!((-r.witness.gap() - r.margin).abs() < 1e-12);
        assert!(matches!(counterexample_added_arrival(2.0), Err(CpbError::Precondition(_))));
    }

    #[test]
    fn witness_round_trips_through_json() {
        let r = counterexample_added_arrival_with(decreasing_hazard_law(), 50.0).unwrap();
        let json = serde_json::to_string(&r.witness).unwrap();
        let back: Witness = serde_json::from_str(&json).unwrap();
        assert!(back.reproduces(1e-10).unwrap());
        assert_eq!(back.first_value, r.witness.first_value);
    }

    #[test]
    fn decreasing_differences_can_reverse_order() {
        // λ₁(0) > λ₀(0) but λ₁(1) = λ₀(1): the only information sits in the first gap
        let m = ContinuousModel::new(
            RateSchedule::continuous(vec![1.0437479405373167, 3.9603527236008262], vec![2.9962321359557134, 3.9603527236008262], TailMode::RepeatLast).unwrap(),
            ContinuousLaw::weibull(0.7293460076926701, 3.0843251719188234).unwrap(),
        )
        .unwrap();
        let t = 4.159293166599777;
        let early = History::new(t, vec![0.04032255287990227, 1.1972266403371838]).unwrap();
        let late = History::new(t, vec![1.9161154428310498, 2.667024095073372]).unwrap();
        assert!(late.dominates(&early).unwrap());
        let a = continuous::posterior_survival(&m, &early).unwrap();
        let b = continuous::posterior_survival(&m, &late).unwrap();
        // reference values from 30-digit quadrature
        assert!((a - 0.268912811891390).abs() < 1e-12 && (b - 0.387688563611227).abs() < 1e-12);

        let mut cfg = SweepConfig::new(Engine::Continuous, 400, 2);
        cfg.monotone_gaps = false;
        assert!(!theorem1_sweep(&cfg).unwrap().passed());
    }

    #[test]
    fn interval_mismatch_both_directions() {
        let r = interval_mismatch_examples().unwrap();
        assert_eq!(r.longer_silence_raises.relation, Relation::Greater);
        assert_eq!(r.longer_silence_lowers.relation, Relation::Less);
        for w in [&r.longer_silence_raises, &r.longer_silence_lowers] {
            assert!(w.reproduces(1e-10).unwrap());
        }
    }

    #[test]
    fn remark5_examples() {
        let o = remark5_check(1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0).unwrap();
        assert!(o.holds && o.preconditions);
        assert!((o.theta - o.theta_prime).abs() < 1e-16);
        let o = remark5_check(1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0).unwrap();
        assert_eq!(o.theta, 0.25);
        assert!((o.theta_prime - 1.0 / 7.0).abs() < 1e-16);
        let o = remark5_check(1.0, 1.0, 1.0, 1.0, 0.5, 1.0, 0.5).unwrap();
        assert!(!o.preconditions && !o.holds);
        assert!(remark5_check(0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        let s = remark5_sweep(20_000, 4).unwrap();
        assert_eq!(s.failures, 0);
    }

    #[test]
    fn identity_sweep_small() {
        let r = identity_sweep(200, 6, 12).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.max_rel_error <= 1e-12);
    }

    #[test]
    fn bridge_examples() {
        let r = RateSchedule::continuous(vec![1.0, 1.0], vec![2.0, 3.0], TailMode::RepeatLast).unwrap();
        let rep = catania_bridge_check(&r, &[2, 4, 16, 64]).unwrap();
        assert!(!rep.rows[0].admissible && rep.rows[0].note.is_some());
        assert!(rep.rows[1..].iter().all(|row| row.ser == Some(true)));
        assert_eq!(rep.least_m, Some(4));
        assert!(rep.catania && !rep.equal_differences);

        let flat = RateSchedule::continuous(vec![1.0, 1.0], vec![2.0, 2.0], TailMode::RepeatLast).unwrap();
        let rep = catania_bridge_check(&flat, &[8, 64]).unwrap();
        assert!(rep.equal_differences && !rep.catania);
        for row in &rep.rows {
            assert!((row.min_ratio.unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ks_utilities() {
        assert!((ks_critical_value(1, 0.01) - 1.6276).abs() < 1e-4);
        let uniform: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let o = ks_test(uniform.clone(), |x| x, 0.01);
        assert!(o.passed && (o.statistic - 0.0005).abs() < 1e-12);
        assert!(!ks_test(uniform, |x| x * x, 0.01).passed);
    }

    #[test]
    fn timescale_checks_small() {
        assert!(interarrival_scaling_check(300, 1).unwrap().max_error <= 1e-14);
        assert!(constant_scale_invariance_check(100, 2).unwrap().max_diff <= 1e-10);
        assert_eq!(regularized_catania_check(200, 3).unwrap().catania_failures, 0);
        let rates = RateSchedule::continuous(vec![1.0, 2.0], vec![3.0, 5.0], TailMode::RepeatLast).unwrap();
        let scale = TimeScale::new(vec![0.5, 2.0]).unwrap();
        for regime in [Regime::Before, Regime::After] {
            let out = degenerate_ks_check(&rates, &scale, regime, 5_000, 4, 0.01).unwrap();
            assert_eq!(out.len(), 3);
            assert!(out.iter().all(|o| o.passed), "{regime:?}: {out:?}");
        }
    }

    #[test]
    fn convergence_ratios_near_two() {
        for inst in convergence_sweep(3, 8, &[64, 128, 256]).unwrap() {
            for r in &inst.ratios {
                assert!((1.5..=2.5).contains(r), "{r} for {:?}", inst.rows);
            }
        }
    }
}
