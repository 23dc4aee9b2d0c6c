//! Acceptance suite: one line per criterion.
//!
//! A criterion either passes, fails, or is a known deviation: a stated claim
//! that does not hold, where the suite checks that it fails in exactly the
//! documented way. Only unexpected failures make the run fail.

use std::process::ExitCode;
use std::time::Instant;

use cpb_core::continuous::{self, ContinuousModel};
use cpb_core::discrete::{self, DiscreteModel};
use cpb_core::numeric::instance_rng;
use cpb_core::timescale::TimeScale;
use cpb_core::verify::{self, Engine, SweepConfig};
use cpb_core::{
    ContinuousLaw, CpbError, DiscreteHazard, DiscreteHistory, HazardSequence, History, RateSchedule, Regime,
    TailMode,
};
use rand::seq::index::sample as sample_indices;
use rand::Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    KnownDeviation(String),
}

type Check = fn() -> Result<Outcome, CpbError>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn random_discrete_model<R: Rng>(rng: &mut R) -> DiscreteModel {
    let len = rng.random_range(1..=4);
    let pre = (0..len).map(|_| rng.random_range(0.01..0.95)).collect();
    let post = (0..len).map(|_| rng.random_range(0.01..0.95)).collect();
    let tail = if rng.random_bool(0.8) {
        TailMode::RepeatLast
    } else {
        TailMode::ZeroAfterK
    };
    let rates = RateSchedule::discrete(pre, post, tail).unwrap();
    let hazard = if rng.random_bool(0.8) {
        verify::sample_hazard(rng)
    } else {
        DiscreteHazard::Discretized {
            law: verify::sample_law(rng),
            m: rng.random_range(1..=8),
        }
    };
    DiscreteModel::new(rates, hazard).unwrap()
}

fn random_discrete_history<R: Rng>(rng: &mut R, max_n: usize, max_k: usize, cap: Option<usize>) -> DiscreteHistory {
    let n = rng.random_range(1..=max_n);
    let k = rng.random_range(0..=n.min(max_k).min(cap.unwrap_or(usize::MAX)));
    let mut slots: Vec<usize> = sample_indices(rng, n, k).into_iter().map(|i| i + 1).collect();
    slots.sort_unstable();
    DiscreteHistory::new(n, slots).unwrap()
}

fn random_history<R: Rng>(rng: &mut R, max_k: usize) -> History {
    loop {
        let t = rng.random_range(0.5..5.0);
        let k = rng.random_range(0..=max_k);
        let mut a: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..t)).collect();
        a.sort_by(f64::total_cmp);
        if let Ok(h) = History::new(t, a) {
            return h;
        }
    }
}

fn oracle_equivalence() -> Result<Outcome, CpbError> {
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for i in 0..1000 {
        let mut rng = instance_rng(101, i);
        let model = random_discrete_model(&mut rng);
        let h = random_discrete_history(&mut rng, 10, 5, model.rates().capacity());
        match (discrete::posterior_survival(&model, &h), discrete::brute_force_posterior(&model, &h)) {
            (Ok(a), Ok(b)) => {
                worst = worst.max((a - b).abs());
                compared += 1;
            }
            (Err(CpbError::DegenerateModel(_)), Err(CpbError::DegenerateModel(_))) => {}
            (a, b) => return Ok(Outcome::Fail(format!("engines disagree on support: {a:?} vs {b:?}"))),
        }
    }
    Ok(check(
        worst <= 1e-12 && compared >= 990,
        format!("{compared} instances, max |diff| = {worst:.2e}"),
    ))
}

fn monotonicity_sweeps() -> Result<Outcome, CpbError> {
    let d = verify::theorem1_sweep(&SweepConfig::new(Engine::Discrete, 10_000, 202))?;
    let c = verify::theorem1_sweep(&SweepConfig::new(Engine::Continuous, 10_000, 203))?;
    let mut loose = SweepConfig::new(Engine::Continuous, 10_000, 204);
    loose.monotone_gaps = false;
    let l = verify::theorem1_sweep(&loose)?;
    let detail = format!(
        "discrete {} pairs: {} violations (min margin {:.1e}); continuous with nondecreasing gaps {} pairs: {} violations (min margin {:.1e}); continuous with λ₁ ≥ λ₀ only: {} violations",
        d.pairs,
        d.violations.len(),
        d.min_margin,
        c.pairs,
        c.violations.len(),
        c.min_margin,
        l.violations.len()
    );
    if !(d.passed() && c.passed()) {
        return Ok(Outcome::Fail(detail));
    }
    // the witnesses must be genuine reversals, not numerical noise
    let genuine = l.violations.iter().all(|w| {
        let scale = w.first_value.prob_before.max(w.second_value.prob_before);
        w.gap() > loose.tolerance && w.gap() / scale > 1e-6 && w.reproduces(1e-10).unwrap_or(false)
    });
    if l.violations.is_empty() || !genuine {
        return Ok(Outcome::Fail(detail));
    }
    Ok(Outcome::KnownDeviation(detail))
}

fn shift_identities() -> Result<Outcome, CpbError> {
    let ids = verify::identity_sweep(1_000, 303, 12)?;
    let r5 = verify::remark5_sweep(1_000_000, 304)?;
    Ok(check(
        ids.passed() && ids.max_rel_error <= 1e-12 && r5.failures == 0,
        format!(
            "{} shifts, max rel error {:.2e}; {} constant draws, {} failures",
            ids.shifts, ids.max_rel_error, r5.draws, r5.failures
        ),
    ))
}

fn closed_form() -> Result<Outcome, CpbError> {
    let m = ContinuousModel::new(
        RateSchedule::constant(1.0, 2.0, cpb_core::RateUnits::PerTime)?,
        ContinuousLaw::exponential(1.0)?,
    )?;
    let r = continuous::intensity(&m, &History::silent(1.0)?)?;
    Ok(check(
        (r.prob_before - 0.5).abs() <= 1e-10 && (r.intensity - 1.5).abs() <= 1e-10,
        format!("prob_before = {:.15}, intensity = {:.15}", r.prob_before, r.intensity),
    ))
}

fn convergence() -> Result<Outcome, CpbError> {
    let runs = verify::convergence_sweep(10, 505, &[64, 128, 256, 512])?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut decreasing = true;
    for run in &runs {
        let errs: Vec<f64> = run.rows.iter().filter_map(|r| r.error).collect();
        decreasing &= errs.len() == 4 && errs.windows(2).all(|w| w[1] < w[0]);
        for &r in &run.ratios {
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    Ok(check(
        decreasing && lo >= 1.5 && hi <= 2.5,
        format!("{} instances, error ratios in [{lo:.3}, {hi:.3}]", runs.len()),
    ))
}

fn added_arrival() -> Result<Outcome, CpbError> {
    let stated = verify::added_arrival_model(ContinuousLaw::exponential(1.0)?, 100.0)?;
    let s = verify::added_arrival_search(&stated)?;
    let alt = verify::counterexample_added_arrival_with(verify::decreasing_hazard_law(), 100.0);
    let detail = format!(
        "Exp(1) change point: best μ(∅) − μ({{t₁}}) = {:.4} at t = {}, t₁ = {} (posterior reversal {:.3}); ",
        s.margin, s.t, s.t1, s.posterior_gap
    );
    match alt {
        Ok(r) if s.margin < 0.0 && r.margin > 1e-6 && !r.theorem_applies && r.witness.reproduces(1e-10)? => {
            Ok(Outcome::KnownDeviation(format!(
                "{detail}Weibull(0.3, 1) change point: margin {:.4} at t = {}, t₁ = {}",
                r.margin, r.t, r.t1
            )))
        }
        Ok(r) if s.margin > 1e-6 => Ok(Outcome::Pass(format!("{detail}witness margin {:.4}", r.margin))),
        other => Ok(Outcome::Fail(format!("{detail}{other:?}"))),
    }
}

fn timescale() -> Result<Outcome, CpbError> {
    let a = verify::interarrival_scaling_check(10_000, 701)?;
    let b = verify::constant_scale_invariance_check(1_000, 702)?;
    let rates = RateSchedule::continuous(vec![1.0, 2.5, 0.7], vec![3.0, 4.0, 6.0], TailMode::RepeatLast)?;
    let scale = TimeScale::new(vec![0.5, 2.0, 1.5, 3.0])?;
    let mut ks = Vec::new();
    for regime in [Regime::Before, Regime::After] {
        ks.extend(verify::degenerate_ks_check(&rates, &scale, regime, 100_000, 703, 0.01)?);
    }
    let worst_ks = ks.iter().map(|o| o.statistic / o.critical).fold(0.0, f64::max);
    let d = verify::regularized_catania_check(1_000, 704)?;
    Ok(check(
        a.max_error <= 1e-14 && b.max_diff <= 1e-10 && ks.iter().all(|o| o.passed) && d.catania_failures == 0,
        format!(
            "(a) {} paths max err {:.1e}; (b) {} instances max diff {:.1e}; (c) {} KS tests, max D/crit {:.3}; (d) {} catania failures",
            a.paths,
            a.max_error,
            b.instances,
            b.max_diff,
            ks.len(),
            worst_ks,
            d.catania_failures
        ),
    ))
}

fn trivial_invariants() -> Result<Outcome, CpbError> {
    let mut prior_err: f64 = 0.0;
    let mut one_slot_exact = true;
    let mut in_range = true;
    let mut reexpr: f64 = 0.0;
    for i in 0..500 {
        let mut rng = instance_rng(801, i);
        // equal rates, continuous
        let law = verify::sample_law(&mut rng);
        let rate: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..4.0)).collect();
        let m = ContinuousModel::new(
            RateSchedule::continuous(rate.clone(), rate, TailMode::RepeatLast)?,
            law.clone(),
        )?;
        let h = random_history(&mut rng, 4);
        prior_err = prior_err.max((continuous::posterior_survival(&m, &h)? - law.survival(h.horizon())).abs());
        // equal rates, discrete
        let hazard = verify::sample_hazard(&mut rng);
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..0.9)).collect();
        let dm = DiscreteModel::new(RateSchedule::discrete(p.clone(), p, TailMode::RepeatLast)?, hazard.clone())?;
        let dh = random_discrete_history(&mut rng, 12, 5, None);
        let prior = hazard.ln_survival(dh.horizon() as u64).exp();
        prior_err = prior_err.max((discrete::posterior_survival(&dm, &dh)? - prior).abs());
        // one slot
        let nu = rng.random_range(0.01..0.99);
        let om = DiscreteModel::new(
            verify::sample_discrete_rates(&mut rng, 3),
            DiscreteHazard::Sequence(HazardSequence::constant(nu)?),
        )?;
        for arrivals in [vec![], vec![1]] {
            let s = discrete::posterior_survival(&om, &DiscreteHistory::new(1, arrivals)?)?;
            one_slot_exact &= (s - (1.0 - nu)).abs() <= 2.0 * f64::EPSILON;
        }
        // intensity range and the re-expression λ₀ + (λ₁ − λ₀)·P(U ≤ t)
        let cm = verify::sample_continuous_model(&mut rng, 4, false);
        let ch = random_history(&mut rng, 4);
        let r = continuous::intensity(&cm, &ch)?;
        let (l0, l1) = (cm.rates().pre(ch.count()), cm.rates().post(ch.count()));
        in_range &= l0.min(l1) <= r.intensity && r.intensity <= l0.max(l1);
        let s = continuous::posterior_survival(&cm, &ch)?;
        reexpr = reexpr.max((l0 + (l1 - l0) * (1.0 - s) - r.intensity).abs());
        let rd = discrete::posterior(&dm, &dh)?;
        let (d0, d1) = (dm.rates().pre(dh.count()), dm.rates().post(dh.count()));
        in_range &= d0.min(d1) <= rd.intensity && rd.intensity <= d0.max(d1);
    }
    Ok(check(
        prior_err <= 1e-12 && one_slot_exact && in_range && reexpr <= 1e-12,
        format!(
            "prior max err {prior_err:.1e}; one-slot within 2 ulp: {one_slot_exact}; intensity in range: {in_range}; re-expression err {reexpr:.1e}"
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 monotonicity sweeps", monotonicity_sweeps),
        ("3 shift identities", shift_identities),
        ("4 closed-form case", closed_form),
        ("5 discretisation convergence", convergence),
        ("6 added-arrival reversal", added_arrival),
        ("7 time-scale properties", timescale),
        ("8 trivial invariants", trivial_invariants),
    ];
    let mut unexpected = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(Outcome::Pass(d)) => ("PASS", d),
            Ok(Outcome::KnownDeviation(d)) => ("FAIL (known deviation)", d),
            Ok(Outcome::Fail(d)) => {
                unexpected += 1;
                ("FAIL", d)
            }
            Err(e) => {
                unexpected += 1;
                ("FAIL", format!("error: {e}"))
            }
        };
        println!("[{tag}] {name} ({:.1}s): {detail}", start.elapsed().as_secs_f64());
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
