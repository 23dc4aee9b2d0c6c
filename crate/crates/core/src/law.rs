//! Distributions of the change point `U`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CpbError, Result};

/// Piecewise-linear CDF through a list of `(s, G(s))` knots.
///
/// The table always starts at `(0, 0)` (prepended when absent) and must end at
/// `G = 1`; between knots `G` is interpolated linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct CdfTable {
    s: Vec<f64>,
    g: Vec<f64>,
}

impl TryFrom<Vec<(f64, f64)>> for CdfTable {
    type Error = CpbError;

    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self> {
        CdfTable::new(knots)
    }
}

impl From<CdfTable> for Vec<(f64, f64)> {
    fn from(t: CdfTable) -> Self {
        t.knots()
    }
}

impl CdfTable {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(CpbError::InvalidLaw("CDF table has no knots".into()));
        }
        let mut s = Vec::with_capacity(knots.len() + 1);
        let mut g = Vec::with_capacity(knots.len() + 1);
        if knots[0].0 > 0.0 {
            s.push(0.0);
            g.push(0.0);
        }
        for &(x, y) in &knots {
            if !x.is_finite() || x < 0.0 {
                return Err(CpbError::InvalidLaw(format!("table abscissa {x} must be finite and >= 0")));
            }
            if !(0.0..=1.0).contains(&y) {
                return Err(CpbError::InvalidLaw(format!("table value {y} outside [0, 1]")));
            }
            if let (Some(&px), Some(&py)) = (s.last(), g.last()) {
                if x <= px {
                    return Err(CpbError::InvalidLaw("table abscissae must be strictly increasing".into()));
                }
                if y < py {
                    return Err(CpbError::InvalidLaw("table values must be nondecreasing".into()));
                }
            }
            s.push(x);
            g.push(y);
        }
        if g[0] != 0.0 {
            return Err(CpbError::InvalidLaw("G(0) must be 0".into()));
        }
        if *g.last().unwrap() != 1.0 {
            return Err(CpbError::InvalidLaw("last table value must be 1".into()));
        }
        Ok(Self { s, g })
    }

    pub fn knots(&self) -> Vec<(f64, f64)> {
        self.s.iter().copied().zip(self.g.iter().copied()).collect()
    }

    /// Linear pieces `(left, right, density)` with positive density.
    pub(crate) fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.s.windows(2).zip(self.g.windows(2)).filter_map(|(s, g)| {
            let dens = (g[1] - g[0]) / (s[1] - s[0]);
            (dens > 0.0).then_some((s[0], s[1], dens))
        })
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let last = self.s.len() - 1;
        if x >= self.s[last] {
            return 1.0;
        }
        let i = self.s.partition_point(|&v| v <= x) - 1;
        let w = (x - self.s[i]) / (self.s[i + 1] - self.s[i]);
        self.g[i] + w * (self.g[i + 1] - self.g[i])
    }

    fn quantile(&self, p: f64) -> f64 {
        // first knot whose value reaches p
        let i = self.g.partition_point(|&v| v < p).clamp(1, self.g.len() - 1);
        let (g0, g1) = (self.g[i - 1], self.g[i]);
        let (s0, s1) = (self.s[i - 1], self.s[i]);
        if g1 == g0 {
            return s1;
        }
        s0 + (p - g0) / (g1 - g0) * (s1 - s0)
    }

    fn scaled(&self, c: f64) -> Self {
        Self {
            s: self.s.iter().map(|x| x * c).collect(),
            g: self.g.clone(),
        }
    }
}

/// Law of a continuous change point on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ContinuousLaw {
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
    PointMass { at: f64 },
    Table { knots: CdfTable },
}

impl ContinuousLaw {
    pub fn exponential(rate: f64) -> Result<Self> {
        let law = Self::Exponential { rate };
        law.validate()?;
        Ok(law)
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        let law = Self::Weibull { shape, scale };
        law.validate()?;
        Ok(law)
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        let law = Self::PointMass { at };
        law.validate()?;
        Ok(law)
    }

    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self> {
        Ok(Self::Table {
            knots: CdfTable::new(knots)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Self::Weibull { shape, scale } => {
                shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0
            }
            Self::PointMass { at } => at.is_finite() && at >= 0.0,
            Self::Table { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(CpbError::InvalidLaw(format!("bad parameters for {self:?}")))
        }
    }

    pub fn cdf(&self, s: f64) -> f64 {
        match self {
            Self::PointMass { at } => {
                if s >= *at {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Table { knots } => knots.cdf(s),
            _ => -self.ln_survival(s).exp_m1(),
        }
    }

    /// `Ḡ(s) = P(U > s)`.
    pub fn survival(&self, s: f64) -> f64 {
        match self {
            Self::PointMass { .. } | Self::Table { .. } => 1.0 - self.cdf(s),
            _ => self.ln_survival(s).exp(),
        }
    }

    pub fn ln_survival(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return match self {
                Self::PointMass { at } if *at <= s => f64::NEG_INFINITY,
                _ => 0.0,
            };
        }
        match *self {
            Self::Exponential { rate } => -rate * s,
            Self::Weibull { shape, scale } => -(s / scale).powf(shape),
            Self::PointMass { .. } | Self::Table { .. } => (1.0 - self.cdf(s)).ln(),
        }
    }

    /// Inverse of `Ḡ` on `(0, 1]` for the families with a closed-form survival.
    pub(crate) fn inverse_survival(&self, q: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => -q.ln() / rate,
            Self::Weibull { shape, scale } => scale * (-q.ln()).powf(1.0 / shape),
            Self::PointMass { at } => at,
            Self::Table { ref knots } => knots.quantile(1.0 - q),
        }
    }

    /// Draws `U` by inversion.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // survival level in (0, 1]
        let q = 1.0 - rng.random::<f64>();
        self.inverse_survival(q)
    }

    /// Law of `c·U`.
    pub fn time_scaled(&self, c: f64) -> Self {
        match self {
            Self::Exponential { rate } => Self::Exponential { rate: rate / c },
            Self::Weibull { shape, scale } => Self::Weibull {
                shape: *shape,
                scale: scale * c,
            },
            Self::PointMass { at } => Self::PointMass { at: at * c },
            Self::Table { knots } => Self::Table {
                knots: knots.scaled(c),
            },
        }
    }
}

/// Explicit per-slot hazards `ν(1), …, ν(L)` followed by a constant tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHazard", into = "RawHazard")]
pub struct HazardSequence {
    values: Vec<f64>,
    tail: f64,
}

#[derive(Serialize, Deserialize)]
struct RawHazard {
    values: Vec<f64>,
    tail: f64,
}

impl TryFrom<RawHazard> for HazardSequence {
    type Error = CpbError;

    fn try_from(raw: RawHazard) -> Result<Self> {
        HazardSequence::new(raw.values, raw.tail)
    }
}

impl From<HazardSequence> for RawHazard {
    fn from(h: HazardSequence) -> Self {
        RawHazard {
            values: h.values,
            tail: h.tail,
        }
    }
}

impl HazardSequence {
    pub fn new(values: Vec<f64>, tail: f64) -> Result<Self> {
        for (i, &v) in values.iter().chain(std::iter::once(&tail)).enumerate() {
            if !(v > 0.0 && v < 1.0) {
                return Err(CpbError::InvalidLaw(format!(
                    "hazard value #{} = {v} must lie in (0, 1)",
                    i + 1
                )));
            }
        }
        Ok(Self { values, tail })
    }

    pub fn constant(nu: f64) -> Result<Self> {
        Self::new(Vec::new(), nu)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    fn at(&self, j: u64) -> f64 {
        debug_assert!(j >= 1);
        usize::try_from(j - 1)
            .ok()
            .and_then(|i| self.values.get(i).copied())
            .unwrap_or(self.tail)
    }
}

/// Law of a discrete change point `Ū ∈ {1, 2, …}`.
///
/// `Ū = j` means slots `r > j` are post-change. The `Discretized` variant is the
/// grid law of a continuous `U`: `Ū = j` iff `U ∈ ((j−1)/m, j/m]` (with `U = 0`
/// mapped to slot 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DiscreteHazard {
    Sequence(HazardSequence),
    Discretized { law: ContinuousLaw, m: u32 },
}

impl DiscreteHazard {
    /// `ν(j) = P(Ū = j | Ū > j − 1)`.
    pub fn hazard(&self, j: u64) -> f64 {
        assert!(j >= 1, "hazard index starts at 1");
        match self {
            Self::Sequence(seq) => seq.at(j),
            Self::Discretized { .. } => {
                let prev = self.ln_survival(j - 1);
                if prev == f64::NEG_INFINITY {
                    return 1.0;
                }
                -(self.ln_survival(j) - prev).exp_m1()
            }
        }
    }

    /// `ln P(Ū > n)`.
    pub fn ln_survival(&self, n: u64) -> f64 {
        match self {
            Self::Sequence(seq) => {
                let listed = seq.values.len() as u64;
                let head: f64 = seq
                    .values
                    .iter()
                    .take(n.min(listed) as usize)
                    .map(|v| (-v).ln_1p())
                    .sum();
                let extra = n.saturating_sub(listed) as f64;
                head + extra * (-seq.tail).ln_1p()
            }
            Self::Discretized { law, m } => {
                if n == 0 {
                    0.0
                } else {
                    law.ln_survival(n as f64 / *m as f64)
                }
            }
        }
    }

    /// `ln P(Ū = j)` for `j = 1..=n`, index `j − 1`.
    pub fn ln_pmf_upto(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut ln_surv = 0.0;
        for j in 1..=n as u64 {
            let next = self.ln_survival(j);
            let ln_pmf = match self {
                Self::Sequence(seq) => seq.at(j).ln() + ln_surv,
                // difference of survivals, kept in log form
                Self::Discretized { .. } => ln_diff_exp(ln_surv, next),
            };
            out.push(ln_pmf);
            ln_surv = next;
        }
        out
    }

    pub fn ln_pmf(&self, j: u64) -> f64 {
        assert!(j >= 1);
        match self {
            Self::Sequence(seq) => seq.at(j).ln() + self.ln_survival(j - 1),
            Self::Discretized { .. } => ln_diff_exp(self.ln_survival(j - 1), self.ln_survival(j)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Self::Sequence(seq) => {
                for (i, &nu) in seq.values.iter().enumerate() {
                    if rng.random::<f64>() < nu {
                        return i as u64 + 1;
                    }
                }
                let v = 1.0 - rng.random::<f64>();
                let extra = (v.ln() / (-seq.tail).ln_1p()).floor();
                seq.values.len() as u64 + 1 + extra.min(u64::MAX as f64 / 2.0) as u64
            }
            Self::Discretized { law, m } => {
                let u = law.sample(rng);
                ((u * *m as f64).ceil() as u64).max(1)
            }
        }
    }
}

/// `ln(e^a − e^b)` for `a ≥ b`.
pub(crate) fn ln_diff_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY || b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp_m1()).ln()
}

/// Change-point law of either time domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChangePointLaw {
    Continuous(ContinuousLaw),
    Discrete(DiscreteHazard),
}
