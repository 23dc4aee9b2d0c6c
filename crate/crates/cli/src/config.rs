//! Sectioned key-value model files.
//!
//! ```text
//! # comments start with '#' or ';'
//! [rates]
//! pre = 1, 1
//! post = 2, 100
//! tail = repeat
//!
//! [changepoint]
//! family = exponential
//! rate = 1
//!
//! [history]
//! arrivals = 0.4
//! horizon = 1
//!
//! [run]
//! seed = 7
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use cpb_core::continuous::ContinuousModel;
use cpb_core::discrete::DiscreteModel;
use cpb_core::{
    ChangePointLaw, ContinuousLaw, CpbError, DiscreteHazard, DiscreteHistory, HazardSequence, History, RateSchedule,
    RateUnits, TailMode,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line: Some(line),
        message: message.into(),
    })
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn required(&mut self, name: &str, key: &str) -> Result<Entry, ConfigError> {
        self.take(key).map_or_else(|| err(self.line, format!("[{name}] needs `{key}`")), Ok)
    }

    fn finish(self, name: &str) -> Result<(), ConfigError> {
        match self.entries.into_iter().min_by_key(|(_, e)| e.line) {
            Some((k, e)) => err(e.line, format!("unknown key `{k}` in [{name}]")),
            None => Ok(()),
        }
    }
}

const SECTIONS: [&str; 4] = ["rates", "changepoint", "history", "run"];

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split(['#', ';']).next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return err(line, format!("malformed section header `{s}`"));
            };
            let name = name.trim().to_ascii_lowercase();
            if !SECTIONS.contains(&name.as_str()) {
                return err(line, format!("unknown section [{name}]"));
            }
            if sections.contains_key(&name) {
                return err(line, format!("section [{name}] appears twice"));
            }
            sections.insert(
                name.clone(),
                Section {
                    line,
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let Some((k, v)) = s.split_once('=') else {
            return err(line, format!("expected `key = value`, found `{s}`"));
        };
        let Some(name) = &current else {
            return err(line, "key outside of any section");
        };
        let key = k.trim().to_string();
        if key.is_empty() {
            return err(line, "empty key");
        }
        let section = sections.get_mut(name).expect("section was inserted");
        if let Some(prev) = section.entries.get(&key) {
            return err(line, format!("`{key}` already set on line {}", prev.line));
        }
        section.entries.insert(
            key,
            Entry {
                value: v.trim().to_string(),
                line,
            },
        );
    }
    Ok(sections)
}

fn parse_f64(e: &Entry, what: &str) -> Result<f64, ConfigError> {
    match e.value.parse::<f64>() {
        Ok(x) if !x.is_nan() => Ok(x),
        _ => err(e.line, format!("{what}: `{}` is not a number", e.value)),
    }
}

fn parse_int<T: std::str::FromStr>(e: &Entry, what: &str) -> Result<T, ConfigError> {
    e.value
        .parse::<T>()
        .map_or_else(|_| err(e.line, format!("{what}: `{}` is not a non-negative integer", e.value)), Ok)
}

fn list_items(e: &Entry) -> Vec<&str> {
    let v = e.value.trim();
    let v = v.strip_prefix('[').and_then(|v| v.strip_suffix(']')).unwrap_or(v);
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_list(e: &Entry, what: &str) -> Result<Vec<f64>, ConfigError> {
    list_items(e)
        .into_iter()
        .map(|s| match s.parse::<f64>() {
            Ok(x) if !x.is_nan() => Ok(x),
            _ => err(e.line, format!("{what}: `{s}` is not a number")),
        })
        .collect()
}

fn core_err<T>(line: usize, r: cpb_core::Result<T>) -> Result<T, ConfigError> {
    r.or_else(|e| err(line, e.to_string()))
}

/// Settings for sweeps and simulation; absent keys fall back to per-command defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSettings {
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub instances: Option<usize>,
    pub big_m: Option<f64>,
    pub m_list: Option<Vec<u32>>,
    pub paths: Option<usize>,
    pub max_arrivals: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct HistorySpec {
    pub arrivals: Vec<f64>,
    pub horizon: f64,
    /// Header line, for diagnostics; ignored by equality.
    pub line: usize,
}

impl PartialEq for HistorySpec {
    fn eq(&self, other: &Self) -> bool {
        self.arrivals == other.arrivals && self.horizon == other.horizon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub rates: Option<RateSchedule>,
    pub changepoint: Option<ChangePointLaw>,
    pub history: Option<HistorySpec>,
    pub run: RunSettings,
}

fn parse_tail(e: &Entry) -> Result<TailMode, ConfigError> {
    match e.value.to_ascii_lowercase().as_str() {
        "repeat" => Ok(TailMode::RepeatLast),
        "zero" => Ok(TailMode::ZeroAfterK),
        other => err(e.line, format!("tail must be `repeat` or `zero`, found `{other}`")),
    }
}

fn parse_changepoint(mut s: Section) -> Result<ChangePointLaw, ConfigError> {
    const NAME: &str = "changepoint";
    let fam = s.required(NAME, "family")?;
    let num = |s: &mut Section, key: &str| -> Result<f64, ConfigError> { parse_f64(&s.required(NAME, key)?, key) };
    let law = match fam.value.to_ascii_lowercase().as_str() {
        "exponential" => {
            let rate = num(&mut s, "rate")?;
            ChangePointLaw::Continuous(core_err(fam.line, ContinuousLaw::exponential(rate))?)
        }
        "weibull" => {
            let shape = num(&mut s, "shape")?;
            let scale = num(&mut s, "scale")?;
            ChangePointLaw::Continuous(core_err(fam.line, ContinuousLaw::weibull(shape, scale))?)
        }
        "point-mass" => {
            let at = num(&mut s, "at")?;
            ChangePointLaw::Continuous(core_err(fam.line, ContinuousLaw::point_mass(at))?)
        }
        "table" => {
            let e = s.required(NAME, "knots")?;
            let knots = list_items(&e)
                .into_iter()
                .map(|item| {
                    let parsed = item
                        .split_once(':')
                        .and_then(|(x, y)| Some((x.trim().parse::<f64>().ok()?, y.trim().parse::<f64>().ok()?)));
                    parsed.map_or_else(|| err(e.line, format!("knot `{item}` is not `x:G(x)`")), Ok)
                })
                .collect::<Result<Vec<_>, _>>()?;
            ChangePointLaw::Continuous(core_err(e.line, ContinuousLaw::table(knots))?)
        }
        "discrete" => {
            let e = s.required(NAME, "hazards")?;
            let values = parse_list(&e, "hazards")?;
            let tail = match s.take("tail") {
                Some(t) => parse_f64(&t, "tail")?,
                None => match values.last() {
                    Some(&v) => v,
                    None => return err(e.line, "hazards list is empty and no tail is given"),
                },
            };
            ChangePointLaw::Discrete(DiscreteHazard::Sequence(core_err(e.line, HazardSequence::new(values, tail))?))
        }
        other => {
            return err(
                fam.line,
                format!("unknown family `{other}`; expected exponential, weibull, point-mass, table or discrete"),
            )
        }
    };
    s.finish(NAME)?;
    Ok(law)
}

impl ModelConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections = split_sections(text)?;

        let changepoint = sections.remove("changepoint").map(parse_changepoint).transpose()?;
        let default_units = match changepoint {
            Some(ChangePointLaw::Discrete(_)) => RateUnits::PerSlot,
            _ => RateUnits::PerTime,
        };

        let rates = match sections.remove("rates") {
            None => None,
            Some(mut s) => {
                let pre = parse_list(&s.required("rates", "pre")?, "pre")?;
                let post = parse_list(&s.required("rates", "post")?, "post")?;
                let tail = match s.take("tail") {
                    Some(e) => parse_tail(&e)?,
                    None => TailMode::RepeatLast,
                };
                let units = match s.take("units") {
                    None => default_units,
                    Some(e) => match e.value.to_ascii_lowercase().as_str() {
                        "per-time" => RateUnits::PerTime,
                        "per-slot" => RateUnits::PerSlot,
                        other => return err(e.line, format!("units must be `per-time` or `per-slot`, found `{other}`")),
                    },
                };
                let line = s.line;
                s.finish("rates")?;
                Some(core_err(line, RateSchedule::new(pre, post, tail, units))?)
            }
        };

        let history = match sections.remove("history") {
            None => None,
            Some(mut s) => {
                let arrivals = match s.take("arrivals") {
                    Some(e) => parse_list(&e, "arrivals")?,
                    None => Vec::new(),
                };
                let horizon = parse_f64(&s.required("history", "horizon")?, "horizon")?;
                let line = s.line;
                s.finish("history")?;
                Some(HistorySpec { arrivals, horizon, line })
            }
        };

        let mut run = RunSettings::default();
        if let Some(mut s) = sections.remove("run") {
            if let Some(e) = s.take("seed") {
                run.seed = Some(parse_int(&e, "seed")?);
            }
            if let Some(e) = s.take("tolerance") {
                let t = parse_f64(&e, "tolerance")?;
                if !(t > 0.0) {
                    return err(e.line, "tolerance must be positive");
                }
                run.tolerance = Some(t);
            }
            if let Some(e) = s.take("instances") {
                run.instances = Some(parse_int(&e, "instances")?);
            }
            if let Some(e) = s.take("M") {
                run.big_m = Some(parse_f64(&e, "M")?);
            }
            if let Some(e) = s.take("m_list") {
                let ms = list_items(&e)
                    .into_iter()
                    .map(|x| x.parse::<u32>().map_or_else(|_| err(e.line, format!("m_list: `{x}` is not a positive integer")), Ok))
                    .collect::<Result<Vec<u32>, _>>()?;
                if ms.is_empty() || ms.contains(&0) {
                    return err(e.line, "m_list needs positive entries");
                }
                run.m_list = Some(ms);
            }
            if let Some(e) = s.take("paths") {
                run.paths = Some(parse_int(&e, "paths")?);
            }
            if let Some(e) = s.take("max_arrivals") {
                run.max_arrivals = Some(parse_int(&e, "max_arrivals")?);
            }
            s.finish("run")?;
        }

        Ok(Self {
            rates,
            changepoint,
            history,
            run,
        })
    }

    pub fn rates(&self) -> Result<&RateSchedule, CliError> {
        self.rates
            .as_ref()
            .ok_or_else(|| CliError::Parse("config has no [rates] section".into()))
    }

    pub fn law(&self) -> Result<&ChangePointLaw, CliError> {
        self.changepoint
            .as_ref()
            .ok_or_else(|| CliError::Parse("config has no [changepoint] section".into()))
    }

    pub fn history_spec(&self) -> Result<&HistorySpec, CliError> {
        self.history
            .as_ref()
            .ok_or_else(|| CliError::Parse("config has no [history] section".into()))
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.changepoint, Some(ChangePointLaw::Discrete(_)))
    }

    pub fn continuous_model(&self) -> Result<ContinuousModel, CliError> {
        let rates = self.rates()?;
        match self.law()? {
            ChangePointLaw::Continuous(law) => Ok(ContinuousModel::new(rates.clone(), law.clone())?),
            ChangePointLaw::Discrete(_) => Err(CliError::Precondition(
                "a discrete change-point law has no continuous-time model".into(),
            )),
        }
    }

    pub fn discrete_model(&self) -> Result<DiscreteModel, CliError> {
        let rates = self.rates()?;
        match self.law()? {
            ChangePointLaw::Discrete(h) => Ok(DiscreteModel::new(rates.clone(), h.clone())?),
            ChangePointLaw::Continuous(_) => Err(CliError::Precondition(
                "a continuous change-point law needs --m to discretize".into(),
            )),
        }
    }

    pub fn continuous_history(&self) -> Result<History, CliError> {
        let h = self.history_spec()?;
        History::new(h.horizon, h.arrivals.clone()).map_err(|e| line_error(h.line, e))
    }

    /// The history read as slot indices.
    pub fn discrete_history(&self) -> Result<DiscreteHistory, CliError> {
        let h = self.history_spec()?;
        let slot = |x: f64| -> Result<usize, CliError> {
            if x >= 0.0 && x.fract() == 0.0 && x < usize::MAX as f64 {
                Ok(x as usize)
            } else {
                Err(CliError::Parse(format!("line {}: `{x}` is not a slot index", h.line)))
            }
        };
        let arrivals = h.arrivals.iter().map(|&x| slot(x)).collect::<Result<Vec<_>, _>>()?;
        DiscreteHistory::new(slot(h.horizon)?, arrivals).map_err(|e| line_error(h.line, e))
    }

    /// Text that parses back to an equal config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let list = |xs: &[f64]| xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        if let Some(r) = &self.rates {
            let tail = match r.tail() {
                TailMode::RepeatLast => "repeat",
                TailMode::ZeroAfterK => "zero",
            };
            let units = match r.units() {
                RateUnits::PerTime => "per-time",
                RateUnits::PerSlot => "per-slot",
            };
            let _ = writeln!(
                out,
                "[rates]\npre = {}\npost = {}\ntail = {tail}\nunits = {units}\n",
                list(r.pre_listed()),
                list(r.post_listed())
            );
        }
        if let Some(law) = &self.changepoint {
            out.push_str("[changepoint]\n");
            let _ = match law {
                ChangePointLaw::Continuous(ContinuousLaw::Exponential { rate }) => {
                    writeln!(out, "family = exponential\nrate = {rate:?}")
                }
                ChangePointLaw::Continuous(ContinuousLaw::Weibull { shape, scale }) => {
                    writeln!(out, "family = weibull\nshape = {shape:?}\nscale = {scale:?}")
                }
                ChangePointLaw::Continuous(ContinuousLaw::PointMass { at }) => {
                    writeln!(out, "family = point-mass\nat = {at:?}")
                }
                ChangePointLaw::Continuous(ContinuousLaw::Table { knots }) => {
                    let k: Vec<String> = knots.knots().iter().map(|(x, y)| format!("{x:?}:{y:?}")).collect();
                    writeln!(out, "family = table\nknots = {}", k.join(", "))
                }
                ChangePointLaw::Discrete(DiscreteHazard::Sequence(seq)) => {
                    writeln!(out, "family = discrete\nhazards = {}\ntail = {:?}", list(seq.values()), seq.tail())
                }
                ChangePointLaw::Discrete(DiscreteHazard::Discretized { .. }) => {
                    writeln!(out, "# grid law of a continuous change point; not expressible here")
                }
            };
            out.push('\n');
        }
        if let Some(h) = &self.history {
            let _ = writeln!(out, "[history]\narrivals = {}\nhorizon = {:?}\n", list(&h.arrivals), h.horizon);
        }
        let r = &self.run;
        if *r != RunSettings::default() {
            out.push_str("[run]\n");
            if let Some(v) = r.seed {
                let _ = writeln!(out, "seed = {v}");
            }
            if let Some(v) = r.tolerance {
                let _ = writeln!(out, "tolerance = {v:?}");
            }
            if let Some(v) = r.instances {
                let _ = writeln!(out, "instances = {v}");
            }
            if let Some(v) = r.big_m {
                let _ = writeln!(out, "M = {v:?}");
            }
            if let Some(v) = &r.m_list {
                let ms: Vec<String> = v.iter().map(u32::to_string).collect();
                let _ = writeln!(out, "m_list = {}", ms.join(", "));
            }
            if let Some(v) = r.paths {
                let _ = writeln!(out, "paths = {v}");
            }
            if let Some(v) = r.max_arrivals {
                let _ = writeln!(out, "max_arrivals = {v}");
            }
        }
        out
    }
}

fn line_error(line: usize, e: CpbError) -> CliError {
    CliError::Parse(format!("line {line}: {e}"))
}
