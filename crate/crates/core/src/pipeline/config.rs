//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. The `scenario` key selects the
//! defaults every other key starts from, so it is applied first wherever it
//! appears. [`RunConfig::to_text`] writes every key back out, which is what
//! each command stores as `resolved_config.txt`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{NaiveDate, NaiveTime};

use crate::datagen::{PopulationConfig, Scenario};
use crate::error::{Error, Result};
use crate::fsutil::read_to_string;
use crate::mask::MaskSpec;
use crate::motif::MotifMethod;
use crate::series::{CleaningPolicy, Hemisphere, Season};

/// Daytime window used by the distance mask and the classifier's initial
/// weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaskChoice {
    /// 06:00 to 19:00, roughly sunrise to sunset.
    Daylight,
    /// 10:00 to 16:00.
    Calibrated,
    Full,
    Window(NaiveTime, NaiveTime),
}

impl MaskChoice {
    pub fn spec(self, interval_minutes: u32) -> Result<MaskSpec> {
        match self {
            MaskChoice::Daylight => MaskSpec::daylight(interval_minutes),
            MaskChoice::Calibrated => MaskSpec::calibrated(interval_minutes),
            MaskChoice::Full => MaskSpec::full(crate::mask::samples_per_day(interval_minutes)?),
            MaskChoice::Window(a, b) => MaskSpec::from_clock(a, b, interval_minutes),
        }
    }
}

impl fmt::Display for MaskChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskChoice::Daylight => f.write_str("daylight"),
            MaskChoice::Calibrated => f.write_str("calibrated"),
            MaskChoice::Full => f.write_str("full"),
            MaskChoice::Window(a, b) => write!(f, "{}-{}", a.format("%H:%M"), b.format("%H:%M")),
        }
    }
}

impl FromStr for MaskChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "daylight" => Ok(MaskChoice::Daylight),
            "calibrated" => Ok(MaskChoice::Calibrated),
            "full" | "none" => Ok(MaskChoice::Full),
            _ => {
                let bad = || Error::config(format!("mask `{s}` is not daylight, calibrated, full or HH:MM-HH:MM"));
                let (a, b) = s.split_once('-').ok_or_else(bad)?;
                let t = |x: &str| NaiveTime::parse_from_str(x.trim(), "%H:%M").map_err(|_| bad());
                Ok(MaskChoice::Window(t(a)?, t(b)?))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdChoice {
    /// Median of the training consumers' pooled distances, then frozen.
    Calibrate,
    Fixed(f64),
    /// Per-consumer median. Experimental.
    Dynamic,
}

impl fmt::Display for ThresholdChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdChoice::Calibrate => f.write_str("calibrate"),
            ThresholdChoice::Fixed(t) => write!(f, "{t}"),
            ThresholdChoice::Dynamic => f.write_str("dynamic"),
        }
    }
}

impl FromStr for ThresholdChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calibrate" => Ok(ThresholdChoice::Calibrate),
            "dynamic" => Ok(ThresholdChoice::Dynamic),
            _ => match s.parse::<f64>() {
                Ok(t) if t >= 0.0 && !t.is_nan() => Ok(ThresholdChoice::Fixed(t)),
                _ => Err(Error::config(format!(
                    "threshold `{s}` is not calibrate, dynamic or a non-negative number"
                ))),
            },
        }
    }
}

/// Which days feed motif discovery and the zero-count baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeasonChoice {
    All,
    Only(Season),
}

impl fmt::Display for SeasonChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeasonChoice::All => f.write_str("all"),
            SeasonChoice::Only(s) => f.write_str(s.as_str()),
        }
    }
}

impl FromStr for SeasonChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(SeasonChoice::All),
            "summer" => Ok(SeasonChoice::Only(Season::Summer)),
            "winter" => Ok(SeasonChoice::Only(Season::Winter)),
            _ => Err(Error::config(format!("season `{s}` is not all, summer or winter"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Consumer CSV; defaults to `consumers.csv` in the output directory.
    pub input: Option<PathBuf>,
    /// Ground-truth CSV; defaults to `ground_truth.csv` in the output
    /// directory.
    pub ground_truth: Option<PathBuf>,
    pub population: PopulationConfig,
    pub hard_cases: usize,
    pub cleaning: CleaningPolicy,
    pub season: SeasonChoice,
    pub mask: MaskChoice,
    pub threshold: ThresholdChoice,
    pub method: MotifMethod,
    pub split_fraction: f64,
    pub split_seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub init_scale: f64,
    pub train_seed: u64,
    pub constrain_weights: bool,
    pub decision_threshold: f64,
    pub counting_zeros: bool,
    pub zero_epsilon: Option<f64>,
    pub load_duration: bool,
    pub ld_q: usize,
    pub histogram_bins: usize,
    pub dump_distance_tables: bool,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn for_scenario(scenario: Scenario) -> Self {
        let population = PopulationConfig::for_scenario(scenario);
        let pv = scenario == Scenario::Pv;
        RunConfig {
            output_dir: PathBuf::from("out"),
            input: None,
            ground_truth: None,
            cleaning: CleaningPolicy {
                interval_minutes: Some(population.interval_minutes),
                ..CleaningPolicy::default()
            },
            population,
            hard_cases: 0,
            season: SeasonChoice::Only(if pv { Season::Summer } else { Season::Winter }),
            mask: if pv { MaskChoice::Daylight } else { MaskChoice::Full },
            threshold: ThresholdChoice::Calibrate,
            method: MotifMethod::RefinedMotif,
            split_fraction: 0.75,
            split_seed: 42,
            learning_rate: 0.05,
            epochs: 2000,
            init_scale: 0.01,
            train_seed: 7,
            constrain_weights: false,
            decision_threshold: 0.5,
            counting_zeros: pv,
            zero_epsilon: None,
            load_duration: !pv,
            ld_q: 100,
            histogram_bins: 20,
            dump_distance_tables: false,
            workers: None,
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.population.scenario
    }

    pub fn input_path(&self) -> PathBuf {
        self.input.clone().unwrap_or_else(|| self.output_dir.join("consumers.csv"))
    }

    pub fn ground_truth_path(&self) -> PathBuf {
        self.ground_truth
            .clone()
            .unwrap_or_else(|| self.output_dir.join("ground_truth.csv"))
    }

    /// Directory holding one motif method's artifacts.
    pub fn method_dir(&self) -> PathBuf {
        self.output_dir.join(self.method.as_str())
    }

    pub fn baseline_dir(&self) -> PathBuf {
        self.output_dir.join("baselines")
    }

    pub fn mask_spec(&self) -> Result<MaskSpec> {
        self.mask.spec(self.population.interval_minutes)
    }

    /// Builds a configuration from `key = value` pairs applied in order after
    /// the `scenario` key.
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Result<Self> {
        let scenario = pairs
            .iter()
            .rev()
            .find(|(k, _)| k.as_ref() == "scenario")
            .map(|(_, v)| v.as_ref().parse::<Scenario>())
            .transpose()?
            .unwrap_or(Scenario::Pv);
        let mut cfg = RunConfig::for_scenario(scenario);
        for (k, v) in pairs {
            if k.as_ref() != "scenario" {
                cfg.set(k.as_ref(), v.as_ref())?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key. Unknown keys and malformed values are configuration
    /// errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let p = &mut self.population;
        match key.trim() {
            "scenario" => {
                let s: Scenario = v.parse()?;
                if s != p.scenario {
                    return Err(Error::config("scenario can only be chosen before other keys"));
                }
            }
            "output_dir" => self.output_dir = PathBuf::from(v),
            "input" => self.input = optional(v).map(PathBuf::from),
            "ground_truth" => self.ground_truth = optional(v).map(PathBuf::from),
            "n_consumers" => p.n_consumers = num(key, v)?,
            "positive_fraction" => p.positive_fraction = num(key, v)?,
            "days" => p.days = num(key, v)?,
            "interval_minutes" => {
                p.interval_minutes = num(key, v)?;
                self.cleaning.interval_minutes = Some(p.interval_minutes);
            }
            "seed" => p.seed = num(key, v)?,
            "start_date" => {
                p.start_date = NaiveDate::parse_from_str(v, "%Y-%m-%d")
                    .map_err(|_| Error::config(format!("start_date `{v}` is not YYYY-MM-DD")))?
            }
            "hemisphere" => {
                p.hemisphere = match v {
                    "north" => Hemisphere::North,
                    "south" => Hemisphere::South,
                    _ => return Err(Error::config(format!("hemisphere `{v}` is not north or south"))),
                }
            }
            "pv_capacity_min" => p.pv_capacity_range.0 = num(key, v)?,
            "pv_capacity_max" => p.pv_capacity_range.1 = num(key, v)?,
            "base_load_min" => p.base_load_scale_range.0 = num(key, v)?,
            "base_load_max" => p.base_load_scale_range.1 = num(key, v)?,
            "cloud_noise" => p.cloud_noise = num(key, v)?,
            "heating_boost_min" => p.heating_winter_boost_range.0 = num(key, v)?,
            "heating_boost_max" => p.heating_winter_boost_range.1 = num(key, v)?,
            "hot_water_probability" => p.hot_water_probability = num(key, v)?,
            "hard_cases" => self.hard_cases = num(key, v)?,
            "gap_fill_max_samples" => self.cleaning.gap_fill_max_samples = num(key, v)?,
            "align_midnight" => self.cleaning.align_midnight = flag(key, v)?,
            "season" => self.season = v.parse()?,
            "mask" => self.mask = v.parse()?,
            "threshold" => self.threshold = v.parse()?,
            "method" => self.method = v.parse().map_err(|e: Error| Error::config(e.to_string()))?,
            "split_fraction" => self.split_fraction = num(key, v)?,
            "split_seed" => self.split_seed = num(key, v)?,
            "learning_rate" => self.learning_rate = num(key, v)?,
            "epochs" => self.epochs = num(key, v)?,
            "init_scale" => self.init_scale = num(key, v)?,
            "train_seed" => self.train_seed = num(key, v)?,
            "constrain_weights" => self.constrain_weights = flag(key, v)?,
            "decision_threshold" => self.decision_threshold = num(key, v)?,
            "counting_zeros" => self.counting_zeros = flag(key, v)?,
            "zero_epsilon" => self.zero_epsilon = optional(v).map(|x| num(key, x)).transpose()?,
            "load_duration" => self.load_duration = flag(key, v)?,
            "ld_q" => self.ld_q = num(key, v)?,
            "histogram_bins" => self.histogram_bins = num(key, v)?,
            "dump_distance_tables" => self.dump_distance_tables = flag(key, v)?,
            "workers" => self.workers = optional(v).map(|x| num(key, x)).transpose()?,
            other => return Err(Error::config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.population.validate()?;
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::config(format!(
                "split_fraction must lie strictly between 0 and 1, got {}",
                self.split_fraction
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.ld_q == 0 || self.histogram_bins == 0 {
            return Err(Error::config("ld_q and histogram_bins must be positive"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers must be positive"));
        }
        self.mask_spec().map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }

    /// Every key with its resolved value, one per line.
    pub fn to_text(&self) -> String {
        let p = &self.population;
        let path = |x: &Option<PathBuf>| x.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        let opt = |x: Option<String>| x.unwrap_or_else(|| "none".into());
        let lines: Vec<(&str, String)> = vec![
            ("scenario", p.scenario.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("input", path(&self.input)),
            ("ground_truth", path(&self.ground_truth)),
            ("n_consumers", p.n_consumers.to_string()),
            ("positive_fraction", p.positive_fraction.to_string()),
            ("days", p.days.to_string()),
            ("interval_minutes", p.interval_minutes.to_string()),
            ("seed", p.seed.to_string()),
            ("start_date", p.start_date.format("%Y-%m-%d").to_string()),
            (
                "hemisphere",
                match p.hemisphere {
                    Hemisphere::North => "north".into(),
                    Hemisphere::South => "south".into(),
                },
            ),
            ("pv_capacity_min", p.pv_capacity_range.0.to_string()),
            ("pv_capacity_max", p.pv_capacity_range.1.to_string()),
            ("base_load_min", p.base_load_scale_range.0.to_string()),
            ("base_load_max", p.base_load_scale_range.1.to_string()),
            ("cloud_noise", p.cloud_noise.to_string()),
            ("heating_boost_min", p.heating_winter_boost_range.0.to_string()),
            ("heating_boost_max", p.heating_winter_boost_range.1.to_string()),
            ("hot_water_probability", p.hot_water_probability.to_string()),
            ("hard_cases", self.hard_cases.to_string()),
            ("gap_fill_max_samples", self.cleaning.gap_fill_max_samples.to_string()),
            ("align_midnight", self.cleaning.align_midnight.to_string()),
            ("season", self.season.to_string()),
            ("mask", self.mask.to_string()),
            ("threshold", self.threshold.to_string()),
            ("method", self.method.to_string()),
            ("split_fraction", self.split_fraction.to_string()),
            ("split_seed", self.split_seed.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("epochs", self.epochs.to_string()),
            ("init_scale", self.init_scale.to_string()),
            ("train_seed", self.train_seed.to_string()),
            ("constrain_weights", self.constrain_weights.to_string()),
            ("decision_threshold", self.decision_threshold.to_string()),
            ("counting_zeros", self.counting_zeros.to_string()),
            ("zero_epsilon", opt(self.zero_epsilon.map(|e| e.to_string()))),
            ("load_duration", self.load_duration.to_string()),
            ("ld_q", self.ld_q.to_string()),
            ("histogram_bins", self.histogram_bins.to_string()),
            ("dump_distance_tables", self.dump_distance_tables.to_string()),
            ("workers", opt(self.workers.map(|w| w.to_string()))),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn optional(v: &str) -> Option<&str> {
    (!v.is_empty() && v != "none").then_some(v)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("`{key}` has an invalid value `{v}`")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::config(format!("`{key}` expects true or false, got `{v}`"))),
    }
}

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i as u64 + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parses `key=value` command-line overrides.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::usage(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Loads an optional config file and applies overrides on top.
pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut pairs = match path {
        Some(p) => parse_pairs(&read_to_string(p)?)?,
        None => Vec::new(),
    };
    pairs.extend(overrides.iter().cloned());
    RunConfig::from_pairs(&pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_scenario() {
        let pv = RunConfig::from_pairs::<&str, &str>(&[]).unwrap();
        assert_eq!(pv.scenario(), Scenario::Pv);
        assert_eq!(pv.mask, MaskChoice::Daylight);
        let heating = RunConfig::from_pairs(&[("epochs", "10"), ("scenario", "heating")]).unwrap();
        assert_eq!(heating.scenario(), Scenario::Heating);
        assert_eq!(heating.mask, MaskChoice::Full);
        assert_eq!(heating.epochs, 10);
        assert_eq!(heating.season, SeasonChoice::Only(Season::Winter));
    }

    #[test]
    fn text_roundtrip() {
        let mut cfg = RunConfig::for_scenario(Scenario::Heating);
        cfg.mask = MaskChoice::Window(NaiveTime::from_hms_opt(9, 30, 0).unwrap(), NaiveTime::from_hms_opt(15, 0, 0).unwrap());
        cfg.threshold = ThresholdChoice::Fixed(0.125);
        cfg.zero_epsilon = Some(0.001);
        cfg.workers = Some(3);
        cfg.input = Some(PathBuf::from("data/in.csv"));
        let again = RunConfig::from_pairs(&parse_pairs(&cfg.to_text()).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn bad_values() {
        assert!(matches!(RunConfig::from_pairs(&[("nope", "1")]), Err(Error::Config(_))));
        assert!(RunConfig::from_pairs(&[("split_fraction", "1.0")]).is_err());
        assert!(RunConfig::from_pairs(&[("mask", "10:00")]).is_err());
        assert!(RunConfig::from_pairs(&[("threshold", "-1")]).is_err());
        assert!(RunConfig::from_pairs(&[("align_midnight", "maybe")]).is_err());
        assert!(parse_pairs("a = 1\njunk\n").is_err());
        assert_eq!(parse_pairs("# c\n\na = 1 # x\n").unwrap(), vec![("a".into(), "1".into())]);
        assert!(parse_override("novalue").is_err());
    }
}
