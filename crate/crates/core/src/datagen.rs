//! Deterministic synthetic smart-meter populations with ground truth.
//!
//! Two scenarios are produced. In `pv`, positives own rooftop PV and the
//! meter records only grid import, so clear-sky middays import little or
//! nothing. In `heating`, positives add a temperature-driven electric heating
//! load that dominates winter days.
//!
//! Every consumer draws from its own ChaCha stream derived from the seed and
//! its index, so adding consumers never changes existing ones. A separate
//! stream drives the shared daily temperature.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fsutil::{require_file, write_atomic};
use crate::series::{ConsumerSeries, Hemisphere};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Pv,
    Heating,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Pv => "pv",
            Scenario::Heating => "heating",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pv" | "solar" => Ok(Scenario::Pv),
            "heating" => Ok(Scenario::Heating),
            other => Err(Error::config(format!("unknown scenario `{other}` (pv or heating)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PopulationConfig {
    pub scenario: Scenario,
    pub n_consumers: usize,
    pub positive_fraction: f64,
    pub days: usize,
    pub interval_minutes: u32,
    pub seed: u64,
    pub start_date: NaiveDate,
    pub hemisphere: Hemisphere,
    /// Installed PV capacity of positives, kW.
    pub pv_capacity_range: (f64, f64),
    /// Per-consumer load multiplier, roughly the mean demand in kW.
    pub base_load_scale_range: (f64, f64),
    /// Probability that a day is cloudy.
    pub cloud_noise: f64,
    /// Winter load multiplier range of heating positives.
    pub heating_winter_boost_range: (f64, f64),
    /// Share of PV-scenario consumers with an off-peak hot water system.
    pub hot_water_probability: f64,
}

impl PopulationConfig {
    /// 600 consumers, half with PV, 90 summer days from 1 December in the
    /// southern hemisphere at 30-minute resolution.
    pub fn pv() -> Self {
        PopulationConfig {
            scenario: Scenario::Pv,
            n_consumers: 600,
            positive_fraction: 0.5,
            days: 90,
            interval_minutes: 30,
            seed: 2023,
            start_date: NaiveDate::from_ymd_opt(2023, 12, 1).expect("valid date"),
            hemisphere: Hemisphere::South,
            pv_capacity_range: (2.0, 8.0),
            base_load_scale_range: (0.3, 1.2),
            cloud_noise: 0.3,
            heating_winter_boost_range: (1.6, 3.0),
            hot_water_probability: 0.35,
        }
    }

    /// 600 northern-hemisphere consumers, 15% with electric heating, from
    /// 1 July through 31 January so both a summer and a winter slice exist.
    pub fn heating() -> Self {
        PopulationConfig {
            scenario: Scenario::Heating,
            positive_fraction: 0.15,
            days: 215,
            seed: 1052,
            start_date: NaiveDate::from_ymd_opt(2023, 7, 1).expect("valid date"),
            hemisphere: Hemisphere::North,
            hot_water_probability: 0.0,
            ..PopulationConfig::pv()
        }
    }

    pub fn for_scenario(scenario: Scenario) -> Self {
        match scenario {
            Scenario::Pv => Self::pv(),
            Scenario::Heating => Self::heating(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |name: &str, (lo, hi): (f64, f64), min: f64| {
            if !(lo.is_finite() && hi.is_finite() && min <= lo && lo <= hi) {
                return Err(Error::config(format!("{name} must satisfy {min} <= min <= max, got [{lo}, {hi}]")));
            }
            Ok(())
        };
        ordered("pv_capacity_range", self.pv_capacity_range, 0.0)?;
        ordered("base_load_scale_range", self.base_load_scale_range, 0.0)?;
        ordered("heating_winter_boost_range", self.heating_winter_boost_range, 1.0)?;
        if self.n_consumers < 2 {
            return Err(Error::config("n_consumers must be at least 2"));
        }
        for (name, v) in [
            ("positive_fraction", self.positive_fraction),
            ("cloud_noise", self.cloud_noise),
            ("hot_water_probability", self.hot_water_probability),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.days < 1 {
            return Err(Error::config("days must be positive"));
        }
        crate::mask::samples_per_day(self.interval_minutes).map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }

    /// Whether consumer `index` belongs to the positive class. Positives are
    /// spread evenly so any prefix of the population keeps the ratio.
    pub fn is_positive(&self, index: usize) -> bool {
        let f = self.positive_fraction;
        ((index + 1) as f64 * f).floor() > (index as f64 * f).floor()
    }

    pub fn consumer_id(index: usize) -> String {
        format!("c{index:05}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsumerTruth {
    pub label: bool,
    /// PV capacity in kW, or the heating multiplier; 0 for negatives.
    pub capacity_or_multiplier: f64,
    pub total_generation: f64,
    /// Load (not import) between sunrise and sunset, kWh.
    pub total_daytime_consumption: f64,
    /// Injected low-ratio PV owner. Kept in memory only.
    pub hard_case: bool,
}

/// Per-consumer labels and metadata in consumer order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    entries: Vec<(String, ConsumerTruth)>,
    index: HashMap<String, usize>,
}

pub const GROUND_TRUTH_HEADER: &str =
    "consumer_id,label,capacity_or_multiplier,total_generation,total_daytime_consumption";

impl GroundTruth {
    pub fn from_entries(entries: impl IntoIterator<Item = (String, ConsumerTruth)>) -> Result<Self> {
        let mut gt = GroundTruth::default();
        for (id, t) in entries {
            if gt.index.insert(id.clone(), gt.entries.len()).is_some() {
                return Err(Error::Structural(format!("consumer {id} appears twice in ground truth")));
            }
            gt.entries.push((id, t));
        }
        Ok(gt)
    }

    pub fn get(&self, consumer_id: &str) -> Option<&ConsumerTruth> {
        self.index.get(consumer_id).map(|&i| &self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ConsumerTruth)> {
        self.entries.iter().map(|(id, t)| (id.as_str(), t))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            writeln!(w, "{GROUND_TRUTH_HEADER}")?;
            for (id, t) in &self.entries {
                writeln!(
                    w,
                    "{id},{},{},{},{}",
                    u8::from(t.label),
                    t.capacity_or_multiplier,
                    t.total_generation,
                    t.total_daytime_consumption
                )?;
            }
            Ok(())
        })
    }

    /// Reads a ground-truth file. Only `consumer_id` and `label` are
    /// required; missing numeric columns read as 0.
    pub fn read_csv(path: &Path) -> Result<Self> {
        require_file(path)?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::csv(path, e))?;
        let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
        let column = |name: &str| headers.iter().position(|h| h == name);
        let (Some(id_col), Some(label_col)) = (column("consumer_id"), column("label")) else {
            return Err(Error::Parse {
                line: 1,
                message: "ground truth needs `consumer_id` and `label` columns".into(),
            });
        };
        let optional = ["capacity_or_multiplier", "total_generation", "total_daytime_consumption"].map(column);
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |what: &str| Error::Parse {
                line,
                message: format!("bad {what}"),
            };
            let num = |k: usize, what: &str| match optional[k] {
                Some(c) => record.get(c).unwrap_or("").parse::<f64>().map_err(|_| bad(what)),
                None => Ok(0.0),
            };
            let label = match record.get(label_col).unwrap_or("") {
                "1" | "true" => true,
                "0" | "false" => false,
                _ => return Err(bad("label")),
            };
            entries.push((
                record.get(id_col).unwrap_or("").to_string(),
                ConsumerTruth {
                    label,
                    capacity_or_multiplier: num(0, "capacity_or_multiplier")?,
                    total_generation: num(1, "total_generation")?,
                    total_daytime_consumption: num(2, "total_daytime_consumption")?,
                    hard_case: false,
                },
            ));
        }
        GroundTruth::from_entries(entries)
    }
}

/// Hours of daylight on `date`: a cosine around 12 h peaking at the local
/// summer solstice.
fn day_length(date: NaiveDate, hemisphere: Hemisphere) -> f64 {
    let (amplitude, solstice) = match hemisphere {
        Hemisphere::South => (2.5, 355.0),
        Hemisphere::North => (4.5, 172.0),
    };
    let doy = date.ordinal() as f64;
    12.0 + amplitude * (2.0 * PI * (doy - solstice) / 365.0).cos()
}

/// Sunrise and sunset in hours, symmetric around 12:30.
fn daylight(date: NaiveDate, hemisphere: Hemisphere) -> (f64, f64) {
    let half = day_length(date, hemisphere) / 2.0;
    (12.5 - half, 12.5 + half)
}

fn gaussian(h: f64, centre: f64, width: f64) -> f64 {
    let z = (h - centre) / width;
    (-0.5 * z * z).exp()
}

/// Daily temperatures (deg C) shared by every consumer.
fn temperatures(cfg: &PopulationConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    let noise = Normal::new(0.0, 2.0).expect("valid normal");
    (0..cfg.days)
        .map(|d| {
            let date = cfg.start_date + chrono::Duration::days(d as i64);
            let doy = date.ordinal() as f64;
            let peak = match cfg.hemisphere {
                Hemisphere::North => 200.0,
                Hemisphere::South => 18.0,
            };
            8.5 + 8.5 * (2.0 * PI * (doy - peak) / 365.0).cos() + noise.sample(&mut rng)
        })
        .collect()
}

const HEATING_BASE_C: f64 = 15.5;
const PV_DERATE: f64 = 0.8;

/// Overrides that turn a PV owner into a low generation-to-demand case.
#[derive(Clone, Copy)]
struct HardCase {
    capacity_kw: f64,
    midday_factor: f64,
}

/// Rounds to whole watt-hours, the resolution of typical meter exports.
fn meter_round(kwh: f64) -> f64 {
    (kwh * 1000.0).round() / 1000.0
}

fn simulate_consumer(
    cfg: &PopulationConfig,
    index: usize,
    temps: &[f64],
    hard: Option<HardCase>,
) -> (ConsumerSeries, ConsumerTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64 + 1);
    let std_normal = Normal::<f64>::new(0.0, 1.0).expect("valid normal");

    let label = cfg.is_positive(index);
    let (lo, hi) = cfg.base_load_scale_range;
    let mut scale = rng.gen_range(lo..=hi);
    let night = rng.gen_range(0.2..0.4);
    let morning_at = rng.gen_range(6.5..8.5);
    let morning_amp = rng.gen_range(0.5..1.5);
    let morning_width = rng.gen_range(0.7..1.5);
    let evening_at = rng.gen_range(17.5..20.5);
    let evening_amp = rng.gen_range(1.0..2.5);
    let evening_width = rng.gen_range(1.0..2.0);
    let mut midday = rng.gen_range(0.3..0.8);
    let weekend_boost = rng.gen_range(1.1..1.5);
    // Lighting and appliances grow in cold weather for every household.
    let winter_appliances = rng.gen_range(0.0..0.6);
    let hot_water = if rng.gen_bool(cfg.hot_water_probability) {
        rng.gen_range(2.0..3.6)
    } else {
        0.0
    };
    let (cap_lo, cap_hi) = cfg.pv_capacity_range;
    let mut capacity = rng.gen_range(cap_lo..=cap_hi);
    let (boost_lo, boost_hi) = cfg.heating_winter_boost_range;
    let multiplier = rng.gen_range(boost_lo..=boost_hi);
    if let Some(h) = hard {
        capacity = h.capacity_kw;
        scale = hi;
        midday *= h.midday_factor;
    }

    let pv = label && cfg.scenario == Scenario::Pv;
    let heating = label && cfg.scenario == Scenario::Heating;
    let m = (1440 / cfg.interval_minutes) as usize;
    let dt = cfg.interval_minutes as f64 / 60.0;

    let mut values = Vec::with_capacity(cfg.days * m);
    let mut total_generation = 0.0;
    let mut total_daytime = 0.0;
    for (d, &temp) in temps.iter().enumerate() {
        let date = cfg.start_date + chrono::Duration::days(d as i64);
        let (sunrise, sunset) = daylight(date, cfg.hemisphere);
        let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
        let doy = date.ordinal() as f64;
        let solstice = match cfg.hemisphere {
            Hemisphere::South => 355.0,
            Hemisphere::North => 172.0,
        };
        let seasonal = 0.85 + 0.15 * (2.0 * PI * (doy - solstice) / 365.0).cos();
        let cloud = if rng.gen_bool(cfg.cloud_noise) {
            rng.gen_range(0.1..0.6)
        } else {
            rng.gen_range(0.85..1.0)
        };
        let heating_degrees = (HEATING_BASE_C - temp).max(0.0);
        let midday_level = if weekend { midday * weekend_boost } else { midday };

        for t in 0..m {
            let h = (t as f64 + 0.5) * dt;
            let shape = night
                + morning_amp * gaussian(h, morning_at, morning_width)
                + evening_amp * gaussian(h, evening_at, evening_width)
                + midday_level * gaussian(h, 13.0, 2.5);
            let noise = 1.0 + 0.15 * std_normal.sample(&mut rng).clamp(-2.5, 2.5);
            let cold = 1.0 + winter_appliances * heating_degrees / HEATING_BASE_C;
            let mut load_kw = scale * shape * noise * cold;
            if h < 2.0 {
                load_kw += hot_water;
            }
            if heating {
                // Thermostatic heating runs hardest overnight and in the
                // early morning.
                let profile = if !(7.0..22.0).contains(&h) { 1.0 } else { 0.55 };
                load_kw += (multiplier - 1.0) * scale * heating_degrees / 12.0 * profile;
            }
            let load = load_kw * dt;

            let mut generation = 0.0;
            if pv && h > sunrise && h < sunset {
                let bell = (PI * (h - sunrise) / (sunset - sunrise)).sin();
                generation = capacity * PV_DERATE * seasonal * cloud * bell * dt;
            }
            if h > sunrise && h < sunset {
                total_daytime += load;
            }
            total_generation += generation;
            values.push(meter_round((load - generation).max(0.0)));
        }
    }

    let start = cfg.start_date.and_hms_opt(0, 0, 0).expect("midnight");
    let mut series = ConsumerSeries::new(PopulationConfig::consumer_id(index), start, cfg.interval_minutes, values);
    series.label = Some(label);
    let truth = ConsumerTruth {
        label,
        capacity_or_multiplier: match (pv, heating) {
            (true, _) => capacity,
            (_, true) => multiplier,
            _ => 0.0,
        },
        total_generation,
        total_daytime_consumption: total_daytime,
        hard_case: hard.is_some(),
    };
    (series, truth)
}

fn generate(
    cfg: &PopulationConfig,
    hard_cases: usize,
    exec: Execution,
) -> Result<(Vec<ConsumerSeries>, GroundTruth)> {
    cfg.validate()?;
    let temps = temperatures(cfg);
    let positives: Vec<usize> = (0..cfg.n_consumers).filter(|&i| cfg.is_positive(i)).collect();
    if hard_cases > positives.len() {
        return Err(Error::config(format!(
            "{hard_cases} hard cases requested but only {} positives exist",
            positives.len()
        )));
    }
    let hard_set = &positives[..hard_cases];
    let hard = HardCase {
        capacity_kw: 1.0,
        midday_factor: 2.0,
    };
    let out = exec.map_range(cfg.n_consumers, |i| {
        simulate_consumer(cfg, i, &temps, hard_set.contains(&i).then_some(hard))
    });
    let mut series = Vec::with_capacity(out.len());
    let mut truth = Vec::with_capacity(out.len());
    for (s, t) in out {
        truth.push((s.consumer_id.clone(), t));
        series.push(s);
    }
    Ok((series, GroundTruth::from_entries(truth)?))
}

pub fn simulate_population(cfg: &PopulationConfig, exec: Execution) -> Result<(Vec<ConsumerSeries>, GroundTruth)> {
    generate(cfg, 0, exec)
}

/// Like [`simulate_population`], but the first `k` PV owners get a 1 kW
/// system, the largest base load and doubled midday demand.
pub fn emit_low_ratio_cohort(
    cfg: &PopulationConfig,
    k: usize,
    exec: Execution,
) -> Result<(Vec<ConsumerSeries>, GroundTruth)> {
    if k > 0 && cfg.scenario != Scenario::Pv {
        return Err(Error::config("the low-ratio cohort only exists in the pv scenario"));
    }
    generate(cfg, k, exec)
}
