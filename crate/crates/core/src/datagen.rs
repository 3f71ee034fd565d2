//! Synthetic variety-trial datasets: years crossed with centers and varieties.
//!
//! Each year a fixed number of centers is drawn without replacement. Control
//! varieties are grown every year; a batch of test varieties enters each year
//! and stays for `1 + Poisson(mean_persistence - 1)` years (cut at the last
//! year). Every (year, center, variety) cell yields one observation unless it
//! is deleted with probability `missing_fraction`. All terms except the grand
//! mean are random.

use std::collections::HashSet;
use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{Factor, MixedModelDataset};
use crate::error::{Error, Result};

/// Names of the random terms, in the order of the variance components.
pub const RANDOM_TERMS: [&str; 6] = ["year", "center", "variety", "year.center", "year.variety", "variety.center"];

const GRAND_MEAN: f64 = 10.0;

// independent generator streams
const STREAM_CENTERS: u64 = 1;
const STREAM_LIFETIMES: u64 = 2;
const STREAM_MISSING: u64 = 3;
const STREAM_EFFECTS: u64 = 10;
const STREAM_RESIDUAL: u64 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub years: usize,
    pub centers: usize,
    pub centers_per_year_fraction: f64,
    pub control_varieties: usize,
    pub new_varieties_per_year: usize,
    pub mean_persistence: f64,
    pub missing_fraction: f64,
    /// One per entry of [`RANDOM_TERMS`], then the residual.
    pub variance_components: Vec<f64>,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self::preset("prob1").expect("prob1 is a preset")
    }
}

impl TrialConfig {
    /// Configurations shaped like the ten benchmark trial series.
    pub fn preset(name: &str) -> Option<Self> {
        // years, centers, centers per year, controls, new per year
        let table: [(usize, usize, usize, usize, usize); 10] = [
            (12, 22, 11, 10, 10),
            (15, 25, 12, 10, 10),
            (22, 25, 12, 12, 8),
            (25, 25, 12, 12, 10),
            (25, 25, 12, 15, 15),
            (25, 35, 17, 15, 15),
            (30, 35, 17, 20, 15),
            (30, 35, 17, 20, 20),
            (35, 40, 20, 20, 20),
            (40, 50, 25, 20, 20),
        ];
        let k: usize = name.strip_prefix("prob")?.parse().ok()?;
        let &(years, centers, per_year, controls, new) = table.get(k.checked_sub(1)?)?;
        Some(Self {
            years,
            centers,
            centers_per_year_fraction: per_year as f64 / centers as f64,
            control_varieties: controls,
            new_varieties_per_year: new,
            mean_persistence: 6.0,
            missing_fraction: 0.1,
            variance_components: vec![4.0, 1.0, 2.0, 1.5, 0.5, 0.3, 1.0],
            seed: k as u64,
        })
    }

    pub fn preset_names() -> impl Iterator<Item = String> {
        (1..=10).map(|k| format!("prob{k}"))
    }

    /// Centers sampled per year.
    pub fn centers_per_year(&self) -> usize {
        // guard against 0.48 * 25 = 12.000000000000002
        ((self.centers_per_year_fraction * self.centers as f64 - 1e-9).ceil() as usize).clamp(1, self.centers)
    }

    pub fn total_varieties(&self) -> usize {
        self.control_varieties + self.years * self.new_varieties_per_year
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::ConfigInvalid(m));
        if self.years == 0 || self.centers == 0 || self.control_varieties == 0 {
            return fail("years, centers and control_varieties must be at least 1".into());
        }
        let f = self.centers_per_year_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return fail(format!("centers_per_year_fraction {f} not in (0, 1]"));
        }
        let m = self.missing_fraction;
        if !(0.0..1.0).contains(&m) {
            return fail(format!("missing_fraction {m} not in [0, 1)"));
        }
        if !(self.mean_persistence.is_finite() && self.mean_persistence >= 1.0) {
            return fail(format!("mean_persistence {} below 1", self.mean_persistence));
        }
        if self.variance_components.len() != RANDOM_TERMS.len() + 1 {
            return fail(format!(
                "expected {} variance components, got {}",
                RANDOM_TERMS.len() + 1,
                self.variance_components.len()
            ));
        }
        if let Some(v) = self.variance_components.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return fail(format!("variance component {v} is not positive"));
        }
        Ok(())
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::ConfigInvalid(format!("bad value {value:?} for {key}"));
        let value = value.trim();
        match key.trim() {
            "years" => self.years = value.parse().map_err(|_| bad())?,
            "centers" => self.centers = value.parse().map_err(|_| bad())?,
            "centers_per_year_fraction" => self.centers_per_year_fraction = value.parse().map_err(|_| bad())?,
            "control_varieties" => self.control_varieties = value.parse().map_err(|_| bad())?,
            "new_varieties_per_year" => self.new_varieties_per_year = value.parse().map_err(|_| bad())?,
            "mean_persistence" => self.mean_persistence = value.parse().map_err(|_| bad())?,
            "missing_fraction" => self.missing_fraction = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "variance_components" => {
                self.variance_components = value
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad())?
            }
            other => return Err(Error::ConfigInvalid(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines over the defaults. `#` starts a comment. A
    /// `preset=probK` line resets every field to that preset.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::ConfigInvalid(format!("expected key=value, got {line:?}")))?;
            if k.trim() == "preset" {
                cfg = Self::preset(v.trim())
                    .ok_or_else(|| Error::ConfigInvalid(format!("unknown preset {:?}", v.trim())))?;
            } else {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }
}

impl fmt::Display for TrialConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "years={}", self.years)?;
        writeln!(f, "centers={}", self.centers)?;
        writeln!(f, "centers_per_year_fraction={}", self.centers_per_year_fraction)?;
        writeln!(f, "control_varieties={}", self.control_varieties)?;
        writeln!(f, "new_varieties_per_year={}", self.new_varieties_per_year)?;
        writeln!(f, "mean_persistence={}", self.mean_persistence)?;
        writeln!(f, "missing_fraction={}", self.missing_fraction)?;
        let vc: Vec<String> = self.variance_components.iter().map(|v| v.to_string()).collect();
        writeln!(f, "variance_components={}", vc.join(","))?;
        writeln!(f, "seed={}", self.seed)
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Poisson variate by sequential inversion of the distribution function.
fn poisson(rng: &mut impl Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let u: f64 = rng.random();
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0;
    while u > cdf && k < 10_000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p == 0.0 {
            break;
        }
    }
    k
}

fn label(prefix: char, i: usize, width: usize) -> String {
    format!("{prefix}{:0width$}", i + 1)
}

fn width(count: usize, min: usize) -> usize {
    count.to_string().len().max(min)
}

/// Draws one dataset. The result depends only on `config`.
pub fn generate(config: &TrialConfig) -> Result<MixedModelDataset> {
    config.validate()?;
    let years = config.years;
    let nv = config.total_varieties();
    let per_year = config.centers_per_year();

    let mut r_centers = rng(config.seed, STREAM_CENTERS);
    let year_centers: Vec<Vec<usize>> = (0..years)
        .map(|_| {
            let mut c = sample(&mut r_centers, config.centers, per_year).into_vec();
            c.sort_unstable();
            c
        })
        .collect();

    // first and last year (inclusive) of each variety
    let mut r_life = rng(config.seed, STREAM_LIFETIMES);
    let mut span = vec![(0, years - 1); config.control_varieties];
    for t in 0..years {
        for _ in 0..config.new_varieties_per_year {
            let life = 1 + poisson(&mut r_life, config.mean_persistence - 1.0);
            span.push((t, (t + life - 1).min(years - 1)));
        }
    }

    let mut r_miss = rng(config.seed, STREAM_MISSING);
    let mut cells = Vec::new();
    for (t, centers) in year_centers.iter().enumerate() {
        for &c in centers {
            for (v, &(first, last)) in span.iter().enumerate() {
                if (first..=last).contains(&t) {
                    let drop = r_miss.random::<f64>() < config.missing_fraction;
                    if !drop {
                        cells.push((t, c, v));
                    }
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::ConfigInvalid("every observation was removed as missing".into()));
    }

    let wy = width(years, 2);
    let wc = width(config.centers, 2);
    let wv = width(nv, 4);
    let mut labels: Vec<Vec<String>> = vec![Vec::with_capacity(cells.len()); RANDOM_TERMS.len()];
    for &(t, c, v) in &cells {
        let (ly, lc, lv) = (label('Y', t, wy), label('C', c, wc), label('V', v, wv));
        labels[3].push(format!("{ly}.{lc}"));
        labels[4].push(format!("{ly}.{lv}"));
        labels[5].push(format!("{lv}.{lc}"));
        labels[0].push(ly);
        labels[1].push(lc);
        labels[2].push(lv);
    }
    let factors: Vec<Factor> = RANDOM_TERMS
        .iter()
        .zip(&labels)
        .map(|(name, l)| Factor::from_labels(*name, l))
        .collect();

    let vc = &config.variance_components;
    let mut y = vec![GRAND_MEAN; cells.len()];
    for (j, f) in factors.iter().enumerate() {
        let mut r = rng(config.seed, STREAM_EFFECTS + j as u64);
        let sd = vc[j].sqrt();
        let effects: Vec<f64> = (0..f.n_levels())
            .map(|_| sd * r.sample::<f64, _>(StandardNormal))
            .collect();
        for (yo, &lvl) in y.iter_mut().zip(&f.index) {
            *yo += effects[lvl];
        }
    }
    let mut r = rng(config.seed, STREAM_RESIDUAL);
    let sd = vc[RANDOM_TERMS.len()].sqrt();
    for yo in &mut y {
        *yo += sd * r.sample::<f64, _>(StandardNormal);
    }

    MixedModelDataset::with_intercept(y, factors)
}

/// Level counts and ratios of a trial dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSummary {
    pub years: usize,
    pub centers: usize,
    pub varieties: usize,
    pub year_center: usize,
    pub year_variety: usize,
    pub variety_center: usize,
    pub units: usize,
    /// Mean varieties per year.
    pub varieties_per_year: f64,
    /// Mean years per variety.
    pub years_per_variety: f64,
    /// Varieties present in every year.
    pub continuous_varieties: usize,
}

impl DesignSummary {
    pub const HEADER: [&'static str; 10] = ["year", "center", "variety", "y.c", "y.v", "v.c", "units", "v/y", "y/v", "c.v"];

    /// Random-effect count plus one for the grand mean.
    pub fn effects(&self) -> usize {
        1 + self.years + self.centers + self.varieties + self.year_center + self.year_variety + self.variety_center
    }

    pub fn row(&self) -> Vec<String> {
        vec![
            self.years.to_string(),
            self.centers.to_string(),
            self.varieties.to_string(),
            self.year_center.to_string(),
            self.year_variety.to_string(),
            self.variety_center.to_string(),
            self.units.to_string(),
            format!("{:.1}", self.varieties_per_year),
            format!("{:.1}", self.years_per_variety),
            self.continuous_varieties.to_string(),
        ]
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Counts for the factors named as in [`RANDOM_TERMS`]; absent factors count 0.
pub fn design_summary(d: &MixedModelDataset) -> DesignSummary {
    let levels = |name: &str| d.random_factor(name).map_or(0, Factor::n_levels);
    let years = levels("year");
    let varieties = levels("variety");
    let year_variety = levels("year.variety");
    let continuous_varieties = match (d.random_factor("year"), d.random_factor("variety")) {
        (Some(fy), Some(fv)) => {
            let pairs: HashSet<(usize, usize)> = fy.index.iter().copied().zip(fv.index.iter().copied()).collect();
            let mut per_variety = vec![0usize; fv.n_levels()];
            pairs.iter().for_each(|&(_, v)| per_variety[v] += 1);
            per_variety.iter().filter(|&&k| k == years).count()
        }
        _ => 0,
    };
    DesignSummary {
        years,
        centers: levels("center"),
        varieties,
        year_center: levels("year.center"),
        year_variety,
        variety_center: levels("variety.center"),
        units: d.n(),
        varieties_per_year: ratio(year_variety, years),
        years_per_variety: ratio(year_variety, varieties),
        continuous_varieties,
    }
}
