//! Fuel-system test scenarios and synthetic anomaly injection.
//!
//! Each scenario relates `FuelRate` to one or two companion channels. A case
//! lists a direction per channel; cases marked anomalous describe co-movements
//! that should not happen in a healthy vehicle and are the ones injected.
//! The non-anomalous cases describe ordinary co-movements and are never
//! injected.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, CoreResult};
use crate::schema::ChannelSchema;
use crate::window::Label;

/// Values are kept inside the scaled working range.
pub const BOUNDS: (f64, f64) = (-1.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    Steady,
    Up,
    Down,
}

impl Direction {
    pub fn symbol(self) -> char {
        match self {
            Direction::Steady => '=',
            Direction::Up => '+',
            Direction::Down => '-',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioCase {
    pub scenario_id: u8,
    pub case_id: u8,
    /// Channels the scenario touches; all others are implicitly steady.
    pub directions: Vec<(String, Direction)>,
    pub is_anomaly: bool,
}

impl ScenarioCase {
    pub fn direction(&self, channel: &str) -> Direction {
        self.directions
            .iter()
            .find(|(n, _)| n == channel)
            .map_or(Direction::Steady, |(_, d)| *d)
    }
}

const S1: [&str; 3] = ["FuelRate", "AccelPedalPos", "TrSelGr"];
const S2: [&str; 2] = ["FuelRate", "IntManfTemp"];
const S3: [&str; 2] = ["FuelRate", "InjCtlPres"];

/// All 21 cases ordered by (scenario, case).
pub fn catalog() -> Vec<ScenarioCase> {
    use Direction::{Down as D, Steady as S, Up as U};
    let s1: [([Direction; 3], bool); 7] = [
        ([S, S, S], false),
        ([S, D, D], true),
        ([S, U, D], true),
        ([U, U, U], false),
        ([U, D, D], true),
        ([D, U, U], true),
        ([D, D, D], false),
    ];
    let s2: [([Direction; 2], bool); 7] = [
        ([S, S], false),
        ([S, U], true),
        ([S, D], true),
        ([U, D], false),
        ([D, U], true),
        ([U, U], true),
        ([D, D], true),
    ];
    let s3: [([Direction; 2], bool); 7] = [
        ([S, S], false),
        ([S, U], true),
        ([S, D], true),
        ([U, D], true),
        ([D, U], true),
        ([U, U], false),
        ([D, D], false),
    ];
    fn rows<'a, const N: usize>(
        scenario_id: u8,
        names: [&'static str; N],
        table: &'a [([Direction; N], bool)],
    ) -> impl Iterator<Item = ScenarioCase> + 'a {
        table
            .iter()
            .enumerate()
            .map(move |(i, (dirs, is_anomaly))| ScenarioCase {
                scenario_id,
                case_id: i as u8 + 1,
                directions: names
                    .iter()
                    .map(|n| n.to_string())
                    .zip(dirs.iter().copied())
                    .collect(),
                is_anomaly: *is_anomaly,
            })
    }
    rows(1, S1, &s1)
        .chain(rows(2, S2, &s2))
        .chain(rows(3, S3, &s3))
        .collect()
}

pub fn anomalous_cases() -> Vec<ScenarioCase> {
    catalog().into_iter().filter(|c| c.is_anomaly).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MagnitudeSampling {
    /// Draw uniformly from the listed magnitudes.
    #[default]
    Set,
    /// Draw uniformly from `[min, max)` of the listed magnitudes.
    Interval,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct InjectionConfig {
    pub rate: f64,
    pub magnitudes: Vec<f64>,
    pub sampling: MagnitudeSampling,
    pub seed: u64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self {
            rate: 0.2,
            magnitudes: vec![1.0, 1.5],
            sampling: MagnitudeSampling::Set,
            seed: 0,
        }
    }
}

impl InjectionConfig {
    pub fn validate(&self) -> CoreResult<()> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(CoreError::Config(
                "injection rate must lie in (0, 1)".into(),
            ));
        }
        if self.magnitudes.is_empty()
            || self
                .magnitudes
                .iter()
                .any(|m| !(*m > 0.0) || !m.is_finite())
        {
            return Err(CoreError::Config(
                "magnitudes must be non-empty and positive".into(),
            ));
        }
        Ok(())
    }

    pub fn corrupt_count(&self, n: usize) -> usize {
        libm::floor(self.rate * n as f64) as usize
    }

    fn draw_magnitude<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.sampling {
            MagnitudeSampling::Set => self.magnitudes[rng.gen_range(0..self.magnitudes.len())],
            MagnitudeSampling::Interval => {
                let lo = self
                    .magnitudes
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                let hi = self
                    .magnitudes
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                if hi > lo {
                    rng.gen_range(lo..hi)
                } else {
                    lo
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelChange {
    pub name: String,
    pub before: f64,
    pub after: f64,
}

/// Ground truth for one corrupted window.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InjectionRecord {
    pub window_index: usize,
    pub scenario: u8,
    pub case: u8,
    pub magnitude: f64,
    pub channels: Vec<ChannelChange>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub targets: Vec<f64>,
    pub labels: Vec<Label>,
    pub manifest: Vec<InjectionRecord>,
}

impl Injection {
    /// Corrupted windows per scenario id.
    pub fn composition(&self) -> alloc::collections::BTreeMap<u8, usize> {
        let mut out = alloc::collections::BTreeMap::new();
        for r in &self.manifest {
            *out.entry(r.scenario).or_insert(0) += 1;
        }
        out
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent uniform draws over `scenario_ids`.
pub fn assign_over(n_corrupt: usize, scenario_ids: &[u8], seed: u64) -> Vec<u8> {
    let mut rng = rng_for(seed, 1);
    (0..n_corrupt)
        .map(|_| scenario_ids[rng.gen_range(0..scenario_ids.len())])
        .collect()
}

/// Independent uniform draws over scenarios 1, 2 and 3.
pub fn assign_scenarios(n_corrupt: usize, seed: u64) -> Vec<u8> {
    assign_over(n_corrupt, &[1, 2, 3], seed)
}

/// Corrupts the targets of `floor(rate * N)` randomly chosen windows.
///
/// Each chosen window gets a scenario, then one of that scenario's anomalous
/// cases and a magnitude `m`; every `Up` channel becomes `clamp(v + m)` and
/// every `Down` channel `clamp(v - m)`. Steady channels are not written.
pub fn inject(
    targets: &[f64],
    schema: &ChannelSchema,
    cfg: &InjectionConfig,
    cases: &[ScenarioCase],
) -> CoreResult<Injection> {
    cfg.validate()?;
    if cases.is_empty() {
        return Err(CoreError::Config("no anomalous cases to inject".into()));
    }
    if let Some(c) = cases.iter().find(|c| !c.is_anomaly) {
        return Err(CoreError::Config(alloc::format!(
            "scenario {} case {} is not anomalous and cannot be injected",
            c.scenario_id,
            c.case_id
        )));
    }
    let p = schema.feature_count();
    if targets.len() % p != 0 {
        return Err(CoreError::shape(
            alloc::format!("N x {p} targets"),
            alloc::format!("{} values", targets.len()),
        ));
    }
    // resolve channel columns once
    let mut resolved: Vec<Vec<(usize, &str, Direction)>> = Vec::with_capacity(cases.len());
    for c in cases {
        let mut cols = Vec::with_capacity(c.directions.len());
        for (name, d) in &c.directions {
            cols.push((schema.require_feature(name)?, name.as_str(), *d));
        }
        resolved.push(cols);
    }
    let scenario_ids: Vec<u8> = cases
        .iter()
        .map(|c| c.scenario_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let n = targets.len() / p;
    let k = cfg.corrupt_count(n);
    let mut chosen = index::sample(&mut rng_for(cfg.seed, 0), n, k).into_vec();
    chosen.sort_unstable();
    let assigned = assign_over(k, &scenario_ids, cfg.seed);

    let mut out = targets.to_vec();
    let mut labels = vec![Label::Normal; n];
    let mut manifest = Vec::with_capacity(k);
    for (&win, &scenario) in chosen.iter().zip(&assigned) {
        let mut rng = rng_for(cfg.seed, 2 + win as u64);
        let options: Vec<usize> = (0..cases.len())
            .filter(|&i| cases[i].scenario_id == scenario)
            .collect();
        let ci = options[rng.gen_range(0..options.len())];
        let magnitude = cfg.draw_magnitude(&mut rng);
        let case = &cases[ci];
        let mut channels = Vec::with_capacity(resolved[ci].len());
        for &(col, name, dir) in &resolved[ci] {
            let cell = &mut out[win * p + col];
            let before = *cell;
            let after = match dir {
                Direction::Steady => before,
                Direction::Up => (before + magnitude).clamp(BOUNDS.0, BOUNDS.1),
                Direction::Down => (before - magnitude).clamp(BOUNDS.0, BOUNDS.1),
            };
            *cell = after;
            channels.push(ChannelChange {
                name: name.to_string(),
                before,
                after,
            });
        }
        labels[win] = Label::Anomaly {
            scenario: case.scenario_id,
            case: case.case_id,
        };
        manifest.push(InjectionRecord {
            window_index: win,
            scenario: case.scenario_id,
            case: case.case_id,
            magnitude,
            channels,
        });
    }
    Ok(Injection {
        targets: out,
        labels,
        manifest,
    })
}
