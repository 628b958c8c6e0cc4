//! Synthetic 1 Hz drive-cycle generator.
//!
//! Stands in for real fleet recordings. A driver model chases randomly drawn
//! cruise speeds (with stops); pedal, load, torque, fuel and injector
//! pressure follow the acceleration demand; temperatures are slow first-order
//! responses; gear, lockup and shaft speed follow vehicle speed. All tuning
//! constants live in [`consts`].

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{CoreError, CoreResult};
use crate::frame::ChannelFrame;
use crate::schema::ChannelSchema;

/// Functional-form constants of the generator.
pub mod consts {
    /// Mean seconds between new cruise targets.
    pub const TARGET_MEAN_HOLD_S: f64 = 90.0;
    /// Probability that a new target is a stop.
    pub const STOP_PROBABILITY: f64 = 0.15;
    pub const CRUISE_RANGE_MPH: (f64, f64) = (15.0, 65.0);
    pub const MAX_SPEED_MPH: f64 = 75.0;
    /// Proportional gain of the speed controller (1/s).
    pub const SPEED_GAIN: f64 = 0.08;
    pub const ACCEL_LIMITS: (f64, f64) = (-3.0, 2.5);
    pub const ACCEL_JITTER: f64 = 0.12;
    /// Deceleration demand below which the brake is applied.
    pub const BRAKE_ACCEL: f64 = -0.6;
    /// Pedal percent needed per mph to hold speed, and per mph/s of acceleration.
    pub const PEDAL_PER_MPH: f64 = 0.55;
    pub const PEDAL_PER_ACCEL: f64 = 18.0;
    pub const PEDAL_SMOOTHING: f64 = 0.4;
    pub const IDLE_LOAD: f64 = 12.0;
    pub const LOAD_PER_PEDAL: f64 = 0.85;
    pub const LOAD_SMOOTHING: f64 = 0.5;
    pub const TORQUE_PER_LOAD: f64 = 0.95;
    pub const BOOST_PER_LOAD: f64 = 0.28;
    pub const IDLE_FUEL_GPH: f64 = 0.7;
    pub const FUEL_PER_LOAD: f64 = 0.11;
    pub const INJ_BASE_PSI: f64 = 450.0;
    pub const INJ_PER_GPH: f64 = 95.0;
    pub const MPH_PER_GEAR: f64 = 7.5;
    pub const TOP_GEAR: f64 = 10.0;
    pub const LOCKUP_MIN_GEAR: f64 = 5.0;
    pub const LOCKUP_MIN_MPH: f64 = 28.0;
    pub const SHAFT_RPM_PER_MPH: f64 = 30.0;
    pub const MAX_FUEL_ECONOMY: f64 = 60.0;
    pub const COOLANT_BASE: f64 = 182.0;
    pub const COOLANT_PER_LOAD: f64 = 0.15;
    pub const COOLANT_TAU_S: f64 = 200.0;
    pub const TRANS_OIL_BASE: f64 = 150.0;
    pub const TRANS_OIL_PER_LOAD: f64 = 0.25;
    pub const TRANS_OIL_PER_MPH: f64 = 0.2;
    pub const TRANS_OIL_TAU_S: f64 = 300.0;
    /// Intake air cools as charge flow rises, so it falls when fuel rises.
    pub const INTAKE_BASE: f64 = 118.0;
    pub const INTAKE_PER_LOAD: f64 = -0.25;
    pub const INTAKE_TAU_S: f64 = 30.0;
    /// Ambient drift: mean-reverting with this stationary sigma and correlation time.
    pub const AMBIENT_SIGMA: f64 = 4.0;
    pub const AMBIENT_TAU_S: f64 = 300.0;
    /// Measurement noise sigma per channel, in default schema order.
    pub const NOISE: [f64; 15] = [
        0.1,  // EngCoolantTemp
        1.0,  // PctEngLoad
        1.0,  // EngPctTorq
        0.2,  // BoostPres
        0.5,  // AccelPedalPos
        0.2,  // IntManfTemp
        0.1,  // VehSpeedEng
        0.1,  // TransOilTemp
        0.0,  // TrSelGr
        0.0,  // TransTorqConvLockupEngaged
        5.0,  // TrOutShaftSp
        0.08, // FuelRate
        0.1,  // InstFuelEco
        5.0,  // InjCtlPres
        0.0,  // BrakeSwitch
    ];
    /// 2014-04-30T00:00:00Z
    pub const DEFAULT_START: i64 = 1_398_816_000;
}

use consts::*;

const CHANNELS: [&str; 15] = [
    "EngCoolantTemp",
    "PctEngLoad",
    "EngPctTorq",
    "BoostPres",
    "AccelPedalPos",
    "IntManfTemp",
    "VehSpeedEng",
    "TransOilTemp",
    "TrSelGr",
    "TransTorqConvLockupEngaged",
    "TrOutShaftSp",
    "FuelRate",
    "InstFuelEco",
    "InjCtlPres",
    "BrakeSwitch",
];

/// Channels clamped to percentages.
const PERCENT: [usize; 3] = [1, 2, 4];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DriveCycleConfig {
    pub duration_s: usize,
    pub seed: u64,
    /// Per-channel measurement noise sigma in physical units; empty means [`consts::NOISE`].
    pub noise_scale: Vec<f64>,
    /// Probability that a given second is missing from the output.
    pub gap_rate: f64,
    /// `(start, length)` stretches in seconds where the vehicle idles at rest.
    pub idle_segments: Vec<(usize, usize)>,
    pub start_timestamp: i64,
}

impl Default for DriveCycleConfig {
    fn default() -> Self {
        Self {
            duration_s: 6 * 3600,
            seed: 0,
            noise_scale: Vec::new(),
            gap_rate: 0.0,
            idle_segments: Vec::new(),
            start_timestamp: DEFAULT_START,
        }
    }
}

impl DriveCycleConfig {
    pub fn validate(&self) -> CoreResult<()> {
        if self.duration_s < 60 {
            return Err(CoreError::Config("duration_s must be >= 60".into()));
        }
        if !(0.0..0.2).contains(&self.gap_rate) {
            return Err(CoreError::Config("gap_rate must lie in [0, 0.2)".into()));
        }
        if !self.noise_scale.is_empty() && self.noise_scale.len() != CHANNELS.len() {
            return Err(CoreError::Config(format!(
                "noise_scale needs {} entries, got {}",
                CHANNELS.len(),
                self.noise_scale.len()
            )));
        }
        if self.noise_scale.iter().any(|s| !(*s >= 0.0)) {
            return Err(CoreError::Config("noise_scale entries must be >= 0".into()));
        }
        Ok(())
    }

    fn noise(&self) -> [f64; 15] {
        let mut out = NOISE;
        if !self.noise_scale.is_empty() {
            out.copy_from_slice(&self.noise_scale);
        }
        out
    }

    fn idle_at(&self, t: usize) -> bool {
        self.idle_segments
            .iter()
            .any(|&(s, len)| t >= s && t < s + len)
    }
}

struct Vehicle {
    speed: f64,
    target: f64,
    hold: f64,
    pedal: f64,
    load: f64,
    coolant: f64,
    trans_oil: f64,
    intake: f64,
    ambient: f64,
}

fn lowpass(state: f64, target: f64, tau: f64) -> f64 {
    state + (target - state) / tau
}

/// Generates an unscaled 1 Hz frame over `schema`, which must contain the
/// fifteen default sensor channels (in any order).
pub fn generate(cfg: &DriveCycleConfig, schema: &ChannelSchema) -> CoreResult<ChannelFrame> {
    cfg.validate()?;
    let columns: Vec<usize> = CHANNELS
        .iter()
        .map(|n| schema.require_feature(n))
        .collect::<CoreResult<_>>()?;
    let p = schema.feature_count();
    if p != CHANNELS.len() {
        return Err(CoreError::Schema(format!(
            "generator emits {} channels, schema has {p}",
            CHANNELS.len()
        )));
    }
    let sigma = cfg.noise();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let hold = Exp::new(1.0 / TARGET_MEAN_HOLD_S).expect("positive rate");

    let mut v = Vehicle {
        speed: 0.0,
        target: 0.0,
        hold: 0.0,
        pedal: 0.0,
        load: IDLE_LOAD,
        coolant: COOLANT_BASE,
        trans_oil: TRANS_OIL_BASE,
        intake: INTAKE_BASE,
        ambient: 0.0,
    };

    let mut timestamps = Vec::with_capacity(cfg.duration_s);
    let mut values = Vec::with_capacity(cfg.duration_s * p);
    for t in 0..cfg.duration_s {
        // driver
        v.hold -= 1.0;
        if v.hold <= 0.0 {
            v.hold = hold.sample(&mut rng);
            v.target = if rng.gen_bool(STOP_PROBABILITY) {
                0.0
            } else {
                rng.gen_range(CRUISE_RANGE_MPH.0..CRUISE_RANGE_MPH.1)
            };
        }
        let idle = cfg.idle_at(t);
        let target = if idle { 0.0 } else { v.target };
        let mut accel = (SPEED_GAIN * (target - v.speed)).clamp(ACCEL_LIMITS.0, ACCEL_LIMITS.1)
            + ACCEL_JITTER * unit.sample(&mut rng);
        let stopped = target == 0.0 && v.speed < 0.5;
        if stopped {
            accel = 0.0;
            v.speed = 0.0;
        }
        let braking = stopped || accel < BRAKE_ACCEL;
        let demand = if braking {
            0.0
        } else {
            (PEDAL_PER_MPH * v.speed + PEDAL_PER_ACCEL * accel).clamp(0.0, 100.0)
        };
        v.pedal += PEDAL_SMOOTHING * (demand - v.pedal);
        v.speed = (v.speed + accel).clamp(0.0, MAX_SPEED_MPH);

        // engine and fuel
        let load_target = IDLE_LOAD + LOAD_PER_PEDAL * v.pedal;
        v.load += LOAD_SMOOTHING * (load_target - v.load);
        let torque = TORQUE_PER_LOAD * v.load - 3.0;
        let boost = BOOST_PER_LOAD * (v.load - IDLE_LOAD).max(0.0);
        let fuel = IDLE_FUEL_GPH + FUEL_PER_LOAD * v.load;
        let inj = INJ_BASE_PSI + INJ_PER_GPH * fuel;

        // transmission
        let gear = if v.speed < 0.5 {
            1.0
        } else {
            (1.0 + libm::floor(v.speed / MPH_PER_GEAR)).min(TOP_GEAR)
        };
        let lockup = if gear >= LOCKUP_MIN_GEAR && v.speed > LOCKUP_MIN_MPH {
            1.0
        } else {
            0.0
        };
        let shaft = SHAFT_RPM_PER_MPH * v.speed;
        let economy = if v.speed > 1.0 {
            (v.speed / fuel).min(MAX_FUEL_ECONOMY)
        } else {
            0.0
        };

        // thermal
        v.coolant = lowpass(
            v.coolant,
            COOLANT_BASE + COOLANT_PER_LOAD * v.load,
            COOLANT_TAU_S,
        );
        v.trans_oil = lowpass(
            v.trans_oil,
            TRANS_OIL_BASE + TRANS_OIL_PER_LOAD * v.load + TRANS_OIL_PER_MPH * v.speed,
            TRANS_OIL_TAU_S,
        );
        v.ambient += -v.ambient / AMBIENT_TAU_S
            + AMBIENT_SIGMA * libm::sqrt(2.0 / AMBIENT_TAU_S) * unit.sample(&mut rng);
        v.intake = lowpass(
            v.intake,
            INTAKE_BASE + INTAKE_PER_LOAD * v.load + v.ambient,
            INTAKE_TAU_S,
        );

        let mut row = [
            v.coolant,
            v.load,
            torque,
            boost,
            v.pedal,
            v.intake,
            v.speed,
            v.trans_oil,
            gear,
            lockup,
            shaft,
            fuel,
            economy,
            inj,
            if braking { 1.0 } else { 0.0 },
        ];
        for (x, s) in row.iter_mut().zip(&sigma) {
            if *s > 0.0 {
                *x += s * unit.sample(&mut rng);
            }
        }
        for &i in &PERCENT {
            row[i] = row[i].clamp(0.0, 100.0);
        }
        for i in [3, 6, 10, 11, 12] {
            row[i] = row[i].max(0.0);
        }

        // dropped second; the draw happens regardless so gaps do not shift the signal
        if cfg.gap_rate > 0.0 && rng.gen_bool(cfg.gap_rate) {
            continue;
        }
        timestamps.push(cfg.start_timestamp + t as i64);
        let base = values.len();
        values.resize(base + p, 0.0);
        for (k, &col) in columns.iter().enumerate() {
            values[base + col] = row[k];
        }
    }
    ChannelFrame::new(schema.clone(), timestamps, values)
}

/// Pearson correlation of two equally long series.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / libm::sqrt(saa * sbb)
}
