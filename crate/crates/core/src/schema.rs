//! Sensor channel catalog.
//!
//! The default schema lists the fifteen 1 Hz powertrain channels used by the
//! forecaster, grouped by functional working group (FWG), plus the `UTC_1HZ`
//! timestamp column which is never a model feature.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{CoreError, CoreResult};

/// Name of the timestamp channel.
pub const TIME_CHANNEL: &str = "UTC_1HZ";

/// Functional working group a channel belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Fwg {
    Engine,
    Transmission,
    Fuel,
    Brake,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ChannelKind {
    Continuous,
    Discrete,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelDescriptor {
    pub name: String,
    pub fwg: Fwg,
    pub unit: String,
    pub kind: ChannelKind,
}

impl ChannelDescriptor {
    pub fn new(name: &str, fwg: Fwg, unit: &str, kind: ChannelKind) -> Self {
        Self {
            name: name.to_string(),
            fwg,
            unit: unit.to_string(),
            kind,
        }
    }
}

/// Ordered channel list with exactly one time channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSchema {
    channels: Vec<ChannelDescriptor>,
}

const DEFAULT_CHANNELS: [(&str, Fwg, &str, ChannelKind); 16] = [
    (TIME_CHANNEL, Fwg::Time, "s", ChannelKind::Discrete),
    (
        "EngCoolantTemp",
        Fwg::Engine,
        "degF",
        ChannelKind::Continuous,
    ),
    ("PctEngLoad", Fwg::Engine, "%", ChannelKind::Continuous),
    ("EngPctTorq", Fwg::Engine, "%", ChannelKind::Continuous),
    ("BoostPres", Fwg::Engine, "psi", ChannelKind::Continuous),
    ("AccelPedalPos", Fwg::Engine, "%", ChannelKind::Continuous),
    ("IntManfTemp", Fwg::Engine, "degF", ChannelKind::Continuous),
    (
        "VehSpeedEng",
        Fwg::Transmission,
        "mph",
        ChannelKind::Continuous,
    ),
    (
        "TransOilTemp",
        Fwg::Transmission,
        "degF",
        ChannelKind::Continuous,
    ),
    ("TrSelGr", Fwg::Transmission, "gear", ChannelKind::Discrete),
    (
        "TransTorqConvLockupEngaged",
        Fwg::Transmission,
        "flag",
        ChannelKind::Binary,
    ),
    (
        "TrOutShaftSp",
        Fwg::Transmission,
        "rpm",
        ChannelKind::Continuous,
    ),
    ("FuelRate", Fwg::Fuel, "gph", ChannelKind::Continuous),
    ("InstFuelEco", Fwg::Fuel, "mpg", ChannelKind::Continuous),
    ("InjCtlPres", Fwg::Fuel, "psi", ChannelKind::Continuous),
    ("BrakeSwitch", Fwg::Brake, "flag", ChannelKind::Binary),
];

impl ChannelSchema {
    /// Builds a schema, checking name uniqueness and the single-time-channel rule.
    pub fn new(channels: Vec<ChannelDescriptor>) -> CoreResult<Self> {
        let time_count = channels.iter().filter(|c| c.fwg == Fwg::Time).count();
        if time_count != 1 {
            return Err(CoreError::Schema(alloc::format!(
                "expected exactly one time channel, found {time_count}"
            )));
        }
        for (i, c) in channels.iter().enumerate() {
            if c.fwg == Fwg::Time && c.name != TIME_CHANNEL {
                return Err(CoreError::Schema(alloc::format!(
                    "time channel must be named {TIME_CHANNEL}, found {}",
                    c.name
                )));
            }
            if channels[..i].iter().any(|o| o.name == c.name) {
                return Err(CoreError::Schema(alloc::format!(
                    "duplicate channel {}",
                    c.name
                )));
            }
        }
        Ok(Self { channels })
    }

    /// `UTC_1HZ` followed by the fifteen sensor channels in catalog order.
    pub fn vehicle_default() -> Self {
        let channels = DEFAULT_CHANNELS
            .iter()
            .map(|&(n, f, u, k)| ChannelDescriptor::new(n, f, u, k))
            .collect();
        Self { channels }
    }

    pub fn channels(&self) -> &[ChannelDescriptor] {
        &self.channels
    }

    /// Sensor channels in order, time channel excluded.
    pub fn features(&self) -> impl Iterator<Item = &ChannelDescriptor> {
        self.channels.iter().filter(|c| c.fwg != Fwg::Time)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features().map(|c| c.name.clone()).collect()
    }

    /// Number of model feature channels (P).
    pub fn feature_count(&self) -> usize {
        self.channels.len() - 1
    }

    /// Column index of a sensor channel within the P feature columns.
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features().position(|c| c.name == name)
    }

    pub fn require_feature(&self, name: &str) -> CoreResult<usize> {
        self.feature_index(name)
            .ok_or_else(|| CoreError::Schema(name.to_string()))
    }
}

impl Default for ChannelSchema {
    fn default() -> Self {
        Self::vehicle_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn default_schema_order_and_shape() {
        let s = ChannelSchema::vehicle_default();
        assert_eq!(s.channels().len(), 16);
        assert_eq!(s.feature_count(), 15);
        let names = s.feature_names();
        assert_eq!(
            names,
            vec![
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
            ]
        );
        assert_eq!(s.feature_index("FuelRate"), Some(11));
        assert_eq!(s.feature_index(TIME_CHANNEL), None);
    }

    #[test]
    fn rejects_duplicates_and_missing_time() {
        let dup = vec![
            ChannelDescriptor::new(TIME_CHANNEL, Fwg::Time, "s", ChannelKind::Discrete),
            ChannelDescriptor::new("A", Fwg::Fuel, "", ChannelKind::Continuous),
            ChannelDescriptor::new("A", Fwg::Fuel, "", ChannelKind::Continuous),
        ];
        assert!(ChannelSchema::new(dup).is_err());
        let no_time = vec![ChannelDescriptor::new(
            "A",
            Fwg::Fuel,
            "",
            ChannelKind::Continuous,
        )];
        assert!(ChannelSchema::new(no_time).is_err());
    }
}
