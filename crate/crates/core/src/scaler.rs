//! Per-channel min-max scaling onto [-1, 1].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{CoreError, CoreResult};
use crate::frame::ChannelFrame;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl ChannelRange {
    /// Maps `x` into [-1, 1]; a constant channel maps everything to 0.
    #[inline]
    pub fn scale(&self, x: f64) -> f64 {
        let span = self.max - self.min;
        if span <= 0.0 {
            return 0.0;
        }
        (2.0 * (x - self.min) / span - 1.0).clamp(-1.0, 1.0)
    }

    #[inline]
    pub fn unscale(&self, y: f64) -> f64 {
        (y + 1.0) * 0.5 * (self.max - self.min) + self.min
    }
}

/// Fitted per-channel extrema, in feature-column order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalerParams {
    pub channels: Vec<ChannelRange>,
}

impl ScalerParams {
    /// Fits column extrema over an arbitrary collection of rows.
    pub fn fit_rows<'a, I>(names: &[String], rows: I) -> CoreResult<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut channels: Vec<ChannelRange> = names
            .iter()
            .map(|n| ChannelRange {
                name: n.clone(),
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            })
            .collect();
        let mut seen = 0usize;
        for row in rows {
            if row.len() != channels.len() {
                return Err(CoreError::shape(
                    format!("{} columns", channels.len()),
                    format!("{} columns", row.len()),
                ));
            }
            for (ch, &v) in channels.iter_mut().zip(row) {
                if !v.is_finite() {
                    return Err(CoreError::Data(format!("non-finite value in {}", ch.name)));
                }
                ch.min = ch.min.min(v);
                ch.max = ch.max.max(v);
            }
            seen += 1;
        }
        if seen == 0 {
            return Err(CoreError::EmptyData(
                "cannot fit scaler on zero rows".into(),
            ));
        }
        Ok(Self { channels })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    pub fn check_names(&self, names: &[String]) -> CoreResult<()> {
        if names.len() != self.channels.len() || self.names().zip(names).any(|(a, b)| a != b) {
            return Err(CoreError::Schema(format!(
                "scaler channels [{}] do not match frame channels [{}]",
                self.names().collect::<Vec<_>>().join(","),
                names.join(",")
            )));
        }
        Ok(())
    }

    /// Scales a row-major block in place. `values.len()` must be a multiple of the channel count.
    pub fn scale_in_place(&self, values: &mut [f64]) {
        let p = self.channels.len();
        for row in values.chunks_exact_mut(p) {
            for (v, ch) in row.iter_mut().zip(&self.channels) {
                *v = ch.scale(*v);
            }
        }
    }

    pub fn unscale_in_place(&self, values: &mut [f64]) {
        let p = self.channels.len();
        for row in values.chunks_exact_mut(p) {
            for (v, ch) in row.iter_mut().zip(&self.channels) {
                *v = ch.unscale(*v);
            }
        }
    }
}

pub fn fit_scaler(frame: &ChannelFrame) -> CoreResult<ScalerParams> {
    let names = frame.schema().feature_names();
    ScalerParams::fit_rows(&names, (0..frame.rows()).map(|r| frame.row(r)))
}

pub fn apply_scaler(frame: &ChannelFrame, params: &ScalerParams) -> CoreResult<ChannelFrame> {
    params.check_names(&frame.schema().feature_names())?;
    let mut values = frame.values().to_vec();
    params.scale_in_place(&mut values);
    Ok(frame.with_values(values))
}

pub fn invert_scaler(frame: &ChannelFrame, params: &ScalerParams) -> CoreResult<ChannelFrame> {
    params.check_names(&frame.schema().feature_names())?;
    let mut values = frame.values().to_vec();
    params.unscale_in_place(&mut values);
    Ok(frame.with_values(values))
}
