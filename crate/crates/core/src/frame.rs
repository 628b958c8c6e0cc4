use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, CoreResult};
use crate::schema::ChannelSchema;

/// Timestamped observation table over the sensor channels of a schema.
///
/// Values are row-major with one column per feature channel. A missing cell
/// is stored as NaN; [`clean`] removes every row that contains one. Loaders
/// mark a row with no usable timestamp by filling all its cells with NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFrame {
    schema: ChannelSchema,
    timestamps: Vec<i64>,
    values: Vec<f64>,
}

/// Row accounting emitted by [`clean`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CleanStats {
    pub input_rows: usize,
    pub null_rows: usize,
    pub duplicate_rows: usize,
    pub output_rows: usize,
}

impl ChannelFrame {
    pub fn new(schema: ChannelSchema, timestamps: Vec<i64>, values: Vec<f64>) -> CoreResult<Self> {
        let p = schema.feature_count();
        if values.len() != timestamps.len() * p {
            return Err(CoreError::shape(
                format!("{} x {p} values", timestamps.len()),
                format!("{} values", values.len()),
            ));
        }
        Ok(Self {
            schema,
            timestamps,
            values,
        })
    }

    pub fn schema(&self) -> &ChannelSchema {
        &self.schema
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn width(&self) -> usize {
        self.schema.feature_count()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.width();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(c).step_by(self.width()).copied()
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            schema: self.schema.clone(),
            timestamps: self.timestamps.clone(),
            values,
        }
    }

    fn select(&self, rows: &[usize]) -> Self {
        let p = self.width();
        let mut values = Vec::with_capacity(rows.len() * p);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self {
            schema: self.schema.clone(),
            timestamps: rows.iter().map(|&r| self.timestamps[r]).collect(),
            values,
        }
    }
}

/// Drops null rows, keeps the first row of each timestamp, and sorts by time.
pub fn clean(frame: &ChannelFrame) -> CoreResult<(ChannelFrame, CleanStats)> {
    let mut keep: Vec<usize> = (0..frame.rows())
        .filter(|&r| frame.row(r).iter().all(|v| !v.is_nan()))
        .collect();
    let null_rows = frame.rows() - keep.len();

    // stable sort, so the first row in file order heads each timestamp run
    keep.sort_by_key(|&r| frame.timestamps[r]);
    let before_dedup = keep.len();
    keep.dedup_by_key(|r| frame.timestamps[*r]);
    let duplicate_rows = before_dedup - keep.len();

    if keep.is_empty() {
        return Err(CoreError::EmptyData(format!(
            "no rows left after cleaning {} input rows",
            frame.rows()
        )));
    }
    let out = frame.select(&keep);
    let stats = CleanStats {
        input_rows: frame.rows(),
        null_rows,
        duplicate_rows,
        output_rows: out.rows(),
    };
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny(ts: Vec<i64>, cols: usize, fill: impl Fn(usize, usize) -> f64) -> ChannelFrame {
        let schema = ChannelSchema::vehicle_default();
        let p = schema.feature_count();
        assert!(cols <= p);
        let mut values = Vec::new();
        for r in 0..ts.len() {
            for c in 0..p {
                values.push(fill(r, c));
            }
        }
        ChannelFrame::new(schema, ts, values).unwrap()
    }

    #[test]
    fn drops_nulls_and_duplicates() {
        // rows 3 and 6 carry a null, row 8 repeats the timestamp of row 7
        let ts = vec![0, 1, 2, 3, 4, 5, 6, 7, 7, 9];
        let f = tiny(ts, 15, |r, c| {
            if (r == 3 && c == 2) || (r == 6 && c == 14) {
                f64::NAN
            } else {
                (r * 100 + c) as f64
            }
        });
        let (out, stats) = clean(&f).unwrap();
        assert_eq!(out.rows(), 7);
        assert_eq!(stats.null_rows, 2);
        assert_eq!(stats.duplicate_rows, 1);
        assert_eq!(out.timestamps(), &[0, 1, 2, 4, 5, 7, 9]);
        // first occurrence of timestamp 7 survives
        assert_eq!(out.row(5)[0], 700.0);
    }

    #[test]
    fn sorts_ascending() {
        let f = tiny(vec![5, 3, 4], 15, |r, _| r as f64);
        let (out, _) = clean(&f).unwrap();
        assert_eq!(out.timestamps(), &[3, 4, 5]);
        assert_eq!(out.row(0)[0], 1.0);
    }

    #[test]
    fn all_null_channel_is_empty_data() {
        let f = tiny(
            vec![0, 1, 2],
            15,
            |_, c| if c == 4 { f64::NAN } else { 1.0 },
        );
        assert!(matches!(clean(&f), Err(CoreError::EmptyData(_))));
    }

    #[test]
    fn clean_is_idempotent() {
        let f = tiny(vec![2, 1, 1, 0], 15, |r, c| {
            if r == 0 && c == 0 {
                f64::NAN
            } else {
                c as f64
            }
        });
        let (once, _) = clean(&f).unwrap();
        let (twice, stats) = clean(&once).unwrap();
        assert_eq!(once, twice);
        assert_eq!(stats.null_rows + stats.duplicate_rows, 0);
    }
}
