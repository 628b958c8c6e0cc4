//! CSV observation streams.
//!
//! One header row of channel names, one observation per line, `.` as the
//! decimal separator. `UTC_1HZ` holds integer epoch seconds. Empty cells and
//! the tokens `NA`, `NaN`, `nan`, `null` and `NULL` are missing values.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use tcnad_core::{ChannelFrame, ChannelSchema, CoreError, TIME_CHANNEL};

use crate::error::{Error, Result, Stage};

const NULL_TOKENS: [&str; 6] = ["", "NA", "NaN", "nan", "null", "NULL"];

fn is_null(cell: &str) -> bool {
    NULL_TOKENS.contains(&cell)
}

/// Loads the schema's channels from a CSV file, in file row order and unscaled.
///
/// Row numbers in parse errors count data rows from 1 (the header is row 0).
pub fn load_csv(path: &Path, schema: &ChannelSchema) -> Result<ChannelFrame> {
    let file = File::open(path).map_err(|e| Error::io(Stage::Ingest, path, e))?;
    read_csv(file, schema).map_err(|e| match e {
        ReadError::Core(c) => Error::new(Stage::Ingest, c),
        ReadError::Csv(m) => Error::format(Stage::Ingest, path, m),
    })
}

enum ReadError {
    Core(CoreError),
    Csv(String),
}

impl From<CoreError> for ReadError {
    fn from(e: CoreError) -> Self {
        ReadError::Core(e)
    }
}

fn read_csv<R: Read>(
    reader: R,
    schema: &ChannelSchema,
) -> std::result::Result<ChannelFrame, ReadError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| ReadError::Csv(e.to_string()))?
        .clone();
    let position = |name: &str| header.iter().position(|h| h == name);
    let time_col = position(TIME_CHANNEL).ok_or_else(|| CoreError::Schema(TIME_CHANNEL.into()))?;
    let names = schema.feature_names();
    let mut cols = Vec::with_capacity(names.len());
    for n in &names {
        cols.push(position(n).ok_or_else(|| CoreError::Schema(n.clone()))?);
    }

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    while rdr
        .read_record(&mut record)
        .map_err(|e| ReadError::Csv(e.to_string()))?
    {
        row += 1;
        let ts_cell = record.get(time_col).unwrap_or("");
        let ts = if is_null(ts_cell) {
            None
        } else {
            Some(parse_timestamp(ts_cell).ok_or_else(|| CoreError::Parse {
                row,
                channel: TIME_CHANNEL.into(),
                message: format!("not an integer epoch second: {ts_cell:?}"),
            })?)
        };
        let base = values.len();
        for (&c, name) in cols.iter().zip(&names) {
            let cell = record.get(c).unwrap_or("");
            let v = if is_null(cell) {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|_| CoreError::Parse {
                    row,
                    channel: name.clone(),
                    message: format!("not a number: {cell:?}"),
                })?
            };
            values.push(v);
        }
        match ts {
            Some(t) => timestamps.push(t),
            None => {
                timestamps.push(0);
                values[base..].fill(f64::NAN);
            }
        }
    }
    Ok(ChannelFrame::new(schema.clone(), timestamps, values)?)
}

fn parse_timestamp(cell: &str) -> Option<i64> {
    if let Ok(t) = cell.parse::<i64>() {
        return Some(t);
    }
    // tolerate integral values written as floats
    let v: f64 = cell.parse().ok()?;
    (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Writes a frame with `UTC_1HZ` first. Values use the shortest exact
/// decimal form, so reading the file back reproduces every bit.
pub fn write_csv(path: &Path, frame: &ChannelFrame) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(Stage::Io, path, e))?;
    let mut out = BufWriter::new(file);
    write_frame(&mut out, frame)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(Stage::Io, path, e))
}

fn write_frame<W: Write>(out: &mut W, frame: &ChannelFrame) -> std::io::Result<()> {
    write!(out, "{TIME_CHANNEL}")?;
    for n in frame.schema().feature_names() {
        write!(out, ",{n}")?;
    }
    writeln!(out)?;
    for (i, &t) in frame.timestamps().iter().enumerate() {
        write!(out, "{t}")?;
        for v in frame.row(i) {
            if v.is_nan() {
                write!(out, ",")?;
            } else {
                write!(out, ",{v}")?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(skip: Option<&str>) -> String {
        let s = ChannelSchema::vehicle_default();
        let mut cols = vec![TIME_CHANNEL.to_string()];
        cols.extend(
            s.feature_names()
                .into_iter()
                .filter(|n| Some(n.as_str()) != skip),
        );
        cols.join(",")
    }

    fn row(t: i64, fill: &str, n: usize) -> String {
        let mut cells = vec![t.to_string()];
        cells.extend((0..n).map(|_| fill.to_string()));
        cells.join(",")
    }

    fn load(text: &str) -> std::result::Result<ChannelFrame, ReadError> {
        read_csv(text.as_bytes(), &ChannelSchema::vehicle_default())
    }

    #[test]
    fn loads_three_rows() {
        let text = [
            header(None),
            row(10, "1.5", 15),
            row(11, "2", 15),
            row(12, "-3e2", 15),
        ]
        .join("\n");
        let f = load(&text).ok().unwrap();
        assert_eq!(f.rows(), 3);
        assert_eq!(f.width(), 15);
        assert_eq!(f.row(2)[4], -300.0);
        assert_eq!(f.timestamps(), &[10, 11, 12]);
    }

    #[test]
    fn missing_column_names_it() {
        let text = [header(Some("FuelRate")), row(10, "1", 14)].join("\n");
        match load(&text) {
            Err(ReadError::Core(CoreError::Schema(name))) => assert_eq!(name, "FuelRate"),
            _ => panic!("expected schema error"),
        }
    }

    #[test]
    fn bad_cell_cites_row() {
        let s = ChannelSchema::vehicle_default();
        let boost = 1 + s.feature_index("BoostPres").unwrap();
        let mut lines = vec![header(None)];
        for r in 1..=8 {
            let mut cells: Vec<String> = row(r, "0", 15).split(',').map(String::from).collect();
            if r == 7 {
                cells[boost] = "abc".into();
            }
            lines.push(cells.join(","));
        }
        match load(&lines.join("\n")) {
            Err(ReadError::Core(CoreError::Parse { row, channel, .. })) => {
                assert_eq!(row, 7);
                assert_eq!(channel, "BoostPres");
            }
            _ => panic!("expected parse error"),
        }
    }

    #[test]
    fn null_tokens_become_nan_and_null_timestamp_blanks_row() {
        let text = [
            header(None),
            row(10, "NA", 15),
            row(11, "1", 15).replacen("11", "", 1),
        ]
        .join("\n");
        let f = load(&text).ok().unwrap();
        assert!(f.row(0).iter().all(|v| v.is_nan()));
        assert!(f.row(1).iter().all(|v| v.is_nan()));
    }

    #[test]
    fn extra_columns_are_ignored_and_order_follows_schema() {
        let s = ChannelSchema::vehicle_default();
        let mut names = s.feature_names();
        names.reverse();
        let head = format!("extra,{},{TIME_CHANNEL}", names.join(","));
        let vals: Vec<String> = (0..15).map(|i| i.to_string()).collect();
        let text = format!("{head}\nx,{},5\n", vals.join(","));
        let f = load(&text).ok().unwrap();
        assert_eq!(f.timestamps(), &[5]);
        assert_eq!(f.row(0)[0], 14.0);
        assert_eq!(f.row(0)[14], 0.0);
    }

    #[test]
    fn write_then_read_is_exact() {
        let s = ChannelSchema::vehicle_default();
        let values: Vec<f64> = (0..30).map(|i| (i as f64).sqrt() * 1e-3 - 0.1).collect();
        let f = ChannelFrame::new(s.clone(), vec![100, 101], values).unwrap();
        let mut buf = Vec::new();
        write_frame(&mut buf, &f).unwrap();
        let back = read_csv(buf.as_slice(), &s).ok().unwrap();
        assert_eq!(back, f);
    }
}
