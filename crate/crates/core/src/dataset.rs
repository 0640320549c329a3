// SPDX-License-Identifier: Apache-2.0

//! Measurement tables: CSV loading, lookup and excess-loss reconstruction.
//!
//! The CSV header is `sf,bw_khz,cr_num,cr_den,rssi_dbm,snr_db,loss_pct`,
//! optionally followed by a `series` column (`grid` or `cr_sweep`). Files
//! without the column are all `grid`. Coding-rate sweep rows may leave
//! `rssi_dbm` and `loss_pct` empty since only SNR was recorded for them.
//! `#` lines are comments.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::link_budget::{loss_breakdown, BudgetError, LossBreakdown};
use crate::types::{
    parse_scaled, render_scaled, CodingRate, ConfigError, GridMode, RadioConfig, SignalSample, GRID_BANDWIDTHS_HZ,
    GRID_SPREADING_FACTORS,
};
use crate::BudgetContext;

const BASE_COLUMNS: [&str; 7] = ["sf", "bw_khz", "cr_num", "cr_den", "rssi_dbm", "snr_db", "loss_pct"];
const SERIES_COLUMN: &str = "series";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: duplicate record for {key}")]
    Duplicate { line: u64, key: RecordKey },
    #[error("line {line}: {source}")]
    Validation {
        line: u64,
        #[source]
        source: ConfigError,
    },
    #[error("no {series} record for sf={sf} bw_khz={bw_khz}{cr}", bw_khz = render_scaled(u64::from(*bw_hz), 3), cr = cr.map(|c| format!(" cr={c}")).unwrap_or_default())]
    NotFound {
        series: Series,
        sf: u8,
        bw_hz: u32,
        cr: Option<CodingRate>,
    },
    #[error("several coding rates recorded for sf={sf} bw_khz={bw_khz}", bw_khz = render_scaled(u64::from(*bw_hz), 3))]
    Ambiguous { sf: u8, bw_hz: u32 },
    #[error("record {0} lacks RSSI or loss values")]
    Incomplete(RecordKey),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which sweep a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Series {
    Grid,
    CrSweep,
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Series::Grid => "grid",
            Series::CrSweep => "cr_sweep",
        })
    }
}

impl FromStr for Series {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid" | "" => Ok(Series::Grid),
            "cr_sweep" => Ok(Series::CrSweep),
            other => Err(format!("unknown series {other:?} (expected grid or cr_sweep)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordKey {
    pub series: Series,
    pub sf: u8,
    pub bw_hz: u32,
    pub cr: CodingRate,
}

impl fmt::Display for RecordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} sf={} bw_khz={} cr={}",
            self.series,
            self.sf,
            render_scaled(u64::from(self.bw_hz), 3),
            self.cr
        )
    }
}

/// One averaged measurement cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRecord {
    pub series: Series,
    pub sf: u8,
    pub bw_hz: u32,
    pub cr: CodingRate,
    pub rssi_dbm: Option<f64>,
    pub snr_db: f64,
    pub loss_pct: Option<f64>,
}

impl MeasurementRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey {
            series: self.series,
            sf: self.sf,
            bw_hz: self.bw_hz,
            cr: self.cr,
        }
    }

    /// RSSI/SNR pair, for records that carry an RSSI.
    pub fn sample(&self) -> Result<SignalSample, DatasetError> {
        let rssi = self.rssi_dbm.ok_or(DatasetError::Incomplete(self.key()))?;
        Ok(SignalSample::new(rssi, self.snr_db))
    }

    pub fn loss(&self) -> Result<f64, DatasetError> {
        self.loss_pct.ok_or(DatasetError::Incomplete(self.key()))
    }

    fn check(&self, mode: GridMode) -> Result<(), ConfigError> {
        let range = |field, value: f64, reason| ConfigError::OutOfRange {
            field,
            value: value.to_string(),
            reason,
        };
        if !self.snr_db.is_finite() {
            return Err(range("snr_db", self.snr_db, "must be finite"));
        }
        if let Some(loss) = self.loss_pct {
            if !(0.0..=100.0).contains(&loss) {
                return Err(range("loss_pct", loss, "must lie in [0, 100]"));
            }
        }
        if let Some(rssi) = self.rssi_dbm {
            if !rssi.is_finite() {
                return Err(range("rssi_dbm", rssi, "must be finite"));
            }
            if mode == GridMode::Validated && rssi >= 0.0 {
                return Err(range("rssi_dbm", rssi, "must be negative"));
            }
        }
        if self.series == Series::Grid && (self.rssi_dbm.is_none() || self.loss_pct.is_none()) {
            return Err(ConfigError::OutOfRange {
                field: "rssi_dbm/loss_pct",
                value: String::new(),
                reason: "grid rows need RSSI and loss values",
            });
        }
        if mode == GridMode::Validated {
            let config = RadioConfig::campaign(self.sf, self.bw_hz, self.cr);
            crate::types::validate_campaign_grid(&config)?;
        }
        Ok(())
    }
}

/// Records keyed by (series, sf, bw, cr); ordering in the source file is not kept.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementTable {
    records: BTreeMap<RecordKey, MeasurementRecord>,
}

impl MeasurementTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: MeasurementRecord) -> Result<(), RecordKey> {
        let key = record.key();
        if self.records.contains_key(&key) {
            return Err(key);
        }
        self.records.insert(key, record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &MeasurementRecord> {
        self.records.values()
    }

    pub fn series(&self, series: Series) -> impl Iterator<Item = &MeasurementRecord> {
        self.records.values().filter(move |r| r.series == series)
    }

    pub fn lookup(&self, sf: u8, bw_hz: u32, cr: CodingRate) -> Result<&MeasurementRecord, DatasetError> {
        let key = RecordKey {
            series: Series::Grid,
            sf,
            bw_hz,
            cr,
        };
        self.records.get(&key).ok_or(DatasetError::NotFound {
            series: Series::Grid,
            sf,
            bw_hz,
            cr: Some(cr),
        })
    }

    /// The single grid record at (sf, bw), whatever coding rate it carries.
    pub fn grid_cell(&self, sf: u8, bw_hz: u32) -> Result<&MeasurementRecord, DatasetError> {
        let mut hits = self.series(Series::Grid).filter(|r| r.sf == sf && r.bw_hz == bw_hz);
        let first = hits.next().ok_or(DatasetError::NotFound {
            series: Series::Grid,
            sf,
            bw_hz,
            cr: None,
        })?;
        if hits.next().is_some() {
            return Err(DatasetError::Ambiguous { sf, bw_hz });
        }
        Ok(first)
    }

    pub fn cr_sweep_at(&self, sf: u8, bw_hz: u32) -> impl Iterator<Item = &MeasurementRecord> {
        self.series(Series::CrSweep)
            .filter(move |r| r.sf == sf && r.bw_hz == bw_hz)
    }
}

pub fn load_measurements<R: Read>(source: R, mode: GridMode) -> Result<MeasurementTable, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let found: Vec<&str> = headers.iter().collect();
    let has_series = match found.as_slice() {
        h if h == BASE_COLUMNS => false,
        [base @ .., last] if base == BASE_COLUMNS && *last == SERIES_COLUMN => true,
        _ => {
            return Err(DatasetError::Header {
                expected: BASE_COLUMNS.join(","),
                found: found.join(","),
            })
        }
    };

    let mut table = MeasurementTable::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let record = parse_row(&row, has_series).map_err(|message| DatasetError::Parse { line, message })?;
        record
            .check(mode)
            .map_err(|source| DatasetError::Validation { line, source })?;
        table
            .insert(record)
            .map_err(|key| DatasetError::Duplicate { line, key })?;
    }
    Ok(table)
}

fn parse_row(row: &csv::StringRecord, has_series: bool) -> Result<MeasurementRecord, String> {
    let field = |i: usize| row.get(i).unwrap_or("");
    let number = |i: usize| -> Result<f64, String> {
        let raw = field(i);
        if raw.contains(['e', 'E']) {
            return Err(format!("{}: exponent notation not allowed: {raw:?}", BASE_COLUMNS[i]));
        }
        raw.parse::<f64>()
            .map_err(|_| format!("{}: not a number: {raw:?}", BASE_COLUMNS[i]))
    };
    let optional = |i: usize| -> Result<Option<f64>, String> {
        if field(i).is_empty() {
            Ok(None)
        } else {
            number(i).map(Some)
        }
    };

    let sf: u8 = field(0)
        .parse()
        .map_err(|_| format!("sf: not an integer: {:?}", field(0)))?;
    let bw_hz = parse_scaled(field(1), 3, "bw_khz").map_err(|e| e.to_string())?;
    let bw_hz = u32::try_from(bw_hz).map_err(|_| format!("bw_khz too large: {}", field(1)))?;
    let num: u8 = field(2)
        .parse()
        .map_err(|_| format!("cr_num: not an integer: {:?}", field(2)))?;
    let den: u8 = field(3)
        .parse()
        .map_err(|_| format!("cr_den: not an integer: {:?}", field(3)))?;
    let cr = CodingRate::from_parts(num, den).map_err(|e| e.to_string())?;
    let series = if has_series { field(7).parse()? } else { Series::Grid };

    Ok(MeasurementRecord {
        series,
        sf,
        bw_hz,
        cr,
        rssi_dbm: optional(4)?,
        snr_db: number(5)?,
        loss_pct: optional(6)?,
    })
}

/// Writes the table with the `series` column, in key order.
pub fn write_measurements<W: Write>(table: &MeasurementTable, out: W) -> Result<(), DatasetError> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
    header.push(SERIES_COLUMN);
    writer.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in table.records() {
        writer.write_record([
            r.sf.to_string(),
            render_scaled(u64::from(r.bw_hz), 3),
            r.cr.numerator().to_string(),
            CodingRate::DENOMINATOR.to_string(),
            opt(r.rssi_dbm),
            r.snr_db.to_string(),
            opt(r.loss_pct),
            r.series.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// A metric over the 6 x 6 SF/BW grid. Rows follow
/// [`GRID_BANDWIDTHS_HZ`], columns follow [`GRID_SPREADING_FACTORS`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfBwGrid {
    pub cells: [[f64; 6]; 6],
}

/// A cell position and its deviation from a reference grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub sf: u8,
    pub bw_hz: u32,
    pub actual: f64,
    pub expected: f64,
}

impl Deviation {
    pub fn abs(&self) -> f64 {
        (self.actual - self.expected).abs()
    }
}

impl fmt::Display for Deviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sf={} bw_khz={} got {:.3} expected {:.3} (|diff| {:.4})",
            self.sf,
            render_scaled(u64::from(self.bw_hz), 3),
            self.actual,
            self.expected,
            self.abs()
        )
    }
}

impl SfBwGrid {
    pub fn from_fn<E>(mut f: impl FnMut(u8, u32) -> Result<f64, E>) -> Result<Self, E> {
        let mut cells = [[0.0; 6]; 6];
        for (row, &bw) in GRID_BANDWIDTHS_HZ.iter().enumerate() {
            for (col, &sf) in GRID_SPREADING_FACTORS.iter().enumerate() {
                cells[row][col] = f(sf, bw)?;
            }
        }
        Ok(SfBwGrid { cells })
    }

    pub fn get(&self, sf: u8, bw_hz: u32) -> Option<f64> {
        let col = GRID_SPREADING_FACTORS.iter().position(|&s| s == sf)?;
        let row = GRID_BANDWIDTHS_HZ.iter().position(|&b| b == bw_hz)?;
        Some(self.cells[row][col])
    }

    /// Every cell paired with its reference, in row-major order.
    pub fn deviations<'a>(&'a self, expected: &'a SfBwGrid) -> impl Iterator<Item = Deviation> + 'a {
        GRID_BANDWIDTHS_HZ.iter().enumerate().flat_map(move |(row, &bw_hz)| {
            GRID_SPREADING_FACTORS
                .iter()
                .enumerate()
                .map(move |(col, &sf)| Deviation {
                    sf,
                    bw_hz,
                    actual: self.cells[row][col],
                    expected: expected.cells[row][col],
                })
        })
    }

    /// Largest absolute deviation; the first such cell wins ties.
    pub fn max_deviation(&self, expected: &SfBwGrid) -> Deviation {
        self.deviations(expected)
            .reduce(|best, d| if d.abs() > best.abs() { d } else { best })
            .expect("grid is never empty")
    }

    /// Renders as `bw_khz,sf7,...,sf12` with the given number of decimals.
    pub fn to_csv(&self, decimals: usize) -> String {
        let mut out = String::from("bw_khz,sf7,sf8,sf9,sf10,sf11,sf12\n");
        for (row, &bw) in GRID_BANDWIDTHS_HZ.iter().enumerate() {
            out.push_str(&render_scaled(u64::from(bw), 3));
            for v in self.cells[row] {
                out.push_str(&format!(",{v:.decimals$}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, DatasetError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i as u64 + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let expected_header = "bw_khz,sf7,sf8,sf9,sf10,sf11,sf12";
        match lines.next() {
            Some((_, h)) if h.replace(' ', "") == expected_header => {}
            other => {
                return Err(DatasetError::Header {
                    expected: expected_header.into(),
                    found: other.map(|(_, h)| h.to_string()).unwrap_or_default(),
                })
            }
        }
        let mut cells = [[f64::NAN; 6]; 6];
        let mut seen = [false; 6];
        for (line, l) in lines {
            let parse_err = |message: String| DatasetError::Parse { line, message };
            let parts: Vec<&str> = l.split(',').map(str::trim).collect();
            if parts.len() != 7 {
                return Err(parse_err(format!("expected 7 columns, found {}", parts.len())));
            }
            let bw = parse_scaled(parts[0], 3, "bw_khz").map_err(|e| parse_err(e.to_string()))?;
            let row = GRID_BANDWIDTHS_HZ
                .iter()
                .position(|&b| u64::from(b) == bw)
                .ok_or_else(|| parse_err(format!("bandwidth {} kHz not on the grid", parts[0])))?;
            if seen[row] {
                return Err(parse_err(format!("bandwidth {} kHz repeated", parts[0])));
            }
            seen[row] = true;
            for (col, p) in parts[1..].iter().enumerate() {
                cells[row][col] = p.parse().map_err(|_| parse_err(format!("not a number: {p:?}")))?;
            }
        }
        if let Some(row) = seen.iter().position(|s| !s) {
            return Err(DatasetError::NotFound {
                series: Series::Grid,
                sf: GRID_SPREADING_FACTORS[0],
                bw_hz: GRID_BANDWIDTHS_HZ[row],
                cr: None,
            });
        }
        Ok(SfBwGrid { cells })
    }
}

/// Full loss chain for one grid cell.
pub fn cell_breakdown(
    table: &MeasurementTable,
    ctx: &BudgetContext,
    sf: u8,
    bw_hz: u32,
) -> Result<LossBreakdown, DatasetError> {
    let record = table.grid_cell(sf, bw_hz)?;
    let config = ctx.config(sf, bw_hz, record.cr);
    Ok(loss_breakdown(&ctx.link, &config, &record.sample()?)?)
}

/// Excess loss for all 36 grid cells.
pub fn reconstruct_excess_loss(table: &MeasurementTable, ctx: &BudgetContext) -> Result<SfBwGrid, DatasetError> {
    SfBwGrid::from_fn(|sf, bw| cell_breakdown(table, ctx, sf, bw).map(|b| b.excess_db))
}

/// The bundled field-campaign fixtures.
pub mod campaign {
    use super::*;

    pub const MEASUREMENTS_CSV: &str = include_str!("../fixtures/campaign_measurements.csv");
    pub const EXCESS_LOSS_CSV: &str = include_str!("../fixtures/campaign_excess_loss.csv");

    pub fn measurements() -> MeasurementTable {
        load_measurements(MEASUREMENTS_CSV.as_bytes(), GridMode::Validated)
            .expect("bundled measurement fixture is valid")
    }

    pub fn excess_loss() -> SfBwGrid {
        SfBwGrid::from_csv(EXCESS_LOSS_CSV).expect("bundled excess-loss fixture is valid")
    }
}
