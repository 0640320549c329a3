// SPDX-License-Identifier: Apache-2.0

//! Configuration selection over a measured SF/BW grid.
//!
//! Cells are filtered by a loss ceiling and a bandwidth floor, then ranked
//! lexicographically by a list of metrics. Exact ties on every metric fall
//! back to the lower SF, then the lower bandwidth, so the result never
//! depends on table order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::{cell_breakdown, DatasetError, MeasurementTable, Series};
use crate::types::{render_scaled, CodingRate, GRID_BANDWIDTHS_HZ, GRID_SPREADING_FACTORS};
use crate::BudgetContext;

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("invalid constraints: {0}")]
    Constraints(String),
    #[error("no feasible configuration: {0}")]
    NoFeasible(String),
    #[error("no coding-rate sweep recorded at sf={sf} bw_khz={bw_khz}", bw_khz = render_scaled(u64::from(*bw_hz), 3))]
    NoSweep { sf: u8, bw_hz: u32 },
    #[error("coding-rate sweeps recorded at {0} cells; name one explicitly")]
    AmbiguousSweep(usize),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Ranking metrics, each with its preferred direction built in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// Higher is better.
    Snr,
    /// Lower is better.
    ExcessLoss,
    /// Higher is better.
    Rssi,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Snr, Metric::ExcessLoss, Metric::Rssi];

    fn compare(self, a: &Candidate, b: &Candidate) -> Ordering {
        // Less means "a ranks ahead of b"
        match self {
            Metric::Snr => b.snr_db.total_cmp(&a.snr_db),
            Metric::ExcessLoss => a.excess_db.total_cmp(&b.excess_db),
            Metric::Rssi => b.rssi_dbm.total_cmp(&a.rssi_dbm),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Snr => "snr",
            Metric::ExcessLoss => "excess",
            Metric::Rssi => "rssi",
        })
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "snr" => Ok(Metric::Snr),
            "excess" => Ok(Metric::ExcessLoss),
            "rssi" => Ok(Metric::Rssi),
            other => Err(format!(
                "unknown ranking metric {other:?} (expected snr, excess or rssi)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConstraints {
    pub max_loss_pct: f64,
    pub min_bw_hz: u32,
    pub tie_break_order: Vec<Metric>,
}

impl Default for SelectionConstraints {
    fn default() -> Self {
        SelectionConstraints {
            max_loss_pct: 0.0,
            min_bw_hz: 62_500,
            tie_break_order: Metric::ALL.to_vec(),
        }
    }
}

impl SelectionConstraints {
    pub fn validate(&self) -> Result<(), RecommendError> {
        if !(0.0..=100.0).contains(&self.max_loss_pct) {
            return Err(RecommendError::Constraints(format!(
                "max_loss_pct {} outside [0, 100]",
                self.max_loss_pct
            )));
        }
        if self.min_bw_hz == 0 {
            return Err(RecommendError::Constraints("min_bw_hz must be positive".into()));
        }
        if self.tie_break_order.is_empty() {
            return Err(RecommendError::Constraints("tie-break order is empty".into()));
        }
        for (i, m) in self.tie_break_order.iter().enumerate() {
            if self.tie_break_order[..i].contains(m) {
                return Err(RecommendError::Constraints(format!("metric {m} repeated")));
            }
        }
        Ok(())
    }
}

/// A grid cell with the metrics used for ranking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub sf: u8,
    pub bw_hz: u32,
    pub cr: CodingRate,
    pub rssi_dbm: f64,
    pub snr_db: f64,
    pub loss_pct: f64,
    pub excess_db: f64,
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sf={} bw_khz={} cr={} rssi_dbm={:.3} snr_db={:.3} loss_pct={:.3} excess_db={:.3}",
            self.sf,
            render_scaled(u64::from(self.bw_hz), 3),
            self.cr,
            self.rssi_dbm,
            self.snr_db,
            self.loss_pct,
            self.excess_db
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub winner: Candidate,
    /// Remaining feasible cells, best first.
    pub runners_up: Vec<Candidate>,
}

fn rank(order: &[Metric], a: &Candidate, b: &Candidate) -> Ordering {
    order
        .iter()
        .map(|m| m.compare(a, b))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
        .then(a.sf.cmp(&b.sf))
        .then(a.bw_hz.cmp(&b.bw_hz))
}

/// Candidates for all 36 grid cells, with excess loss filled in.
pub fn grid_candidates(table: &MeasurementTable, ctx: &BudgetContext) -> Result<Vec<Candidate>, DatasetError> {
    let mut out = Vec::with_capacity(36);
    for &sf in &GRID_SPREADING_FACTORS {
        for &bw_hz in &GRID_BANDWIDTHS_HZ {
            let record = table.grid_cell(sf, bw_hz)?;
            let breakdown = cell_breakdown(table, ctx, sf, bw_hz)?;
            out.push(Candidate {
                sf,
                bw_hz,
                cr: record.cr,
                rssi_dbm: record.sample()?.rssi_dbm,
                snr_db: record.snr_db,
                loss_pct: record.loss()?,
                excess_db: breakdown.excess_db,
            });
        }
    }
    Ok(out)
}

pub fn recommend_sf_bw(
    table: &MeasurementTable,
    ctx: &BudgetContext,
    constraints: &SelectionConstraints,
) -> Result<Recommendation, RecommendError> {
    constraints.validate()?;
    let all = grid_candidates(table, ctx)?;
    let bw_ok = |c: &Candidate| c.bw_hz >= constraints.min_bw_hz;
    let loss_ok = |c: &Candidate| c.loss_pct <= constraints.max_loss_pct;

    let mut feasible: Vec<Candidate> = all.iter().copied().filter(|c| bw_ok(c) && loss_ok(c)).collect();
    if feasible.is_empty() {
        let binding = if !all.iter().any(bw_ok) {
            format!(
                "no cell has bandwidth >= {} kHz",
                render_scaled(u64::from(constraints.min_bw_hz), 3)
            )
        } else if !all.iter().any(loss_ok) {
            format!("no cell has loss <= {}%", constraints.max_loss_pct)
        } else {
            format!(
                "bandwidth >= {} kHz and loss <= {}% exclude every cell jointly",
                render_scaled(u64::from(constraints.min_bw_hz), 3),
                constraints.max_loss_pct
            )
        };
        return Err(RecommendError::NoFeasible(binding));
    }
    feasible.sort_by(|a, b| rank(&constraints.tie_break_order, a, b));
    let winner = feasible.remove(0);
    Ok(Recommendation {
        winner,
        runners_up: feasible,
    })
}

/// Best coding rate by SNR among the sweep records at one cell; ties go to
/// the smaller numerator.
pub fn recommend_cr(table: &MeasurementTable, sf: u8, bw_hz: u32) -> Result<CodingRate, RecommendError> {
    table
        .cr_sweep_at(sf, bw_hz)
        .min_by(|a, b| b.snr_db.total_cmp(&a.snr_db).then(a.cr.cmp(&b.cr)))
        .map(|r| r.cr)
        .ok_or(RecommendError::NoSweep { sf, bw_hz })
}

/// Cell whose coding-rate sweep should decide the CR for a chosen (sf, bw).
/// That cell itself when it has a sweep, otherwise the table's only sweep
/// cell. Measurement campaigns usually sweep CR at a single configuration.
pub fn sweep_cell_for(table: &MeasurementTable, sf: u8, bw_hz: u32) -> Result<(u8, u32), RecommendError> {
    if table.cr_sweep_at(sf, bw_hz).next().is_some() {
        return Ok((sf, bw_hz));
    }
    let mut cells: Vec<(u8, u32)> = table.series(Series::CrSweep).map(|r| (r.sf, r.bw_hz)).collect();
    cells.dedup();
    match cells.as_slice() {
        [] => Err(RecommendError::NoSweep { sf, bw_hz }),
        [only] => Ok(*only),
        many => Err(RecommendError::AmbiguousSweep(many.len())),
    }
}
