// SPDX-License-Identifier: Apache-2.0

//! Received-signal conversions and the loss chain
//! `sample -> ESP -> path loss -> free-space loss -> excess loss`.
//!
//! All quantities are decibel values carried as `f64`; logarithms are
//! evaluated directly, never looked up.

use std::f64::consts::PI;

use thiserror::Error;

use crate::types::{LinkParams, RadioConfig, SignalSample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BudgetError {
    #[error("packet loss undefined: no packets were sent")]
    NoPacketsSent,
    #[error("inconsistent counts: {lost} lost out of {sent} sent")]
    InconsistentCounts { lost: u64, sent: u64 },
    #[error("{name} must be positive and finite, got {value}")]
    Domain { name: &'static str, value: f64 },
}

/// Loss figures derived from one received sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub esp_dbm: f64,
    pub path_loss_db: f64,
    pub fsl_db: f64,
    /// `path_loss_db - fsl_db`.
    pub excess_db: f64,
}

/// Packet RSSI register value to dBm: `raw - offset`.
pub fn rssi_from_register(raw: u8, offset_db: f64) -> f64 {
    f64::from(raw) - offset_db
}

/// Packet SNR register (two's complement, quarter-dB steps) to dB.
pub fn snr_from_register(raw: i8) -> f64 {
    f64::from(raw) / 4.0
}

/// Loss as a percentage of packets sent.
pub fn packet_loss_pct(lost: u64, sent: u64) -> Result<f64, BudgetError> {
    if sent == 0 {
        return Err(BudgetError::NoPacketsSent);
    }
    if lost > sent {
        return Err(BudgetError::InconsistentCounts { lost, sent });
    }
    Ok(100.0 * lost as f64 / sent as f64)
}

/// Effective signal power: RSSI with the noise contribution removed,
/// `RSSI + SNR - 10 log10(1 + 10^(SNR/10))`.
pub fn esp(sample: &SignalSample) -> f64 {
    let snr = sample.snr_db;
    sample.rssi_dbm + snr - 10.0 * (1.0 + 10f64.powf(0.1 * snr)).log10()
}

/// Empirical path loss `Pt + Gt + Gr - ESP`.
pub fn path_loss(params: &LinkParams, config: &RadioConfig, esp_dbm: f64) -> f64 {
    config.tx_power_dbm + params.gt_dbi + params.gr_dbi - esp_dbm
}

/// Friis free-space loss in dB.
pub fn free_space_loss(distance_m: f64, freq_hz: f64, c_mps: f64) -> Result<f64, BudgetError> {
    for (name, value) in [
        ("distance", distance_m),
        ("frequency", freq_hz),
        ("propagation speed", c_mps),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(BudgetError::Domain { name, value });
        }
    }
    Ok(20.0 * distance_m.log10() + 20.0 * freq_hz.log10() - 20.0 * c_mps.log10() + 20.0 * (4.0 * PI).log10())
}

pub fn loss_breakdown(
    params: &LinkParams,
    config: &RadioConfig,
    sample: &SignalSample,
) -> Result<LossBreakdown, BudgetError> {
    let esp_dbm = esp(sample);
    let path_loss_db = path_loss(params, config, esp_dbm);
    let fsl_db = free_space_loss(params.distance_m, config.freq_hz as f64, params.c_mps)?;
    Ok(LossBreakdown {
        esp_dbm,
        path_loss_db,
        fsl_db,
        excess_db: path_loss_db - fsl_db,
    })
}
