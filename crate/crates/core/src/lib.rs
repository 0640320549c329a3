// SPDX-License-Identifier: Apache-2.0

//! LoRa link-quality engineering.
//!
//! - [`link_budget`]: register conversions, effective signal power, path loss,
//!   free-space loss and excess loss.
//! - [`phy`]: symbol time, time on air, bit rate and monopole sizing.
//! - [`dataset`]: measurement tables and grid reconstruction.
//! - [`recommender`]: picking a configuration from measured data.
//! - [`tdma`]: a deterministic single-gateway TDMA simulator.
//! - [`uplink`]: ThingSpeak-style channel updates for received packets.
//!
//! The bundled fixtures under [`dataset::campaign`] hold a 433 MHz field
//! campaign over a 5 km link; [`BudgetContext::default`] carries the matching
//! transmitter and antenna constants.

pub mod dataset;
pub mod link_budget;
pub mod phy;
pub mod recommender;
pub mod rng;
pub mod tdma;
pub mod types;
pub mod uplink;

pub use types::{CellRef, CodingRate, ConfigError, GridMode, LinkParams, RadioConfig, SignalSample};

/// Propagation speed used throughout, m/s.
pub const SPEED_OF_LIGHT_MPS: f64 = 3.0e8;
/// SX1278 packet RSSI offset in the 433 MHz band.
pub const RSSI_OFFSET_433_DB: f64 = 157.0;
/// Nominal quarter-wave monopole gain.
pub const MONOPOLE_GAIN_DBI: f64 = 5.15;
/// Transmit power of the campaign fixtures (SX1278 maximum).
pub const DEFAULT_TX_POWER_DBM: f64 = 20.0;
pub const DEFAULT_FREQ_HZ: u64 = 433_000_000;

/// Everything besides a measurement that the loss chain needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetContext {
    pub link: LinkParams,
    pub tx_power_dbm: f64,
    pub freq_hz: u64,
}

impl Default for BudgetContext {
    fn default() -> Self {
        BudgetContext {
            link: LinkParams::default(),
            tx_power_dbm: DEFAULT_TX_POWER_DBM,
            freq_hz: DEFAULT_FREQ_HZ,
        }
    }
}

impl BudgetContext {
    pub fn config(&self, sf: u8, bw_hz: u32, cr: CodingRate) -> RadioConfig {
        RadioConfig {
            sf,
            bw_hz,
            cr,
            tx_power_dbm: self.tx_power_dbm,
            freq_hz: self.freq_hz,
        }
    }
}
