// SPDX-License-Identifier: Apache-2.0

//! LoRa PHY timing and quarter-wave monopole dimensioning.
//!
//! Time on air follows the SX127x datasheet:
//!
//! ```text
//! T_sym      = 2^SF / BW
//! T_preamble = (n_preamble + 4.25) * T_sym
//! n_payload  = 8 + max(ceil((8PL - 4SF + 28 + 16CRC - 20IH) / (4(SF - 2DE))) * (CR + 4), 0)
//! T_packet   = T_preamble + n_payload * T_sym
//! ```
//!
//! `CR` here is the datasheet coding index (1..=4, rate `4/(4+CR)`), which is
//! not the same thing as the `k/8` rate stored in [`RadioConfig`]. Only `4/8`
//! maps exactly (to index 4); every other rate needs an explicit index in
//! [`FrameParams::coding_index`].

use thiserror::Error;

use crate::types::RadioConfig;

/// Symbol time above which low-data-rate optimisation is switched on when
/// the frame does not say otherwise.
pub const LDRO_THRESHOLD_S: f64 = 0.016;

/// Element length as a fraction of the free-space quarter wavelength.
pub const ELEMENT_SHORTENING: f64 = 0.953;
/// Radial length as a fraction of the free-space quarter wavelength.
pub const RADIAL_LENGTHENING: f64 = 1.0625;
pub const RADIAL_ANGLE_DEG: f64 = 45.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyError {
    #[error("coding rate {0} has no exact datasheet index; pass one explicitly")]
    UnmappedCodingRate(crate::types::CodingRate),
    #[error("datasheet coding index {0} outside 1..=4")]
    BadCodingIndex(u8),
    #[error("SF - 2*DE = {0} leaves no payload bits per symbol")]
    DegenerateSymbol(i64),
    #[error("frequency must be positive and finite, got {0}")]
    BadFrequency(f64),
}

/// Frame layout on air.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameParams {
    pub payload_bytes: u16,
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub crc_on: bool,
    /// `None` derives it from the symbol time.
    pub low_data_rate_optimize: Option<bool>,
    /// Datasheet coding index override (1..=4).
    pub coding_index: Option<u8>,
}

impl Default for FrameParams {
    fn default() -> Self {
        FrameParams {
            payload_bytes: 2,
            preamble_symbols: 8,
            explicit_header: true,
            crc_on: true,
            low_data_rate_optimize: None,
            coding_index: None,
        }
    }
}

impl FrameParams {
    pub fn with_payload(payload_bytes: u16) -> Self {
        FrameParams {
            payload_bytes,
            ..Default::default()
        }
    }

    pub fn ldro_for(&self, config: &RadioConfig) -> bool {
        self.low_data_rate_optimize
            .unwrap_or_else(|| symbol_duration(config) > LDRO_THRESHOLD_S)
    }

    fn resolve_coding_index(&self, config: &RadioConfig) -> Result<u8, PhyError> {
        let index = match self.coding_index {
            Some(i) => i,
            None => config
                .cr
                .datasheet_index()
                .ok_or(PhyError::UnmappedCodingRate(config.cr))?,
        };
        if (1..=4).contains(&index) {
            Ok(index)
        } else {
            Err(PhyError::BadCodingIndex(index))
        }
    }
}

/// `2^SF / BW`, in seconds.
pub fn symbol_duration(config: &RadioConfig) -> f64 {
    f64::from(1u32 << config.sf) / f64::from(config.bw_hz)
}

/// Number of payload symbols (including the 8 mandatory ones).
pub fn payload_symbols(config: &RadioConfig, frame: &FrameParams) -> Result<u32, PhyError> {
    let cr = i64::from(frame.resolve_coding_index(config)?);
    let sf = i64::from(config.sf);
    let de = i64::from(frame.ldro_for(config));
    let ih = i64::from(!frame.explicit_header);
    let crc = i64::from(frame.crc_on);

    let bits_per_block = sf - 2 * de;
    if bits_per_block <= 0 {
        return Err(PhyError::DegenerateSymbol(bits_per_block));
    }
    let numerator = 8 * i64::from(frame.payload_bytes) - 4 * sf + 28 + 16 * crc - 20 * ih;
    let denominator = 4 * bits_per_block;
    let blocks = if numerator > 0 {
        (numerator + denominator - 1) / denominator
    } else {
        0
    };
    Ok(8 + (blocks * (cr + 4)) as u32)
}

/// Frame duration on air, in seconds.
pub fn time_on_air(config: &RadioConfig, frame: &FrameParams) -> Result<f64, PhyError> {
    let t_sym = symbol_duration(config);
    let preamble = (f64::from(frame.preamble_symbols) + 4.25) * t_sym;
    let payload = f64::from(payload_symbols(config, frame)?) * t_sym;
    Ok(preamble + payload)
}

/// `SF * (BW / 2^SF) * CR`, with CR as the stored `k/8` ratio.
pub fn nominal_bit_rate(config: &RadioConfig) -> f64 {
    f64::from(config.sf) * (f64::from(config.bw_hz) / f64::from(1u32 << config.sf)) * config.cr.ratio()
}

/// Quarter-wave monopole with four drooping radials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonopoleDesign {
    pub element_len_m: f64,
    pub radial_len_m: f64,
    pub radial_angle_deg: f64,
    pub gain_dbi: f64,
}

pub fn monopole_dimensions(freq_hz: f64) -> Result<MonopoleDesign, PhyError> {
    if !(freq_hz.is_finite() && freq_hz > 0.0) {
        return Err(PhyError::BadFrequency(freq_hz));
    }
    let quarter_wave = crate::SPEED_OF_LIGHT_MPS / (4.0 * freq_hz);
    Ok(MonopoleDesign {
        element_len_m: ELEMENT_SHORTENING * quarter_wave,
        radial_len_m: RADIAL_LENGTHENING * quarter_wave,
        radial_angle_deg: RADIAL_ANGLE_DEG,
        gain_dbi: crate::MONOPOLE_GAIN_DBI,
    })
}
