// SPDX-License-Identifier: Apache-2.0

//! Shared radio vocabulary: spreading factor, bandwidth, coding rate and the
//! configuration / link records built from them.
//!
//! Bandwidth and carrier frequency are held as integer hertz so that the
//! kHz / MHz text renderings round-trip exactly (10.4 kHz is 10400 Hz, not a
//! binary fraction).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Spreading factors swept in the field campaign.
pub const GRID_SPREADING_FACTORS: [u8; 6] = [7, 8, 9, 10, 11, 12];

/// Bandwidths swept in the field campaign, in hertz.
pub const GRID_BANDWIDTHS_HZ: [u32; 6] = [10_400, 20_800, 62_500, 125_000, 250_000, 500_000];

/// Coding-rate numerators swept in the field campaign (denominator is always 8).
pub const GRID_CODING_NUMERATORS: [u8; 4] = [4, 5, 6, 7];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{field} = {value} is not in the parameter grid (allowed: {allowed})")]
    OffGrid {
        field: &'static str,
        value: String,
        allowed: String,
    },
    #[error("{field} = {value} is out of range: {reason}")]
    OutOfRange {
        field: &'static str,
        value: String,
        reason: &'static str,
    },
    #[error("cannot parse {what}: {input:?}")]
    Parse { what: &'static str, input: String },
}

/// Coding rate in the `k/8` convention: `k` information bits per 8 coded bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CodingRate(u8);

impl CodingRate {
    pub const DENOMINATOR: u8 = 8;
    pub const CR_4_8: CodingRate = CodingRate(4);

    /// Accepts numerators 4..=7.
    pub fn new(numerator: u8) -> Result<Self, ConfigError> {
        if (4..=7).contains(&numerator) {
            Ok(CodingRate(numerator))
        } else {
            Err(ConfigError::OutOfRange {
                field: "cr",
                value: format!("{numerator}/8"),
                reason: "numerator must be 4..7 over a denominator of 8",
            })
        }
    }

    /// Builds from a numerator/denominator pair, rejecting any denominator but 8.
    pub fn from_parts(numerator: u8, denominator: u8) -> Result<Self, ConfigError> {
        if denominator != Self::DENOMINATOR {
            return Err(ConfigError::OutOfRange {
                field: "cr",
                value: format!("{numerator}/{denominator}"),
                reason: "denominator must be exactly 8",
            });
        }
        Self::new(numerator)
    }

    pub fn numerator(self) -> u8 {
        self.0
    }

    pub fn ratio(self) -> f64 {
        f64::from(self.0) / f64::from(Self::DENOMINATOR)
    }

    /// Datasheet coding index (1..=4, rate 4/(4+index)) for rates that have an
    /// exact datasheet equivalent. Only 4/8 does.
    pub fn datasheet_index(self) -> Option<u8> {
        (self.0 == 4).then_some(4)
    }
}

impl fmt::Display for CodingRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0, Self::DENOMINATOR)
    }
}

impl FromStr for CodingRate {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_err = || ConfigError::Parse {
            what: "coding rate",
            input: s.to_string(),
        };
        let (num, den) = s.trim().split_once('/').ok_or_else(parse_err)?;
        let num: u8 = num.trim().parse().map_err(|_| parse_err())?;
        let den: u8 = den.trim().parse().map_err(|_| parse_err())?;
        CodingRate::from_parts(num, den)
    }
}

/// Whether a configuration must sit on the campaign grid or only satisfy
/// physical sanity limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridMode {
    #[default]
    Validated,
    Freeform,
}

/// One LoRa physical-layer configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    pub sf: u8,
    pub bw_hz: u32,
    pub cr: CodingRate,
    pub tx_power_dbm: f64,
    pub freq_hz: u64,
}

impl RadioConfig {
    /// 20 dBm at 433 MHz, the campaign's transmitter settings.
    pub fn campaign(sf: u8, bw_hz: u32, cr: CodingRate) -> Self {
        RadioConfig {
            sf,
            bw_hz,
            cr,
            tx_power_dbm: crate::DEFAULT_TX_POWER_DBM,
            freq_hz: crate::DEFAULT_FREQ_HZ,
        }
    }

    /// Checks the invariants that hold in every mode.
    pub fn validate_freeform(&self) -> Result<(), ConfigError> {
        if !GRID_SPREADING_FACTORS.contains(&self.sf) {
            return Err(ConfigError::OffGrid {
                field: "sf",
                value: self.sf.to_string(),
                allowed: "7, 8, 9, 10, 11, 12".into(),
            });
        }
        if self.bw_hz == 0 {
            return Err(ConfigError::OutOfRange {
                field: "bw_hz",
                value: "0".into(),
                reason: "bandwidth must be positive",
            });
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(ConfigError::OutOfRange {
                field: "tx_power_dbm",
                value: self.tx_power_dbm.to_string(),
                reason: "transmit power must be finite",
            });
        }
        if self.freq_hz == 0 {
            return Err(ConfigError::OutOfRange {
                field: "freq_hz",
                value: "0".into(),
                reason: "carrier frequency must be positive",
            });
        }
        Ok(())
    }

    pub fn validate(&self, mode: GridMode) -> Result<(), ConfigError> {
        match mode {
            GridMode::Validated => validate_campaign_grid(self),
            GridMode::Freeform => self.validate_freeform(),
        }
    }

    pub fn bw_khz_text(&self) -> String {
        render_scaled(u64::from(self.bw_hz), 3)
    }
}

/// Accepts exactly the 6 x 6 x 4 campaign grid; transmit power and frequency
/// only need to be physically sane.
pub fn validate_campaign_grid(config: &RadioConfig) -> Result<(), ConfigError> {
    config.validate_freeform()?;
    if !GRID_BANDWIDTHS_HZ.contains(&config.bw_hz) {
        return Err(ConfigError::OffGrid {
            field: "bw",
            value: format!("{} kHz", config.bw_khz_text()),
            allowed: "10.4, 20.8, 62.5, 125, 250, 500 kHz".into(),
        });
    }
    // CodingRate already restricts numerators to 4..=7.
    Ok(())
}

/// All 144 grid configurations in (sf, bw, cr) order.
pub fn campaign_grid() -> impl Iterator<Item = RadioConfig> {
    GRID_SPREADING_FACTORS.into_iter().flat_map(|sf| {
        GRID_BANDWIDTHS_HZ.into_iter().flat_map(move |bw| {
            GRID_CODING_NUMERATORS
                .into_iter()
                .map(move |k| RadioConfig::campaign(sf, bw, CodingRate(k)))
        })
    })
}

impl fmt::Display for RadioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sf={},bw_khz={},cr={},pt_dbm={},f_mhz={}",
            self.sf,
            self.bw_khz_text(),
            self.cr,
            self.tx_power_dbm,
            render_scaled(self.freq_hz, 6)
        )
    }
}

impl FromStr for RadioConfig {
    type Err = ConfigError;

    /// Parses the canonical `sf=..,bw_khz=..,cr=k/8,pt_dbm=..,f_mhz=..` form.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut sf = None;
        let mut bw_hz = None;
        let mut cr = None;
        let mut pt = None;
        let mut freq = None;
        for part in s.trim().split(',') {
            let (key, value) = part.split_once('=').ok_or_else(|| ConfigError::Parse {
                what: "config field",
                input: part.to_string(),
            })?;
            let value = value.trim();
            match key.trim() {
                "sf" => sf = Some(parse_num::<u8>(value, "sf")?),
                "bw_khz" => bw_hz = Some(parse_scaled(value, 3, "bw_khz")?),
                "cr" => cr = Some(value.parse::<CodingRate>()?),
                "pt_dbm" => pt = Some(parse_num::<f64>(value, "pt_dbm")?),
                "f_mhz" => freq = Some(parse_scaled(value, 6, "f_mhz")?),
                _ => {
                    return Err(ConfigError::Parse {
                        what: "config key",
                        input: key.to_string(),
                    })
                }
            }
        }
        let missing = |what| ConfigError::Parse {
            what,
            input: s.to_string(),
        };
        let bw_hz = bw_hz.ok_or_else(|| missing("bw_khz"))?;
        Ok(RadioConfig {
            sf: sf.ok_or_else(|| missing("sf"))?,
            bw_hz: u32::try_from(bw_hz).map_err(|_| missing("bw_khz"))?,
            cr: cr.ok_or_else(|| missing("cr"))?,
            tx_power_dbm: pt.ok_or_else(|| missing("pt_dbm"))?,
            freq_hz: freq.ok_or_else(|| missing("f_mhz"))?,
        })
    }
}

fn parse_num<T: FromStr>(s: &str, what: &'static str) -> Result<T, ConfigError> {
    s.parse().map_err(|_| ConfigError::Parse {
        what,
        input: s.to_string(),
    })
}

/// Renders `value / 10^decimals` as an exact decimal with trailing zeros trimmed.
pub(crate) fn render_scaled(value: u64, decimals: u32) -> String {
    let scale = 10u64.pow(decimals);
    let whole = value / scale;
    let frac = value % scale;
    if frac == 0 {
        return whole.to_string();
    }
    let frac = format!("{:0width$}", frac, width = decimals as usize);
    format!("{whole}.{}", frac.trim_end_matches('0'))
}

/// Parses a plain decimal into an integer count of `10^-decimals` units,
/// without going through binary floating point.
pub(crate) fn parse_scaled(s: &str, decimals: u32, what: &'static str) -> Result<u64, ConfigError> {
    let err = || ConfigError::Parse {
        what,
        input: s.to_string(),
    };
    let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let frac = frac.trim_end_matches('0');
    if frac.len() > decimals as usize {
        return Err(err());
    }
    let whole: u64 = if whole.is_empty() {
        0
    } else {
        whole.parse().map_err(|_| err())?
    };
    let frac_units: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse::<u64>().map_err(|_| err())? * 10u64.pow(decimals - frac.len() as u32)
    };
    whole
        .checked_mul(10u64.pow(decimals))
        .and_then(|w| w.checked_add(frac_units))
        .ok_or_else(err)
}

/// Parses a bandwidth written in kHz (`62.5`) into integer Hz.
pub fn parse_bw_khz(s: &str) -> Result<u32, ConfigError> {
    let hz = parse_scaled(s.trim(), 3, "bw_khz")?;
    u32::try_from(hz).map_err(|_| ConfigError::Parse {
        what: "bw_khz",
        input: s.to_string(),
    })
}

/// Renders integer Hz as kHz text, e.g. `10400` as `10.4`.
pub fn format_bw_khz(bw_hz: u32) -> String {
    render_scaled(u64::from(bw_hz), 3)
}

/// One (SF, BW) cell of the measurement grid, written `sf=7,bw_khz=10.4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellRef {
    pub sf: u8,
    pub bw_hz: u32,
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sf={},bw_khz={}", self.sf, format_bw_khz(self.bw_hz))
    }
}

impl FromStr for CellRef {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut sf = None;
        let mut bw_hz = None;
        for part in s.trim().split(',') {
            match part.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
                Some(("sf", v)) if sf.is_none() => sf = Some(parse_num::<u8>(v, "sf")?),
                Some(("bw_khz", v)) if bw_hz.is_none() => bw_hz = Some(parse_bw_khz(v)?),
                _ => {
                    return Err(ConfigError::Parse {
                        what: "cell reference",
                        input: s.to_string(),
                    })
                }
            }
        }
        match (sf, bw_hz) {
            (Some(sf), Some(bw_hz)) => Ok(CellRef { sf, bw_hz }),
            _ => Err(ConfigError::Parse {
                what: "cell reference",
                input: s.to_string(),
            }),
        }
    }
}

/// Link geometry and antenna gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub distance_m: f64,
    pub gt_dbi: f64,
    pub gr_dbi: f64,
    pub c_mps: f64,
    pub rssi_offset_db: f64,
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |field, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange {
                    field,
                    value: value.to_string(),
                    reason: "must be finite and positive",
                })
            }
        };
        check("distance_m", self.distance_m)?;
        check("c_mps", self.c_mps)?;
        check("rssi_offset_db", self.rssi_offset_db)?;
        if !self.gt_dbi.is_finite() || !self.gr_dbi.is_finite() {
            return Err(ConfigError::OutOfRange {
                field: "antenna gain",
                value: format!("{}/{}", self.gt_dbi, self.gr_dbi),
                reason: "gains must be finite",
            });
        }
        Ok(())
    }
}

impl Default for LinkParams {
    /// The 5 km, 433 MHz campaign link with two 5.15 dBi monopoles.
    fn default() -> Self {
        LinkParams {
            distance_m: 5000.0,
            gt_dbi: crate::MONOPOLE_GAIN_DBI,
            gr_dbi: crate::MONOPOLE_GAIN_DBI,
            c_mps: crate::SPEED_OF_LIGHT_MPS,
            rssi_offset_db: crate::RSSI_OFFSET_433_DB,
        }
    }
}

/// A received-signal observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSample {
    pub rssi_dbm: f64,
    pub snr_db: f64,
}

impl SignalSample {
    pub fn new(rssi_dbm: f64, snr_db: f64) -> Self {
        SignalSample { rssi_dbm, snr_db }
    }

    /// Both finite, and RSSI at or below 0 dBm.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.rssi_dbm.is_finite() || !self.snr_db.is_finite() {
            return Err(ConfigError::OutOfRange {
                field: "sample",
                value: format!("rssi={} snr={}", self.rssi_dbm, self.snr_db),
                reason: "RSSI and SNR must be finite",
            });
        }
        if self.rssi_dbm > 0.0 {
            return Err(ConfigError::OutOfRange {
                field: "rssi_dbm",
                value: self.rssi_dbm.to_string(),
                reason: "received power above 0 dBm",
            });
        }
        Ok(())
    }
}
