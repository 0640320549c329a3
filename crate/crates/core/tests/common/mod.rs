// SPDX-License-Identifier: Apache-2.0

//! Reference implementations used only by tests. Nothing here calls into the
//! code paths it checks.

#![allow(dead_code)]

use loralink::phy::FrameParams;
use loralink::rng::SplitMix64;
use loralink::tdma::{NodeSpec, PayloadSource, SlotTiming, SyncWord};
use loralink::types::GRID_BANDWIDTHS_HZ;
use loralink::{CodingRate, RadioConfig};

/// Datasheet time on air, written out line by line with float ceil.
#[allow(clippy::too_many_arguments)]
pub fn airtime_oracle(
    sf: u32,
    bw_hz: f64,
    cr_index: u32,
    payload_bytes: u32,
    preamble_symbols: u32,
    explicit_header: bool,
    crc_on: bool,
    ldro: Option<bool>,
) -> f64 {
    let t_sym = 2f64.powi(sf as i32) / bw_hz;
    let de = match ldro {
        Some(v) => v,
        None => t_sym > 0.016,
    };
    let de = if de { 1.0 } else { 0.0 };
    let ih = if explicit_header { 0.0 } else { 1.0 };
    let crc = if crc_on { 1.0 } else { 0.0 };
    let sf = sf as f64;
    let pl = payload_bytes as f64;
    let t_preamble = (preamble_symbols as f64 + 4.25) * t_sym;
    let raw = ((8.0 * pl - 4.0 * sf + 28.0 + 16.0 * crc - 20.0 * ih) / (4.0 * (sf - 2.0 * de))).ceil()
        * (cr_index as f64 + 4.0);
    let payload_symb_nb = 8.0 + if raw > 0.0 { raw } else { 0.0 };
    let t_payload = payload_symb_nb * t_sym;
    t_preamble + t_payload
}

/// Measured RSSI (dBm): rows BW 10.4..500 kHz, columns SF 7..12.
pub const RSSI: [[f64; 6]; 6] = [
    [-92.8, -93.8, -110.0, -110.8, -111.2, -111.9],
    [-91.0, -92.66, -109.8, -110.6, -109.4, -109.0],
    [-89.2, -91.8, -108.4, -109.6, -108.25, -108.2],
    [-87.28, -91.83, -108.0, -108.6, -108.6, -108.8],
    [-80.5, -91.0, -105.1, -108.2, -108.0, -108.5],
    [-81.33, -90.6, -103.0, -107.8, -106.0, -106.8],
];

/// Measured SNR (dB), same layout.
pub const SNR: [[f64; 6]; 6] = [
    [8.4, 11.55, 7.85, 6.05, 4.5, 4.3],
    [8.0, 10.25, 8.8, 7.6, 6.6, 5.55],
    [8.35, 10.2, 7.9, 9.8, 7.5, 6.45],
    [8.03, 10.18, 8.5, 7.7, 8.35, 6.95],
    [7.64, 10.04, 7.75, 7.9, 7.3, 6.7],
    [3.88, 5.35, 5.65, 6.2, 5.3, 4.85],
];

/// Reference excess loss (dB), same layout.
pub const EXCESS: [[f64; 6]; 6] = [
    [24.532, 25.239, 41.805, 42.909, 43.664, 44.371],
    [22.738, 24.137, 41.483, 42.441, 41.405, 41.213],
    [21.023, 23.342, 40.198, 41.178, 40.106, 40.232],
    [19.065, 23.377, 39.719, 40.427, 40.338, 40.744],
    [12.407, 22.556, 36.986, 39.998, 39.887, 40.486],
    [13.968, 22.922, 35.191, 39.879, 38.269, 39.175],
];

/// Excess loss by direct arithmetic on the printed formulas.
#[allow(clippy::too_many_arguments)]
pub fn excess_oracle(rssi: f64, snr: f64, pt: f64, gt: f64, gr: f64, d: f64, f: f64, c: f64) -> f64 {
    let noise_term = 10.0 * (1.0 + 10f64.powf(snr / 10.0)).log10();
    let esp = rssi + snr - noise_term;
    let pl = pt + gt + gr - esp;
    let fsl = 20.0 * (4.0 * std::f64::consts::PI * d * f / c).log10();
    pl - fsl
}

/// Largest |reconstructed - published| over all cells at a given Pt.
pub fn max_table_deviation(pt: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for row in 0..6 {
        for col in 0..6 {
            let x = excess_oracle(RSSI[row][col], SNR[row][col], pt, 5.15, 5.15, 5000.0, 433e6, 3e8);
            worst = worst.max((x - EXCESS[row][col]).abs());
        }
    }
    worst
}

/// Random TDMA setup: 2..=10 nodes with distinct sync words, random slot
/// slack, guard, handshake, drop rates, duration and seed.
pub struct Scenario {
    pub nodes: Vec<NodeSpec>,
    pub timing: SlotTiming,
    pub drops: Vec<f64>,
    pub duration_s: f64,
    pub seed: u64,
}

pub fn random_scenario(rng: &mut SplitMix64) -> Scenario {
    let n = rng.range_inclusive(2, 10) as usize;
    let mut words = Vec::new();
    while words.len() < n {
        let w = SyncWord(rng.range_inclusive(0, 0xFFFF) as u16);
        if !words.contains(&w) {
            words.push(w);
        }
    }
    let nodes: Vec<NodeSpec> = words
        .into_iter()
        .map(|sync_word| NodeSpec {
            sync_word,
            config: RadioConfig::campaign(
                rng.range_inclusive(7, 9) as u8,
                GRID_BANDWIDTHS_HZ[rng.range_inclusive(2, 5) as usize],
                CodingRate::CR_4_8,
            ),
            frame: FrameParams::with_payload(rng.range_inclusive(1, 2) as u16),
            payload: PayloadSource::ultrasonic(rng.next_u64()),
        })
        .collect();
    let mut timing = SlotTiming::default_for(&nodes).unwrap();
    timing.slot_s += f64::from(rng.range_inclusive(0, 50)) / 1000.0;
    timing.guard_s = f64::from(rng.range_inclusive(0, 20)) / 1000.0;
    timing.handshake_s = f64::from(rng.range_inclusive(0, 3)) / 1000.0;
    if timing.handshake_s > 0.0 {
        timing.slot_s += timing.handshake_s;
    }
    timing.frames_per_slot = 1;
    let drops = (0..n).map(|_| rng.next_f64()).collect();
    Scenario {
        nodes,
        timing,
        drops,
        duration_s: f64::from(rng.range_inclusive(1, 30)),
        seed: rng.next_u64(),
    }
}
