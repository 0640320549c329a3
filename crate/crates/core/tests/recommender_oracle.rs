// SPDX-License-Identifier: Apache-2.0

use loralink::dataset::{campaign, MeasurementRecord, MeasurementTable, Series};
use loralink::recommender::{grid_candidates, recommend_sf_bw, Metric, SelectionConstraints};
use loralink::rng::SplitMix64;
use loralink::types::{GRID_BANDWIDTHS_HZ, GRID_SPREADING_FACTORS};
use loralink::{BudgetContext, CodingRate};

/// Random complete grid. SNR and RSSI are quarter-dB multiples so exact ties
/// actually happen and shifts by whole dB stay exact.
fn random_table(rng: &mut SplitMix64) -> MeasurementTable {
    let mut t = MeasurementTable::new();
    for sf in GRID_SPREADING_FACTORS {
        for bw_hz in GRID_BANDWIDTHS_HZ {
            let snr = f64::from(rng.range_inclusive(0, 24)) / 4.0 - 2.0;
            let rssi = -f64::from(rng.range_inclusive(320, 480)) / 4.0;
            let loss = [0.0, 0.0, 0.0, 5.0, 16.6, 54.0][rng.range_inclusive(0, 5) as usize];
            t.insert(MeasurementRecord {
                series: Series::Grid,
                sf,
                bw_hz,
                cr: CodingRate::CR_4_8,
                rssi_dbm: Some(rssi),
                snr_db: snr,
                loss_pct: Some(loss),
            })
            .unwrap();
        }
    }
    t
}

fn random_constraints(rng: &mut SplitMix64) -> SelectionConstraints {
    let orders = [
        vec![Metric::Snr, Metric::ExcessLoss, Metric::Rssi],
        vec![Metric::Rssi, Metric::Snr],
        vec![Metric::ExcessLoss],
        vec![Metric::Snr],
    ];
    SelectionConstraints {
        max_loss_pct: [0.0, 10.0, 20.0, 100.0][rng.range_inclusive(0, 3) as usize],
        min_bw_hz: GRID_BANDWIDTHS_HZ[rng.range_inclusive(0, 5) as usize],
        tie_break_order: orders[rng.range_inclusive(0, 3) as usize].clone(),
    }
}

/// Linear scan keeping the best cell seen so far.
fn brute_force(table: &MeasurementTable, ctx: &BudgetContext, c: &SelectionConstraints) -> Option<(u8, u32)> {
    let mut best: Option<(u8, u32, f64, f64, f64)> = None;
    for sf in GRID_SPREADING_FACTORS {
        for bw in GRID_BANDWIDTHS_HZ {
            let r = table.grid_cell(sf, bw).unwrap();
            let loss = r.loss_pct.unwrap();
            if loss > c.max_loss_pct || bw < c.min_bw_hz {
                continue;
            }
            let rssi = r.rssi_dbm.unwrap();
            let excess = loralink::dataset::cell_breakdown(table, ctx, sf, bw).unwrap().excess_db;
            let cand = (sf, bw, r.snr_db, excess, rssi);
            let better = match best {
                None => true,
                Some(b) => {
                    let mut verdict = None;
                    for m in &c.tie_break_order {
                        let (x, y) = match m {
                            Metric::Snr => (cand.2, b.2),
                            Metric::ExcessLoss => (-cand.3, -b.3),
                            Metric::Rssi => (cand.4, b.4),
                        };
                        if x > y {
                            verdict = Some(true);
                            break;
                        }
                        if x < y {
                            verdict = Some(false);
                            break;
                        }
                    }
                    // cells are visited in ascending (sf, bw), so a full tie keeps the earlier one
                    verdict.unwrap_or(false)
                }
            };
            if better {
                best = Some(cand);
            }
        }
    }
    best.map(|b| (b.0, b.1))
}

#[test]
fn matches_brute_force_on_random_tables() {
    let ctx = BudgetContext::default();
    let mut rng = SplitMix64::new(2024);
    let mut feasible_trials = 0;
    for trial in 0..400 {
        let table = random_table(&mut rng);
        let c = random_constraints(&mut rng);
        let want = brute_force(&table, &ctx, &c);
        match recommend_sf_bw(&table, &ctx, &c) {
            Ok(rec) => {
                feasible_trials += 1;
                assert_eq!(Some((rec.winner.sf, rec.winner.bw_hz)), want, "trial {trial} {c:?}");
            }
            Err(_) => assert_eq!(want, None, "trial {trial}"),
        }
    }
    assert!(feasible_trials >= 200, "only {feasible_trials} feasible trials");
}

#[test]
fn snr_shift_leaves_choice_unchanged() {
    let ctx = BudgetContext::default();
    let c = SelectionConstraints::default();
    let mut rng = SplitMix64::new(11);
    for _ in 0..100 {
        let table = random_table(&mut rng);
        let Ok(base) = recommend_sf_bw(&table, &ctx, &c) else {
            continue;
        };
        for shift in [-3.0, 1.0, 5.0] {
            let mut shifted = MeasurementTable::new();
            for r in table.records() {
                shifted
                    .insert(MeasurementRecord {
                        snr_db: r.snr_db + shift,
                        ..*r
                    })
                    .unwrap();
            }
            let rec = recommend_sf_bw(&shifted, &ctx, &c).unwrap();
            // SNR ranks first under the default order, so only its ordering matters
            assert_eq!((rec.winner.sf, rec.winner.bw_hz), (base.winner.sf, base.winner.bw_hz));
        }
    }
}

#[test]
fn raising_min_bw_never_grows_feasible_set() {
    let ctx = BudgetContext::default();
    let table = campaign::measurements();
    let mut previous = usize::MAX;
    for bw in GRID_BANDWIDTHS_HZ {
        let c = SelectionConstraints {
            min_bw_hz: bw,
            max_loss_pct: 100.0,
            ..Default::default()
        };
        let rec = recommend_sf_bw(&table, &ctx, &c).unwrap();
        let size = 1 + rec.runners_up.len();
        assert!(size <= previous);
        previous = size;
        assert!(rec.winner.bw_hz >= bw);
        assert!(rec.runners_up.iter().all(|r| r.bw_hz >= bw));
    }
}

#[test]
fn runners_up_are_ordered_and_feasible() {
    let ctx = BudgetContext::default();
    let rec = recommend_sf_bw(&campaign::measurements(), &ctx, &Default::default()).unwrap();
    let mut prev = rec.winner.snr_db;
    for r in &rec.runners_up {
        assert!(r.loss_pct <= 0.0 && r.bw_hz >= 62_500);
        assert!(r.snr_db <= prev);
        prev = r.snr_db;
    }
}

#[test]
fn repeated_calls_are_identical() {
    let ctx = BudgetContext::default();
    let table = campaign::measurements();
    let a = recommend_sf_bw(&table, &ctx, &Default::default()).unwrap();
    let b = recommend_sf_bw(&table, &ctx, &Default::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    assert_eq!(grid_candidates(&table, &ctx).unwrap().len(), 36);
}
