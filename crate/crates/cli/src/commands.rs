// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, Utc};
use clap::{Args, ValueEnum};
use loralink::dataset::{self, campaign, cell_breakdown, reconstruct_excess_loss, MeasurementTable, SfBwGrid};
use loralink::link_budget::loss_breakdown;
use loralink::phy::FrameParams;
use loralink::recommender::{recommend_cr, recommend_sf_bw, sweep_cell_for, Metric, SelectionConstraints};
use loralink::rng::SplitMix64;
use loralink::tdma::{
    build_schedule_with, drop_model_from_table, run_simulation, NodeSpec, PayloadSource, SimReport, SlotTiming,
    SyncWord,
};
use loralink::types::{format_bw_khz, parse_bw_khz};
use loralink::uplink::{self, bridge_sim_report, ChannelUpdate, DryRunTransport, FieldTarget, Transport};
use loralink::{BudgetContext, CellRef, CodingRate, GridMode, LinkParams, SignalSample, RSSI_OFFSET_433_DB};

use crate::manifest::{RunManifest, BUILTIN_EXCESS, BUILTIN_MEASUREMENTS};
use crate::{output_label, CliError, GlobalArgs, Rendered};

/// Mixed into `--seed` for the per-node payload generators so they do not
/// replay the drop stream.
const PAYLOAD_STREAM: u64 = 0x5041_594C_4F41_4453;

const DEFAULT_EPOCH: &str = "1970-01-01T00:00:00Z";

fn load_fixture(g: &GlobalArgs) -> Result<(MeasurementTable, String), CliError> {
    match &g.fixture {
        None => Ok((campaign::measurements(), BUILTIN_MEASUREMENTS.to_string())),
        Some(path) => Ok((load_table(path)?, path.display().to_string())),
    }
}

fn load_table(path: &Path) -> Result<MeasurementTable, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    dataset::load_measurements(file, GridMode::Validated)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Frequency flags take any float syntax (`433e6`) but must name whole Hz.
fn whole_hz(f: f64) -> Result<u64, CliError> {
    if f.is_finite() && f > 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 {
        Ok(f as u64)
    } else {
        Err(CliError::Usage(format!(
            "--f must be a positive whole number of Hz, got {f}"
        )))
    }
}

fn budget_context(pt: f64, gt: f64, gr: f64, d: f64, f: f64, c: f64) -> Result<BudgetContext, CliError> {
    let link = LinkParams {
        distance_m: d,
        gt_dbi: gt,
        gr_dbi: gr,
        c_mps: c,
        rssi_offset_db: RSSI_OFFSET_433_DB,
    };
    link.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !pt.is_finite() {
        return Err(CliError::Usage(format!("--pt must be finite, got {pt}")));
    }
    Ok(BudgetContext {
        link,
        tx_power_dbm: pt,
        freq_hz: whole_hz(f)?,
    })
}

fn record_context(m: &mut RunManifest, ctx: &BudgetContext) {
    m.param("pt_dbm", ctx.tx_power_dbm)
        .param("gt_dbi", ctx.link.gt_dbi)
        .param("gr_dbi", ctx.link.gr_dbi)
        .param("d_m", ctx.link.distance_m)
        .param("f_hz", ctx.freq_hz)
        .param("c_mps", ctx.link.c_mps);
}

/// Link constants with the field-campaign values as defaults.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Transmit power, dBm.
    #[arg(long, default_value_t = loralink::DEFAULT_TX_POWER_DBM, allow_negative_numbers = true)]
    pub pt: f64,
    /// Transmit antenna gain, dBi.
    #[arg(long, default_value_t = loralink::MONOPOLE_GAIN_DBI, allow_negative_numbers = true)]
    pub gt: f64,
    /// Receive antenna gain, dBi.
    #[arg(long, default_value_t = loralink::MONOPOLE_GAIN_DBI, allow_negative_numbers = true)]
    pub gr: f64,
    /// Link distance, m.
    #[arg(long = "d", default_value_t = 5000.0)]
    pub d: f64,
    /// Carrier frequency, Hz.
    #[arg(long = "f", default_value_t = loralink::DEFAULT_FREQ_HZ as f64)]
    pub f: f64,
    /// Propagation speed, m/s.
    #[arg(long = "c", default_value_t = loralink::SPEED_OF_LIGHT_MPS)]
    pub c: f64,
}

impl ModelArgs {
    fn context(&self) -> Result<BudgetContext, CliError> {
        budget_context(self.pt, self.gt, self.gr, self.d, self.f, self.c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct BudgetArgs {
    /// Measured RSSI, dBm.
    #[arg(
        long,
        allow_negative_numbers = true,
        required_unless_present = "cell",
        conflicts_with = "cell"
    )]
    pub rssi: Option<f64>,
    /// Measured SNR, dB.
    #[arg(
        long,
        allow_negative_numbers = true,
        required_unless_present = "cell",
        conflicts_with = "cell"
    )]
    pub snr: Option<f64>,
    /// Take RSSI and SNR from this fixture cell, e.g. `sf=7,bw_khz=10.4`.
    #[arg(long, value_name = "CELL")]
    pub cell: Option<CellRef>,
    /// Transmit power, dBm.
    #[arg(long, allow_negative_numbers = true)]
    pub pt: f64,
    /// Transmit antenna gain, dBi.
    #[arg(long, allow_negative_numbers = true)]
    pub gt: f64,
    /// Receive antenna gain, dBi.
    #[arg(long, allow_negative_numbers = true)]
    pub gr: f64,
    /// Link distance, m.
    #[arg(long = "d")]
    pub d: f64,
    /// Carrier frequency, Hz.
    #[arg(long = "f")]
    pub f: f64,
    /// Propagation speed, m/s.
    #[arg(long = "c", default_value_t = loralink::SPEED_OF_LIGHT_MPS)]
    pub c: f64,
}

pub fn budget(g: &GlobalArgs, a: &BudgetArgs) -> Result<Rendered, CliError> {
    let ctx = budget_context(a.pt, a.gt, a.gr, a.d, a.f, a.c)?;
    let mut m = RunManifest::new("budget", g.seed);
    let breakdown = match (a.cell, a.rssi, a.snr) {
        (Some(cell), _, _) => {
            let (table, source) = load_fixture(g)?;
            m.input(source).param("cell", cell);
            cell_breakdown(&table, &ctx, cell.sf, cell.bw_hz).map_err(CliError::invalid)?
        }
        (None, Some(rssi), Some(snr)) => {
            let sample = SignalSample::new(rssi, snr);
            sample.validate().map_err(CliError::invalid)?;
            m.param("rssi_dbm", rssi).param("snr_db", snr);
            // SF, bandwidth and coding rate do not enter the budget.
            let config = ctx.config(7, 125_000, CodingRate::CR_4_8);
            loss_breakdown(&ctx.link, &config, &sample).map_err(CliError::invalid)?
        }
        _ => return Err(CliError::Usage("--rssi and --snr, or --cell, are required".into())),
    };
    record_context(&mut m, &ctx);
    m.output(output_label(g));
    let body = format!(
        "esp_dbm={:.3}\npath_loss_db={:.3}\nfsl_db={:.3}\nexcess_db={:.3}\n",
        breakdown.esp_dbm, breakdown.path_loss_db, breakdown.fsl_db, breakdown.excess_db
    );
    Ok(Rendered::ok(m, body))
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    /// Reference grid (`bw_khz,sf7,...,sf12`). Defaults to the published table.
    #[arg(long, value_name = "PATH")]
    pub expected: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

pub fn reconstruct(g: &GlobalArgs, a: &ReconstructArgs) -> Result<Rendered, CliError> {
    let ctx = a.model.context()?;
    let (table, source) = load_fixture(g)?;
    let (expected, expected_source) = match &a.expected {
        None => (campaign::excess_loss(), BUILTIN_EXCESS.to_string()),
        Some(path) => (
            SfBwGrid::from_csv(&read_text(path)?)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?,
            path.display().to_string(),
        ),
    };
    let mut m = RunManifest::new("reconstruct", g.seed);
    m.input(source).input(expected_source);
    record_context(&mut m, &ctx);
    m.param("tolerance_db", g.tolerance).output(output_label(g));

    let grid = reconstruct_excess_loss(&table, &ctx).map_err(CliError::invalid)?;
    let worst = grid.max_deviation(&expected);
    let within = grid.deviations(&expected).filter(|d| d.abs() <= g.tolerance).count();
    let pass = worst.abs() <= g.tolerance;
    let mut body = grid.to_csv(3);
    writeln!(body, "# max_deviation: {worst}").unwrap();
    writeln!(body, "# cells_within_tolerance={within}/36").unwrap();
    writeln!(body, "# result={}", if pass { "pass" } else { "fail" }).unwrap();
    let verdict = if pass {
        Ok(())
    } else {
        Err(CliError::Tolerance(format!(
            "max deviation {:.4} dB at sf={} bw_khz={} exceeds tolerance {} dB",
            worst.abs(),
            worst.sf,
            format_bw_khz(worst.bw_hz),
            g.tolerance
        )))
    };
    Ok(Rendered {
        manifest: m,
        body,
        verdict,
    })
}

fn percent(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if (0.0..=100.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside 0..=100"))
    }
}

fn khz(s: &str) -> Result<u32, String> {
    parse_bw_khz(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct RecommendArgs {
    /// Highest acceptable packet loss, percent.
    #[arg(long, value_parser = percent, default_value = "0")]
    pub max_loss: f64,
    /// Narrowest acceptable bandwidth, kHz.
    #[arg(long, value_parser = khz, default_value = "62.5")]
    pub min_bw_khz: u32,
    /// Ranking order, most important first.
    #[arg(long, value_delimiter = ',', default_value = "snr,excess,rssi")]
    pub tie_break: Vec<Metric>,
    /// Decide the coding rate from the sweep at this cell instead of the
    /// winner's (or the only sweep in the fixture).
    #[arg(long, value_name = "CELL")]
    pub cr_at: Option<CellRef>,
    #[command(flatten)]
    pub model: ModelArgs,
}

pub fn recommend(g: &GlobalArgs, a: &RecommendArgs) -> Result<Rendered, CliError> {
    let ctx = a.model.context()?;
    let (table, source) = load_fixture(g)?;
    let constraints = SelectionConstraints {
        max_loss_pct: a.max_loss,
        min_bw_hz: a.min_bw_khz,
        tie_break_order: a.tie_break.clone(),
    };
    constraints.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let rec = recommend_sf_bw(&table, &ctx, &constraints).map_err(CliError::invalid)?;
    let (sweep_sf, sweep_bw) = match a.cr_at {
        Some(c) => (c.sf, c.bw_hz),
        None => sweep_cell_for(&table, rec.winner.sf, rec.winner.bw_hz).map_err(CliError::invalid)?,
    };
    let cr = recommend_cr(&table, sweep_sf, sweep_bw).map_err(CliError::invalid)?;

    let mut m = RunManifest::new("recommend", g.seed);
    m.input(source);
    record_context(&mut m, &ctx);
    let order: Vec<String> = constraints.tie_break_order.iter().map(Metric::to_string).collect();
    m.param("max_loss_pct", a.max_loss)
        .param("min_bw_khz", format_bw_khz(a.min_bw_khz))
        .param("tie_break", order.join(","))
        .param(
            "cr_at",
            CellRef {
                sf: sweep_sf,
                bw_hz: sweep_bw,
            },
        )
        .output(output_label(g));

    let mut body = format!(
        "sf={} bw_khz={} cr={cr}\n",
        rec.winner.sf,
        format_bw_khz(rec.winner.bw_hz)
    );
    body.push_str("rank,sf,bw_khz,snr_db,excess_db,rssi_dbm,loss_pct\n");
    for (i, c) in std::iter::once(&rec.winner).chain(&rec.runners_up).enumerate() {
        writeln!(
            body,
            "{},{},{},{},{:.3},{},{}",
            i + 1,
            c.sf,
            format_bw_khz(c.bw_hz),
            c.snr_db,
            c.excess_db,
            c.rssi_dbm,
            c.loss_pct
        )
        .unwrap();
    }
    Ok(Rendered::ok(m, body))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SweepMetric {
    Rssi,
    Snr,
    Loss,
    Esp,
    PathLoss,
    Excess,
}

impl SweepMetric {
    fn column(self) -> &'static str {
        match self {
            SweepMetric::Rssi => "rssi_dbm",
            SweepMetric::Snr => "snr_db",
            SweepMetric::Loss => "loss_pct",
            SweepMetric::Esp => "esp_dbm",
            SweepMetric::PathLoss => "path_loss_db",
            SweepMetric::Excess => "excess_db",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Quantity to tabulate.
    #[arg(long, value_enum)]
    pub metric: SweepMetric,
    #[command(flatten)]
    pub model: ModelArgs,
}

pub fn sweep(g: &GlobalArgs, a: &SweepArgs) -> Result<Rendered, CliError> {
    let ctx = a.model.context()?;
    let (table, source) = load_fixture(g)?;
    let mut m = RunManifest::new("sweep", g.seed);
    m.input(source).param("metric", a.metric.column());
    record_context(&mut m, &ctx);
    m.output(output_label(g));

    let mut body = format!("sf,bw_khz,{}\n", a.metric.column());
    for cell in loralink::types::campaign_grid().filter(|c| c.cr == CodingRate::CR_4_8) {
        let (sf, bw) = (cell.sf, cell.bw_hz);
        let record = table.grid_cell(sf, bw).map_err(CliError::invalid)?;
        // measured values are echoed as recorded, computed ones at 3 decimals
        let value = match a.metric {
            SweepMetric::Rssi => record.sample().map_err(CliError::invalid)?.rssi_dbm.to_string(),
            SweepMetric::Snr => record.snr_db.to_string(),
            SweepMetric::Loss => record.loss().map_err(CliError::invalid)?.to_string(),
            metric => {
                let b = cell_breakdown(&table, &ctx, sf, bw).map_err(CliError::invalid)?;
                let v = match metric {
                    SweepMetric::Esp => b.esp_dbm,
                    SweepMetric::PathLoss => b.path_loss_db,
                    _ => b.excess_db,
                };
                format!("{v:.3}")
            }
        };
        writeln!(body, "{sf},{},{value}", format_bw_khz(bw)).unwrap();
    }
    Ok(Rendered::ok(m, body))
}

/// `SYNC=FIELD` or `SYNC=KEY:FIELD`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapEntry {
    pub sync_word: SyncWord,
    pub api_key: Option<String>,
    pub field: u8,
}

impl FromStr for MapEntry {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (sync, target) = s
            .split_once('=')
            .ok_or_else(|| format!("expected SYNC=[KEY:]FIELD, got {s:?}"))?;
        let sync_word: SyncWord = sync.parse()?;
        let (api_key, field) = match target.rsplit_once(':') {
            Some((key, field)) => (Some(key.to_string()), field),
            None => (None, target),
        };
        let field: u8 = field.parse().map_err(|_| format!("bad field index {field:?}"))?;
        if !(1..=8).contains(&field) {
            return Err(format!("field index {field} is outside 1..=8"));
        }
        Ok(MapEntry {
            sync_word,
            api_key,
            field,
        })
    }
}

fn epoch(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("{s:?}: {e}"))
}

#[derive(Debug, Clone, Args)]
pub struct BridgeArgs {
    /// Sync word to channel field, `SYNC=FIELD` or `SYNC=KEY:FIELD`. Repeatable.
    #[arg(long = "map", value_name = "SYNC=[KEY:]FIELD")]
    pub map: Vec<MapEntry>,
    /// Write key for entries that name none.
    #[arg(long, default_value = "DRYRUN")]
    pub api_key: String,
    /// Wall-clock time of virtual time zero.
    #[arg(long, value_parser = epoch, default_value = DEFAULT_EPOCH)]
    pub epoch: DateTime<Utc>,
}

impl BridgeArgs {
    fn key_map(&self, report: &SimReport) -> BTreeMap<SyncWord, FieldTarget> {
        let mut map: BTreeMap<SyncWord, FieldTarget> = self
            .map
            .iter()
            .map(|e| {
                let target = FieldTarget {
                    api_key: e.api_key.clone().unwrap_or_else(|| self.api_key.clone()),
                    field: e.field,
                };
                (e.sync_word, target)
            })
            .collect();
        // unmapped nodes take fields 1, 2, ... in report order
        for (i, n) in report.nodes.iter().enumerate() {
            map.entry(n.sync_word).or_insert_with(|| FieldTarget {
                api_key: self.api_key.clone(),
                field: (i % 8) as u8 + 1,
            });
        }
        map
    }

    fn record(&self, m: &mut RunManifest, map: &BTreeMap<SyncWord, FieldTarget>) {
        m.param("epoch", uplink::iso8601(&self.epoch));
        for (sync, t) in map {
            m.param(&format!("map.{sync}"), format!("{}:{}", t.api_key, t.field));
        }
    }
}

fn dry_run(updates: &[ChannelUpdate], spacing: Duration) -> Result<String, CliError> {
    let mut transport = DryRunTransport::with_spacing(Vec::new(), spacing);
    transport.send_all(updates).map_err(CliError::invalid)?;
    String::from_utf8(transport.into_inner()).map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Number of nodes.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u16).range(1..))]
    pub nodes: u16,
    /// Node sync words (4 hex digits), comma-separated. Defaults to 0001, 0002, ...
    #[arg(long, value_delimiter = ',')]
    pub sync_words: Vec<SyncWord>,
    /// Radio cell for every node, or one per node (repeat the flag).
    #[arg(long = "cell", value_name = "CELL", default_value = "sf=8,bw_khz=62.5")]
    pub cells: Vec<CellRef>,
    /// Payload length, bytes.
    #[arg(long, default_value_t = 2)]
    pub payload_bytes: u16,
    /// Slot length, s. Defaults to twice the longest airtime, rounded up to 1 ms.
    #[arg(long)]
    pub slot_s: Option<f64>,
    /// Guard between slots, s. Defaults to 0.01 with a derived slot and 0 with an explicit --slot-s.
    #[arg(long)]
    pub guard_s: Option<f64>,
    /// Handshake latency at the start of each slot, s.
    #[arg(long, default_value_t = 0.0)]
    pub handshake_s: f64,
    /// Frames per slot.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub frames_per_slot: u32,
    /// Simulated time, s.
    #[arg(long, default_value_t = 60.0)]
    pub duration_s: f64,
    /// Drop probability per node, comma-separated (one value applies to all).
    #[arg(long, value_delimiter = ',', conflicts_with = "drop_from_fixture")]
    pub drop: Vec<f64>,
    /// Take each node's drop probability from this fixture's loss column.
    /// Without --drop either, the global --fixture is used.
    #[arg(long, value_name = "PATH")]
    pub drop_from_fixture: Option<PathBuf>,
    /// Also write a dry-run uplink log here.
    #[arg(long, value_name = "PATH")]
    pub uplink_log: Option<PathBuf>,
    #[command(flatten)]
    pub bridge: BridgeArgs,
}

fn per_node<T: Clone>(values: &[T], n: usize, flag: &str) -> Result<Vec<T>, CliError> {
    match values.len() {
        1 => Ok(vec![values[0].clone(); n]),
        len if len == n => Ok(values.to_vec()),
        len => Err(CliError::Usage(format!("{flag} takes 1 or {n} values, got {len}"))),
    }
}

pub fn simulate(g: &GlobalArgs, a: &SimulateArgs) -> Result<Rendered, CliError> {
    let n = usize::from(a.nodes);
    let words: Vec<SyncWord> = if a.sync_words.is_empty() {
        (1..=a.nodes).map(SyncWord).collect()
    } else if a.sync_words.len() == n {
        a.sync_words.clone()
    } else {
        return Err(CliError::Usage(format!(
            "--sync-words needs {n} values, got {}",
            a.sync_words.len()
        )));
    };
    let cells = per_node(&a.cells, n, "--cell")?;
    let mut payload_seeds = SplitMix64::new(g.seed ^ PAYLOAD_STREAM);
    let nodes: Vec<NodeSpec> = words
        .iter()
        .zip(&cells)
        .map(|(&sync_word, cell)| NodeSpec {
            sync_word,
            config: loralink::RadioConfig::campaign(cell.sf, cell.bw_hz, CodingRate::CR_4_8),
            frame: FrameParams::with_payload(a.payload_bytes),
            payload: PayloadSource::ultrasonic(payload_seeds.next_u64()),
        })
        .collect();
    for node in &nodes {
        node.config.validate(GridMode::Validated).map_err(CliError::invalid)?;
    }

    let mut timing = SlotTiming::default_for(&nodes).map_err(CliError::invalid)?;
    if let Some(slot) = a.slot_s {
        timing.slot_s = slot;
        timing.guard_s = 0.0;
    }
    if let Some(guard) = a.guard_s {
        timing.guard_s = guard;
    }
    timing.handshake_s = a.handshake_s;
    timing.frames_per_slot = a.frames_per_slot;
    let schedule = build_schedule_with(&nodes, &timing).map_err(CliError::invalid)?;

    let mut m = RunManifest::new("simulate", g.seed);
    let drops = if !a.drop.is_empty() {
        per_node(&a.drop, n, "--drop")?
    } else {
        let (table, source) = match &a.drop_from_fixture {
            Some(path) => (load_table(path)?, path.display().to_string()),
            None => load_fixture(g)?,
        };
        m.input(source);
        nodes
            .iter()
            .map(|node| drop_model_from_table(&table, node))
            .collect::<Result<_, _>>()
            .map_err(CliError::invalid)?
    };

    let report = run_simulation(&nodes, &schedule, &drops, a.duration_s, g.seed).map_err(CliError::invalid)?;

    m.param("nodes", n)
        .param("payload_bytes", a.payload_bytes)
        .param("slot_s", timing.slot_s)
        .param("guard_s", timing.guard_s)
        .param("handshake_s", timing.handshake_s)
        .param("frames_per_slot", timing.frames_per_slot)
        .param("duration_s", a.duration_s);
    for (node, drop) in nodes.iter().zip(&drops) {
        m.param(&format!("node.{}", node.sync_word), node.config);
        m.param(&format!("drop.{}", node.sync_word), drop);
        m.param(&format!("payload_seed.{}", node.sync_word), node.payload.seed);
    }
    m.output(output_label(g));

    if let Some(log) = &a.uplink_log {
        let map = a.bridge.key_map(&report);
        a.bridge.record(&mut m, &map);
        m.output(log.display().to_string());
        let updates = bridge_sim_report(&report, &map, a.bridge.epoch).map_err(CliError::invalid)?;
        let text = format!("{m}{}", dry_run(&updates, Duration::ZERO)?);
        fs::write(log, text).map_err(|e| CliError::Io(format!("{}: {e}", log.display())))?;
    }
    Ok(Rendered::ok(m, report.to_string()))
}

#[derive(Debug, Clone, Args)]
pub struct UplinkArgs {
    /// Simulator report to bridge.
    #[arg(long, value_name = "PATH")]
    pub report: PathBuf,
    /// Send for real instead of writing a dry-run log. The write key comes
    /// from the UPLINK_API_KEY environment variable. Needs the `http` build feature.
    #[arg(long)]
    pub send: bool,
    /// Endpoint for --send.
    #[arg(long, default_value = "https://api.thingspeak.com")]
    pub base_url: String,
    /// Minimum spacing between updates, s. Defaults to 0 for dry runs and 15 for --send.
    #[arg(long)]
    pub spacing_s: Option<f64>,
    #[command(flatten)]
    pub bridge: BridgeArgs,
}

pub fn uplink(g: &GlobalArgs, a: &UplinkArgs) -> Result<Rendered, CliError> {
    let text = read_text(&a.report)?;
    let report: SimReport = text
        .parse()
        .map_err(|e| CliError::Validation(format!("{}: {e}", a.report.display())))?;
    let map = a.bridge.key_map(&report);
    let updates = bridge_sim_report(&report, &map, a.bridge.epoch).map_err(CliError::invalid)?;
    let default_spacing = if a.send {
        uplink::DEFAULT_HTTP_SPACING
    } else {
        Duration::ZERO
    };
    let spacing = match a.spacing_s {
        Some(s) => Duration::try_from_secs_f64(s).map_err(|e| CliError::Usage(format!("--spacing-s: {e}")))?,
        None => default_spacing,
    };

    let mut m = RunManifest::new("uplink", g.seed);
    m.input(a.report.display().to_string());
    a.bridge.record(&mut m, &map);
    m.param("transport", if a.send { "http" } else { "dry_run" })
        .param("spacing_s", spacing.as_secs_f64())
        .output(output_label(g));

    let body = if a.send {
        send_http(&a.base_url, spacing, &updates)?;
        m.param("base_url", &a.base_url);
        format!("sent={}\n", updates.len())
    } else {
        dry_run(&updates, spacing)?
    };
    Ok(Rendered::ok(m, body))
}

#[cfg(feature = "http")]
fn send_http(base_url: &str, spacing: Duration, updates: &[ChannelUpdate]) -> Result<(), CliError> {
    let mut transport = uplink::HttpTransport::from_env(base_url)
        .map_err(|e| CliError::Usage(e.to_string()))?
        .with_spacing(spacing);
    transport
        .send_all(updates)
        .map(|_| ())
        .map_err(|e| CliError::Io(e.to_string()))
}

#[cfg(not(feature = "http"))]
fn send_http(_base_url: &str, _spacing: Duration, _updates: &[ChannelUpdate]) -> Result<(), CliError> {
    Err(CliError::Usage("--send needs a build with the `http` feature".into()))
}
