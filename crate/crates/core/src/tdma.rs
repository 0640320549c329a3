// SPDX-License-Identifier: Apache-2.0

//! Deterministic single-gateway TDMA simulator.
//!
//! The gateway visits nodes round-robin. Slot `k` belongs to node
//! `order[k % n]` and opens at `k * (slot + guard)`. Inside a slot the gateway
//! spends an optional handshake latency addressing the node by sync word, then
//! the node sends `frames_per_slot` frames back to back. Each reception is an
//! independent Bernoulli drop drawn from [`SplitMix64`] seeded with the run
//! seed; one draw per frame in timeline order. A slot is simulated only if it
//! closes at or before the run duration.
//!
//! Virtual time is integer nanoseconds. Transmission times never depend on
//! the seed, only drop outcomes do.
//!
//! Serialized reports are one event per line,
//! `<t_ns> <event> <sync_word> [<detail>]`, followed by one
//! `node <sync_word> sent=<n> received=<n> lost=<n> loss_pct=<d>` line per node.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::{DatasetError, MeasurementTable};
use crate::link_budget::packet_loss_pct;
use crate::phy::{time_on_air, FrameParams, PhyError};
use crate::rng::SplitMix64;
use crate::types::RadioConfig;

const NS_PER_S: f64 = 1e9;
const NS_PER_MS: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sync word {0} assigned to more than one node")]
    DuplicateSyncWord(SyncWord),
    #[error("slot of {slot_ns} ns cannot fit node {node}: needs {needed_ns} ns")]
    InfeasibleSlot {
        node: SyncWord,
        slot_ns: u64,
        needed_ns: u64,
    },
    #[error("no nodes to schedule")]
    NoNodes,
    #[error("{name} must be a finite, non-negative number of seconds, got {value}")]
    BadDuration { name: &'static str, value: f64 },
    #[error("drop probability {p} for node {node} outside [0, 1]")]
    BadProbability { node: SyncWord, p: f64 },
    #[error("expected {expected} drop probabilities, got {got}")]
    DropModelLength { expected: usize, got: usize },
    #[error("schedule does not match the node list")]
    ScheduleMismatch,
    #[error("frames per slot must be at least 1")]
    NoFrames,
    #[error("node {node}: {source}")]
    Airtime {
        node: SyncWord,
        #[source]
        source: PhyError,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("report line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// 16-bit node address, written as four uppercase hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SyncWord(pub u16);

impl fmt::Display for SyncWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04X}", self.0)
    }
}

impl FromStr for SyncWord {
    type Err = String;

    /// Exactly four hex digits, optionally prefixed with `0x`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
        if digits.len() != 4 || !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(format!("sync word must be 4 hex digits, got {s:?}"));
        }
        u16::from_str_radix(digits, 16).map(SyncWord).map_err(|e| e.to_string())
    }
}

/// Seeded stand-in for an ultrasonic ranger: integer distances in cm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadSource {
    pub seed: u64,
    pub min_cm: u32,
    pub max_cm: u32,
}

impl PayloadSource {
    /// HC-SR04-like range, 2 to 400 cm.
    pub fn ultrasonic(seed: u64) -> Self {
        PayloadSource {
            seed,
            min_cm: 2,
            max_cm: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSpec {
    pub sync_word: SyncWord,
    pub config: RadioConfig,
    pub frame: FrameParams,
    pub payload: PayloadSource,
}

impl NodeSpec {
    pub fn airtime_ns(&self) -> Result<u64, SimError> {
        let toa = time_on_air(&self.config, &self.frame).map_err(|source| SimError::Airtime {
            node: self.sync_word,
            source,
        })?;
        Ok((toa * NS_PER_S).ceil() as u64)
    }
}

/// Slot timing knobs, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotTiming {
    pub slot_s: f64,
    pub guard_s: f64,
    pub handshake_s: f64,
    pub frames_per_slot: u32,
}

impl SlotTiming {
    pub fn new(slot_s: f64, guard_s: f64) -> Self {
        SlotTiming {
            slot_s,
            guard_s,
            handshake_s: 0.0,
            frames_per_slot: 1,
        }
    }

    /// Slot of twice the longest airtime rounded up to a whole millisecond,
    /// 10 ms guard, no handshake, one frame per slot.
    pub fn default_for(nodes: &[NodeSpec]) -> Result<Self, SimError> {
        let mut longest = 0;
        for n in nodes {
            longest = longest.max(n.airtime_ns()?);
        }
        let slot_ns = (2 * longest).div_ceil(NS_PER_MS) * NS_PER_MS;
        Ok(SlotTiming::new(slot_ns as f64 / NS_PER_S, 0.010))
    }
}

fn secs_to_ns(name: &'static str, value: f64) -> Result<u64, SimError> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(SimError::BadDuration { name, value });
    }
    Ok((value * NS_PER_S).round() as u64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSchedule {
    pub slot_ns: u64,
    pub guard_ns: u64,
    pub handshake_ns: u64,
    pub frames_per_slot: u32,
    /// Visit order; a permutation of the node sync words.
    pub order: Vec<SyncWord>,
    airtime_ns: Vec<u64>,
}

impl SlotSchedule {
    pub fn period_ns(&self) -> u64 {
        self.order.len() as u64 * (self.slot_ns + self.guard_ns)
    }

    pub fn period_s(&self) -> f64 {
        self.period_ns() as f64 / NS_PER_S
    }

    pub fn airtime_ns(&self, index: usize) -> u64 {
        self.airtime_ns[index]
    }
}

pub fn build_schedule(nodes: &[NodeSpec], slot_duration_s: f64, guard_s: f64) -> Result<SlotSchedule, SimError> {
    build_schedule_with(nodes, &SlotTiming::new(slot_duration_s, guard_s))
}

pub fn build_schedule_with(nodes: &[NodeSpec], timing: &SlotTiming) -> Result<SlotSchedule, SimError> {
    if nodes.is_empty() {
        return Err(SimError::NoNodes);
    }
    if timing.frames_per_slot == 0 {
        return Err(SimError::NoFrames);
    }
    let slot_ns = secs_to_ns("slot duration", timing.slot_s)?;
    let guard_ns = secs_to_ns("guard time", timing.guard_s)?;
    let handshake_ns = secs_to_ns("handshake latency", timing.handshake_s)?;

    let mut seen = HashSet::new();
    let mut airtime_ns = Vec::with_capacity(nodes.len());
    for node in nodes {
        if !seen.insert(node.sync_word) {
            return Err(SimError::DuplicateSyncWord(node.sync_word));
        }
        let air = node.airtime_ns()?;
        let needed_ns = handshake_ns + u64::from(timing.frames_per_slot) * air;
        if needed_ns > slot_ns {
            return Err(SimError::InfeasibleSlot {
                node: node.sync_word,
                slot_ns,
                needed_ns,
            });
        }
        airtime_ns.push(air);
    }
    Ok(SlotSchedule {
        slot_ns,
        guard_ns,
        handshake_ns,
        frames_per_slot: timing.frames_per_slot,
        order: nodes.iter().map(|n| n.sync_word).collect(),
        airtime_ns,
    })
}

/// Loss probability for a node from the measured loss at its (SF, BW) cell.
pub fn drop_model_from_table(table: &MeasurementTable, node: &NodeSpec) -> Result<f64, SimError> {
    let record = table.grid_cell(node.config.sf, node.config.bw_hz)?;
    Ok(record.loss()? / 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    SlotOpen,
    TxStart,
    TxEnd,
    RxOk,
    RxDrop,
    SlotClose,
}

impl EventKind {
    fn as_str(self) -> &'static str {
        match self {
            EventKind::SlotOpen => "slot_open",
            EventKind::TxStart => "tx_start",
            EventKind::TxEnd => "tx_end",
            EventKind::RxOk => "rx_ok",
            EventKind::RxDrop => "rx_drop",
            EventKind::SlotClose => "slot_close",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "slot_open" => EventKind::SlotOpen,
            "tx_start" => EventKind::TxStart,
            "tx_end" => EventKind::TxEnd,
            "rx_ok" => EventKind::RxOk,
            "rx_drop" => EventKind::RxDrop,
            "slot_close" => EventKind::SlotClose,
            other => return Err(format!("unknown event {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub t_ns: u64,
    pub kind: EventKind,
    pub sync_word: SyncWord,
    /// Slot index for slot events, frame sequence number otherwise.
    pub seq: u64,
    /// Sensor reading carried by the frame (tx_start and rx_ok only).
    pub value: Option<u32>,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} ", self.t_ns, self.kind, self.sync_word)?;
        match self.kind {
            EventKind::SlotOpen | EventKind::SlotClose => write!(f, "slot={}", self.seq)?,
            _ => write!(f, "seq={}", self.seq)?,
        }
        if let Some(v) = self.value {
            write!(f, " value={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeStats {
    pub sync_word: SyncWord,
    pub packets_sent: u64,
    pub packets_received: u64,
    pub packets_lost: u64,
}

impl NodeStats {
    /// `None` when nothing was sent.
    pub fn measured_loss_pct(&self) -> Option<f64> {
        packet_loss_pct(self.packets_lost, self.packets_sent).ok()
    }
}

impl fmt::Display for NodeStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "node {} sent={} received={} lost={} loss_pct=",
            self.sync_word, self.packets_sent, self.packets_received, self.packets_lost
        )?;
        match self.measured_loss_pct() {
            Some(p) => write!(f, "{p:.3}"),
            None => f.write_str("n/a"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimReport {
    /// In schedule order.
    pub nodes: Vec<NodeStats>,
    pub timeline: Vec<Event>,
}

impl SimReport {
    pub fn node(&self, sync_word: SyncWord) -> Option<&NodeStats> {
        self.nodes.iter().find(|n| n.sync_word == sync_word)
    }

    pub fn rx_ok(&self) -> impl Iterator<Item = &Event> {
        self.timeline.iter().filter(|e| e.kind == EventKind::RxOk)
    }
}

impl fmt::Display for SimReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.timeline {
            writeln!(f, "{e}")?;
        }
        for n in &self.nodes {
            writeln!(f, "{n}")?;
        }
        Ok(())
    }
}

impl FromStr for SimReport {
    type Err = SimError;

    /// Parses the serialized form; `#` lines and blank lines are skipped.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut report = SimReport {
            nodes: Vec::new(),
            timeline: Vec::new(),
        };
        for (i, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| SimError::Parse { line: i + 1, message };
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts[0] == "node" {
                report.nodes.push(parse_node_line(&parts).map_err(err)?);
            } else {
                report.timeline.push(parse_event_line(&parts).map_err(err)?);
            }
        }
        Ok(report)
    }
}

fn key_value<'a>(part: &'a str, key: &str) -> Result<&'a str, String> {
    part.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| format!("expected {key}=..., found {part:?}"))
}

fn parse_u64(s: &str) -> Result<u64, String> {
    s.parse().map_err(|_| format!("not an unsigned integer: {s:?}"))
}

fn parse_node_line(parts: &[&str]) -> Result<NodeStats, String> {
    if parts.len() != 6 {
        return Err("node line needs sync word, sent, received, lost and loss_pct".into());
    }
    let stats = NodeStats {
        sync_word: parts[1].parse()?,
        packets_sent: parse_u64(key_value(parts[2], "sent")?)?,
        packets_received: parse_u64(key_value(parts[3], "received")?)?,
        packets_lost: parse_u64(key_value(parts[4], "lost")?)?,
    };
    key_value(parts[5], "loss_pct")?;
    if stats.packets_sent != stats.packets_received + stats.packets_lost {
        return Err("sent != received + lost".into());
    }
    Ok(stats)
}

fn parse_event_line(parts: &[&str]) -> Result<Event, String> {
    if !(4..=5).contains(&parts.len()) {
        return Err("event line needs time, kind, sync word and detail".into());
    }
    let kind: EventKind = parts[1].parse()?;
    let seq_key = match kind {
        EventKind::SlotOpen | EventKind::SlotClose => "slot",
        _ => "seq",
    };
    let value = match parts.get(4) {
        Some(p) => Some(
            key_value(p, "value")?
                .parse::<u32>()
                .map_err(|_| format!("bad value in {p:?}"))?,
        ),
        None => None,
    };
    Ok(Event {
        t_ns: parse_u64(parts[0])?,
        kind,
        sync_word: parts[2].parse()?,
        seq: parse_u64(key_value(parts[3], seq_key)?)?,
        value,
    })
}

/// Runs the schedule from time 0 to `duration_s`. `drop_model[i]` is the
/// loss probability for `nodes[i]`.
pub fn run_simulation(
    nodes: &[NodeSpec],
    schedule: &SlotSchedule,
    drop_model: &[f64],
    duration_s: f64,
    seed: u64,
) -> Result<SimReport, SimError> {
    if schedule.order.len() != nodes.len() || schedule.order.iter().zip(nodes).any(|(s, n)| *s != n.sync_word) {
        return Err(SimError::ScheduleMismatch);
    }
    if drop_model.len() != nodes.len() {
        return Err(SimError::DropModelLength {
            expected: nodes.len(),
            got: drop_model.len(),
        });
    }
    for (node, &p) in nodes.iter().zip(drop_model) {
        if !(0.0..=1.0).contains(&p) {
            return Err(SimError::BadProbability {
                node: node.sync_word,
                p,
            });
        }
    }
    let duration_ns = secs_to_ns("run duration", duration_s)?;
    if duration_ns == 0 {
        return Err(SimError::BadDuration {
            name: "run duration",
            value: duration_s,
        });
    }

    let mut drops = SplitMix64::new(seed);
    let mut payloads: Vec<SplitMix64> = nodes.iter().map(|n| SplitMix64::new(n.payload.seed)).collect();
    let mut stats: Vec<NodeStats> = nodes
        .iter()
        .map(|n| NodeStats {
            sync_word: n.sync_word,
            packets_sent: 0,
            packets_received: 0,
            packets_lost: 0,
        })
        .collect();
    let mut timeline = Vec::new();

    let stride = schedule.slot_ns + schedule.guard_ns;
    let n = nodes.len();
    let mut slot = 0u64;
    loop {
        let open = slot * stride;
        let close = open + schedule.slot_ns;
        if close > duration_ns {
            break;
        }
        let idx = (slot % n as u64) as usize;
        let node = &nodes[idx];
        let sw = node.sync_word;
        let air = schedule.airtime_ns[idx];
        timeline.push(Event {
            t_ns: open,
            kind: EventKind::SlotOpen,
            sync_word: sw,
            seq: slot,
            value: None,
        });

        let mut t = open + schedule.handshake_ns;
        for _ in 0..schedule.frames_per_slot {
            let seq = stats[idx].packets_sent;
            let value = payloads[idx].range_inclusive(node.payload.min_cm, node.payload.max_cm);
            timeline.push(Event {
                t_ns: t,
                kind: EventKind::TxStart,
                sync_word: sw,
                seq,
                value: Some(value),
            });
            t += air;
            timeline.push(Event {
                t_ns: t,
                kind: EventKind::TxEnd,
                sync_word: sw,
                seq,
                value: None,
            });
            stats[idx].packets_sent += 1;
            if drops.bernoulli(drop_model[idx]) {
                stats[idx].packets_lost += 1;
                timeline.push(Event {
                    t_ns: t,
                    kind: EventKind::RxDrop,
                    sync_word: sw,
                    seq,
                    value: None,
                });
            } else {
                stats[idx].packets_received += 1;
                timeline.push(Event {
                    t_ns: t,
                    kind: EventKind::RxOk,
                    sync_word: sw,
                    seq,
                    value: Some(value),
                });
            }
        }
        timeline.push(Event {
            t_ns: close,
            kind: EventKind::SlotClose,
            sync_word: sw,
            seq: slot,
            value: None,
        });
        slot += 1;
    }

    Ok(SimReport { nodes: stats, timeline })
}
