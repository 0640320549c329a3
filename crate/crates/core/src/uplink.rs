// SPDX-License-Identifier: Apache-2.0

//! Cloud uplink for packets received by the gateway.
//!
//! Updates are rendered as ThingSpeak single-update requests,
//! `GET /update?api_key=<key>&field<i>=<value>[&created_at=<ISO8601>]`, and
//! handed to a [`Transport`]. [`DryRunTransport`] only logs; the real HTTP
//! sender lives behind the `http` cargo feature.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeDelta, Utc};
use thiserror::Error;
use url::form_urlencoded::byte_serialize;

use crate::tdma::{SimReport, SyncWord};

/// Environment variable holding the write key for the real transport.
pub const API_KEY_ENV: &str = "UPLINK_API_KEY";
/// Spacing the public service tolerates between updates on one channel.
pub const DEFAULT_HTTP_SPACING: Duration = Duration::from_secs(15);

#[derive(Debug, Error)]
pub enum UplinkError {
    #[error("update carries no fields")]
    NoFields,
    #[error("field index {0} outside 1..=8")]
    BadFieldIndex(u8),
    #[error("field{index} value {value} is not finite")]
    BadValue { index: u8, value: f64 },
    #[error("no uplink mapping for sync word {0}")]
    Unmapped(SyncWord),
    #[error("rx_ok event for {0} carries no payload value")]
    MissingValue(SyncWord),
    #[error("timestamp out of range")]
    Timestamp,
    #[error("{API_KEY_ENV} is not set")]
    MissingKey,
    #[error("transport: {0}")]
    Transport(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One channel write.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelUpdate {
    pub api_key: String,
    /// Field index (1..=8) to value.
    pub fields: BTreeMap<u8, f64>,
    /// Second resolution; sub-second parts are dropped when formatting.
    pub created_at: Option<DateTime<Utc>>,
}

impl ChannelUpdate {
    pub fn new(api_key: impl Into<String>) -> Self {
        ChannelUpdate {
            api_key: api_key.into(),
            fields: BTreeMap::new(),
            created_at: None,
        }
    }

    pub fn field(mut self, index: u8, value: f64) -> Self {
        self.fields.insert(index, value);
        self
    }

    pub fn at(mut self, created_at: DateTime<Utc>) -> Self {
        self.created_at = Some(created_at);
        self
    }

    pub fn validate(&self) -> Result<(), UplinkError> {
        if self.fields.is_empty() {
            return Err(UplinkError::NoFields);
        }
        for (&index, &value) in &self.fields {
            if !(1..=8).contains(&index) {
                return Err(UplinkError::BadFieldIndex(index));
            }
            if !value.is_finite() {
                return Err(UplinkError::BadValue { index, value });
            }
        }
        Ok(())
    }
}

pub fn iso8601(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn encode(s: &str) -> String {
    byte_serialize(s.as_bytes()).collect()
}

/// A ready-to-send request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestDescriptor {
    pub method: &'static str,
    pub path: &'static str,
    pub query: String,
}

impl fmt::Display for RequestDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}?{}", self.method, self.path, self.query)
    }
}

pub fn format_update(update: &ChannelUpdate) -> Result<RequestDescriptor, UplinkError> {
    update.validate()?;
    let mut query = format!("api_key={}", encode(&update.api_key));
    for (index, value) in &update.fields {
        query.push_str(&format!("&field{index}={}", encode(&value.to_string())));
    }
    if let Some(t) = &update.created_at {
        query.push_str(&format!("&created_at={}", encode(&iso8601(t))));
    }
    Ok(RequestDescriptor {
        method: "GET",
        path: "/update",
        query,
    })
}

/// Where a node's readings go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldTarget {
    pub api_key: String,
    pub field: u8,
}

/// One update per `rx_ok` event, in timeline order, timestamped
/// `epoch + t_ns` truncated to whole seconds.
pub fn bridge_sim_report(
    report: &SimReport,
    key_map: &BTreeMap<SyncWord, FieldTarget>,
    epoch: DateTime<Utc>,
) -> Result<Vec<ChannelUpdate>, UplinkError> {
    report
        .rx_ok()
        .map(|event| {
            let target = key_map
                .get(&event.sync_word)
                .ok_or(UplinkError::Unmapped(event.sync_word))?;
            let value = event.value.ok_or(UplinkError::MissingValue(event.sync_word))?;
            let offset = TimeDelta::try_seconds((event.t_ns / 1_000_000_000) as i64).ok_or(UplinkError::Timestamp)?;
            let created_at = epoch.checked_add_signed(offset).ok_or(UplinkError::Timestamp)?;
            Ok(ChannelUpdate::new(target.api_key.clone())
                .field(target.field, f64::from(value))
                .at(created_at))
        })
        .collect()
}

/// Sends updates somewhere. One instance serves one logical sender.
pub trait Transport {
    fn send(&mut self, update: &ChannelUpdate) -> Result<(), UplinkError>;

    fn send_all(&mut self, updates: &[ChannelUpdate]) -> Result<usize, UplinkError> {
        for u in updates {
            self.send(u)?;
        }
        Ok(updates.len())
    }
}

/// Enforces a minimum wall-clock gap between sends.
#[derive(Debug)]
pub struct RateLimiter {
    min_spacing: Duration,
    last: Option<Instant>,
}

impl RateLimiter {
    pub fn new(min_spacing: Duration) -> Self {
        RateLimiter {
            min_spacing,
            last: None,
        }
    }

    pub fn wait(&mut self) {
        if let Some(last) = self.last {
            let elapsed = last.elapsed();
            if elapsed < self.min_spacing {
                thread::sleep(self.min_spacing - elapsed);
            }
        }
        self.last = Some(Instant::now());
    }
}

/// Writes `<ISO8601> UPLINK <request line>` per update. The timestamp is the
/// update's `created_at`, or the current time when it has none.
pub struct DryRunTransport<W: Write> {
    out: W,
    limiter: RateLimiter,
}

impl<W: Write> DryRunTransport<W> {
    pub fn new(out: W) -> Self {
        Self::with_spacing(out, Duration::ZERO)
    }

    pub fn with_spacing(out: W, min_spacing: Duration) -> Self {
        DryRunTransport {
            out,
            limiter: RateLimiter::new(min_spacing),
        }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Transport for DryRunTransport<W> {
    fn send(&mut self, update: &ChannelUpdate) -> Result<(), UplinkError> {
        let request = format_update(update)?;
        self.limiter.wait();
        let stamp = iso8601(&update.created_at.unwrap_or_else(Utc::now));
        writeln!(self.out, "{stamp} UPLINK {request}")?;
        Ok(())
    }
}

#[cfg(feature = "http")]
pub use http::HttpTransport;

#[cfg(feature = "http")]
mod http {
    use super::*;

    /// Sends to a live ThingSpeak-compatible endpoint using the key from
    /// [`API_KEY_ENV`], ignoring whatever key the update carries.
    pub struct HttpTransport {
        base_url: String,
        api_key: String,
        agent: ureq::Agent,
        limiter: RateLimiter,
    }

    impl HttpTransport {
        pub fn from_env(base_url: impl Into<String>) -> Result<Self, UplinkError> {
            let api_key = std::env::var(API_KEY_ENV).map_err(|_| UplinkError::MissingKey)?;
            Ok(HttpTransport {
                base_url: base_url.into(),
                api_key,
                agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(30)).build(),
                limiter: RateLimiter::new(DEFAULT_HTTP_SPACING),
            })
        }

        pub fn with_spacing(mut self, min_spacing: Duration) -> Self {
            self.limiter = RateLimiter::new(min_spacing);
            self
        }
    }

    impl Transport for HttpTransport {
        fn send(&mut self, update: &ChannelUpdate) -> Result<(), UplinkError> {
            let keyed = ChannelUpdate {
                api_key: self.api_key.clone(),
                ..update.clone()
            };
            let request = format_update(&keyed)?;
            self.limiter.wait();
            let url = format!(
                "{}{}?{}",
                self.base_url.trim_end_matches('/'),
                request.path,
                request.query
            );
            let body = self
                .agent
                .get(&url)
                .call()
                .map_err(|e| UplinkError::Transport(e.to_string()))?
                .into_string()?;
            // the service answers 0 when it rejects an update
            if body.trim() == "0" {
                return Err(UplinkError::Transport("update rejected".into()));
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tdma::{Event, EventKind, NodeStats};
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn epoch() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 3, 1, 12, 0, 0).unwrap()
    }

    #[test]
    fn single_field() {
        let u = ChannelUpdate::new("KEY1").field(1, 42.0);
        assert_eq!(
            format_update(&u).unwrap().to_string(),
            "GET /update?api_key=KEY1&field1=42"
        );
    }

    #[test]
    fn fields_ascending() {
        let u = ChannelUpdate::new("KEY1").field(2, 17.0).field(1, 42.0);
        assert_eq!(
            format_update(&u).unwrap().to_string(),
            "GET /update?api_key=KEY1&field1=42&field2=17"
        );
    }

    #[test]
    fn empty_update_rejected() {
        assert!(matches!(
            format_update(&ChannelUpdate::new("KEY1")),
            Err(UplinkError::NoFields)
        ));
        assert!(matches!(
            format_update(&ChannelUpdate::new("K").field(9, 1.0)),
            Err(UplinkError::BadFieldIndex(9))
        ));
        assert!(format_update(&ChannelUpdate::new("K").field(1, f64::NAN)).is_err());
    }

    #[test]
    fn timestamp_and_encoding() {
        let u = ChannelUpdate::new("A B&C").field(3, -1.5).at(epoch());
        assert_eq!(
            format_update(&u).unwrap().to_string(),
            "GET /update?api_key=A+B%26C&field3=-1.5&created_at=2024-03-01T12%3A00%3A00Z"
        );
    }

    fn ev(t_s: u64, kind: EventKind, word: u16, value: Option<u32>) -> Event {
        Event {
            t_ns: t_s * 1_000_000_000 + 500,
            kind,
            sync_word: SyncWord(word),
            seq: 0,
            value,
        }
    }

    fn report(events: Vec<Event>) -> SimReport {
        SimReport {
            nodes: Vec::<NodeStats>::new(),
            timeline: events,
        }
    }

    #[test]
    fn bridge_one_node() {
        let events = (0..5)
            .map(|i| ev(i, EventKind::RxOk, 0xA, Some(10 + i as u32)))
            .collect();
        let map = BTreeMap::from([(
            SyncWord(0xA),
            FieldTarget {
                api_key: "K".into(),
                field: 1,
            },
        )]);
        let ups = bridge_sim_report(&report(events), &map, epoch()).unwrap();
        assert_eq!(ups.len(), 5);
        assert_eq!(ups[4].fields[&1], 14.0);
        assert_eq!(ups[4].created_at, Some(epoch() + TimeDelta::seconds(4)));
    }

    #[test]
    fn bridge_empty_and_unmapped() {
        let map = BTreeMap::new();
        assert!(
            bridge_sim_report(&report(vec![ev(0, EventKind::RxDrop, 1, None)]), &map, epoch())
                .unwrap()
                .is_empty()
        );
        assert!(matches!(
            bridge_sim_report(&report(vec![ev(0, EventKind::RxOk, 1, Some(3))]), &map, epoch()),
            Err(UplinkError::Unmapped(SyncWord(1)))
        ));
    }

    #[test]
    fn dry_run_logs_one_line_per_update() {
        let ups: Vec<_> = (0..3)
            .map(|i| ChannelUpdate::new("K").field(1, f64::from(i)).at(epoch()))
            .collect();
        let mut t = DryRunTransport::new(Vec::new());
        assert_eq!(t.send_all(&ups).unwrap(), 3);
        let log = String::from_utf8(t.into_inner()).unwrap();
        assert_eq!(log.lines().count(), 3);
        assert_eq!(
            log.lines().next().unwrap(),
            "2024-03-01T12:00:00Z UPLINK GET /update?api_key=K&field1=0&created_at=2024-03-01T12%3A00%3A00Z"
        );
    }

    proptest! {
        #[test]
        fn distinct_field_maps_render_distinctly(
            a in proptest::collection::btree_map(1u8..=8, -1e6f64..1e6, 1..8),
            b in proptest::collection::btree_map(1u8..=8, -1e6f64..1e6, 1..8),
        ) {
            let ua = ChannelUpdate { api_key: "K".into(), fields: a.clone(), created_at: None };
            let ub = ChannelUpdate { api_key: "K".into(), fields: b.clone(), created_at: None };
            let (sa, sb) = (format_update(&ua).unwrap().to_string(), format_update(&ub).unwrap().to_string());
            prop_assert_eq!(a == b, sa == sb);
        }
    }
}
