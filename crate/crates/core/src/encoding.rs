//! Decentralized spike encoding: zones relative to one defender, and the
//! 2m-channel event-triggered single-spike pattern of its view.
//!
//! Channels 1..m carry defender presence (spike at 0), channels m+1..2m
//! carry intruder arrivals (spike time proportional to arrival time).
//! Absent objects leave their channel silent.

use crate::error::{Error, Result};
use crate::scalar::{r64, Real};
use crate::world::{Defender, Scenario, SegmentId};

/// Cyclic window of `m` segments centered on a defender, re-indexed as
/// zones 1..=m (anticlockwise, defender in the central zone).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZoneMap {
    pub defender_segment: SegmentId,
    m: usize,
    n: usize,
    zone_to_segment: Vec<SegmentId>,
}

/// Build the zone window for a defender in `defender_segment`.
///
/// Zone k maps to segment `((i - c + k - 1) mod n) + 1` where `i` is the
/// defender's segment and `c = ceil((m+1)/2)` is the central zone.
pub fn zones_of(defender_segment: SegmentId, m: usize, n: usize) -> Result<ZoneMap> {
    if m == 0 || m > n {
        return Err(Error::domain(format!(
            "observed zone count {m} outside [1, {n}]"
        )));
    }
    if defender_segment.index() > n {
        return Err(Error::domain(format!(
            "defender segment {} beyond n = {n}",
            defender_segment.index()
        )));
    }
    let center = (m + 1).div_ceil(2);
    let i = defender_segment.index() as i64;
    let zone_to_segment = (1..=m)
        .map(|k| SegmentId::from_cyclic(i - center as i64 + k as i64, n))
        .collect();
    Ok(ZoneMap {
        defender_segment,
        m,
        n,
        zone_to_segment,
    })
}

impl ZoneMap {
    pub fn num_zones(&self) -> usize {
        self.m
    }

    pub fn num_segments(&self) -> usize {
        self.n
    }

    /// 1-based index of the central zone (the defender's own segment).
    pub fn central_zone(&self) -> usize {
        (self.m + 1).div_ceil(2)
    }

    /// Segment of a 1-based zone index.
    pub fn segment_of(&self, zone: usize) -> SegmentId {
        self.zone_to_segment[zone - 1]
    }

    pub fn segments(&self) -> &[SegmentId] {
        &self.zone_to_segment
    }

    /// 1-based zone of a segment, or None when outside the window.
    pub fn zone_of_segment(&self, segment: SegmentId) -> Option<usize> {
        let n = self.n as i64;
        let offset = (segment.index() as i64 - self.defender_segment.index() as i64
            + self.central_zone() as i64
            - 1)
        .rem_euclid(n) as usize
            + 1;
        (offset <= self.m).then_some(offset)
    }
}

/// 2m single-spike channels over the interval `[0, T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikePattern<S> {
    channels: Vec<Option<S>>,
    t_interval: S,
}

impl<S: Real> SpikePattern<S> {
    pub fn new(channels: Vec<Option<S>>, t_interval: S) -> Result<Self> {
        if channels.len() % 2 != 0 {
            return Err(Error::Shape(format!(
                "spike pattern needs 2m channels, got {}",
                channels.len()
            )));
        }
        if t_interval <= S::zero() {
            return Err(Error::domain("simulation interval must be positive"));
        }
        let m = channels.len() / 2;
        for (idx, spike) in channels.iter().enumerate() {
            if let Some(t) = spike {
                if *t < S::zero() || *t >= t_interval {
                    return Err(Error::domain(format!(
                        "spike time {t} on channel {idx} outside [0, {t_interval})"
                    )));
                }
                if idx < m && *t != S::zero() {
                    return Err(Error::domain(format!(
                        "defender channel {idx} must spike at 0, got {t}"
                    )));
                }
            }
        }
        Ok(SpikePattern {
            channels,
            t_interval,
        })
    }

    pub fn num_zones(&self) -> usize {
        self.channels.len() / 2
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn t_interval(&self) -> S {
        self.t_interval
    }

    pub fn channel(&self, idx: usize) -> Option<S> {
        self.channels[idx]
    }

    /// Spiking channels as (channel index, spike time).
    pub fn spikes(&self) -> impl Iterator<Item = (usize, S)> + '_ {
        self.channels
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|t| (i, t)))
    }

    pub fn num_spikes(&self) -> usize {
        self.channels.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_silent(&self) -> bool {
        self.channels.iter().all(|s| s.is_none())
    }
}

/// Encode one defender's decentralized view of a scenario.
///
/// Defender channel k spikes at 0 iff any defender occupies zone k's segment;
/// intruder channel m+k spikes at `arrival * T / horizon` iff an intruder
/// occupies zone k's segment. Arrivals beyond the horizon clip to the last
/// representable time below T. Panics if the preconditions (positive horizon,
/// zone map matching the defender) are violated.
pub fn encode<S: Real>(
    scenario: &Scenario<S>,
    defender: &Defender,
    zone_map: &ZoneMap,
    t_interval: S,
    horizon: S,
) -> SpikePattern<S> {
    assert!(horizon > S::zero(), "horizon must be positive");
    assert!(t_interval > S::zero(), "interval must be positive");
    assert_eq!(
        zone_map.defender_segment, defender.segment,
        "zone map built for a different defender"
    );
    let m = zone_map.num_zones();
    let mut channels = vec![None; 2 * m];
    let scale = t_interval / horizon;
    // Largest representable spike time below T.
    let t_last = t_interval * (S::one() - r64::<S>(4.0) * S::epsilon());
    for zone in 1..=m {
        let segment = zone_map.segment_of(zone);
        if scenario.defenders.iter().any(|d| d.segment == segment) {
            channels[zone - 1] = Some(S::zero());
        }
        let arrival = scenario
            .intruders
            .iter()
            .filter(|i| i.segment == segment)
            .map(|i| {
                i.arrival_time(scenario.intruder_speed)
                    .expect("scenario validated")
            })
            .min_by(|a, b| a.partial_cmp(b).expect("finite arrivals"));
        if let Some(t) = arrival {
            let spike = t * scale;
            channels[m + zone - 1] = Some(if spike >= t_last { t_last } else { spike });
        }
    }
    let pattern = SpikePattern::new(channels, t_interval).expect("encoded pattern is valid");
    assert!(
        !pattern.is_silent(),
        "own defender always fires the central channel"
    );
    pattern
}
