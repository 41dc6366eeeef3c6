//! Circular territory model: segments, defenders on the perimeter, radially
//! incoming intruders, and episode simulation with a segment-level capture
//! test.
//!
//! Segments are numbered 1..=n anticlockwise, each spanning an arc of 2π/n.
//! Defenders move along the perimeter with a bounded angular speed; intruders
//! move radially inward at constant speed and arrive at the perimeter at
//! `(radius - 1) / speed`.
//!
//! Capture semantics: a defender intercepts intruders while it is stationed
//! in a segment. Between scheduled visits it departs as late as its speed
//! allows and is in transit (not stationed anywhere) until the next visit
//! instant. An intruder is captured iff some defender is stationed in its
//! segment at its arrival time, boundary instants included.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::{r64, rus, Real};

/// 1-based perimeter segment index in `[1, n]`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct SegmentId(usize);

impl SegmentId {
    pub fn new(index: usize, num_segments: usize) -> Result<Self> {
        if index == 0 || index > num_segments {
            return Err(Error::domain(format!(
                "segment index {index} outside [1, {num_segments}]"
            )));
        }
        Ok(SegmentId(index))
    }

    /// Normalize an arbitrary (possibly zero or negative) index into `[1, n]`.
    pub fn from_cyclic(raw: i64, num_segments: usize) -> Self {
        let n = num_segments as i64;
        SegmentId((raw.rem_euclid(n) + n - 1) as usize % num_segments + 1)
    }

    pub fn index(self) -> usize {
        self.0
    }

    /// Cyclic shift by `delta` segments (positive = anticlockwise).
    pub fn offset(self, delta: i64, num_segments: usize) -> SegmentId {
        SegmentId::from_cyclic(self.0 as i64 + delta, num_segments)
    }
}

/// Arc distance in segment hops along the shorter cyclic direction.
pub fn arc_distance(a: SegmentId, b: SegmentId, num_segments: usize) -> Result<usize> {
    if a.index() > num_segments || b.index() > num_segments {
        return Err(Error::domain(format!(
            "segment index out of range for n = {num_segments}: {} vs {}",
            a.index(),
            b.index()
        )));
    }
    let d = a.index().abs_diff(b.index());
    Ok(d.min(num_segments - d))
}

/// Time for a defender with the given angular speed to travel `hops` segments.
///
/// Both the expert cost construction and the simulator feasibility check call
/// this, so their comparisons agree bit-for-bit.
pub fn travel_time<S: Real>(hops: usize, num_segments: usize, angular_speed: S) -> S {
    let seg_angle = r64::<S>(std::f64::consts::TAU) / rus(num_segments);
    rus::<S>(hops) * seg_angle / angular_speed
}

/// Arrival time of an intruder at the perimeter: `(radius - 1) / speed`.
pub fn arrival_time<S: Real>(radius: S, radial_speed: S) -> Result<S> {
    if radial_speed <= S::zero() {
        return Err(Error::domain(format!(
            "intruder radial speed must be positive, got {radial_speed}"
        )));
    }
    if radius < S::one() {
        return Err(Error::domain(format!(
            "intruder radius must be at least 1, got {radius}"
        )));
    }
    Ok((radius - S::one()) / radial_speed)
}

/// A perimeter defender. Radial position is fixed at 1.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Defender {
    pub id: usize,
    pub segment: SegmentId,
}

/// A radially incoming intruder, snapshotted at t = 0.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Intruder<S> {
    pub id: usize,
    pub segment: SegmentId,
    pub radius: S,
}

impl<S: Real> Intruder<S> {
    pub fn arrival_time(&self, radial_speed: S) -> Result<S> {
        arrival_time(self.radius, radial_speed)
    }
}

/// Immutable snapshot of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario<S> {
    pub num_segments: usize,
    pub horizon: S,
    pub defenders: Vec<Defender>,
    pub intruders: Vec<Intruder<S>>,
    /// Maximum defender angular speed, radians per second (uniform team).
    pub defender_speed: S,
    /// Intruder radial speed, units per second (uniform).
    pub intruder_speed: S,
}

impl<S: Real> Scenario<S> {
    pub fn new(
        num_segments: usize,
        horizon: S,
        defenders: Vec<Defender>,
        intruders: Vec<Intruder<S>>,
        defender_speed: S,
        intruder_speed: S,
    ) -> Result<Self> {
        if num_segments == 0 {
            return Err(Error::domain("need at least one segment"));
        }
        if horizon <= S::zero() {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        if defender_speed <= S::zero() || intruder_speed <= S::zero() {
            return Err(Error::domain("speeds must be positive"));
        }
        let mut seen = vec![false; num_segments + 1];
        for i in &intruders {
            if i.segment.index() > num_segments {
                return Err(Error::domain(format!(
                    "intruder {} in segment {} beyond n = {num_segments}",
                    i.id,
                    i.segment.index()
                )));
            }
            if seen[i.segment.index()] {
                return Err(Error::domain(format!(
                    "two intruders in segment {}",
                    i.segment.index()
                )));
            }
            seen[i.segment.index()] = true;
            if i.radius <= S::one() {
                return Err(Error::domain(format!(
                    "intruder {} radius {} must exceed 1",
                    i.id, i.radius
                )));
            }
        }
        for d in &defenders {
            if d.segment.index() > num_segments {
                return Err(Error::domain(format!(
                    "defender {} in segment {} beyond n = {num_segments}",
                    d.id,
                    d.segment.index()
                )));
            }
        }
        Ok(Scenario {
            num_segments,
            horizon,
            defenders,
            intruders,
            defender_speed,
            intruder_speed,
        })
    }

    /// Per-segment intruder presence; index `s - 1` for segment `s`.
    pub fn intruder_presence(&self) -> Vec<bool> {
        let mut present = vec![false; self.num_segments];
        for i in &self.intruders {
            present[i.segment.index() - 1] = true;
        }
        present
    }

    /// The intruder occupying a segment, if any.
    pub fn intruder_in(&self, segment: SegmentId) -> Option<&Intruder<S>> {
        self.intruders.iter().find(|i| i.segment == segment)
    }

    /// Copy with every segment index rotated by `k` (cyclic).
    pub fn rotated(&self, k: i64) -> Scenario<S> {
        Scenario {
            num_segments: self.num_segments,
            horizon: self.horizon,
            defenders: self
                .defenders
                .iter()
                .map(|d| Defender {
                    id: d.id,
                    segment: d.segment.offset(k, self.num_segments),
                })
                .collect(),
            intruders: self
                .intruders
                .iter()
                .map(|i| Intruder {
                    id: i.id,
                    segment: i.segment.offset(k, self.num_segments),
                    radius: i.radius,
                })
                .collect(),
            defender_speed: self.defender_speed,
            intruder_speed: self.intruder_speed,
        }
    }

    /// One-line record: `n=.. horizon=.. defenders=[id:seg,..] intruders=[id:seg:radius,..] vd=.. vi=..`
    pub fn to_line(&self) -> String {
        let mut out = String::new();
        write!(out, "n={} horizon={}", self.num_segments, self.horizon).unwrap();
        out.push_str(" defenders=[");
        for (k, d) in self.defenders.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{}:{}", d.id, d.segment.index()).unwrap();
        }
        out.push_str("] intruders=[");
        for (k, i) in self.intruders.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{}:{}:{}", i.id, i.segment.index(), i.radius).unwrap();
        }
        write!(out, "] vd={} vi={}", self.defender_speed, self.intruder_speed).unwrap();
        out
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let mut n = None;
        let mut horizon = None;
        let mut defenders = Vec::new();
        let mut intruders = Vec::new();
        let mut vd = None;
        let mut vi = None;
        for field in line.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::parse("scenario", format!("field without '=': {field}")))?;
            match key {
                "n" => n = Some(parse_usize("scenario n", value)?),
                "horizon" => horizon = Some(parse_scalar("scenario horizon", value)?),
                "vd" => vd = Some(parse_scalar("scenario vd", value)?),
                "vi" => vi = Some(parse_scalar("scenario vi", value)?),
                "defenders" => {
                    for item in list_items(value) {
                        let mut parts = item.split(':');
                        let id = parse_usize("defender id", parts.next().unwrap_or(""))?;
                        let seg =
                            parse_usize("defender segment", parts.next().unwrap_or(""))?;
                        defenders.push((id, seg));
                    }
                }
                "intruders" => {
                    for item in list_items(value) {
                        let mut parts = item.split(':');
                        let id = parse_usize("intruder id", parts.next().unwrap_or(""))?;
                        let seg =
                            parse_usize("intruder segment", parts.next().unwrap_or(""))?;
                        let radius: S =
                            parse_scalar("intruder radius", parts.next().unwrap_or(""))?;
                        intruders.push((id, seg, radius));
                    }
                }
                other => {
                    return Err(Error::parse("scenario", format!("unknown field {other}")));
                }
            }
        }
        let n = n.ok_or_else(|| Error::parse("scenario", "missing n"))?;
        let horizon = horizon.ok_or_else(|| Error::parse("scenario", "missing horizon"))?;
        let vd = vd.ok_or_else(|| Error::parse("scenario", "missing vd"))?;
        let vi = vi.ok_or_else(|| Error::parse("scenario", "missing vi"))?;
        let defenders = defenders
            .into_iter()
            .map(|(id, seg)| {
                Ok(Defender {
                    id,
                    segment: SegmentId::new(seg, n)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let intruders = intruders
            .into_iter()
            .map(|(id, seg, radius)| {
                Ok(Intruder {
                    id,
                    segment: SegmentId::new(seg, n)?,
                    radius,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Scenario::new(n, horizon, defenders, intruders, vd, vi)
    }
}

fn list_items(value: &str) -> impl Iterator<Item = &str> {
    value
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .filter(|s| !s.is_empty())
}

fn parse_usize(context: &str, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::parse(context, format!("not an integer: {s:?}")))
}

fn parse_scalar<S: Real>(context: &str, s: &str) -> Result<S> {
    s.parse()
        .map_err(|_| Error::parse(context, format!("not a number: {s:?}")))
}

/// A scheduled stop: be in `segment` at `time`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Visit<S> {
    pub segment: SegmentId,
    pub time: S,
}

/// Ordered visit list for one defender.
pub type Trajectory<S> = Vec<Visit<S>>;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Capture<S> {
    pub intruder: usize,
    pub defender: usize,
    pub time: S,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Escape<S> {
    pub intruder: usize,
    pub time: S,
}

/// Outcome of one simulated episode.
#[derive(Clone, Debug, PartialEq)]
pub struct CaptureReport<S> {
    pub captured: Vec<Capture<S>>,
    pub escaped: Vec<Escape<S>>,
    pub success_percentage: S,
}

impl<S: Real> CaptureReport<S> {
    pub fn from_outcomes(captured: Vec<Capture<S>>, escaped: Vec<Escape<S>>) -> Self {
        let total = captured.len() + escaped.len();
        let success_percentage = if total == 0 {
            r64(100.0)
        } else {
            r64::<S>(100.0) * rus(captured.len()) / rus(total)
        };
        CaptureReport {
            captured,
            escaped,
            success_percentage,
        }
    }
}

/// Station intervals for one defender: (segment, arrive, depart).
fn dwell_intervals<S: Real>(
    scenario: &Scenario<S>,
    defender: &Defender,
    trajectory: &Trajectory<S>,
) -> Result<Vec<(SegmentId, S, S)>> {
    let n = scenario.num_segments;
    let v = scenario.defender_speed;
    let mut intervals = Vec::with_capacity(trajectory.len() + 1);
    let mut seg = defender.segment;
    let mut time = S::zero();
    for visit in trajectory {
        let hops = arc_distance(seg, visit.segment, n)?;
        let needed = travel_time(hops, n, v);
        let available = visit.time - time;
        if needed > available {
            return Err(Error::InfeasibleLeg {
                defender: defender.id,
                from: seg.index(),
                to: visit.segment.index(),
                needed: format!("{needed}"),
                available: format!("{available}"),
            });
        }
        // Depart as late as the speed limit allows.
        intervals.push((seg, time, visit.time - needed));
        seg = visit.segment;
        time = visit.time;
    }
    intervals.push((seg, time, S::infinity()));
    Ok(intervals)
}

/// Run one episode: each intruder is captured iff some defender is stationed
/// in its segment at its arrival time. Trajectory feasibility is checked and
/// an offending leg is reported before anything is simulated.
pub fn simulate_episode<S: Real>(
    scenario: &Scenario<S>,
    trajectories: &[Trajectory<S>],
) -> Result<CaptureReport<S>> {
    if trajectories.len() != scenario.defenders.len() {
        return Err(Error::Shape(format!(
            "{} trajectories for {} defenders",
            trajectories.len(),
            scenario.defenders.len()
        )));
    }
    let mut stations = Vec::with_capacity(scenario.defenders.len());
    for (d, t) in scenario.defenders.iter().zip(trajectories) {
        stations.push((d.id, dwell_intervals(scenario, d, t)?));
    }
    // Capture attribution scans defenders in ascending id.
    stations.sort_by_key(|(id, _)| *id);

    let mut captured = Vec::new();
    let mut escaped = Vec::new();
    for intruder in &scenario.intruders {
        let t_arrival = intruder.arrival_time(scenario.intruder_speed)?;
        let hit = stations.iter().find_map(|(id, dwells)| {
            dwells
                .iter()
                .any(|&(seg, from, to)| seg == intruder.segment && from <= t_arrival && t_arrival <= to)
                .then_some(*id)
        });
        match hit {
            Some(defender) => captured.push(Capture {
                intruder: intruder.id,
                defender,
                time: t_arrival,
            }),
            None => escaped.push(Escape {
                intruder: intruder.id,
                time: t_arrival,
            }),
        }
    }
    Ok(CaptureReport::from_outcomes(captured, escaped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(i: usize) -> SegmentId {
        SegmentId::new(i, 36).unwrap()
    }

    #[test]
    fn arc_distance_examples() {
        assert_eq!(arc_distance(seg(5), seg(5), 36).unwrap(), 0);
        assert_eq!(arc_distance(seg(1), seg(19), 36).unwrap(), 18);
        assert_eq!(arc_distance(seg(32), seg(10), 36).unwrap(), 14);
    }

    #[test]
    fn arc_distance_rejects_out_of_range() {
        let a = SegmentId::new(7, 40).unwrap();
        assert!(arc_distance(a, seg(1), 5).is_err());
    }

    #[test]
    fn cyclic_normalization() {
        assert_eq!(SegmentId::from_cyclic(0, 36).index(), 36);
        assert_eq!(SegmentId::from_cyclic(-1, 36).index(), 35);
        assert_eq!(SegmentId::from_cyclic(37, 36).index(), 1);
        assert_eq!(SegmentId::from_cyclic(36, 36).index(), 36);
        assert_eq!(seg(3).offset(-5, 36).index(), 34);
    }

    #[test]
    fn arrival_time_examples() {
        assert_eq!(arrival_time(1.0, 0.5).unwrap(), 0.0);
        assert!((arrival_time(2.075, 0.5).unwrap() - 2.15f64).abs() < 1e-12);
        assert_eq!(arrival_time(3.0, 1.0).unwrap(), 2.0);
        assert!(arrival_time(2.0, 0.0).is_err());
        assert!(arrival_time(2.0, -1.0).is_err());
        assert!(arrival_time(0.5, 1.0).is_err());
    }

    /// v^D of one segment per second keeps hand arithmetic simple.
    fn one_hop_per_second() -> f64 {
        std::f64::consts::TAU / 36.0
    }

    fn intruder_at(id: usize, segment: usize, t_arrival: f64) -> Intruder<f64> {
        Intruder {
            id,
            segment: seg(segment),
            radius: 1.0 + 0.5 * t_arrival,
        }
    }

    #[test]
    fn parked_defender_captures() {
        let s = Scenario::new(
            36,
            8.0,
            vec![Defender { id: 0, segment: seg(7) }],
            vec![intruder_at(0, 7, 3.0)],
            one_hop_per_second(),
            0.5,
        )
        .unwrap();
        let report = simulate_episode(&s, &[vec![]]).unwrap();
        assert_eq!(report.captured.len(), 1);
        assert_eq!(report.captured[0].defender, 0);
        assert_eq!(report.success_percentage, 100.0);
    }

    #[test]
    fn no_defenders_means_no_captures() {
        let s = Scenario::new(
            36,
            8.0,
            vec![],
            vec![intruder_at(0, 7, 3.0), intruder_at(1, 9, 1.0)],
            one_hop_per_second(),
            0.5,
        )
        .unwrap();
        let report = simulate_episode(&s, &[]).unwrap();
        assert!(report.captured.is_empty());
        assert_eq!(report.escaped.len(), 2);
        assert_eq!(report.success_percentage, 0.0);
    }

    #[test]
    fn empty_intruder_set_scores_hundred() {
        let s = Scenario::new(
            36,
            8.0,
            vec![Defender { id: 0, segment: seg(1) }],
            vec![],
            one_hop_per_second(),
            0.5,
        )
        .unwrap();
        let report = simulate_episode(&s, &[vec![]]).unwrap();
        assert_eq!(report.success_percentage, 100.0);
    }

    /// Two defenders, three intruders, exactly one out of reach.
    ///
    /// With one hop per second: d0 at s1 reaches s3 (2 hops) by t=2; d1 at
    /// s19 reaches s20 (1 hop) by t=1. The intruder at s10 arriving at t=3
    /// is 9 hops from both defenders and 7/10 hops from the first captures
    /// with only 1/2 seconds of slack, so nobody can reach it.
    #[test]
    fn hand_built_unreachable_intruder_escapes() {
        let s = Scenario::new(
            36,
            8.0,
            vec![
                Defender { id: 0, segment: seg(1) },
                Defender { id: 1, segment: seg(19) },
            ],
            vec![
                intruder_at(0, 3, 2.0),
                intruder_at(1, 20, 1.0),
                intruder_at(2, 10, 3.0),
            ],
            one_hop_per_second(),
            0.5,
        )
        .unwrap();
        let trajectories = vec![
            vec![Visit { segment: seg(3), time: 2.0 }],
            vec![Visit { segment: seg(20), time: 1.0 }],
        ];
        let report = simulate_episode(&s, &trajectories).unwrap();
        let captured: Vec<usize> = report.captured.iter().map(|c| c.intruder).collect();
        assert_eq!(captured, vec![0, 1]);
        assert_eq!(report.escaped.len(), 1);
        assert_eq!(report.escaped[0].intruder, 2);
        assert!((report.success_percentage - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_leg_is_identified() {
        let s = Scenario::new(
            36,
            8.0,
            vec![Defender { id: 0, segment: seg(1) }],
            vec![intruder_at(0, 10, 1.0)],
            one_hop_per_second(),
            0.5,
        )
        .unwrap();
        let err = simulate_episode(&s, &[vec![Visit { segment: seg(10), time: 1.0 }]])
            .unwrap_err();
        match err {
            Error::InfeasibleLeg { defender, from, to, .. } => {
                assert_eq!((defender, from, to), (0, 1, 10));
            }
            other => panic!("expected InfeasibleLeg, got {other}"),
        }
    }

    #[test]
    fn boundary_arrival_counts_as_capture() {
        // Defender arrives exactly at the arrival instant.
        let s = Scenario::new(
            36,
            8.0,
            vec![Defender { id: 0, segment: seg(1) }],
            vec![intruder_at(0, 4, 3.0)],
            one_hop_per_second(),
            0.5,
        )
        .unwrap();
        let report =
            simulate_episode(&s, &[vec![Visit { segment: seg(4), time: 3.0 }]]).unwrap();
        assert_eq!(report.captured.len(), 1);
    }

    #[test]
    fn transit_does_not_capture() {
        // Defender sweeps over segment 3 between 1.0 and 3.0 on its way to
        // s5 but is in transit, so the early arrival at s3 escapes.
        let s = Scenario::new(
            36,
            8.0,
            vec![Defender { id: 0, segment: seg(1) }],
            vec![intruder_at(0, 3, 2.0), intruder_at(1, 5, 4.0)],
            one_hop_per_second(),
            0.5,
        )
        .unwrap();
        let report =
            simulate_episode(&s, &[vec![Visit { segment: seg(5), time: 4.0 }]]).unwrap();
        let captured: Vec<usize> = report.captured.iter().map(|c| c.intruder).collect();
        assert_eq!(captured, vec![1]);
        assert_eq!(report.escaped[0].intruder, 0);
    }

    #[test]
    fn scenario_line_round_trip() {
        let s = Scenario::new(
            36,
            8.0,
            vec![
                Defender { id: 0, segment: seg(3) },
                Defender { id: 1, segment: seg(30) },
            ],
            vec![intruder_at(0, 7, 2.15), intruder_at(1, 12, 0.25)],
            0.75,
            0.5,
        )
        .unwrap();
        let line = s.to_line();
        let back = Scenario::<f64>::from_line(&line).unwrap();
        assert_eq!(s, back);
        assert_eq!(line, back.to_line());
    }

    #[test]
    fn scenario_rejects_duplicate_intruder_segment() {
        let r = Scenario::new(
            36,
            8.0,
            vec![],
            vec![intruder_at(0, 7, 2.0), intruder_at(1, 7, 3.0)],
            1.0,
            0.5,
        );
        assert!(r.is_err());
    }

    proptest! {
        #[test]
        fn arc_distance_symmetric(a in 1usize..=36, b in 1usize..=36) {
            let (sa, sb) = (seg(a), seg(b));
            prop_assert_eq!(
                arc_distance(sa, sb, 36).unwrap(),
                arc_distance(sb, sa, 36).unwrap()
            );
        }

        #[test]
        fn arc_distance_triangle(a in 1usize..=36, b in 1usize..=36, c in 1usize..=36) {
            let (sa, sb, sc) = (seg(a), seg(b), seg(c));
            let ab = arc_distance(sa, sb, 36).unwrap();
            let ac = arc_distance(sa, sc, 36).unwrap();
            let cb = arc_distance(sc, sb, 36).unwrap();
            prop_assert!(ab <= ac + cb);
        }

        #[test]
        fn rotation_preserves_outcomes(k in 0i64..36, shift in 0usize..30) {
            let s = Scenario::new(
                36,
                8.0,
                vec![
                    Defender { id: 0, segment: seg(1 + shift % 6) },
                    Defender { id: 1, segment: seg(14) },
                ],
                vec![
                    intruder_at(0, 1 + (shift * 7) % 36, 2.0),
                    intruder_at(1, 1 + (shift * 7 + 11) % 36, 5.0),
                ],
                one_hop_per_second(),
                0.5,
            ).unwrap();
            let base = simulate_episode(&s, &[vec![], vec![]]).unwrap();
            let rotated = simulate_episode(&s.rotated(k), &[vec![], vec![]]).unwrap();
            let ids = |r: &CaptureReport<f64>| {
                (r.captured.iter().map(|c| c.intruder).collect::<Vec<_>>(),
                 r.escaped.iter().map(|e| e.intruder).collect::<Vec<_>>())
            };
            prop_assert_eq!(ids(&base), ids(&rotated));
        }
    }
}
