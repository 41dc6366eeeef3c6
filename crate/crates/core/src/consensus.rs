//! Conflict resolution for decentralized predictions: neighbor-smoothed
//! effective labels, a one-shot minimum-cost auction over contested
//! segments, and feasible trajectory construction with dropped-leg reports.
//!
//! Per-segment vectors are indexed `segment - 1`.

use crate::encoding::{zones_of, ZoneMap};
use crate::error::Result;
use crate::scalar::{rus, Real};
use crate::world::{arc_distance, travel_time, Defender, Scenario, SegmentId, Trajectory, Visit};
use crate::LabelVector;

/// Neighbor-smoothed, presence-masked per-segment prediction scores.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveLabels<S> {
    pub per_segment: Vec<S>,
    pub alpha: S,
}

/// Translate one defender's zone-frame labels to global segment scores
/// (1 where predicted, 0 elsewhere and outside the window).
pub fn segment_scores<S: Real>(labels: &LabelVector, zone_map: &ZoneMap) -> Vec<S> {
    let mut scores = vec![S::zero(); zone_map.num_segments()];
    for (zone0, positive) in labels.iter().enumerate() {
        if positive {
            scores[zone_map.segment_of(zone0 + 1).index() - 1] = S::one();
        }
    }
    scores
}

/// `eff_j = l_j + alpha * (l_{j+1} + l_{j-1})` (cyclic) where an intruder
/// occupies segment j, zero everywhere else.
pub fn effective_labels<S: Real>(
    scores: &[S],
    intruder_present: &[bool],
    alpha: S,
) -> EffectiveLabels<S> {
    let n = scores.len();
    let per_segment = (0..n)
        .map(|j| {
            if intruder_present[j] {
                scores[j] + alpha * (scores[(j + 1) % n] + scores[(j + n - 1) % n])
            } else {
                S::zero()
            }
        })
        .collect();
    EffectiveLabels { per_segment, alpha }
}

/// One defender's bid on a segment.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Bid<S> {
    pub defender_id: usize,
    pub segment: SegmentId,
    /// Segment the defender starts this leg from (previous stop of its plan).
    pub start: SegmentId,
    /// Effective label times arc distance from the start segment.
    pub cost: S,
}

/// Bids for every positive-effective segment of one defender. The start
/// segment of each leg is the previous stop of the defender's own
/// arrival-sorted plan (its current segment for the first leg).
pub fn defender_bids<S: Real>(
    scenario: &Scenario<S>,
    defender: &Defender,
    effective: &EffectiveLabels<S>,
) -> Result<Vec<Bid<S>>> {
    let mut plan: Vec<(SegmentId, S)> = Vec::new();
    for (j, &eff) in effective.per_segment.iter().enumerate() {
        if eff > S::zero() {
            let segment = SegmentId::new(j + 1, scenario.num_segments)?;
            let intruder = scenario
                .intruder_in(segment)
                .expect("effective labels are masked by intruder presence");
            plan.push((segment, intruder.arrival_time(scenario.intruder_speed)?));
        }
    }
    plan.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("finite arrivals")
            .then(a.0.cmp(&b.0))
    });
    let mut bids = Vec::with_capacity(plan.len());
    let mut start = defender.segment;
    for (segment, _) in plan {
        let hops = arc_distance(start, segment, scenario.num_segments)?;
        let eff = effective.per_segment[segment.index() - 1];
        bids.push(Bid {
            defender_id: defender.id,
            segment,
            start,
            cost: eff * rus(hops),
        });
        start = segment;
    }
    Ok(bids)
}

/// One synchronous auction round: the minimum-cost bid wins each segment,
/// exact ties break toward the lower defender id.
pub fn auction<S: Real>(bids: &[Bid<S>]) -> Vec<(SegmentId, usize)> {
    let mut winners: Vec<(SegmentId, usize, S)> = Vec::new();
    for bid in bids {
        match winners.iter_mut().find(|(seg, _, _)| *seg == bid.segment) {
            None => winners.push((bid.segment, bid.defender_id, bid.cost)),
            Some((_, id, cost)) => {
                if bid.cost < *cost || (bid.cost == *cost && bid.defender_id < *id) {
                    *id = bid.defender_id;
                    *cost = bid.cost;
                }
            }
        }
    }
    winners.sort_by_key(|(seg, _, _)| *seg);
    winners.into_iter().map(|(seg, id, _)| (seg, id)).collect()
}

/// A won visit that had to be dropped because the leg exceeded the
/// defender's speed; that intruder escapes.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DroppedVisit<S> {
    pub defender_id: usize,
    pub segment: SegmentId,
    pub arrival: S,
}

/// Order won segments by arrival time and keep the legs the defender can
/// actually fly; infeasible legs are dropped and reported.
pub fn build_trajectory<S: Real>(
    defender: &Defender,
    won: &[(SegmentId, S)],
    num_segments: usize,
    defender_speed: S,
) -> Result<(Trajectory<S>, Vec<DroppedVisit<S>>)> {
    let mut ordered = won.to_vec();
    ordered.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("finite arrivals")
            .then(a.0.cmp(&b.0))
    });
    let mut trajectory = Vec::new();
    let mut dropped = Vec::new();
    let mut position = defender.segment;
    let mut time = S::zero();
    for (segment, arrival) in ordered {
        let hops = arc_distance(position, segment, num_segments)?;
        if travel_time(hops, num_segments, defender_speed) <= arrival - time {
            trajectory.push(Visit {
                segment,
                time: arrival,
            });
            position = segment;
            time = arrival;
        } else {
            dropped.push(DroppedVisit {
                defender_id: defender.id,
                segment,
                arrival,
            });
        }
    }
    Ok((trajectory, dropped))
}

/// Full post-processing pipeline: per-defender predicted labels (parallel to
/// `scenario.defenders`) to conflict-free feasible trajectories.
pub fn dsl_trajectories<S: Real>(
    scenario: &Scenario<S>,
    predictions: &[LabelVector],
    alpha: S,
) -> Result<(Vec<Trajectory<S>>, Vec<DroppedVisit<S>>)> {
    assert_eq!(
        predictions.len(),
        scenario.defenders.len(),
        "one prediction per defender"
    );
    let presence = scenario.intruder_presence();
    let mut all_bids = Vec::new();
    for (defender, labels) in scenario.defenders.iter().zip(predictions) {
        let zone_map = zones_of(defender.segment, labels.len(), scenario.num_segments)?;
        let scores = segment_scores::<S>(labels, &zone_map);
        let effective = effective_labels(&scores, &presence, alpha);
        all_bids.extend(defender_bids(scenario, defender, &effective)?);
    }
    let winners = auction(&all_bids);

    let mut trajectories = Vec::with_capacity(scenario.defenders.len());
    let mut dropped = Vec::new();
    for defender in &scenario.defenders {
        let won: Vec<(SegmentId, S)> = winners
            .iter()
            .filter(|(_, id)| *id == defender.id)
            .map(|&(seg, _)| {
                let intruder = scenario.intruder_in(seg).expect("masked by presence");
                Ok((seg, intruder.arrival_time(scenario.intruder_speed)?))
            })
            .collect::<Result<_>>()?;
        let (trajectory, drops) =
            build_trajectory(defender, &won, scenario.num_segments, scenario.defender_speed)?;
        trajectories.push(trajectory);
        dropped.extend(drops);
    }
    Ok((trajectories, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{simulate_episode, Intruder};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seg(i: usize) -> SegmentId {
        SegmentId::new(i, 36).unwrap()
    }

    fn hop_speed() -> f64 {
        std::f64::consts::TAU / 36.0
    }

    #[test]
    fn effective_labels_mask_and_smooth() {
        let mut scores = vec![0.0f64; 36];
        scores[9] = 1.0;
        scores[10] = 1.0;
        scores[11] = 1.0;
        let mut present = vec![false; 36];
        present[10] = true;

        // alpha = 0: plain masking.
        let eff = effective_labels(&scores, &present, 0.0);
        assert_eq!(eff.per_segment[10], 1.0);
        assert_eq!(eff.per_segment[9], 0.0);

        // alpha = 0.2 with both neighbors predicted: 1 + 0.2 + 0.2.
        let eff = effective_labels(&scores, &present, 0.2);
        assert!((eff.per_segment[10] - 1.4).abs() < 1e-15);

        // No intruder means zero regardless of predictions.
        let eff = effective_labels(&scores, &vec![false; 36], 0.9);
        assert!(eff.per_segment.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn effective_labels_wrap_cyclically() {
        let mut scores = vec![0.0f64; 36];
        scores[0] = 1.0; // segment 1
        scores[35] = 1.0; // segment 36
        let mut present = vec![false; 36];
        present[0] = true;
        let eff = effective_labels(&scores, &present, 0.5);
        // Segment 1's neighbors are 36 and 2.
        assert!((eff.per_segment[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn auction_single_bidder_wins() {
        let bids = vec![Bid {
            defender_id: 3,
            segment: seg(7),
            start: seg(1),
            cost: 4.0,
        }];
        assert_eq!(auction(&bids), vec![(seg(7), 3)]);
    }

    #[test]
    fn auction_prefers_cheaper_bid() {
        // eff 1.0 at distance 5 vs eff 1.2 at distance 10: costs 5 vs 12.
        let bids = vec![
            Bid { defender_id: 0, segment: seg(7), start: seg(2), cost: 1.0 * 5.0 },
            Bid { defender_id: 1, segment: seg(7), start: seg(17), cost: 1.2 * 10.0 },
        ];
        assert_eq!(auction(&bids), vec![(seg(7), 0)]);
    }

    #[test]
    fn auction_breaks_ties_by_lower_id() {
        let bids = vec![
            Bid { defender_id: 5, segment: seg(7), start: seg(2), cost: 6.0 },
            Bid { defender_id: 1, segment: seg(7), start: seg(12), cost: 6.0 },
        ];
        assert_eq!(auction(&bids), vec![(seg(7), 1)]);
    }

    #[test]
    fn trajectory_sorts_by_arrival() {
        let d = Defender { id: 0, segment: seg(1) };
        let won = vec![(seg(4), 5.0), (seg(2), 2.0)];
        let (traj, dropped) = build_trajectory(&d, &won, 36, hop_speed()).unwrap();
        assert!(dropped.is_empty());
        let times: Vec<f64> = traj.iter().map(|v| v.time).collect();
        assert_eq!(times, vec![2.0, 5.0]);
    }

    #[test]
    fn empty_wins_stay_home() {
        let d = Defender { id: 0, segment: seg(1) };
        let (traj, dropped) = build_trajectory::<f64>(&d, &[], 36, hop_speed()).unwrap();
        assert!(traj.is_empty());
        assert!(dropped.is_empty());
    }

    #[test]
    fn infeasible_leg_is_dropped_and_reported() {
        let d = Defender { id: 2, segment: seg(1) };
        // Second stop needs 8 hops in 0.5 s at 1 hop/s: dropped.
        let won = vec![(seg(2), 1.0), (seg(10), 1.5)];
        let (traj, dropped) = build_trajectory(&d, &won, 36, hop_speed()).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].segment, seg(10));
        assert_eq!(dropped[0].defender_id, 2);
    }

    fn random_scenario(rng: &mut ChaCha8Rng) -> Scenario<f64> {
        let n_def = rng.random_range(1..=4);
        let n_intr = rng.random_range(0..=8);
        let defenders = (0..n_def)
            .map(|id| Defender { id, segment: seg(rng.random_range(1..=36)) })
            .collect();
        let mut segments: Vec<usize> = (1..=36).collect();
        let mut intruders = Vec::new();
        for id in 0..n_intr {
            let pick = rng.random_range(0..segments.len());
            let arrival = 8.0 * (1.0 - rng.random::<f64>());
            intruders.push(Intruder {
                id,
                segment: seg(segments.swap_remove(pick)),
                radius: 1.0 + 0.5 * arrival,
            });
        }
        Scenario::new(36, 8.0, defenders, intruders, 2.0 * hop_speed(), 0.5).unwrap()
    }

    #[test]
    fn pipeline_output_is_conflict_free_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..80 {
            let s = random_scenario(&mut rng);
            // Random (deliberately sloppy) predictions over 15 zones.
            let predictions: Vec<LabelVector> = s
                .defenders
                .iter()
                .map(|_| LabelVector((0..15).map(|_| rng.random::<f64>() < 0.3).collect()))
                .collect();
            let (trajectories, _dropped) = dsl_trajectories(&s, &predictions, 0.5).unwrap();

            // No two defenders share a target segment.
            let mut targets = std::collections::HashSet::new();
            for t in &trajectories {
                for v in t {
                    assert!(targets.insert(v.segment), "segment auctioned twice");
                    assert!(s.intruder_in(v.segment).is_some(), "visit without intruder");
                }
            }
            // And the simulator accepts every trajectory.
            simulate_episode(&s, &trajectories).unwrap();
        }
    }

    #[test]
    fn unanimous_alpha_zero_reduces_to_direct_visits() {
        // One defender, predictions exactly on the two intruders: the
        // pipeline visits exactly those segments in arrival order.
        let s = Scenario::new(
            36,
            8.0,
            vec![Defender { id: 0, segment: seg(1) }],
            vec![
                Intruder { id: 0, segment: seg(6), radius: 1.0 + 0.5 * 6.0 },
                Intruder { id: 1, segment: seg(3), radius: 1.0 + 0.5 * 2.0 },
            ],
            hop_speed(),
            0.5,
        )
        .unwrap();
        let zm = zones_of(seg(1), 15, 36).unwrap();
        let mut bits = vec![false; 15];
        bits[zm.zone_of_segment(seg(6)).unwrap() - 1] = true;
        bits[zm.zone_of_segment(seg(3)).unwrap() - 1] = true;
        let (trajs, dropped) =
            dsl_trajectories(&s, &[LabelVector(bits)], 0.0).unwrap();
        assert!(dropped.is_empty());
        let visits: Vec<(usize, f64)> =
            trajs[0].iter().map(|v| (v.segment.index(), v.time)).collect();
        assert_eq!(visits, vec![(3, 2.0), (6, 6.0)]);
        let report = simulate_episode(&s, &trajs).unwrap();
        assert_eq!(report.success_percentage, 100.0);
    }
}
