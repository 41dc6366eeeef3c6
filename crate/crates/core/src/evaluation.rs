//! Multi-label metrics, success-rate suites, the naive equal-sector
//! baseline, defender-speed calibration, scalability sweeps, and report
//! formatting.

use std::fmt;
use std::fmt::Write as _;

use crate::consensus::dsl_trajectories;
use crate::dataset::{generate_scenario, DatasetConfig, Sample};
use crate::encoding::{encode, zones_of};
use crate::error::{Error, Result};
use crate::expert::prune_infeasible;
use crate::runner::{parallel_map, scenario_rng};
use crate::scalar::{r64, rus, Real};
use crate::sefron::SefronNetwork;
use crate::world::{arc_distance, simulate_episode, travel_time, CaptureReport, Scenario,
                   SegmentId, Trajectory, Visit};
use crate::LabelVector;

/// Per-zone binary classification scores.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ZoneScore<S> {
    pub precision: S,
    pub recall: S,
    pub f1: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZoneMetrics<S> {
    pub per_zone: Vec<ZoneScore<S>>,
}

/// Precision/recall/F1 per zone; undefined ratios resolve to 0.
pub fn zone_metrics<S: Real>(
    predictions: &[LabelVector],
    targets: &[LabelVector],
) -> Result<ZoneMetrics<S>> {
    if predictions.len() != targets.len() || predictions.is_empty() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let m = targets[0].len();
    let mut tp = vec![0usize; m];
    let mut fp = vec![0usize; m];
    let mut fn_ = vec![0usize; m];
    for (pred, target) in predictions.iter().zip(targets) {
        if pred.len() != m || target.len() != m {
            return Err(Error::Shape("label length mismatch".into()));
        }
        for zone in 0..m {
            match (pred.get(zone), target.get(zone)) {
                (true, true) => tp[zone] += 1,
                (true, false) => fp[zone] += 1,
                (false, true) => fn_[zone] += 1,
                (false, false) => {}
            }
        }
    }
    let ratio = |num: usize, den: usize| -> S {
        if den == 0 {
            S::zero()
        } else {
            rus::<S>(num) / rus(den)
        }
    };
    let per_zone = (0..m)
        .map(|z| {
            let precision = ratio(tp[z], tp[z] + fp[z]);
            let recall = ratio(tp[z], tp[z] + fn_[z]);
            let f1 = if precision + recall == S::zero() {
                S::zero()
            } else {
                r64::<S>(2.0) * precision * recall / (precision + recall)
            };
            ZoneScore {
                precision,
                recall,
                f1,
            }
        })
        .collect();
    Ok(ZoneMetrics { per_zone })
}

/// Success percentage of one episode (empty intruder sets count as 100).
pub fn success_percentage<S: Real>(report: &CaptureReport<S>) -> S {
    report.success_percentage
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Expert,
    Dsl,
    DslNeighbors,
    Naive,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Expert => "expert",
            Mode::Dsl => "dsl",
            Mode::DslNeighbors => "dsl+neighbors",
            Mode::Naive => "naive",
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Observation {
    Full,
    Partial,
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Observation::Full => "full",
            Observation::Partial => "partial",
        })
    }
}

/// Mean/std of per-run success percentages.
#[derive(Clone, Debug, PartialEq)]
pub struct SuccessSummary<S> {
    pub mean: S,
    pub std: S,
    pub runs: usize,
    pub mode: Mode,
    pub observation: Observation,
}

pub fn summarize<S: Real>(successes: &[S], mode: Mode, observation: Observation) -> SuccessSummary<S> {
    let n = successes.len();
    let mean = if n == 0 {
        S::zero()
    } else {
        successes.iter().copied().sum::<S>() / rus(n)
    };
    let std = if n < 2 {
        S::zero()
    } else {
        let var = successes
            .iter()
            .map(|&s| (s - mean) * (s - mean))
            .sum::<S>()
            / rus(n - 1);
        var.sqrt()
    };
    SuccessSummary {
        mean,
        std,
        runs: n,
        mode,
        observation,
    }
}

/// `100 * dsl.mean / expert.mean`, both over the same observation mode.
pub fn learning_efficiency<S: Real>(
    dsl: &SuccessSummary<S>,
    expert: &SuccessSummary<S>,
) -> Result<S> {
    if dsl.observation != expert.observation {
        return Err(Error::domain(
            "learning efficiency compares summaries of the same observation mode",
        ));
    }
    if expert.mean == S::zero() {
        return Err(Error::domain("learning efficiency undefined for zero expert success"));
    }
    Ok(r64::<S>(100.0) * dsl.mean / expert.mean)
}

/// Expert success of one scenario without simulation: the expert captures
/// exactly the intruders it did not prune.
pub fn expert_success_value<S: Real>(scenario: &Scenario<S>, kappa: i64) -> Result<S> {
    let total = scenario.intruders.len();
    if total == 0 {
        return Ok(r64(100.0));
    }
    let solution = prune_infeasible(scenario, kappa)?;
    Ok(r64::<S>(100.0) * rus(total - solution.pruned.len()) / rus(total))
}

/// Equal static sectors, one defender per sector (sorted defenders take
/// sectors in angular order). Each defender first relocates to its sector's
/// waiting position (the central segment), then chases the sector's
/// intruders in arrival order, even the ones it cannot reach in time.
/// Segments exactly on a sector boundary belong to the lower-index sector.
pub fn naive_baseline<S: Real>(scenario: &Scenario<S>) -> Result<CaptureReport<S>> {
    let team = scenario.defenders.len();
    if team == 0 {
        return Err(Error::domain("naive baseline needs at least one defender"));
    }
    let n = scenario.num_segments;
    let sector_of = |segment: SegmentId| -> usize {
        // Segment center angle as a fraction of the circle: (2s - 1) / 2n.
        let num = (2 * segment.index() - 1) * team;
        let den = 2 * n;
        if num % den == 0 {
            num / den
        } else {
            num / den + 1
        }
    };
    let sector_center = |sector: usize| -> SegmentId {
        let lo = (sector - 1) as f64 * n as f64 / team as f64;
        let hi = sector as f64 * n as f64 / team as f64;
        SegmentId::from_cyclic((0.5 * (lo + hi)).round() as i64, n)
    };
    let mut order: Vec<usize> = (0..team).collect();
    order.sort_by_key(|&i| (scenario.defenders[i].segment, scenario.defenders[i].id));

    let mut trajectories: Vec<Trajectory<S>> = vec![Vec::new(); team];
    for (k, &def_idx) in order.iter().enumerate() {
        let sector = k + 1;
        let defender = &scenario.defenders[def_idx];
        let mut tasks: Vec<(S, SegmentId)> = scenario
            .intruders
            .iter()
            .filter(|i| sector_of(i.segment) == sector)
            .map(|i| Ok((i.arrival_time(scenario.intruder_speed)?, i.segment)))
            .collect::<Result<_>>()?;
        tasks.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("finite arrivals")
                .then(a.1.cmp(&b.1))
        });
        let mut position = defender.segment;
        let mut time = S::zero();
        // Visit a segment as early as the speed limit allows, waiting for
        // the arrival when early. Rounding in `time + travel` can land a
        // hair short of the simulator's exact feasibility comparison, so
        // the visit time is nudged up until the leg verifies.
        let mut push_leg = |segment: SegmentId, arrival: S, position: &mut SegmentId, time: &mut S|
         -> Result<()> {
            let hops = arc_distance(*position, segment, n)?;
            let travel = travel_time(hops, n, scenario.defender_speed);
            let reached = *time + travel;
            let mut visit_time = if reached <= arrival { arrival } else { reached };
            let mut bump = (travel.max(*time) + S::one()) * S::epsilon();
            while visit_time - *time < travel {
                visit_time += bump;
                bump += bump;
            }
            trajectories[def_idx].push(Visit {
                segment,
                time: visit_time,
            });
            *position = segment;
            *time = visit_time;
            Ok(())
        };
        push_leg(sector_center(sector), S::zero(), &mut position, &mut time)?;
        for (arrival, segment) in tasks {
            push_leg(segment, arrival, &mut position, &mut time)?;
        }
    }
    simulate_episode(scenario, &trajectories)
}

/// Per-run expert successes over `cfg.runs` seeded scenarios.
pub fn expert_successes<S: Real>(cfg: &DatasetConfig<S>, jobs: usize) -> Result<Vec<S>> {
    let kappa = cfg.kappa();
    parallel_map(cfg.runs, jobs, |id| {
        let mut rng = scenario_rng(cfg.seed, id as u64);
        let scenario = generate_scenario(cfg, &mut rng);
        expert_success_value(&scenario, kappa)
    })
    .into_iter()
    .collect()
}

/// Predictions of one network for every defender of a scenario.
pub fn network_predictions<S: Real>(
    net: &SefronNetwork<S>,
    scenario: &Scenario<S>,
    cfg: &DatasetConfig<S>,
) -> Result<Vec<LabelVector>> {
    scenario
        .defenders
        .iter()
        .map(|d| {
            let zone_map = zones_of(d.segment, net.num_zones(), cfg.num_segments)?;
            let pattern = encode(scenario, d, &zone_map, cfg.t_interval, cfg.horizon);
            Ok(net.predict(&pattern))
        })
        .collect()
}

/// DSL success of one scenario at a given neighbor-smoothing factor.
pub fn dsl_success_value<S: Real>(
    net: &SefronNetwork<S>,
    scenario: &Scenario<S>,
    cfg: &DatasetConfig<S>,
    alpha: S,
) -> Result<S> {
    let predictions = network_predictions(net, scenario, cfg)?;
    let (trajectories, _) = dsl_trajectories(scenario, &predictions, alpha)?;
    Ok(simulate_episode(scenario, &trajectories)?.success_percentage)
}

/// Per-run DSL successes with and without the neighbor effect, sharing one
/// inference pass per scenario.
pub fn dsl_successes_paired<S: Real>(
    net: &SefronNetwork<S>,
    cfg: &DatasetConfig<S>,
    alpha: S,
    jobs: usize,
) -> Result<(Vec<S>, Vec<S>)> {
    let runs: Vec<Result<(S, S)>> = parallel_map(cfg.runs, jobs, |id| {
        let mut rng = scenario_rng(cfg.seed, id as u64);
        let scenario = generate_scenario(cfg, &mut rng);
        let predictions = network_predictions(net, &scenario, cfg)?;
        let (with_n, _) = dsl_trajectories(&scenario, &predictions, alpha)?;
        let (without_n, _) = dsl_trajectories(&scenario, &predictions, S::zero())?;
        Ok((
            simulate_episode(&scenario, &with_n)?.success_percentage,
            simulate_episode(&scenario, &without_n)?.success_percentage,
        ))
    });
    let mut with_neighbors = Vec::with_capacity(cfg.runs);
    let mut without_neighbors = Vec::with_capacity(cfg.runs);
    for r in runs {
        let (w, wo) = r?;
        with_neighbors.push(w);
        without_neighbors.push(wo);
    }
    Ok((with_neighbors, without_neighbors))
}

/// Per-run naive-baseline successes.
pub fn naive_successes<S: Real>(cfg: &DatasetConfig<S>, jobs: usize) -> Result<Vec<S>> {
    parallel_map(cfg.runs, jobs, |id| {
        let mut rng = scenario_rng(cfg.seed, id as u64);
        let scenario = generate_scenario(cfg, &mut rng);
        Ok(naive_baseline(&scenario)?.success_percentage)
    })
    .into_iter()
    .collect()
}

/// Bisect the defender angular speed until the expert's mean success over
/// the seeded suite lands within `tolerance` of `target`.
pub fn calibrate_defender_speed<S: Real>(
    cfg: &DatasetConfig<S>,
    target: S,
    tolerance: S,
    jobs: usize,
) -> Result<S> {
    let mean_at = |speed: S| -> Result<S> {
        let c = DatasetConfig {
            defender_speed: speed,
            ..cfg.clone()
        };
        let successes = expert_successes(&c, jobs)?;
        Ok(successes.iter().copied().sum::<S>() / rus(successes.len().max(1)))
    };
    let mut lo = r64::<S>(1e-3);
    let mut hi = r64::<S>(4.0 * std::f64::consts::PI);
    let mut trace = String::new();
    let f_lo = mean_at(lo)?;
    let f_hi = mean_at(hi)?;
    write!(trace, "v={lo} -> {f_lo}; v={hi} -> {f_hi}").unwrap();
    if !(f_lo <= target && target <= f_hi) {
        return Err(Error::Calibration(format!(
            "target {target} outside bracket [{f_lo}, {f_hi}] ({trace})"
        )));
    }
    for _ in 0..80 {
        let mid = (lo + hi) * r64(0.5);
        let f_mid = mean_at(mid)?;
        write!(trace, "; v={mid} -> {f_mid}").unwrap();
        if (f_mid - target).abs() <= tolerance {
            return Ok(mid);
        }
        if f_mid < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration(format!(
        "no convergence within tolerance {tolerance} ({trace})"
    )))
}

/// One scalability point: expert (re-solved) vs DSL (fixed network).
#[derive(Clone, Debug)]
pub struct SweepPoint<S> {
    pub team_size: usize,
    pub expert: SuccessSummary<S>,
    pub dsl: SuccessSummary<S>,
}

/// Evaluate expert and DSL over a range of team sizes with the same trained
/// network (no retraining) and fresh scenarios per size.
pub fn scalability_sweep<S: Real>(
    net: &SefronNetwork<S>,
    cfg: &DatasetConfig<S>,
    team_sizes: &[usize],
    alpha: S,
    observation: Observation,
    jobs: usize,
) -> Result<Vec<SweepPoint<S>>> {
    team_sizes
        .iter()
        .map(|&team_size| {
            let c = DatasetConfig {
                team_size,
                // Decorrelate scenario draws across sizes.
                seed: cfg.seed.wrapping_add(1000 + team_size as u64),
                ..cfg.clone()
            };
            let expert = summarize(&expert_successes(&c, jobs)?, Mode::Expert, observation);
            let dsl_runs: Result<Vec<S>> = parallel_map(c.runs, jobs, |id| {
                let mut rng = scenario_rng(c.seed, id as u64);
                let scenario = generate_scenario(&c, &mut rng);
                dsl_success_value(net, &scenario, &c, alpha)
            })
            .into_iter()
            .collect();
            let dsl = summarize(&dsl_runs?, Mode::DslNeighbors, observation);
            Ok(SweepPoint {
                team_size,
                expert,
                dsl,
            })
        })
        .collect()
}

/// Spearman rank correlation of a series against its index order.
pub fn spearman_rho<S: Real>(values: &[S]) -> S {
    let k = values.len();
    if k < 2 {
        return S::zero();
    }
    // Ranks with average ties.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![S::zero(); k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (rus::<S>(i + 1) + rus(j + 1)) * r64(0.5);
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let xs: Vec<S> = (0..k).map(|i| rus(i + 1)).collect();
    pearson(&xs, &ranks)
}

fn pearson<S: Real>(xs: &[S], ys: &[S]) -> S {
    let n = rus::<S>(xs.len());
    let mx = xs.iter().copied().sum::<S>() / n;
    let my = ys.iter().copied().sum::<S>() / n;
    let mut cov = S::zero();
    let mut vx = S::zero();
    let mut vy = S::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == S::zero() || vy == S::zero() {
        return S::zero();
    }
    cov / (vx * vy).sqrt()
}

/// Predict the whole test set and score it per zone.
pub fn evaluate_test_set<S: Real>(
    net: &SefronNetwork<S>,
    samples: &[Sample<S>],
    jobs: usize,
) -> Result<ZoneMetrics<S>> {
    if samples.is_empty() {
        return Err(Error::Shape("empty test set".into()));
    }
    if samples[0].pattern.num_zones() != net.num_zones() {
        return Err(Error::Shape(format!(
            "model has {} zones but samples have {}",
            net.num_zones(),
            samples[0].pattern.num_zones()
        )));
    }
    let predictions: Vec<LabelVector> =
        parallel_map(samples.len(), jobs, |i| net.predict(&samples[i].pattern));
    let targets: Vec<LabelVector> = samples.iter().map(|s| s.labels.clone()).collect();
    zone_metrics(&predictions, &targets)
}

/// Success-percentage comparison table (expert / DSL / DSL+neighbors plus
/// learning efficiency per observation mode), tab-separated.
pub fn comparison_report<S: Real>(
    rows: &[(Observation, SuccessSummary<S>, SuccessSummary<S>, SuccessSummary<S>)],
) -> Result<String> {
    let mut out = String::from("observation\texpert\tdsl\tdsl_neighbors\tlearning_efficiency\n");
    for (observation, expert, dsl, dsl_neighbors) in rows {
        let efficiency = learning_efficiency(dsl_neighbors, expert)?;
        writeln!(
            out,
            "{observation}\t{:.4}\t{:.4}\t{:.4}\t{:.2}",
            expert.mean.to_f64().unwrap_or(f64::NAN),
            dsl.mean.to_f64().unwrap_or(f64::NAN),
            dsl_neighbors.mean.to_f64().unwrap_or(f64::NAN),
            efficiency.to_f64().unwrap_or(f64::NAN),
        )
        .unwrap();
    }
    Ok(out)
}

/// Mean-and-spread table over arbitrary summaries, tab-separated. The spread
/// column is three standard errors of the mean.
pub fn summary_report<S: Real>(summaries: &[SuccessSummary<S>]) -> String {
    let mut out = String::from("mode\tobservation\truns\tmean\tplus_minus_3sem\n");
    for s in summaries {
        let sem3 = if s.runs == 0 {
            0.0
        } else {
            3.0 * s.std.to_f64().unwrap_or(f64::NAN) / (s.runs as f64).sqrt()
        };
        writeln!(
            out,
            "{}\t{}\t{}\t{:.4}\t{:.4}",
            s.mode,
            s.observation,
            s.runs,
            s.mean.to_f64().unwrap_or(f64::NAN),
            sem3
        )
        .unwrap();
    }
    out
}

/// Per-zone metric table matching the zone-index axis of the per-zone plots.
pub fn zone_metrics_report<S: Real>(metrics: &ZoneMetrics<S>) -> String {
    let mut out = String::from("zone\tprecision\trecall\tf1\n");
    for (z, score) in metrics.per_zone.iter().enumerate() {
        writeln!(
            out,
            "{}\t{:.4}\t{:.4}\t{:.4}",
            z + 1,
            score.precision.to_f64().unwrap_or(f64::NAN),
            score.recall.to_f64().unwrap_or(f64::NAN),
            score.f1.to_f64().unwrap_or(f64::NAN)
        )
        .unwrap();
    }
    out
}

/// Scalability table, tab-separated.
pub fn sweep_report<S: Real>(points: &[SweepPoint<S>]) -> String {
    let mut out = String::from("team_size\texpert_mean\tdsl_mean\tgap\n");
    for p in points {
        let e = p.expert.mean.to_f64().unwrap_or(f64::NAN);
        let d = p.dsl.mean.to_f64().unwrap_or(f64::NAN);
        writeln!(out, "{}\t{e:.4}\t{d:.4}\t{:.4}", p.team_size, (e - d).abs()).unwrap();
    }
    out
}
