//! Centralized expert policy: first/successor task costs, linear sum
//! assignment, sequential removal of infeasible intruders, chain extraction,
//! and training labels.
//!
//! Tasks are intruders sorted by ascending arrival time (ties by segment).
//! The cost matrix has one row per defender (first-task costs) plus one row
//! per non-latest task (successor costs); every task column must be matched.
//! Costs are measured in integer segment hops; a reachable-in-time failure
//! costs `kappa` (large but finite) and a negative-time successor is
//! forbidden outright.

use std::fmt::Write as _;

use crate::assignment::{solve_min_cost_matching, CostMatrix, Matching};
use crate::encoding::ZoneMap;
use crate::error::Result;
use crate::scalar::Real;
use crate::world::{arc_distance, travel_time, Defender, Scenario, SegmentId, Trajectory, Visit};
use crate::LabelVector;

/// Default large-but-finite cost for reachable-in-time failures.
pub fn default_kappa(num_segments: usize) -> i64 {
    10 * num_segments as i64
}

/// One spatio-temporal task: be at `segment` at `arrival`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Task<S> {
    pub intruder_id: usize,
    pub segment: SegmentId,
    pub arrival: S,
}

/// Cost matrix for one scenario.
#[derive(Clone, Debug)]
pub struct TaskCostMatrix<S> {
    pub defenders: Vec<Defender>,
    /// Tasks in ascending (arrival, segment) order; columns follow this order.
    pub tasks: Vec<Task<S>>,
    pub kappa: i64,
    pub matrix: CostMatrix,
}

/// Build the first-task / successor-task cost matrix for a scenario.
pub fn build_cost_matrix<S: Real>(scenario: &Scenario<S>, kappa: i64) -> Result<TaskCostMatrix<S>> {
    let tasks = scenario
        .intruders
        .iter()
        .map(|i| {
            Ok(Task {
                intruder_id: i.id,
                segment: i.segment,
                arrival: i.arrival_time(scenario.intruder_speed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    build_from_tasks(
        scenario.defenders.clone(),
        tasks,
        scenario.num_segments,
        scenario.defender_speed,
        kappa,
    )
}

fn build_from_tasks<S: Real>(
    defenders: Vec<Defender>,
    mut tasks: Vec<Task<S>>,
    num_segments: usize,
    defender_speed: S,
    kappa: i64,
) -> Result<TaskCostMatrix<S>> {
    tasks.sort_by(|a, b| {
        a.arrival
            .partial_cmp(&b.arrival)
            .expect("arrival times are finite")
            .then(a.segment.cmp(&b.segment))
    });
    let n = defenders.len();
    let m = tasks.len();
    let successor_rows = m.saturating_sub(1);
    let mut matrix = CostMatrix::new(n + successor_rows, m);

    for (i, d) in defenders.iter().enumerate() {
        for (j, task) in tasks.iter().enumerate() {
            let hops = arc_distance(d.segment, task.segment, num_segments)?;
            let feasible = travel_time(hops, num_segments, defender_speed) <= task.arrival;
            matrix.set(i, j, Some(if feasible { hops as i64 } else { kappa }));
        }
    }
    for k in 0..successor_rows {
        for j in 0..m {
            if j == k {
                continue; // a task cannot follow itself
            }
            let gap = tasks[j].arrival - tasks[k].arrival;
            if gap < S::zero() {
                continue; // negative travel time: forbidden
            }
            let hops = arc_distance(tasks[k].segment, tasks[j].segment, num_segments)?;
            let feasible = travel_time(hops, num_segments, defender_speed) <= gap;
            matrix.set(n + k, j, Some(if feasible { hops as i64 } else { kappa }));
        }
    }
    Ok(TaskCostMatrix {
        defenders,
        tasks,
        kappa,
        matrix,
    })
}

/// One defender's ordered task chain.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain<S> {
    pub defender_id: usize,
    pub tasks: Vec<Task<S>>,
}

/// A removed (escaping) intruder.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Pruned<S> {
    pub intruder_id: usize,
    pub segment: SegmentId,
    pub arrival: S,
}

/// Solved assignment: chains per defender plus bookkeeping.
#[derive(Clone, Debug)]
pub struct AssignmentSolution<S> {
    /// (defender index, task column) pairs chosen as first tasks.
    pub first_assignments: Vec<(usize, usize)>,
    /// (task column k, task column j): j immediately follows k.
    pub successor_links: Vec<(usize, usize)>,
    /// One chain per defender, parallel to the defender list.
    pub chains: Vec<Chain<S>>,
    pub total_cost: i64,
    pub pruned: Vec<Pruned<S>>,
}

impl<S: Real> AssignmentSolution<S> {
    fn empty(defenders: &[Defender]) -> Self {
        AssignmentSolution {
            first_assignments: Vec::new(),
            successor_links: Vec::new(),
            chains: defenders
                .iter()
                .map(|d| Chain {
                    defender_id: d.id,
                    tasks: Vec::new(),
                })
                .collect(),
            total_cost: 0,
            pruned: Vec::new(),
        }
    }

    pub fn chain_for(&self, defender_id: usize) -> Option<&Chain<S>> {
        self.chains.iter().find(|c| c.defender_id == defender_id)
    }

    /// Trajectories parallel to the solution's defender order.
    pub fn trajectories(&self) -> Vec<Trajectory<S>> {
        self.chains
            .iter()
            .map(|c| {
                c.tasks
                    .iter()
                    .map(|t| Visit {
                        segment: t.segment,
                        time: t.arrival,
                    })
                    .collect()
            })
            .collect()
    }

    /// Text dump: one line per defender chain, then the pruned list.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for chain in &self.chains {
            write!(out, "chain defender={} visits=[", chain.defender_id).unwrap();
            for (k, t) in chain.tasks.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write!(out, "{}:{}", t.segment.index(), t.arrival).unwrap();
            }
            out.push_str("]\n");
        }
        out.push_str("pruned=[");
        for (k, p) in self.pruned.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{}:{}:{}", p.intruder_id, p.segment.index(), p.arrival).unwrap();
        }
        out.push_str("]\n");
        out
    }
}

/// Solve the assignment exactly once (no pruning).
pub fn solve_assignment<S: Real>(tcm: &TaskCostMatrix<S>) -> Result<AssignmentSolution<S>> {
    if tcm.tasks.is_empty() {
        return Ok(AssignmentSolution::empty(&tcm.defenders));
    }
    let matching = solve_min_cost_matching(&tcm.matrix)?;
    Ok(solution_from_matching(tcm, &matching))
}

fn solution_from_matching<S: Real>(
    tcm: &TaskCostMatrix<S>,
    matching: &Matching,
) -> AssignmentSolution<S> {
    let n = tcm.defenders.len();
    let mut first_of_defender: Vec<Option<usize>> = vec![None; n];
    let mut successor_of_task: Vec<Option<usize>> = vec![None; tcm.tasks.len()];
    let mut first_assignments = Vec::new();
    let mut successor_links = Vec::new();
    for (col, &row) in matching.row_of_col.iter().enumerate() {
        if row < n {
            first_of_defender[row] = Some(col);
            first_assignments.push((row, col));
        } else {
            let k = row - n;
            successor_of_task[k] = Some(col);
            successor_links.push((k, col));
        }
    }
    let mut chains = Vec::with_capacity(n);
    let mut visited = vec![false; tcm.tasks.len()];
    for (i, d) in tcm.defenders.iter().enumerate() {
        let mut tasks = Vec::new();
        let mut cursor = first_of_defender[i];
        while let Some(col) = cursor {
            if visited[col] {
                break;
            }
            visited[col] = true;
            tasks.push(tcm.tasks[col]);
            cursor = successor_of_task.get(col).copied().flatten();
        }
        chains.push(Chain {
            defender_id: d.id,
            tasks,
        });
    }
    AssignmentSolution {
        first_assignments,
        successor_links,
        chains,
        total_cost: matching.total_cost,
        pruned: Vec::new(),
    }
}

/// Solve, then repeatedly remove the earliest-arriving intruder matched at
/// cost >= kappa until every matched entry is strictly below kappa.
pub fn prune_infeasible<S: Real>(scenario: &Scenario<S>, kappa: i64) -> Result<AssignmentSolution<S>> {
    let mut tasks = scenario
        .intruders
        .iter()
        .map(|i| {
            Ok(Task {
                intruder_id: i.id,
                segment: i.segment,
                arrival: i.arrival_time(scenario.intruder_speed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pruned = Vec::new();

    if scenario.defenders.is_empty() {
        let mut sol = AssignmentSolution::empty(&scenario.defenders);
        sol.pruned = tasks
            .iter()
            .map(|t| Pruned {
                intruder_id: t.intruder_id,
                segment: t.segment,
                arrival: t.arrival,
            })
            .collect();
        return Ok(sol);
    }

    loop {
        let tcm = build_from_tasks(
            scenario.defenders.clone(),
            tasks.clone(),
            scenario.num_segments,
            scenario.defender_speed,
            kappa,
        )?;
        if tcm.tasks.is_empty() {
            let mut sol = AssignmentSolution::empty(&scenario.defenders);
            sol.pruned = pruned;
            return Ok(sol);
        }
        let matching = solve_min_cost_matching(&tcm.matrix)?;
        let over_budget = matching
            .row_of_col
            .iter()
            .enumerate()
            .filter(|&(col, &row)| tcm.matrix.get(row, col).expect("matched finite") >= kappa)
            .map(|(col, _)| col)
            .min_by(|&a, &b| {
                let (ta, tb) = (&tcm.tasks[a], &tcm.tasks[b]);
                ta.arrival
                    .partial_cmp(&tb.arrival)
                    .expect("finite arrivals")
                    .then(ta.segment.cmp(&tb.segment))
            });
        match over_budget {
            None => {
                let mut sol = solution_from_matching(&tcm, &matching);
                sol.pruned = pruned;
                return Ok(sol);
            }
            Some(col) => {
                let removed = tcm.tasks[col];
                pruned.push(Pruned {
                    intruder_id: removed.intruder_id,
                    segment: removed.segment,
                    arrival: removed.arrival,
                });
                tasks = tcm.tasks;
                tasks.remove(col);
            }
        }
    }
}

/// Zone labels for one defender: a zone is positive iff some task of the
/// defender's chain lies in that zone's segment (tasks outside the observed
/// window are excluded).
pub fn labels_from_assignment<S: Real>(
    solution: &AssignmentSolution<S>,
    defender: &Defender,
    zone_map: &ZoneMap,
) -> LabelVector {
    let mut bits = vec![false; zone_map.num_zones()];
    if let Some(chain) = solution.chain_for(defender.id) {
        for task in &chain.tasks {
            if let Some(zone) = zone_map.zone_of_segment(task.segment) {
                bits[zone - 1] = true;
            }
        }
    }
    LabelVector(bits)
}
