//! Statistical-CSI scheduling: greedy user selection, greedy joint user and
//! subarray selection, and an exhaustive oracle over the same objective.
//!
//! The objective is the closed-form sum SE of the scheduled users. Without a
//! subarray assignment every subarray stays on and the phase-shifter design
//! sums the scheduled users' eigen angles. With an assignment only assigned
//! subarrays are on, and each carries its owner's angles.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, ChannelStats};
use crate::closed_form::{lmmse_se_from_trace, mrc_se_from_moments, MomentSet};
use crate::combiner::{
    combine_user_phases, covered_subarrays, onoff_all_on, random_phase_combiner, user_phase_angles, Architecture,
    Combiner, ReducedCorrelation, UserPhases,
};
use crate::error::{Error, Result};
use crate::linalg::quad_form;
use crate::receivers::Receiver;
use crate::rng::{streams, trial_rng};

/// Upper bound on the number of candidate solutions the oracle will visit.
pub const EXHAUSTIVE_LIMIT: f64 = 1e7;

/// Subarray indices owned by each scheduled user.
pub type Assignment = BTreeMap<usize, Vec<usize>>;

/// Best subarray set and objective for one candidate user, or why it was skipped.
type Candidate = std::result::Result<(Vec<usize>, f64), String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetMode {
    /// Rank free subarrays by the user's own gain and try the top `j`.
    #[default]
    RankTopj,
    /// Enumerate every subset of the free subarrays touching the user's VR.
    ExhaustiveVr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubarrayBounds {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Best objective value reached by adding each candidate user.
    pub candidates: Vec<(usize, f64)>,
    pub selected: Option<usize>,
    /// Objective after this iteration.
    pub sum_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOutcome {
    pub scheduled_users: Vec<usize>,
    pub subarray_assignment: Assignment,
    pub sum_se: f64,
    pub iterations_log: Vec<IterationRecord>,
    /// Users passed over because too few free subarrays remained.
    pub skipped: Vec<(usize, String)>,
}

impl ScheduleOutcome {
    fn empty() -> Self {
        ScheduleOutcome {
            scheduled_users: Vec::new(),
            subarray_assignment: Assignment::new(),
            sum_se: 0.0,
            iterations_log: Vec::new(),
            skipped: Vec::new(),
        }
    }

    /// Objective values after each accepted user.
    pub fn accepted_values(&self) -> Vec<f64> {
        self.iterations_log
            .iter()
            .filter(|r| r.selected.is_some())
            .map(|r| r.sum_se)
            .collect()
    }

    pub fn active_subarrays(&self) -> Option<usize> {
        if self.subarray_assignment.is_empty() {
            None
        } else {
            Some(self.subarray_assignment.values().map(Vec::len).sum())
        }
    }
}

/// Closed-form sum SE of a user set under a fixed receiver, architecture and
/// transmit SNR.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    geometry: ArrayGeometry,
    stats: &'a [ChannelStats],
    receiver: Receiver,
    architecture: Architecture,
    p_u: f64,
    phases: Vec<UserPhases>,
    fixed: Option<Combiner>,
}

impl<'a> Objective<'a> {
    /// `seed` only matters for the random-phase architecture, whose combiner
    /// is drawn once and then held fixed.
    pub fn new(
        stats: &'a [ChannelStats],
        geometry: &ArrayGeometry,
        receiver: Receiver,
        architecture: Architecture,
        p_u: f64,
        seed: u64,
    ) -> Self {
        let phases = match architecture {
            Architecture::PhaseShifter => stats.par_iter().map(|s| user_phase_angles(s, geometry)).collect(),
            _ => Vec::new(),
        };
        let fixed = match architecture {
            Architecture::PhaseShifter => None,
            Architecture::OnOffSwitch => Some(onoff_all_on(geometry)),
            Architecture::RandomPhase => {
                Some(random_phase_combiner(geometry, &mut trial_rng(seed, streams::RANDOM_PHASE)))
            }
        };
        Objective {
            geometry: *geometry,
            stats,
            receiver,
            architecture,
            p_u,
            phases,
            fixed,
        }
    }

    pub fn num_users(&self) -> usize {
        self.stats.len()
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn stats(&self) -> &'a [ChannelStats] {
        self.stats
    }

    /// Combiner realizing a schedule. `None` keeps every subarray on.
    pub fn combiner(&self, users: &[usize], assignment: Option<&Assignment>) -> Combiner {
        let g = &self.geometry;
        match assignment {
            None => match &self.fixed {
                Some(c) => c.clone(),
                None => {
                    let refs: Vec<&UserPhases> = users.iter().map(|&u| &self.phases[u]).collect();
                    combine_user_phases(&refs, g)
                }
            },
            Some(assignment) => {
                let mut active = vec![false; g.num_subarrays];
                let mut owned: UserPhases = vec![None; g.num_subarrays];
                for (&u, subs) in assignment {
                    for &i in subs {
                        active[i] = true;
                        if self.fixed.is_none() {
                            owned[i] = self.phases[u][i].clone();
                        }
                    }
                }
                let base = match &self.fixed {
                    Some(c) => c.clone(),
                    None => combine_user_phases(&[&owned], g),
                };
                base.with_active(&active)
            }
        }
    }

    /// Closed-form SE of each user in `users`, in order.
    pub fn per_user(&self, users: &[usize], assignment: Option<&Assignment>) -> Vec<f64> {
        if users.is_empty() {
            return Vec::new();
        }
        let combiner = self.combiner(users, assignment);
        self.per_user_with(users, &combiner)
    }

    pub fn per_user_with(&self, users: &[usize], combiner: &Combiner) -> Vec<f64> {
        let reduced: Vec<ReducedCorrelation> = users.iter().map(|&u| combiner.reduce(&self.stats[u])).collect();
        match self.receiver {
            Receiver::Lmmse => reduced.iter().map(|r| lmmse_se_from_trace(r.trace(), self.p_u)).collect(),
            Receiver::Mrc => {
                let gram = combiner.gram_diag();
                (0..reduced.len())
                    .map(|k| {
                        let others: Vec<&ReducedCorrelation> =
                            reduced.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, r)| r).collect();
                        mrc_se_from_moments(&MomentSet::from_reduced(&reduced[k], &others, &gram), self.p_u)
                    })
                    .collect()
            }
        }
    }

    pub fn evaluate(&self, users: &[usize], assignment: Option<&Assignment>) -> f64 {
        self.per_user(users, assignment).iter().sum()
    }

    /// Gain `w_i^H Θ̄_ii w_i` of every subarray for a user, using the weights
    /// the user would get on that subarray if it owned it.
    pub fn subarray_gains(&self, user: usize) -> Vec<f64> {
        let g = &self.geometry;
        let stats = &self.stats[user];
        let own = match &self.fixed {
            Some(c) => c.clone(),
            None => combine_user_phases(&[&self.phases[user]], g),
        };
        let mut gains = vec![0.0; g.num_subarrays];
        for i in covered_subarrays(stats, g) {
            let r = g.subarray_range(i);
            gains[i] = quad_form(own.block(i).as_slice(), &stats.theta_block(r.clone(), r)).re;
        }
        gains
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }
}

/// Index of the largest value; the earliest wins ties.
fn argmax<T>(items: &[(T, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (_, v)) in items.iter().enumerate() {
        if best.is_none_or(|b| *v > items[b].1) {
            best = Some(i);
        }
    }
    best
}

fn with_user(users: &[usize], u: usize) -> Vec<usize> {
    let mut v = users.to_vec();
    v.push(u);
    v
}

/// Greedy user scheduling with every subarray on.
pub fn greedy_user_schedule(objective: &Objective, max_users: usize) -> Result<ScheduleOutcome> {
    let k = objective.num_users();
    if max_users > k {
        return Err(Error::config("n_u", format!("N_u = {max_users} exceeds K = {k}")));
    }
    let mut out = ScheduleOutcome::empty();
    let mut unscheduled: Vec<usize> = (0..k).collect();
    while out.scheduled_users.len() < max_users && !unscheduled.is_empty() {
        let candidates: Vec<(usize, f64)> = unscheduled
            .par_iter()
            .map(|&u| (u, objective.evaluate(&with_user(&out.scheduled_users, u), None)))
            .collect();
        let best = argmax(&candidates).expect("non-empty candidate list");
        let (user, value) = candidates[best];
        if value >= out.sum_se {
            out.scheduled_users.push(user);
            unscheduled.retain(|&x| x != user);
            out.sum_se = value;
            out.iterations_log.push(IterationRecord {
                candidates,
                selected: Some(user),
                sum_se: value,
            });
        } else {
            out.iterations_log.push(IterationRecord {
                candidates,
                selected: None,
                sum_se: out.sum_se,
            });
            break;
        }
    }
    Ok(out)
}

fn check_bounds(geometry: &ArrayGeometry, max_users: usize, bounds: SubarrayBounds) -> Result<()> {
    let n = geometry.num_subarrays;
    if bounds.min == 0 {
        return Err(Error::config("sub_min", "must be at least 1"));
    }
    if bounds.min > bounds.max || bounds.max > n {
        return Err(Error::config(
            "sub_max",
            format!("need 1 <= Sub_min <= Sub_max <= N, got {} / {} / {n}", bounds.min, bounds.max),
        ));
    }
    if max_users * bounds.min > n {
        return Err(Error::config(
            "n_u",
            format!("N_u · Sub_min = {} exceeds N = {n}", max_users * bounds.min),
        ));
    }
    Ok(())
}

/// `k`-subsets of `items` in lexicographic order.
fn combinations(items: &[usize], k: usize, out: &mut Vec<Vec<usize>>) {
    fn go(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            go(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    go(items, k, 0, &mut Vec::with_capacity(k), out);
}

fn candidate_sets(
    objective: &Objective,
    user: usize,
    free: &[usize],
    bounds: SubarrayBounds,
    mode: SubsetMode,
) -> std::result::Result<Vec<Vec<usize>>, String> {
    if free.len() < bounds.min {
        return Err(format!(
            "only {} free subarrays, Sub_min = {}",
            free.len(),
            bounds.min
        ));
    }
    let mut sets = Vec::new();
    match mode {
        SubsetMode::RankTopj => {
            let gains = objective.subarray_gains(user);
            let mut ranked = free.to_vec();
            ranked.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
            for j in bounds.min..=bounds.max.min(ranked.len()) {
                let mut s = ranked[..j].to_vec();
                s.sort_unstable();
                sets.push(s);
            }
        }
        SubsetMode::ExhaustiveVr => {
            let g = objective.geometry();
            let touched: Vec<usize> = covered_subarrays(&objective.stats()[user], g)
                .filter(|i| free.contains(i))
                .collect();
            if touched.len() >= bounds.min {
                for j in bounds.min..=bounds.max.min(touched.len()) {
                    combinations(&touched, j, &mut sets);
                }
            } else {
                let mut s = touched.clone();
                s.extend(free.iter().filter(|i| !touched.contains(i)).take(bounds.min - touched.len()));
                s.sort_unstable();
                sets.push(s);
            }
        }
    }
    Ok(sets)
}

/// Greedy joint user and subarray scheduling. Subarrays leave the free pool
/// only when their user is accepted.
pub fn greedy_joint_schedule(
    objective: &Objective,
    max_users: usize,
    bounds: SubarrayBounds,
    mode: SubsetMode,
) -> Result<ScheduleOutcome> {
    let k = objective.num_users();
    if max_users > k {
        return Err(Error::config("n_u", format!("N_u = {max_users} exceeds K = {k}")));
    }
    check_bounds(objective.geometry(), max_users, bounds)?;
    let mut out = ScheduleOutcome::empty();
    let mut free: Vec<usize> = (0..objective.geometry().num_subarrays).collect();
    let mut unscheduled: Vec<usize> = (0..k).collect();

    while out.scheduled_users.len() < max_users && !unscheduled.is_empty() {
        let evaluated: Vec<(usize, Candidate)> = unscheduled
            .par_iter()
            .map(|&u| {
                let best = candidate_sets(objective, u, &free, bounds, mode).map(|sets| {
                    let users = with_user(&out.scheduled_users, u);
                    let scored: Vec<(Vec<usize>, f64)> = sets
                        .into_iter()
                        .map(|s| {
                            let mut a = out.subarray_assignment.clone();
                            a.insert(u, s.clone());
                            let v = objective.evaluate(&users, Some(&a));
                            (s, v)
                        })
                        .collect();
                    let i = argmax(&scored).expect("at least one candidate set");
                    scored[i].clone()
                });
                (u, best)
            })
            .collect();

        let mut feasible: Vec<((usize, Vec<usize>), f64)> = Vec::new();
        for (u, r) in evaluated {
            match r {
                Ok((set, v)) => feasible.push(((u, set), v)),
                Err(reason) => {
                    if !out.skipped.iter().any(|(s, _)| *s == u) {
                        out.skipped.push((u, reason));
                    }
                }
            }
        }
        let candidates: Vec<(usize, f64)> = feasible.iter().map(|((u, _), v)| (*u, *v)).collect();
        let Some(best) = argmax(&feasible) else {
            break;
        };
        let ((user, set), value) = feasible.swap_remove(best);
        if value >= out.sum_se {
            free.retain(|i| !set.contains(i));
            out.subarray_assignment.insert(user, set);
            out.scheduled_users.push(user);
            unscheduled.retain(|&x| x != user);
            out.sum_se = value;
            out.iterations_log.push(IterationRecord {
                candidates,
                selected: Some(user),
                sum_se: value,
            });
        } else {
            out.iterations_log.push(IterationRecord {
                candidates,
                selected: None,
                sum_se: out.sum_se,
            });
            break;
        }
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Number of schedules the oracle visits.
pub fn exhaustive_size(num_users: usize, max_users: usize, num_subarrays: usize, bounds: Option<SubarrayBounds>) -> f64 {
    let max_users = max_users.min(num_users);
    match bounds {
        None => (0..=max_users).map(|s| binomial(num_users, s)).sum(),
        Some(b) => {
            // ways[s][n]: labelled disjoint placements of s users into n subarrays
            let mut ways = vec![vec![0.0; num_subarrays + 1]; max_users + 1];
            ways[0].iter_mut().for_each(|w| *w = 1.0);
            for s in 1..=max_users {
                for n in 0..=num_subarrays {
                    ways[s][n] = (b.min..=b.max.min(n)).map(|j| binomial(n, j) * ways[s - 1][n - j]).sum();
                }
            }
            (0..=max_users)
                .map(|s| binomial(num_users, s) * ways[s][num_subarrays])
                .sum()
        }
    }
}

/// True optimum of the objective by enumeration. Without `bounds` this
/// searches user sets of size up to `max_users` with every subarray on;
/// with `bounds` it also searches every disjoint subarray assignment.
pub fn exhaustive_schedule(
    objective: &Objective,
    max_users: usize,
    bounds: Option<SubarrayBounds>,
) -> Result<ScheduleOutcome> {
    let k = objective.num_users();
    let n = objective.geometry().num_subarrays;
    if let Some(b) = bounds {
        check_bounds(objective.geometry(), max_users.min(k), b)?;
    }
    let size = exhaustive_size(k, max_users, n, bounds);
    if size > EXHAUSTIVE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let mut best = ScheduleOutcome::empty();
    match bounds {
        None => {
            let all: Vec<usize> = (0..k).collect();
            for s in 1..=max_users.min(k) {
                let mut sets = Vec::new();
                combinations(&all, s, &mut sets);
                let scored: Vec<(Vec<usize>, f64)> =
                    sets.into_par_iter().map(|u| { let v = objective.evaluate(&u, None); (u, v) }).collect();
                if let Some(i) = argmax(&scored) {
                    if scored[i].1 > best.sum_se {
                        best.scheduled_users = scored[i].0.clone();
                        best.sum_se = scored[i].1;
                    }
                }
            }
        }
        Some(b) => {
            let mut search = JointSearch {
                objective,
                bounds: b,
                max_users,
                users: Vec::new(),
                assignment: Assignment::new(),
                best_value: 0.0,
                best: None,
            };
            search.visit(0, &(0..n).collect::<Vec<_>>());
            if let Some((users, assignment)) = search.best {
                best.scheduled_users = users;
                best.subarray_assignment = assignment;
                best.sum_se = search.best_value;
            }
        }
    }
    Ok(best)
}

struct JointSearch<'o, 'a> {
    objective: &'o Objective<'a>,
    bounds: SubarrayBounds,
    max_users: usize,
    users: Vec<usize>,
    assignment: Assignment,
    best_value: f64,
    best: Option<(Vec<usize>, Assignment)>,
}

impl JointSearch<'_, '_> {
    fn visit(&mut self, next_user: usize, free: &[usize]) {
        if next_user == self.objective.num_users() {
            if !self.users.is_empty() {
                let v = self.objective.evaluate(&self.users, Some(&self.assignment));
                if v > self.best_value {
                    self.best_value = v;
                    self.best = Some((self.users.clone(), self.assignment.clone()));
                }
            }
            return;
        }
        self.visit(next_user + 1, free);
        if self.users.len() == self.max_users {
            return;
        }
        let mut sets = Vec::new();
        for j in self.bounds.min..=self.bounds.max.min(free.len()) {
            combinations(free, j, &mut sets);
        }
        for set in sets {
            let rest: Vec<usize> = free.iter().copied().filter(|i| !set.contains(i)).collect();
            self.users.push(next_user);
            self.assignment.insert(next_user, set);
            self.visit(next_user + 1, &rest);
            self.assignment.remove(&next_user);
            self.users.pop();
        }
    }
}
