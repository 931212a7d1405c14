//! Drivers behind the CLI subcommands: SNR sweeps, scheduling runs and the
//! oracle comparisons.

use serde::Serialize;

use crate::closed_form::{closed_form_se, completely_overlapped_se, projected_eigenvalues};
use crate::combiner::{onoff_all_on, phase_design_multiuser, random_phase_combiner, Architecture, Combiner};
use crate::config::{Algorithm, ExperimentConfig};
use crate::energy::{energy_efficiency, uplink_power};
use crate::error::Result;
use crate::output::{ResultRow, ScheduleOracleRow, ScheduleRow, SeOracleRow, VrMapRow};
use crate::receivers::{monte_carlo_se, snr_db_to_linear, Method, Receiver, SeResult};
use crate::rng::{streams, trial_rng};
use crate::scenario::Scenario;
use crate::scheduling::{
    exhaustive_schedule, greedy_joint_schedule, greedy_user_schedule, Objective, ScheduleOutcome,
};

/// Combiner used by sweeps: multi-user eigen design, all switches on, or a
/// seeded random-phase draw.
pub fn sweep_combiner(architecture: Architecture, scenario: &Scenario, seed: u64) -> Combiner {
    let g = &scenario.geometry;
    match architecture {
        Architecture::PhaseShifter => {
            let refs: Vec<_> = scenario.stats.iter().collect();
            phase_design_multiuser(&refs, g)
        }
        Architecture::OnOffSwitch => onoff_all_on(g),
        Architecture::RandomPhase => random_phase_combiner(g, &mut trial_rng(seed, streams::RANDOM_PHASE)),
    }
}

struct RowContext<'a> {
    config: &'a ExperimentConfig,
    receiver: Receiver,
    architecture: Architecture,
    power_mw: f64,
}

impl RowContext<'_> {
    fn rows(&self, method: Method, result: &SeResult, users: &[usize], out: &mut Vec<ResultRow>) {
        let row = |user: String, se: f64, stderr: f64, ee: Option<f64>| ResultRow {
            experiment: self.config.experiment.clone(),
            snr_db: result.snr_db,
            method: method.label().into(),
            receiver: self.receiver.label().into(),
            architecture: self.architecture.label().into(),
            user,
            se,
            stderr,
            power_mw: self.power_mw,
            ee,
            seed: self.config.seed,
        };
        for (i, &u) in users.iter().enumerate() {
            out.push(row((u + 1).to_string(), result.per_user_se[i], result.per_user_stderr[i], None));
        }
        let ee = energy_efficiency(result.sum_se, self.power_mw, self.config.bandwidth_hz).ok();
        out.push(row("SUM".into(), result.sum_se, result.sum_stderr, ee));
    }
}

fn power_for(config: &ExperimentConfig, architecture: Architecture, active: Option<usize>) -> f64 {
    uplink_power(
        architecture,
        config.geometry.num_antennas,
        config.geometry.num_subarrays,
        &config.power,
        active,
        config.power_accounting,
    )
}

/// Per-user and sum SE for every (architecture, receiver, method, SNR).
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let scenario = config.scenario()?;
    let k = scenario.num_users();
    let users: Vec<usize> = (0..k).collect();
    let mut rows = Vec::new();
    for &architecture in &config.architectures {
        let combiner = sweep_combiner(architecture, &scenario, config.seed);
        let power_mw = power_for(config, architecture, Some(combiner.active_count()));
        for &receiver in &config.receivers {
            let ctx = RowContext {
                config,
                receiver,
                architecture,
                power_mw,
            };
            for &method in &config.methods {
                let results = match method {
                    Method::MonteCarlo => {
                        monte_carlo_se(&scenario.stats, &combiner, receiver, &config.snr_db, config.trials, config.seed)
                    }
                    Method::ClosedForm => closed_form_se(&scenario.stats, &combiner, receiver, &config.snr_db),
                    Method::Exact => {
                        if receiver != Receiver::Lmmse {
                            continue;
                        }
                        let eigs = projected_eigenvalues(&scenario.stats[0], &combiner);
                        config
                            .snr_db
                            .iter()
                            .map(|&snr| {
                                let se = completely_overlapped_se(&eigs, k, snr_db_to_linear(snr))?;
                                Ok(SeResult::deterministic(snr, Method::Exact, vec![se; k]))
                            })
                            .collect::<Result<Vec<_>>>()?
                    }
                };
                for r in &results {
                    ctx.rows(method, r, &users, &mut rows);
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleRun {
    pub snr_db: f64,
    pub receiver: Receiver,
    pub architecture: Architecture,
    pub outcome: ScheduleOutcome,
}

#[derive(Debug, Clone)]
pub struct ScheduleReport {
    pub runs: Vec<ScheduleRun>,
    pub results: Vec<ResultRow>,
    pub decisions: Vec<ScheduleRow>,
    pub vr_map: Vec<VrMapRow>,
}

fn greedy(config: &ExperimentConfig, objective: &Objective) -> Result<ScheduleOutcome> {
    let s = config.schedule.expect("caller checked for a schedule section");
    match s.algorithm {
        Algorithm::User => greedy_user_schedule(objective, s.n_u),
        Algorithm::Joint => greedy_joint_schedule(objective, s.n_u, s.bounds().expect("joint has bounds"), s.mode),
    }
}

fn missing_schedule() -> crate::Error {
    crate::Error::config("schedule", "this subcommand needs a [schedule] section")
}

/// Greedy scheduling at every (architecture, receiver, SNR), with the
/// closed-form SE of the scheduled users.
pub fn run_schedule(config: &ExperimentConfig) -> Result<ScheduleReport> {
    let sched = config.schedule.ok_or_else(missing_schedule)?;
    let scenario = config.scenario()?;
    let mut report = ScheduleReport {
        runs: Vec::new(),
        results: Vec::new(),
        decisions: Vec::new(),
        vr_map: vr_map(config, &scenario),
    };
    for &architecture in &config.architectures {
        for &receiver in &config.receivers {
            for &snr_db in &config.snr_db {
                let p = snr_db_to_linear(snr_db);
                let objective = Objective::new(&scenario.stats, &scenario.geometry, receiver, architecture, p, config.seed);
                let outcome = greedy(config, &objective)?;
                let assignment = (sched.algorithm == Algorithm::Joint).then_some(&outcome.subarray_assignment);
                let per_user = objective.per_user(&outcome.scheduled_users, assignment);
                let result = SeResult::deterministic(snr_db, Method::ClosedForm, per_user);
                let ctx = RowContext {
                    config,
                    receiver,
                    architecture,
                    power_mw: power_for(config, architecture, outcome.active_subarrays()),
                };
                ctx.rows(Method::ClosedForm, &result, &outcome.scheduled_users, &mut report.results);
                for (u, profile) in scenario.users.iter().enumerate() {
                    let order = outcome.scheduled_users.iter().position(|&x| x == u);
                    let subarrays = outcome
                        .subarray_assignment
                        .get(&u)
                        .map(|s| s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "))
                        .unwrap_or_default();
                    report.decisions.push(ScheduleRow {
                        experiment: config.experiment.clone(),
                        snr_db,
                        receiver: receiver.label().into(),
                        architecture: architecture.label().into(),
                        user: u + 1,
                        scheduled: order.is_some(),
                        order: order.map_or(0, |o| o + 1),
                        subarrays,
                        vr_start: profile.vr_start,
                        vr_end: profile.vr_start + profile.vr_length,
                    });
                }
                report.runs.push(ScheduleRun {
                    snr_db,
                    receiver,
                    architecture,
                    outcome,
                });
            }
        }
    }
    Ok(report)
}

pub fn vr_map(config: &ExperimentConfig, scenario: &Scenario) -> Vec<VrMapRow> {
    scenario
        .users
        .iter()
        .enumerate()
        .map(|(u, p)| VrMapRow {
            experiment: config.experiment.clone(),
            user: u + 1,
            vr_start: p.vr_start,
            vr_end: p.vr_start + p.vr_length,
            mean_aoa: p.mean_aoa,
            angular_std: p.angular_std,
        })
        .collect()
}

fn user_list(users: &[usize]) -> String {
    users.iter().map(|u| (u + 1).to_string()).collect::<Vec<_>>().join(" ")
}

/// Greedy against exhaustive search at every operating point.
pub fn run_schedule_oracle(config: &ExperimentConfig) -> Result<Vec<ScheduleOracleRow>> {
    let sched = config.schedule.ok_or_else(missing_schedule)?;
    let scenario = config.scenario()?;
    let mut rows = Vec::new();
    for &architecture in &config.architectures {
        for &receiver in &config.receivers {
            for &snr_db in &config.snr_db {
                let p = snr_db_to_linear(snr_db);
                let objective = Objective::new(&scenario.stats, &scenario.geometry, receiver, architecture, p, config.seed);
                let g = greedy(config, &objective)?;
                let best = exhaustive_schedule(&objective, sched.n_u, sched.bounds())?;
                rows.push(ScheduleOracleRow {
                    experiment: config.experiment.clone(),
                    snr_db,
                    receiver: receiver.label().into(),
                    architecture: architecture.label().into(),
                    greedy_se: g.sum_se,
                    oracle_se: best.sum_se,
                    ratio: if best.sum_se > 0.0 { g.sum_se / best.sum_se } else { 1.0 },
                    greedy_users: user_list(&g.scheduled_users),
                    oracle_users: user_list(&best.scheduled_users),
                });
            }
        }
    }
    Ok(rows)
}

/// Closed form against Monte-Carlo for every user and the sum.
pub fn run_se_oracle(config: &ExperimentConfig) -> Result<Vec<SeOracleRow>> {
    let scenario = config.scenario()?;
    let trials = config.trials.max(1);
    let mut rows = Vec::new();
    for &architecture in &config.architectures {
        let combiner = sweep_combiner(architecture, &scenario, config.seed);
        for &receiver in &config.receivers {
            let mc = monte_carlo_se(&scenario.stats, &combiner, receiver, &config.snr_db, trials, config.seed);
            let cf = closed_form_se(&scenario.stats, &combiner, receiver, &config.snr_db);
            for (m, c) in mc.iter().zip(&cf) {
                let entries = m
                    .per_user_se
                    .iter()
                    .zip(&m.per_user_stderr)
                    .zip(&c.per_user_se)
                    .enumerate()
                    .map(|(u, ((&a, &s), &b))| ((u + 1).to_string(), a, s, b))
                    .chain(std::iter::once(("SUM".to_string(), m.sum_se, m.sum_stderr, c.sum_se)));
                for (user, monte_carlo, stderr, closed_form) in entries {
                    rows.push(SeOracleRow {
                        experiment: config.experiment.clone(),
                        snr_db: m.snr_db,
                        receiver: receiver.label().into(),
                        architecture: architecture.label().into(),
                        user,
                        monte_carlo,
                        stderr,
                        closed_form,
                        rel_error: if monte_carlo != 0.0 {
                            (closed_form - monte_carlo).abs() / monte_carlo.abs()
                        } else {
                            (closed_form - monte_carlo).abs()
                        },
                    });
                }
            }
        }
    }
    Ok(rows)
}
