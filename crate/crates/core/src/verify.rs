//! Monte Carlo checks of simulated paths against exact theory.
//!
//! Paths are generated in parallel but collected in index order and reduced
//! sequentially with compensated sums, so reports are bit-identical for a given
//! seed regardless of the worker count.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::Result;
use crate::measure::norm;
use crate::moments::{martingale_transform, moment_table};
use crate::scenario::ScenarioConfig;
use crate::simulate::{simulate_setup, simulate_variants, Record, SimSetup, TruncationPredicate};
use crate::stats::MeanEstimator;

pub const CSV_HEADER: &str = "t,statistic,estimate,se,target,z,pass";

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub t: f64,
    pub statistic: String,
    pub estimate: f64,
    pub se: f64,
    pub target: f64,
    pub z: f64,
    pub pass: bool,
}

impl EstimateRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.t, self.statistic, self.estimate, self.se, self.target, self.z, self.pass
        )
    }
}

/// Acceptance rule: |estimate − target| ≤ m·SE + C·step·|target|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub se_multiple: f64,
    pub euler_c: f64,
    pub step: f64,
}

impl Tolerance {
    pub fn from_scenario(s: &ScenarioConfig) -> Self {
        Self {
            se_multiple: s.verify.se_multiple,
            euler_c: s.verify.euler_c,
            step: s.step,
        }
    }

    /// The reported z is the part of the discrepancy beyond the Euler allowance,
    /// in SE units, so `pass` ⇔ |z| ≤ m.
    pub fn row(&self, t: f64, statistic: impl Into<String>, est: &MeanEstimator, target: f64) -> EstimateRow {
        let (mean, se) = (est.mean(), est.std_error());
        let diff = mean - target;
        let allowance = self.euler_c * self.step * target.abs();
        let excess = (diff.abs() - allowance).max(0.0);
        let z = if excess == 0.0 {
            0.0
        } else if se > 0.0 {
            diff.signum() * excess / se
        } else {
            diff.signum() * f64::INFINITY
        };
        EstimateRow {
            t,
            statistic: statistic.into(),
            estimate: mean,
            se,
            target,
            z,
            pass: z.abs() <= self.se_multiple,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub statistic: String,
    pub rows: Vec<EstimateRow>,
    /// False when the moments of twice the order are infinite, so SEs mean little.
    pub variance_reliable: bool,
}

impl EstimateReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// CSV text with header for any collection of rows.
pub fn rows_to_csv<'a>(rows: impl IntoIterator<Item = &'a EstimateRow>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_line());
    }
    out
}

fn sorted_times(mut ts: Vec<f64>) -> Vec<f64> {
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// Sample means of X₁^p X₂^q (1 ≤ p+q ≤ n) at the report times against the moment closure.
pub fn estimate_moments(scenario: &ScenarioConfig, n: u32, paths: usize, seed: u64) -> Result<EstimateReport> {
    let pred = scenario.truncation;
    let env = pred.restrict_env(&scenario.environment);
    let branching = pred.restrict_branching(&scenario.branching);
    let times = scenario.times();
    let table = moment_table(&env, &branching, scenario.x0, n, &times)?;
    let variance_reliable = moment_table(&env, &branching, scenario.x0, 2 * n, &[0.0])?.finite.iter().all(|&f| f);

    let setup = SimSetup::from_scenario(scenario);
    let sims = simulate_setup(&setup, pred, paths, seed, &Record::At(times.clone()))?;
    let tol = Tolerance::from_scenario(scenario);
    let mut rows = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        for (i, &(p, q)) in table.basis.iter().enumerate() {
            if !table.finite[i] {
                continue;
            }
            let est: MeanEstimator = sims
                .iter()
                .map(|s| s.states[k][0].powi(p as i32) * s.states[k][1].powi(q as i32))
                .collect();
            rows.push(tol.row(t, format!("m_{p}_{q}"), &est, table.values[k][i]));
        }
    }
    Ok(EstimateReport {
        statistic: format!("moments_n{n}"),
        rows,
        variance_reliable,
    })
}

/// Tests E Mᵢ(t) = Mᵢ(0) = x₀ᵢ at each time of `t_grid`.
pub fn martingale_test(scenario: &ScenarioConfig, t_grid: &[f64], paths: usize, seed: u64) -> Result<EstimateReport> {
    let pred = scenario.truncation;
    let env = pred.restrict_env(&scenario.environment);
    let branching = pred.restrict_branching(&scenario.branching);
    let times = sorted_times(t_grid.to_vec());
    let setup = SimSetup::from_scenario(scenario);
    let sims = simulate_setup(&setup, pred, paths, seed, &Record::At(times.clone()))?;
    let transformed = sims
        .iter()
        .map(|p| martingale_transform(&env, &branching, p))
        .collect::<Result<Vec<_>>>()?;
    let tol = Tolerance::from_scenario(scenario);
    let mut rows = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        for c in 0..2 {
            let est: MeanEstimator = transformed.iter().map(|m| m[k][c]).collect();
            rows.push(tol.row(t, format!("M{}", c + 1), &est, scenario.x0[c]));
        }
    }
    Ok(EstimateReport {
        statistic: "martingale".into(),
        rows,
        variance_reliable: true,
    })
}

/// Ordering statistics for the coupled pair (X^(k1), X^(k2)).
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub k1: f64,
    pub k2: f64,
    pub t: f64,
    /// No diffusion: the ordering must hold exactly at every grid point.
    pub pure_jump: bool,
    pub paths: usize,
    pub grid_points: u64,
    pub violations: u64,
    pub max_excess: f64,
    /// E[X^(k1)(T) − X^(k2)(T)] per coordinate and its SE.
    pub mean_gap: [f64; 2],
    pub gap_se: [f64; 2],
    pub se_multiple: f64,
}

/// Coordinates of X^(k1) may exceed X^(k2) by at most this much.
pub const ORDERING_TOLERANCE: f64 = 1e-12;

impl CouplingReport {
    pub fn passed(&self) -> bool {
        if self.pure_jump {
            self.violations == 0
        } else {
            (0..2).all(|c| self.mean_gap[c] <= self.se_multiple * self.gap_se[c])
        }
    }

    pub fn rows(&self) -> Vec<EstimateRow> {
        let mut rows = vec![EstimateRow {
            t: self.t,
            statistic: "coupling_violations".into(),
            estimate: self.violations as f64,
            se: 0.0,
            target: 0.0,
            z: if self.violations == 0 { 0.0 } else { f64::INFINITY },
            pass: !self.pure_jump || self.violations == 0,
        }];
        for c in 0..2 {
            let z = if self.gap_se[c] > 0.0 {
                self.mean_gap[c] / self.gap_se[c]
            } else if self.mean_gap[c] > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            rows.push(EstimateRow {
                t: self.t,
                statistic: format!("coupling_gap{}", c + 1),
                estimate: self.mean_gap[c],
                se: self.gap_se[c],
                target: 0.0,
                z,
                pass: z <= self.se_multiple,
            });
        }
        rows
    }
}

pub fn coupling_monotonicity_report(scenario: &ScenarioConfig, k1: f64, k2: f64, paths: usize, seed: u64) -> Result<CouplingReport> {
    let setup = SimSetup::from_scenario(scenario);
    let preds = [TruncationPredicate::level(k1), TruncationPredicate::level(k2)];
    let per_path = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let v = simulate_variants(&setup, &preds, &Record::Full, seed, i)?;
            let (a, b) = (&v[0], &v[1]);
            let mut violations = 0u64;
            let mut max_excess = 0.0f64;
            for (xa, xb) in a.states.iter().zip(&b.states) {
                let excess = (xa[0] - xb[0]).max(xa[1] - xb[1]);
                max_excess = max_excess.max(excess);
                if excess > ORDERING_TOLERANCE {
                    violations += 1;
                }
            }
            let (la, lb) = (a.last(), b.last());
            Ok((a.states.len() as u64, violations, max_excess, [la[0] - lb[0], la[1] - lb[1]]))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut gaps = [MeanEstimator::default(), MeanEstimator::default()];
    let (mut grid_points, mut violations, mut max_excess) = (0, 0, 0.0f64);
    for (n, v, m, g) in per_path {
        grid_points += n;
        violations += v;
        max_excess = max_excess.max(m);
        gaps[0].push(g[0]);
        gaps[1].push(g[1]);
    }
    Ok(CouplingReport {
        k1,
        k2,
        t: scenario.horizon,
        pure_jump: scenario.branching.c1 == 0.0 && scenario.branching.c2 == 0.0,
        paths,
        grid_points,
        violations,
        max_excess,
        mean_gap: [gaps[0].mean(), gaps[1].mean()],
        gap_se: [gaps[0].std_error(), gaps[1].std_error()],
        se_multiple: scenario.verify.se_multiple,
    })
}

/// E‖X(T) − X^(k)(T)‖ along increasing truncation levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub t: f64,
    pub ks: Vec<f64>,
    pub gaps: Vec<f64>,
    pub ses: Vec<f64>,
    /// Per consecutive pair: mean and SE of the paired difference gap(k_{i+1}) − gap(k_i).
    pub steps: Vec<(f64, f64)>,
    /// ‖E X(T)‖ of the untruncated process (sample estimate).
    pub mean_norm: f64,
    pub epsilon: f64,
    /// Multiple of the SE allowed for increases between consecutive levels.
    pub step_se_multiple: f64,
}

impl ConvergenceReport {
    pub fn nonincreasing(&self) -> bool {
        self.steps.iter().all(|&(d, se)| d <= self.step_se_multiple * se)
    }

    pub fn final_ratio(&self) -> f64 {
        self.gaps.last().copied().unwrap_or(0.0) / self.mean_norm
    }

    pub fn passed(&self) -> bool {
        self.nonincreasing() && self.final_ratio() < self.epsilon
    }

    pub fn rows(&self) -> Vec<EstimateRow> {
        let mut rows = Vec::new();
        for (i, (&k, (&g, &se))) in self.ks.iter().zip(self.gaps.iter().zip(&self.ses)).enumerate() {
            let (step_ok, z) = if i == 0 {
                (true, 0.0)
            } else {
                let (d, s) = self.steps[i - 1];
                let z = if s > 0.0 { d / s } else if d > 0.0 { f64::INFINITY } else { 0.0 };
                (z <= self.step_se_multiple, z)
            };
            rows.push(EstimateRow {
                t: self.t,
                statistic: format!("truncation_gap_k{k}"),
                estimate: g,
                se,
                target: 0.0,
                z,
                pass: step_ok,
            });
        }
        let ratio = self.final_ratio();
        rows.push(EstimateRow {
            t: self.t,
            statistic: "truncation_final_ratio".into(),
            estimate: ratio,
            se: 0.0,
            target: self.epsilon,
            z: 0.0,
            pass: ratio < self.epsilon,
        });
        rows
    }
}

pub fn truncation_convergence_report(scenario: &ScenarioConfig, k_list: &[f64], paths: usize, seed: u64) -> Result<ConvergenceReport> {
    let setup = SimSetup::from_scenario(scenario);
    let mut preds = vec![TruncationPredicate::none()];
    preds.extend(k_list.iter().map(|&k| TruncationPredicate::level(k)));
    let record = Record::At(vec![scenario.horizon]);
    let finals = (0..paths as u64)
        .into_par_iter()
        .map(|i| Ok(simulate_variants(&setup, &preds, &record, seed, i)?.iter().map(|p| p.last()).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;

    let gap = |x: &[[f64; 2]], j: usize| norm([x[0][0] - x[j + 1][0], x[0][1] - x[j + 1][1]]);
    let mut gaps = Vec::new();
    let mut ses = Vec::new();
    for j in 0..k_list.len() {
        let est: MeanEstimator = finals.iter().map(|x| gap(x, j)).collect();
        gaps.push(est.mean());
        ses.push(est.std_error());
    }
    let steps = (1..k_list.len())
        .map(|j| {
            let est: MeanEstimator = finals.iter().map(|x| gap(x, j) - gap(x, j - 1)).collect();
            (est.mean(), est.std_error())
        })
        .collect();
    let m1: MeanEstimator = finals.iter().map(|x| x[0][0]).collect();
    let m2: MeanEstimator = finals.iter().map(|x| x[0][1]).collect();
    Ok(ConvergenceReport {
        t: scenario.horizon,
        ks: k_list.to_vec(),
        gaps,
        ses,
        steps,
        mean_norm: norm([m1.mean(), m2.mean()]),
        epsilon: scenario.verify.epsilon,
        step_se_multiple: 2.0,
    })
}

/// Everything the scenario's verify block asks for.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub moments: EstimateReport,
    pub martingale: EstimateReport,
    pub coupling: Option<CouplingReport>,
    pub convergence: Option<ConvergenceReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.moments.passed()
            && self.martingale.passed()
            && self.coupling.as_ref().is_none_or(|c| c.passed())
            && self.convergence.as_ref().is_none_or(|c| c.passed())
    }

    pub fn rows(&self) -> Vec<EstimateRow> {
        let mut rows = self.moments.rows.clone();
        rows.extend(self.martingale.rows.iter().cloned());
        if let Some(c) = &self.coupling {
            rows.extend(c.rows());
        }
        if let Some(c) = &self.convergence {
            rows.extend(c.rows());
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows())
    }
}

pub fn run_verify_suite(scenario: &ScenarioConfig, paths: usize, seed: u64) -> Result<SuiteReport> {
    let moments = estimate_moments(scenario, scenario.verify.moment_degree, paths, seed)?;
    let mut grid = scenario.times();
    grid.insert(0, 0.0);
    let martingale = martingale_test(scenario, &grid, paths, seed)?;
    let coupling = scenario
        .verify
        .coupling
        .map(|c| coupling_monotonicity_report(scenario, c.k1, c.k2, paths, seed))
        .transpose()?;
    let convergence = if scenario.verify.k_list.is_empty() {
        None
    } else {
        Some(truncation_convergence_report(scenario, &scenario.verify.k_list, paths, seed)?)
    };
    Ok(SuiteReport {
        moments,
        martingale,
        coupling,
        convergence,
    })
}
