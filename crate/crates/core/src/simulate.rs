//! Pathwise simulation of the two-type system driven by a Lévy environment.
//!
//! Each path runs on a base grid (multiples of the step, environment jump times,
//! requested record times) refined on the fly by branching event times. Over a
//! refined interval `[t, s]` the scheme applies, to every coupled variant:
//!
//! 1. Euler drift, including the compensator of the self-type jump coordinate,
//! 2. square-root diffusion with the argument clamped at zero, states floored at zero,
//! 3. the environment multiplier `exp(Δξ)` over the interval (exact in law),
//! 4. the branching jump at `s` when the interval ends at an event.
//!
//! Branching events are generated from a dominating rate built on the
//! coordinatewise maximum over variants and thinned per variant, so coupled
//! variants see one common event stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branching::BranchingSpec;
use crate::error::{Error, Result};
use crate::levy_env::{base_grid, EnvJumps, LevyEnvSpec, DEFAULT_RATE_CAP};
use crate::measure::{norm, JumpMeasure};
use crate::scenario::ScenarioConfig;

/// Which branching jumps survive.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BranchingRule {
    #[default]
    None,
    /// Keep a jump iff ‖z‖ ≤ k.
    NormCap { k: f64 },
    /// Keep a jump iff z ∈ [0,1]².
    UnitSquare,
}

/// Which environment jumps survive.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvRule {
    #[default]
    None,
    /// Positive jumps above k contribute nothing.
    ClipPositive { k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationPredicate {
    #[serde(default)]
    pub branching_rule: BranchingRule,
    #[serde(default)]
    pub env_rule: EnvRule,
}

impl TruncationPredicate {
    pub fn none() -> Self {
        Self::default()
    }

    /// Branching jumps of norm above `k` removed; `k = ∞` is no truncation.
    pub fn norm_cap(k: f64) -> Self {
        Self {
            branching_rule: if k.is_infinite() {
                BranchingRule::None
            } else {
                BranchingRule::NormCap { k }
            },
            env_rule: EnvRule::None,
        }
    }

    /// The truncated system X^(k): branching norm cap and environment clip at the same level.
    pub fn level(k: f64) -> Self {
        if k.is_infinite() {
            return Self::none();
        }
        Self {
            branching_rule: BranchingRule::NormCap { k },
            env_rule: EnvRule::ClipPositive { k },
        }
    }

    /// Environment clipping only.
    pub fn env_clip(k: f64) -> Self {
        Self {
            branching_rule: BranchingRule::None,
            env_rule: if k.is_infinite() {
                EnvRule::None
            } else {
                EnvRule::ClipPositive { k }
            },
        }
    }

    /// Reference system keeping branching jumps in [0,1]² and clipping environment jumps above 1.
    pub fn unit_square() -> Self {
        Self {
            branching_rule: BranchingRule::UnitSquare,
            env_rule: EnvRule::ClipPositive { k: 1.0 },
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if let BranchingRule::NormCap { k } = self.branching_rule {
            if !(k > 0.0) {
                return Err(Error::spec(format!("{path}.branching_rule.k"), "norm cap must be positive"));
            }
        }
        if let EnvRule::ClipPositive { k } = self.env_rule {
            if !(k >= 1.0) {
                return Err(Error::spec(format!("{path}.env_rule.k"), "environment clip level must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn keeps(&self, z: [f64; 2]) -> bool {
        match self.branching_rule {
            BranchingRule::None => true,
            BranchingRule::NormCap { k } => norm(z) <= k,
            BranchingRule::UnitSquare => z[0] <= 1.0 && z[1] <= 1.0,
        }
    }

    pub fn env_clip_level(&self) -> Option<f64> {
        match self.env_rule {
            EnvRule::None => None,
            EnvRule::ClipPositive { k } => Some(k),
        }
    }

    pub fn restrict_measure(&self, m: &JumpMeasure) -> JumpMeasure {
        match self.branching_rule {
            BranchingRule::None => m.clone(),
            BranchingRule::NormCap { k } => m.restrict_norm(k),
            BranchingRule::UnitSquare => m.restrict_unit_square(),
        }
    }

    /// Branching mechanism seen by the truncated system.
    pub fn restrict_branching(&self, spec: &BranchingSpec) -> BranchingSpec {
        BranchingSpec {
            m1: self.restrict_measure(&spec.m1),
            m2: self.restrict_measure(&spec.m2),
            ..spec.clone()
        }
    }

    /// Environment seen by the truncated system (the tighter of the two clip levels).
    pub fn restrict_env(&self, env: &LevyEnvSpec) -> LevyEnvSpec {
        let k = match (env.trunc_level, self.env_clip_level()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        LevyEnvSpec {
            trunc_level: k,
            ..env.clone()
        }
    }

    /// Whether every jump kept by `self` is also kept by `other` (both rules).
    pub fn at_least_as_restrictive_as(&self, other: &TruncationPredicate) -> bool {
        let branching = match (self.branching_rule, other.branching_rule) {
            (_, BranchingRule::None) => true,
            (BranchingRule::NormCap { k: a }, BranchingRule::NormCap { k: b }) => a <= b,
            (BranchingRule::UnitSquare, BranchingRule::UnitSquare) => true,
            (BranchingRule::UnitSquare, BranchingRule::NormCap { k }) => k >= std::f64::consts::SQRT_2,
            _ => false,
        };
        let env = match (self.env_clip_level(), other.env_clip_level()) {
            (_, None) => true,
            (Some(a), Some(b)) => a <= b,
            (None, Some(_)) => false,
        };
        branching && env
    }
}

/// Origin of a logged jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpSource {
    M1,
    M2,
    Env,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    pub source: JumpSource,
    /// Branching jump `(z1, z2)`; environment jumps store `(z, 0)` after clipping.
    pub z: [f64; 2],
}

/// What to keep from each path.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    /// Every refined grid point plus the jump log.
    Full,
    /// Only the listed times (merged into the base grid).
    At(Vec<f64>),
}

/// A simulated path observed on its record times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatePath {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 2]>,
    /// ξ of this variant at the record times.
    pub xi: Vec<f64>,
    pub jumps: Vec<JumpRecord>,
}

impl StatePath {
    pub fn last(&self) -> [f64; 2] {
        *self.states.last().expect("paths record at least one point")
    }
}

/// Model pieces shared by every variant of a run.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub env: LevyEnvSpec,
    pub branching: BranchingSpec,
    pub x0: [f64; 2],
    pub horizon: f64,
    pub step: f64,
    pub rate_cap: f64,
}

impl SimSetup {
    pub fn from_scenario(s: &ScenarioConfig) -> Self {
        Self {
            env: s.environment.clone(),
            branching: s.branching.clone(),
            x0: s.x0,
            horizon: s.horizon,
            step: s.step,
            rate_cap: s.rate_cap.unwrap_or(DEFAULT_RATE_CAP),
        }
    }
}

struct Variant {
    pred: TruncationPredicate,
    env_clip: Option<f64>,
    comp: [f64; 2],
}

struct Engine<'a> {
    setup: &'a SimSetup,
    variants: Vec<Variant>,
    mass: [f64; 2],
    xi_drift: f64,
    record_times: Option<Vec<f64>>,
}

impl<'a> Engine<'a> {
    fn new(setup: &'a SimSetup, preds: &[TruncationPredicate], record: &Record) -> Result<Self> {
        if !(setup.x0[0] >= 0.0 && setup.x0[1] >= 0.0 && setup.x0.iter().all(|v| v.is_finite())) {
            return Err(Error::spec("x0", "initial state must be finite and nonnegative"));
        }
        base_grid(setup.horizon, setup.step, &[])?;
        let variants = preds
            .iter()
            .map(|p| {
                let b = p.restrict_branching(&setup.branching);
                let env = p.restrict_env(&setup.env);
                Variant {
                    pred: *p,
                    env_clip: env.trunc_level,
                    // self-type coordinates are compensated over the kept jumps
                    comp: [b.m1.moment(1, 0), b.m2.moment(0, 1)],
                }
            })
            .collect::<Vec<_>>();
        for v in &variants {
            if !v.comp.iter().all(|c| c.is_finite()) {
                return Err(Error::DivergentCrossMoment { which: "compensator" });
            }
        }
        let record_times = match record {
            Record::Full => None,
            Record::At(ts) => {
                let mut ts = ts.clone();
                ts.sort_by(f64::total_cmp);
                ts.dedup();
                if ts.iter().any(|&t| !(t >= 0.0 && t <= setup.horizon)) {
                    return Err(Error::spec("report_times", "record times must lie in [0, horizon]"));
                }
                Some(ts)
            }
        };
        Ok(Self {
            setup,
            variants,
            mass: [setup.branching.m1.total_mass(), setup.branching.m2.total_mass()],
            xi_drift: setup.env.jump_free_drift()?,
            record_times,
        })
    }

    fn run<R: Rng>(&self, rng: &mut R) -> Result<Vec<StatePath>> {
        let s = self.setup;
        let nv = self.variants.len();
        let env_jumps = EnvJumps::sample(&s.env, s.horizon, s.rate_cap, rng)?;
        let mut extra = env_jumps.times.clone();
        if let Some(ts) = &self.record_times {
            extra.extend(ts.iter().copied());
        }
        let grid = base_grid(s.horizon, s.step, &extra)?;
        let tol = 1e-12 * s.horizon;

        let mut x = vec![s.x0; nv];
        let mut frozen = x.clone();
        let mut xi = vec![0.0; nv];
        let mut out: Vec<StatePath> = (0..nv).map(|_| StatePath::default()).collect();
        let full = self.record_times.is_none();
        let mut next_record = 0usize;
        let record = |out: &mut Vec<StatePath>, t: f64, x: &[[f64; 2]], xi: &[f64], next: &mut usize| {
            let wanted = match &self.record_times {
                None => true,
                Some(ts) => {
                    let mut hit = false;
                    while *next < ts.len() && ts[*next] <= t + tol {
                        hit |= (ts[*next] - t).abs() <= tol;
                        *next += 1;
                    }
                    hit
                }
            };
            if wanted {
                for (v, p) in out.iter_mut().enumerate() {
                    p.times.push(t);
                    p.states.push(x[v]);
                    p.xi.push(xi[v]);
                }
            }
        };
        record(&mut out, 0.0, &x, &xi, &mut next_record);

        let b = &s.branching.b;
        let (c1, c2) = (s.branching.c1, s.branching.c2);
        let sigma = s.env.sigma1;
        let mut next_env = 0usize;

        for w in grid.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let mut t = t0;
            loop {
                let mut xmax = [0.0f64; 2];
                for st in &x {
                    xmax[0] = xmax[0].max(st[0]);
                    xmax[1] = xmax[1].max(st[1]);
                }
                let lam = [xmax[0] * self.mass[0], xmax[1] * self.mass[1]];
                let lam_total = lam[0] + lam[1];
                if lam_total > s.rate_cap {
                    return Err(Error::MassOverflow {
                        expected: lam_total * s.horizon,
                        cap: s.rate_cap * s.horizon,
                    });
                }
                let mut end = t1;
                let mut event = false;
                if lam_total > 0.0 {
                    let e: f64 = Exp1.sample(rng);
                    let cand = t + e / lam_total;
                    if cand < t1 - tol {
                        end = cand;
                        event = true;
                    }
                }
                let h = end - t;
                let sqrt_h = h.sqrt();
                let dw_env = if sigma > 0.0 {
                    let g: f64 = StandardNormal.sample(rng);
                    sigma * sqrt_h * g
                } else {
                    0.0
                };
                let db1 = if c1 > 0.0 {
                    let g: f64 = StandardNormal.sample(rng);
                    sqrt_h * g
                } else {
                    0.0
                };
                let db2 = if c2 > 0.0 {
                    let g: f64 = StandardNormal.sample(rng);
                    sqrt_h * g
                } else {
                    0.0
                };
                if event {
                    frozen.copy_from_slice(&x);
                }
                // environment jump at the right end of a base interval
                let mut env_jump_raw = None;
                if !event {
                    while next_env < env_jumps.times.len() && env_jumps.times[next_env] <= t1 + tol {
                        let z = env_jumps.sizes[next_env];
                        env_jump_raw = Some(env_jump_raw.unwrap_or(0.0) + z);
                        next_env += 1;
                    }
                }
                for (v, var) in self.variants.iter().enumerate() {
                    let [x1, x2] = x[v];
                    let drift1 = -(b[0][0] + var.comp[0]) * x1 - b[1][0] * x2;
                    let drift2 = -b[0][1] * x1 - (b[1][1] + var.comp[1]) * x2;
                    let mut y1 = x1 + drift1 * h;
                    let mut y2 = x2 + drift2 * h;
                    if c1 > 0.0 {
                        y1 += (2.0 * c1 * x1.max(0.0)).sqrt() * db1;
                    }
                    if c2 > 0.0 {
                        y2 += (2.0 * c2 * x2.max(0.0)).sqrt() * db2;
                    }
                    let mut dxi = self.xi_drift * h + dw_env;
                    if let Some(z) = env_jump_raw {
                        let eff = match var.env_clip {
                            Some(k) if z > k => 0.0,
                            _ => z,
                        };
                        dxi += eff;
                        if full && eff != 0.0 {
                            out[v].jumps.push(JumpRecord {
                                time: t1,
                                source: JumpSource::Env,
                                z: [eff, 0.0],
                            });
                        }
                    }
                    let mult = dxi.exp();
                    x[v] = [y1.max(0.0) * mult, y2.max(0.0) * mult];
                    xi[v] += dxi;
                }
                if event {
                    let pick: f64 = rng.random();
                    let (idx, measure, source) = if pick * lam_total < lam[0] {
                        (0, &s.branching.m1, JumpSource::M1)
                    } else {
                        (1, &s.branching.m2, JumpSource::M2)
                    };
                    let accept: f64 = rng.random();
                    let z = measure.sample(rng, self.mass[idx]);
                    for (v, var) in self.variants.iter().enumerate() {
                        if accept * xmax[idx] < frozen[v][idx] && var.pred.keeps(z) {
                            x[v][0] += z[0];
                            x[v][1] += z[1];
                            if full {
                                out[v].jumps.push(JumpRecord { time: end, source, z });
                            }
                        }
                    }
                }
                for st in &x {
                    if !(st[0] >= 0.0 && st[1] >= 0.0) {
                        return Err(Error::NegativeState {
                            t: end,
                            value: st[0].min(st[1]),
                        });
                    }
                }
                t = end;
                if full && event {
                    record(&mut out, t, &x, &xi, &mut next_record);
                }
                if !event {
                    break;
                }
            }
            record(&mut out, t1, &x, &xi, &mut next_record);
        }
        Ok(out)
    }
}

/// Deterministic per-path generator: ChaCha8 seeded by `seed`, stream = path index.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Simulates coupled variants of one path; one [`StatePath`] per predicate.
pub fn simulate_variants(
    setup: &SimSetup,
    preds: &[TruncationPredicate],
    record: &Record,
    seed: u64,
    path_index: u64,
) -> Result<Vec<StatePath>> {
    let engine = Engine::new(setup, preds, record)?;
    engine.run(&mut path_rng(seed, path_index))
}

fn run_many(
    setup: &SimSetup,
    preds: &[TruncationPredicate],
    record: &Record,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<StatePath>>> {
    if n_paths == 0 {
        return Err(Error::spec("n_paths", "need at least one path"));
    }
    let engine = Engine::new(setup, preds, record)?;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| engine.run(&mut path_rng(seed, i)))
        .collect()
}

/// Independent paths of the scenario under its own truncation predicate.
pub fn simulate_paths(scenario: &ScenarioConfig, n_paths: usize, rng_seed: u64, record: &Record) -> Result<Vec<StatePath>> {
    simulate_setup(&SimSetup::from_scenario(scenario), scenario.truncation, n_paths, rng_seed, record)
}

pub fn simulate_setup(
    setup: &SimSetup,
    pred: TruncationPredicate,
    n_paths: usize,
    rng_seed: u64,
    record: &Record,
) -> Result<Vec<StatePath>> {
    Ok(run_many(setup, &[pred], record, n_paths, rng_seed)?
        .into_iter()
        .map(|mut v| v.pop().expect("one variant"))
        .collect())
}

/// Pairs of paths sharing every random draw, differing only in truncation.
pub fn simulate_coupled_pair(
    scenario: &ScenarioConfig,
    pred_a: TruncationPredicate,
    pred_b: TruncationPredicate,
    n_paths: usize,
    rng_seed: u64,
    record: &Record,
) -> Result<Vec<(StatePath, StatePath)>> {
    coupled_setup(&SimSetup::from_scenario(scenario), pred_a, pred_b, n_paths, rng_seed, record)
}

pub fn coupled_setup(
    setup: &SimSetup,
    pred_a: TruncationPredicate,
    pred_b: TruncationPredicate,
    n_paths: usize,
    rng_seed: u64,
    record: &Record,
) -> Result<Vec<(StatePath, StatePath)>> {
    Ok(run_many(setup, &[pred_a, pred_b], record, n_paths, rng_seed)?
        .into_iter()
        .map(|mut v| {
            let b = v.pop().expect("two variants");
            let a = v.pop().expect("two variants");
            (a, b)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Axis, EnvComponent, JumpMeasure1D};

    fn setup(env: LevyEnvSpec, branching: BranchingSpec, x0: [f64; 2], horizon: f64, step: f64) -> SimSetup {
        SimSetup {
            env,
            branching,
            x0,
            horizon,
            step,
            rate_cap: DEFAULT_RATE_CAP,
        }
    }

    #[test]
    fn linear_ode_limit() {
        let s = setup(
            LevyEnvSpec::deterministic(0.0),
            BranchingSpec::linear([[1.0, 0.0], [0.0, 1.0]]),
            [2.0, 3.0],
            1.0,
            1e-4,
        );
        let paths = simulate_setup(&s, TruncationPredicate::none(), 1, 0, &Record::At(vec![1.0])).unwrap();
        let x = paths[0].last();
        let e = (-1f64).exp();
        assert!((x[0] / (2.0 * e) - 1.0).abs() < 1e-3);
        assert!((x[1] / (3.0 * e) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn environment_factorizes_without_branching() {
        let nu = JumpMeasure1D::new(vec![
            EnvComponent::Atom { mass: 1.5, z: -0.4 },
            EnvComponent::Atom { mass: 0.8, z: 1.7 },
        ])
        .unwrap();
        let env = LevyEnvSpec::new(0.2, 0.5, nu).unwrap();
        let s = setup(env, BranchingSpec::default(), [1.5, 0.25], 2.0, 0.01);
        for i in 0..20 {
            let path = &simulate_variants(&s, &[TruncationPredicate::none()], &Record::Full, 5, i).unwrap()[0];
            for (st, xi) in path.states.iter().zip(&path.xi) {
                assert!(((st[0] / 1.5).ln() - xi).abs() < 1e-11);
                assert!(((st[1] / 0.25).ln() - xi).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn nonnegative_and_zero_absorbing() {
        let env = LevyEnvSpec::new(-0.5, 0.8, JumpMeasure1D::atom(1.0, -0.9)).unwrap();
        let br = BranchingSpec {
            b: [[3.0, 0.0], [0.0, 3.0]],
            c1: 2.0,
            c2: 2.0,
            m1: JumpMeasure::empty(),
            m2: JumpMeasure::empty(),
        };
        let s = setup(env, br, [0.3, 0.2], 3.0, 0.05);
        let mut absorbed = 0;
        for i in 0..50 {
            let path = &simulate_variants(&s, &[TruncationPredicate::none()], &Record::Full, 9, i).unwrap()[0];
            let mut dead = false;
            for st in &path.states {
                assert!(st[0] >= 0.0 && st[1] >= 0.0);
                if dead {
                    assert_eq!(*st, [0.0, 0.0]);
                }
                if *st == [0.0, 0.0] {
                    dead = true;
                }
            }
            absorbed += dead as usize;
        }
        assert!(absorbed > 0, "strong negative drift should kill some paths");
    }

    #[test]
    fn identical_predicates_give_identical_paths() {
        let env = LevyEnvSpec::new(0.1, 0.3, JumpMeasure1D::atom(0.5, 1.4)).unwrap();
        let br = BranchingSpec {
            b: [[0.5, -0.2], [-0.3, 0.4]],
            c1: 0.5,
            c2: 0.2,
            m1: JumpMeasure::atom(1.0, [0.4, 0.3]).with(JumpMeasure::pareto(0.2, 2.5, 1.0, Axis::First, 0.0)),
            m2: JumpMeasure::atom(0.7, [0.1, 2.5]),
        };
        let s = setup(env, br, [1.0, 1.0], 1.0, 0.01);
        let p = TruncationPredicate::level(3.0);
        for i in 0..10 {
            let v = simulate_variants(&s, &[p, p], &Record::Full, 1, i).unwrap();
            assert_eq!(v[0], v[1]);
        }
    }

    #[test]
    fn single_variant_matches_first_of_duplicated_pair() {
        // the dominating rate equals the own rate, so the event stream is the same
        let br = BranchingSpec {
            m1: JumpMeasure::atom(1.0, [0.4, 0.3]),
            m2: JumpMeasure::atom(0.7, [0.1, 0.5]),
            ..BranchingSpec::default()
        };
        let s = setup(LevyEnvSpec::deterministic(0.1), br, [1.0, 1.0], 1.0, 0.1);
        let p = TruncationPredicate::none();
        let one = simulate_variants(&s, &[p], &Record::Full, 4, 2).unwrap();
        let two = simulate_variants(&s, &[p, p], &Record::Full, 4, 2).unwrap();
        assert_eq!(one[0], two[0]);
    }

    #[test]
    fn record_at_selected_times() {
        let s = setup(LevyEnvSpec::deterministic(0.3), BranchingSpec::default(), [1.0, 2.0], 1.0, 0.1);
        let paths = simulate_setup(&s, TruncationPredicate::none(), 3, 0, &Record::At(vec![0.0, 0.25, 1.0])).unwrap();
        for p in &paths {
            assert_eq!(p.times, vec![0.0, 0.25, 1.0]);
            assert!((p.states[1][0] - (0.3f64 * 0.25).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn restrictiveness_order() {
        let a = TruncationPredicate::norm_cap(2.0);
        let b = TruncationPredicate::norm_cap(5.0);
        assert!(a.at_least_as_restrictive_as(&b));
        assert!(!b.at_least_as_restrictive_as(&a));
        assert!(a.at_least_as_restrictive_as(&TruncationPredicate::none()));
        assert_eq!(TruncationPredicate::norm_cap(f64::INFINITY), TruncationPredicate::none());
        assert!(TruncationPredicate::unit_square().at_least_as_restrictive_as(&TruncationPredicate::level(2.0)));
    }

    #[test]
    fn rate_cap_fails_fast() {
        let br = BranchingSpec {
            m1: JumpMeasure::atom(1e4, [0.1, 0.0]),
            ..BranchingSpec::default()
        };
        let mut s = setup(LevyEnvSpec::deterministic(0.0), br, [10.0, 0.0], 1.0, 0.1);
        s.rate_cap = 1e3;
        let err = simulate_setup(&s, TruncationPredicate::none(), 1, 0, &Record::Full).unwrap_err();
        assert!(matches!(err, Error::MassOverflow { .. }));
    }
}
