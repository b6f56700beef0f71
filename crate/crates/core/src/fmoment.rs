//! Finiteness of f-moments E f(‖X(t)‖): Condition B checks and the exact
//! tail-integral dichotomy for the parametric jump families.

use serde::{Deserialize, Serialize};

use crate::branching::BranchingSpec;
use crate::error::{Error, Result};
use crate::levy_env::LevyEnvSpec;
use crate::measure::{BranchComponent, EnvComponent, Side, TailFamily};

/// Test-function descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MomentTestFunction {
    /// (1+x)^p
    Power { p: f64 },
    /// (1+x)^p · log(e+x)
    PowerLog { p: f64 },
    /// exp(θ·x^γ), γ ∈ (0, 1]
    ExpPower { theta: f64, gamma: f64 },
    /// Constant c; only useful as a negative control for Condition B.
    Constant { value: f64 },
}

impl MomentTestFunction {
    pub fn validate(&self, path: &str) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::spec(format!("{path}.{field}"), msg));
        match *self {
            MomentTestFunction::Power { p } | MomentTestFunction::PowerLog { p } => {
                if !(p.is_finite() && p > 0.0) {
                    return bad("p", "exponent must be positive and finite");
                }
            }
            MomentTestFunction::ExpPower { theta, gamma } => {
                if !(theta.is_finite() && theta > 0.0) {
                    return bad("theta", "theta must be positive and finite");
                }
                if !(gamma > 0.0 && gamma <= 1.0) {
                    return bad("gamma", "gamma must lie in (0, 1]");
                }
            }
            MomentTestFunction::Constant { value } => {
                if !(value.is_finite() && value > 0.0) {
                    return bad("value", "constant must be positive and finite");
                }
            }
        }
        Ok(())
    }

    /// log f(x), finite for every x ≥ 0.
    pub fn ln_eval(&self, x: f64) -> f64 {
        match *self {
            MomentTestFunction::Power { p } => p * x.ln_1p(),
            MomentTestFunction::PowerLog { p } => p * x.ln_1p() + (std::f64::consts::E + x).ln().ln(),
            MomentTestFunction::ExpPower { theta, gamma } => theta * x.powf(gamma),
            MomentTestFunction::Constant { value } => value.ln(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.ln_eval(x).exp()
    }

    /// Infimum ρ with f(x) = O(x^ρ); ∞ for exp-power.
    pub fn growth_exponent(&self) -> f64 {
        match *self {
            MomentTestFunction::Power { p } | MomentTestFunction::PowerLog { p } => p,
            MomentTestFunction::ExpPower { .. } => f64::INFINITY,
            MomentTestFunction::Constant { .. } => 0.0,
        }
    }

    /// Submultiplicativity constant known analytically for the family, if any.
    pub fn family_k(&self) -> Option<f64> {
        match *self {
            // (1+xy) ≤ (1+x)(1+y); log(e+xy) ≤ log(e+x) + log(e+y) ≤ 2·log(e+x)·log(e+y)
            MomentTestFunction::Power { .. } | MomentTestFunction::PowerLog { .. } => Some(2.0),
            MomentTestFunction::Constant { value } => Some(1f64.max(1.0 / value)),
            MomentTestFunction::ExpPower { .. } => None,
        }
    }
}

/// Which part of Condition B failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionBPart {
    Convexity,
    Monotonicity,
    LowerBound,
    Submultiplicativity,
}

/// Grid points exhibiting a violation: `(x, y, z)` where the meaning depends on the part
/// (convexity: endpoints and midpoint; monotonicity: x < y with f(x) > f(y);
/// lower bound: x; submultiplicativity: x, y, xy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub part: ConditionBPart,
    pub points: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionBReport {
    pub pass: bool,
    /// Constant used (family constant, or the searched one).
    pub k: f64,
    pub witness: Option<Witness>,
}

/// Largest K accepted by the search for families without a stored constant.
pub const MAX_SEARCHED_K: f64 = 1e6;

fn check_grid(x_max: f64) -> Vec<f64> {
    let n = 240;
    let lo: f64 = 1e-4;
    let ratio = (x_max / lo).powf(1.0 / (n - 1) as f64);
    std::iter::once(0.0).chain((0..n).map(|i| lo * ratio.powi(i))).collect()
}

/// ln(eᵃ + eᵇ)
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Grid-based Condition B check on [0, x_max]: convexity, monotonicity, f ≥ 1 and
/// f(xy) ≤ K f(x) f(y). All comparisons run in log space so fast-growing families
/// do not overflow.
pub fn condition_b_check(f: &MomentTestFunction, x_max: f64) -> ConditionBReport {
    let grid = check_grid(x_max);
    let lf: Vec<f64> = grid.iter().map(|&x| f.ln_eval(x)).collect();
    let slack = 1e-12;
    let fail = |part, points, k| ConditionBReport {
        pass: false,
        k,
        witness: Some(Witness { part, points }),
    };
    let k_family = f.family_k();
    let k_report = k_family.unwrap_or(f64::NAN);

    if lf[0] < -slack {
        return fail(ConditionBPart::LowerBound, [0.0, 0.0, 0.0], k_report);
    }
    for (i, w) in lf.windows(2).enumerate() {
        if w[1] < w[0] - slack * w[0].abs().max(1.0) {
            return fail(ConditionBPart::Monotonicity, [grid[i], grid[i + 1], 0.0], k_report);
        }
    }
    for (i, &l) in lf.iter().enumerate() {
        if l < -slack {
            return fail(ConditionBPart::LowerBound, [grid[i], 0.0, 0.0], k_report);
        }
    }
    for gap in [1usize, 2, 4, 8] {
        for i in 0..grid.len().saturating_sub(gap) {
            let (x, y) = (grid[i], grid[i + gap]);
            let m = 0.5 * (x + y);
            let lhs = f.ln_eval(m);
            let rhs = log_add(lf[i], lf[i + gap]) - std::f64::consts::LN_2;
            if lhs > rhs + slack * rhs.abs().max(1.0) {
                return fail(ConditionBPart::Convexity, [x, y, m], k_report);
            }
        }
    }
    let mut worst = f64::NEG_INFINITY;
    let mut worst_pair = [0.0; 3];
    for (i, &x) in grid.iter().enumerate() {
        for (j, &y) in grid.iter().enumerate().skip(i) {
            let xy = x * y;
            if xy > x_max {
                break;
            }
            let excess = f.ln_eval(xy) - lf[i] - lf[j];
            if excess > worst {
                worst = excess;
                worst_pair = [x, y, xy];
            }
        }
    }
    let limit = k_family.unwrap_or(MAX_SEARCHED_K);
    let k_used = k_family.unwrap_or_else(|| worst.exp().max(1.0));
    if worst > limit.ln() + slack {
        return fail(ConditionBPart::Submultiplicativity, worst_pair, k_used);
    }
    ConditionBReport {
        pass: true,
        k: k_used,
        witness: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Finiteness {
    Finite,
    Infinite,
    Unknown,
}

impl Finiteness {
    /// Conjunction: any Infinite wins, then any Unknown.
    pub fn and(self, other: Finiteness) -> Finiteness {
        use Finiteness::*;
        match (self, other) {
            (Infinite, _) | (_, Infinite) => Infinite,
            (Unknown, _) | (_, Unknown) => Unknown,
            _ => Finite,
        }
    }
}

/// Integral to classify.
#[derive(Debug, Clone, Copy)]
pub enum TailTarget<'a> {
    /// ∫_{‖z‖≥1} f(‖z‖)(m₁+m₂)(dz)
    Branching(&'a BranchingSpec),
    /// ∫_{z>1} f(eᶻ) ν(dz)
    Environment(&'a LevyEnvSpec),
}

/// Unbounded tail decay shapes that the classifier compares against.
#[derive(Debug, Clone, Copy)]
enum Decay {
    /// density ~ x^{-α-1}
    Polynomial(f64),
    /// density ~ e^{-r x}
    Exponential(f64),
}

/// f(x) against a tail in x.
fn compare_direct(f: &MomentTestFunction, decay: Decay) -> Finiteness {
    use Finiteness::*;
    match (*f, decay) {
        (MomentTestFunction::Constant { .. }, _) => Finite,
        (MomentTestFunction::Power { p } | MomentTestFunction::PowerLog { p }, Decay::Polynomial(alpha)) => {
            // equality diverges: ∫ x^{α}·x^{-α-1} is logarithmic
            if p < alpha {
                Finite
            } else {
                Infinite
            }
        }
        (MomentTestFunction::Power { .. } | MomentTestFunction::PowerLog { .. }, Decay::Exponential(_)) => Finite,
        (MomentTestFunction::ExpPower { .. }, Decay::Polynomial(_)) => Infinite,
        (MomentTestFunction::ExpPower { theta, gamma }, Decay::Exponential(rate)) => {
            if gamma < 1.0 || theta < rate {
                Finite
            } else {
                Infinite
            }
        }
    }
}

/// f(eᶻ) against an exponential tail e^{-θz} in z.
fn compare_exponential_argument(f: &MomentTestFunction, theta: f64) -> Finiteness {
    use Finiteness::*;
    match *f {
        MomentTestFunction::Constant { .. } => Finite,
        // (1+eᶻ)^p ~ e^{pz}, with an extra factor z for power-log; equality diverges
        MomentTestFunction::Power { p } | MomentTestFunction::PowerLog { p } => {
            if p < theta {
                Finite
            } else {
                Infinite
            }
        }
        MomentTestFunction::ExpPower { .. } => Infinite,
    }
}

/// Exact classification of one of the two tail integrals.
pub fn tail_integral_classify(f: &MomentTestFunction, target: TailTarget<'_>) -> Finiteness {
    let mut verdict = Finiteness::Finite;
    match target {
        TailTarget::Branching(spec) => {
            for c in spec.m1.components.iter().chain(&spec.m2.components) {
                let BranchComponent::Tail(t) = c else {
                    continue;
                };
                if !t.is_unbounded() || t.mass <= 0.0 {
                    continue;
                }
                // ‖z‖ = √(offset² + Z²) grows like Z
                let decay = match t.family {
                    TailFamily::Pareto { alpha, .. } => Decay::Polynomial(alpha),
                    TailFamily::Exponential { rate, .. } => Decay::Exponential(rate),
                };
                verdict = verdict.and(compare_direct(f, decay));
            }
        }
        TailTarget::Environment(env) => {
            if env.trunc_level.is_some() {
                // clipped jumps leave nothing above the truncation level
                return Finiteness::Finite;
            }
            for c in &env.nu.components {
                if let EnvComponent::Exponential {
                    mass,
                    rate,
                    side: Side::Positive,
                    ..
                } = *c
                {
                    if mass > 0.0 {
                        verdict = verdict.and(compare_exponential_argument(f, rate));
                    }
                }
            }
        }
    }
    verdict
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriteriaBreakdown {
    pub initial: Finiteness,
    pub branching_tail: Finiteness,
    pub environment_tail: Finiteness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FMomentVerdict {
    pub verdict: Finiteness,
    pub criteria: CriteriaBreakdown,
    /// Set when f fails Condition B; the dichotomy then does not apply.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_b: Option<Witness>,
}

/// Default right end of the Condition B grid.
pub const DEFAULT_X_MAX: f64 = 1e6;

/// Finite iff the initial, branching-tail and environment-tail criteria all hold.
pub fn f_moment_verdict(env: &LevyEnvSpec, spec: &BranchingSpec, x0: [f64; 2], f: &MomentTestFunction) -> Result<FMomentVerdict> {
    if x0 == [0.0, 0.0] {
        return Err(Error::ZeroInitialState);
    }
    let criteria = CriteriaBreakdown {
        initial: Finiteness::Finite,
        branching_tail: tail_integral_classify(f, TailTarget::Branching(spec)),
        environment_tail: tail_integral_classify(f, TailTarget::Environment(env)),
    };
    let b = condition_b_check(f, DEFAULT_X_MAX);
    let verdict = if b.pass {
        criteria.initial.and(criteria.branching_tail).and(criteria.environment_tail)
    } else {
        Finiteness::Unknown
    };
    Ok(FMomentVerdict {
        verdict,
        criteria,
        condition_b: b.witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Axis, JumpMeasure, JumpMeasure1D};

    fn pareto_m1(alpha: f64) -> BranchingSpec {
        BranchingSpec {
            m1: JumpMeasure::pareto(0.5, alpha, 1.0, Axis::First, 0.0),
            ..BranchingSpec::default()
        }
    }

    fn exp_env(theta: f64) -> LevyEnvSpec {
        let nu = JumpMeasure1D::new(vec![EnvComponent::Exponential {
            mass: 0.3,
            rate: theta,
            start: 1.0,
            side: Side::Positive,
        }])
        .unwrap();
        LevyEnvSpec::new(0.0, 0.0, nu).unwrap()
    }

    #[test]
    fn condition_b_examples() {
        let r = condition_b_check(&MomentTestFunction::Power { p: 2.0 }, DEFAULT_X_MAX);
        assert!(r.pass);
        assert_eq!(r.k, 2.0);

        let r = condition_b_check(&MomentTestFunction::Power { p: 0.5 }, DEFAULT_X_MAX);
        assert_eq!(r.witness.unwrap().part, ConditionBPart::Convexity);

        let r = condition_b_check(&MomentTestFunction::Constant { value: 0.5 }, DEFAULT_X_MAX);
        let w = r.witness.unwrap();
        assert_eq!(w.part, ConditionBPart::LowerBound);
        assert_eq!(w.points[0], 0.0);

        assert!(condition_b_check(&MomentTestFunction::PowerLog { p: 2.0 }, DEFAULT_X_MAX).pass);
    }

    #[test]
    fn exp_power_is_not_submultiplicative() {
        let r = condition_b_check(&MomentTestFunction::ExpPower { theta: 1.0, gamma: 1.0 }, DEFAULT_X_MAX);
        assert_eq!(r.witness.unwrap().part, ConditionBPart::Submultiplicativity);
        let r = condition_b_check(&MomentTestFunction::ExpPower { theta: 1.0, gamma: 0.5 }, DEFAULT_X_MAX);
        assert_eq!(r.witness.unwrap().part, ConditionBPart::Convexity);
    }

    #[test]
    fn classifier_examples() {
        let cube = MomentTestFunction::Power { p: 3.0 };
        assert_eq!(tail_integral_classify(&cube, TailTarget::Branching(&pareto_m1(4.0))), Finiteness::Finite);
        assert_eq!(tail_integral_classify(&cube, TailTarget::Branching(&pareto_m1(2.5))), Finiteness::Infinite);
        assert_eq!(tail_integral_classify(&cube, TailTarget::Branching(&pareto_m1(3.0))), Finiteness::Infinite);
        let sq = MomentTestFunction::Power { p: 2.0 };
        assert_eq!(tail_integral_classify(&sq, TailTarget::Environment(&exp_env(3.0))), Finiteness::Finite);
        assert_eq!(tail_integral_classify(&sq, TailTarget::Environment(&exp_env(1.5))), Finiteness::Infinite);
        assert_eq!(
            tail_integral_classify(&sq, TailTarget::Environment(&exp_env(1.5).truncated(4.0))),
            Finiteness::Finite
        );
    }

    #[test]
    fn verdicts() {
        let atoms = BranchingSpec {
            m1: JumpMeasure::atom(1.0, [5.0, 2.0]),
            m2: JumpMeasure::atom(2.0, [0.0, 9.0]),
            ..BranchingSpec::default()
        };
        let env = LevyEnvSpec::new(0.1, 0.5, JumpMeasure1D::atom(1.0, 3.0)).unwrap();
        for f in [
            MomentTestFunction::Power { p: 7.0 },
            MomentTestFunction::PowerLog { p: 1.5 },
        ] {
            let v = f_moment_verdict(&env, &atoms, [1.0, 0.0], &f).unwrap();
            assert_eq!(v.verdict, Finiteness::Finite);
        }
        let heavy = BranchingSpec {
            m2: JumpMeasure::pareto(0.5, 2.5, 1.0, Axis::Second, 0.0),
            ..BranchingSpec::default()
        };
        let v = f_moment_verdict(&LevyEnvSpec::default(), &heavy, [1.0, 1.0], &MomentTestFunction::Power { p: 3.0 }).unwrap();
        assert_eq!(v.verdict, Finiteness::Infinite);
        assert_eq!(v.criteria.branching_tail, Finiteness::Infinite);

        let v = f_moment_verdict(&exp_env(1.5), &atoms, [1.0, 1.0], &MomentTestFunction::Power { p: 2.0 }).unwrap();
        assert_eq!(v.verdict, Finiteness::Infinite);
        assert_eq!(v.criteria.environment_tail, Finiteness::Infinite);

        assert!(matches!(
            f_moment_verdict(&env, &atoms, [0.0, 0.0], &MomentTestFunction::Power { p: 2.0 }),
            Err(Error::ZeroInitialState)
        ));
    }

    #[test]
    fn exp_power_rules() {
        let f = MomentTestFunction::ExpPower { theta: 1.0, gamma: 1.0 };
        let exp_tail = |rate| BranchingSpec {
            m1: JumpMeasure {
                components: vec![BranchComponent::Tail(crate::measure::TailComponent {
                    mass: 1.0,
                    axis: Axis::First,
                    offset: 0.0,
                    family: TailFamily::Exponential { rate, start: 0.0 },
                    upper: None,
                })],
            },
            ..BranchingSpec::default()
        };
        assert_eq!(tail_integral_classify(&f, TailTarget::Branching(&exp_tail(2.0))), Finiteness::Finite);
        assert_eq!(tail_integral_classify(&f, TailTarget::Branching(&exp_tail(1.0))), Finiteness::Infinite);
        assert_eq!(tail_integral_classify(&f, TailTarget::Branching(&pareto_m1(50.0))), Finiteness::Infinite);
        let g = MomentTestFunction::ExpPower { theta: 5.0, gamma: 0.5 };
        assert_eq!(tail_integral_classify(&g, TailTarget::Branching(&exp_tail(1.0))), Finiteness::Finite);
        // fails Condition B, so no verdict
        let v = f_moment_verdict(&LevyEnvSpec::default(), &exp_tail(2.0), [1.0, 0.0], &f).unwrap();
        assert_eq!(v.verdict, Finiteness::Unknown);
    }
}
