//! Finite-activity jump measures: the environment's Lévy measure on the real line
//! and the branching measures on the nonnegative quadrant.
//!
//! Every component carries an exact sampler and analytic (or bounded-interval
//! quadrature) moment functionals. Divergent integrals are reported as
//! `f64::INFINITY`, never guessed numerically.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

/// Which side of the real line an environment tail lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Positive,
    Negative,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Positive => 1.0,
            Side::Negative => -1.0,
        }
    }
}

/// One component of the environment Lévy measure ν.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvComponent {
    /// Point mass at `z`.
    Atom { mass: f64, z: f64 },
    /// Shifted exponential: jumps `side · (start + E)` with `E ~ Exp(rate)`, total mass `mass`.
    Exponential {
        mass: f64,
        rate: f64,
        #[serde(default)]
        start: f64,
        side: Side,
    },
    /// Uniform density of total mass `mass` on `[lo, hi]`.
    Uniform { mass: f64, lo: f64, hi: f64 },
    /// Density `coeff · |z|^{-1-alpha}` on `0 < side·z ≤ 1`, `alpha ∈ (0, 2)`.
    /// Infinite activity: usable in exponents, not in path sampling.
    PowerSmall { coeff: f64, alpha: f64, side: Side },
}

/// Environment Lévy measure ν as a sum of components.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JumpMeasure1D {
    pub components: Vec<EnvComponent>,
}

fn positive_finite(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl JumpMeasure1D {
    pub fn new(components: Vec<EnvComponent>) -> Result<Self> {
        let m = Self { components };
        m.validate("nu")?;
        Ok(m)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atom(mass: f64, z: f64) -> Self {
        Self {
            components: vec![EnvComponent::Atom { mass, z }],
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        for (i, c) in self.components.iter().enumerate() {
            let p = format!("{path}[{i}]");
            match *c {
                EnvComponent::Atom { mass, z } => {
                    if !positive_finite(mass) {
                        return Err(Error::spec(format!("{p}.mass"), "atom mass must be positive and finite"));
                    }
                    if !z.is_finite() || z == 0.0 {
                        return Err(Error::spec(format!("{p}.z"), "atom location must be finite and nonzero"));
                    }
                }
                EnvComponent::Exponential { mass, rate, start, .. } => {
                    if !positive_finite(mass) {
                        return Err(Error::spec(format!("{p}.mass"), "mass must be positive and finite"));
                    }
                    if !positive_finite(rate) {
                        return Err(Error::spec(format!("{p}.rate"), "rate must be positive and finite"));
                    }
                    if !(start.is_finite() && start >= 0.0) {
                        return Err(Error::spec(format!("{p}.start"), "start must be finite and nonnegative"));
                    }
                }
                EnvComponent::Uniform { mass, lo, hi } => {
                    if !positive_finite(mass) {
                        return Err(Error::spec(format!("{p}.mass"), "mass must be positive and finite"));
                    }
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(Error::spec(format!("{p}.lo"), "need finite lo < hi"));
                    }
                }
                EnvComponent::PowerSmall { coeff, alpha, .. } => {
                    if !positive_finite(coeff) {
                        return Err(Error::spec(format!("{p}.coeff"), "coefficient must be positive and finite"));
                    }
                    if !(alpha > 0.0 && alpha < 2.0) {
                        return Err(Error::spec(format!("{p}.alpha"), "alpha must lie in (0, 2)"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Total mass ν(ℝ), or `None` for infinite activity.
    pub fn total_mass(&self) -> Option<f64> {
        let mut total = 0.0;
        for c in &self.components {
            total += match *c {
                EnvComponent::Atom { mass, .. }
                | EnvComponent::Exponential { mass, .. }
                | EnvComponent::Uniform { mass, .. } => mass,
                EnvComponent::PowerSmall { .. } => return None,
            };
        }
        Some(total)
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// ∫_{|z|≤1} z ν(dz) for a finite-activity measure; the drift correction that
    /// turns the compensated small-jump integral into a plain jump sum.
    pub fn small_jump_mean(&self) -> Option<f64> {
        let mut total = 0.0;
        for c in &self.components {
            total += match *c {
                EnvComponent::Atom { mass, z } => {
                    if z.abs() <= 1.0 {
                        mass * z
                    } else {
                        0.0
                    }
                }
                EnvComponent::Exponential { mass, rate, start, side } => {
                    if start >= 1.0 {
                        0.0
                    } else {
                        // E[(start + E) 1{start + E ≤ 1}] · mass
                        let w = 1.0 - start;
                        let p = 1.0 - (-rate * w).exp();
                        let partial_e = (1.0 - (-rate * w).exp() * (1.0 + rate * w)) / rate;
                        side.sign() * mass * (start * p + partial_e)
                    }
                }
                EnvComponent::Uniform { mass, lo, hi } => {
                    let a = lo.max(-1.0);
                    let b = hi.min(1.0);
                    if a < b {
                        mass / (hi - lo) * 0.5 * (b * b - a * a)
                    } else {
                        0.0
                    }
                }
                EnvComponent::PowerSmall { .. } => return None,
            };
        }
        Some(total)
    }

    /// ∫_{|z|≤1}(e^{nz}−1−nz)ν(dz) + ∫_{|z|>1}(e^{n·z·1{z≤k}}−1)ν(dz), with `clip = Some(k)`
    /// killing positive jumps above `k`.
    pub fn exponent_integral(&self, n: u32, clip: Option<f64>) -> Result<f64> {
        self.exponent_parts(n, clip, true)
    }

    /// Small-jump part ∫_{|z|≤1}(e^{nz}−1−nz)ν(dz) alone.
    pub fn small_exponent_integral(&self, n: u32) -> f64 {
        self.exponent_parts(n, None, false)
            .expect("small-jump exponent is always finite")
    }

    fn exponent_parts(&self, n: u32, clip: Option<f64>, include_big: bool) -> Result<f64> {
        let nf = n as f64;
        let g = |z: f64| -> f64 {
            if z.abs() <= 1.0 {
                (nf * z).exp_m1() - nf * z
            } else if !include_big || clip.is_some_and(|k| z > k) {
                0.0
            } else {
                (nf * z).exp_m1()
            }
        };
        let opts = QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_subdivisions: 4000,
        };
        // Breakpoints of g on a bounded interval.
        let split_integral = |lo: f64, hi: f64, density: &dyn Fn(f64) -> f64| -> f64 {
            let mut pts = vec![lo];
            for b in [-1.0, 1.0, clip.unwrap_or(f64::INFINITY)] {
                if b > lo && b < hi {
                    pts.push(b);
                }
            }
            pts.push(hi);
            pts.sort_by(f64::total_cmp);
            pts.windows(2)
                .map(|w| integrate(|z| g(z) * density(z), w[0], w[1], opts).value)
                .sum()
        };
        let mut total = 0.0;
        for c in &self.components {
            total += match *c {
                EnvComponent::Atom { mass, z } => mass * g(z),
                EnvComponent::Uniform { mass, lo, hi } => {
                    let dens = mass / (hi - lo);
                    split_integral(lo, hi, &|_| dens)
                }
                EnvComponent::PowerSmall { coeff, alpha, side } => {
                    let s = side.sign();
                    integrate(
                        |w| ((s * nf * w).exp_m1() - s * nf * w) * coeff * w.powf(-1.0 - alpha),
                        0.0,
                        1.0,
                        QuadOptions {
                            abs_tol: 1e-12,
                            rel_tol: 1e-12,
                            max_subdivisions: 4000,
                        },
                    )
                    .value
                }
                EnvComponent::Exponential { mass, rate, start, side } => {
                    // work in w = |z| ≥ start with density mass·rate·e^{-rate(w-start)}
                    let dens = move |w: f64| mass * rate * (-rate * (w - start)).exp();
                    let mut part = 0.0;
                    // bounded stretch below 1 (small jumps)
                    let tail_from = match side {
                        Side::Positive => {
                            let bounded_hi = match clip {
                                Some(k) => k.max(1.0).max(start),
                                None => start.max(1.0),
                            };
                            if bounded_hi > start {
                                part += split_integral(start, bounded_hi, &|z| dens(z));
                            }
                            bounded_hi
                        }
                        Side::Negative => {
                            let hi = start.max(1.0);
                            if hi > start {
                                part += split_integral(-hi, -start, &|z| dens(-z));
                            }
                            hi
                        }
                    };
                    // unbounded stretch w ≥ tail_from (all |z| ≥ 1 here)
                    if !include_big {
                        return Ok(total + part);
                    }
                    let u = tail_from;
                    let mass_beyond = mass * (-rate * (u - start)).exp();
                    match (side, clip) {
                        (Side::Positive, Some(_)) => {}
                        (Side::Positive, None) => {
                            if nf >= rate {
                                return Err(Error::DivergentExponent { n });
                            }
                            // ∫_u^∞ e^{nw} dens(w) dw − mass_beyond
                            let exp_part = mass * rate * (nf * u - rate * (u - start)).exp() / (rate - nf);
                            part += exp_part - mass_beyond;
                        }
                        (Side::Negative, _) => {
                            let exp_part = mass * rate * (-nf * u - rate * (u - start)).exp() / (rate + nf);
                            part += exp_part - mass_beyond;
                        }
                    }
                    part
                }
            };
        }
        Ok(total)
    }

    /// Samples one jump size from the normalized measure.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, total_mass: f64) -> f64 {
        let mut pick = rng.random::<f64>() * total_mass;
        let last = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            let m = match *c {
                EnvComponent::Atom { mass, .. }
                | EnvComponent::Exponential { mass, .. }
                | EnvComponent::Uniform { mass, .. } => mass,
                EnvComponent::PowerSmall { .. } => unreachable!("infinite activity is rejected before sampling"),
            };
            if pick < m || i == last {
                return match *c {
                    EnvComponent::Atom { z, .. } => z,
                    EnvComponent::Exponential { rate, start, side, .. } => {
                        let u: f64 = rng.random();
                        side.sign() * (start - (1.0 - u).ln() / rate)
                    }
                    EnvComponent::Uniform { lo, hi, .. } => lo + (hi - lo) * rng.random::<f64>(),
                    EnvComponent::PowerSmall { .. } => unreachable!(),
                };
            }
            pick -= m;
        }
        unreachable!("component list is nonempty when total mass is positive")
    }
}

/// Coordinate axis of a one-dimensional tail component in ℝ₊².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Axis {
    First,
    Second,
}

impl TryFrom<u8> for Axis {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Axis::First),
            2 => Ok(Axis::Second),
            other => Err(format!("axis must be 1 or 2, got {other}")),
        }
    }
}

impl From<Axis> for u8 {
    fn from(a: Axis) -> u8 {
        match a {
            Axis::First => 1,
            Axis::Second => 2,
        }
    }
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::First => 0,
            Axis::Second => 1,
        }
    }
}

/// Parametric law of the moving coordinate of a tail component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailFamily {
    /// Density ∝ z^{-alpha-1} on `[scale, ∞)`.
    Pareto { alpha: f64, scale: f64 },
    /// `start + Exp(rate)`.
    Exponential {
        rate: f64,
        #[serde(default)]
        start: f64,
    },
}

impl TailFamily {
    fn lower(&self) -> f64 {
        match *self {
            TailFamily::Pareto { scale, .. } => scale,
            TailFamily::Exponential { start, .. } => start,
        }
    }

    fn cdf(&self, z: f64) -> f64 {
        if z <= self.lower() {
            return 0.0;
        }
        match *self {
            TailFamily::Pareto { alpha, scale } => 1.0 - (scale / z).powf(alpha),
            TailFamily::Exponential { rate, start } => -(-rate * (z - start)).exp_m1(),
        }
    }

    fn quantile(&self, p: f64) -> f64 {
        match *self {
            TailFamily::Pareto { alpha, scale } => scale * (1.0 - p).powf(-1.0 / alpha),
            TailFamily::Exponential { rate, start } => start - (-p).ln_1p() / rate,
        }
    }

    /// E[Z^r] for the untruncated law.
    fn raw_moment(&self, r: u32) -> f64 {
        if r == 0 {
            return 1.0;
        }
        match *self {
            TailFamily::Pareto { alpha, scale } => {
                let rf = r as f64;
                if rf >= alpha {
                    f64::INFINITY
                } else {
                    alpha * scale.powi(r as i32) / (alpha - rf)
                }
            }
            TailFamily::Exponential { rate, start } => {
                // E(start + E)^r = Σ_k C(r,k) start^{r-k} k!/rate^k
                let mut total = 0.0;
                let mut binom = 1.0;
                let mut fact = 1.0;
                for k in 0..=r {
                    if k > 0 {
                        binom = binom * (r - k + 1) as f64 / k as f64;
                        fact *= k as f64;
                    }
                    total += binom * start.powi((r - k) as i32) * fact / rate.powi(k as i32);
                }
                total
            }
        }
    }
}

/// A tail component: the moving coordinate `Z` on `axis` follows `family`
/// conditioned on `Z ≤ upper`, the other coordinate is pinned at `offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailComponent {
    pub mass: f64,
    pub axis: Axis,
    #[serde(default)]
    pub offset: f64,
    #[serde(flatten)]
    pub family: TailFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

const TAIL_QUAD: QuadOptions = QuadOptions {
    abs_tol: 1e-13,
    rel_tol: 1e-13,
    max_subdivisions: 4000,
};

impl TailComponent {
    fn upper_cdf(&self) -> f64 {
        self.upper.map_or(1.0, |u| self.family.cdf(u))
    }

    /// Moving coordinate at probability level `u ∈ [0,1)` of the conditional law.
    fn conditional_quantile(&self, u: f64) -> f64 {
        let z = self.family.quantile(u * self.upper_cdf());
        match self.upper {
            Some(cap) => z.min(cap),
            None => z,
        }
    }

    pub fn point(&self, moving: f64) -> [f64; 2] {
        match self.axis {
            Axis::First => [moving, self.offset],
            Axis::Second => [self.offset, moving],
        }
    }

    /// E[Z^r] under the conditional law (no mass factor).
    pub fn moving_moment(&self, r: u32) -> f64 {
        if r == 0 {
            return 1.0;
        }
        match (self.upper, self.family) {
            (None, fam) => fam.raw_moment(r),
            (Some(cap), TailFamily::Pareto { alpha, scale }) => {
                let rf = r as f64;
                let p = self.upper_cdf();
                let integral = if (rf - alpha).abs() < 1e-14 {
                    alpha * scale.powf(alpha) * (cap / scale).ln()
                } else {
                    alpha * scale.powf(alpha) * (cap.powf(rf - alpha) - scale.powf(rf - alpha)) / (rf - alpha)
                };
                integral / p
            }
            (Some(_), TailFamily::Exponential { .. }) => {
                integrate(|u| self.conditional_quantile(u).powi(r as i32), 0.0, 1.0, TAIL_QUAD).value
            }
        }
    }

    /// E[exp(−s Z)] − 1 under the conditional law, s ≥ 0.
    fn moving_laplace_m1(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        match (self.upper, self.family) {
            (None, TailFamily::Exponential { rate, start }) => {
                // e^{-s·start}·rate/(rate+s) − 1
                let a = (-s * start).exp_m1();
                let b = -s / (rate + s);
                a + b + a * b
            }
            _ => integrate(|u| (-s * self.conditional_quantile(u)).exp_m1(), 0.0, 1.0, TAIL_QUAD).value,
        }
    }

    /// Whether the component has unbounded support in its moving coordinate.
    pub fn is_unbounded(&self) -> bool {
        self.upper.is_none()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let u: f64 = rng.random();
        self.point(self.conditional_quantile(u))
    }

    /// Restrict the moving coordinate to `Z ≤ cap`; `None` when nothing survives.
    fn capped(&self, cap: f64) -> Option<TailComponent> {
        let lower = self.family.lower();
        let cur = self.upper.unwrap_or(f64::INFINITY);
        if cap >= cur {
            return Some(self.clone());
        }
        if cap <= lower {
            return None;
        }
        let ratio = self.family.cdf(cap) / self.upper_cdf();
        if ratio <= 0.0 {
            return None;
        }
        Some(TailComponent {
            mass: self.mass * ratio,
            upper: Some(cap),
            ..self.clone()
        })
    }
}

/// One component of a branching jump measure on ℝ₊²∖{0}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BranchComponent {
    Atom { mass: f64, z: [f64; 2] },
    Tail(TailComponent),
}

/// Branching jump measure m₁ or m₂ (finite activity).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JumpMeasure {
    pub components: Vec<BranchComponent>,
}

impl JumpMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atom(mass: f64, z: [f64; 2]) -> Self {
        Self {
            components: vec![BranchComponent::Atom { mass, z }],
        }
    }

    pub fn pareto(mass: f64, alpha: f64, scale: f64, axis: Axis, offset: f64) -> Self {
        Self {
            components: vec![BranchComponent::Tail(TailComponent {
                mass,
                axis,
                offset,
                family: TailFamily::Pareto { alpha, scale },
                upper: None,
            })],
        }
    }

    pub fn with(mut self, other: JumpMeasure) -> Self {
        self.components.extend(other.components);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn scaled(&self, gamma: f64) -> Self {
        let components = self
            .components
            .iter()
            .map(|c| match c {
                BranchComponent::Atom { mass, z } => BranchComponent::Atom {
                    mass: mass * gamma,
                    z: *z,
                },
                BranchComponent::Tail(t) => BranchComponent::Tail(TailComponent {
                    mass: t.mass * gamma,
                    ..t.clone()
                }),
            })
            .collect();
        Self { components }
    }

    /// Structural checks plus finiteness of both first moments, which is what the
    /// integrability condition on (z₁∧z₁² + z₂) amounts to for finite-activity measures.
    pub fn validate(&self, path: &str) -> Result<()> {
        for (i, c) in self.components.iter().enumerate() {
            let p = format!("{path}[{i}]");
            match c {
                BranchComponent::Atom { mass, z } => {
                    if !positive_finite(*mass) {
                        return Err(Error::spec(format!("{p}.mass"), "atom mass must be positive and finite"));
                    }
                    if !z.iter().all(|v| v.is_finite() && *v >= 0.0) {
                        return Err(Error::spec(format!("{p}.z"), "atom coordinates must be finite and nonnegative"));
                    }
                    if z[0] == 0.0 && z[1] == 0.0 {
                        return Err(Error::spec(format!("{p}.z"), "atoms at the origin are not allowed"));
                    }
                }
                BranchComponent::Tail(t) => {
                    if !positive_finite(t.mass) {
                        return Err(Error::spec(format!("{p}.mass"), "mass must be positive and finite"));
                    }
                    if !(t.offset.is_finite() && t.offset >= 0.0) {
                        return Err(Error::spec(format!("{p}.offset"), "offset must be finite and nonnegative"));
                    }
                    match t.family {
                        TailFamily::Pareto { alpha, scale } => {
                            if !positive_finite(alpha) {
                                return Err(Error::spec(format!("{p}.alpha"), "alpha must be positive and finite"));
                            }
                            if !positive_finite(scale) {
                                return Err(Error::spec(format!("{p}.scale"), "scale must be positive and finite"));
                            }
                        }
                        TailFamily::Exponential { rate, start } => {
                            if !positive_finite(rate) {
                                return Err(Error::spec(format!("{p}.rate"), "rate must be positive and finite"));
                            }
                            if !(start.is_finite() && start >= 0.0) {
                                return Err(Error::spec(format!("{p}.start"), "start must be finite and nonnegative"));
                            }
                        }
                    }
                    if let Some(u) = t.upper {
                        if !(u.is_finite() && u > t.family.lower()) {
                            return Err(Error::spec(format!("{p}.upper"), "upper must exceed the lower end of the support"));
                        }
                    }
                }
            }
        }
        for (r, s, name) in [(1, 0, "z1"), (0, 1, "z2")] {
            if !self.moment(r, s).is_finite() {
                return Err(Error::spec(
                    path.to_string(),
                    format!("∫{name} over the measure is infinite; the branching integrability condition fails"),
                ));
            }
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.components
            .iter()
            .map(|c| match c {
                BranchComponent::Atom { mass, .. } => *mass,
                BranchComponent::Tail(t) => t.mass,
            })
            .sum()
    }

    /// μ(r,s) = ∫ z₁^r z₂^s; `f64::INFINITY` when a tail diverges at that order.
    pub fn moment(&self, r: u32, s: u32) -> f64 {
        let mut total = 0.0;
        for c in &self.components {
            total += match c {
                BranchComponent::Atom { mass, z } => mass * z[0].powi(r as i32) * z[1].powi(s as i32),
                BranchComponent::Tail(t) => {
                    let (moving, pinned) = match t.axis {
                        Axis::First => (r, s),
                        Axis::Second => (s, r),
                    };
                    let pinned_factor = t.offset.powi(pinned as i32);
                    if pinned_factor == 0.0 {
                        0.0
                    } else {
                        t.mass * pinned_factor * t.moving_moment(moving)
                    }
                }
            };
        }
        total
    }

    /// ∫(e^{−⟨λ,z⟩} − 1 + λ_i z_i) over the measure, `i` the compensated coordinate.
    pub fn laplace_integral(&self, lambda: [f64; 2], compensated: usize) -> f64 {
        let mut total = 0.0;
        for c in &self.components {
            total += match c {
                BranchComponent::Atom { mass, z } => {
                    let dot = lambda[0] * z[0] + lambda[1] * z[1];
                    mass * ((-dot).exp_m1() + lambda[compensated] * z[compensated])
                }
                BranchComponent::Tail(t) => {
                    let a = t.axis.index();
                    let o = 1 - a;
                    // E[e^{-λ_a Z} e^{-λ_o c}] − 1 = (L+1)(P+1) − 1 with L, P the "minus one" parts
                    let l = t.moving_laplace_m1(lambda[a]);
                    let p = (-lambda[o] * t.offset).exp_m1();
                    let first = if compensated == a { t.moving_moment(1) } else { t.offset };
                    t.mass * (l + p + l * p + lambda[compensated] * first)
                }
            };
        }
        total
    }

    /// Restriction to {‖z‖ ≤ k} (Euclidean norm).
    pub fn restrict_norm(&self, k: f64) -> JumpMeasure {
        if k.is_infinite() {
            return self.clone();
        }
        let components = self
            .components
            .iter()
            .filter_map(|c| match c {
                BranchComponent::Atom { z, .. } => (norm(*z) <= k).then(|| c.clone()),
                BranchComponent::Tail(t) => {
                    if t.offset > k {
                        None
                    } else {
                        t.capped((k * k - t.offset * t.offset).sqrt()).map(BranchComponent::Tail)
                    }
                }
            })
            .collect();
        JumpMeasure { components }
    }

    /// Restriction to the unit square [0,1]².
    pub fn restrict_unit_square(&self) -> JumpMeasure {
        let components = self
            .components
            .iter()
            .filter_map(|c| match c {
                BranchComponent::Atom { z, .. } => (z[0] <= 1.0 && z[1] <= 1.0).then(|| c.clone()),
                BranchComponent::Tail(t) => {
                    if t.offset > 1.0 {
                        None
                    } else {
                        t.capped(1.0).map(BranchComponent::Tail)
                    }
                }
            })
            .collect();
        JumpMeasure { components }
    }

    /// Samples one jump from the normalized measure; `total_mass` must equal [`Self::total_mass`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, total_mass: f64) -> [f64; 2] {
        let mut pick = rng.random::<f64>() * total_mass;
        let last = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            let m = match c {
                BranchComponent::Atom { mass, .. } => *mass,
                BranchComponent::Tail(t) => t.mass,
            };
            if pick < m || i == last {
                return match c {
                    BranchComponent::Atom { z, .. } => *z,
                    BranchComponent::Tail(t) => t.sample(rng),
                };
            }
            pick -= m;
        }
        unreachable!("component list is nonempty when total mass is positive")
    }

    pub fn tails(&self) -> impl Iterator<Item = &TailComponent> {
        self.components.iter().filter_map(|c| match c {
            BranchComponent::Tail(t) => Some(t),
            BranchComponent::Atom { .. } => None,
        })
    }
}

pub fn norm(z: [f64; 2]) -> f64 {
    z[0].hypot(z[1])
}
