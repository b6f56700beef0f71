//! The Lévy random environment ξ (and its stochastic-exponential driver L).

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::JumpMeasure1D;

/// Default cap on expected events per path per unit time.
pub const DEFAULT_RATE_CAP: f64 = 1e6;

/// Environment specification: drift `a` of ξ, Gaussian coefficient σ₁, Lévy
/// measure ν, and the optional clipping level for large positive jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyEnvSpec {
    pub a: f64,
    #[serde(default)]
    pub sigma1: f64,
    #[serde(default)]
    pub nu: JumpMeasure1D,
    /// `None` is the untruncated environment (k = ∞).
    #[serde(default)]
    pub trunc_level: Option<f64>,
}

impl Default for LevyEnvSpec {
    fn default() -> Self {
        Self::deterministic(0.0)
    }
}

impl LevyEnvSpec {
    pub fn new(a: f64, sigma1: f64, nu: JumpMeasure1D) -> Result<Self> {
        let spec = Self {
            a,
            sigma1,
            nu,
            trunc_level: None,
        };
        spec.validate("environment")?;
        Ok(spec)
    }

    /// Pure drift environment ξ(t) = a·t.
    pub fn deterministic(a: f64) -> Self {
        Self {
            a,
            sigma1: 0.0,
            nu: JumpMeasure1D::empty(),
            trunc_level: None,
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !self.a.is_finite() {
            return Err(Error::spec(format!("{path}.a"), "drift must be finite"));
        }
        if !(self.sigma1.is_finite() && self.sigma1 >= 0.0) {
            return Err(Error::spec(format!("{path}.sigma1"), "sigma1 must be finite and nonnegative"));
        }
        self.nu.validate(&format!("{path}.nu"))?;
        if let Some(k) = self.trunc_level {
            // k = 1 is the clip used by the unit-square reference system
            if !(k >= 1.0) {
                return Err(Error::spec(format!("{path}.trunc_level"), "truncation level must be at least 1"));
            }
        }
        Ok(())
    }

    /// Same environment with positive jumps above `k` removed.
    pub fn truncated(&self, k: f64) -> Self {
        Self {
            trunc_level: if k.is_infinite() { None } else { Some(k) },
            ..self.clone()
        }
    }

    fn clip(&self) -> Option<f64> {
        self.trunc_level.filter(|k| k.is_finite())
    }

    /// Drift β of the driver L: `a + σ₁²/2 + ∫_{|z|≤1}(e^z − 1 − z)ν(dz)`.
    pub fn l_drift(&self) -> f64 {
        self.a + 0.5 * self.sigma1 * self.sigma1 + self.nu.small_exponent_integral(1)
    }

    /// β(1), the exponent with E e^{ξ(t)} = e^{β̃ t}.
    pub fn beta_tilde(&self) -> Result<f64> {
        levy_exponent(self, 1)
    }

    /// Effective drift of ξ between jumps once small jumps are summed uncompensated.
    pub fn jump_free_drift(&self) -> Result<f64> {
        let comp = self.nu.small_jump_mean().ok_or(Error::InfiniteActivity)?;
        Ok(self.a - comp)
    }

    /// Contribution of a raw jump `z` to ξ under the clipping rule.
    pub fn effective_jump(&self, z: f64) -> f64 {
        match self.clip() {
            Some(k) if z > k => 0.0,
            _ => z,
        }
    }
}

/// β(n) = a·n + σ₁²n²/2 + ∫_{|z|≤1}(e^{nz}−1−nz)ν(dz) + ∫_{|z|>1}(e^{n z 1{z≤k}}−1)ν(dz).
pub fn levy_exponent(spec: &LevyEnvSpec, n: u32) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let jumps = spec.nu.exponent_integral(n, spec.clip())?;
    Ok(spec.a * nf + 0.5 * spec.sigma1 * spec.sigma1 * nf * nf + jumps)
}

/// Jump times and raw sizes of the environment over `[0, horizon]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnvJumps {
    pub times: Vec<f64>,
    pub sizes: Vec<f64>,
}

impl EnvJumps {
    pub fn sample<R: Rng + ?Sized>(spec: &LevyEnvSpec, horizon: f64, rate_cap: f64, rng: &mut R) -> Result<Self> {
        let mass = spec.nu.total_mass().ok_or(Error::InfiniteActivity)?;
        if mass > rate_cap {
            return Err(Error::MassOverflow {
                expected: mass * horizon,
                cap: rate_cap * horizon,
            });
        }
        let mut out = EnvJumps::default();
        if mass <= 0.0 {
            return Ok(out);
        }
        let mut t = 0.0;
        loop {
            let e: f64 = Exp1.sample(rng);
            t += e / mass;
            if t > horizon {
                break;
            }
            out.times.push(t);
            out.sizes.push(spec.nu.sample(rng, mass));
        }
        Ok(out)
    }
}

/// Base time grid: multiples of `step` up to `horizon` (inclusive), merged with `extra` points.
pub fn base_grid(horizon: f64, step: f64, extra: &[f64]) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && horizon > 0.0 && horizon.is_finite() && step <= horizon * (1.0 + 1e-12)) {
        return Err(Error::InvalidStep { step, horizon });
    }
    let n = ((horizon / step) - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| (i as f64 * step).min(horizon)).collect();
    grid.extend(extra.iter().copied().filter(|&t| t > 0.0 && t <= horizon));
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * horizon);
    Ok(grid)
}

/// A sampled environment path on a grid refined by every jump time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvPath {
    pub grid: Vec<f64>,
    /// Δξ over `[grid[m], grid[m+1]]`, jump at the right endpoint included.
    pub xi_increments: Vec<f64>,
    /// Jump part of each increment (occurring at the right endpoint).
    pub jump_increments: Vec<f64>,
    /// `(time, raw z)` for jumps with `|z| > 1`.
    pub big_jump_marks: Vec<(f64, f64)>,
}

impl EnvPath {
    /// ξ at each grid point, starting from ξ(0) = 0.
    pub fn xi(&self) -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.xi_increments.iter().map(|d| {
                acc += d;
                acc
            }))
            .collect()
    }

    /// Left limit ξ(t_m−) at each grid point.
    pub fn xi_left(&self) -> Vec<f64> {
        let xi = self.xi();
        let mut left = xi.clone();
        for (m, j) in self.jump_increments.iter().enumerate() {
            left[m + 1] -= j;
        }
        left
    }

    pub fn horizon(&self) -> f64 {
        *self.grid.last().unwrap_or(&0.0)
    }

    /// Deterministic path ξ(t) = a·t on a uniform grid.
    pub fn deterministic(a: f64, horizon: f64, step: f64) -> Result<Self> {
        let grid = base_grid(horizon, step, &[])?;
        let xi_increments = grid.windows(2).map(|w| a * (w[1] - w[0])).collect::<Vec<_>>();
        let jump_increments = vec![0.0; xi_increments.len()];
        Ok(Self {
            grid,
            xi_increments,
            jump_increments,
            big_jump_marks: Vec::new(),
        })
    }
}

/// Samples ξ on a grid of multiples of `step` refined by all jump times.
pub fn sample_env_path<R: Rng + ?Sized>(spec: &LevyEnvSpec, horizon: f64, step: f64, rng: &mut R) -> Result<EnvPath> {
    sample_env_path_capped(spec, horizon, step, DEFAULT_RATE_CAP, rng)
}

pub fn sample_env_path_capped<R: Rng + ?Sized>(
    spec: &LevyEnvSpec,
    horizon: f64,
    step: f64,
    rate_cap: f64,
    rng: &mut R,
) -> Result<EnvPath> {
    base_grid(horizon, step, &[])?;
    let drift = spec.jump_free_drift()?;
    let jumps = EnvJumps::sample(spec, horizon, rate_cap, rng)?;
    let grid = base_grid(horizon, step, &jumps.times)?;
    let mut xi_increments = Vec::with_capacity(grid.len() - 1);
    let mut jump_increments = Vec::with_capacity(grid.len() - 1);
    let mut big_jump_marks = Vec::new();
    let mut next_jump = 0;
    for w in grid.windows(2) {
        let h = w[1] - w[0];
        let mut d = drift * h;
        if spec.sigma1 > 0.0 {
            let g: f64 = StandardNormal.sample(rng);
            d += spec.sigma1 * h.sqrt() * g;
        }
        let mut jump = 0.0;
        while next_jump < jumps.times.len() && jumps.times[next_jump] <= w[1] + 1e-12 * horizon {
            let z = jumps.sizes[next_jump];
            if z.abs() > 1.0 {
                big_jump_marks.push((jumps.times[next_jump], z));
            }
            jump += spec.effective_jump(z);
            next_jump += 1;
        }
        xi_increments.push(d + jump);
        jump_increments.push(jump);
    }
    Ok(EnvPath {
        grid,
        xi_increments,
        jump_increments,
        big_jump_marks,
    })
}
