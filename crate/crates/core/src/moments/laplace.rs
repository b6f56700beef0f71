use rayon::prelude::*;

use crate::branching::{phi_eval, BranchingSpec};
use crate::error::{Error, Result};
use crate::levy_env::{sample_env_path, EnvPath, LevyEnvSpec};
use crate::simulate::path_rng;
use crate::stats::MeanEstimator;

/// Backward solution v_{r,t} on the environment grid up to t.
#[derive(Debug, Clone, PartialEq)]
pub struct QuenchedLaplace {
    pub times: Vec<f64>,
    /// `v[m]` = v_{times[m], t}; the last entry is λ.
    pub v: Vec<[f64; 2]>,
}

impl QuenchedLaplace {
    pub fn v0(&self) -> [f64; 2] {
        self.v[0]
    }
}

const FIXED_POINT_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 200;

/// Solves v_{r,t} = e^{ξ(t)−ξ(r)}λ − ∫_r^t e^{ξ(s)−ξ(r)} φ(v_{s,t}) ds backwards.
///
/// In w(r) = e^{ξ(r)} v_{r,t} the equation reads w' = e^{ξ} φ(e^{−ξ} w),
/// w(t) = e^{ξ(t)} λ, which has no jumps in w; each grid interval takes one
/// implicit trapezoid step, solved by fixed-point iteration. Inside an interval
/// ξ is continuous, so the right end uses the left limit ξ(t_{m+1}−).
pub fn quenched_laplace(env_path: &EnvPath, spec: &BranchingSpec, lambda: [f64; 2], t: f64) -> Result<QuenchedLaplace> {
    if !lambda.iter().all(|l| l.is_finite() && *l >= 0.0) {
        return Err(Error::spec("lambda", "components must be finite and nonnegative"));
    }
    let tol = 1e-12 * env_path.horizon().max(1.0);
    let Some(last) = env_path.grid.iter().position(|&g| (g - t).abs() <= tol) else {
        return Err(Error::spec("t", "terminal time must be a point of the environment grid"));
    };
    let times = env_path.grid[..=last].to_vec();
    let xi = env_path.xi();
    let xi_left = env_path.xi_left();

    let rate = |x: f64, w: [f64; 2]| -> [f64; 2] {
        let e = x.exp();
        let p = phi_eval(spec, [w[0] / e, w[1] / e]);
        [e * p[0], e * p[1]]
    };

    let mut w = vec![[0.0; 2]; last + 1];
    let et = xi[last].exp();
    w[last] = [et * lambda[0], et * lambda[1]];
    for m in (0..last).rev() {
        let h = times[m + 1] - times[m];
        let right = rate(xi_left[m + 1], w[m + 1]);
        let mut cur = [w[m + 1][0] - h * right[0], w[m + 1][1] - h * right[1]];
        let mut converged = false;
        for _ in 0..MAX_ITERATIONS {
            let left = rate(xi[m], cur);
            let next = [
                w[m + 1][0] - 0.5 * h * (left[0] + right[0]),
                w[m + 1][1] - 0.5 * h * (left[1] + right[1]),
            ];
            if !next.iter().all(|v| v.is_finite()) {
                break;
            }
            let change = (next[0] - cur[0]).abs().max((next[1] - cur[1]).abs());
            let scale = next[0].abs().max(next[1].abs()).max(1.0);
            cur = next;
            if change <= FIXED_POINT_TOL * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::FixedPointDivergence { t: times[m] });
        }
        w[m] = cur;
    }
    let v = w
        .iter()
        .zip(&xi)
        .map(|(w, &x)| {
            let e = (-x).exp();
            [w[0] * e, w[1] * e]
        })
        .collect();
    Ok(QuenchedLaplace { times, v })
}

/// Mean and standard error of exp(−⟨x₀, v_{0,t}⟩) over sampled environments,
/// each path drawn from its own substream of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn annealed_laplace(
    env: &LevyEnvSpec,
    spec: &BranchingSpec,
    x0: [f64; 2],
    lambda: [f64; 2],
    t: f64,
    step: f64,
    n_paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let values: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = sample_env_path(env, t, step, &mut path_rng(seed, i))?;
            let v = quenched_laplace(&path, spec, lambda, t)?.v0();
            Ok((-(x0[0] * v[0] + x0[1] * v[1])).exp())
        })
        .collect::<Result<_>>()?;
    let est: MeanEstimator = values.into_iter().collect();
    Ok((est.mean(), est.std_error()))
}
