use nalgebra::{DMatrix, DVector};

use crate::branching::BranchingSpec;
use crate::error::{Error, Result};
use crate::levy_env::LevyEnvSpec;

use super::generator::{build_moment_generator, monomial_index};
use super::recursion::TypeIndex;

/// Least-squares fit of x ↦ E[X_i(t)^n | X(0) = x] as a bivariate polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// ((a, b), coefficient of x₁^a x₂^b)
    pub coefficients: Vec<((u32, u32), f64)>,
    /// Largest a+b whose coefficient exceeds the threshold in magnitude.
    pub degree: u32,
    /// Max relative misfit over the grid and held-out midpoints.
    pub residual: f64,
}

impl PolyFit {
    pub fn coefficient(&self, a: u32, b: u32) -> f64 {
        self.coefficients
            .iter()
            .find(|(e, _)| *e == (a, b))
            .map_or(0.0, |(_, c)| *c)
    }
}

/// Coefficients below this magnitude do not count towards the degree.
pub const COEFFICIENT_THRESHOLD: f64 = 1e-8;

fn full_basis(d: u32) -> Vec<(u32, u32)> {
    (0..=d).flat_map(|k| (0..=k).rev().map(move |a| (a, k - a))).collect()
}

fn eval_basis(basis: &[(u32, u32)], x: [f64; 2]) -> impl Iterator<Item = f64> + '_ {
    basis.iter().map(move |&(a, b)| x[0].powi(a as i32) * x[1].powi(b as i32))
}

/// Fits with the largest total degree the grid can determine (at least n), so a
/// degree ≤ n result is a finding rather than an assumption. The residual is also
/// measured at midpoints of consecutive grid points and at the centroid.
pub fn polynomial_degree_check(
    env: &LevyEnvSpec,
    spec: &BranchingSpec,
    n: u32,
    type_index: TypeIndex,
    t: f64,
    x_grid: &[[f64; 2]],
) -> Result<PolyFit> {
    let needed = ((n + 1) * (n + 2) / 2) as usize;
    if x_grid.len() < needed {
        return Err(Error::RankDeficientGrid {
            rank: x_grid.len(),
            needed,
        });
    }
    let mut d = n;
    while (((d + 2) * (d + 3)) / 2) as usize <= x_grid.len() {
        d += 1;
    }
    let basis = full_basis(d);

    let gen = build_moment_generator(env, spec, n)?;
    let flow = (&gen.matrix * t).exp();
    let (p, q) = match type_index {
        TypeIndex::One => (n, 0),
        TypeIndex::Two => (0, n),
    };
    let row = flow.row(monomial_index(p, q)).into_owned();
    let target = |x: [f64; 2]| -> f64 {
        gen.basis
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| row[i] * x[0].powi(a as i32) * x[1].powi(b as i32))
            .sum()
    };

    let v = DMatrix::from_fn(x_grid.len(), basis.len(), |r, c| {
        let (a, b) = basis[c];
        x_grid[r][0].powi(a as i32) * x_grid[r][1].powi(b as i32)
    });
    let y = DVector::from_iterator(x_grid.len(), x_grid.iter().map(|&x| target(x)));
    let svd = v.svd(true, true);
    let eps = 1e-11 * svd.singular_values.max();
    let rank = svd.rank(eps);
    if rank < basis.len() {
        return Err(Error::RankDeficientGrid {
            rank,
            needed: basis.len(),
        });
    }
    let coef = svd.solve(&y, eps).map_err(|_| Error::RankDeficientGrid {
        rank,
        needed: basis.len(),
    })?;

    let mut probes: Vec<[f64; 2]> = x_grid.to_vec();
    probes.extend(x_grid.windows(2).map(|w| [0.5 * (w[0][0] + w[1][0]), 0.5 * (w[0][1] + w[1][1])]));
    let k = x_grid.len() as f64;
    probes.push([
        x_grid.iter().map(|x| x[0]).sum::<f64>() / k,
        x_grid.iter().map(|x| x[1]).sum::<f64>() / k,
    ]);
    let residual = probes
        .iter()
        .map(|&x| {
            let fit: f64 = eval_basis(&basis, x).zip(coef.iter()).map(|(b, c)| b * c).sum();
            let want = target(x);
            (fit - want).abs() / want.abs().max(1.0)
        })
        .fold(0.0, f64::max);

    let degree = basis
        .iter()
        .zip(coef.iter())
        .filter(|(_, c)| c.abs() > COEFFICIENT_THRESHOLD)
        .map(|(&(a, b), _)| a + b)
        .max()
        .unwrap_or(0);
    Ok(PolyFit {
        coefficients: basis.into_iter().zip(coef.iter().copied()).collect(),
        degree,
        residual,
    })
}

/// Triangular lattice {(i, j) : i + j ≤ d} scaled by `h` and shifted by `offset`.
pub fn triangular_grid(d: u32, h: f64, offset: f64) -> Vec<[f64; 2]> {
    (0..=d)
        .flat_map(|i| (0..=d - i).map(move |j| [offset + h * i as f64, offset + h * j as f64]))
        .collect()
}
