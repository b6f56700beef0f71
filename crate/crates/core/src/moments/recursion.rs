use serde::{Deserialize, Serialize};

use crate::branching::BranchingSpec;
use crate::error::{Error, Result};
use crate::levy_env::{levy_exponent, LevyEnvSpec};
use crate::quadrature::{integrate, QuadOptions};

use super::generator::{monomial_index, MomentTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TypeIndex {
    One,
    Two,
}

impl TypeIndex {
    pub fn from_number(i: u32) -> Option<Self> {
        match i {
            1 => Some(TypeIndex::One),
            2 => Some(TypeIndex::Two),
            _ => None,
        }
    }

    pub fn number(self) -> u32 {
        match self {
            TypeIndex::One => 1,
            TypeIndex::Two => 2,
        }
    }

    /// Monomial X_i^a X_other^b written as (p, q).
    fn monomial(self, own: u32, other: u32) -> (u32, u32) {
        match self {
            TypeIndex::One => (own, other),
            TypeIndex::Two => (other, own),
        }
    }
}

/// A^i_{n,j} for j = 0..=n−2 and B^i_{n,j} for j = 0..=n−1.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionCoefficients {
    pub n: u32,
    pub type_index: TypeIndex,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn recursion_coefficients(spec: &BranchingSpec, n: u32, type_index: TypeIndex) -> Result<RecursionCoefficients> {
    if n < 2 {
        return Err(Error::spec("n", "the recursion starts at n = 2"));
    }
    // own-type measure (arrives at the own rate), other-type measure, own diffusion, cross drift
    let (own, other, c, cross) = match type_index {
        TypeIndex::One => (&spec.m1, &spec.m2, spec.c1, spec.b[1][0]),
        TypeIndex::Two => (&spec.m2, &spec.m1, spec.c2, spec.b[0][1]),
    };
    let pure = |m: &crate::measure::JumpMeasure, k: u32| -> Result<f64> {
        let (r, s) = type_index.monomial(k, 0);
        let v = m.moment(r, s);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::DivergentCoefficient { order: k })
        }
    };
    let nf = n as f64;
    let mut a = Vec::with_capacity(n as usize - 1);
    for j in 0..=n - 2 {
        let mut v = binom(n, j) * pure(own, n - j)?;
        if j == n - 2 {
            v += c * nf * (nf - 1.0);
        }
        a.push(v);
    }
    let mut b = Vec::with_capacity(n as usize);
    for j in 0..=n - 1 {
        let mut v = binom(n, j) * pure(other, n - j)?;
        if j == n - 1 {
            v -= cross * nf;
        }
        b.push(v);
    }
    Ok(RecursionCoefficients { n, type_index, a, b })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

const CONVOLUTION_QUAD: QuadOptions = QuadOptions {
    abs_tol: 1e-9,
    rel_tol: 1e-12,
    max_subdivisions: 2000,
};

/// Evaluates
/// E X_i(t)^n = E X_i(0)^n e^{κt} + Σ_j A_j ∫₀ᵗ E X_i(s)^{j+1} e^{κ(t−s)} ds
///            + Σ_j B_j ∫₀ᵗ E X_i(s)^j X_other(s) e^{κ(t−s)} ds,   κ = β(n) − n·b_ii,
/// with moments taken from `table`, and returns |RHS − LHS| / max(1, LHS).
pub fn paper_recursion_residual(
    env: &LevyEnvSpec,
    spec: &BranchingSpec,
    table: &MomentTable,
    n: u32,
    type_index: TypeIndex,
    t: f64,
) -> Result<RecursionCheck> {
    if table.degree < n {
        return Err(Error::spec("n", format!("table degree {} is below {n}", table.degree)));
    }
    let coeffs = recursion_coefficients(spec, n, type_index)?;
    let bii = match type_index {
        TypeIndex::One => spec.b[0][0],
        TypeIndex::Two => spec.b[1][1],
    };
    let kappa = levy_exponent(env, n)? - n as f64 * bii;
    let (p, q) = type_index.monomial(n, 0);
    let lhs_index = monomial_index(p, q);
    if !table.finite[lhs_index] {
        return Err(Error::HypothesisViolated {
            degree: n,
            reason: "moment table is not finite at this degree".into(),
        });
    }
    let terms: Vec<(usize, f64)> = coeffs
        .a
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            let (p, q) = type_index.monomial(j as u32 + 1, 0);
            (monomial_index(p, q), a)
        })
        .chain(coeffs.b.iter().enumerate().map(|(j, &b)| {
            let (p, q) = type_index.monomial(j as u32, 1);
            (monomial_index(p, q), b)
        }))
        .filter(|&(_, c)| c != 0.0)
        .collect();

    let lhs = table.at(t)?[lhs_index];
    let mut rhs = table.initial()[lhs_index] * (kappa * t).exp();
    if !terms.is_empty() && t > 0.0 {
        let mut failure = None;
        let quad = integrate(
            |s| match table.at(s) {
                Ok(m) => terms.iter().map(|&(i, c)| c * m[i]).sum::<f64>() * (kappa * (t - s)).exp(),
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            },
            0.0,
            t,
            CONVOLUTION_QUAD,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        rhs += quad.value;
    }
    Ok(RecursionCheck {
        lhs,
        rhs,
        residual: (rhs - lhs).abs() / lhs.abs().max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::JumpMeasure;
    use crate::moments::{build_moment_generator, solve_moment_ode};

    #[test]
    fn coefficient_examples() {
        let c = recursion_coefficients(&BranchingSpec::default(), 3, TypeIndex::One).unwrap();
        assert!(c.a.iter().all(|&v| v == 0.0));
        assert_eq!(c.a.len(), 2);
        assert_eq!(c.b.len(), 3);

        let spec = BranchingSpec { c1: 2.0, ..BranchingSpec::default() };
        assert_eq!(recursion_coefficients(&spec, 3, TypeIndex::One).unwrap().a[1], 12.0);

        let spec = BranchingSpec::linear([[0.0, 0.0], [-1.0, 0.0]]);
        assert_eq!(recursion_coefficients(&spec, 2, TypeIndex::One).unwrap().b[1], 2.0);
    }

    #[test]
    fn binomial_jump_terms() {
        // m₁ atom mass 2 at (0.5, 3): A¹_{3,0} = 1·2·0.125, A¹_{3,1} = 3·2·0.25
        let spec = BranchingSpec {
            m1: JumpMeasure::atom(2.0, [0.5, 3.0]),
            ..BranchingSpec::default()
        };
        let c = recursion_coefficients(&spec, 3, TypeIndex::One).unwrap();
        assert_eq!(c.a, vec![0.25, 1.5]);
        let c = recursion_coefficients(&spec, 2, TypeIndex::Two).unwrap();
        // B²_{2,0} = ∫z₂² m₁ = 18, B²_{2,1} = 2∫z₂ m₁ = 12
        assert_eq!(c.b, vec![18.0, 12.0]);
    }

    #[test]
    fn frozen_process_residual_is_zero() {
        let env = LevyEnvSpec::default();
        let spec = BranchingSpec::default();
        let g = build_moment_generator(&env, &spec, 3).unwrap();
        let table = solve_moment_ode(&g, [1.3, 0.7], &[1.0]).unwrap();
        for ty in [TypeIndex::One, TypeIndex::Two] {
            let r = paper_recursion_residual(&env, &spec, &table, 3, ty, 1.0).unwrap();
            assert!(r.residual < 1e-15, "{r:?}");
        }
    }

    #[test]
    fn feller_second_moment() {
        let env = LevyEnvSpec::default();
        let spec = BranchingSpec { c1: 0.6, ..BranchingSpec::default() };
        let g = build_moment_generator(&env, &spec, 2).unwrap();
        let table = solve_moment_ode(&g, [2.0, 0.0], &[1.0]).unwrap();
        let r = paper_recursion_residual(&env, &spec, &table, 2, TypeIndex::One, 1.5).unwrap();
        let exact = 4.0 + 2.0 * 0.6 * 2.0 * 1.5;
        assert!((r.rhs - exact).abs() < 1e-8);
        assert!(r.residual < 1e-8);
    }
}
