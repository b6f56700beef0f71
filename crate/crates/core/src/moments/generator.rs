use nalgebra::{DMatrix, DVector};

use crate::branching::BranchingSpec;
use crate::error::{Error, Result};
use crate::levy_env::{levy_exponent, LevyEnvSpec};

/// Exponents (p, q) of X₁^p X₂^q.
pub type Monomial = (u32, u32);

/// Monomials with 1 ≤ p+q ≤ n, by degree, then p descending.
pub fn monomial_basis(n: u32) -> Vec<Monomial> {
    (1..=n).flat_map(|d| (0..=d).rev().map(move |p| (p, d - p))).collect()
}

/// Position of (p, q) in [`monomial_basis`].
pub fn monomial_index(p: u32, q: u32) -> usize {
    let d = (p + q) as usize;
    debug_assert!(d >= 1);
    (d - 1) * (d + 2) / 2 + (d - p as usize)
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// d m/dt = G m over the monomial moments of degree ≤ n.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentGenerator {
    pub degree: u32,
    pub basis: Vec<Monomial>,
    pub matrix: DMatrix<f64>,
}

impl MomentGenerator {
    pub fn coeff(&self, row: Monomial, col: Monomial) -> f64 {
        self.matrix[(monomial_index(row.0, row.1), monomial_index(col.0, col.1))]
    }
}

fn violated(degree: u32, reason: impl Into<String>) -> Error {
    Error::HypothesisViolated {
        degree,
        reason: reason.into(),
    }
}

pub fn build_moment_generator(env: &LevyEnvSpec, spec: &BranchingSpec, n: u32) -> Result<MomentGenerator> {
    if n == 0 {
        return Err(Error::spec("n", "moment degree must be at least 1"));
    }
    let mut beta = vec![0.0; n as usize + 1];
    for d in 1..=n {
        beta[d as usize] = levy_exponent(env, d).map_err(|e| violated(d, e.to_string()))?;
    }
    // μ(r,s) for r+s ≤ n, both measures
    let table = |m: &crate::measure::JumpMeasure, name: &str| -> Result<Vec<Vec<f64>>> {
        let mut t = vec![vec![0.0; n as usize + 1]; n as usize + 1];
        for r in 0..=n {
            for s in 0..=(n - r) {
                if r + s == 0 {
                    continue;
                }
                let v = m.moment(r, s);
                if !v.is_finite() {
                    return Err(violated(r + s, format!("∫z1^{r} z2^{s} {name}(dz) is infinite")));
                }
                t[r as usize][s as usize] = v;
            }
        }
        Ok(t)
    };
    let mu1 = table(&spec.m1, "m1")?;
    let mu2 = table(&spec.m2, "m2")?;

    let basis = monomial_basis(n);
    let dim = basis.len();
    let mut g = DMatrix::zeros(dim, dim);
    let b = &spec.b;
    for (row, &(p, q)) in basis.iter().enumerate() {
        let d = p + q;
        let (pf, qf) = (p as f64, q as f64);
        let mut add = |i: u32, j: u32, v: f64| {
            if i + j >= 1 && v != 0.0 {
                g[(row, monomial_index(i, j))] += v;
            }
        };
        add(p, q, beta[d as usize] - pf * b[0][0] - qf * b[1][1]);
        if p >= 1 {
            add(p - 1, q + 1, -pf * b[1][0]);
        }
        if q >= 1 {
            add(p + 1, q - 1, -qf * b[0][1]);
        }
        if p >= 2 {
            add(p - 1, q, spec.c1 * pf * (pf - 1.0));
        }
        if q >= 2 {
            add(p, q - 1, spec.c2 * qf * (qf - 1.0));
        }
        for i in 0..=p {
            for j in 0..=q {
                let w = binom(p, i) * binom(q, j);
                let (r, s) = ((p - i) as usize, (q - j) as usize);
                // m₁ jumps arrive at rate X₁, z₁ compensated
                if !((i, j) == (p, q) || (i + 1, j) == (p, q)) {
                    add(i + 1, j, w * mu1[r][s]);
                }
                if !((i, j) == (p, q) || (i, j + 1) == (p, q)) {
                    add(i, j + 1, w * mu2[r][s]);
                }
            }
        }
    }
    Ok(MomentGenerator {
        degree: n,
        basis,
        matrix: g,
    })
}

/// Mixed moments m_{p,q}(t) on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub degree: u32,
    pub basis: Vec<Monomial>,
    pub times: Vec<f64>,
    /// `values[k][i]`: monomial `basis[i]` at `times[k]`.
    pub values: Vec<Vec<f64>>,
    pub finite: Vec<bool>,
    /// Closure of the finite part, kept so moments can be evaluated off-grid.
    generator: Option<MomentGenerator>,
    initial: DVector<f64>,
}

fn initial_moments(basis: &[Monomial], x0: [f64; 2]) -> DVector<f64> {
    DVector::from_iterator(basis.len(), basis.iter().map(|&(p, q)| x0[0].powi(p as i32) * x0[1].powi(q as i32)))
}

impl MomentTable {
    pub fn value(&self, p: u32, q: u32, time_index: usize) -> f64 {
        self.values[time_index][monomial_index(p, q)]
    }

    pub fn is_finite(&self, p: u32, q: u32) -> bool {
        self.finite[monomial_index(p, q)]
    }

    /// Moments m(0).
    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    /// All finite moments at an arbitrary time s ≥ 0.
    pub fn at(&self, s: f64) -> Result<DVector<f64>> {
        let g = self.generator.as_ref().ok_or(Error::SolverTolerance { t: s })?;
        let k = g.basis.len();
        let m0 = self.initial.rows(0, k).into_owned();
        let m = (&g.matrix * s).exp() * m0;
        if m.iter().all(|v| v.is_finite()) {
            Ok(m)
        } else {
            Err(Error::SolverTolerance { t: s })
        }
    }
}

/// m(t) = exp(G t)·m(0) at every requested time.
pub fn solve_moment_ode(gen: &MomentGenerator, x0: [f64; 2], times: &[f64]) -> Result<MomentTable> {
    let initial = initial_moments(&gen.basis, x0);
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::spec("t", "times must be finite and nonnegative"));
        }
        let m = (&gen.matrix * t).exp() * &initial;
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::SolverTolerance { t });
        }
        values.push(m.iter().copied().collect());
    }
    Ok(MomentTable {
        degree: gen.degree,
        basis: gen.basis.clone(),
        times: times.to_vec(),
        values,
        finite: vec![true; gen.basis.len()],
        generator: Some(gen.clone()),
        initial,
    })
}

/// Moments up to degree n, with entries beyond the largest degree whose hypotheses
/// hold reported as +∞ and flagged non-finite.
pub fn moment_table(env: &LevyEnvSpec, spec: &BranchingSpec, x0: [f64; 2], n: u32, times: &[f64]) -> Result<MomentTable> {
    let mut d = n;
    let gen = loop {
        match build_moment_generator(env, spec, d) {
            Ok(g) => break Some(g),
            Err(Error::HypothesisViolated { .. }) if d > 1 => d -= 1,
            Err(Error::HypothesisViolated { .. }) => break None,
            Err(e) => return Err(e),
        }
    };
    let basis = monomial_basis(n);
    let initial = initial_moments(&basis, x0);
    let Some(gen) = gen else {
        return Ok(MomentTable {
            degree: n,
            finite: vec![false; basis.len()],
            values: vec![vec![f64::INFINITY; basis.len()]; times.len()],
            basis,
            times: times.to_vec(),
            generator: None,
            initial,
        });
    };
    let part = solve_moment_ode(&gen, x0, times)?;
    let k = gen.basis.len();
    let values = part
        .values
        .into_iter()
        .map(|mut row| {
            row.resize(basis.len(), f64::INFINITY);
            row
        })
        .collect();
    let finite = (0..basis.len()).map(|i| i < k).collect();
    Ok(MomentTable {
        degree: n,
        basis,
        times: times.to_vec(),
        values,
        finite,
        generator: Some(gen),
        initial,
    })
}
