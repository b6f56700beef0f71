//! Two-type branching mechanism (b, c₁, c₂, m₁, m₂).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::JumpMeasure;

pub type Matrix2 = [[f64; 2]; 2];

mod row_major {
    use super::Matrix2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix2, s: S) -> Result<S::Ok, S::Error> {
        [m[0][0], m[0][1], m[1][0], m[1][1]].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix2, D::Error> {
        let v = <[f64; 4]>::deserialize(d)?;
        Ok([[v[0], v[1]], [v[2], v[3]]])
    }
}

/// Branching mechanism. `b` is stored as `[[b11, b12], [b21, b22]]` and
/// serialized row-major as four reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingSpec {
    #[serde(with = "row_major")]
    pub b: Matrix2,
    #[serde(default)]
    pub c1: f64,
    #[serde(default)]
    pub c2: f64,
    #[serde(default)]
    pub m1: JumpMeasure,
    #[serde(default)]
    pub m2: JumpMeasure,
}

impl Default for BranchingSpec {
    fn default() -> Self {
        Self::linear([[0.0; 2]; 2])
    }
}

impl BranchingSpec {
    /// Drift-only mechanism.
    pub fn linear(b: Matrix2) -> Self {
        Self {
            b,
            c1: 0.0,
            c2: 0.0,
            m1: JumpMeasure::empty(),
            m2: JumpMeasure::empty(),
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !self.b.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::spec(format!("{path}.b"), "entries must be finite"));
        }
        if self.b[0][1] > 0.0 {
            return Err(Error::spec(format!("{path}.b"), "b12 must be ≤ 0"));
        }
        if self.b[1][0] > 0.0 {
            return Err(Error::spec(format!("{path}.b"), "b21 must be ≤ 0"));
        }
        for (name, c) in [("c1", self.c1), ("c2", self.c2)] {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::spec(format!("{path}.{name}"), "diffusion coefficient must be finite and nonnegative"));
            }
        }
        self.m1.validate(&format!("{path}.m1"))?;
        self.m2.validate(&format!("{path}.m2"))?;
        Ok(())
    }

    /// Same mechanism with both jump measures restricted to {‖z‖ ≤ k}.
    pub fn restrict_norm(&self, k: f64) -> Self {
        Self {
            m1: self.m1.restrict_norm(k),
            m2: self.m2.restrict_norm(k),
            ..self.clone()
        }
    }

    /// Same mechanism with both jump measures restricted to [0,1]².
    pub fn restrict_unit_square(&self) -> Self {
        Self {
            m1: self.m1.restrict_unit_square(),
            m2: self.m2.restrict_unit_square(),
            ..self.clone()
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.b.iter().flatten().all(|&v| v == 0.0)
            && self.c1 == 0.0
            && self.c2 == 0.0
            && self.m1.is_empty()
            && self.m2.is_empty()
    }
}

/// (φ₁(λ), φ₂(λ)) for λ ∈ ℝ₊².
pub fn phi_eval(spec: &BranchingSpec, lambda: [f64; 2]) -> [f64; 2] {
    let [l1, l2] = lambda;
    let b = &spec.b;
    let phi1 = b[0][0] * l1 + b[0][1] * l2 + spec.c1 * l1 * l1 + spec.m1.laplace_integral(lambda, 0);
    let phi2 = b[1][0] * l1 + b[1][1] * l2 + spec.c2 * l2 * l2 + spec.m2.laplace_integral(lambda, 1);
    [phi1, phi2]
}

/// μ(r,s) = ∫ z₁^r z₂^s measure(dz); `f64::INFINITY` flags divergence.
pub fn jump_moment(measure: &JumpMeasure, r: u32, s: u32) -> f64 {
    measure.moment(r, s)
}

/// b̃ with b̃₁₂ = b₁₂ − ∫z₂ m₁, b̃₂₁ = b₂₁ − ∫z₁ m₂, diagonal unchanged.
pub fn effective_drift_matrix(spec: &BranchingSpec) -> Result<Matrix2> {
    let cross1 = spec.m1.moment(0, 1);
    if !cross1.is_finite() {
        return Err(Error::DivergentCrossMoment { which: "∫z2 m1" });
    }
    let cross2 = spec.m2.moment(1, 0);
    if !cross2.is_finite() {
        return Err(Error::DivergentCrossMoment { which: "∫z1 m2" });
    }
    let b = &spec.b;
    Ok([[b[0][0], b[0][1] - cross1], [b[1][0] - cross2, b[1][1]]])
}
