use crate::branching::{effective_drift_matrix, BranchingSpec, Matrix2};
use crate::error::Result;
use crate::levy_env::LevyEnvSpec;
use crate::simulate::StatePath;

fn mat_vec(a: &Matrix2, x: [f64; 2]) -> [f64; 2] {
    [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
}

fn transpose(a: &Matrix2) -> Matrix2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// exp(A) for a real 2×2 matrix.
///
/// With s = tr(A)/2 and δ = s² − det(A), the Cayley–Hamilton form is
/// exp(A) = eˢ [c(δ) I + g(δ) (A − sI)] with c = cosh√δ, g = sinh√δ/√δ
/// (cos/sin for δ < 0); a short series covers |δ| ≈ 0, the defective case.
pub fn expm2(a: &Matrix2) -> Matrix2 {
    let s = 0.5 * (a[0][0] + a[1][1]);
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let delta = s * s - det;
    let (c, g) = if delta.abs() < 1e-8 {
        // c = Σ δᵏ/(2k)!, g = Σ δᵏ/(2k+1)!
        (1.0 + delta / 2.0 + delta * delta / 24.0, 1.0 + delta / 6.0 + delta * delta / 120.0)
    } else if delta > 0.0 {
        let r = delta.sqrt();
        (r.cosh(), r.sinh() / r)
    } else {
        let r = (-delta).sqrt();
        (r.cos(), r.sin() / r)
    };
    let e = s.exp();
    [
        [e * (c + g * (a[0][0] - s)), e * g * a[0][1]],
        [e * g * a[1][0], e * (c + g * (a[1][1] - s))],
    ]
}

fn scaled(a: &Matrix2, k: f64) -> Matrix2 {
    [[a[0][0] * k, a[0][1] * k], [a[1][0] * k, a[1][1] * k]]
}

/// E X(t) = e^{β̃t} exp(−t b̃ᵀ) x₀.
pub fn first_moment_closed_form(env: &LevyEnvSpec, spec: &BranchingSpec, x0: [f64; 2], t: f64) -> Result<[f64; 2]> {
    let bt = effective_drift_matrix(spec)?;
    let beta = env.beta_tilde()?;
    let e = expm2(&scaled(&transpose(&bt), -t));
    let y = mat_vec(&e, x0);
    let f = (beta * t).exp();
    Ok([f * y[0], f * y[1]])
}

/// M(t) = e^{−β̃t} exp(t b̃ᵀ) X(t) at every recorded time of the path.
pub fn martingale_transform(env: &LevyEnvSpec, spec: &BranchingSpec, path: &StatePath) -> Result<Vec<[f64; 2]>> {
    let bt_t = transpose(&effective_drift_matrix(spec)?);
    let beta = env.beta_tilde()?;
    Ok(path
        .times
        .iter()
        .zip(&path.states)
        .map(|(&t, &x)| {
            let y = mat_vec(&expm2(&scaled(&bt_t, t)), x);
            let f = (-beta * t).exp();
            [f * y[0], f * y[1]]
        })
        .collect())
}
