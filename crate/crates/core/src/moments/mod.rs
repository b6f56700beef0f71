//! Exact moments: the generator-derived closure over monomials, the first-moment
//! flow and its martingale, the one-type convolution recursion as an independent check,
//! the polynomial dependence on the initial state, and the quenched Laplace functional.

mod closed_form;
mod generator;
mod laplace;
mod polynomial;
mod recursion;

pub use closed_form::{expm2, first_moment_closed_form, martingale_transform};
pub use generator::{
    build_moment_generator, moment_table, monomial_basis, monomial_index, solve_moment_ode, MomentGenerator, MomentTable,
    Monomial,
};
pub use laplace::{annealed_laplace, quenched_laplace, QuenchedLaplace};
pub use polynomial::{polynomial_degree_check, triangular_grid, PolyFit, COEFFICIENT_THRESHOLD};
pub use recursion::{paper_recursion_residual, recursion_coefficients, RecursionCheck, RecursionCoefficients, TypeIndex};
