//! Shared numeric substrate: jets, quadrature, residues, excised integrals.

mod jet;
mod quad;
mod special;

pub use jet::Jet;
pub use quad::{
    circle_residue, circle_residue_tol, contour_integrate, excised_integral, excised_integral_many,
    extrapolate_to_zero, wirtinger_d, wirtinger_dbar, ContourSpec, ExcisionSpec, RESIDUE_TOL,
};
pub use special::{bernoulli_f64, bernoulli_table, binomial, binomial_big, factorial, ln_factorial, riemann_zeta};
