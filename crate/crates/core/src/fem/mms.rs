//! Manufactured-solution check of the P1 Dirichlet solver:
//! `-lap u = 2 pi^2 sin(pi x) sin(pi y)` on the unit square, `u = 0` on the
//! boundary, exact solution `sin(pi x) sin(pi y)`.

use std::f64::consts::PI;
use std::sync::Arc;

use super::assembly::{assemble_mass, assemble_stiffness, Coefficient};
use super::constraints::apply_dirichlet;
use super::field::Field;
use super::quadrature::error_against;
use super::solvers::solve_spd;
use crate::error::Result;
use crate::geometry::{build_macro_mesh, BoundaryTag, MacroDomain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmsLevel {
    pub n: usize,
    pub h: f64,
    pub l2_error: f64,
    pub h1_error: f64,
}

pub fn exact(p: [f64; 2]) -> f64 {
    (PI * p[0]).sin() * (PI * p[1]).sin()
}

fn exact_grad(p: [f64; 2]) -> [f64; 2] {
    [
        PI * (PI * p[0]).cos() * (PI * p[1]).sin(),
        PI * (PI * p[0]).sin() * (PI * p[1]).cos(),
    ]
}

pub fn solve_level(n: usize, tol: f64) -> Result<MmsLevel> {
    let mesh = Arc::new(build_macro_mesh(&MacroDomain::unit_square(n))?);
    let k = assemble_stiffness(&mesh, &Coefficient::constant(1.0))?;
    let f = Field::interpolate(&mesh, |p| 2.0 * PI * PI * exact(p));
    let load = assemble_mass(&mesh).mul_vec(f.values());
    let zero = Field::constant(&mesh, 0.0);
    let (a, b) = apply_dirichlet(&mesh, &k, &load, &zero, BoundaryTag::Outer)?;
    let u = Field::new(&mesh, solve_spd(&a, &b, tol)?)?;
    let (l2_error, h1_error) = error_against(&u, exact, exact_grad);
    Ok(MmsLevel { n, h: 1.0 / n as f64, l2_error, h1_error })
}

/// Levels in order, each paired with the observed L2 rate against the previous one.
pub fn convergence_table(levels: &[usize], tol: f64) -> Result<Vec<(MmsLevel, Option<f64>)>> {
    let mut out: Vec<(MmsLevel, Option<f64>)> = Vec::with_capacity(levels.len());
    for &n in levels {
        let lvl = solve_level(n, tol)?;
        let rate = out
            .last()
            .map(|(prev, _)| (prev.l2_error / lvl.l2_error).ln() / (prev.h / lvl.h).ln());
        out.push((lvl, rate));
    }
    Ok(out)
}
