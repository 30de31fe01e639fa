//! Reference model on the perforated domain: the same fracture functional with
//! the identity tensor, holes carrying natural (traction-free) conditions.

use std::sync::Arc;

use crate::cell::{reconstruct_corrector, CorrectorBasis};
use crate::error::{Error, Result};
use crate::fem::{h1_seminorm, l2_norm, Field, Tensor2};
use crate::fracture::{FractureSolver, FractureState, LoadProgram, ModelParams, Trajectory};
use crate::geometry::{build_perforated_mesh, BoundaryTag, CellGeometry, MacroDomain, Mesh, PointLocator};

pub type FineState = FractureState;

/// Solver on `Omega_eps` for the given macro domain, scale and cell.
pub fn fine_solver(dom: &MacroDomain, epsilon: f64, geom: &CellGeometry, params: ModelParams) -> Result<FractureSolver> {
    let mesh = Arc::new(build_perforated_mesh(dom, epsilon, geom)?);
    FractureSolver::new(&mesh, Tensor2::IDENTITY, params)
}

/// `(E, H)` of a state on a perforated mesh.
pub fn fine_energies(u: &Field, v: &Field, params: &ModelParams) -> Result<(f64, f64)> {
    let e = crate::fem::elastic_energy(u, v, params.eta, Tensor2::IDENTITY)?;
    let h = crate::fem::damage_energy(v, params.gamma, Tensor2::IDENTITY);
    Ok((e, h))
}

/// Evolution on the perforated domain starting from `v = 1`.
pub fn fine_evolve(
    load: &LoadProgram,
    params: &ModelParams,
    dom: &MacroDomain,
    epsilon: f64,
    geom: &CellGeometry,
) -> Result<(FractureSolver, Trajectory)> {
    let solver = fine_solver(dom, epsilon, geom, params.clone())?;
    let v0 = Field::constant(solver.mesh(), 1.0);
    let tr = solver.evolve(load, &v0)?;
    Ok((solver, tr))
}

/// P1 interpolation of `source` at the nodes of `target`.
pub fn transfer(source: &Field, target: &Arc<Mesh>) -> Result<Field> {
    let mesh = source.mesh();
    let loc = PointLocator::new(mesh, 1e-9 * mesh.h());
    let vals = source.values();
    let out = target
        .nodes()
        .iter()
        .map(|&p| {
            let l = loc.locate(mesh, p)?;
            let t = mesh.triangles()[l.triangle];
            Ok((0..3).map(|k| l.barycentric[k] * vals[t[k]]).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    Field::new(target, out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub epsilon: f64,
    pub rel_l2_u: f64,
    pub rel_l2_u_corrected: f64,
    pub rel_h1semi_u: f64,
    pub rel_h1semi_u_corrected: f64,
    pub rel_l2_v: f64,
}

fn relative(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn difference(a: &Field, b: &Field) -> Result<Field> {
    b.ensure_on(a.mesh())?;
    Field::new(a.mesh(), a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect())
}

/// Relative distances on `Omega_eps` between a fine solution and the
/// homogenized one, without and with the first-order corrector.
pub fn compare_to_homog(
    fine_u: &Field,
    fine_v: &Field,
    homog_u: &Field,
    homog_v: &Field,
    basis: &CorrectorBasis,
    epsilon: f64,
) -> Result<ErrorReport> {
    let target = fine_u.mesh();
    fine_v.ensure_on(target)?;
    homog_v.ensure_on(homog_u.mesh())?;
    if target.region() != crate::geometry::Region::Perforated && target.has_tag(BoundaryTag::Hole) {
        return Err(Error::MeshMismatch("fine fields must live on a perforated mesh".into()));
    }
    let plain = transfer(homog_u, target)?;
    let corrected = reconstruct_corrector(homog_u, basis, epsilon, target)?;
    let v_plain = transfer(homog_v, target)?;
    let (nu, gu) = (l2_norm(fine_u), h1_seminorm(fine_u, Tensor2::IDENTITY));
    let d_plain = difference(fine_u, &plain)?;
    let d_corr = difference(fine_u, &corrected)?;
    let d_v = difference(fine_v, &v_plain)?;
    Ok(ErrorReport {
        epsilon,
        rel_l2_u: relative(l2_norm(&d_plain), nu),
        rel_l2_u_corrected: relative(l2_norm(&d_corr), nu),
        rel_h1semi_u: relative(h1_seminorm(&d_plain, Tensor2::IDENTITY), gu),
        rel_h1semi_u_corrected: relative(h1_seminorm(&d_corr, Tensor2::IDENTITY), gu),
        rel_l2_v: relative(l2_norm(&d_v), l2_norm(fine_v)),
    })
}

/// Sum over hole-boundary nodes of `|(K(v) u)_i|` relative to the same sum over
/// outer nodes (the total reaction). Vanishes for an exact displacement solve.
pub fn hole_flux_residual(solver: &FractureSolver, u: &Field, v: &Field) -> Result<f64> {
    let mesh = solver.mesh();
    u.ensure_on(mesh)?;
    v.ensure_on(mesh)?;
    let k = crate::fem::assemble_stiffness(
        mesh,
        &crate::fem::Coefficient::field(&v.map(|x| x * x + solver.params().eta)).with_tensor(solver.tensor()),
    )?;
    let r = k.mul_vec(u.values());
    let outer = mesh.boundary_nodes(BoundaryTag::Outer);
    let scale: f64 = outer.iter().map(|&i| r[i].abs()).sum();
    let mut on_outer = vec![false; mesh.node_count()];
    for &i in &outer {
        on_outer[i] = true;
    }
    let hole: f64 = mesh.boundary_nodes(BoundaryTag::Hole).iter().filter(|&&i| !on_outer[i]).map(|&i| r[i].abs()).sum();
    Ok(relative(hole, scale))
}
