//! Periodic cell problems on the perforated unit cell and the effective tensor.
//!
//! For each direction `i` the corrector `z_i` is the mean-zero periodic function
//! with `int_Y grad(z_i - y_i) . grad(phi) = 0` for every periodic test function
//! `phi`; the flux condition on the hole is natural in this form. The effective
//! tensor is
//!
//! ```text
//! M0 = I - 1/|Y| int_Y J_y Z^T = I - 1/|Y| int_Y J_y Z J_y Z^T
//! ```
//!
//! and both expressions are evaluated on every run, their difference being a
//! check on the periodic solve.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{
    apply_periodic, assemble_stiffness, conjugate_gradient, lumped_mass, CgOptions, Coefficient, Field, Tensor2,
};
use crate::geometry::{Mesh, PointLocator, Region};

/// Default bound on the difference between the two expressions for `M0`.
pub const IDENTITY_TOL: f64 = 1e-7;

/// Relative residual used for the corrector solves.
pub const CELL_SOLVER_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CorrectorBasis {
    mesh: Arc<Mesh>,
    z: [Field; 2],
    /// `[grad z_1, grad z_2]` on every triangle.
    gradients: Vec<[[f64; 2]; 2]>,
    cell_volume: f64,
}

impl CorrectorBasis {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn corrector(&self, i: usize) -> &Field {
        &self.z[i]
    }

    pub fn gradients(&self) -> &[[[f64; 2]; 2]] {
        &self.gradients
    }

    /// Summed triangle area of the cell mesh.
    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    /// `int_Y |a - sum_i a_i grad z_i|^2`, the cell energy of the corrected
    /// linear field with macroscopic gradient `a`.
    pub fn corrected_energy(&self, a: [f64; 2]) -> f64 {
        self.gradients
            .iter()
            .enumerate()
            .map(|(e, g)| {
                let d = [
                    a[0] - a[0] * g[0][0] - a[1] * g[1][0],
                    a[1] - a[0] * g[0][1] - a[1] * g[1][1],
                ];
                self.mesh.triangle_area(e) * (d[0] * d[0] + d[1] * d[1])
            })
            .sum()
    }
}

/// Effective tensor of the perforated cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogTensor {
    pub m0: Tensor2,
    pub cell_volume: f64,
    /// `max |M0_A - M0_B|` entry-wise, `M0_A` taken before symmetrization.
    pub identity_residual: f64,
    /// `|M0_A[0][1] - M0_A[1][0]|`
    pub skew: f64,
}

/// Solves the two periodic cell problems.
pub fn solve_cell_problems(cell_mesh: &Arc<Mesh>) -> Result<CorrectorBasis> {
    if cell_mesh.region() != Region::Cell || cell_mesh.periodic_pairs().is_empty() {
        return Err(Error::MeshMismatch("cell problems need a periodic unit-cell mesh".into()));
    }
    let mesh = cell_mesh;
    let k = assemble_stiffness(mesh, &Coefficient::constant(1.0))?;
    let mass = lumped_mass(mesh);
    let cell_volume: f64 = mass.iter().sum();

    let solve = |dir: usize| -> Result<Field> {
        let y: Vec<f64> = mesh.nodes().iter().map(|p| p[dir]).collect();
        let rhs = k.mul_vec(&y);
        let sys = apply_periodic(&k, &rhs, mesh.periodic_pairs());
        let total: f64 = sys.rhs.iter().sum();
        let scale: f64 = sys.rhs.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        if total.abs() > 1e-10 * scale {
            return Err(Error::SingularSystem(format!(
                "periodic right-hand side has nonzero total {total:e}"
            )));
        }
        let (a, b) = sys.gauged(0);
        let opts = CgOptions { tol: CELL_SOLVER_TOL, max_iter: None };
        let x = conjugate_gradient(&a, &b, None, &opts)?.x;
        let mut z = sys.map.expand(&x);
        let mean = z.iter().zip(&mass).map(|(v, m)| v * m).sum::<f64>() / cell_volume;
        z.iter_mut().for_each(|v| *v -= mean);
        Field::new(mesh, z)
    };
    let (z1, z2) = rayon::join(|| solve(0), || solve(1));
    let z = [z1?, z2?];
    let gradients = (0..mesh.triangle_count())
        .map(|e| [mesh.gradient(e, z[0].values()), mesh.gradient(e, z[1].values())])
        .collect();
    Ok(CorrectorBasis {
        mesh: Arc::clone(mesh),
        z,
        gradients,
        cell_volume,
    })
}

/// Computes `M0` by both formulas and checks they agree within `tol`.
pub fn homogenized_tensor(basis: &CorrectorBasis, tol: f64) -> Result<HomogTensor> {
    let mesh = &basis.mesh;
    // a[i][j] = int d_i z_j, b[i][j] = int grad z_i . grad z_j
    let mut a = [[0.0; 2]; 2];
    let mut b = [[0.0; 2]; 2];
    for (e, g) in basis.gradients.iter().enumerate() {
        let area = mesh.triangle_area(e);
        for i in 0..2 {
            for j in 0..2 {
                a[i][j] += area * g[j][i];
                b[i][j] += area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }
    let vol = basis.cell_volume;
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let mut m_a = [[0.0; 2]; 2];
    let mut residual = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            m_a[i][j] = delta(i, j) - a[i][j] / vol;
            let m_b = delta(i, j) - b[i][j] / vol;
            residual = residual.max((m_a[i][j] - m_b).abs());
        }
    }
    if !(residual <= tol) {
        return Err(Error::IdentityViolation { residual, tol });
    }
    let m0 = Tensor2::new(m_a[0][0], 0.5 * (m_a[0][1] + m_a[1][0]), m_a[1][1]);
    Ok(HomogTensor {
        m0,
        cell_volume: vol,
        identity_residual: residual,
        skew: (m_a[0][1] - m_a[1][0]).abs(),
    })
}

/// Nodal interpolant on `target` of `u0(x) - epsilon * sum_i z_i(x / epsilon) d_i u0(x)`.
///
/// Cell coordinates are measured from the lower-left corner of the macro mesh,
/// which is where the perforated domain starts its tiling.
pub fn reconstruct_corrector(u0: &Field, basis: &CorrectorBasis, epsilon: f64, target: &Arc<Mesh>) -> Result<Field> {
    if !(epsilon > 0.0) {
        return Err(Error::Validation { key: "epsilon".into(), message: format!("{epsilon} is not positive") });
    }
    let macro_mesh = u0.mesh();
    let cell = &basis.mesh;
    let macro_loc = PointLocator::new(macro_mesh, 1e-9 * macro_mesh.h());
    let cell_loc = PointLocator::new(cell, cell.h());
    let origin = macro_mesh.nodes().iter().fold([f64::INFINITY; 2], |o, p| [o[0].min(p[0]), o[1].min(p[1])]);
    let u = u0.values();

    let mut out = Vec::with_capacity(target.node_count());
    for &x in target.nodes() {
        let ml = macro_loc.locate(macro_mesh, x)?;
        let tri = macro_mesh.triangles()[ml.triangle];
        let u_x: f64 = (0..3).map(|k| ml.barycentric[k] * u[tri[k]]).sum();
        let grad = macro_mesh.gradient(ml.triangle, u);
        let y = [
            ((x[0] - origin[0]) / epsilon).rem_euclid(1.0),
            ((x[1] - origin[1]) / epsilon).rem_euclid(1.0),
        ];
        let cl = cell_loc
            .locate(cell, y)
            .map_err(|_| Error::PointOutsideDomain(x[0], x[1]))?;
        let ctri = cell.triangles()[cl.triangle];
        let z = |i: usize| -> f64 { (0..3).map(|k| cl.barycentric[k] * basis.z[i].values()[ctri[k]]).sum() };
        out.push(u_x - epsilon * (z(0) * grad[0] + z(1) * grad[1]));
    }
    Field::new(target, out)
}

/// Corrector basis and effective tensor for a circular hole of radius `r`.
pub fn cell_tensor(geom: &crate::geometry::CellGeometry) -> Result<(CorrectorBasis, HomogTensor)> {
    let mesh = Arc::new(crate::geometry::build_unit_cell_mesh(geom)?);
    let basis = solve_cell_problems(&mesh)?;
    let t = homogenized_tensor(&basis, IDENTITY_TOL)?;
    Ok((basis, t))
}
