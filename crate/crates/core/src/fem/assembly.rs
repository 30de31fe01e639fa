//! P1 stiffness and mass assembly.

use std::sync::Arc;

use super::field::Field;
use super::sparse::SparseMatrix;
use super::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::geometry::Mesh;

/// Per-element scalar weight of a stiffness form.
#[derive(Debug, Clone, Copy)]
pub enum Weight<'a> {
    Constant(f64),
    /// Evaluated on each element as the mean of its three vertex values.
    VertexMean(&'a Field),
}

/// `weight(x) * tensor` with the tensor defaulting to the identity.
#[derive(Debug, Clone, Copy)]
pub struct Coefficient<'a> {
    pub weight: Weight<'a>,
    pub tensor: Option<Tensor2>,
}

impl<'a> Coefficient<'a> {
    pub fn constant(c: f64) -> Self {
        Self { weight: Weight::Constant(c), tensor: None }
    }

    pub fn tensor(t: Tensor2) -> Self {
        Self { weight: Weight::Constant(1.0), tensor: Some(t) }
    }

    pub fn field(f: &'a Field) -> Self {
        Self { weight: Weight::VertexMean(f), tensor: None }
    }

    pub fn with_tensor(mut self, t: Tensor2) -> Self {
        self.tensor = Some(t);
        self
    }
}

/// CSR pattern of a P1 operator together with, for every triangle, the
/// positions of its nine local entries inside the value array. Lets operators
/// with changing weights be re-assembled without re-sorting.
#[derive(Debug, Clone)]
pub struct StiffnessPattern {
    template: SparseMatrix,
    slots: Vec<[usize; 9]>,
    /// `area * grad phi_a . T grad phi_b` per triangle.
    local: Vec<[f64; 9]>,
}

impl StiffnessPattern {
    pub fn new(mesh: &Mesh, tensor: Tensor2) -> Self {
        let n = mesh.node_count();
        let mut t = Vec::with_capacity(9 * mesh.triangle_count());
        for tri in mesh.triangles() {
            for &a in tri {
                for &b in tri {
                    t.push((a, b, 0.0));
                }
            }
        }
        let template = SparseMatrix::from_triplets(n, &t);
        let mut slots = Vec::with_capacity(mesh.triangle_count());
        let mut local = Vec::with_capacity(mesh.triangle_count());
        for (e, tri) in mesh.triangles().iter().enumerate() {
            let g = mesh.basis_gradients(e);
            let area = mesh.triangle_area(e);
            let mut s = [0usize; 9];
            let mut k = [0.0; 9];
            for a in 0..3 {
                let r = template.row_range(tri[a]);
                for b in 0..3 {
                    let pos = template.cols()[r.clone()].binary_search(&tri[b]).expect("pattern entry");
                    s[3 * a + b] = r.start + pos;
                    k[3 * a + b] = area * tensor.bilinear(g[a], g[b]);
                }
            }
            slots.push(s);
            local.push(k);
        }
        Self { template, slots, local }
    }

    /// Sum over elements of `weight[e] * K_e`.
    pub fn assemble(&self, weight: impl Fn(usize) -> f64) -> SparseMatrix {
        let mut m = self.template.clone();
        let vals = m.vals_mut();
        for (e, (s, k)) in self.slots.iter().zip(&self.local).enumerate() {
            let w = weight(e);
            for q in 0..9 {
                vals[s[q]] += w * k[q];
            }
        }
        m
    }
}

/// Mean of the vertex values of every triangle.
pub fn element_means(mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    mesh.triangles()
        .iter()
        .map(|&[a, b, c]| (values[a] + values[b] + values[c]) / 3.0)
        .collect()
}

/// Matrix of `int coeff grad a . grad b` with element-wise constant weight.
pub fn assemble_stiffness(mesh: &Arc<Mesh>, coeff: &Coefficient) -> Result<SparseMatrix> {
    if let Some(t) = coeff.tensor {
        if !t.is_spd() {
            return Err(Error::Validation {
                key: "tensor".into(),
                message: format!("{t} is not symmetric positive-definite"),
            });
        }
    }
    let pattern = StiffnessPattern::new(mesh, coeff.tensor.unwrap_or(Tensor2::IDENTITY));
    Ok(match coeff.weight {
        Weight::Constant(c) => pattern.assemble(|_| c),
        Weight::VertexMean(f) => {
            f.ensure_on(mesh)?;
            let w = element_means(mesh, f.values());
            pattern.assemble(|e| w[e])
        }
    })
}

/// Consistent P1 mass matrix.
pub fn assemble_mass(mesh: &Mesh) -> SparseMatrix {
    let mut t = Vec::with_capacity(9 * mesh.triangle_count());
    for (e, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(e);
        for a in 0..3 {
            for b in 0..3 {
                let m = if a == b { area / 6.0 } else { area / 12.0 };
                t.push((tri[a], tri[b], m));
            }
        }
    }
    SparseMatrix::from_triplets(mesh.node_count(), &t)
}

/// Row sums of the mass matrix: one third of the area of every adjacent triangle.
pub fn lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.node_count()];
    for (e, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.triangle_area(e) / 3.0;
        for &i in tri {
            m[i] += a;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_macro_mesh, MacroDomain};

    fn unit(n: usize) -> Arc<Mesh> {
        Arc::new(build_macro_mesh(&MacroDomain::unit_square(n)).unwrap())
    }

    #[test]
    fn laplace_energy_of_linear_field() {
        let m = unit(2);
        let k = assemble_stiffness(&m, &Coefficient::constant(1.0)).unwrap();
        let x1 = Field::interpolate(&m, |p| p[0]);
        assert!((k.quad_form(x1.values()) - 1.0).abs() < 1e-12);
        assert!(k.symmetry_defect() < 1e-12);
    }

    #[test]
    fn constant_weight_is_linear() {
        let m = unit(5);
        let k1 = assemble_stiffness(&m, &Coefficient::constant(1.0)).unwrap();
        let k3 = assemble_stiffness(&m, &Coefficient::constant(3.5)).unwrap();
        let diff = k3.add_scaled(&k1, -3.5);
        assert!(diff.vals().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn anisotropic_tensor() {
        let m = unit(4);
        let k = assemble_stiffness(&m, &Coefficient::tensor(Tensor2::diag(2.0, 1.0))).unwrap();
        let x2 = Field::interpolate(&m, |p| p[1]);
        assert!((k.quad_form(x2.values()) - 1.0).abs() < 1e-12);
        let x1 = Field::interpolate(&m, |p| p[0]);
        assert!((k.quad_form(x1.values()) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_foreign_field() {
        let (a, b) = (unit(3), unit(3));
        let f = Field::constant(&b, 1.0);
        assert!(matches!(
            assemble_stiffness(&a, &Coefficient::field(&f)),
            Err(Error::MeshMismatch(_))
        ));
    }

    #[test]
    fn constants_in_kernel_and_mass_total() {
        let m = unit(6);
        let k = assemble_stiffness(&m, &Coefficient::constant(1.0)).unwrap();
        let ones = vec![1.0; m.node_count()];
        assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        let mass = assemble_mass(&m);
        assert!((mass.quad_form(&ones) - 1.0).abs() < 1e-12);
        assert!((lumped_mass(&m).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
