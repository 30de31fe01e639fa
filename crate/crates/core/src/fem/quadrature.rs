//! Norms, error integrals and the two energy densities of the fracture model.

use std::sync::Arc;

use super::field::Field;
use super::tensor::Tensor2;
use crate::error::Result;
use crate::geometry::{Mesh, Point};

/// Degree-5 seven-point rule on the reference triangle: barycentric
/// coordinates and weights summing to one.
const DUNAVANT7: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_770;
    const B1: f64 = 0.470_142_064_105_115;
    const W1: f64 = 0.132_394_152_788_506;
    const A2: f64 = 0.797_426_985_353_087;
    const B2: f64 = 0.101_286_507_323_456;
    const W2: f64 = 0.125_939_180_544_827;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

fn ensure(mesh: &Arc<Mesh>, fields: &[&Field]) -> Result<()> {
    fields.iter().try_for_each(|f| f.ensure_on(mesh))
}

/// Exact `int u^2` for a P1 field.
pub fn l2_norm(u: &Field) -> f64 {
    let mesh = u.mesh();
    let v = u.values();
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(e, &[a, b, c])| {
            let s = v[a] + v[b] + v[c];
            mesh.triangle_area(e) / 12.0 * (v[a] * v[a] + v[b] * v[b] + v[c] * v[c] + s * s)
        })
        .sum::<f64>()
        .sqrt()
}

/// `(int T grad u . grad u)^(1/2)`
pub fn h1_seminorm(u: &Field, tensor: Tensor2) -> f64 {
    let mesh = u.mesh();
    (0..mesh.triangle_count())
        .map(|e| {
            let g = mesh.gradient(e, u.values());
            mesh.triangle_area(e) * tensor.bilinear(g, g)
        })
        .sum::<f64>()
        .sqrt()
}

/// L2 and H1-seminorm distance between a P1 field and a closed-form function
/// with known gradient, by seven-point quadrature.
pub fn error_against(
    u: &Field,
    exact: impl Fn(Point) -> f64,
    exact_grad: impl Fn(Point) -> [f64; 2],
) -> (f64, f64) {
    let mesh = u.mesh();
    let (mut l2, mut h1) = (0.0, 0.0);
    for (e, tri) in mesh.triangles().iter().enumerate() {
        let pts = mesh.vertices(e);
        let area = mesh.triangle_area(e);
        let g = mesh.gradient(e, u.values());
        for (bary, w) in DUNAVANT7 {
            let x = [
                bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0],
                bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1],
            ];
            let uh: f64 = (0..3).map(|k| bary[k] * u.values()[tri[k]]).sum();
            let d = uh - exact(x);
            let ge = exact_grad(x);
            l2 += w * area * d * d;
            h1 += w * area * ((g[0] - ge[0]).powi(2) + (g[1] - ge[1]).powi(2));
        }
    }
    (l2.sqrt(), h1.sqrt())
}

/// Per-triangle `(T grad u) . grad u`.
pub fn strain_densities(mesh: &Mesh, u: &[f64], tensor: Tensor2) -> Vec<f64> {
    (0..mesh.triangle_count())
        .map(|e| {
            let g = mesh.gradient(e, u);
            tensor.bilinear(g, g)
        })
        .collect()
}

/// `1/2 int (v^2 + eta) (T grad u) . grad u`, with the weight averaged over
/// the vertices of every triangle.
pub fn elastic_energy(u: &Field, v: &Field, eta: f64, tensor: Tensor2) -> Result<f64> {
    let mesh = u.mesh();
    ensure(mesh, &[v])?;
    let vv = v.values();
    let dens = strain_densities(mesh, u.values(), tensor);
    Ok(0.5
        * mesh
            .triangles()
            .iter()
            .enumerate()
            .map(|(e, &[a, b, c])| {
                let w = (vv[a] * vv[a] + vv[b] * vv[b] + vv[c] * vv[c]) / 3.0 + eta;
                mesh.triangle_area(e) * w * dens[e]
            })
            .sum::<f64>())
}

/// `int (1 - v)^2 / (4 gamma) + gamma (T grad v) . grad v`, the first term by
/// vertex (lumped) quadrature.
pub fn damage_energy(v: &Field, gamma: f64, tensor: Tensor2) -> f64 {
    let mesh = v.mesh();
    let vv = v.values();
    let mut bulk = 0.0;
    let mut grad = 0.0;
    for (e, &[a, b, c]) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(e);
        bulk += area / 3.0 * ((1.0 - vv[a]).powi(2) + (1.0 - vv[b]).powi(2) + (1.0 - vv[c]).powi(2));
        let g = mesh.gradient(e, vv);
        grad += area * tensor.bilinear(g, g);
    }
    bulk / (4.0 * gamma) + gamma * grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_macro_mesh, MacroDomain};

    fn unit(n: usize) -> Arc<Mesh> {
        Arc::new(build_macro_mesh(&MacroDomain::unit_square(n)).unwrap())
    }

    #[test]
    fn rule_integrates_quintics() {
        let w: f64 = DUNAVANT7.iter().map(|(_, w)| w).sum();
        assert!((w - 1.0).abs() < 1e-14);
        // int_T x^2 y^3 over the unit right triangle = 2! 3! / 7! = 1/420.
        let s: f64 = DUNAVANT7
            .iter()
            .map(|(b, w)| w * 0.5 * b[1].powi(2) * b[2].powi(3))
            .sum();
        assert!((s - 1.0 / 420.0).abs() < 1e-14);
    }

    #[test]
    fn energies_of_simple_states() {
        let m = unit(4);
        let one = Field::constant(&m, 1.0);
        let zero = Field::constant(&m, 0.0);
        let x1 = Field::interpolate(&m, |p| p[0]);
        assert_eq!(damage_energy(&one, 0.3, Tensor2::IDENTITY), 0.0);
        let e = elastic_energy(&x1, &one, 0.01, Tensor2::IDENTITY).unwrap();
        assert!((e - 1.01 / 2.0).abs() < 1e-12);
        assert!((damage_energy(&zero, 1.0, Tensor2::IDENTITY) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn norms_of_linear_field() {
        let m = unit(8);
        let x1 = Field::interpolate(&m, |p| p[0]);
        assert!((l2_norm(&x1) - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((h1_seminorm(&x1, Tensor2::IDENTITY) - 1.0).abs() < 1e-12);
        let (l2, h1) = error_against(&x1, |p| p[0], |_| [1.0, 0.0]);
        assert!(l2 < 1e-14 && h1 < 1e-14);
    }
}
