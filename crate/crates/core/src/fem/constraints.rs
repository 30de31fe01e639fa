//! Dirichlet elimination and periodic degree-of-freedom folding.

use std::sync::Arc;

use super::field::Field;
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryTag, Mesh};

/// Symmetric elimination of the listed degrees of freedom: rows and columns are
/// replaced by the identity and the known values are moved to the right-hand side.
pub fn eliminate_dofs(op: &SparseMatrix, rhs: &[f64], dofs: &[usize], values: &[f64]) -> (SparseMatrix, Vec<f64>) {
    let n = op.dim();
    assert_eq!(rhs.len(), n);
    assert_eq!(values.len(), n);
    let mut fixed = vec![false; n];
    for &i in dofs {
        fixed[i] = true;
    }
    let mut b = rhs.to_vec();
    let mut t = Vec::with_capacity(op.nnz());
    for i in 0..n {
        if fixed[i] {
            t.push((i, i, 1.0));
            b[i] = values[i];
            continue;
        }
        for (j, a) in op.row(i) {
            if fixed[j] {
                b[i] -= a * values[j];
            } else {
                t.push((i, j, a));
            }
        }
    }
    (SparseMatrix::from_triplets(n, &t), b)
}

/// Imposes `boundary_values` on every node carrying `tag`.
pub fn apply_dirichlet(
    mesh: &Arc<Mesh>,
    op: &SparseMatrix,
    rhs: &[f64],
    boundary_values: &Field,
    tag: BoundaryTag,
) -> Result<(SparseMatrix, Vec<f64>)> {
    boundary_values.ensure_on(mesh)?;
    if op.dim() != mesh.node_count() || rhs.len() != mesh.node_count() {
        return Err(Error::MeshMismatch(format!(
            "system of size {} on a mesh with {} nodes",
            op.dim(),
            mesh.node_count()
        )));
    }
    if !mesh.has_tag(tag) {
        return Err(Error::MeshMismatch(format!("mesh carries no {tag:?} edges")));
    }
    Ok(eliminate_dofs(op, rhs, &mesh.boundary_nodes(tag), boundary_values.values()))
}

/// Node-to-dof map after identifying periodic twins.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicMap {
    dof_of: Vec<usize>,
    n_dofs: usize,
}

impl PeriodicMap {
    pub fn new(n_nodes: usize, pairs: &[(usize, usize)]) -> Self {
        // Union-find rooted at the smallest node index, so corners collapse onto
        // a single master.
        let mut parent: Vec<usize> = (0..n_nodes).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for &(a, b) in pairs {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent[hi] = lo;
            }
        }
        let mut dof_of = vec![usize::MAX; n_nodes];
        let mut n_dofs = 0;
        for i in 0..n_nodes {
            let r = find(&mut parent, i);
            if r == i {
                dof_of[i] = n_dofs;
                n_dofs += 1;
            }
        }
        for i in 0..n_nodes {
            let r = find(&mut parent, i);
            dof_of[i] = dof_of[r];
        }
        Self { dof_of, n_dofs }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn dof(&self, node: usize) -> usize {
        self.dof_of[node]
    }

    /// `P^T A P`
    pub fn fold_operator(&self, op: &SparseMatrix) -> SparseMatrix {
        let mut t = Vec::with_capacity(op.nnz());
        for i in 0..op.dim() {
            for (j, a) in op.row(i) {
                t.push((self.dof_of[i], self.dof_of[j], a));
            }
        }
        SparseMatrix::from_triplets(self.n_dofs, &t)
    }

    /// `P^T b`
    pub fn fold_vector(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs];
        for (i, v) in b.iter().enumerate() {
            out[self.dof_of[i]] += v;
        }
        out
    }

    /// `P x`
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.dof_of.iter().map(|&d| x[d]).collect()
    }
}

/// Folded, not yet gauged, periodic system.
#[derive(Debug, Clone)]
pub struct PeriodicSystem {
    pub op: SparseMatrix,
    pub rhs: Vec<f64>,
    pub map: PeriodicMap,
}

impl PeriodicSystem {
    /// Pins dof `pin` to zero, removing the constant kernel.
    pub fn gauged(&self, pin: usize) -> (SparseMatrix, Vec<f64>) {
        let zeros = vec![0.0; self.op.dim()];
        eliminate_dofs(&self.op, &self.rhs, &[pin], &zeros)
    }
}

pub fn apply_periodic(op: &SparseMatrix, rhs: &[f64], pairs: &[(usize, usize)]) -> PeriodicSystem {
    let map = PeriodicMap::new(op.dim(), pairs);
    PeriodicSystem {
        op: map.fold_operator(op),
        rhs: map.fold_vector(rhs),
        map,
    }
}
