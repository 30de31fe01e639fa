//! P1 finite-element machinery shared by every solver.

pub mod assembly;
pub mod constraints;
pub mod field;
pub mod mms;
pub mod quadrature;
pub mod solvers;
pub mod sparse;
pub mod tensor;

pub use assembly::{assemble_mass, assemble_stiffness, lumped_mass, Coefficient, StiffnessPattern, Weight};
pub use constraints::{apply_dirichlet, apply_periodic, eliminate_dofs, PeriodicMap, PeriodicSystem};
pub use field::Field;
pub use quadrature::{damage_energy, elastic_energy, h1_seminorm, l2_norm};
pub use solvers::{
    conjugate_gradient, kkt_report, solve_box_constrained, solve_spd, BoxOptions, BoxOutcome, CgOptions, CgOutcome,
    KktReport,
};
pub use sparse::SparseMatrix;
pub use tensor::Tensor2;
