//! Quasi-static evolution of the regularized fracture model with tensor-weighted
//! energies
//!
//!   E(u, v) = 1/2 int (v^2 + eta) (T grad u) . grad u
//!   H(v)    = int (1 - v)^2 / (4 gamma) + gamma (T grad v) . grad v
//!
//! driven by a Dirichlet datum `g(x, s)` on the outer boundary. The homogenized
//! model uses `T = M0`; the fine-scale model uses `T = I` on the perforated mesh.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::assembly::element_means;
use crate::fem::quadrature::strain_densities;
use crate::fem::{
    conjugate_gradient, damage_energy, elastic_energy, kkt_report, lumped_mass, solve_box_constrained, BoxOptions, CgOptions,
    Field, KktReport, SparseMatrix, StiffnessPattern, Tensor2,
};
use crate::geometry::{BoundaryTag, Mesh, Point};

/// Relative slack allowed when asserting that a half-step did not raise the energy.
pub const ENERGY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DamageMode {
    /// Alternate minimization in `(u, v)`.
    Evolve,
    /// `v` stays at its initial value; only `u` is solved for.
    Frozen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub gamma: f64,
    pub eta: f64,
    pub steps: usize,
    /// Stop alternating once `max |v_new - v|` drops below this.
    pub altmin_tol: f64,
    pub altmin_max_iters: usize,
    /// Relative residual for the displacement solves.
    pub solver_tol: f64,
    /// Mass-scaled KKT tolerance of the damage subproblem.
    pub kkt_tol: f64,
    /// Over-relaxation of the projected Gauss-Seidel sweeps.
    pub omega: f64,
    pub damage: DamageMode,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            eta: 1e-5,
            steps: 50,
            altmin_tol: 1e-6,
            altmin_max_iters: 1000,
            solver_tol: 1e-10,
            kkt_tol: 1e-9,
            omega: 1.8,
            damage: DamageMode::Evolve,
        }
    }
}

fn invalid(key: &str, message: String) -> Error {
    Error::Validation { key: key.into(), message }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid("model.gamma", format!("{} must be positive", self.gamma)));
        }
        if !(self.eta > 0.0 && self.eta < self.gamma) {
            return Err(invalid("model.eta", format!("{} must lie in (0, gamma = {})", self.eta, self.gamma)));
        }
        if self.steps == 0 {
            return Err(invalid("model.steps", "at least one pseudo-time step is required".into()));
        }
        if !(self.altmin_tol > 0.0) {
            return Err(invalid("model.altmin_tol", format!("{} must be positive", self.altmin_tol)));
        }
        if self.altmin_max_iters == 0 {
            return Err(invalid("model.altmin_max_iters", "must be at least 1".into()));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return Err(invalid("model.solver_tol", format!("{} outside (0, 1)", self.solver_tol)));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(invalid("model.kkt_tol", format!("{} must be positive", self.kkt_tol)));
        }
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(invalid("model.omega", format!("{} outside (0, 2)", self.omega)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadKind {
    Zero,
    /// `g = s A x1`
    Uniaxial,
    /// `g = s A x1 x2`
    Shear,
    /// `g = s A max(0, x1 - c)`
    Surfing { c: f64 },
}

/// Boundary datum `g(x, s) = s * amplitude * profile(x)` and its derivative in `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadProgram {
    pub kind: LoadKind,
    pub amplitude: f64,
}

impl LoadProgram {
    pub fn zero() -> Self {
        Self { kind: LoadKind::Zero, amplitude: 0.0 }
    }

    pub fn uniaxial(amplitude: f64) -> Self {
        Self { kind: LoadKind::Uniaxial, amplitude }
    }

    pub fn shear(amplitude: f64) -> Self {
        Self { kind: LoadKind::Shear, amplitude }
    }

    pub fn surfing(amplitude: f64, c: f64) -> Self {
        Self { kind: LoadKind::Surfing { c }, amplitude }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LoadKind::Zero => "zero",
            LoadKind::Uniaxial => "uniaxial",
            LoadKind::Shear => "shear",
            LoadKind::Surfing { .. } => "surfing",
        }
    }

    fn profile(&self, p: Point) -> f64 {
        match self.kind {
            LoadKind::Zero => 0.0,
            LoadKind::Uniaxial => p[0],
            LoadKind::Shear => p[0] * p[1],
            LoadKind::Surfing { c } => (p[0] - c).max(0.0),
        }
    }

    pub fn value(&self, p: Point, s: f64) -> f64 {
        s * self.amplitude * self.profile(p)
    }

    pub fn rate(&self, p: Point, _s: f64) -> f64 {
        self.amplitude * self.profile(p)
    }
}

/// Nodal mask that is 0 on nodes within `width` of the segment `a`-`b` and 1
/// elsewhere.
pub fn notch_field(mesh: &Arc<Mesh>, a: Point, b: Point, width: f64) -> Field {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    Field::interpolate(mesh, |p| {
        let t = if len2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let q = [a[0] + t * d[0] - p[0], a[1] + t * d[1] - p[1]];
        if (q[0] * q[0] + q[1] * q[1]).sqrt() <= width {
            0.0
        } else {
            1.0
        }
    })
}

/// Result of one damage subproblem.
#[derive(Debug, Clone)]
pub struct DamageUpdate {
    pub v: Field,
    pub sweeps: usize,
    pub kkt: KktReport,
}

#[derive(Debug, Clone)]
pub struct AltMinOutcome {
    pub u: Field,
    pub v: Field,
    pub iterations: usize,
    /// Total energy before the first half-step and after every half-step.
    pub energies: Vec<f64>,
    /// KKT report of the last damage solve (default when damage is frozen).
    pub kkt: KktReport,
}

#[derive(Debug, Clone)]
pub struct FractureState {
    pub step: usize,
    pub s: f64,
    pub u: Field,
    pub v: Field,
    pub e0: f64,
    pub h0: f64,
    pub work_accum: f64,
    pub balance_residual: f64,
}

impl FractureState {
    pub fn total(&self) -> f64 {
        self.e0 + self.h0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub s: f64,
    pub e0: f64,
    pub h0: f64,
    pub total: f64,
    pub work_accum: f64,
    pub balance_residual: f64,
    pub altmin_iters: usize,
    pub min_v: f64,
    pub max_v: f64,
    /// `max_i (v_k - v_{k-1})`, zero at the initial record.
    pub v_increase: f64,
    /// Largest relative energy increase over the half-steps of this step.
    pub max_energy_increase: f64,
    pub kkt: KktReport,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub final_state: FractureState,
}

impl Trajectory {
    /// `max_k max_i (v_k - v_{k-1})`.
    pub fn irreversibility_certificate(&self) -> f64 {
        self.records.iter().map(|r| r.v_increase).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_energy_increase(&self) -> f64 {
        self.records.iter().map(|r| r.max_energy_increase).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_kkt_violation(&self) -> f64 {
        self.records.iter().map(|r| r.kkt.violation()).fold(0.0, f64::max)
    }

    pub fn max_abs_balance_residual(&self) -> f64 {
        self.records.iter().map(|r| r.balance_residual.abs()).fold(0.0, f64::max)
    }
}

/// Relative increase `(after - before) / max(|before|, |after|)`, zero when both vanish.
fn relative_increase(before: f64, after: f64) -> f64 {
    let scale = before.abs().max(after.abs());
    if scale == 0.0 {
        0.0
    } else {
        (after - before) / scale
    }
}

/// Solver for the fracture model on a fixed mesh with a fixed tensor.
pub struct FractureSolver {
    mesh: Arc<Mesh>,
    tensor: Tensor2,
    params: ModelParams,
    pattern: StiffnessPattern,
    /// `int (T grad a) . grad b`
    k_tensor: SparseMatrix,
    lumped: Vec<f64>,
    outer: Vec<usize>,
    fixed: Vec<bool>,
}

impl FractureSolver {
    pub fn new(mesh: &Arc<Mesh>, tensor: Tensor2, params: ModelParams) -> Result<Self> {
        params.validate()?;
        if !tensor.is_spd() {
            return Err(invalid("tensor", format!("{tensor} is not symmetric positive-definite")));
        }
        let outer = mesh.boundary_nodes(BoundaryTag::Outer);
        if outer.is_empty() {
            return Err(Error::MeshMismatch("mesh has no outer boundary to carry the load".into()));
        }
        let h = mesh.h();
        if h >= params.gamma / 4.0 {
            log::warn!("mesh size {h:.4} is not below gamma/4 = {:.4}; the crack band is under-resolved", params.gamma / 4.0);
        }
        let pattern = StiffnessPattern::new(mesh, tensor);
        let k_tensor = pattern.assemble(|_| 1.0);
        let mut fixed = vec![false; mesh.node_count()];
        for &i in &outer {
            fixed[i] = true;
        }
        Ok(Self { mesh: Arc::clone(mesh), tensor, params, pattern, k_tensor, lumped: lumped_mass(mesh), outer, fixed })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn tensor(&self) -> Tensor2 {
        self.tensor
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn energy_e0(&self, u: &Field, v: &Field) -> Result<f64> {
        u.ensure_on(&self.mesh)?;
        elastic_energy(u, v, self.params.eta, self.tensor)
    }

    pub fn energy_h0(&self, v: &Field) -> Result<f64> {
        v.ensure_on(&self.mesh)?;
        Ok(damage_energy(v, self.params.gamma, self.tensor))
    }

    pub fn total_energy(&self, u: &Field, v: &Field) -> Result<f64> {
        Ok(self.energy_e0(u, v)? + self.energy_h0(v)?)
    }

    fn check_damage(&self, v: &Field, name: &str) -> Result<()> {
        v.ensure_on(&self.mesh)?;
        if let Some(i) = v.values().iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(invalid(name, format!("value {} at node {i} outside [0, 1]", v.values()[i])));
        }
        Ok(())
    }

    /// `K(v)` with element weights `mean(v^2) + eta`.
    fn weighted_stiffness(&self, v: &Field) -> SparseMatrix {
        let sq: Vec<f64> = v.values().iter().map(|x| x * x).collect();
        let w = element_means(&self.mesh, &sq);
        let eta = self.params.eta;
        self.pattern.assemble(|e| w[e] + eta)
    }

    /// Outer-node values of `g(., s)`, zero elsewhere.
    fn boundary_values(&self, load: &LoadProgram, s: f64) -> Vec<f64> {
        let nodes = self.mesh.nodes();
        let mut g = vec![0.0; nodes.len()];
        for &i in &self.outer {
            g[i] = load.value(nodes[i], s);
        }
        g
    }

    /// Minimizer of `E(., v)` over fields equal to `g(., s)` on the outer boundary.
    pub fn minimize_u(&self, v: &Field, load: &LoadProgram, s: f64, guess: Option<&Field>) -> Result<Field> {
        v.ensure_on(&self.mesh)?;
        let k = self.weighted_stiffness(v);
        let g = self.boundary_values(load, s);
        let (op, rhs) = self.eliminate(k, &g);
        let x0: Vec<f64> = match guess {
            Some(f) => {
                f.ensure_on(&self.mesh)?;
                f.values().iter().zip(&self.fixed).zip(&g).map(|((&x, &fx), &gi)| if fx { gi } else { x }).collect()
            }
            None => g.clone(),
        };
        let opts = CgOptions { tol: self.params.solver_tol, max_iter: None };
        let out = conjugate_gradient(&op, &rhs, Some(&x0), &opts)?;
        let mut x = out.x;
        for &i in &self.outer {
            x[i] = g[i];
        }
        Field::new(&self.mesh, x)
    }

    /// Symmetric elimination of the outer nodes, keeping the sparsity pattern.
    fn eliminate(&self, mut k: SparseMatrix, g: &[f64]) -> (SparseMatrix, Vec<f64>) {
        let n = k.dim();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let r = k.row_range(i);
            if self.fixed[i] {
                rhs[i] = g[i];
                for q in r {
                    let j = k.cols()[q];
                    k.vals_mut()[q] = if j == i { 1.0 } else { 0.0 };
                }
                continue;
            }
            for q in r {
                let j = k.cols()[q];
                if self.fixed[j] {
                    rhs[i] -= k.vals()[q] * g[j];
                    k.vals_mut()[q] = 0.0;
                }
            }
        }
        (k, rhs)
    }

    /// Hessian and right-hand side of `v -> E(u, v) + H(v)`.
    fn damage_system(&self, u: &Field) -> (SparseMatrix, Vec<f64>) {
        let gamma = self.params.gamma;
        let dens = strain_densities(&self.mesh, u.values(), self.tensor);
        let mut d = vec![0.0; self.mesh.node_count()];
        for (e, tri) in self.mesh.triangles().iter().enumerate() {
            let w = self.mesh.triangle_area(e) / 3.0 * dens[e];
            for &i in tri {
                d[i] += w;
            }
        }
        let c = 1.0 / (2.0 * gamma);
        let mut op = self.k_tensor.scaled(2.0 * gamma);
        let diag: Vec<f64> = d.iter().zip(&self.lumped).map(|(di, mi)| di + mi * c).collect();
        op.add_diagonal(&diag);
        (op, self.lumped.iter().map(|m| m * c).collect())
    }

    /// Minimizer of `E(u, .) + H(.)` over `0 <= v <= upper`, started from `start`.
    pub fn minimize_v(&self, u: &Field, start: &Field, upper: &Field) -> Result<DamageUpdate> {
        u.ensure_on(&self.mesh)?;
        start.ensure_on(&self.mesh)?;
        upper.ensure_on(&self.mesh)?;
        let (op, rhs) = self.damage_system(u);
        let lower = vec![0.0; rhs.len()];
        let opts = BoxOptions {
            tol: self.params.kkt_tol,
            max_sweeps: None,
            omega: self.params.omega,
            scale: Some(self.lumped.clone()),
        };
        let out = solve_box_constrained(&op, &rhs, &lower, upper.values(), Some(start.values()), &opts)?;
        Ok(DamageUpdate { v: Field::new(&self.mesh, out.x)?, sweeps: out.sweeps, kkt: out.kkt })
    }

    /// Mass-scaled first-order conditions of the damage subproblem at `v`
    /// with bounds `0 <= v <= upper`.
    pub fn damage_kkt(&self, u: &Field, v: &Field, upper: &Field) -> Result<KktReport> {
        for f in [u, v, upper] {
            f.ensure_on(&self.mesh)?;
        }
        let (op, rhs) = self.damage_system(u);
        let lower = vec![0.0; rhs.len()];
        Ok(kkt_report(&op, &rhs, v.values(), &lower, upper.values(), Some(&self.lumped)))
    }

    /// Alternates `u` and `v` solves at fixed `s` until `v` settles, with
    /// `upper` as the irreversibility bound.
    pub fn alternate_minimize(
        &self,
        u: &Field,
        v: &Field,
        upper: &Field,
        load: &LoadProgram,
        s: f64,
    ) -> Result<AltMinOutcome> {
        let mut u = u.clone();
        let g = self.boundary_values(load, s);
        for &i in &self.outer {
            u.values_mut()[i] = g[i];
        }
        let mut v = v.clone();
        let mut energies = vec![self.total_energy(&u, &v)?];
        let push = |energies: &mut Vec<f64>, e: f64| -> Result<()> {
            let before = *energies.last().unwrap();
            energies.push(e);
            if relative_increase(before, e) > ENERGY_SLACK {
                return Err(Error::EnergyIncrease { before, after: e });
            }
            Ok(())
        };
        let mut kkt = KktReport::default();
        let mut change = f64::INFINITY;
        for it in 1..=self.params.altmin_max_iters {
            u = self.minimize_u(&v, load, s, Some(&u))?;
            push(&mut energies, self.total_energy(&u, &v)?)?;
            if self.params.damage == DamageMode::Frozen {
                return Ok(AltMinOutcome { u, v, iterations: it, energies, kkt });
            }
            let upd = self.minimize_v(&u, &v, upper)?;
            push(&mut energies, self.total_energy(&u, &upd.v)?)?;
            change = upd.v.values().iter().zip(v.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = upd.v;
            kkt = upd.kkt;
            if change <= self.params.altmin_tol {
                return Ok(AltMinOutcome { u, v, iterations: it, energies, kkt });
            }
        }
        Err(Error::NoConvergence { iterations: self.params.altmin_max_iters, residual: change })
    }

    /// `int (v^2 + eta) (T grad u) . grad g_s(., s)` with `g_s` interpolated.
    pub fn work_rate(&self, u: &Field, v: &Field, load: &LoadProgram, s: f64) -> Result<f64> {
        u.ensure_on(&self.mesh)?;
        let rate = Field::interpolate(&self.mesh, |p| load.rate(p, s));
        Ok(self.weighted_stiffness(v).bilinear(u.values(), rate.values()))
    }

    pub fn evolve(&self, load: &LoadProgram, v_init: &Field) -> Result<Trajectory> {
        self.evolve_with(load, v_init, |_| Ok(()))
    }

    /// Runs the pseudo-time loop `s_k = k / N`, calling `observer` on the
    /// initial state and after every step.
    pub fn evolve_with(
        &self,
        load: &LoadProgram,
        v_init: &Field,
        mut observer: impl FnMut(&FractureState) -> Result<()>,
    ) -> Result<Trajectory> {
        self.check_damage(v_init, "v_init")?;
        let n = self.params.steps;
        let ds = 1.0 / n as f64;
        let u_start = Field::interpolate(&self.mesh, |p| load.value(p, 0.0));
        let first =
            self.alternate_minimize(&u_start, v_init, v_init, load, 0.0).map_err(|e| e.at_step(0))?;
        let mut state = FractureState {
            step: 0,
            s: 0.0,
            e0: self.energy_e0(&first.u, &first.v)?,
            h0: self.energy_h0(&first.v)?,
            u: first.u,
            v: first.v,
            work_accum: 0.0,
            balance_residual: 0.0,
        };
        let total0 = state.total();
        let mut rate_prev = self.work_rate(&state.u, &state.v, load, 0.0)?;
        let mut records = vec![self.record(&state, &first.energies, first.iterations, first.kkt, 0.0)];
        observer(&state)?;

        for k in 1..=n {
            let s = k as f64 * ds;
            let out = self
                .alternate_minimize(&state.u, &state.v, &state.v, load, s)
                .map_err(|e| e.at_step(k))?;
            let v_increase =
                out.v.values().iter().zip(state.v.values()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
            let rate = self.work_rate(&out.u, &out.v, load, s)?;
            let work_accum = state.work_accum + 0.5 * ds * (rate_prev + rate);
            rate_prev = rate;
            let e0 = self.energy_e0(&out.u, &out.v)?;
            let h0 = self.energy_h0(&out.v)?;
            state = FractureState {
                step: k,
                s,
                u: out.u,
                v: out.v,
                e0,
                h0,
                work_accum,
                balance_residual: e0 + h0 - total0 - work_accum,
            };
            records.push(self.record(&state, &out.energies, out.iterations, out.kkt, v_increase));
            observer(&state)?;
        }
        Ok(Trajectory { records, final_state: state })
    }

    fn record(&self, st: &FractureState, energies: &[f64], iters: usize, kkt: KktReport, v_increase: f64) -> StepRecord {
        let max_energy_increase =
            energies.windows(2).map(|w| relative_increase(w[0], w[1])).fold(f64::NEG_INFINITY, f64::max);
        StepRecord {
            step: st.step,
            s: st.s,
            e0: st.e0,
            h0: st.h0,
            total: st.total(),
            work_accum: st.work_accum,
            balance_residual: st.balance_residual,
            altmin_iters: iters,
            min_v: st.v.min(),
            max_v: st.v.max(),
            v_increase,
            max_energy_increase,
            kkt,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_macro_mesh, MacroDomain};

    fn unit(n: usize) -> Arc<Mesh> {
        Arc::new(build_macro_mesh(&MacroDomain::unit_square(n)).unwrap())
    }

    fn solver(mesh: &Arc<Mesh>, t: Tensor2, params: ModelParams) -> FractureSolver {
        FractureSolver::new(mesh, t, params).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::default().validate().is_ok());
        let bad = ModelParams { eta: 0.2, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::Validation { key, .. }) if key == "model.eta"));
        let bad = ModelParams { steps: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ModelParams { gamma: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn energies_of_simple_fields() {
        let m = unit(8);
        let t = Tensor2::isotropic(0.8);
        let fs = solver(&m, t, ModelParams::default());
        let u = Field::interpolate(&m, |p| p[0]);
        let one = Field::constant(&m, 1.0);
        let e0 = fs.energy_e0(&u, &one).unwrap();
        assert!((e0 - (1.0 + 1e-5) * 0.8 / 2.0).abs() < 1e-12);
        assert_eq!(fs.energy_h0(&one).unwrap(), 0.0);

        let zero = Field::constant(&m, 0.0);
        let flat = Field::constant(&m, 3.0);
        assert_eq!(fs.energy_e0(&flat, &zero).unwrap(), 0.0);
        assert!((fs.energy_h0(&zero).unwrap() - 2.5).abs() < 1e-12);

        let v = Field::interpolate(&m, |p| 0.5 + 0.4 * p[1]);
        let u2 = u.map(|x| 3.0 * x * x);
        let a = fs.energy_e0(&u2, &v).unwrap();
        let b = fs.energy_e0(&u2.map(|x| -2.0 * x), &v).unwrap();
        assert!((b - 4.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn linear_load_is_reproduced() {
        let m = unit(8);
        let one = Field::constant(&m, 1.0);
        for t in [Tensor2::isotropic(0.83), Tensor2::diag(0.7, 1.3)] {
            let fs = solver(&m, t, ModelParams::default());
            let u = fs.minimize_u(&one, &LoadProgram::uniaxial(1.0), 0.6, None).unwrap();
            for (p, x) in m.nodes().iter().zip(u.values()) {
                assert!((x - 0.6 * p[0]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn displacement_solve_is_stationary() {
        let m = unit(10);
        let fs = solver(&m, Tensor2::diag(0.9, 0.6), ModelParams::default());
        let v = Field::interpolate(&m, |p| 0.3 + 0.6 * (3.0 * p[0] * p[1]).sin().abs());
        let u = fs.minimize_u(&v, &LoadProgram::shear(1.0), 1.0, None).unwrap();
        let k = fs.weighted_stiffness(&v);
        let r = k.mul_vec(u.values());
        let scale = k.diagonal().iter().cloned().fold(0.0, f64::max);
        for i in 0..m.node_count() {
            if !fs.fixed[i] {
                assert!(r[i].abs() < 1e-8 * scale);
            }
        }
        let e = fs.energy_e0(&u, &v).unwrap();
        let mut w = u.clone();
        let interior = (0..m.node_count()).find(|&i| !fs.fixed[i]).unwrap();
        w.values_mut()[interior] += 1e-3;
        assert!(fs.energy_e0(&w, &v).unwrap() > e);
    }

    #[test]
    fn broken_band_releases_energy() {
        let m = unit(20);
        let load = LoadProgram::uniaxial(1.0);
        let intact = Field::constant(&m, 1.0);
        let band = Field::interpolate(&m, |p| if (p[0] - 0.5).abs() < 0.06 { 0.0 } else { 1.0 });
        let broken: Vec<usize> = m
            .triangles()
            .iter()
            .enumerate()
            .filter(|(_, t)| t.iter().all(|&i| band.values()[i] == 0.0))
            .map(|(e, _)| e)
            .collect();
        assert!(!broken.is_empty());
        let mut totals = Vec::new();
        for eta in [1e-4, 1e-6] {
            let fs = solver(&m, Tensor2::IDENTITY, ModelParams { eta, ..Default::default() });
            let e_intact = fs.energy_e0(&fs.minimize_u(&intact, &load, 1.0, None).unwrap(), &intact).unwrap();
            let u = fs.minimize_u(&band, &load, 1.0, None).unwrap();
            let e_band = fs.energy_e0(&u, &band).unwrap();
            let in_band: f64 = broken
                .iter()
                .map(|&e| {
                    let g = m.gradient(e, u.values());
                    0.5 * eta * m.triangle_area(e) * (g[0] * g[0] + g[1] * g[1])
                })
                .sum();
            // Jump across the band is at most max|g| = 1 over width 0.1.
            assert!(in_band <= 10.0 * eta, "{in_band}");
            assert!(e_band < 0.5 * e_intact, "{e_band} vs {e_intact}");
            totals.push(e_band);
        }
        assert!((totals[0] - totals[1]).abs() < 1e-2 * totals[1]);
    }

    #[test]
    fn damage_solve_cases() {
        let m = unit(8);
        let fs = solver(&m, Tensor2::IDENTITY, ModelParams::default());
        let one = Field::constant(&m, 1.0);
        let zero = Field::constant(&m, 0.0);
        let flat = Field::constant(&m, 2.0);
        let out = fs.minimize_v(&flat, &one, &one).unwrap();
        assert!(out.v.values().iter().all(|&x| x == 1.0));
        let steep = Field::interpolate(&m, |p| 5.0 * p[0]);
        let out = fs.minimize_v(&steep, &zero, &zero).unwrap();
        assert!(out.v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_dimensional_reduction() {
        let m = unit(8);
        let gamma = 0.1;
        let t = Tensor2::isotropic(0.75);
        let fs = solver(&m, t, ModelParams { kkt_tol: 1e-12, ..Default::default() });
        let one = Field::constant(&m, 1.0);
        for a in [0.5, 1.5, 4.0] {
            let u = Field::interpolate(&m, |p| a * p[0]);
            let g = 0.75 * a * a;
            let vstar = 1.0 / (1.0 + 2.0 * gamma * g);
            let out = fs.minimize_v(&u, &one, &one).unwrap();
            assert!(out.v.values().iter().all(|x| (x - vstar).abs() < 1e-8), "a = {a}");
            let cap = Field::constant(&m, 0.5 * vstar);
            let out = fs.minimize_v(&u, &cap, &cap).unwrap();
            assert!(out.v.values().iter().all(|x| (x - 0.5 * vstar).abs() < 1e-12));
        }
    }

    #[test]
    fn tiny_load_converges_quickly() {
        let m = unit(10);
        let fs = solver(&m, Tensor2::IDENTITY, ModelParams::default());
        let one = Field::constant(&m, 1.0);
        let u0 = Field::constant(&m, 0.0);
        let out = fs.alternate_minimize(&u0, &one, &one, &LoadProgram::uniaxial(1.0), 0.01).unwrap();
        assert!(out.iterations <= 2, "{}", out.iterations);
        assert!(out.v.min() >= 0.99);

        let out = fs.alternate_minimize(&u0, &one, &one, &LoadProgram::zero(), 0.5).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.u.values().iter().all(|&x| x == 0.0));
        assert!(out.v.values().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn zero_load_trajectory() {
        let m = unit(6);
        let fs = solver(&m, Tensor2::IDENTITY, ModelParams { steps: 5, ..Default::default() });
        let tr = fs.evolve(&LoadProgram::zero(), &Field::constant(&m, 1.0)).unwrap();
        assert_eq!(tr.records.len(), 6);
        for r in &tr.records {
            assert_eq!((r.e0, r.h0, r.balance_residual), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn frozen_damage_scales_quadratically() {
        let m = unit(8);
        let params = ModelParams { steps: 4, damage: DamageMode::Frozen, ..Default::default() };
        let fs = solver(&m, Tensor2::diag(0.8, 0.9), params);
        let one = Field::constant(&m, 1.0);
        let a = fs.evolve(&LoadProgram::shear(1.0), &one).unwrap();
        let b = fs.evolve(&LoadProgram::shear(3.0), &one).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert!((rb.e0 - 9.0 * ra.e0).abs() <= 1e-9 * rb.e0.max(1e-300));
        }
        for (x, y) in a.final_state.u.values().iter().zip(b.final_state.u.values()) {
            assert!((3.0 * x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn notched_evolution_invariants() {
        let m = unit(24);
        let params = ModelParams { steps: 10, ..Default::default() };
        let fs = solver(&m, Tensor2::isotropic(0.85), params);
        let notch = notch_field(&m, [0.0, 0.5], [0.2, 0.5], 1e-9);
        assert!(notch.min() == 0.0);
        let tr = fs.evolve(&LoadProgram::uniaxial(3.0), &notch).unwrap();
        assert!(tr.irreversibility_certificate() <= 1e-12);
        assert!(tr.max_energy_increase() <= ENERGY_SLACK);
        for r in &tr.records {
            assert!(r.min_v >= 0.0 && r.max_v <= 1.0);
            assert!(r.kkt.holds(1e-6));
        }
        let s: Vec<f64> = tr.records.iter().map(|r| r.s).collect();
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn notch_mask_geometry() {
        let m = unit(10);
        let f = notch_field(&m, [0.0, 0.5], [0.3, 0.5], 1e-9);
        let zeros: Vec<Point> = m.nodes().iter().zip(f.values()).filter(|(_, &v)| v == 0.0).map(|(p, _)| *p).collect();
        assert_eq!(zeros.len(), 4);
        assert!(zeros.iter().all(|p| (p[1] - 0.5).abs() < 1e-12 && p[0] <= 0.3 + 1e-12));
    }
}
