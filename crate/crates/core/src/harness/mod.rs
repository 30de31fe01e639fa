//! Run configuration, mode dispatch and output files.

mod config;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

pub use config::{GeometryConfig, Mode, Notch, RunConfig, RunSection};

use crate::cell::{cell_tensor, CorrectorBasis, HomogTensor};
use crate::error::{Error, Result};
use crate::fem::mms::convergence_table;
use crate::fem::Field;
use crate::finescale::{compare_to_homog, fine_solver, ErrorReport};
use crate::fracture::{notch_field, FractureSolver, FractureState, Trajectory};
use crate::geometry::{build_macro_mesh, Mesh};
use crate::io::{write_vtk, Table, VtkField};

pub const THREADS_ENV: &str = "PERFRAC_THREADS";
pub const MANIFEST: &str = "manifest.cfg";

pub const ENERGY_COLUMNS: [&str; 9] =
    ["step", "s", "E0", "H0", "total", "work_accum", "balance_residual", "altmin_iters", "min_v"];
pub const ERROR_COLUMNS: [&str; 6] =
    ["epsilon", "relL2_u", "relL2_u_corrected", "relH1semi_u", "relH1semi_u_corrected", "relL2_v"];
pub const CELL_COLUMNS: [&str; 8] = ["r", "n", "m0_xx", "m0_xy", "m0_yy", "cell_volume", "identity_residual", "skew"];
pub const MMS_COLUMNS: [&str; 5] = ["n", "h", "l2_error", "h1_error", "l2_rate"];

/// Files written by a run and one-line summaries for the console.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// Worker count from `PERFRAC_THREADS`, if set.
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Validation { key: THREADS_ENV.into(), message: format!("`{v}` is not a positive integer") }),
        },
    }
}

/// Runs the configured mode inside a worker pool capped by `PERFRAC_THREADS`.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    pool.install(|| dispatch(config))
}

fn dispatch(config: &RunConfig) -> Result<RunReport> {
    let out = &config.run.out;
    std::fs::create_dir_all(out)?;
    let manifest = out.join(MANIFEST);
    std::fs::write(&manifest, config.serialize())?;
    let mut report = RunReport { files: vec![manifest], summary: Vec::new() };
    match config.run.mode {
        Mode::Cell => run_cell(config, &mut report)?,
        Mode::HomogRun => run_homog(config, &mut report)?,
        Mode::FineRun => run_fine(config, &mut report)?,
        Mode::Validate => run_validate(config, &mut report)?,
        Mode::Mms => run_mms(config, &mut report)?,
    }
    Ok(report)
}

fn run_cell(config: &RunConfig, report: &mut RunReport) -> Result<()> {
    let g = &config.geometry;
    let (basis, t) = cell_tensor(&g.cell())?;
    let mut table = Table::new(&CELL_COLUMNS);
    table.push(vec![
        g.r.into(),
        g.n.into(),
        t.m0.xx.into(),
        t.m0.xy.into(),
        t.m0.yy.into(),
        t.cell_volume.into(),
        t.identity_residual.into(),
        t.skew.into(),
    ]);
    let csv = config.run.out.join("m0.csv");
    table.write(&csv)?;
    let vtk = config.run.out.join("correctors.vtk");
    write_vtk(
        &vtk,
        basis.mesh(),
        &format!("cell correctors r={} n={}", g.r, g.n),
        &[
            VtkField { name: "z1", values: basis.corrector(0).values() },
            VtkField { name: "z2", values: basis.corrector(1).values() },
        ],
    )?;
    report.files.extend([csv, vtk]);
    report.summary.push(format!(
        "M0 = [[{:.10}, {:.3e}], [{:.3e}, {:.10}]], |Y| = {:.10}, identity residual {:.3e}",
        t.m0.xx, t.m0.xy, t.m0.xy, t.m0.yy, t.cell_volume, t.identity_residual
    ));
    Ok(())
}

pub fn energy_table(tr: &Trajectory) -> Table {
    let mut t = Table::new(&ENERGY_COLUMNS);
    for r in &tr.records {
        t.push(vec![
            r.step.into(),
            r.s.into(),
            r.e0.into(),
            r.h0.into(),
            r.total.into(),
            r.work_accum.into(),
            r.balance_residual.into(),
            r.altmin_iters.into(),
            r.min_v.into(),
        ]);
    }
    t
}

pub fn error_table(rows: &[ErrorReport]) -> Table {
    let mut t = Table::new(&ERROR_COLUMNS);
    for r in rows {
        t.push(vec![
            r.epsilon.into(),
            r.rel_l2_u.into(),
            r.rel_l2_u_corrected.into(),
            r.rel_h1semi_u.into(),
            r.rel_h1semi_u_corrected.into(),
            r.rel_l2_v.into(),
        ]);
    }
    t
}

fn initial_damage(config: &RunConfig, mesh: &Arc<Mesh>) -> Field {
    match config.run.notch {
        Some(n) => notch_field(mesh, n.a, n.b, n.width),
        None => Field::constant(mesh, 1.0),
    }
}

/// Evolves and writes `energy.csv` plus `{prefix}_NNNN.vtk` snapshots.
fn evolve_and_write(
    config: &RunConfig,
    solver: &FractureSolver,
    prefix: &str,
    report: &mut RunReport,
) -> Result<Trajectory> {
    let out = &config.run.out;
    let v0 = initial_damage(config, solver.mesh());
    let stride = config.run.vtk_stride;
    let last = config.model.steps;
    let mut written = Vec::new();
    let tr = solver.evolve_with(&config.load, &v0, |st: &FractureState| {
        let due = st.step == last || (stride > 0 && st.step % stride == 0);
        if due {
            let path = out.join(format!("{prefix}_{:04}.vtk", st.step));
            write_vtk(
                &path,
                solver.mesh(),
                &format!("{prefix} step {} s={}", st.step, st.s),
                &[VtkField { name: "u", values: st.u.values() }, VtkField { name: "v", values: st.v.values() }],
            )?;
            written.push(path);
        }
        Ok(())
    })?;
    let csv = out.join("energy.csv");
    energy_table(&tr).write(&csv)?;
    report.files.push(csv);
    report.files.extend(written);
    let f = &tr.final_state;
    report.summary.push(format!(
        "{} steps: final E0 {:.6e}, H0 {:.6e}, min v {:.4}, max |balance residual| {:.3e}, irreversibility {:.1e}",
        last,
        f.e0,
        f.h0,
        f.v.min(),
        tr.max_abs_balance_residual(),
        tr.irreversibility_certificate().max(0.0),
    ));
    Ok(tr)
}

fn homog_solver(config: &RunConfig) -> Result<(CorrectorBasis, HomogTensor, FractureSolver)> {
    let (basis, t) = cell_tensor(&config.geometry.cell())?;
    let mesh = Arc::new(build_macro_mesh(&config.geometry.domain())?);
    let solver = FractureSolver::new(&mesh, t.m0, config.model.clone())?;
    Ok((basis, t, solver))
}

fn run_homog(config: &RunConfig, report: &mut RunReport) -> Result<()> {
    let (_, t, solver) = homog_solver(config)?;
    report.summary.push(format!("M0 = [[{:.10}, {:.3e}], [{:.3e}, {:.10}]]", t.m0.xx, t.m0.xy, t.m0.xy, t.m0.yy));
    evolve_and_write(config, &solver, "homog", report)?;
    Ok(())
}

fn run_fine(config: &RunConfig, report: &mut RunReport) -> Result<()> {
    let g = &config.geometry;
    let solver = fine_solver(&g.domain(), g.epsilon, &g.cell(), config.model.clone())?;
    report.summary.push(format!("perforated mesh: {} nodes, eps = {}", solver.mesh().node_count(), g.epsilon));
    evolve_and_write(config, &solver, "fine", report)?;
    Ok(())
}

/// Final-state comparison of fine runs at every configured scale against one
/// homogenized run; scales are processed concurrently.
pub fn epsilon_sweep(config: &RunConfig) -> Result<Vec<ErrorReport>> {
    let (basis, _, solver) = homog_solver(config)?;
    let v0 = initial_damage(config, solver.mesh());
    let homog = solver.evolve(&config.load, &v0)?.final_state;
    let g = &config.geometry;
    config
        .validate_epsilons
        .par_iter()
        .map(|&eps| {
            let fine = fine_solver(&g.domain(), eps, &g.cell(), config.model.clone())?;
            let fv0 = initial_damage(config, fine.mesh());
            let st = fine.evolve(&config.load, &fv0)?.final_state;
            compare_to_homog(&st.u, &st.v, &homog.u, &homog.v, &basis, eps)
        })
        .collect()
}

fn run_validate(config: &RunConfig, report: &mut RunReport) -> Result<()> {
    let rows = epsilon_sweep(config)?;
    let csv = config.run.out.join("errors.csv");
    error_table(&rows).write(&csv)?;
    report.files.push(csv);
    for r in &rows {
        report.summary.push(format!(
            "eps {:<8} relL2_u {:.4e} (corrected {:.4e}), relH1semi_u {:.4e} (corrected {:.4e}), relL2_v {:.4e}",
            r.epsilon, r.rel_l2_u, r.rel_l2_u_corrected, r.rel_h1semi_u, r.rel_h1semi_u_corrected, r.rel_l2_v
        ));
    }
    Ok(())
}

fn run_mms(config: &RunConfig, report: &mut RunReport) -> Result<()> {
    let rows = convergence_table(&config.mms_levels, config.model.solver_tol.min(1e-10))?;
    let mut table = Table::new(&MMS_COLUMNS);
    for (lvl, rate) in &rows {
        table.push(vec![
            lvl.n.into(),
            lvl.h.into(),
            lvl.l2_error.into(),
            lvl.h1_error.into(),
            rate.unwrap_or(f64::NAN).into(),
        ]);
        report.summary.push(match rate {
            Some(r) => format!("n {:>4}: L2 error {:.4e}, rate {:.3}", lvl.n, lvl.l2_error, r),
            None => format!("n {:>4}: L2 error {:.4e}", lvl.n, lvl.l2_error),
        });
    }
    let csv = config.run.out.join("mms.csv");
    table.write(&csv)?;
    report.files.push(csv);
    Ok(())
}

/// Reads a configuration file, replacing `run.mode` and optionally `run.out`.
pub fn load_config(path: &Path, mode: Mode, out: Option<&Path>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut c = RunConfig::parse(&text)?;
    c.run.mode = mode;
    if let Some(o) = out {
        c.run.out = o.to_path_buf();
    }
    Ok(c)
}

