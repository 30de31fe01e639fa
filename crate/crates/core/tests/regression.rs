//! Baselines frozen from the first validated runs.

use std::sync::Arc;

use perfrac::fem::Tensor2;
use perfrac::fracture::{notch_field, FractureSolver, LoadProgram, ModelParams};
use perfrac::geometry::{build_macro_mesh, MacroDomain};
use perfrac::harness::{epsilon_sweep, RunConfig};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

#[test]
fn notched_failure_profile() {
    let mesh = Arc::new(build_macro_mesh(&MacroDomain::unit_square(32)).unwrap());
    let solver = FractureSolver::new(&mesh, Tensor2::isotropic(0.8), ModelParams { steps: 20, ..Default::default() }).unwrap();
    let tr = solver.evolve(&LoadProgram::uniaxial(3.0), &notch_field(&mesh, [0.0, 0.5], [0.2, 0.5], 1e-9)).unwrap();
    let rec = &tr.records;
    let peak = rec.iter().max_by(|a, b| a.e0.total_cmp(&b.e0)).unwrap();
    assert_eq!(peak.step, 14);
    assert!(close(peak.e0, 5.059_391_073_3e-1, 1e-6), "{}", peak.e0);
    let last = rec.last().unwrap();
    assert!(close(last.e0, 1.033_320_243_0e-1, 1e-6), "{}", last.e0);
    assert!(close(last.h0, 1.160_768_447_7, 1e-6), "{}", last.h0);
    // Surface energy only grows once the load is on.
    assert!(rec[1..].windows(2).all(|w| w[1].h0 >= w[0].h0));
}

#[test]
fn coarse_epsilon_sweep() {
    let mut c = RunConfig::default();
    c.geometry.n = 16;
    c.model.steps = 2;
    c.load = LoadProgram::uniaxial(0.1);
    c.validate_epsilons = vec![0.25, 0.125];
    let rows = epsilon_sweep(&c).unwrap();
    let frozen = [(2.204_684_020_6e-2, 4.328_759_487_8e-2), (1.118_231_520_7e-2, 3.062_326_400_9e-2)];
    for (r, (l2, h1c)) in rows.iter().zip(frozen) {
        assert!(close(r.rel_l2_u, l2, 1e-6), "{r:?}");
        assert!(close(r.rel_h1semi_u_corrected, h1c, 1e-5), "{r:?}");
    }
}
