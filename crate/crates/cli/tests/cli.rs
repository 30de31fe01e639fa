use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn perfrac(args: &[&str], dir: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_perfrac"));
    cmd.args(args).current_dir(dir).env_remove("PERFRAC_THREADS");
    if let Some(t) = threads {
        cmd.env("PERFRAC_THREADS", t);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn cell_mode_writes_into_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), "# small cell\ngeometry.r = 0.2\ngeometry.n = 8\n").unwrap();
    let o = perfrac(&["cell", "--config", "c.cfg", "--out", "res"], dir.path(), Some("2"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("M0"));
    for f in ["m0.csv", "correctors.vtk", "manifest.cfg"] {
        assert!(dir.path().join("res").join(f).exists(), "{f}");
    }
    let manifest = fs::read_to_string(dir.path().join("res/manifest.cfg")).unwrap();
    assert!(manifest.contains("run.mode = cell"));
    assert!(manifest.contains("model.gamma = "));
}

#[test]
fn quiet_suppresses_stdout() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), "mms.levels = 4, 8\n").unwrap();
    let o = perfrac(&["mms", "--config", "c.cfg", "--out", ".", "--quiet"], dir.path(), None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    assert!(dir.path().join("mms.csv").exists());
}

#[test]
fn errors_exit_nonzero_with_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "geometry.r = 0.25\ngeometry.n = eight\n").unwrap();
    let o = perfrac(&["cell", "--config", "bad.cfg"], dir.path(), None);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("PARSE_ERROR") && stderr(&o).contains('2'), "{}", stderr(&o));

    fs::write(dir.path().join("r.cfg"), "geometry.r = 0.6\n").unwrap();
    let o = perfrac(&["cell", "--config", "r.cfg"], dir.path(), None);
    assert!(stderr(&o).contains("VALIDATION_ERROR") && stderr(&o).contains("geometry.r"), "{}", stderr(&o));

    let o = perfrac(&["cell", "--config", "missing.cfg"], dir.path(), None);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing.cfg"));

    fs::write(dir.path().join("ok.cfg"), "geometry.n = 8\n").unwrap();
    let o = perfrac(&["cell", "--config", "ok.cfg"], dir.path(), Some("zero"));
    assert!(stderr(&o).contains("PERFRAC_THREADS"), "{}", stderr(&o));

    let o = perfrac(&["explode", "--config", "ok.cfg"], dir.path(), None);
    assert!(!o.status.success());
}
