//! End-to-end tests of the `particle-dg` binary.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_particle-dg"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_writes_csv() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("heat.csv");
    let cfg = write_config(
        dir.path(),
        "heat.cfg",
        &format!("scenario = heat\ncells_per_dim = 30\nt_end = 2.05\noutput = {}\n", csv.display()),
    );
    let out = binary().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("mean iterations"));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,time,mass,px,kinetic,energy,fisher,dissipation,iterations");
    assert_eq!(lines.len(), 1 + 6);
    let last: Vec<&str> = lines[6].split(',').collect();
    assert_eq!(last.len(), 9);
    assert_eq!(last[0], "5");
    // fisher and dissipation are blank for aggregation-diffusion
    assert_eq!((last[6], last[7]), ("", ""));
    let mass0: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    let mass5: f64 = last[2].parse().unwrap();
    assert_eq!(mass0, mass5);
}

#[test]
fn landau_csv_is_deterministic_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "2", "1"] {
        let csv = dir.path().join(format!("m{}.csv", outputs.len()));
        let cfg = write_config(
            dir.path(),
            "m.cfg",
            &format!(
                "scenario = landau_maxwell\ncells_per_dim = 10\nt_end = 0.01\ndiag_every = 2\noutput = {}\n",
                csv.display()
            ),
        );
        let out = binary().env("PARTICLE_DG_THREADS", threads).args(["run", "--config"]).arg(&cfg).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.starts_with("step,time,mass,px,py,kinetic,energy,fisher,dissipation,iterations\n"));
    // energy only on the cadence, fisher on every step after the first
    let row1: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row1[6], "");
    assert!(!row1[7].is_empty() && !row1[8].is_empty());
}

#[test]
fn check_passes_for_default_heat() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "heat.cfg", "# defaults\nscenario = heat\n");
    let out = binary().args(["check", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{text}");
}

#[test]
fn check_failure_exits_one() {
    // A one-node rule is not accurate enough for the identity check.
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "pm.cfg", "scenario = porous_medium\nquadrature_nodes = 1\n");
    let out = binary().args(["check", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("FAIL dg_identity"));
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    for (name, text) in [
        ("neg.cfg", "scenario = heat\ndt = -0.01\n"),
        ("unknown.cfg", "scenario = heat\ncolour = blue\n"),
        ("missing.cfg", "dt = 0.01\n"),
    ] {
        let cfg = write_config(dir.path(), name, text);
        let out = binary().args(["check", "--config"]).arg(&cfg).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("config error"), "{name}");
    }
    let out = binary().args(["run", "--config", "/nonexistent/x.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = binary().env("PARTICLE_DG_THREADS", "zero").args(["run", "--config", "/nonexistent/x.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn converge_with_single_resolution_has_no_orders() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "heat.cfg", "scenario = heat\nt_end = 2.02\n");
    let out = binary().args(["converge", "--config"]).arg(&cfg).args(["--M", "30"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(!stdout(&out).contains("orders"));
    let out = binary().args(["converge", "--config"]).arg(&cfg).args(["--M", "30,40"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("orders"));
}
