use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nlsqfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlsqfem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = "# two uniform levels\nproblem = heat-square\nlevels = 2\n";

#[test]
fn run_prints_table_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.cfg", SMALL);
    let csv = dir.path().join("out.csv");
    let vtk = dir.path().join("out.vtk");
    let out = nlsqfem(&[
        "run",
        &cfg,
        "--csv",
        csv.to_str().unwrap(),
        "--vtk",
        vtk.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 4);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(
        text.starts_with("cycle,n_dof,h,error,functional_sqrt,i_eff,eoc_h,eoc_dof,newton_iters\n")
    );
    assert_eq!(text.lines().count(), 3);
    assert!(fs::read_to_string(&vtk).unwrap().contains("CELL_TYPES"));

    let md = nlsqfem(&["table", csv.to_str().unwrap()]);
    assert_eq!(md.status.code(), Some(0));
    assert_eq!(String::from_utf8(md.stdout).unwrap(), table);
    let again = nlsqfem(&["table", csv.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.cfg", SMALL);
    let out = nlsqfem(&["run", &cfg, "--set", "levels=1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
}

#[test]
fn configuration_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        write(
            dir.path(),
            "unknown.cfg",
            "problem = heat-square\ncolour = blue\n",
        ),
        write(
            dir.path(),
            "degree.cfg",
            "problem = heat-square\ndegree = 7\n",
        ),
        write(
            dir.path(),
            "duplicate.cfg",
            "problem = heat-square\nlevels = 2\nlevels = 3\n",
        ),
        write(dir.path(), "relu.cfg", "problem = relu-lshape\ndelta = 9\n"),
        dir.path()
            .join("missing.cfg")
            .to_string_lossy()
            .into_owned(),
    ];
    for cfg in &cases {
        let out = nlsqfem(&["run", cfg]);
        assert_eq!(
            out.status.code(),
            Some(3),
            "{cfg}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let cfg = write(dir.path(), "ok.cfg", SMALL);
    assert_eq!(
        nlsqfem(&["run", &cfg, "--set", "levels"]).status.code(),
        Some(3)
    );
}

#[test]
fn nonconvergence_exits_with_two_and_keeps_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "a.cfg",
        "problem = heat-square\nlevels = 3\nmax_iters = 4\n",
    );
    let csv = dir.path().join("partial.csv");
    let out = nlsqfem(&["run", &cfg, "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 2);
}

#[test]
fn malformed_csv_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "bad.csv", "not,a,table\n");
    assert_eq!(nlsqfem(&["table", &csv]).status.code(), Some(3));
}

#[test]
fn verify_passes() {
    let out = nlsqfem(&["verify"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 12);
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}
