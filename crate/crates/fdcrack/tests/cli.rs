use std::path::Path;
use std::process::{Command, Output};

fn fdcrack(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdcrack")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdcrack(&["demo", "--set", "nope=1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key `nope`"), "{}", stderr(&o));
}

#[test]
fn config_file_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# comment\nn = 10\nthis is not an assignment\n").unwrap();
    let o = fdcrack(&["convergence", "--config", "run.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run.cfg:3:"), "{}", stderr(&o));
}

#[test]
fn bad_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for set in ["couples=P4/P0", "solver=newton", "n=ten", "gamma0=-1", "jump=1,2,3"] {
        let o = fdcrack(&["convergence", "--set", "couples=P2/P1", "--set", "n=4", "--set", set], dir.path());
        assert_eq!(o.status.code(), Some(1), "{set}: {}", stderr(&o));
    }
    let o = fdcrack(&["convergence", "--set", "solver=uzawa", "--set", "gamma0=0.03", "--set", "n=4"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn convergence_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["convergence", "--set", "couples=P2/P0,P2/P1", "--set", "n=4,8"];
    let a = fdcrack(&args, dir.path());
    let b = fdcrack(&args, dir.path());
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "elem_u,elem_lambda,gamma0,h,n_dofs,rel_l2_pct,rel_h1_pct,rel_lambda_pct,jump_ratio,solver,iters"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4 + 2);
    assert_eq!(rows.iter().filter(|r| r.split(',').nth(3) == Some("rate")).count(), 2);
    assert!(stderr(&a).contains("P2/P1 γ₀ = 0: slopes"));
}

#[test]
fn uzawa_run_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdcrack(
        &["convergence", "-s", "couples=P2/P0", "-s", "n=4", "-s", "solver=uzawa", "-s", "trace=trace.csv", "-o", "conv.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let conv = std::fs::read_to_string(dir.path().join("conv.csv")).unwrap();
    assert!(conv.lines().nth(1).unwrap().contains(",uzawa,"));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("elem_u,elem_lambda,h,iteration,ratio,dual\n"));
    assert!(trace.lines().count() > 2);
}

fn demo_rows(dir: &Path, pressure: &str) -> Vec<[f64; 4]> {
    let o = fdcrack(&["demo", "--set", &format!("pressure={pressure}")], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("# x y ux uy"));
    text.lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(' ').map(|f| f.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3]]
        })
        .collect()
}

#[test]
fn demo_field_is_linear_in_pressure() {
    let dir = tempfile::tempdir().unwrap();
    let one = demo_rows(dir.path(), "1");
    let two = demo_rows(dir.path(), "2");
    let zero = demo_rows(dir.path(), "0");
    assert_eq!(one.len(), 26 * 13);
    let scale = one.iter().map(|r| r[2].hypot(r[3])).fold(0.0, f64::max);
    assert!(scale > 0.0);
    for ((a, b), z) in one.iter().zip(&two).zip(&zero) {
        assert_eq!([a[0], a[1]], [b[0], b[1]]);
        assert!((2.0 * a[2] - b[2]).abs() <= 1e-10 * scale && (2.0 * a[3] - b[3]).abs() <= 1e-10 * scale);
        assert_eq!([z[2], z[3]], [0.0, 0.0]);
    }
    // Clamped sides and bottom.
    for r in &one {
        if r[0] == 0.0 || r[0] == 100.0 || r[1] == 0.0 {
            assert_eq!([r[2], r[3]], [0.0, 0.0], "{r:?}");
        }
    }
}

const SQUARE: &str = "# two triangles, second wound backwards\nv 0 0 0\nv 1 0 0\nv 1 1 0.25\nv 0 1 0\nt 0 1 2\nt 0 3 2\n";

#[test]
fn extend3d_writes_cones() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.txt"), SQUARE).unwrap();
    let o = fdcrack(&["extend3d", "-s", "input=s.txt", "--out", "ext.txt"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("ext.txt")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 6);
    assert_eq!(text.lines().filter(|l| l.starts_with("t ")).count(), 8);
    for l in text.lines().filter(|l| l.starts_with("t ")) {
        assert!(l.split(' ').skip(1).all(|i| i.parse::<usize>().unwrap() < 6), "{l}");
    }

    let flipped = fdcrack(&["extend3d", "-s", "input=s.txt", "-s", "seed_sign=-1"], dir.path());
    assert!(flipped.status.success());
    assert_ne!(flipped.stdout, text.as_bytes());
}

#[test]
fn extend3d_reports_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.txt"), "v 0 0 0\nv 1 0 0\nv 0 1 0\n\nt 0 1 1\n").unwrap();
    let o = fdcrack(&["extend3d", "-s", "input=bad.txt"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.txt:5:"), "{}", stderr(&o));
    let o = fdcrack(&["extend3d", "-s", "input=missing.txt"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = fdcrack(&["extend3d", "-s", "input=bad.txt", "-s", "seed_sign=2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn singular_system_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdcrack(&["convergence", "-s", "couples=P1/P0", "-s", "n=12"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("numerical failure"));
}

#[test]
fn sweep_keeps_failed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdcrack(
        &["robustness", "-s", "couple=P1/P0", "-s", "n=12", "-s", "gammas=0,0.03", "-s", "xa_min=0.4", "-s", "xa_max=0.5", "-s", "xa_step=0.05"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("x_a,elem_u,elem_lambda,gamma0,h,n_dofs,rel_l2_pct,rel_h1_pct,rel_lambda_pct,status\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 2);
    assert!(stderr(&o).contains("γ₀ = 0: "));
}
