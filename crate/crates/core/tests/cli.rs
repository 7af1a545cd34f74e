use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pcp-rmhd"))
}

#[test]
fn run_writes_outputs_and_restarts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ot");
    let status = bin()
        .args([
            "run",
            "--problem",
            "orszag_tang",
            "--param",
            "N=10",
            "--param",
            "t_end=0.2",
            "-o",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["config.toml", "run.log", "final.txt", "final.modal"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let text = std::fs::read_to_string(out.join("final.txt")).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("# time=2e-1 Nx=10 Ny=10 gamma="));
    assert!(lines.next().unwrap().starts_with("# problem=orszag_tang"));
    assert_eq!(
        lines.next().unwrap(),
        "# i j x y rho v1 v2 v3 p B1 B2 B3 D m1 m2 m3 E"
    );
    assert_eq!(lines.count(), 100);

    let more = dir.path().join("ot_more");
    let status = bin()
        .args(["run", "--config"])
        .arg(out.join("config.toml"))
        .args(["--param", "t_end=0.3", "--restart"])
        .arg(out.join("final.modal"))
        .arg("-o")
        .arg(&more)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(more.join("final.txt")).unwrap();
    assert!(text.starts_with("# time=3e-1"));
}

#[test]
fn bad_input_exits_with_failure() {
    let out = bin()
        .args(["run", "--problem", "nonexistent"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("problem"));
    let out = bin()
        .args(["run", "--problem", "blast", "--param", "Ba=7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Ba"));
    let out = bin()
        .args(["converge", "--problem", "orszag_tang", "--grids", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn breakdown_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "run",
            "--problem",
            "blast",
            "--param",
            "Ba=2000",
            "--param",
            "N=20",
            "--param",
            "t_end=0.05",
            "--pcp",
            "off",
            "-o",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("breakdown"));
    let log = std::fs::read_to_string(dir.path().join("run.log")).unwrap();
    assert!(log.contains("# breakdown at step"));
}

#[test]
fn converge_and_check_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("conv.txt");
    let out = bin()
        .args([
            "converge",
            "--problem",
            "smooth_sine",
            "--grids",
            "4,8",
            "--param",
            "t_end=0.05",
            "-o",
        ])
        .arg(&table)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "# N l1 l2 order_l1 order_l2");
    assert_eq!(rows[1].split_whitespace().count(), 3);
    assert_eq!(rows[2].split_whitespace().count(), 5);

    let out = bin()
        .args([
            "check",
            "--samples",
            "500",
            "--limiter-samples",
            "50",
            "--fields",
            "10",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("all checks passed"));
}
