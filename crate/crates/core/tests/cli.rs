use std::path::Path;
use std::process::{Command, Output};

fn eicsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eicsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn header(path: &Path) -> (String, String) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    (
        lines.next().unwrap().to_string(),
        lines.next().unwrap().to_string(),
    )
}

#[test]
fn gen_scene_then_coverage_on_it() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("street.json");
    let out = eicsim(&[
        "gen-scene",
        "--seed",
        "4",
        "--grid-gap",
        "8",
        "--out",
        scene.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&scene).unwrap();
    assert!(text.starts_with("# config="));

    let cov = dir.path().join("cov");
    let out = eicsim(&[
        "coverage",
        "--scene",
        scene.to_str().unwrap(),
        "--out",
        cov.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (echo, cols) = header(&cov.join("coverage.csv"));
    assert!(echo.starts_with("# config=") && echo.contains("street.json"));
    assert_eq!(
        cols,
        "x,y,pl_true_db,pl_stat_db,pl_simple_db,pl_wei_db,los_flag"
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("coverage\tpoints\t"));
}

#[test]
fn run_all_subset_writes_task_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = eicsim(&[
        "run-all",
        "--seed",
        "2",
        "--grid-gap",
        "5",
        "--tasks",
        "predict-csi,4",
        "--tier",
        "simple",
        "--exact-alloc-limit",
        "1e3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let expected = [
        ("metrics.csv", "task,tier,seed,nmse_mean,nmse_median"),
        ("cdf.csv", "series,value,cumulative_fraction"),
        ("allocation.csv", "t,r,owner"),
        ("allocation_report.csv", "user,throughput"),
    ];
    for (name, cols) in expected {
        assert_eq!(header(&dir.path().join(name)).1, cols, "{name}");
    }
    assert!(!dir.path().join("coverage.csv").exists());
    assert!(!dir.path().join("beam.csv").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("allocate\texact_skipped\t1"));
    assert!(stdout.contains("allocate\tpredicted_simple_t_min\t"));
}

#[test]
fn bad_arguments_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = eicsim(&[
        "run-all",
        "--tasks",
        "teleport",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = eicsim(&[
        "beam",
        "--tier",
        "oracle",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let out = eicsim(&[
        "coverage",
        "--grid-gap",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}
