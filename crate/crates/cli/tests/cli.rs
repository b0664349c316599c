use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_qsap");

const TINY: &str = "\
cpd 1
positions 2
rotamers 2 2
unary 1 1 1
unary 2 2 2
pair 1 1 2 2 3
pair 1 2 2 1 1
end
";

fn qsap(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_tiny(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.cpd");
    fs::write(&path, TINY).unwrap();
    path
}

#[test]
fn solve_writes_solution_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_tiny(dir.path());
    let out = qsap(&["solve", path.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let sol = fs::read_to_string(dir.path().join("tiny.cpd.sol")).unwrap();
    let lines: Vec<&str> = sol.lines().collect();
    assert_eq!(lines[0], "objective 1");
    assert!(lines[1].starts_with("relaxation "));
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("choose 1 "));
    assert!(lines[3].starts_with("choose 2 "));

    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("tiny,2,4,1,"), "stdout: {stdout}");
    assert!(stdout.contains("solution written to"));
}

#[test]
fn solve_honors_out_and_params_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_tiny(dir.path());
    let params = dir.path().join("params.json");
    fs::write(&params, r#"{"rho": 5.0, "stable_t": 4}"#).unwrap();
    let sol = dir.path().join("custom.sol");
    let out = qsap(&[
        "solve",
        path.to_str().unwrap(),
        "--out",
        sol.to_str().unwrap(),
        "--params-json",
        params.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(fs::read_to_string(&sol).unwrap().starts_with("objective 1\n"));
}

#[test]
fn oracle_reports_optimum_and_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_tiny(dir.path());
    let out = qsap(&["oracle", path.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("optimum 1\n"));
    assert!(stdout.contains("count 2\n"));
    // lexicographically smallest optimum: rotamers (1,1)
    assert!(stdout.contains("choose 1 1\n"));
    assert!(stdout.contains("choose 2 1\n"));
}

#[test]
fn oracle_cap_exceeded_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_tiny(dir.path());
    let out = qsap(&["oracle", path.to_str().unwrap(), "--cap", "3"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn missing_input_exits_2() {
    let out = qsap(&["solve", "/no/such/file.cpd"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cpd");
    fs::write(&path, "cpd 1\npositions zero\nend\n").unwrap();
    let out = qsap(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = qsap(&[
            "gen",
            "--n",
            "3",
            "--count",
            "2",
            "--seed",
            "7",
            "--outdir",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for name in ["gen_n3_s7.cpd", "gen_n3_s8.cpd"] {
        let left = fs::read(a.path().join(name)).unwrap();
        let right = fs::read(b.path().join(name)).unwrap();
        assert!(!left.is_empty());
        assert_eq!(left, right, "{name} differs between runs");
    }
}

#[test]
fn bench_table_refs_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny(dir.path());
    let gen = qsap(&[
        "gen",
        "--n",
        "3",
        "--seed",
        "11",
        "--outdir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(gen.status.success());

    let refs = dir.path().join("refs.txt");
    fs::write(&refs, "tiny 1\n").unwrap();
    let csv = dir.path().join("out.csv");
    let out = qsap(&[
        "bench",
        dir.path().to_str().unwrap(),
        "--refs",
        refs.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("tiny"));
    assert!(stdout.contains("gen_n3_s11"));
    // the tiny reference equals the solver objective, so the ratio is 100%
    assert!(stdout.contains("100.00"));
    assert!(stdout.contains("summary: 2 instances"));

    let csv_text = fs::read_to_string(&csv).unwrap();
    let mut lines = csv_text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "name,n,m,objective,relaxation,ratio_pct,time_ms,reason,outer_iters,inner_iters"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn bench_keeps_going_past_broken_instances() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny(dir.path());
    fs::write(dir.path().join("broken.cpd"), "not an instance\n").unwrap();
    let out = qsap(&["bench", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("error(2)"));
    assert!(stdout.contains("summary: 2 instances"));
}

#[test]
fn json_instances_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let text_path = write_tiny(dir.path());
    let parsed = qsap_core_parse(&fs::read_to_string(&text_path).unwrap());
    let json_path = dir.path().join("tiny.json");
    fs::write(&json_path, parsed).unwrap();
    let out = qsap(&["oracle", json_path.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("optimum 1\n"));
}

fn qsap_core_parse(text: &str) -> String {
    let inst = qsap_core::parse_instance(text).unwrap();
    qsap_core::serialize_json(&inst)
}
