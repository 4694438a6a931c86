use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

fn socialnav(out_env: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socialnav"))
        .args(args)
        .env("SOCIALNAV_OUT_DIR", out_env)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// The single stderr line: `error kind=<k> code=<n> message="..."`.
fn error_line(o: &Output) -> (String, i32) {
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {text}");
    let fields: Vec<&str> = lines[0].splitn(4, ' ').collect();
    assert_eq!(fields[0], "error");
    let kind = fields[1].strip_prefix("kind=").unwrap().to_string();
    let code: i32 = fields[2].strip_prefix("code=").unwrap().parse().unwrap();
    let message: String = serde_json::from_str(fields[3].strip_prefix("message=").unwrap()).unwrap();
    assert!(!message.is_empty());
    assert_eq!(o.status.code(), Some(code));
    (kind, code)
}

#[test]
fn cluster_prints_two_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let o = socialnav(dir.path(), &["cluster", scenario("two_pairs").to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("groups 2\n"));
    assert!(text.contains("members=1,2\n") && text.contains("members=3,4\n"));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("two_pairs.cluster.txt")).unwrap(),
        text
    );
}

#[test]
fn field_grid_has_header_and_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = socialnav(
        dir.path(),
        &["field", scenario("two_pairs").to_str().unwrap(), "--resolution", "0.5"],
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("two_pairs.field.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y,vx,vy,valid"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    // 14 x 8 m at 0.5 m, fencepost inclusive.
    assert_eq!(rows.len(), 29 * 17);
    assert_eq!((rows[1][0], rows[1][1]), (0.5, 0.0));
    assert!(rows.iter().any(|r| r[4] == 0.0) && rows.iter().any(|r| r[4] == 1.0));
}

#[test]
fn compare_reports_three_planners() {
    let dir = tempfile::tempdir().unwrap();
    let o = socialnav(
        dir.path(),
        &[
            "compare",
            scenario("three_groups").to_str().unwrap(),
            "--algos",
            "rrt,rrtstar,vmd",
            "--runs",
            "2",
        ],
    );
    assert!(o.status.success());
    let labels: Vec<String> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().next().unwrap().to_string())
        .collect();
    assert_eq!(labels, ["RRT", "RRT*", "VMD-RRT*"]);
}

#[test]
fn plan_writes_path_and_tree() {
    let dir = tempfile::tempdir().unwrap();
    let o = socialnav(
        dir.path(),
        &["plan", scenario("two_pairs").to_str().unwrap(), "--seed", "5"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let path = std::fs::read_to_string(dir.path().join("two_pairs.path.csv")).unwrap();
    assert!(path.starts_with("x,y\n"));
    let tree = std::fs::read_to_string(dir.path().join("two_pairs.tree.csv")).unwrap();
    assert!(tree.starts_with("node_id,parent_id,x,y,cost\n"));
}

#[test]
fn outputs_repeat_for_a_seed() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (regroup, three) = (scenario("regroup"), scenario("three_groups"));
    let args = [
        "cruise",
        regroup.to_str().unwrap(),
        "--seed",
        "4",
        "--param",
        "r_rob=1.5",
    ];
    let (oa, ob) = (socialnav(a.path(), &args), socialnav(b.path(), &args));
    assert_eq!(oa.status.code(), ob.status.code());
    let log = |d: &Path| std::fs::read(d.join("regroup.s4.cruise.jsonl")).unwrap();
    assert_eq!(log(a.path()), log(b.path()));
    let plan = ["plan", three.to_str().unwrap(), "--seed", "9", "--algo", "rrtstar"];
    socialnav(a.path(), &plan);
    socialnav(b.path(), &plan);
    for f in ["three_groups.path.csv", "three_groups.tree.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
}

#[test]
fn out_flag_beats_environment() {
    let (env_dir, flag_dir) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let o = socialnav(
        env_dir.path(),
        &[
            "oop",
            scenario("two_pairs").to_str().unwrap(),
            "--out",
            flag_dir.path().to_str().unwrap(),
        ],
    );
    assert!(o.status.success());
    assert!(flag_dir.path().join("two_pairs.oop.txt").exists());
    assert!(!env_dir.path().join("two_pairs.oop.txt").exists());
}

#[test]
fn batch_flags_unreadable_scenarios_in_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    let o = socialnav(
        dir.path(),
        &[
            "batch",
            scenario("two_pairs").to_str().unwrap(),
            missing.to_str().unwrap(),
            "--runs",
            "2",
        ],
    );
    assert!(o.status.success());
    let runs = std::fs::read_to_string(dir.path().join("batch.runs.txt")).unwrap();
    assert_eq!(runs.lines().count(), 5);
    assert_eq!(runs.lines().filter(|l| l.contains(" error ")).count(), 2);
}

#[test]
fn failures_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let two = scenario("two_pairs");
    let two = two.to_str().unwrap();

    let (kind, usage) = error_line(&socialnav(dir.path(), &["cluster", two, "--frobnicate"]));
    assert_eq!(kind, "usage");
    let (kind, bad_param) = error_line(&socialnav(dir.path(), &["cruise", two, "--param", "nope=1"]));
    assert_eq!((kind.as_str(), bad_param), ("usage", usage));

    std::fs::write(dir.path().join("broken.toml"), "size = [1.0]\n").unwrap();
    let broken = dir.path().join("broken.toml");
    let (kind, bad_scenario) = error_line(&socialnav(dir.path(), &["oop", broken.to_str().unwrap()]));
    assert_eq!(kind, "scenario");

    let (kind, planner) = error_line(&socialnav(dir.path(), &["plan", two, "--param", "max_iter=5"]));
    assert_eq!(kind, "planner");

    let (kind, run) = error_line(&socialnav(dir.path(), &["cruise", two, "--param", "t_max=3"]));
    assert_eq!(kind, "run");

    let codes = [usage, bad_scenario, planner, run];
    let distinct: std::collections::BTreeSet<i32> = codes.iter().copied().collect();
    assert_eq!(distinct.len(), codes.len(), "{codes:?}");
    assert!(codes.iter().all(|&c| c != 0));
}
