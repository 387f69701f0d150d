use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qpart(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpart"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("qpart runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_queue(dir: &Path) {
    let q = r#"{"name":"demo","programs":[
        {"program":"toffoli_n3"},
        {"program":"adder_n4","group":"b"},
        {"program":"simon_n6"},
        {"program":"adder_n10"},
        {"program":"qec_en_n5"}
    ],"usage":{"default":0.2,"b":0.1}}"#;
    std::fs::write(dir.join("queue.json"), q).unwrap();
}

#[test]
fn missing_backend_file_exits_2_and_names_the_path() {
    let dir = TempDir::new().unwrap();
    write_queue(dir.path());
    let o = qpart(
        dir.path(),
        &[
            "allocate",
            "--backend",
            "no-such-device.json",
            "--queue",
            "queue.json",
            "--out",
            "plan.json",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("no-such-device.json"), "{}", stderr(&o));
    assert!(!dir.path().join("plan.json").exists());
}

#[test]
fn validation_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    write_queue(dir.path());
    let cases: [&[&str]; 4] = [
        &[
            "allocate",
            "--backend",
            "heavy-hex-27",
            "--queue",
            "queue.json",
            "--method",
            "bogus",
        ],
        &["tree", "--backend", "heavy-hex-27", "--gamma", "-1"],
        &["tree"],
        &["metrics", "--backend", "heavy-hex-27", "--qubits", "0,0"],
    ];
    for args in cases {
        let o = qpart(dir.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
    let o = qpart(dir.path(), &["--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tree_is_deterministic() {
    let dir = TempDir::new().unwrap();
    for out in ["a.json", "b.json"] {
        let o = qpart(
            dir.path(),
            &["tree", "--backend", "heavy-hex-27", "--seed", "0", "--out", out],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "tree");
    assert_eq!(manifest["config"]["gamma"], 1.0);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "backend = \"heavy-hex-27\"\ngamma = 2.0\nalpha = 0.5\n",
    )
    .unwrap();
    let o = qpart(
        dir.path(),
        &["tree", "--config", "run.toml", "--gamma", "1.5", "--out", "t.json"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("t.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["gamma"], 1.5);
    assert_eq!(manifest["config"]["alpha"], 0.5);
    assert_eq!(manifest["config"]["backend"], "heavy-hex-27");
}

#[test]
fn allocate_then_route_round_trip() {
    let dir = TempDir::new().unwrap();
    write_queue(dir.path());
    let queue_before = std::fs::read(dir.path().join("queue.json")).unwrap();
    for method in ["attractor", "cri", "comdap", "secure-general", "secure-smart"] {
        let plan = format!("plan-{method}.json");
        let o = qpart(
            dir.path(),
            &[
                "allocate",
                "--backend",
                "heavy-hex-27",
                "--queue",
                "queue.json",
                "--method",
                method,
                "--out",
                &plan,
            ],
        );
        assert!(o.status.success(), "{method}: {}", stderr(&o));
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join(&plan)).unwrap()).unwrap();
        let u = v["utilization"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&u));
        let o = qpart(
            dir.path(),
            &[
                "route",
                "--plan",
                &plan,
                "--queue",
                "queue.json",
                "--backend",
                "heavy-hex-27",
            ],
        );
        assert!(o.status.success(), "{method}: {}", stderr(&o));
        let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        for p in r["programs"].as_array().unwrap() {
            let (before, after, swaps) = (
                p["cx_before"].as_u64().unwrap(),
                p["cx_after"].as_u64().unwrap(),
                p["swaps_inserted"].as_u64().unwrap(),
            );
            assert_eq!(after, before + 3 * swaps);
        }
    }
    assert_eq!(std::fs::read(dir.path().join("queue.json")).unwrap(), queue_before);
}

#[test]
fn outputs_never_overwrite_inputs() {
    let dir = TempDir::new().unwrap();
    write_queue(dir.path());
    let before = std::fs::read(dir.path().join("queue.json")).unwrap();
    let o = qpart(
        dir.path(),
        &[
            "allocate",
            "--backend",
            "heavy-hex-27",
            "--queue",
            "queue.json",
            "--out",
            "queue.json",
        ],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert_eq!(std::fs::read(dir.path().join("queue.json")).unwrap(), before);
}

#[test]
fn generated_backend_and_crosstalk_feed_allocation() {
    let dir = TempDir::new().unwrap();
    write_queue(dir.path());
    let o = qpart(
        dir.path(),
        &[
            "gen-backend",
            "--template",
            "heavy-hex-27",
            "--seed",
            "5",
            "--out",
            "dev.json",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = qpart(
        dir.path(),
        &[
            "gen-crosstalk",
            "--backend",
            "dev.json",
            "--k",
            "3",
            "--seed",
            "1",
            "--out",
            "xt.json",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let xt: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("xt.json")).unwrap()).unwrap();
    assert_eq!(xt["entries"].as_array().unwrap().len(), 3);
    let o = qpart(
        dir.path(),
        &[
            "allocate",
            "--backend",
            "dev.json",
            "--queue",
            "queue.json",
            "--method",
            "secure-smart",
            "--crosstalk",
            "xt.json",
            "--out",
            "plan.json",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn bench_smoke_run_writes_parseable_csvs() {
    let dir = TempDir::new().unwrap();
    let o = qpart(
        dir.path(),
        &[
            "bench",
            "--backends",
            "heavy-hex-27",
            "--queues",
            "1",
            "--queue-seed",
            "42",
            "--seeds",
            "0",
            "--methods",
            "all",
            "--crosstalk-random",
            "k=1,count=2,seed=3",
            "--out",
            "report",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = dir.path().join("report");
    for name in ["utilization.csv", "cri.csv", "routing.csv", "timing.csv"] {
        let text = std::fs::read_to_string(report.join(name)).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().expect("header").split(',').collect();
        let mut rows = 0;
        for line in lines {
            assert_eq!(line.split(',').count(), header.len(), "{name}: {line}");
            rows += 1;
        }
        assert!(rows > 0, "{name} has no rows");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(report.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest.is_object());
}
