use std::path::Path;
use std::process::{Command, Output};

fn morphsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphsim"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("strip.json");
    let out = morphsim(&[
        "gen",
        "rect",
        "--len",
        "12",
        "--wid",
        "3",
        "--pitch",
        "1",
        "--deps",
        "0.04",
        "-o",
        s(&design),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let o = dir.path().join(name);
            let out = morphsim(&[
                "simulate",
                s(&design),
                "-o",
                s(&o),
                "--seed",
                "3",
                "--no-timing",
            ]);
            assert!(
                out.status.success(),
                "{}",
                String::from_utf8_lossy(&out.stderr)
            );
            o
        })
        .collect();
    for file in ["out.obj", "report.json", "energy.csv"] {
        let a = std::fs::read(runs[0].join(file)).unwrap();
        let b = std::fs::read(runs[1].join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(runs[0].join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    let radius = report["fits"]["bend"]["radius"].as_f64().unwrap();
    assert!((radius - 2.0 / (3.0 * 0.04)).abs() < 0.5, "radius {radius}");
    let energy = std::fs::read_to_string(runs[0].join("energy.csv")).unwrap();
    assert!(energy.starts_with("step,energy\n"));
}

#[test]
fn grass_generator_echoes_print_speed() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("grass.json");
    let out = morphsim(&["gen", "grass", "--gamma", "45", "-o", s(&design)]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("delta_eps: 0.06"), "{stdout}");
    assert!(stdout.contains("top_speed_mm_min: 950.0"), "{stdout}");
    assert!(design.exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(morphsim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(morphsim(&["verify", "7"]).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(morphsim(&["simulate", s(&missing)]).status.code(), Some(1));
    let design = dir.path().join("d.json");
    assert!(
        morphsim(&["gen", "rect", "--len", "4", "--wid", "2", "-o", s(&design)])
            .status
            .success()
    );
    let out = morphsim(&["simulate", s(&design), "-o", s(dir.path()), "--k-max", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(morphsim(&["--help"]).status.code(), Some(0));
}
