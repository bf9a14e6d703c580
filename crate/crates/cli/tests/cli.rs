use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn vic(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vic"))
        .args(args)
        .current_dir(dir)
        .env_remove("VIC_OUT_ROOT")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = vic(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    vic(dir, args).status.code().expect("exit code")
}

/// xorshift, enough for fixtures
struct Noise(u64);

impl Noise {
    fn next(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Fixture {
        let dir = TempDir::new().unwrap();
        let root = dir.path();
        fs::write(
            root.join("uncorrelated.json"),
            r#"{"corr_xx": [[1, 0], [0, 1]], "corr_xy": [0.4, 0.5], "n": 500, "seed": 1}"#,
        )
        .unwrap();
        fs::write(
            root.join("cells.json"),
            r#"{"000": [9, 3], "001": [2, 5], "010": [4, 4], "011": [1, 6],
                "100": [7, 1], "101": [3, 3], "110": [6, 2], "111": [2, 2]}"#,
        )
        .unwrap();
        let mut z = Noise(0x9e3779b97f4a7c15);
        let mut csv = String::from("a,b,c,y\n");
        for _ in 0..400 {
            let x: Vec<f64> = (0..3).map(|_| 2.0 * z.next() - 1.0).collect();
            let logit = 0.3 + 2.0 * x[0] - 1.2 * x[1] + 0.4 * x[2];
            let y = if z.next() < 1.0 / (1.0 + (-logit).exp()) { 1 } else { -1 };
            csv.push_str(&format!("{},{},{},{y}\n", x[0], x[1], x[2]));
        }
        fs::write(root.join("logit.csv"), csv).unwrap();
        fs::write(root.join("sep.csv"), "a,y\n-2,-1\n-1,-1\n1,1\n2,1\n").unwrap();
        fs::write(root.join("bad.csv"), "a,y\n1,2\nx,3\n").unwrap();
        Fixture { dir }
    }

    fn root(&self) -> &Path {
        self.dir.path()
    }

    fn out(&self, name: &str) -> PathBuf {
        self.root().join(name)
    }
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json" && p.file_name().unwrap() != "config.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

const LOGISTIC: &[&str] = &[
    "--data",
    "logit.csv",
    "--n-per-round",
    "200",
    "--box-scale",
    "2",
    "--n-shuffles",
    "3",
];

#[test]
fn command_matrix() {
    let f = Fixture::new();
    let r = f.root();
    let cases: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        (
            "gen",
            vec!["--synthetic", "uncorrelated.json"],
            vec!["data.csv", "population_moments.json"],
        ),
        ("gen", vec!["--cells", "cells.json"], vec!["data.csv"]),
        (
            "ingest",
            vec!["--data", "logit.csv"],
            vec!["data.csv", "covariance.json", "summary.json"],
        ),
        ("fit-linear", vec!["--synthetic", "uncorrelated.json"], vec!["fit.json"]),
        ("fit-logistic", vec!["--data", "logit.csv"], vec!["fit.json"]),
        (
            "rashomon-linear",
            vec!["--synthetic", "uncorrelated.json"],
            vec!["rashomon_ellipsoid.json"],
        ),
        (
            "vic",
            vec![
                "--synthetic",
                "uncorrelated.json",
                "--boundary",
                "50",
                "--interior",
                "50",
            ],
            vec!["cloud.csv", "cloud.json", "vic_ellipsoid.json"],
        ),
        (
            "rashomon-logistic",
            LOGISTIC.to_vec(),
            vec!["cloud.csv", "cloud.json", "sampler.json"],
        ),
        (
            "rashomon-tree",
            vec!["--cells", "cells.json", "--epsilon", "0.1"],
            vec!["trees.csv", "cloud.csv", "cloud.json"],
        ),
        (
            "tune",
            [LOGISTIC, &["--plateau-threshold", "1"]].concat(),
            vec!["tune.csv", "tune.json"],
        ),
        (
            "test",
            vec!["--synthetic", "uncorrelated.json", "--feature", "x2"],
            vec!["test.json"],
        ),
        (
            "linear",
            vec!["--synthetic", "uncorrelated.json", "--boundary", "100"],
            vec!["cloud.csv", "vid.svg", "bounds.csv"],
        ),
        (
            "logistic",
            LOGISTIC.to_vec(),
            vec!["cloud.csv", "vid.svg", "bounds.csv"],
        ),
        (
            "tree",
            vec!["--cells", "cells.json", "--epsilon", "0.1"],
            vec!["trees.csv", "vid.svg", "bounds.csv"],
        ),
    ];
    for (k, (cmd, args, files)) in cases.iter().enumerate() {
        let out = f.out(&format!("m{k}"));
        let mut full = vec![*cmd];
        full.extend(args);
        full.extend(["--out", out.to_str().unwrap()]);
        ok(r, &full);
        let m = manifest(&out);
        assert_eq!(m["command"], *cmd);
        for name in files {
            assert!(out.join(name).exists(), "{cmd}: missing {name}");
            assert!(m["artifacts"][name].is_string(), "{cmd}: {name} not in manifest");
        }
    }
    // vid and bounds read an existing cloud
    let cloud = f.out("m7").join("cloud.csv");
    let cloud = cloud.to_str().unwrap();
    let vid_out = f.out("vid");
    ok(
        r,
        &[
            "vid",
            "--cloud",
            cloud,
            "--features",
            "a,3",
            "--clusters",
            "2",
            "--out",
            vid_out.to_str().unwrap(),
        ],
    );
    let svg = fs::read_to_string(vid_out.join("vid.svg")).unwrap();
    assert_eq!(svg.matches("<g id=\"panel-").count(), 2);
    ok(
        r,
        &[
            "vid",
            "--cloud",
            cloud,
            "--format",
            "csv",
            "--out",
            vid_out.to_str().unwrap(),
        ],
    );
    assert!(fs::read_to_string(vid_out.join("vid.csv"))
        .unwrap()
        .starts_with("row_feature,col_feature,x,y,cluster"));
    let b_out = f.out("bounds");
    ok(r, &["bounds", "--cloud", cloud, "--out", b_out.to_str().unwrap()]);
    let bounds = fs::read_to_string(b_out.join("bounds.csv")).unwrap();
    assert_eq!(bounds.lines().next(), Some("feature,upper,lower"));
    assert_eq!(bounds.lines().count(), 4);
    assert!(manifest(&b_out)["inputs"].as_object().unwrap().len() == 2);
}

#[test]
fn linear_run_matches_closed_form() {
    let f = Fixture::new();
    let out = f.out("uncorrelated");
    ok(
        f.root(),
        &[
            "linear",
            "--synthetic",
            "uncorrelated.json",
            "--epsilon",
            "0.05",
            "--boundary",
            "2000",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    let e: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("vic_ellipsoid.json")).unwrap()).unwrap();
    let center: Vec<f64> = serde_json::from_value(e["closed_form"]["center"].clone()).unwrap();
    let radii: Vec<f64> = serde_json::from_value(e["closed_form"]["radii"].clone()).unwrap();
    assert!((center[0] - 0.32).abs() < 1e-12 && (center[1] - 0.5).abs() < 1e-12);
    assert!((radii[0] - 0.13740).abs() < 1e-5 && (radii[1] - 0.17176).abs() < 1e-5);
    let cloud = fs::read_to_string(out.join("cloud.csv")).unwrap();
    assert_eq!(cloud.lines().next(), Some("loss,beta_x1,beta_x2,mr_x1,mr_x2"));
    assert_eq!(cloud.lines().count(), 2001);
    assert_eq!(
        fs::read_to_string(out.join("vid.svg"))
            .unwrap()
            .matches("<g id=\"panel-")
            .count(),
        2
    );
}

#[test]
fn reruns_are_byte_identical() {
    let f = Fixture::new();
    let r = f.root();
    let runs: Vec<Vec<&str>> = vec![
        vec![
            "linear",
            "--synthetic",
            "uncorrelated.json",
            "--boundary",
            "300",
            "--interior",
            "300",
            "--seed",
            "4",
        ],
        [&["logistic"], LOGISTIC, &["--seed", "4"]].concat(),
        vec!["tree", "--cells", "cells.json", "--epsilon", "0.2", "--seed", "4"],
    ];
    for (k, args) in runs.iter().enumerate() {
        let a = f.out(&format!("a{k}"));
        let b = f.out(&format!("b{k}"));
        ok(r, &[args.as_slice(), &["--out", a.to_str().unwrap()]].concat());
        ok(r, &[args.as_slice(), &["--out", b.to_str().unwrap()]].concat());
        assert_eq!(artifacts(&a), artifacts(&b), "{args:?}");
        assert_eq!(manifest(&a)["artifacts"], manifest(&b)["artifacts"]);
        // replaying the recorded config reproduces the run
        let c = f.out(&format!("c{k}"));
        let config = a.join("config.json");
        ok(
            r,
            &[
                args[0],
                "--config",
                config.to_str().unwrap(),
                "--out",
                c.to_str().unwrap(),
            ],
        );
        assert_eq!(artifacts(&a), artifacts(&c), "{args:?} replay");
    }
}

#[test]
fn master_seed_changes_sampled_artifacts_only() {
    let f = Fixture::new();
    let r = f.root();
    let a = f.out("s1");
    let b = f.out("s2");
    let base = ["vic", "--synthetic", "uncorrelated.json", "--boundary", "100"];
    ok(r, &[&base[..], &["--seed", "1", "--out", a.to_str().unwrap()]].concat());
    ok(r, &[&base[..], &["--seed", "2", "--out", b.to_str().unwrap()]].concat());
    let read = |d: &Path, n: &str| fs::read(d.join(n)).unwrap();
    assert_ne!(read(&a, "cloud.csv"), read(&b, "cloud.csv"));
    assert_eq!(read(&a, "vic_ellipsoid.json"), read(&b, "vic_ellipsoid.json"));
    let m = manifest(&a);
    assert!(m["stage_seeds"]["vic"].is_u64());
    assert_eq!(m["master_seed"], 1);
}

#[test]
fn flags_override_config_file() {
    let f = Fixture::new();
    let r = f.root();
    fs::write(
        r.join("cfg.json"),
        r#"{"synthetic": "uncorrelated.json", "epsilon": 0.2, "seed": 9}"#,
    )
    .unwrap();
    let out = f.out("cfg");
    ok(
        r,
        &[
            "fit-linear",
            "--config",
            "cfg.json",
            "--epsilon",
            "0.1",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["epsilon"], 0.1);
    let m = manifest(&out);
    assert_eq!(m["config"]["epsilon"], 0.1);
    assert_eq!(m["master_seed"], 9);
}

#[test]
fn out_root_env_var_sets_default_directory() {
    let f = Fixture::new();
    let root = f.out("root");
    let out = Command::new(env!("CARGO_BIN_EXE_vic"))
        .args(["fit-linear", "--synthetic", "uncorrelated.json"])
        .current_dir(f.root())
        .env("VIC_OUT_ROOT", &root)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(root.join("fit-linear").join("fit.json").exists());
}

#[test]
fn exit_codes_by_error_class() {
    let f = Fixture::new();
    let r = f.root();
    let o = f.out("err");
    let o = o.to_str().unwrap();
    // configuration and usage
    assert_eq!(
        code(
            r,
            &[
                "fit-linear",
                "--synthetic",
                "uncorrelated.json",
                "--epsilon",
                "0",
                "--out",
                o
            ]
        ),
        1
    );
    assert_eq!(code(r, &["fit-linear", "--out", o]), 1);
    assert_eq!(code(r, &["no-such-command"]), 1);
    assert_eq!(code(r, &["vic", "--boundary", "many"]), 1);
    fs::write(r.join("typo.json"), r#"{"epsilom": 0.1}"#).unwrap();
    let typo = vic(r, &["vic", "--config", "typo.json", "--out", o]);
    assert_eq!(typo.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&typo.stderr).contains("epsilom"));
    assert_eq!(
        code(r, &["test", "--data", "logit.csv", "--feature", "zz", "--out", o]),
        1
    );
    // data
    assert_eq!(code(r, &["ingest", "--data", "missing.csv", "--out", o]), 2);
    let bad = vic(r, &["ingest", "--data", "bad.csv", "--out", o]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error: data:"));
    assert_eq!(
        code(r, &["fit-logistic", "--synthetic", "uncorrelated.json", "--out", o]),
        2
    );
    // numerical
    assert_eq!(code(r, &["fit-logistic", "--data", "sep.csv", "--out", o]), 3);
    // help is not an error
    assert_eq!(code(r, &["--help"]), 0);
}
