use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use edgeuq::calibration::CalibrationResult;
use edgeuq_cli::commands::{cmd_calibrate, cmd_eval, cmd_loop, cmd_replay, cmd_simulate};
use edgeuq_cli::config::RunConfig;
use edgeuq::ErrorClass;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn example_text() -> String {
    fs::read_to_string(root().join("configs/example.toml")).unwrap()
}

fn config_with(edits: &[(&str, &str)]) -> RunConfig {
    let mut text = example_text();
    for (from, to) in edits {
        assert!(text.contains(from), "{from} not in example config");
        text = text.replacen(from, to, 1);
    }
    RunConfig::parse(&text).unwrap()
}

fn synthetic() -> PathBuf {
    root().join("data/synthetic.csv")
}

fn key_values(path: &Path) -> Vec<(String, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once(" = ").expect("key = value line");
            (k.to_owned(), v.to_owned())
        })
        .collect()
}

fn value(kv: &[(String, String)], key: &str) -> String {
    kv.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("missing {key}")).1.clone()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn calibrate_reports_and_is_idempotent() {
    let cfg = config_with(&[]);
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cmd_calibrate(&cfg, &synthetic(), &a).unwrap();
    cmd_calibrate(&cfg, &synthetic(), &b).unwrap();
    assert_eq!(dir_bytes(&a), dir_bytes(&b));

    let kv = key_values(&a.join("report.txt"));
    let picp: f64 = value(&kv, "picp").parse().unwrap();
    assert!((picp - 0.9).abs() < 0.03, "{picp}");
    assert_eq!(value(&kv, "evaluated_on"), "test");
    assert_eq!(value(&kv, "calibration.upper_exceedances"), "100");
    for f in ["f.model", "u.model", "l.model", "calibration.txt", "d1.csv", "d0.csv", "report_table.txt"] {
        assert!(a.join(f).is_file(), "{f}");
    }
}

#[test]
fn eval_on_calibration_csv_matches_stored_counts() {
    let cfg = config_with(&[]);
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("m");
    cmd_calibrate(&cfg, &synthetic(), &model).unwrap();
    let stored = CalibrationResult::<f64>::from_text(&fs::read_to_string(model.join("calibration.txt")).unwrap()).unwrap();

    let (e1, e2) = (tmp.path().join("e1"), tmp.path().join("e2"));
    let r = cmd_eval(&cfg, &model, &model.join("cal.csv"), &e1).unwrap();
    assert_eq!(r.upper_exceedances, stored.upper_exceedances);
    assert_eq!(r.lower_exceedances, stored.lower_exceedances);
    assert_eq!(r.covered, stored.covered());
    cmd_eval(&cfg, &model, &model.join("cal.csv"), &e2).unwrap();
    assert_eq!(dir_bytes(&e1), dir_bytes(&e2));

    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "x,y\n").unwrap();
    let e3 = tmp.path().join("e3");
    assert!(cmd_eval(&cfg, &model, &empty, &e3).is_err());
    assert!(!e3.join("eval_report.txt").exists());

    let other_gamma = config_with(&[("gamma = 0.9", "gamma = 0.8")]);
    let err = cmd_eval(&other_gamma, &model, &model.join("cal.csv"), &e3).err().unwrap();
    assert!(err.detail.contains("calibration.gamma"));
}

#[test]
fn eval_detects_swapped_bound_model() {
    let tmp = tempfile::tempdir().unwrap();
    let (m1, m2) = (tmp.path().join("m1"), tmp.path().join("m2"));
    cmd_calibrate(&config_with(&[]), &synthetic(), &m1).unwrap();
    cmd_calibrate(&config_with(&[("seed = 8", "seed = 9")]), &synthetic(), &m2).unwrap();
    fs::copy(m2.join("u.model"), m1.join("u.model")).unwrap();
    let err = cmd_eval(&config_with(&[]), &m1, &synthetic(), &tmp.path().join("e")).err().unwrap();
    assert_eq!(err.class, ErrorClass::Calibration);
}

#[test]
fn segmented_calibration_by_quantile_bins() {
    let cfg = config_with(&[(
        "# Optional per-segment calibration.",
        "[calibration.segments]\nkind = \"quantile-bins\"\nfeature = 0\nbins = 2\n\n#",
    )]);
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    cmd_calibrate(&cfg, &synthetic(), &out).unwrap();
    let kv = key_values(&out.join("report.txt"));
    assert_eq!(value(&kv, "calibration.bin0.fallback"), "false");
    assert_eq!(value(&kv, "calibration.bin1.upper_exceedances"), "50");
    assert!(out.join("segmenter.json").is_file());
    assert!(out.join("segments/bin1/calibration.txt").is_file());
    let r = cmd_eval(&cfg, &out, &out.join("cal.csv"), &tmp.path().join("e")).unwrap();
    assert_eq!(r.segments.len(), 2);
    assert_eq!(r.upper_exceedances, 100);
}

#[test]
fn simulate_is_deterministic_and_onset_aligned() {
    let none = config_with(&[("kind = \"sudden\"", "kind = \"none\""), ("samples = 1000", "samples = 100")]);
    let tmp = tempfile::tempdir().unwrap();
    let a = cmd_simulate(&none, &tmp.path().join("a")).unwrap();
    let b = cmd_simulate(&none, &tmp.path().join("b")).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let sudden = config_with(&[("onset = 6500", "onset = 40"), ("samples = 1000", "samples = 100")]);
    let none_twin = config_with(&[
        ("kind = \"sudden\"", "kind = \"none\""),
        ("onset = 6500", "onset = 40"),
        ("samples = 1000", "samples = 100"),
    ]);
    let s = fs::read_to_string(cmd_simulate(&sudden, &tmp.path().join("s")).unwrap()).unwrap();
    let n = fs::read_to_string(cmd_simulate(&none_twin, &tmp.path().join("n")).unwrap()).unwrap();
    let (s, n): (Vec<&str>, Vec<&str>) = (s.lines().collect(), n.lines().collect());
    assert_eq!(s.len(), 101);
    assert_eq!(s[..41], n[..41]);
    assert!(s[41..].iter().zip(&n[41..]).all(|(a, b)| a != b));

    let empty = config_with(&[("samples = 1000", "samples = 0")]);
    let e = fs::read_to_string(cmd_simulate(&empty, &tmp.path().join("e")).unwrap()).unwrap();
    assert_eq!(e, "x0,y\n");
}

#[test]
fn loop_with_no_cycles_keeps_one_version() {
    let cfg = config_with(&[("max_cycles = 3", "max_cycles = 0"), ("windows = 12", "windows = 7")]);
    let tmp = tempfile::tempdir().unwrap();
    let summary = cmd_loop(&cfg, tmp.path()).unwrap();
    assert_eq!(summary.versions, 1);
    assert_eq!(summary.redeploys, 0);
    let kv = key_values(&tmp.path().join("report.txt"));
    assert_eq!(value(&kv, "versions"), "1");
    cmd_replay(tmp.path()).unwrap();
}

#[test]
fn loop_rejects_unwritable_output_before_work() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let start = std::time::Instant::now();
    let err = cmd_loop(&config_with(&[]), &blocker.join("run")).err().unwrap();
    assert_eq!(err.class, ErrorClass::Io);
    assert!(start.elapsed().as_secs_f64() < 0.5);
}

#[test]
fn replay_detects_tampered_manifest() {
    let cfg = config_with(&[("windows = 12", "windows = 6")]);
    let tmp = tempfile::tempdir().unwrap();
    cmd_loop(&cfg, tmp.path()).unwrap();
    let path = tmp.path().join("manifest.json");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replacen("\"seed\": 21", "\"seed\": 22", 1)).unwrap();
    let err = cmd_replay(tmp.path()).err().unwrap();
    assert_eq!(err.class, ErrorClass::Calibration, "{}", err.detail);
    assert!(err.detail.contains("fingerprint"), "{}", err.detail);
}

fn binary(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_edgeuq")).args(args).current_dir(root()).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn binary_exit_codes_and_error_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, example_text().replace("gamma = 0.9", "gamma = 1.0")).unwrap();
    let (code, _, err) = binary(&["calibrate", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error class=config detail=calibration.gamma"), "{err}");

    let unknown = tmp.path().join("unknown.toml");
    fs::write(&unknown, example_text().replace("[output]", "[output]\ncolour = \"red\"")).unwrap();
    let (code, _, err) = binary(&["loop", "--config", unknown.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.contains("colour"), "{err}");

    let garbage = tmp.path().join("garbage.csv");
    fs::write(&garbage, "x,y\n1,abc\n").unwrap();
    let out = tmp.path().join("o");
    let (code, _, err) = binary(&[
        "calibrate",
        "--config",
        "configs/example.toml",
        "--data",
        garbage.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 4, "{err}");
    assert!(err.starts_with("error class=data"));

    let (code, _, _) = binary(&["eval", "--config", "configs/example.toml", "--model", "/nonexistent/model"]);
    assert_eq!(code, 6);

    let sim = tmp.path().join("sim");
    let (code, stdout, _) = binary(&["simulate", "--config", "configs/example.toml", "--out", sim.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("stream.csv"));
}
