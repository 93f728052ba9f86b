use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const DESK_CONFIG: &str = r#"schema_version = 1

[scenario]
n_samples = 4000000
seed = 11

[scenario.digitizer]
sample_rate_hz = 31.25e6

[scenario.interferometer]
delay_s = 5.435e-6
heterodyne_hz = 8e6

[scenario.oscillator]
power_laws = [{ exponent = 0, coefficient = 1.0 }]
bumps = [{ center_hz = 90e3, fwhm_hz = 20e3, peak = 100.0 }]
"#;

fn cosh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cosh")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    o
}

fn desk_config(dir: &Path) -> PathBuf {
    let p = dir.join("desk.toml");
    fs::write(&p, DESK_CONFIG).unwrap();
    p
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn analyze_reports_reference_segment_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path());
    let trace = dir.path().join("run.trc");
    let psd = dir.path().join("run.csv");
    let svg = dir.path().join("run.svg");
    ok(cosh(&["simulate", "--config", s(&cfg), "--out", s(&trace)]));
    ok(cosh(&[
        "analyze", "--trace", s(&trace), "--band-plan", "builtin:paper", "--out", s(&psd), "--plot", s(&svg),
    ]));
    let text = fs::read_to_string(&psd).unwrap();
    assert!(text.contains("# kind=frequency"));
    let mut counts: Vec<(String, String)> = data_rows(&text).into_iter().map(|r| (r[2].clone(), r[3].clone())).collect();
    counts.dedup();
    let expected: Vec<(String, String)> = [("0", "1"), ("1", "12"), ("2", "122"), ("3", "1228")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(counts, expected);
    let figure = fs::read_to_string(&svg).unwrap();
    assert!(figure.starts_with("<svg"));
    assert!(figure.contains("Fourier frequency / Hz"));
    assert!(figure.contains("S_ν / Hz²·Hz⁻¹"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path());
    let run = |tag: &str, seed: &str| {
        let trace = dir.path().join(format!("{tag}.trc"));
        let psd = dir.path().join(format!("{tag}.csv"));
        ok(cosh(&["simulate", "--config", s(&cfg), "--out", s(&trace), "--seed", seed]));
        ok(cosh(&["analyze", "--trace", s(&trace), "--out", s(&psd), "--estimator", "dual"]));
        (fs::read(trace).unwrap(), fs::read(psd).unwrap())
    };
    let a = run("a", "5");
    let b = run("b", "5");
    let c = run("c", "6");
    assert!(a == b);
    assert!(a.0 != c.0);
}

#[test]
fn dark_floor_yields_fsr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path());
    let dark = dir.path().join("dark.trc");
    let floor = dir.path().join("floor.csv");
    ok(cosh(&["simulate", "--config", s(&cfg), "--out", s(&dark), "--dark"]));
    ok(cosh(&["floor", "--dark-trace", s(&dark), "--amplitude", "0.5", "--out", s(&floor)]));
    let out = ok(cosh(&["fsr", "--psd", s(&floor)]));
    let text = String::from_utf8(out.stdout).unwrap();
    let fsr: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("fsr_hz="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((fsr - 184e3).abs() <= 1e3, "{text}");
    assert!(text.contains("delay_s="));
}

#[test]
fn bad_magic_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("bogus.trc");
    fs::write(&bogus, b"NOTATRACE-FILE-AT-ALL").unwrap();
    let o = cosh(&["analyze", "--trace", s(&bogus), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("bogus.trc") && err.contains("COSHTRC1"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cosh(&["analyze", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(cosh(&[]).status.code(), Some(1));
    assert_eq!(
        cosh(&["analyze", "--trace", "x", "--out", "y", "--estimator", "median"]).status.code(),
        Some(1)
    );
    assert_eq!(cosh(&["floor", "--dark-trace", "x", "--amplitude", "-1", "--out", "y"]).status.code(), Some(1));
    assert_eq!(cosh(&["compose", "--component", "novalue", "--out-prefix", "p"]).status.code(), Some(1));
    assert_eq!(cosh(&["--help"]).status.code(), Some(0));
    assert_eq!(cosh(&["analyze", "--trace", "/nonexistent/t.trc", "--out", "y"]).status.code(), Some(2));
}

fn write_psd(path: &Path, kind: &str, rows: &[(f64, f64)]) {
    let mut text = format!("# schema_version=1\n# kind={kind}\nfreq_hz,value,band_index,n_avg,spur_flag\n");
    for (f, v) in rows {
        text.push_str(&format!("{f:e},{v:e},0,1,0\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn rin2freq_merge_compose_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let rin = d.join("rin.csv");
    write_psd(&rin, "rin", &[(1e4, 1e-12), (1e5, 1e-12), (1e6, 1e-12)]);
    let freq = d.join("rin_freq.csv");
    ok(cosh(&["rin2freq", "--rin", s(&rin), "--alpha", "0.3", "--out", s(&freq)]));
    let rows = data_rows(&fs::read_to_string(&freq).unwrap());
    let v: f64 = rows[1][1].parse().unwrap();
    assert!((v / 3e-3 - 1.0).abs() < 1e-12);

    let grid: Vec<f64> = (1..=500).map(|k| k as f64 * 1e3).collect();
    let a = d.join("a.csv");
    let b = d.join("b.csv");
    write_psd(&a, "frequency", &grid.iter().map(|&f| (f, 1.0)).collect::<Vec<_>>());
    write_psd(&b, "frequency", &grid.iter().map(|&f| (f, 2.0)).collect::<Vec<_>>());
    let merged = d.join("merged.csv");
    ok(cosh(&[
        "merge", "--a", s(&a), "--delay-a", "1e-5", "--b", s(&b), "--delay-b", "3.3e-6", "--out", s(&merged),
    ]));
    let rows = data_rows(&fs::read_to_string(&merged).unwrap());
    let at = |f: &str| rows.iter().find(|r| r[0].starts_with(f)).unwrap().clone();
    assert_eq!(at("2.0000000000000000e5")[4], "2");
    assert_eq!(at("2.0000000000000000e5")[1].parse::<f64>().unwrap(), 2.0);
    assert_eq!(at("1.5000000000000000e5")[4], "0");
    let same = cosh(&["merge", "--a", s(&a), "--delay-a", "1e-5", "--b", s(&b), "--delay-b", "1e-5", "--out", s(&merged)]);
    assert_eq!(same.status.code(), Some(2));

    let prefix = d.join("floor");
    let comp_a = format!("scope={}", s(&a));
    let comp_b = format!("acoustic={}", s(&b));
    ok(cosh(&["compose", "--component", &comp_a, "--component", &comp_b, "--out-prefix", s(&prefix)]));
    let total = fs::read_to_string(d.join("floor_total.csv")).unwrap();
    assert!(data_rows(&total).iter().all(|r| r[1].parse::<f64>().unwrap() == 3.0));
    assert!(d.join("floor_scope.csv").exists() && d.join("floor_acoustic.csv").exists());
    let table = fs::read_to_string(d.join("floor_dominance.txt")).unwrap();
    assert!(table.contains("acoustic"));

    let svg = d.join("all.svg");
    ok(cosh(&["plot", "--psd", s(&a), "--psd", s(&b), "--out", s(&svg)]));
    let first = fs::read(&svg).unwrap();
    ok(cosh(&["plot", "--psd", s(&a), "--psd", s(&b), "--out", s(&svg)]));
    assert_eq!(first, fs::read(&svg).unwrap());
}

#[test]
fn analyze_reference_scale_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ref.toml");
    fs::write(&cfg, "schema_version = 1\n[scenario]\nseed = 1\n").unwrap();
    let trace = dir.path().join("ref.trc");
    let psd = dir.path().join("ref.csv");
    ok(cosh(&["simulate", "--config", s(&cfg), "--out", s(&trace)]));
    ok(cosh(&["analyze", "--trace", s(&trace), "--band-plan", "builtin:paper", "--out", s(&psd)]));
    let mut counts: Vec<String> = data_rows(&fs::read_to_string(&psd).unwrap()).into_iter().map(|r| r[3].clone()).collect();
    counts.dedup();
    assert_eq!(counts, ["1", "12", "122", "1228"]);
}
