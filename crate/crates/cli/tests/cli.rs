use std::fs;
use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("ftl-lab").chain(args.iter().copied());
    let code = ftl_lab::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn dir_arg(d: &Path) -> String {
    d.to_str().unwrap().to_string()
}

#[test]
fn classify_prints_text_and_key_values() {
    let d = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&[
        "classify",
        "--v-minus",
        "2",
        "--v-plus",
        "1",
        "--fbar",
        "0.1875",
        "--side",
        "low-high",
        "--out",
        &dir_arg(d.path()),
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("1A") && out.contains("InfinitelyMany"));
    assert!(out.lines().any(|l| l == "label=1A"));
    assert!(out.lines().any(|l| l == "verdict=InfinitelyMany"));
    let range = kv(&out, "q0_range");
    assert!(range.starts_with('(') && range.ends_with(']'), "{range}");
    let (lo, hi) = range[1..range.len() - 1].split_once(", ").unwrap();
    let (lo, hi): (f64, f64) = (lo.parse().unwrap(), hi.parse().unwrap());
    assert!((lo - 0.25).abs() < 1e-9 && (hi - 0.75).abs() < 1e-9);
    assert!(d.path().join("flux.csv").exists());
}

fn kv<'a>(out: &'a str, key: &str) -> &'a str {
    out.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in\n{out}"))
}

#[test]
fn nonexistence_exits_with_three() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["profile-q", "--case", "1C", "--out", &dir_arg(d.path())]);
    assert_eq!(code, 3);
    assert!(
        err.to_lowercase().contains("no profile") || err.contains("nonexist"),
        "{err}"
    );
}

#[test]
fn validation_errors_exit_with_two() {
    let (code, _, err) = run(&["classify", "--bogus"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage"));
    let (code, _, _) = run(&["classify", "--ell", "-1", "--case", "1A"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["classify", "--rho-minus", "0.6", "--rho-plus", "0.7"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn help_is_not_an_error() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("viscous-pde"));
}

#[test]
fn flags_override_the_config_file() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("r.conf");
    let out_dir = d.path().join("o");
    fs::write(
        &cfg,
        format!(
            "# test\ncase = 1A\nell = 0.5\n\n[classify]\nout = {}\n",
            out_dir.display()
        ),
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let (code, out, _) = run(&["classify", "--config", c]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(kv(&out, "label"), "1A");
    assert!(out_dir.join("flux.csv").exists());
    let (code, out, _) = run(&["classify", "--config", c, "--case", "1B"]);
    assert_eq!(code, 0);
    assert_eq!(kv(&out, "label"), "1B");

    fs::write(&cfg, "[classify]\nq0 = 0.5\n").unwrap();
    let (code, _, err) = run(&["classify", "--config", c]);
    assert_eq!(code, 2);
    assert!(err.contains("q0"));
}

#[test]
fn riemann_run_writes_trajectory() {
    let d = tempfile::tempdir().unwrap();
    let (code, out, err) = run(&[
        "ftl",
        "--riemann",
        "0.6,0.7",
        "--ell",
        "0.01",
        "--T",
        "0.05",
        "--n-left",
        "50",
        "--n-right",
        "50",
        "--out",
        &dir_arg(d.path()),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("run 0"));
    let text = fs::read_to_string(d.path().join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,i,z,rho"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[1], "-50");
    assert!(d.path().join("events.csv").exists());
    assert!(d.path().join("plot.gp").exists());
}

#[test]
fn family_reports_a_positive_gap() {
    let d = tempfile::tempdir().unwrap();
    let (code, out, err) = run(&[
        "family",
        "--case",
        "1A",
        "--q0-grid",
        "0.3:0.75:4",
        "--out",
        &dir_arg(d.path()),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(kv(&out, "members"), "4");
    assert!(kv(&out, "min_gap").parse::<f64>().unwrap() > 0.0);
    let index = fs::read_to_string(d.path().join("index.csv")).unwrap();
    assert_eq!(index.lines().count(), 5);
    assert!(d.path().join("member_03.csv").exists());
}

#[test]
fn viscous_profile_without_existence_exits_with_three() {
    let d = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&[
        "viscous-profile",
        "--case",
        "1D",
        "--out",
        &dir_arg(d.path()),
    ]);
    assert_eq!(code, 3);
    assert_eq!(kv(&out, "monotone_viscous_profile_exists"), "false");
}

fn binary_run(dir: &Path, args: &[&str]) -> Vec<(String, Vec<u8>)> {
    let status = Command::new(env!("CARGO_BIN_EXE_ftl-lab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().to_string(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files.push(("stdout".into(), status.stdout));
    files
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        &[
            "family",
            "--case",
            "2A",
            "--v-minus",
            "1",
            "--v-plus",
            "2",
            "--q0-grid",
            "0.3,0.5,0.7",
        ][..],
        &[
            "ftl",
            "--case",
            "1A",
            "--x0-spacings",
            "0,0.3",
            "--n-left",
            "40",
            "--n-right",
            "40",
            "--T",
            "0.5",
        ][..],
        &[
            "viscous-pde",
            "--cells",
            "300",
            "--T",
            "0.2",
            "--riemann",
            "0.6,0.7",
        ][..],
    ] {
        let a = binary_run(&d.path().join("a"), args);
        let b = binary_run(&d.path().join("b"), args);
        assert_eq!(a, b, "{args:?}");
    }
}
