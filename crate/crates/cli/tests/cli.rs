use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HESTON: &str = "
[model]
kind = heston
q_rev = 1.0
m_level = 0.04
c_vol = 0.3
y0 = 0.04
";

fn voljump(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voljump"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn column(csv: &Path, name: &str) -> Vec<f64> {
    let mut rdr = csv::Reader::from_path(csv).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn constants_sweep_keeps_exponent_above_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.ini");
    fs::write(
        &config,
        format!("{HESTON}\n[task]\nsweep_param = c_vol\nsweep_from = 0.05\nsweep_to = 3\nsweep_count = 25\n"),
    )
    .unwrap();
    let out = dir.path().join("out");
    assert!(voljump(&["constants"], &config, &out).status.success());
    let text = fs::read_to_string(out.join("constants.csv")).unwrap();
    assert!(text.starts_with("s_arg,root,C,A3\n"));
    let a3 = column(&out.join("constants.csv"), "A3");
    assert_eq!(a3.len(), 25);
    assert!(a3.iter().all(|&a| a > 2.0));
}

#[test]
fn convolve_agrees_with_its_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.ini");
    fs::write(&config, "[jumps]\nlambda = 1\np_up = 0.3\neta1 = 4\neta2 = 1.5\n\n[task]\nn = 2\n").unwrap();
    let out = dir.path().join("out");
    let o = voljump(&["convolve"], &config, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let err = column(&out.join("convolve.csv"), "abs_err");
    assert!(err.iter().cloned().fold(0.0, f64::max) <= 1e-6);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config_sha256=") && manifest.contains("task=convolve"));
    assert!(out.join("convolve.gp").is_file());
}

#[test]
fn missing_jump_block_fails_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.ini");
    fs::write(
        &config,
        format!("{HESTON}\n[sim]\nn_paths = 1000\nseed = 1\n\n[task]\ntheorem = heston-large-x\nwindow_lo = 2\nwindow_hi = 10\n"),
    )
    .unwrap();
    let o = voljump(&["verify-bounds"], &config, &dir.path().join("out"));
    assert!(!o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.starts_with("error kind=config"), "{stderr}");
    assert!(stderr.contains("field=jumps") && stderr.contains("[jumps]"), "{stderr}");
}

#[test]
fn parameter_violations_report_field_paths() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.ini");
    fs::write(&config, HESTON.replace("c_vol = 0.3", "c_vol = 0") + "\n[sim]\nn_paths = 10\nseed = 1\n").unwrap();
    let o = voljump(&["density"], &config, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.c_vol"));
}

#[test]
fn plots_on_an_empty_directory_list_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_voljump"))
        .args(["plots", "--dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("density.csv") && stderr.contains("sandwich.csv"), "{stderr}");
}
