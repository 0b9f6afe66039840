use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL_CONFIG: &str = r#"
pathways = ["SE", "GSB", "ESA"]

[model]
ground_energy = -12000.0
site_energies = [-50.0, 50.0]
couplings = [[0.0, 100.0], [100.0, 0.0]]
dipole_mode = "per_state"
dipoles = [1.0, 1.0]

[bath]
kind = "ohmic"
lambda_over_omega_c = 1.2
omega_c = 53.0
temperature = 77.0
n_points = 300

[grid]
dt = 4.0
n1 = 32
n3 = 32
t2 = [0.0, 50.0]
"#;

fn echo2d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_echo2d"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_one_directory_per_delay() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_CONFIG);
    let out = tmp.path().join("out");
    let result = echo2d(&["run", "--config", arg(&config), "--output-dir", arg(&out)]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    assert!(out.join("config.resolved.toml").is_file());
    for t2 in ["t2_0", "t2_50"] {
        let dir = out.join(t2);
        for file in ["R_SE_re.csv", "R_GSB_im.csv", "R_ESA_re.csv", "R_total_re.csv", "spectrum_re.csv", "spectrum_im.csv", "omega1.csv", "omega3.csv", "meta.json"] {
            assert!(dir.join(file).is_file(), "{t2}/{file} missing");
        }
    }
    let leftovers: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".staging"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn peaks_lists_maxima_of_a_previous_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_CONFIG);
    let out = tmp.path().join("out");
    assert!(echo2d(&["run", "--config", arg(&config), "--output-dir", arg(&out)]).status.success());
    let result = echo2d(&["peaks", "--output-dir", arg(&out), "--max", "3"]);
    assert!(result.status.success());
    let text = String::from_utf8(result.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t2_fs,omega1_cm-1,omega3_cm-1,re_height"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.len() == 4 && (r[0] == 0.0 || r[0] == 50.0)));
    assert!(rows.iter().filter(|r| r[0] == 0.0).count() <= 3);
}

#[test]
fn pathway_flag_restricts_output() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_CONFIG);
    let out = tmp.path().join("out");
    let result = echo2d(&["run", "--config", arg(&config), "--output-dir", arg(&out), "--pathway", "GSB"]);
    assert!(result.status.success());
    assert!(out.join("t2_0/R_GSB_re.csv").is_file());
    assert!(!out.join("t2_0/R_SE_re.csv").exists());
}

#[test]
fn empty_pathway_list_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL_CONFIG.replace(r#"pathways = ["SE", "GSB", "ESA"]"#, "pathways = []");
    let config = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let result = echo2d(&["run", "--config", arg(&config), "--output-dir", arg(&out)]);
    assert_eq!(result.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn esa_without_doubles_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL_CONFIG
        .replace("site_energies = [-50.0, 50.0]", "site_energies = [0.0]")
        .replace("couplings = [[0.0, 100.0], [100.0, 0.0]]", "couplings = [[0.0]]")
        .replace("dipoles = [1.0, 1.0]", "dipoles = [1.0]");
    let config = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let result = echo2d(&["run", "--config", arg(&config), "--output-dir", arg(&out), "--pathway", "ESA"]);
    assert_eq!(result.status.code(), Some(2), "{}", String::from_utf8_lossy(&result.stderr));
}

#[test]
fn malformed_config_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "[model]\nground_energy = \"low\"\n");
    assert_eq!(echo2d(&["run", "--config", arg(&config)]).status.code(), Some(2));
}

#[test]
fn missing_config_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("absent.toml");
    assert_eq!(echo2d(&["run", "--config", arg(&missing)]).status.code(), Some(1));
}

#[test]
fn verify_passes_on_the_benchmark_bath() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &SMALL_CONFIG.replace("n_points = 300\n", ""));
    let result = echo2d(&["verify", "--config", arg(&config)]);
    let text = String::from_utf8_lossy(&result.stdout);
    assert_eq!(result.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{text}");
}

#[test]
fn verify_flags_a_truncated_frequency_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL_CONFIG.replace("n_points = 300", "n_points = 300\nomega_max = 150.0");
    let config = write_config(tmp.path(), &text);
    let result = echo2d(&["verify", "--config", arg(&config)]);
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert_eq!(result.status.code(), Some(3), "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("FAIL quadrature_convergence")), "{stdout}");
}
