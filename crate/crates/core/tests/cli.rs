use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn hjreact(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hjreact"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("HJREACT_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> Output {
    let o = hjreact(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn csv_rows(dir: &Path, name: &str) -> Vec<Vec<String>> {
    read(dir, name).lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn files_starting(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(prefix))
        .collect();
    v.sort();
    v
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("in.toml");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn stationary_finds_five_points() {
    let tmp = TempDir::new().unwrap();
    ok(&["stationary"], tmp.path());
    let rows = csv_rows(tmp.path(), "stationary.csv");
    assert_eq!(rows.len(), 5);
    assert!(tmp.path().join("manifest.toml").exists());
    assert!(tmp.path().join("config.toml").exists());
}

#[test]
fn energy_scale_multiplies_energies() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["stationary"], &a);
    let cfg = write_config(tmp.path(), "[pes]\nenergy_scale = 1.0\n");
    ok(&["stationary", "--config", cfg.to_str().unwrap()], &b);
    let header = read(&a, "stationary.csv").lines().next().unwrap().to_string();
    let col = header.split(',').position(|c| c == "V").expect("energy column");
    for (ra, rb) in csv_rows(&a, "stationary.csv").iter().zip(&csv_rows(&b, "stationary.csv")) {
        let ea: f64 = ra[col].parse().unwrap();
        let eb: f64 = rb[col].parse().unwrap();
        assert!((eb - 1000.0 * ea).abs() < 1e-9 * eb.abs().max(1.0), "{ea} {eb}");
    }
}

#[test]
fn empty_seed_grid_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[stationary]\nseeds_nx = 0\n");
    let o = hjreact(&["stationary", "--config", cfg.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[grid]\ndt = -1.0\n");
    let o = hjreact(&["rp", "--config", cfg.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt"));

    let cfg = write_config(tmp.path(), "colour = 3\n");
    let o = hjreact(&["rp", "--config", cfg.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn missing_output_directory_is_created() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("deep").join("er");
    ok(&["rp"], &out);
    let manifest = read(&out, "manifest.toml");
    assert!(manifest.contains("rp.csv"));
}

#[test]
fn env_var_sets_output_unless_flag_given() {
    let tmp = TempDir::new().unwrap();
    let env_dir = tmp.path().join("env");
    let o = Command::new(env!("CARGO_BIN_EXE_hjreact")).arg("rp").env("HJREACT_OUT", &env_dir).output().unwrap();
    assert!(o.status.success());
    assert!(env_dir.join("rp.csv").exists());
}

#[test]
fn reaction_path_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    ok(&["rp"], &tmp.path().join("a"));
    ok(&["rp"], &tmp.path().join("b"));
    assert_eq!(fs::read(tmp.path().join("a/rp.csv")).unwrap(), fs::read(tmp.path().join("b/rp.csv")).unwrap());
}

const SMALL: [&str; 10] = ["--n", "64", "--tfinal", "40", "--grid", "128x128", "--p0", "4", "--seed", "7"];

fn same_files(a: &Path, b: &Path) {
    let names: Vec<_> = files_starting(a, "").into_iter().map(|p| p.file_name().unwrap().to_owned()).collect();
    assert!(names.len() > 2);
    for n in names {
        let n = n.to_string_lossy();
        if n == "config.toml" {
            continue;
        }
        assert_eq!(fs::read(a.join(&*n)).unwrap(), fs::read(b.join(&*n)).unwrap(), "{n} differs");
    }
}

#[test]
fn worker_count_does_not_change_outputs() {
    let tmp = TempDir::new().unwrap();
    for cmd in ["classical", "bohmian"] {
        let a = tmp.path().join(format!("{cmd}1"));
        let b = tmp.path().join(format!("{cmd}2"));
        let mut args = vec![cmd];
        args.extend(SMALL);
        ok(&[&args[..], &["--workers", "1"]].concat(), &a);
        ok(&[&args[..], &["--workers", "2"]].concat(), &b);
        same_files(&a, &b);
    }
}

#[test]
fn cara_reads_a_written_trajectory() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    let mut args = vec!["classical"];
    args.extend(SMALL);
    ok(&args, &run);
    let traj = files_starting(&run, "traj_classical").pop().expect("trajectory file");
    let out = tmp.path().join("cara");
    let o = ok(&["cara", "--traj", traj.to_str().unwrap(), "--id", "1", "--csv"], &out);
    assert!(String::from_utf8_lossy(&o.stdout).contains("diagonal band fraction"));
    assert!(out.join("cara_classical_id_1.csv").exists());

    let o = hjreact(&["cara", "--traj", traj.to_str().unwrap(), "--id", "999"], &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn packet_too_wide_for_grid_is_numerical() {
    let tmp = TempDir::new().unwrap();
    let o = hjreact(&["quantum", "--grid", "32x32", "--tfinal", "1"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
