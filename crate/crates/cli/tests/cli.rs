use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

struct Run {
    dir: TempDir,
    output: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().expect("exited normally")
    }

    fn file(&self, name: &str) -> String {
        fs::read_to_string(self.out().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    /// Data rows of a CSV as string fields.
    fn csv(&self, name: &str) -> Vec<Vec<String>> {
        self.file(name)
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect()
    }

    fn column(&self, name: &str, col: usize) -> Vec<f64> {
        self.csv(name).iter().map(|r| r[col].parse().unwrap()).collect()
    }
}

fn vfd(cmd: &str, config: &str) -> Run {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let output = run_bin(&[cmd, cfg.to_str().unwrap(), "--out"], &dir.path().join("out"));
    Run { dir, output }
}

fn run_bin(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vfd"))
        .args(args)
        .arg(out)
        .env("VFD_THREADS", "2")
        .output()
        .unwrap()
}

#[test]
fn stationary_run_stays_at_equilibrium() {
    let run = vfd(
        "evolve",
        "r = 2\nn = 64\ndt = 1e-3\nt_end = 0.05\noutput_every = 5\nrho.cos = 0.3\nf0.preset = stationary\n",
    );
    assert_eq!(run.code(), 0);
    let l2 = run.column("series.csv", 3);
    assert_eq!(l2.len(), 11);
    assert!(l2.iter().all(|&e| e <= 1e-8));
    assert!(run.file("summary.txt").contains("comparison check: pass"));
}

#[test]
fn perturbation_decays_at_the_linear_rate() {
    let run = vfd(
        "evolve",
        "n = 128\ndt = 1e-6\nt_end = 0.01\noutput_every = 100\nf0.cos = 0.01\nfit.window = 0.001, 0.01\n",
    );
    assert_eq!(run.code(), 0);
    let summary = run.file("summary.txt");
    let rate: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("fitted decay rate: "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    let expected = 6.0 * (2.0 * std::f64::consts::PI).powi(2);
    assert!((rate - expected).abs() < 0.05 * expected, "{rate}");
    let header = run.file("series.csv").lines().next().unwrap().to_string();
    assert_eq!(
        header,
        "t,energy,dissipation,l2_error,min_f,max_f,alpha,w2_to_eq,g_integral"
    );
}

#[test]
fn malformed_configs_exit_with_one() {
    for cfg in ["r 2\n", "colour = 3\n", "dt = fast\n", "n = 4\n", "f0.cos = 2.0\n"] {
        let run = vfd("evolve", cfg);
        assert_eq!(run.code(), 1, "{cfg}");
        assert!(!run.output.stderr.is_empty());
    }
    let dir = TempDir::new().unwrap();
    let out = run_bin(&["evolve", "/nonexistent/run.cfg", "--out"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn identical_pair_has_zero_distance() {
    let run = vfd(
        "contract",
        "n = 64\ndt = 1e-4\nt_end = 0.01\nf0.cos = 0.2\nf0b.cos = 0.2\n",
    );
    assert_eq!(run.code(), 0);
    assert!(run.column("contract.csv", 1).iter().all(|&w| w <= 1e-9));
}

#[test]
fn contraction_is_certified() {
    let run = vfd(
        "contract",
        "n = 128\ndt = 1e-5\nt_end = 0.02\noutput_every = 100\nf0.cos = 0.1\nf0b.sin = 0.1\n",
    );
    assert_eq!(run.code(), 0);
    let summary = run.file("summary.txt");
    assert!(summary.contains("mu: 4.50788"), "{summary}");
    assert!(summary.contains("contraction: verified"));
    for row in run.csv("contract.csv") {
        let (w, b): (f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
        assert!(w <= b * (1.0 + 1e-3));
    }
}

#[test]
fn rough_rho_has_no_certificate() {
    let run = vfd(
        "contract",
        "n = 64\ndt = 1e-4\nt_end = 0.002\nrho.cos = 0, 0, 0.3\nf0.cos = 0.1\nf0b.sin = 0.1\n",
    );
    assert_eq!(run.code(), 0);
    let summary = run.file("summary.txt");
    assert!(summary.contains("mu: -"));
    assert!(summary.contains("no certificate"));
}

#[test]
fn contract_requires_second_datum() {
    assert_eq!(vfd("contract", "f0.cos = 0.1\n").code(), 1);
}

#[test]
fn quantization_closed_forms() {
    let run = vfd("quantize", "n = 512\nseed = 9\nquantize.N = 1, 8\n");
    assert_eq!(run.code(), 0);
    let rows = run.csv("quantize.csv");
    assert_eq!(rows.len(), 2);
    let e: Vec<f64> = run.column("quantize.csv", 1);
    assert!((e[0] - 1.0 / 12.0).abs() < 1e-12);
    assert!((e[1] - 1.0 / 768.0).abs() < 1e-8);
    assert_eq!(rows[1][6].split(';').count(), 8);
}

#[test]
fn empirical_measures_approach_equilibrium() {
    let run = vfd("quantize", "n = 1024\nrho.cos = 0.3\nquantize.N = 32, 64, 128\n");
    assert_eq!(run.code(), 0);
    let w = run.column("quantize.csv", 2);
    assert!(w.windows(2).all(|p| p[1] < p[0]), "{w:?}");
}

#[test]
fn outputs_are_deterministic() {
    let cfg = "n = 256\nseed = 5\nrho.sin = 0.2\nquantize.N = 8, 16\n";
    let a = vfd("quantize", cfg).file("quantize.csv");
    let b = vfd("quantize", cfg).file("quantize.csv");
    assert_eq!(a, b);
    let cfg = "seed = 6\nrho.cos = 0.01\nhessian.samples = 6\nhessian.fd_samples = 3\n";
    assert_eq!(
        vfd("hessian-check", cfg).file("hessian.csv"),
        vfd("hessian-check", cfg).file("hessian.csv")
    );
}

#[test]
fn hessian_suites_pass_for_smooth_rho() {
    let run = vfd("hessian-check", "seed = 2\nrho.sin = 0.01\nrho.cos = 0, 0.002\n");
    assert_eq!(run.code(), 0);
    let rows = run.csv("hessian.csv");
    assert_eq!(rows.len(), 30);
    assert!(rows.iter().all(|r| r[6] == "true"));
}

#[test]
fn uniform_rho_ratios_clear_the_bound() {
    let run = vfd(
        "hessian-check",
        "seed = 3\nhessian.samples = 10\nhessian.fd_samples = 2\n",
    );
    assert_eq!(run.code(), 0);
    for r in run.csv("hessian.csv").iter().filter(|r| r[0] == "bound") {
        let (ratio, mu): (f64, f64) = (r[4].parse().unwrap(), r[5].parse().unwrap());
        assert!(mu > 0.0 && ratio >= mu - 1e-6);
    }
}

#[test]
fn zero_hessian_samples_is_a_config_error() {
    assert_eq!(vfd("hessian-check", "hessian.samples = 0\n").code(), 1);
}
