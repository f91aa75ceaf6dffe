//! End-to-end runs of the `evolve` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const HEAT: &str = "seed = 1\n[problem]\nkind = \"heat\"\nn = 16\n[time]\nm = 20\n";

fn evolve(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_evolve"));
    cmd.args(args).env_remove("EVOLVE_OUT_DIR").env_remove("EVOLVE_WORKERS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

struct Run {
    dir: TempDir,
    cfg: PathBuf,
}

impl Run {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, config).unwrap();
        Self { dir, cfg }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, command: &str, out: &str, extra: &[&str]) -> (i32, PathBuf) {
        let out = self.out(out);
        let mut args = vec![
            command,
            "--config",
            self.cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let o = evolve(&args, &[]);
        (o.status.code().unwrap(), out)
    }
}

fn schema_checked(file: &Path, schema: &str) -> Value {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(root.join(schema)).unwrap()).unwrap();
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(&doc)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{} violates schema: {errors:?}", file.display());
    doc
}

#[test]
fn solve_heat_writes_all_artifacts() {
    let r = Run::new(HEAT);
    let (code, out) = r.run("solve", "o", &[]);
    assert_eq!(code, 0);
    for f in ["trajectory.csv", "convergence.csv", "breakdown.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let s = schema_checked(&out.join("summary.json"), "summary.schema.json");
    assert_eq!(s["status"], "converged-zero-energy");
    assert!(s["J_final"].as_f64().unwrap() < 1e-10);
    assert!(s["runtime_ms"].is_null());
    let header = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(header.starts_with("iter,J,grad_norm,step_size\n"));
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 22);
}

#[test]
fn solve_euler_and_continuation() {
    let r = Run::new("[problem]\nkind = \"scalar_decay\"\n[solver]\nmethod = \"euler\"\n");
    let (code, out) = r.run("solve", "o", &[]);
    assert_eq!(code, 0);
    let s = schema_checked(&out.join("summary.json"), "summary.schema.json");
    assert_eq!(s["iterations"], 50);

    let r = Run::new("[problem]\nkind = \"regularized_heat\"\nn = 16\n[solver]\nmethod = \"continuation\"\n");
    let (code, out) = r.run("solve", "o", &[]);
    assert_eq!(code, 0);
    schema_checked(&out.join("summary.json"), "summary.schema.json");
    let table = std::fs::read_to_string(out.join("continuation.csv")).unwrap();
    assert_eq!(table.lines().count(), 13);
}

#[test]
fn iteration_cap_exits_two() {
    let r = Run::new(&format!("{HEAT}[solver]\nmax_iter = 3\n"));
    let (code, out) = r.run("solve", "o", &[]);
    assert_eq!(code, 2);
    let s = schema_checked(&out.join("summary.json"), "summary.schema.json");
    assert_eq!(s["status"], "iteration-cap");
}

#[test]
fn config_errors_exit_one() {
    let r = Run::new("[problem]\nkind = \"heat\"\nn = \"many\"\n");
    assert_eq!(r.run("solve", "o", &[]).0, 1);
    let r = Run::new("[problem]\nkind = \"no_such_problem\"\n");
    assert_eq!(r.run("check", "o", &[]).0, 1);
    let r = Run::new("[problem]\nkind = \"heat\"\nn = 1\n");
    assert_eq!(r.run("solve", "o", &[]).0, 1);
    let o = evolve(&["solve", "--config", "/nonexistent/run.toml"], &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_passes_and_detects_perturbation() {
    let r = Run::new(HEAT);
    let (code, out) = r.run("compare", "o", &[]);
    assert_eq!(code, 0);
    let c = schema_checked(&out.join("compare.json"), "compare.schema.json");
    assert_eq!(c["passed"], true);
    assert!(out.join("oracle_trajectory.csv").exists());

    let r = Run::new(&format!("{HEAT}[compare]\nperturb = 1e-2\n"));
    let (code, out) = r.run("compare", "o", &[]);
    assert_eq!(code, 2);
    let c = schema_checked(&out.join("compare.json"), "compare.schema.json");
    assert_eq!(c["passed"], false);
    assert_eq!(c["equivalence"]["zero_energy"], false);
}

#[test]
fn compare_grid_mismatch_exits_one() {
    let r = Run::new(&format!("{HEAT}[compare]\noracle_m = 40\n"));
    let (code, out) = r.run("compare", "o", &[]);
    assert_eq!(code, 1);
    assert!(!out.join("compare.json").exists());
}

#[test]
fn check_reports_and_exit_codes() {
    let r = Run::new(&format!("{HEAT}[checks]\nsamples = 200\n"));
    let (code, out) = r.run("check", "o", &["--seed", "9"]);
    assert_eq!(code, 0);
    let c = schema_checked(&out.join("check.json"), "check.schema.json");
    assert_eq!(c["seed"], 9);
    assert_eq!(c["reports"].as_array().unwrap().len(), 3);

    let r = Run::new("[problem]\nkind = \"anti_coercive\"\n[checks]\nsamples = 200\ngrowth = false\n");
    let (code, out) = r.run("check", "o", &[]);
    assert_eq!(code, 2);
    let c = schema_checked(&out.join("check.json"), "check.schema.json");
    let coercivity = &c["reports"][1];
    assert_eq!(coercivity["name"], "coercivity");
    assert!(!coercivity["violations"].as_array().unwrap().is_empty());

    // No samples: nothing can be violated.
    let r = Run::new("[problem]\nkind = \"anti_coercive\"\n[checks]\nsamples = 0\n");
    assert_eq!(r.run("check", "o", &[]).0, 0);
}

#[test]
fn convergence_table_against_exact_heat() {
    let r = Run::new("[problem]\nkind = \"heat\"\nn = 64\n[time]\nm = 20\n[solver]\nmethod = \"euler\"\n");
    let (code, out) = r.run("convergence", "o", &["--refinements", "3"]);
    assert_eq!(code, 0);
    let c = schema_checked(&out.join("convergence.json"), "convergence.schema.json");
    assert_eq!(c["reference"], "exact");
    let levels = c["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 4);
    for l in &levels[1..] {
        let order = l["error_order"].as_f64().unwrap();
        assert!((0.75..1.25).contains(&order), "order {order}");
        let defect = l["defect_order"].as_f64().unwrap();
        assert!((0.75..1.25).contains(&defect), "defect order {defect}");
    }
    let table = std::fs::read_to_string(out.join("convergence_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn convergence_without_exact_solution_uses_refined_oracle() {
    let r = Run::new(
        "[problem]\nkind = \"navier_stokes\"\nk = 8\nnu = 0.1\n[time]\nm = 10\n[solver]\nmethod = \"euler\"\n",
    );
    let (code, out) = r.run("convergence", "o", &["--refinements", "2"]);
    assert_eq!(code, 0);
    let c = schema_checked(&out.join("convergence.json"), "convergence.schema.json");
    assert_eq!(c["reference"], "oracle-refined");
}

#[test]
fn out_dir_precedence() {
    let r = Run::new(HEAT);
    let env_dir = r.out("from_env");
    let o = evolve(
        &["check", "--config", r.cfg.to_str().unwrap()],
        &[("EVOLVE_OUT_DIR", env_dir.to_str().unwrap())],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(env_dir.join("check.json").exists());

    let cli_dir = r.out("from_cli");
    let o = evolve(
        &[
            "check",
            "--config",
            r.cfg.to_str().unwrap(),
            "--out",
            cli_dir.to_str().unwrap(),
        ],
        &[("EVOLVE_OUT_DIR", r.out("unused").to_str().unwrap())],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(cli_dir.join("check.json").exists());
    assert!(!r.out("unused").exists());
}

#[test]
fn worker_count_does_not_change_outputs() {
    let r = Run::new(HEAT);
    let cfg = r.cfg.to_str().unwrap();
    let mut dirs = Vec::new();
    for w in ["1", "4"] {
        let out = r.out(&format!("w{w}"));
        let o = evolve(
            &["solve", "--config", cfg, "--out", out.to_str().unwrap()],
            &[("EVOLVE_WORKERS", w)],
        );
        assert_eq!(o.status.code(), Some(0));
        dirs.push(out);
    }
    for f in ["trajectory.csv", "convergence.csv", "breakdown.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(dirs[0].join(f)).unwrap(),
            std::fs::read(dirs[1].join(f)).unwrap(),
            "{f}"
        );
    }
    let o = evolve(&["solve", "--config", cfg], &[("EVOLVE_WORKERS", "zero")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runtime_is_recorded_on_request() {
    let r = Run::new(&format!("{HEAT}[output]\nrecord_runtime = true\n"));
    let (code, out) = r.run("solve", "o", &[]);
    assert_eq!(code, 0);
    let s = schema_checked(&out.join("summary.json"), "summary.schema.json");
    assert!(s["runtime_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn config_output_dir_is_used() {
    let r = Run::new(HEAT);
    let target = r.out("cfg_dir");
    std::fs::write(
        &r.cfg,
        format!("{HEAT}[output]\ndir = {:?}\n", target.to_str().unwrap()),
    )
    .unwrap();
    let o = evolve(&["check", "--config", r.cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(target.join("check.json").exists());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = evolve_cli::RunConfig::load(&path).unwrap();
        cfg.build_problem().unwrap();
        count += 1;
    }
    assert!(count >= 4);
}
