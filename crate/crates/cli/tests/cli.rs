use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ne_lab::seeker::{run, Reference};
use ne_lab_cli::commands::{run_scenario, RunOptions};
use ne_lab_cli::config::{Scenario, BUILTINS};
use ne_lab_cli::output::read_csv;
use tempfile::TempDir;

fn ne_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ne-lab")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn reference_text() -> &'static str {
    BUILTINS[0].1
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const TWO_BY_TWO: &str = r#"
[layout]
sizes = [2, 2]
[costs]
quadratic = [[1, 2, 0.1], [2, 1, 0.1], [1, 3, 0.2], [3, 1, 0.2]]
"#;

#[test]
fn validate_accepts_builtin_scenario() {
    let o = ne_lab(&["validate", "paper-sim"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok: paper-sim"));
}

#[test]
fn validate_names_disconnected_coalition() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "{TWO_BY_TWO}[topology]\nedges = [\"1.1 -> 1.2\", \"1.2 -> 1.1\", \"2.1 -> 2.2\", \"1.1 -> 2.1\", \"2.1 -> 1.1\", \"2.2 -> 1.1\"]\n"
    );
    let p = write(dir.path(), "cut.toml", &text);
    let o = ne_lab(&["validate", p.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("G_2 not strongly connected"), "{}", stderr(&o));
}

#[test]
fn validate_rejects_weights_not_summing_to_one() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "{TWO_BY_TWO}[topology]\npreset = \"ring-with-heads\"\n[weights]\nkind = \"explicit\"\n\
         [[weights.coalitions]]\npull = [[0.5, 0.4], [0.5, 0.5]]\npush = [[0.5, 0.5], [0.5, 0.5]]\n\
         [[weights.coalitions]]\npull = [[0.5, 0.5], [0.5, 0.5]]\npush = [[0.5, 0.5], [0.5, 0.5]]\n"
    );
    let p = write(dir.path(), "w.toml", &text);
    let o = ne_lab(&["validate", p.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("R_1") && err.contains("0.9") && err.contains("row-stochastic"), "{err}");
}

#[test]
fn parse_errors_report_location() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "typo.toml", &format!("{TWO_BY_TWO}[topology]\npreset = \"ring-with-heads\"\n[run]\nalpah = 0.1\n"));
    let o = ne_lab(&["validate", p.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("alpah") && err.contains("line"), "{err}");
    assert_eq!(code(&ne_lab(&["validate", "no-such-scenario"])), 2);
    assert_eq!(code(&ne_lab(&["run"])), 2);
}

#[test]
fn run_reference_reports_equilibrium() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = ne_lab(&["run", "paper-sim", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["verdict"], "converged");
    let y: Vec<f64> = serde_json::from_value(summary["oracle"]["y_star"].clone()).unwrap();
    for (a, b) in y.iter().zip([6.837, 26.026, 10.412]) {
        assert!((a - b).abs() <= 1e-3);
    }
    assert!(summary["rate"]["rho"].as_f64().unwrap() < 1.0);
    assert_eq!(summary["steady_state"]["passes"], true);

    // metadata in every artifact
    let hash = summary["config_hash"].as_str().unwrap();
    let csv = read_csv(&out.join("trajectory.csv")).unwrap();
    assert!(csv.metadata.iter().any(|(k, v)| k == "config_hash" && v == hash));
    assert!(fs::read_to_string(out.join("trajectory.svg")).unwrap().contains(hash));
}

#[test]
fn single_iteration_run_hits_the_cap() {
    let dir = TempDir::new().unwrap();
    let o = ne_lab(&["run", "paper-sim", "--iters", "1", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let csv = read_csv(&dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.k, vec![0, 1]);
    let expected = "k,x_1.1,x_1.2,x_1.3,x_2.1,x_2.2,x_2.3,x_2.4,x_3.1,x_3.2,x_3.3,err_x,err_psi,err_xi,err_xbar,V";
    assert_eq!(csv.header.join(","), expected);
}

#[test]
fn huge_step_never_exits_zero() {
    let dir = TempDir::new().unwrap();
    let o = ne_lab(&["run", "paper-sim", "--alpha", "10", "--out-dir", dir.path().to_str().unwrap()]);
    assert!([3, 4].contains(&code(&o)), "exit {}", code(&o));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_ne!(summary["verdict"], "converged");
}

#[test]
fn unwritable_output_exits_two() {
    let dir = TempDir::new().unwrap();
    let blocker = write(dir.path(), "blocker", "not a directory");
    let o = ne_lab(&["run", "paper-sim", "--out-dir", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn certify_is_deterministic() {
    let a = ne_lab(&["certify", "paper-sim"]);
    let b = ne_lab(&["certify", "paper-sim"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let report: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(report["safe_alpha"].as_f64().unwrap() > 0.0);
    assert_eq!(report["configured_alpha_certified"], false);
    assert_eq!(report["spectral_radii"].as_array().unwrap().len(), 7);
    assert!(report["certificates"]["gamma1"].is_number());
}

#[test]
fn certify_flags_push_weights_that_are_not_column_stochastic() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "{TWO_BY_TWO}[topology]\npreset = \"ring-with-heads\"\n[weights]\nkind = \"explicit\"\n\
         [[weights.coalitions]]\npull = [[0.5, 0.5], [0.5, 0.5]]\npush = [[0.5, 0.5], [0.6, 0.5]]\n\
         [[weights.coalitions]]\npull = [[0.5, 0.5], [0.5, 0.5]]\npush = [[0.5, 0.5], [0.5, 0.5]]\n"
    );
    let p = write(dir.path(), "push.toml", &text);
    let o = ne_lab(&["certify", p.to_str().unwrap()]);
    assert_eq!(code(&o), 5, "{}", stderr(&o));
    assert!(stderr(&o).contains("C_1"), "{}", stderr(&o));
    assert_eq!(code(&ne_lab(&["validate", p.to_str().unwrap()])), 2);
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = TempDir::new().unwrap();
    let summary = run_scenario("paper-sim", &RunOptions { out_dir: Some(dir.path().to_path_buf()), ..Default::default() }).unwrap();
    let s = Scenario::load("paper-sim").unwrap();
    let log = run(&s.instance, &s.seeker, &s.x0, &s.xi0, Reference::default()).unwrap();
    let csv = read_csv(&summary.outputs.csv).unwrap();
    assert_eq!(csv.k.len(), log.rows.len());
    for ((k, x), row) in csv.k.iter().zip(&csv.x).zip(&log.rows) {
        assert_eq!(*k, row.k);
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(x), bits(&row.x), "k = {k}");
    }
    assert!(csv.extra.iter().all(|e| e[..4].iter().all(Option::is_some) && e[4].is_none()));
}

#[test]
fn svg_is_well_formed_with_one_line_per_agent() {
    let dir = TempDir::new().unwrap();
    let summary = run_scenario("paper-sim", &RunOptions { out_dir: Some(dir.path().to_path_buf()), ..Default::default() }).unwrap();
    let text = fs::read_to_string(&summary.outputs.svg).unwrap();
    let doc = roxmltree::Document::parse(&text).expect("well-formed XML");
    let polylines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
    let dashed = doc
        .descendants()
        .filter(|n| n.has_tag_name("line") && n.ancestors().any(|a| a.attribute("stroke-dasharray").is_some()))
        .count();
    assert_eq!(polylines, 10);
    assert_eq!(dashed, 3);
}

#[test]
fn lyapunov_column_and_audit_with_auto_step() {
    let dir = TempDir::new().unwrap();
    let opts = RunOptions {
        alpha: Some(ne_lab::seeker::StepSize::Auto),
        iterations: Some(50),
        audit: true,
        out_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let summary = run_scenario("paper-sim", &opts).unwrap();
    assert_eq!(summary.metadata.alpha_source, "auto");
    assert_eq!(Some(summary.metadata.alpha), summary.certified_alpha);
    let audit = summary.audit.expect("audit ran");
    assert!(audit.passes && audit.steps_checked == 50);
    let csv = read_csv(&summary.outputs.csv).unwrap();
    assert!(csv.extra.iter().all(|e| e[4].is_some_and(|v| v > 0.0)));
}

#[test]
fn batch_runs_every_scenario() {
    let dir = TempDir::new().unwrap();
    let scenarios = dir.path().join("scenarios");
    fs::create_dir(&scenarios).unwrap();
    write(&scenarios, "a.toml", reference_text());
    write(&scenarios, "b.toml", &reference_text().replace("max_iterations = 100000", "max_iterations = 5"));
    write(&scenarios, "notes.txt", "ignored");
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_ne-lab"))
        .args(["batch", scenarios.to_str().unwrap(), "--out-dir", out.to_str().unwrap()])
        .env("NE_LAB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 2);
    assert!(stdout.contains("a.toml: exit 0") && stdout.contains("b.toml: exit 3"), "{stdout}");
    for stem in ["a", "b"] {
        assert!(out.join(stem).join("summary.json").is_file());
    }
}
