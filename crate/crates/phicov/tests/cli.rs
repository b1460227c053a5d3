//! Black-box checks of the shipped binary: output bytes, artifact files,
//! and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn phicov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phicov"))
        .args(args)
        .output()
        .expect("failed to launch the binary")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn code_of(output: &Output) -> i32 {
    output.status.code().expect("process terminated by signal")
}

#[test]
fn ratio_prints_the_three_report_lines() {
    let output = phicov(&["ratio", "--phi", "threshold:l=1", "--eps", "1e-8"]);
    assert_eq!(code_of(&output), 0);
    assert_eq!(
        stdout_of(&output),
        "alpha 0.6321206\nargmin 1\ncurvature_ratio 0.6321206\n"
    );
}

#[test]
fn ratio_curve_file_lists_every_scanned_integer() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    let output = phicov(&[
        "ratio",
        "--phi",
        "geo-cap:p=0.1,l=5",
        "--eps",
        "1e-6",
        "--curve-out",
        curve.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&output), 0);
    assert!(stdout_of(&output).starts_with("alpha 0.8470605\nargmin 5\n"));

    let text = std::fs::read_to_string(&curve).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,alpha_x");
    assert_eq!(lines.len(), 6, "header plus the five scanned integers");
    assert!(lines[1].starts_with("1,"));
    assert!(lines[5].starts_with("5,"));
}

#[test]
fn gen_is_byte_stable_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = ["gen", "--random", "n=10,m=8,density=0.4,seed=7"];

    let first = phicov(&[&args[..], &["--out", a.to_str().unwrap()]].concat());
    let second = phicov(&[&args[..], &["--out", b.to_str().unwrap()]].concat());
    assert_eq!(code_of(&first), 0);
    assert_eq!(code_of(&second), 0);

    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert_eq!(bytes_a, bytes_b, "same arguments must produce identical files");
    assert_eq!(bytes_a, first.stdout, "--out mirrors stdout byte for byte");

    let loaded = phicov::instance::load_instance(&a).expect("generated file loads back");
    assert_eq!(loaded.instance.n(), 10);
    assert_eq!(loaded.instance.m(), 8);
    assert_eq!(loaded.phi_spec, "pav");
    assert_eq!(loaded.seed, Some(7));
}

#[test]
fn gen_seed_falls_back_from_random_spec_to_global_flag() {
    let without_seed = phicov(&["gen", "--random", "n=6,m=4,density=0.5", "--seed", "3"]);
    let with_seed = phicov(&["gen", "--random", "n=6,m=4,density=0.5,seed=3"]);
    assert_eq!(code_of(&without_seed), 0);
    assert_eq!(stdout_of(&without_seed), stdout_of(&with_seed));

    let default_seed = phicov(&["gen", "--random", "n=6,m=4,density=0.5"]);
    let explicit_zero = phicov(&["gen", "--random", "n=6,m=4,density=0.5,seed=0"]);
    assert_eq!(stdout_of(&default_seed), stdout_of(&explicit_zero));
}

fn write_instance(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

/// Two disjoint singleton sets plus one set covering both elements; with
/// threshold:l=1 and k=2 the pair {0,1} is uniquely optimal at value 3.
const SMALL_INSTANCE: &str = r#"{
  "n": 2,
  "weights": ["1", "2"],
  "sets": [[0], [1], [0, 1]],
  "constraint": { "type": "cardinality", "k": 2 },
  "phi": "threshold:l=1"
}"#;

#[test]
fn solve_reports_each_method_on_a_known_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_instance(dir.path(), "small.json", SMALL_INSTANCE);

    let exact = phicov(&["solve", "--instance", &path, "--method", "exact"]);
    assert_eq!(code_of(&exact), 0);
    assert_eq!(stdout_of(&exact), "method exact\nselected 0,1\nvalue 3\n");

    // Greedy takes set 2 (gain 3) first, then set 0 on a zero-gain tie.
    let greedy = phicov(&["solve", "--instance", &path, "--method", "greedy"]);
    assert_eq!(stdout_of(&greedy), "method greedy\nselected 0,2\nvalue 3\n");

    let rounded = phicov(&["solve", "--instance", &path, "--method", "lp-pipage"]);
    assert_eq!(code_of(&rounded), 0);
    let text = stdout_of(&rounded);
    assert!(text.starts_with("method lp-pipage\nselected 0,1\nvalue 3\n"), "got:\n{text}");
    assert!(text.contains("lp_objective 3\n"));
    assert!(text.contains("certified_ratio_bound "));

    // The printed certificate must be internally consistent.
    let field = |name: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{name} ")))
            .unwrap_or_else(|| panic!("missing line '{name}' in:\n{text}"))
            .parse()
            .unwrap()
    };
    assert!((field("certified_value_bound")
        - field("certified_ratio_bound") * field("lp_objective"))
    .abs()
        < 1e-12);
    assert!(field("value") >= field("certified_value_bound") - 1e-9);
    assert!(field("value") >= field("multilinear_at_lp") - 1e-9);
}

#[test]
fn solve_phi_override_changes_the_objective() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_instance(dir.path(), "small.json", SMALL_INSTANCE);

    // pav scores double coverage of element 1 an extra w * 1/2.
    let output = phicov(&["solve", "--instance", &path, "--method", "exact", "--phi", "pav"]);
    assert_eq!(code_of(&output), 0);
    assert_eq!(stdout_of(&output), "method exact\nselected 1,2\nvalue 4\n");
}

#[test]
fn solve_writes_trace_and_lp_dump_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_instance(dir.path(), "small.json", SMALL_INSTANCE);
    let trace = dir.path().join("trace.csv");
    let dump = dir.path().join("model.txt");

    let output = phicov(&[
        "solve",
        "--instance",
        &path,
        "--method",
        "lp-pipage",
        "--trace",
        trace.to_str().unwrap(),
        "--lp-dump",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&output), 0);

    let trace_text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = trace_text.lines();
    assert_eq!(lines.next(), Some("step,f"));
    let steps: Vec<&str> = lines.collect();
    assert!(!steps.is_empty());
    assert!(steps[0].starts_with("0,"));
    // The recorded objective never decreases along the rounding path.
    let values: Vec<f64> =
        steps.iter().map(|l| l.split_once(',').unwrap().1.parse().unwrap()).collect();
    for pair in values.windows(2) {
        assert!(pair[1] >= pair[0] - 1e-9);
    }

    let dump_text = std::fs::read_to_string(&dump).unwrap();
    assert!(dump_text.starts_with("# phi-coverage lp relaxation\n"));
    assert!(dump_text.contains("\nm 3\n"));
    assert!(dump_text.contains("\nn 2\n"));
    assert!(dump_text.contains("eq part=0"));
}

#[test]
fn solve_handles_partition_constraints_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{
      "n": 3,
      "weights": ["1", "1", "1"],
      "sets": [[0], [1], [1, 2], [0, 2]],
      "constraint": { "type": "partition", "parts": [[0, 1], [2, 3]], "capacities": [1, 1] },
      "phi": "threshold:l=1"
    }"#;
    let path = write_instance(dir.path(), "partition.json", json);

    let exact = phicov(&["solve", "--instance", &path, "--method", "exact"]);
    assert_eq!(code_of(&exact), 0);
    // One set per part; set 0 (element 0) with set 2 (elements 1, 2) covers
    // everything, and ties at value 3 resolve to the smallest selection.
    assert_eq!(stdout_of(&exact), "method exact\nselected 0,2\nvalue 3\n");

    let rounded = phicov(&["solve", "--instance", &path, "--method", "lp-pipage"]);
    assert_eq!(code_of(&rounded), 0);
    assert!(stdout_of(&rounded).contains("value 3\n"));
}

#[test]
fn bench_emits_the_csv_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("bench.csv");
    let output = phicov(&["bench", "table1", "--out", csv_path.to_str().unwrap()]);
    assert_eq!(code_of(&output), 0);

    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(text.as_bytes(), &output.stdout[..]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "family,computed_alpha,reference_alpha,difference,argmin_x,tolerance,status"
    );
    assert_eq!(lines.len(), 9, "header plus eight family rows");
    for row in &lines[1..] {
        assert!(row.ends_with(",ok"), "row failed tolerance: {row}");
    }
    assert!(!text.contains('\r'), "line endings are LF only");
}

#[test]
fn usage_and_input_errors_exit_two() {
    let cases: &[&[&str]] = &[
        &["ratio", "--phi", "bogus:x=1", "--eps", "1e-6"],
        &["ratio", "--phi", "pav"],
        &["ratio", "--phi", "pav", "--eps", "0.5"],
        &["bench", "table2"],
        &["gen", "--random", "n=10,m=8"],
        &["gen", "--random", "n=10,m=8,density=0.4,bogus=1"],
        &["solve", "--instance", "/nonexistent/instance.json"],
        &["nosuchcommand"],
    ];
    for args in cases {
        let output = phicov(args);
        assert_eq!(code_of(&output), 2, "expected exit 2 for {args:?}");
    }

    let dir = tempfile::tempdir().unwrap();
    let path = write_instance(dir.path(), "small.json", SMALL_INSTANCE);
    let trace = dir.path().join("trace.csv");
    let output = phicov(&[
        "solve",
        "--instance",
        &path,
        "--method",
        "greedy",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&output), 2, "--trace without lp-pipage is a usage error");
    assert!(!trace.exists());

    let help = phicov(&["--help"]);
    assert_eq!(code_of(&help), 0);
}
