mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::EXAMPLES;
use serde_json::Value;
use tempfile::TempDir;

fn multiroot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multiroot"))
        .args(args)
        .output()
        .expect("spawn multiroot")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn load(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn solve_example(dir: &TempDir, index: usize, extra: &[&str]) -> (Output, PathBuf) {
    let ex = &EXAMPLES[index];
    let out = dir.path().join(format!("{}.json", ex.name));
    let problem = ex.problem_file();
    let mut args = vec![
        "solve",
        path_str(&problem),
        "-o",
        path_str(&out),
        "--precision-bits",
        "192",
    ];
    args.extend_from_slice(extra);
    (multiroot(&args), out)
}

#[test]
fn example_fixtures_reach_the_error_target() {
    let dir = TempDir::new().unwrap();
    for (i, ex) in EXAMPLES.iter().enumerate() {
        let (out, report) = solve_example(&dir, i, &["--verify"]);
        assert_eq!(code(&out), 0, "{}: {}", ex.name, stderr(&out));
        let r = load(&report);
        assert_eq!(r["termination"], "converged");
        let reached = r["iterations_to_target"].as_u64().expect("target reached");
        assert!(reached as usize <= ex.iterations, "{}: {reached}", ex.name);
        assert_eq!(r["verification"]["passed"], true);
    }
}

#[test]
fn report_goes_to_stdout_without_output_flag() {
    let problem = EXAMPLES[2].problem_file();
    let out = multiroot(&["solve", path_str(&problem)]);
    assert_eq!(code(&out), 0);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["family"], "exponential");
    assert_eq!(r["precision_bits"], 256);
}

#[test]
fn mismatched_lengths_report_a_line() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(
        &p,
        "family = \"algebraic\"\nrepresentation = \"coefficients\"\nprecision_bits = 128\nmultiplicities = [1, 1]\ninitial = [\"0.5\"]\n\n[coefficients]\na = [\"0\", \"-1\"]\n",
    )
    .unwrap();
    let out = multiroot(&["solve", path_str(&p)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.toml:5"), "{}", stderr(&out));
}

#[test]
fn unknown_keys_and_missing_files_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("typo.toml");
    fs::write(&p, "family = \"algebraic\"\nrepresentation = \"coefficients\"\nprecision_bits = 128\nmultiplicity = [1]\ninitial = [\"0\"]\n").unwrap();
    assert_eq!(code(&multiroot(&["solve", path_str(&p)])), 2);
    assert_eq!(
        code(&multiroot(&[
            "solve",
            path_str(&dir.path().join("absent.toml"))
        ])),
        2
    );
}

#[test]
fn generate_refuses_odd_harmonic_total() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("odd.toml");
    let out = multiroot(&[
        "generate",
        "--family",
        "trigonometric",
        "--roots",
        "1:2,2:1",
        "-o",
        path_str(&p),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(!p.exists());
}

#[test]
fn generated_problems_solve_back_to_their_roots() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("algebraic", "2:2,3:3,5:1"),
        ("exponential", "-2:2,3:2"),
        ("trigonometric", "0.5:2,2:1,4:3"),
    ];
    for (family, roots) in cases {
        let problem = dir.path().join(format!("{family}.toml"));
        let report = dir.path().join(format!("{family}.json"));
        let out = multiroot(&[
            "generate",
            "--family",
            family,
            "--roots",
            roots,
            "-o",
            path_str(&problem),
        ]);
        assert_eq!(code(&out), 0, "{family}: {}", stderr(&out));
        let out = multiroot(&[
            "solve",
            path_str(&problem),
            "-o",
            path_str(&report),
            "--verify",
        ]);
        assert_eq!(code(&out), 0, "{family}: {}", stderr(&out));
        let r = load(&report);
        // A triple root at 256 bits is only determined to about 1e-25.
        let last = r["trace"].as_array().unwrap().last().unwrap();
        for e in last["errors"].as_array().unwrap() {
            let e: f64 = e.as_str().unwrap().parse().unwrap();
            assert!(e < 1e-20, "{family}: {e:e}");
        }
    }
}

#[test]
fn verify_accepts_the_report_and_rejects_tampering() {
    let dir = TempDir::new().unwrap();
    let (out, report) = solve_example(&dir, 0, &[]);
    assert_eq!(code(&out), 0);
    let problem = EXAMPLES[0].problem_file();
    let out = multiroot(&["verify", path_str(&problem), path_str(&report)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let mut r = load(&report);
    let x: f64 = r["final_approximations"][2]
        .as_str()
        .unwrap()
        .parse()
        .unwrap();
    r["final_approximations"][2] = Value::String(format!("{}", x + 1e-6));
    let tampered = dir.path().join("tampered.json");
    fs::write(&tampered, serde_json::to_string(&r).unwrap()).unwrap();
    assert_ne!(
        code(&multiroot(&[
            "verify",
            path_str(&problem),
            path_str(&tampered)
        ])),
        0
    );

    let text = fs::read_to_string(&report).unwrap();
    let truncated = dir.path().join("truncated.json");
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert_eq!(
        code(&multiroot(&[
            "verify",
            path_str(&problem),
            path_str(&truncated)
        ])),
        2
    );
}

#[test]
fn trace_values_round_trip_at_full_precision() {
    let dir = TempDir::new().unwrap();
    let (out, report) = solve_example(&dir, 1, &[]);
    assert_eq!(code(&out), 0);
    let r = load(&report);
    let digits = r["digits"].as_u64().unwrap() as usize;
    let p = multiroot::Precision::new(192).unwrap();
    for row in r["trace"].as_array().unwrap() {
        for v in row["approximations"].as_array().unwrap() {
            let s = v.as_str().unwrap();
            let x = p.parse(s).unwrap();
            assert_eq!(p.format(&x), s, "re-serialization changed {s}");
            let mantissa = s.trim_start_matches('-').split(['e', 'E']).next().unwrap();
            assert!(
                mantissa.chars().filter(char::is_ascii_digit).count() >= digits,
                "{s}"
            );
        }
    }
}

#[test]
fn order_subcommand_reads_a_report() {
    let dir = TempDir::new().unwrap();
    let problem = EXAMPLES[0].problem_file();
    let report = dir.path().join("r.json");
    assert_eq!(
        code(&multiroot(&[
            "solve",
            path_str(&problem),
            "-o",
            path_str(&report)
        ])),
        0
    );
    let out = multiroot(&["order", path_str(&report)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let o: Value = serde_json::from_slice(&out.stdout).unwrap();
    let order = o["order"].as_f64().unwrap();
    assert!((2.6..=3.4).contains(&order), "{order}");
    assert_eq!(o["source"], "errors");
}

#[test]
fn theorem_flags_populate_the_report() {
    let dir = TempDir::new().unwrap();
    let (out, report) = solve_example(&dir, 2, &["--theorems"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = load(&report);
    assert_eq!(r["theorems"]["passed"], true);
    let (out, report) = solve_example(&dir, 2, &["--theorems", "--c", "1.2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(load(&report)["theorems"]["passed"], false);
}
