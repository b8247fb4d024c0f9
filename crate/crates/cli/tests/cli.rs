use std::path::PathBuf;
use std::process::{Command, Output};

use qtoroidal_cli::{parse, plan, Defaults};

fn scripts_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scripts")
}

fn qtoroidal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtoroidal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn temp_script(name: &str, body: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("qtoroidal-{}-{name}", std::process::id()));
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn shipped_scripts_round_trip_and_plan() {
    let mut seen = 0;
    for entry in std::fs::read_dir(scripts_dir()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let ast = parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse(&ast.to_string()).unwrap(), ast, "{}", path.display());
        plan(&ast, &Defaults::default()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 3);
}

#[test]
fn quick_script_passes() {
    let path = scripts_dir().join("quick.checks");
    let out = qtoroidal(&["--script", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn empty_script_passes_with_zero_checks() {
    let path = temp_script("empty.checks", "# nothing here\n");
    let out = qtoroidal(&["--script", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 0);
}

#[test]
fn perturbed_constant_prints_both_sides() {
    let path = scripts_dir().join("perturbed.checks");
    let out = qtoroidal(&["--script", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("FAIL h_bracket"), "{text}");
    assert!(text.contains("lhs = ((q+q^-1)/2)|0>"), "{text}");
    assert!(text.contains("rhs = (q+q^-1)|0>"), "{text}");
}

#[test]
fn exit_codes_distinguish_errors() {
    let bad = temp_script("bad.checks", "check R1 { i=3 }\n");
    let out = qtoroidal(&["--script", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("1:12") && err.contains("index out of {0,1}"), "{err}");

    let out = qtoroidal(&["--script", "/nonexistent/dir/none.checks"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(qtoroidal(&["--relation", "R7"]).status.code(), Some(2));
    assert_eq!(
        qtoroidal(&["--convention", "uv=up", "--relation", "R1"]).status.code(),
        Some(2)
    );
    assert_eq!(qtoroidal(&[]).status.code(), Some(2));
}

#[test]
fn ad_hoc_relation_uses_flags() {
    let out = qtoroidal(&[
        "--relation",
        "r2",
        "--modes",
        "3",
        "--max-degree",
        "2",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["checks"][0]["id"], "R2");
    assert_eq!(v["checks"][0]["params"]["max_degree"], "2");

    let out = qtoroidal(&[
        "--relation",
        "R3",
        "--modes",
        "3",
        "--max-degree",
        "2",
        "--window",
        "2",
        "--convention",
        "flip=off",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn list_names_every_check() {
    let out = qtoroidal(&["--list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["R1", "GS16", "S4", "heisenberg", "serre_polynomial", "quartic_bracket"] {
        assert!(
            text.lines().any(|l| l.starts_with(name)),
            "{name} missing from:\n{text}"
        );
    }
}

#[test]
fn json_output_is_byte_stable() {
    let body = "check partial_fractions { order=8 random=5 }\ncheck heisenberg { modes=3 states=basis(deg<=4) sample=5 }\ncheck GS13 { window=2 states=basis(deg<=1) }\n";
    let path = temp_script("stable.checks", body);
    let p = path.to_str().unwrap();
    let a = qtoroidal(&["--script", p, "--format", "json", "--seed", "11"]);
    let b = qtoroidal(&["--script", p, "--format", "json", "--seed", "11", "--jobs", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = qtoroidal(&["--script", p, "--format", "json", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}
