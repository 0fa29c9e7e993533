use std::path::PathBuf;
use std::process::{Command, Output};

use causat::lang::parse_formula;
use causat::scm::Scm;
use serde_json::Value;

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causat"))
        .args(args)
        .env_remove("CAUSAT_SOLVER")
        .env("CAUSAT_CONFIG", "/nonexistent/causat.toml")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn classify_reports_fragment() {
    let o = run(&["classify", &data("example4.cau")]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "fragment: comp, causal: yes");
    let o = run(&["classify", &data("lin.cau")]);
    assert_eq!(stdout(&o).trim(), "fragment: lin, causal: no");
}

#[test]
fn parse_errors_point_at_the_token() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cau");
    std::fs::write(&bad, "sig X:{0,1};\nP(X=2) > 0;\n").unwrap();
    let o = run(&["parse", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("2:5"), "{err}");
    assert!(err.contains("P(X=2) > 0;\n    ^"), "{err}");
    assert_eq!(code(&run(&["bogus"])), 2);
    assert_eq!(code(&run(&["check", &data("example4.cau")])), 2);
}

#[test]
fn parse_prints_canonical_form() {
    let o = run(&["parse", "--formula", "sig X:{0,1}; ~P(X=1) >= 1/2 & P([] X=0) > 0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("1/2 > P(X=1) & P(X=0) > 0"), "{text}");
}

#[test]
fn check_front_door_property() {
    let o = run(&["check", "--model", &data("example2.json"), "--formula", "P([X=1]Z=1) = P(Z=1|X=1)"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("P([X=1] Z=1) = 1/2"));
    assert_eq!(stdout(&o).lines().last(), Some("true"));
}

#[test]
fn check_example4_models() {
    let f = data("example4.cau");
    let o = run(&["check", "--model", &data("example4_m.json"), &f]);
    assert_eq!(code(&o), 0);
    let o = run(&["check", "--model", &data("example4_m_prime.json"), &f]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("P([V1=1] V2=1) = 3/4"));
}

#[test]
fn check_luce_models() {
    let f = data("luce.cau");
    assert_eq!(code(&run(&["check", "--model", &data("luce_p1.json"), &f])), 0);
    assert_eq!(code(&run(&["check", "--model", &data("luce_p2.json"), &f])), 1);
    let reversed = "sig V:{p,q,r}; P(V=r | (V=q | V=r)) > P(V=q | (V=p | V=q))";
    assert_eq!(code(&run(&["check", "--model", &data("luce_p2.json"), "--formula", reversed])), 0);
}

#[test]
fn recursion_violation_is_unsat() {
    let o = run(&["solve", &data("recursion.cau")]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout(&o).trim(), "UNSAT");
    let o = run(&["--enumerate", "--budget-certs", "1", "solve", &data("recursion.cau")]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).starts_with("UNKNOWN"));
}

#[test]
fn sat_witness_rechecks() {
    let formula = "sig X:{0,1}; Y:{0,1}; P([X=1] Y=1) > P(Y=1) & P(X=1) >= 1/3";
    let o = run(&["--format", "json", "solve", "--formula", formula]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["verdict"], "sat");
    let witness = v["witness"].to_string();
    let m = Scm::from_json(&witness).unwrap();
    let (sig, fs) = causat::lang::parse_document(formula).unwrap();
    assert!(m.model_check(&fs[0]).unwrap());
    assert_eq!(m.sig().len(), sig.len());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("witness.json");
    std::fs::write(&path, witness).unwrap();
    let o = run(&["check", "--model", path.to_str().unwrap(), "--formula", formula]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn reflexive_atom_is_sat() {
    let o = run(&["solve", "--formula", "sig X:{0,1}; P(X=1) >= P(X=1)"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("SAT"));
}

#[test]
fn machine_output_is_deterministic() {
    for args in [
        vec!["--format", "json", "solve", "--formula", "sig X:{0,1}; Y:{0,1}; P([X=1] Y=1) > P(Y=1)"],
        vec!["--format", "json", "demo-frontdoor", "--seed", "3", "--count", "2"],
    ] {
        let a = run(&args);
        let b = run(&args);
        assert_eq!(a.stdout, b.stdout);
        for line in stdout(&a).lines() {
            serde_json::from_str::<Value>(line).unwrap();
        }
    }
}

#[test]
fn front_door_entailment() {
    let conclusion = "P([X=1] Y=1) = 2/5 * 3/5 + 3/5 * 16/35";
    let o = run(&["entail", &data("frontdoor_premises.cau"), "--formula", conclusion]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).trim(), "ENTAILS");
    let wrong = "P([X=1] Y=1) = 1/2";
    let o = run(&["entail", &data("frontdoor_premises.cau"), "--formula", wrong]);
    assert_eq!(code(&o), 1);
}

#[test]
fn demo_passes_for_seed_zero() {
    let o = run(&["demo-frontdoor", "--seed", "0"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("P([X=1]Y=1) = 18/35 = 18/35"), "{text}");
    assert!(text.trim_end().ends_with("PASS"));
    let o = run(&["--format", "json", "demo-frontdoor", "--count", "20"]);
    assert_eq!(code(&o), 0);
    let passes = stdout(&o).lines().filter(|l| serde_json::from_str::<Value>(l).unwrap()["pass"] == true).count();
    assert_eq!(passes, 20);
}

#[test]
fn reduce_prints_dictionary() {
    let o = run(&["reduce", "--formula", "sig X:{0,1}; Y:{0,1}; P([X=1] Y=1) > P(Y=1)"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("order: X < Y"), "{text}");
    assert!(text.contains(":= none"));
    let sig_line = text.lines().find(|l| l.starts_with("sig W:")).unwrap();
    let psi = text.lines().last().unwrap();
    let sig = causat::lang::parse_signature(sig_line).unwrap();
    assert!(!causat::lang::classify(&parse_formula(psi, &sig).unwrap()).causal);
}

#[test]
fn emit_smt_matches_golden() {
    let o = run(&["emit-smt", &data("sqrt2.cau")]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), std::fs::read_to_string(data("sqrt2.smt2")).unwrap());
}
