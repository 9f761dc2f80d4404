use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CYCLE: &str = "Q(X,Y) :- R(X,Y), S(Y,Z), T(Z,W), U(W,X).";

fn fixture() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    fs::create_dir_all(root.join("data")).unwrap();
    for (name, body) in [
        ("cycle.q", CYCLE),
        ("card.stats", "mode symbolic\ncard(R) <= N\ncard(S) <= N\ncard(T) <= N\ncard(U) <= N\n"),
        ("data/R.csv", "X,Y\n1,p\n1,q\n2,p\n"),
        ("data/S.csv", "Y,Z\np,3\nq,4\nq,5\n"),
        ("data/T.csv", "Z,W\n3,i\n5,i\n5,j\n"),
        ("data/U.csv", "W,X\ni,1\nj,1\nk,2\n"),
    ] {
        fs::write(root.join(name), body).unwrap();
    }
    (dir, root)
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqbound"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn parse_errors_exit_2() {
    let (_d, root) = fixture();
    fs::write(root.join("bad.q"), "Q(X :- R(X).").unwrap();
    let o = run(&["bound", "bad.q", "card.stats"], &root);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("syntax error at 1:"));
    let o = run(&["stats", "cycle.q", "missing"], &root);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unbounded_exits_3() {
    let (_d, root) = fixture();
    fs::write(root.join("none.stats"), "mode symbolic\n").unwrap();
    let o = run(&["bound", "cycle.q", "none.stats", "--target", "all"], &root);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("log_N bound: inf"));
    let o = run(&["prove", "cycle.q", "none.stats"], &root);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn violated_statistics_exit_4() {
    let (_d, root) = fixture();
    fs::write(
        root.join("tight.stats"),
        "mode numeric N=12\ncard(R) <= 3\ncard(S) <= 3\ncard(T) <= 3\ncard(U) <= 3\ndeg(U; X | W) <= 1\n",
    )
    .unwrap();
    let o = run(&["run", "cycle.q", "tight.stats", "data"], &root);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    fs::write(root.join("data/U.csv"), "W,X\ni,1\ni,2\n").unwrap();
    let o = run(&["run", "cycle.q", "tight.stats", "data"], &root);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("deg(U; X | W) <= 1 violated: actual 2 at W=i"));
    let o = run(&["run", "cycle.q", "tight.stats", "data", "--no-validate"], &root);
    assert!(o.status.success());
}

#[test]
fn inferred_statistics_round_trip() {
    let (_d, root) = fixture();
    let o = run(&["stats", "cycle.q", "data", "--max-cond", "1"], &root);
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "deg(U; X | W) <= 1"), "{text}");
    fs::write(root.join("inferred.stats"), &text).unwrap();
    let o = run(&["run", "cycle.q", "inferred.stats", "data", "--plan", "static"], &root);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "X,Y\n1,p\n1,q\n");

    let o = run(&["stats", "cycle.q", "data", "--max-cond", "0"], &root);
    let text = stdout(&o);
    assert!(text.lines().skip(1).all(|l| l.starts_with("card(")), "{text}");
}

#[test]
fn single_atom_certificate_is_trivial() {
    let (_d, root) = fixture();
    fs::write(root.join("one.q"), "Q(A,B) :- R(A,B).").unwrap();
    fs::write(root.join("one.stats"), "card(R) <= N").unwrap();
    let o = run(&["prove", "one.q", "one.stats"], &root);
    let text = stdout(&o);
    assert!(o.status.success());
    assert!(text.contains("inequality: h(AB) <= h(AB)"));
    assert!(!text.contains("->"));
    assert!(text.lines().any(|l| l == "VERIFIED"));
}

#[test]
fn path_widths_are_one() {
    let (_d, root) = fixture();
    fs::write(root.join("path.q"), "Q(A,B,C,D) :- R(A,B), S(B,C), T(C,D).").unwrap();
    fs::write(root.join("path.stats"), "card(R) <= N\ncard(S) <= N\ncard(T) <= N").unwrap();
    for m in ["fhtw", "subw"] {
        let o = run(&["width", "path.q", "path.stats", "--measure", m], &root);
        assert_eq!(stdout(&o).lines().next(), Some(format!("{m} = 1").as_str()));
    }
}

#[test]
fn plans_agree_and_reports_are_written() {
    let (_d, root) = fixture();
    let mut answers = Vec::new();
    for plan in ["adaptive", "static", "oracle"] {
        let o = run(
            &["--threads", "2", "run", "cycle.q", "card.stats", "data", "--plan", plan, "--report", "rep.json", "--json"],
            &root,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        answers.push(stdout(&o));
    }
    assert!(answers.iter().all(|a| a == "X,Y\n1,p\n1,q\n"));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(root.join("rep.json")).unwrap()).unwrap();
    assert!(rep["rules"].as_array().is_some_and(|r| !r.is_empty()));
    for td in ["0", "1", "2"] {
        let o = run(&["run", "cycle.q", "card.stats", "data", "--plan", "static", "--td", td], &root);
        assert_eq!(stdout(&o), "X,Y\n1,p\n1,q\n");
    }
    let o = run(&["run", "cycle.q", "card.stats", "data", "--plan", "static", "--td", "9"], &root);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_reports_matches() {
    let (_d, root) = fixture();
    let o = run(&["verify", "cycle.q", "data"], &root);
    assert!(o.status.success());
    assert!(stdout(&o).contains("all plans match the oracle"));
    let o = run(&["verify", "--corpus", "5", "--seed", "40"], &root);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().filter(|l| l.ends_with("match (missing 0, extra 0)")).count(), 10);
}

#[test]
fn oracle_guard_exits_5() {
    let (_d, root) = fixture();
    // the body join of a four-way cross product has 40^4 rows
    fs::write(root.join("cross.q"), "Q(A) :- R(A), S(B), T(C), U(D).").unwrap();
    let rows: String = (0..40).map(|i| format!("{i}\n")).collect();
    for (s, col) in [("R", "A"), ("S", "B"), ("T", "C"), ("U", "D")] {
        fs::write(root.join(format!("data/{s}.csv")), format!("{col}\n{rows}")).unwrap();
    }
    let o = run(&["run", "cross.q", "card.stats", "data", "--plan", "oracle"], &root);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));
}
