//! End-to-end tests of the binary: exit codes, tokens, file round trips.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use powcirc::json;
use powcirc::{Marking, PowerCircuit};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_powcirc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// The base-2 circuit of values 1..32 with the 23-marking and a 9-marking.
fn example_circuit_file(path: &Path) {
    let mut pc = PowerCircuit::new();
    let mut ids = Vec::new();
    for i in 0..6u32 {
        let row: Vec<(powcirc::NodeId, i8)> = match i {
            0 => vec![],
            1 => vec![(ids[0], 1)],
            2 => vec![(ids[1], 1)],
            3 => vec![(ids[1], 1), (ids[0], 1)],
            4 => vec![(ids[2], 1)],
            _ => vec![(ids[2], 1), (ids[0], 1)],
        };
        ids.push(pc.add_node(row).unwrap());
    }
    let mut markings = BTreeMap::new();
    markings.insert(
        "M".to_string(),
        Marking::from_pairs([(ids[0], -1), (ids[3], 1), (ids[4], 1)]).unwrap(),
    );
    markings.insert(
        "N".to_string(),
        Marking::from_pairs([(ids[0], 1), (ids[3], 1)]).unwrap(),
    );
    let file = json::circuit_to_file(&pc, &markings);
    std::fs::write(path, serde_json::to_string_pretty(&file).unwrap()).unwrap();
}

#[test]
fn wp_tokens_and_exit_codes() {
    let out = run(&["wp", "baBabABAA"]);
    assert_eq!(stdout(&out), "trivial\n");
    assert_eq!(out.status.code(), Some(0));

    let out = run(&["wp", "a"]);
    assert_eq!(stdout(&out), "nontrivial\n");
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["wp", "xyz"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tower_prints_words() {
    let out = run(&["tower", "-n", "1"]);
    assert_eq!(stdout(&out), "btaTB\n");
    assert_eq!(out.status.code(), Some(0));

    let out = run(&["tower", "-n", "25"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_prints_exact_values_and_budget_exit() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.json");
    example_circuit_file(&input);

    let out = run(&["eval", "-i", input.to_str().unwrap(), "-m", "M"]);
    assert_eq!(stdout(&out), "23\n");
    assert_eq!(out.status.code(), Some(0));

    // tower chain of 5: the top exceeds a tiny budget
    let (pc, nodes) = PowerCircuit::tower_chain(5);
    let mut markings = BTreeMap::new();
    markings.insert(
        "top".to_string(),
        Marking::from_pairs([(nodes[5], 1)]).unwrap(),
    );
    let tower = dir.path().join("tower.json");
    std::fs::write(
        &tower,
        serde_json::to_string_pretty(&json::circuit_to_file(&pc, &markings)).unwrap(),
    )
    .unwrap();
    let out = run(&[
        "eval",
        "-i",
        tower.to_str().unwrap(),
        "-m",
        "top",
        "--budget",
        "1000",
    ]);
    assert_eq!(out.status.code(), Some(3));

    // the environment variable sets the budget as well
    let out = bin()
        .args(["eval", "-i", tower.to_str().unwrap(), "-m", "top"])
        .env("POWCIRC_BUDGET_BITS", "1000")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = run(&["eval", "-i", input.to_str().unwrap(), "-m", "missing"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cmp_prints_ordering_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.json");
    example_circuit_file(&input);
    let path = input.to_str().unwrap();

    let out = run(&["cmp", "-i", path, "-l", "N", "-m", "M"]);
    assert_eq!(stdout(&out), "LT\n");
    let out = run(&["cmp", "-i", path, "-l", "M", "-m", "N"]);
    assert_eq!(stdout(&out), "GT\n");
    let out = run(&["cmp", "-i", path, "-l", "M", "-m", "M"]);
    assert_eq!(stdout(&out), "EQ\n");
}

#[test]
fn reduce_writes_a_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.json");
    example_circuit_file(&input);
    let first = dir.path().join("r1.json");
    let second = dir.path().join("r2.json");

    let out = run(&[
        "reduce",
        "-i",
        input.to_str().unwrap(),
        "-o",
        first.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    // value preserved and the output is valid reduced form
    let loaded = json::circuit_from_file(
        &serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap(),
    )
    .unwrap();
    loaded.reduced().unwrap().expect("order present");
    assert_eq!(
        loaded.circuit.eval_exact(&loaded.markings["M"], 1 << 20).unwrap(),
        23.into()
    );

    // reducing the output again reproduces it byte for byte
    let out = run(&[
        "reduce",
        "-i",
        first.to_str().unwrap(),
        "-o",
        second.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(&first).unwrap(),
        std::fs::read_to_string(&second).unwrap()
    );
}

#[test]
fn convert_round_trips_values() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.json");
    example_circuit_file(&input);
    let arith = dir.path().join("a.json");
    let back = dir.path().join("b.json");

    let out = run(&[
        "convert",
        "--to-arith",
        "-i",
        input.to_str().unwrap(),
        "-m",
        "M",
        "-o",
        arith.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    let out = run(&[
        "convert",
        "--to-pc",
        "-i",
        arith.to_str().unwrap(),
        "-o",
        back.to_str().unwrap(),
    ]);
    assert_eq!(stdout(&out), "integral\n");
    assert_eq!(out.status.code(), Some(0));

    let out = run(&["eval", "-i", back.to_str().unwrap(), "-m", "out"]);
    assert_eq!(stdout(&out), "23\n");

    // both directions at once is a usage error
    let out = run(&[
        "convert",
        "--to-arith",
        "--to-pc",
        "-i",
        input.to_str().unwrap(),
        "-o",
        back.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gadget_verdicts_follow_the_circuit() {
    let dir = tempfile::tempdir().unwrap();
    // not(or(x1, x2)): true only on 00
    let bool_file = json::BoolFile {
        gates: vec![
            json::BoolGateJson {
                op: "input".into(),
                inputs: vec![],
                level: None,
            },
            json::BoolGateJson {
                op: "input".into(),
                inputs: vec![],
                level: None,
            },
            json::BoolGateJson {
                op: "or".into(),
                inputs: vec![0, 1],
                level: None,
            },
            json::BoolGateJson {
                op: "not".into(),
                inputs: vec![2],
                level: None,
            },
        ],
        out: 3,
    };
    let input = dir.path().join("bool.json");
    std::fs::write(&input, serde_json::to_string_pretty(&bool_file).unwrap()).unwrap();

    for (assign, expected) in [("00", "LT"), ("10", "GT"), ("11", "GT")] {
        let pc = dir.path().join(format!("g{assign}.json"));
        let out = run(&[
            "gadget",
            "-i",
            input.to_str().unwrap(),
            "--assign",
            assign,
            "-o",
            pc.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
        let out = run(&["cmp", "-i", pc.to_str().unwrap(), "-l", "A", "-m", "B"]);
        // eval = 1 exactly when eps(A) <= eps(B)
        let token = stdout(&out);
        if expected == "LT" {
            assert_ne!(token.trim(), "GT");
        } else {
            assert_eq!(token.trim(), "GT");
        }
    }

    let out = run(&[
        "gadget",
        "-i",
        input.to_str().unwrap(),
        "--assign",
        "0",
        "-o",
        dir.path().join("bad.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "assignment length mismatch");
}

/// The word-problem verdicts agree with the exact rewriting oracle on a
/// small bundled corpus.
#[test]
fn wp_agrees_with_oracle_corpus() {
    let corpus = [
        "", "1", "a", "t", "bB", "Bb", "baBabABAA", "btaTB", "btaTBTT", "tT", "abAB",
        "bbaBBtab", "TbaBt", "aabbAA", "btaTBbtaTB",
    ];
    for word in corpus {
        let expected = powcirc::baumslag::naive_oracle(word, 1 << 16).unwrap();
        let out = run(&["wp", word]);
        let token = if expected { "trivial" } else { "nontrivial" };
        assert_eq!(stdout(&out).trim(), token, "word {word:?}");
        assert_eq!(out.status.code(), Some(if expected { 0 } else { 1 }));
    }
}

#[test]
fn usage_errors_exit_2() {
    let out = run(&["definitely-not-a-subcommand"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
}
