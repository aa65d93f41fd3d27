use std::path::PathBuf;
use std::process::{Command, Output};

fn adgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adgraph")).args(args).output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = adgraph(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_str().unwrap().to_string()
}

#[test]
fn worked_examples() {
    assert_eq!(stdout(&["eval", "--expr", "2*x + log(x)", "--at", "x=2"]), "4.693147180559945\n");
    assert_eq!(stdout(&["diff", "--expr", "2*x + log(x)", "--wrt", "x", "--at", "x=2"]), "2.5\n");
    assert_eq!(stdout(&["diff", "--expr", "2*x + log(x)", "--wrt", "x"]), "(2.0 + x^(-1))\n");
    assert_eq!(
        stdout(&["taylor", "--expr", "log(x)", "--var", "x", "--center", "1", "--terms", "6", "--exact"]),
        "[0, 1, -1/2, 1/3, -1/4, 1/5]\n"
    );
    assert_eq!(
        stdout(&["taylor", "--expr", "1/(1+x)", "--var", "x", "--center", "0", "--terms", "4"]),
        "[1.0, -1.0, 1.0, -1.0]\n"
    );
}

#[test]
fn higher_order_and_exact_diff() {
    assert_eq!(stdout(&["diff", "--expr", "x^3", "--wrt", "x", "--order", "2", "--at", "x=2"]), "12.0\n");
    assert_eq!(
        stdout(&["diff", "--expr", "1/(1+x)", "--wrt", "x", "--exact", "--at", "x=1/2"]),
        "-4/9\n"
    );
}

#[test]
fn exports() {
    let dot = stdout(&["diff", "--expr", "2*x + log(x)", "--wrt", "x", "--dot"]);
    assert!(dot.starts_with("digraph G {\n"));
    assert!(dot.contains("[label=\"df/dx\"]"));
    let json: serde_json::Value =
        serde_json::from_str(&stdout(&["diff", "--expr", "2*x + log(x)", "--wrt", "x", "--json"])).unwrap();
    let nodes = json["nodes"].as_array().unwrap();
    let d = json["derivative"].as_u64().unwrap() as usize;
    assert_eq!(nodes[d]["op"], "add");
}

#[test]
fn out_file() {
    let dir = std::env::temp_dir().join(format!("adgraph-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("g.dot");
    let printed = stdout(&["diff", "--expr", "x*x", "--wrt", "x", "--dot", "--out", path.to_str().unwrap()]);
    assert_eq!(printed, "");
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("digraph"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| adgraph(args).status.code().unwrap();
    assert_eq!(code(&["eval", "--expr", "x", "--at", "x=1"]), 0);
    assert_eq!(code(&["diff", "--expr", "x"]), 2);
    assert_eq!(code(&["eval", "--expr", "x + 1"]), 2);
    assert_eq!(code(&["eval", "--expr", "x +", "--at", "x=1"]), 3);
    assert_eq!(code(&["diff", "--expr", "x^y", "--wrt", "x"]), 3);
    assert_eq!(code(&["eval", "--expr", "log(x)", "--at", "x=-1"]), 4);
    assert_eq!(code(&["eval", "--expr", "1/x", "--at", "x=0"]), 4);
    assert_eq!(
        code(&["taylor", "--expr", "log(x)", "--var", "x", "--center", "2", "--terms", "3", "--exact"]),
        4
    );
    assert_eq!(code(&["pcfg-train", "--grammar", "/nonexistent/g", "--corpus", "/nonexistent/c"]), 5);
    assert_eq!(code(&["pcfg-train", "--grammar", &data("toy.corpus"), "--corpus", &data("toy.corpus")]), 3);
}

#[test]
fn training_report() {
    let out = stdout(&["pcfg-train", "--grammar", &data("toy.grammar"), "--corpus", &data("toy.corpus"), "--iters", "30"]);
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["tape_compiles"], 1);
    let trace: Vec<f64> = report["log_likelihood"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(trace.len(), 30);
    assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
}
