use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use arrowhead::io::{read_blocks, read_mps, read_solution};
use arrowhead::postsolve::kkt_residuals;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_arrowhead"));
    for var in ["ARROWHEAD_RANKS", "ARROWHEAD_MODE", "ARROWHEAD_DISABLE", "ARROWHEAD_OUT", "ARROWHEAD_SEED"] {
        c.env_remove(var);
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn generated(dir: &Path, prefix: &str, seed: u64) -> PathBuf {
    let out = p(dir, prefix);
    let seed = seed.to_string();
    let o = run(&[
        "generate", "--out", &out, "--blocks", "4", "--rows", "10", "--cols", "10", "--seed", &seed,
        "--plant-duplicates", "0.1", "--plant-singletons", "0.1", "--plant-fixed", "0.05", "--plant-empty", "0.05",
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    dir.join(prefix)
}

fn file(prefix: &Path, ext: &str) -> String {
    format!("{}{ext}", prefix.display())
}

fn objective_line(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).lines().find(|l| l.starts_with("objective ")).expect("objective printed").to_string()
}

#[test]
fn generate_is_deterministic_and_plants_a_manifest() {
    let dir = TempDir::new().unwrap();
    let a = generated(dir.path(), "a", 7);
    let b = generated(dir.path(), "b", 7);
    for ext in [".mps", ".blk", ".manifest.json"] {
        assert_eq!(std::fs::read(file(&a, ext)).unwrap(), std::fs::read(file(&b, ext)).unwrap(), "{ext} differs");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(file(&a, ".manifest.json")).unwrap()).unwrap();
    assert!(!manifest["duplicates"].as_array().unwrap().is_empty());
    let lp = read_mps(Path::new(&file(&a, ".mps"))).unwrap();
    read_blocks(Path::new(&file(&a, ".blk")), &lp).unwrap();
}

#[test]
fn presolve_writes_consistent_outputs() {
    let dir = TempDir::new().unwrap();
    let g = generated(dir.path(), "g", 3);
    let out = p(dir.path(), "r");
    let o = run(&["presolve", "--mps", &file(&g, ".mps"), "--blocks", &file(&g, ".blk"), "--ranks", "2", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    assert!(text(&o).contains("nonzeros (%)"));

    let stats: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(format!("{out}.stats.json")).unwrap()).unwrap();
    assert!(stats["nonzeros_pct"].as_f64().unwrap() <= 100.0);
    let reduced = read_mps(Path::new(&format!("{out}.mps"))).unwrap();
    read_blocks(Path::new(&format!("{out}.blk")), &reduced).unwrap();
    assert_eq!(stats["reduced"]["rows"].as_u64().unwrap() as usize, reduced.n_rows());
    assert_eq!(stats["reduced"]["cols"].as_u64().unwrap() as usize, reduced.n_cols());
    assert_eq!(stats["reduced"]["nnz"].as_u64().unwrap() as usize, reduced.nnz());
}

#[test]
fn lockstep_outputs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let g = generated(dir.path(), "g", 11);
    for run_name in ["x", "y"] {
        let out = p(dir.path(), run_name);
        let o = run(&["presolve", "--mps", &file(&g, ".mps"), "--blocks", &file(&g, ".blk"), "--ranks", "4", "--out", &out]);
        assert_eq!(code(&o), 0, "{}", text(&o));
    }
    for ext in [".mps", ".blk", ".stack.json"] {
        let x = std::fs::read(format!("{}{ext}", p(dir.path(), "x"))).unwrap();
        let y = std::fs::read(format!("{}{ext}", p(dir.path(), "y"))).unwrap();
        assert_eq!(x, y, "{ext} differs");
    }
}

#[test]
fn verify_agrees_across_rank_counts() {
    let dir = TempDir::new().unwrap();
    let g = generated(dir.path(), "g", 5);
    let (mps, blk) = (file(&g, ".mps"), file(&g, ".blk"));
    let one = run(&["verify", "--mps", &mps, "--blocks", &blk, "--ranks", "1"]);
    let four = run(&["verify", "--mps", &mps, "--blocks", &blk, "--ranks", "4", "--mode", "threaded"]);
    assert_eq!(code(&one), 0, "{}", text(&one));
    assert_eq!(code(&four), 0, "{}", text(&four));
    let parse = |o: &Output| objective_line(o).split_whitespace().nth(1).unwrap().parse::<f64>().unwrap();
    assert!((parse(&one) - parse(&four)).abs() <= 1e-6 * (1.0 + parse(&one).abs()));
}

#[test]
fn verify_from_written_stack() {
    let dir = TempDir::new().unwrap();
    let g = generated(dir.path(), "g", 9);
    let (mps, blk, out) = (file(&g, ".mps"), file(&g, ".blk"), p(dir.path(), "r"));
    assert_eq!(code(&run(&["presolve", "--mps", &mps, "--blocks", &blk, "--ranks", "2", "--out", &out])), 0);
    let (stack, red) = (format!("{out}.stack.json"), format!("{out}.mps"));
    let sol = p(dir.path(), "r.sol");
    let o = run(&["verify", "--mps", &mps, "--blocks", &blk, "--stack", &stack, "--reduced", &red, "--solution", &sol]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let lp = read_mps(Path::new(&mps)).unwrap();
    let s = read_solution(Path::new(&sol), &lp).unwrap();
    assert!(kkt_residuals(&lp, &s).within(1e-6));

    // Truncated file.
    let full = std::fs::read_to_string(&stack).unwrap();
    std::fs::write(&stack, &full[..full.len() / 2]).unwrap();
    let o = run(&["verify", "--mps", &mps, "--blocks", &blk, "--stack", &stack, "--reduced", &red]);
    assert_eq!(code(&o), 12, "{}", text(&o));

    // Well-formed JSON with a sync marker dropped on one rank.
    let mut stacks: serde_json::Value = serde_json::from_str(&full).unwrap();
    let entries = stacks[0]["entries"].as_array_mut().unwrap();
    let k = entries.iter().position(|e| e.get("SyncEvent").is_some()).unwrap();
    entries.remove(k);
    std::fs::write(&stack, serde_json::to_string(&stacks).unwrap()).unwrap();
    let o = run(&["verify", "--mps", &mps, "--blocks", &blk, "--stack", &stack, "--reduced", &red]);
    assert_eq!(code(&o), 12, "{}", text(&o));
}

const BLOCKS_1: &str = "NBLOCKS 1\nROW r 1\nCOL x 1\n";

fn write_problem(dir: &Path, mps: &str, blk: &str) -> (String, String) {
    let (m, b) = (p(dir, "t.mps"), p(dir, "t.blk"));
    std::fs::write(&m, mps).unwrap();
    std::fs::write(&b, blk).unwrap();
    (m, b)
}

#[test]
fn infeasible_and_unbounded_exit_codes() {
    let dir = TempDir::new().unwrap();
    let infeasible = "NAME inf\nROWS\n N obj\n G r\nCOLUMNS\n x obj 1 r 1\nRHS\n RHS r 2\nBOUNDS\n UP BND x 1\nENDATA\n";
    let (m, b) = write_problem(dir.path(), infeasible, BLOCKS_1);
    let o = run(&["presolve", "--mps", &m, "--blocks", &b, "--out", &p(dir.path(), "o")]);
    assert_eq!(code(&o), 10, "{}", text(&o));
    assert!(text(&o).contains("model-cleanup"), "{}", text(&o));

    let unbounded = "NAME unb\nROWS\n N obj\n G r\nCOLUMNS\n x r 1\n y obj -1\nRHS\n RHS r 1\nENDATA\n";
    let (m, b) = write_problem(dir.path(), unbounded, "NBLOCKS 1\nROW r 1\nCOL x 1\nCOL y 1\n");
    let o = run(&["presolve", "--mps", &m, "--blocks", &b, "--out", &p(dir.path(), "o")]);
    assert_eq!(code(&o), 11, "{}", text(&o));
}

#[test]
fn input_error_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = p(dir.path(), "o");
    assert_eq!(code(&run(&[])), 2);
    let missing = p(dir.path(), "nope.mps");
    assert_eq!(code(&run(&["presolve", "--mps", &missing, "--blocks", &missing, "--out", &out])), 1);

    let (m, b) = write_problem(dir.path(), "NAME bad\nROWS\n N obj\nWHAT\nENDATA\n", BLOCKS_1);
    let o = run(&["presolve", "--mps", &m, "--blocks", &b, "--out", &out]);
    assert_eq!(code(&o), 3);
    assert!(text(&o).contains("line 4"), "{}", text(&o));

    let ok = "NAME ok\nROWS\n N obj\n E r\nCOLUMNS\n x obj 1 r 1\nRHS\n RHS r 1\nENDATA\n";
    let (m, b) = write_problem(dir.path(), ok, "NBLOCKS 1\nROW r 1\n");
    assert_eq!(code(&run(&["presolve", "--mps", &m, "--blocks", &b, "--out", &out])), 3);

    let (m, b) = write_problem(dir.path(), ok, BLOCKS_1);
    let o = bin().args(["presolve", "--mps", &m, "--blocks", &b, "--out", &out]).env("ARROWHEAD_RANKS", "2").output().unwrap();
    assert_eq!(code(&o), 2, "{}", text(&o));
    let o = run(&["presolve", "--mps", &m, "--blocks", &b, "--out", &out, "--disable", "no-such-presolver"]);
    assert_eq!(code(&o), 2);
    let o = run(&["presolve", "--mps", &m, "--blocks", &b, "--out", &out, "--disable", "parallel-constrs", "--disable", "lin-dependencies"]);
    assert_eq!(code(&o), 0, "{}", text(&o));
}

#[test]
fn oracle_cap_is_refused() {
    let dir = TempDir::new().unwrap();
    let out = p(dir.path(), "big");
    let o = run(&["generate", "--out", &out, "--blocks", "2", "--rows", "1100", "--cols", "1100", "--density", "0.002"]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let o = run(&["verify", "--mps", &format!("{out}.mps"), "--blocks", &format!("{out}.blk")]);
    assert_eq!(code(&o), 14, "{}", text(&o));
}
