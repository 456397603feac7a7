use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hlfspn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hlfspn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const QUICK: &str = "[sim]\nwarmup_s = 5\nbatches = 3\nbatch_s = 10\n";

#[test]
fn export_dot_default_and_three_endorsers() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("default.toml"), "").unwrap();
    fs::write(dir.path().join("three.toml"), "n_endorsers = 3\n").unwrap();
    let a = hlfspn(dir.path(), &["export-dot", "default.toml"]);
    assert!(a.status.success(), "{}", stderr(&a));
    let dot = stdout(&a);
    for name in ["p:EQ_1", "p:OPF3_1", "p:CLK_RUN"] {
        assert!(dot.contains(name), "{name}");
    }
    let again = hlfspn(dir.path(), &["export-dot", "default.toml"]);
    assert_eq!(a.stdout, again.stdout);
    let three = stdout(&hlfspn(dir.path(), &["export-dot", "three.toml"]));
    for i in 1..=3 {
        for place in ["EQ", "EQF", "EP", "EPF"] {
            assert!(
                three.contains(&format!("\"p:{place}_{i}\" [shape=circle")),
                "{place}_{i}"
            );
        }
    }
    assert!(!three.contains("p:EQ_4"));
}

#[test]
fn export_net_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "block_size = 4\narrival_rate_tps = 20\n",
    )
    .unwrap();
    let o = hlfspn(dir.path(), &["export-net", "c.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let net = hlf_spn::spn::PetriNet::from_text(&stdout(&o)).unwrap();
    assert!(net.place_id("OPF3_1").is_some());
}

#[test]
fn single_point_run_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("one.toml"),
        format!("name = \"one\"\n[base]\narrival_rate_tps = 100\n{QUICK}"),
    )
    .unwrap();
    let o = hlfspn(
        dir.path(),
        &["run", "one.toml", "--out-dir", "out", "--seed", "9"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/one.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    let metrics = [
        "mrt_s",
        "tip",
        "dp_prob",
        "u_end",
        "u_ord",
        "u_com",
        "tp_tps",
        "block_call_rate",
        "timeout_call_rate",
    ];
    for m in metrics {
        assert!(
            header.contains(&m) && header.contains(&format!("{m}_ci").as_str()),
            "{m}"
        );
    }
    assert_eq!(header.len(), 2 * metrics.len() + 3);
    let seed_col = header.iter().position(|h| *h == "seed").unwrap();
    assert_eq!(lines[1].split(',').nth(seed_col), Some("9"));

    let again = hlfspn(
        dir.path(),
        &["run", "one.toml", "--out-dir", "out2", "--seed", "9"],
    );
    assert!(again.status.success());
    assert_eq!(
        fs::read(dir.path().join("out2/one.csv")).unwrap(),
        text.as_bytes()
    );
}

#[test]
fn literal_mode_flag_lowers_mrt() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), format!("name = \"s\"\nmetrics = [\"mrt_s\"]\n[base]\narrival_rate_tps = 100\nblock_size = 7\ntimeout_s = 5\n{QUICK}")).unwrap();
    let value = |mode: &str, out: &str| -> f64 {
        let o = hlfspn(
            dir.path(),
            &["run", "s.toml", "--mode", mode, "--out-dir", out],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let text = fs::read_to_string(dir.path().join(out).join("s.csv")).unwrap();
        text.lines()
            .nth(1)
            .unwrap()
            .split(',')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(value("literal", "l") < value("effective", "e"));
}

#[test]
fn parse_errors_exit_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "[base]\narrival_rate_tps = 10\nblock_size = \n",
    )
    .unwrap();
    let o = hlfspn(dir.path(), &["run", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    fs::write(
        dir.path().join("bad2.toml"),
        "[base]\narrival_rate_tps = 10\n[[sweep]]\nparam = \"warp\"\nvalues = [1]\n",
    )
    .unwrap();
    let o = hlfspn(dir.path(), &["run", "bad2.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    assert_eq!(
        hlfspn(dir.path(), &["export-dot", "missing.toml"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        hlfspn(dir.path(), &["case-study", "7"]).status.code(),
        Some(2)
    );
}

#[test]
fn divergent_simulation_exits_3_naming_the_point() {
    let dir = tempfile::tempdir().unwrap();
    let spec = "[sim]\nmax_events = 500\n[[sweep]]\nparam = \"arrival_rate_tps\"\nvalues = [40]\n";
    fs::write(dir.path().join("cap.toml"), spec).unwrap();
    let o = hlfspn(dir.path(), &["run", "cap.toml", "--out-dir", "out"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("arrival_rate_tps=40"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("one.toml"),
        format!("[base]\narrival_rate_tps = 10\n{QUICK}"),
    )
    .unwrap();
    fs::write(dir.path().join("blocker"), "not a directory").unwrap();
    let o = hlfspn(dir.path(), &["run", "one.toml", "--out-dir", "blocker/out"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn solve_uses_the_exact_solver() {
    let dir = tempfile::tempdir().unwrap();
    let spec = "name = \"x\"\n[base]\narrival_rate_tps = 20\narrival_exponential = true\ntimeout_exponential = true\ntimeout_s = 0.1\n\
                n_endorsers = 1\nn_committers = 1\neq = 1\nep = 1\noq = 1\nop = 2\nblock_size = 2\ncq = 1\ncp = 1\n";
    fs::write(dir.path().join("x.toml"), spec).unwrap();
    let o = hlfspn(dir.path(), &["solve", "x.toml", "--out-dir", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/x.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",0,0"), "{text}");
    // deterministic timings are outside the exact solver's reach
    fs::write(
        dir.path().join("det.toml"),
        "[base]\narrival_rate_tps = 20\n",
    )
    .unwrap();
    assert_eq!(
        hlfspn(dir.path(), &["solve", "det.toml"]).status.code(),
        Some(3)
    );
}
