use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_healthchain"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn demo_into(dir: &Path) -> Output {
    run(&[
        "demo",
        "--hospitals",
        "3",
        "--patients",
        "10",
        "--txs",
        "1000",
        "--seed",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn sweep_writes_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = run(&[
        "sweep",
        "--lambda-day",
        "10000000",
        "--mu",
        "7,25,50",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(
        lines[0],
        "seal_rate_tps,expected_unsealed,simulated_unsealed,seed"
    );
    assert_eq!(lines.len(), 4);
    let expected: Vec<_> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(expected, ["9395200", "7840000", "5680000"]);
}

#[test]
fn sweep_single_rate_and_stable_bytes() {
    let a = run(&[
        "sweep",
        "--lambda-day",
        "30000000",
        "--mu",
        "7",
        "--seed",
        "4",
    ]);
    let b = run(&[
        "sweep",
        "--lambda-day",
        "30000000",
        "--mu",
        "7",
        "--seed",
        "4",
    ]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let row = stdout(&a).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("7,29395200,"), "{row}");
}

#[test]
fn sweep_usage_errors() {
    let o = run(&["sweep", "--mu", "7"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(code(&run(&["sweep", "--lambda-day", "-5", "--mu", "7"])), 2);
    assert_eq!(
        code(&run(&["sweep", "--lambda-day", "100", "--mu", "0"])),
        2
    );
    assert_eq!(
        code(&run(&["sweep", "--lambda-day", "abc", "--mu", "7"])),
        2
    );
    assert_eq!(code(&run(&["bogus"])), 2);
}

#[test]
fn sweep_unwritable_output_is_io_error() {
    let o = run(&[
        "sweep",
        "--lambda-day",
        "100",
        "--mu",
        "7",
        "--out",
        "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["sweep", "--help"])), 0);
}

#[test]
fn capacity_default_grid() {
    let o = run(&["capacity"]);
    assert_eq!(code(&o), 0);
    let rows: Vec<Vec<u64>> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().map(|c| c.parse().unwrap()).collect())
        .collect();
    let want = [
        [1, 1, 1, 1, 1],
        [1000, 1, 1, 1, 1],
        [10000, 2, 1, 1, 1],
        [50000, 10, 3, 2, 1],
        [100000, 19, 6, 3, 1],
        [200000, 37, 11, 6, 1],
        [300000, 55, 16, 8, 2],
    ];
    assert_eq!(rows, want.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
}

#[test]
fn capacity_single_cells() {
    let o = run(&["capacity", "--patients", "50000", "--chains", "bitcoin"]);
    assert_eq!(
        stdout(&o)
            .lines()
            .nth(1)
            .unwrap()
            .split_whitespace()
            .collect::<Vec<_>>(),
        ["50000", "10"]
    );
    let o = run(&[
        "capacity",
        "--rate-per-patient",
        "55",
        "--patients",
        "50000",
        "--chains",
        "bitcoin",
    ]);
    assert_eq!(
        stdout(&o)
            .lines()
            .nth(1)
            .unwrap()
            .split_whitespace()
            .collect::<Vec<_>>(),
        ["50000", "5"]
    );
}

#[test]
fn capacity_csv_and_custom_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cap.csv");
    let o = run(&[
        "capacity",
        "--patients",
        "300000",
        "--chains",
        "cardano,fast:1000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        std::fs::read_to_string(out).unwrap(),
        "patients,cardano,fast\n300000,2,1\n"
    );
    assert_eq!(code(&run(&["capacity", "--chains", "dogecoin"])), 2);
    assert_eq!(code(&run(&["capacity", "--rate-per-patient", "0"])), 2);
}

#[test]
fn demo_passes_and_reproduces() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (oa, ob) = (demo_into(a.path()), demo_into(b.path()));
    assert_eq!(code(&oa), 0, "{}", stdout(&oa));
    assert_eq!(oa.stdout, ob.stdout);
    let report = stdout(&oa);
    assert!(report.contains("anchoring        ok"), "{report}");
    assert!(report.trim_end().ends_with("result ok"));
    for entry in std::fs::read_dir(a.path()).unwrap() {
        let e = entry.unwrap();
        assert_eq!(
            std::fs::read(e.path()).unwrap(),
            std::fs::read(b.path().join(e.file_name())).unwrap()
        );
    }
}

#[test]
fn demo_rejects_empty_population() {
    assert_eq!(code(&run(&["demo", "--patients", "0"])), 2);
    assert_eq!(code(&run(&["demo", "--hospitals", "0"])), 2);
}

#[test]
fn verify_fresh_demo_directory() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&demo_into(dir.path())), 0);
    let o = run(&["verify", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 14);
    let file = dir.path().join("mainchain.chain");
    assert_eq!(code(&run(&["verify", file.to_str().unwrap()])), 0);
}

#[test]
fn verify_reports_tampered_block() {
    let dir = tempfile::tempdir().unwrap();
    demo_into(dir.path());
    let file = dir.path().join("P0003.chain");
    let text = std::fs::read_to_string(&file).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // block 4 lives on line 6; flip one hex digit of a data hash
    let at = lines[5].find("\"data_hash\":\"").unwrap() + 13;
    let c = if &lines[5][at..at + 1] == "0" {
        "1"
    } else {
        "0"
    };
    lines[5].replace_range(at..at + 1, c);
    std::fs::write(&file, lines.join("\n") + "\n").unwrap();
    let o = run(&["verify", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    assert!(out.contains("chain P0003  block 4:"), "{out}");
}

#[test]
fn verify_reports_corrupt_line() {
    let dir = tempfile::tempdir().unwrap();
    demo_into(dir.path());
    let file = dir.path().join("mainchain.chain");
    let text = std::fs::read_to_string(&file).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let half = lines[3].len() / 2;
    lines[3].truncate(half);
    std::fs::write(&file, lines.join("\n") + "\n").unwrap();
    let o = run(&["verify", file.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("block 2 (line 4)"), "{}", stdout(&o));
}

#[test]
fn verify_missing_path() {
    assert_eq!(code(&run(&["verify", "/definitely/not/here"])), 3);
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[capacity]\npatients = [50000]\nchains = [\"bitcoin\"]\nrate_per_patient = 55\n",
    )
    .unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "capacity"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(" 5"));
    let o = run(&[
        "capacity",
        "--config",
        cfg.to_str().unwrap(),
        "--rate-per-patient",
        "110",
    ]);
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(" 10"));
    std::fs::write(&cfg, "[capacity]\npatients = \"lots\"\n").unwrap();
    assert_eq!(
        code(&run(&["--config", cfg.to_str().unwrap(), "capacity"])),
        2
    );
}
