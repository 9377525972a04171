use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_augopf");

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_clear().output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let case = fixtures().join("two_bus.m");
    let text = format!(
        "case = {case:?}\n\
         [profile]\nkind = \"reactive_sweep\"\nbus = 2\nq_from_mvar = -20.0\nq_to_mvar = 20.0\nn = 20\n\
         [generate]\nk_init = 6\nseed = 3\n\
         [train]\nhidden = [16, 16]\nepochs = 5\nlearning_rate = 1e-3\n\
         [evaluate]\ntiming_samples = 3\nnon_convergent_samples = 5\n{extra}"
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn parse_reports_sizes() {
    let o = run(&["parse", fixtures().join("case39.m").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("39 buses, 46 branches, 10 generators"), "{}", stdout(&o));
    let o = run(&["parse", fixtures().join("two_bus.m").to_str().unwrap()]);
    assert!(stdout(&o).contains("2 buses, 1 branch,"));
}

#[test]
fn parse_writes_admittance_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("y.txt");
    let o = run(&["parse", fixtures().join("two_bus.m").to_str().unwrap(), "--ybus", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(out).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|t| t.parse().unwrap()).collect())
        .collect();
    // 1/(j0.25) = -4j on the diagonal, +4j off it
    let find = |i: f64, j: f64| rows.iter().find(|r| r[0] == i && r[1] == j).unwrap()[3];
    assert!((find(1.0, 1.0) + 4.0).abs() < 1e-12);
    assert!((find(1.0, 2.0) - 4.0).abs() < 1e-12);
}

#[test]
fn invalid_inputs_exit_with_the_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.m");
    let text = fs::read_to_string(fixtures().join("two_bus.m")).unwrap();
    fs::write(&bad, text.replace("\t1\t2\t0\t0.25", "\t1\t7\t0\t0.25")).unwrap();
    let o = run(&["parse", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains('7'));
    assert_eq!(code(&run(&["parse", "/nonexistent/case.m"])), 3);
}

#[test]
fn config_errors_exit_with_the_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("g");
    let o = run(&["generate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--k-init", "0"]);
    assert_eq!(code(&o), 2);
    let bad = write_config(dir.path(), "[train]\nbogus = 1\n");
    let o = run(&["generate", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&run(&["generate", "--nonsense"])), 2);
}

#[test]
fn help_documents_every_flag() {
    let o = run(&["generate", "--help"]);
    let h = stdout(&o);
    for flag in ["--config", "--out", "--csv", "--workers", "--k-init", "--seed"] {
        assert!(h.contains(flag), "{flag}");
    }
    let h = stdout(&run(&["train", "--help"]));
    for flag in ["--epochs", "--batch-size", "--lr", "--hidden", "--mode", "--init-seed", "--shuffle-seed"] {
        assert!(h.contains(flag), "{flag}");
    }
    let h = stdout(&run(&["solve", "--help"]));
    for flag in ["--case", "--load", "--x0", "--mode", "--model"] {
        assert!(h.contains(flag), "{flag}");
    }
}

#[test]
fn pipeline_runs_and_leaves_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, "");
    let c = cfg.to_str().unwrap();
    let g = d.join("gen");
    let o = run(&["generate", "--config", c, "--out", g.to_str().unwrap(), "--csv", "--workers", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("120 records"));
    let ds = g.join("dataset.bin");
    let digests = fs::read_to_string(g.join("digests.txt")).unwrap();
    assert!(digests.starts_with("config  "));
    assert!(digests.contains("dataset.bin") && digests.contains("dataset.csv"));
    assert!(fs::read_to_string(g.join("config.toml")).unwrap().contains("k_init = 6"));

    let m = d.join("model");
    let o = run(&["train", "--config", c, "--dataset", ds.to_str().unwrap(), "--out", m.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("batch 50"));
    assert_eq!(fs::read_to_string(m.join("history.csv")).unwrap().lines().count(), 6);

    let e = d.join("eval");
    let model = format!("aug={}", m.join("model.ckpt").display());
    let o = run(&["evaluate", "--config", c, "--dataset", ds.to_str().unwrap(), "--model", &model, "--out", e.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.csv", "report.txt", "samples.csv", "timing.csv", "table.txt", "config.toml", "digests.txt"] {
        assert!(e.join(f).exists(), "{f}");
    }
    assert!(stdout(&o).contains("speedup"));

    // a truncated checkpoint is a data error
    let bytes = fs::read(m.join("model.ckpt")).unwrap();
    let cut = d.join("cut.ckpt");
    fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    let model = format!("aug={}", cut.display());
    let o = run(&["evaluate", "--config", c, "--dataset", ds.to_str().unwrap(), "--model", &model, "--out", e.to_str().unwrap()]);
    assert_eq!(code(&o), 3);

    // a diverging learning rate is a numerical error
    let o = run(&["train", "--config", c, "--dataset", ds.to_str().unwrap(), "--out", m.to_str().unwrap(), "--lr", "1e300"]);
    assert_eq!(code(&o), 4);

    // solve from files
    let load = d.join("load.csv");
    fs::write(&load, "bus,pd_mw,qd_mvar\n2,343,10\n").unwrap();
    let x0 = d.join("x0.csv");
    fs::write(&x0, "pg_1,pg_2,qg_1,qg_2,vm_1,vm_2,va_1,va_2\n1,2,0,0,0.9,0.95,0,-0.2\n1,2,0,0,0.9,0.4,0,-0.5\n").unwrap();
    let (case, l, x) = (fixtures().join("two_bus.m"), load.to_str().unwrap(), x0.to_str().unwrap());
    let o = run(&["solve", "--case", case.to_str().unwrap(), "--load", l, "--x0", x]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("solver,0,1,") && lines[2].starts_with("solver,1,1,"), "{out}");
    let ck = m.join("model.ckpt");
    let o = run(&["solve", "--case", case.to_str().unwrap(), "--load", l, "--x0", x, "--mode", "best-of-k", "--model", ck.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 2);
    let o = run(&["solve", "--case", case.to_str().unwrap(), "--load", l, "--x0", x, "--mode", "dnn"]);
    assert_eq!(code(&o), 2);
}
