use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn seldet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seldet"))
        .args(args)
        .env_remove("SELDET_PIVOT_TOL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("seldet-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_mtx(dir: &Path, name: &str, n: usize, entries: &[(usize, usize, f64)]) -> String {
    let mut s = format!("%%MatrixMarket matrix coordinate real symmetric\n{n} {n} {}\n", entries.len());
    for (i, j, v) in entries {
        s.push_str(&format!("{i} {j} {v}\n"));
    }
    let path = dir.join(name);
    std::fs::write(&path, s).unwrap();
    path.to_string_lossy().into_owned()
}

fn field(out: &str, key: &str) -> String {
    out.lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("no {key} in {out}"))[key.len()..]
        .split_whitespace()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn analyze_identity() {
    let dir = scratch("ident");
    let entries: Vec<_> = (1..=5).map(|i| (i, i, 1.0)).collect();
    let m = write_mtx(&dir, "i5.mtx", 5, &entries);
    let o = seldet(&["analyze", &m]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(field(&s, "nnz(L)"), "5");
    assert_eq!(field(&s, "ldlt flops"), "0");
    assert_eq!(field(&s, "selinv flops"), "0");
}

#[test]
fn analyze_tridiagonal_with_csv() {
    let dir = scratch("tri");
    let m = write_mtx(
        &dir,
        "t4.mtx",
        4,
        &[(1, 1, 2.0), (2, 1, -1.0), (2, 2, 2.0), (3, 2, -1.0), (3, 3, 2.0), (4, 3, -1.0), (4, 4, 2.0)],
    );
    let csv = dir.join("t4.csv");
    let o = seldet(&["analyze", &m, "--ordering", "natural", "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(field(&s, "nnz(L)"), "7");
    assert_eq!(field(&s, "ldlt flops"), "9");
    assert_eq!(field(&s, "selinv flops"), "15");
    assert!(s.contains("PASS"));
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("n,nnz_c,"));
    assert!(lines.next().unwrap().ends_with(",7,1.75,875.00,9,15"));
}

#[test]
fn selinv_two_by_two() {
    let dir = scratch("s2");
    let m = write_mtx(&dir, "a.mtx", 2, &[(1, 1, 4.0), (2, 1, 2.0), (2, 2, 3.0)]);
    let out = dir.join("z.mtx");
    let o = seldet(&["selinv", &m, "--verify", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    let logdet: f64 = field(&s, "logdet").parse().unwrap();
    assert!((logdet - 8f64.ln()).abs() < 1e-14);
    assert!(s.contains("PASS dense check"));
    let z = std::fs::read_to_string(out).unwrap();
    let vals: Vec<f64> = z
        .lines()
        .skip(2)
        .map(|l| l.split_whitespace().nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(vals, vec![0.375, -0.25, 0.5]);
}

#[test]
fn selinv_identity_and_file_ordering() {
    let dir = scratch("sid");
    let m = write_mtx(&dir, "i3.mtx", 3, &[(1, 1, 1.0), (2, 2, 1.0), (3, 3, 1.0)]);
    let order = dir.join("order.txt");
    std::fs::write(&order, "2\n0\n1\n").unwrap();
    let out = dir.join("z.mtx");
    let o = seldet(&[
        "selinv",
        &m,
        "--ordering",
        &format!("file:{}", order.display()),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(field(&stdout(&o), "logdet").parse::<f64>().unwrap(), 0.0);
    let z = std::fs::read_to_string(out).unwrap();
    assert!(z.lines().nth(1).unwrap() == "3 3 3");
}

#[test]
fn indefinite_matrix_reports_pivot() {
    let dir = scratch("indef");
    let m = write_mtx(&dir, "b.mtx", 2, &[(1, 1, 1.0), (2, 1, 2.0), (2, 2, 1.0)]);
    let o = seldet(&["selinv", &m, "--ordering", "natural"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("pivot d[1]"), "{err}");
}

#[test]
fn missing_file_fails() {
    let o = seldet(&["analyze", "/nonexistent/matrix.mtx"]);
    assert!(!o.status.success());
    let o = seldet(&["analyze", "x.mtx", "--ordering", "bogus"]);
    assert!(!o.status.success());
}

#[test]
fn gen_is_deterministic_and_feeds_reml() {
    let dir = scratch("gen");
    let a = dir.join("a.tsv");
    let b = dir.join("b.tsv");
    for p in [&a, &b] {
        let o = seldet(&["gen", "--preset", "prob1", "--seed", "42", "--out", p.to_str().unwrap()]);
        assert!(o.status.success());
        let s = stdout(&o);
        let header: Vec<&str> = s.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header[..7], ["year", "center", "variety", "y.c", "y.v", "v.c", "units"]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let small = dir.join("small.tsv");
    let o = seldet(&[
        "gen",
        "--set",
        "years=3",
        "--set",
        "centers=4",
        "--set",
        "new_varieties_per_year=2",
        "--out",
        small.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let o = seldet(&["reml", small.to_str().unwrap(), "--check-h-form", "--fd-check", "--sigma2", "2"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let s = stdout(&o);
    assert!(s.contains("PASS forms agree"));
    assert!(s.contains("PASS gradient matches finite differences"));
}

#[test]
fn gen_degenerate_and_invalid() {
    let dir = scratch("degen");
    let cfg = dir.join("cfg.txt");
    std::fs::write(
        &cfg,
        "years=1\ncenters=1\ncenters_per_year_fraction=1\ncontrol_varieties=1\nnew_varieties_per_year=0\nmissing_fraction=0\n",
    )
    .unwrap();
    let out = dir.join("one.tsv");
    let o = seldet(&["gen", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 2);
    let o = seldet(&["reml", out.to_str().unwrap()]);
    assert!(o.status.success());
    let ll: f64 = field(&stdout(&o), "loglik").parse().unwrap();
    assert!(ll.is_finite());

    let o = seldet(&["gen", "--set", "years=0", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid configuration"));
}

#[test]
fn reml_reads_hand_written_dataset() {
    let dir = scratch("reml");
    let path = dir.join("d.tsv");
    std::fs::write(&path, "y\trandom:g\n1\ta\n3\tb\n").unwrap();
    let o = seldet(&["reml", path.to_str().unwrap(), "--csv", dir.join("pev.csv").to_str().unwrap()]);
    assert!(o.status.success());
    let logdet: f64 = field(&stdout(&o), "logdet C").parse().unwrap();
    assert!((logdet - 4f64.ln()).abs() < 1e-12);
    let pev = std::fs::read_to_string(dir.join("pev.csv")).unwrap();
    assert_eq!(pev.lines().count(), 4);

    let o = seldet(&["reml", path.to_str().unwrap(), "--gamma", "1,2"]);
    assert!(!o.status.success());
}

#[test]
fn bench_empty_and_presets() {
    let o = seldet(&["bench"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(s.lines().count(), 1);
    assert!(s.starts_with("problem,ordering,n,"));

    let dir = scratch("bench");
    let csv = dir.join("b.csv");
    let timing = dir.join("t.csv");
    let o = seldet(&[
        "bench",
        "prob1",
        "prob2",
        "--csv",
        csv.to_str().unwrap(),
        "--timing-csv",
        timing.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(csv).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r[col("ldlt_flops_predicted")], r[col("ldlt_flops_measured")]);
        assert_eq!(r[col("selinv_flops_predicted")], r[col("selinv_flops_measured")]);
    }
    let nnz: Vec<u64> = rows.iter().map(|r| r[col("nnz_l")].parse().unwrap()).collect();
    assert!(nnz[0] < nnz[1]);
    assert_eq!(std::fs::read_to_string(timing).unwrap().lines().count(), 3);
}

#[test]
fn bench_continues_past_failures() {
    let o = seldet(&["bench", "/nonexistent/m.mtx", "prob1"]);
    assert!(!o.status.success());
    let s = stdout(&o);
    assert_eq!(s.lines().count(), 3);
    assert!(s.lines().nth(2).unwrap().ends_with(",ok"));
}

#[test]
fn verify_battery_passes() {
    let o = seldet(&["verify"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn pivot_tolerance_env_flags_near_singular() {
    let dir = scratch("env");
    let m = write_mtx(&dir, "a.mtx", 2, &[(1, 1, 4.0), (2, 1, 2.0), (2, 2, 3.0)]);
    let o = Command::new(env!("CARGO_BIN_EXE_seldet"))
        .args(["selinv", &m, "--out", dir.join("z.mtx").to_str().unwrap()])
        .env("SELDET_PIVOT_TOL", "0.9")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("near-singular"));
}
