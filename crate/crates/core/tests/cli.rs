use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ep_cde::cli::{read_dataset, write_dataset, GridFile};
use ep_cde::schedule::build_schedule;
use ep_cde::sim::{generate_dataset, ModelSpec};
use ep_cde::Loss;

fn ep_cde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ep-cde"))
        .args(args)
        .env("EP_CDE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sample_file(dir: &Path, n: usize) -> String {
    let data = generate_dataset(&ModelSpec::uniform_null(), n, 42).unwrap();
    let path = dir.join("data.csv");
    write_dataset(&path, &data).unwrap();
    assert_eq!(read_dataset(&path).unwrap(), data);
    path.to_str().unwrap().to_string()
}

#[test]
fn estimate_records_the_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample_file(dir.path(), 500);
    let out = dir.path().join("grid.csv");
    let o = ep_cde(&["estimate", "--input", &input, "--loss", "square", "--grid", "21", "11", "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let g = GridFile::parse(&fs::read_to_string(&out).unwrap()).unwrap();
    let s = build_schedule(500, Loss::Square, None).unwrap();
    assert_eq!(g.meta("K"), Some(s.k_cut().to_string().as_str()));
    assert_eq!(g.meta("T"), Some(s.t_cut().to_string().as_str()));
    assert_eq!(g.meta("n"), Some("500"));
    assert_eq!(g.grid.values.len(), 21 * 11);
}

#[test]
fn projected_grid_is_nonnegative() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample_file(dir.path(), 200);
    for loss in ["square", "line"] {
        let out = dir.path().join(format!("grid_{loss}.csv"));
        let o = ep_cde(&["estimate", "--input", &input, "--loss", loss, "--grid", "41", "9", "--project", "--output", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let g = GridFile::parse(&fs::read_to_string(&out).unwrap()).unwrap();
        assert!(g.grid.values.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn out_of_range_predictor_exits_2_citing_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "y,x\n0.1,0.5\n0.2,0.3\n0.3,1.2\n").unwrap();
    let o = ep_cde(&["estimate", "--input", input.to_str().unwrap(), "--loss", "square", "--output", "/dev/null"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}

#[test]
fn too_few_rows_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample_file(dir.path(), 10);
    let out = dir.path().join("grid.csv");
    let o = ep_cde(&["estimate", "--input", &input, "--loss", "square", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!out.exists());
}

fn risk_value(o: &Output) -> f64 {
    let text = stdout(o);
    let line = text.lines().find(|l| l.starts_with("risk (closed form)")).expect("risk line");
    line.rsplit(' ').next().unwrap().parse().unwrap()
}

#[test]
fn risk_examples() {
    let o = ep_cde(&["risk", "--class", "sobolev", "1", "1", "--Q", "1", "--n", "10000", "--loss", "line", "--design", "uniform"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((risk_value(&o) - 2.3033e-3).abs() < 5e-8, "{}", stdout(&o));
    assert!(stdout(&o).contains("risk (series)"));
    let o = ep_cde(&["risk", "--class", "analytic", "1", "1", "--n", "22027"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((risk_value(&o) - 1.4451e-3).abs() < 5e-8, "{}", stdout(&o));
}

#[test]
fn risk_rejects_bad_parameters() {
    assert_eq!(ep_cde(&["risk", "--class", "sobolev", "1", "1", "--n", "100"]).status.code(), Some(2));
    assert_eq!(ep_cde(&["risk", "--class", "sobolev", "0", "1", "--Q", "1", "--n", "100"]).status.code(), Some(2));
    assert_eq!(ep_cde(&["risk", "--class", "sobolev", "1", "--Q", "1", "--n", "100"]).status.code(), Some(2));
    assert_eq!(ep_cde(&["risk", "--class", "wiggly", "1", "--n", "100"]).status.code(), Some(2));
}

#[test]
fn risk_with_design_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    let mut s = String::from("x,p\n");
    for i in 0..=100 {
        let x = i as f64 / 100.0;
        s += &format!("{x},{}\n", 0.5 + x);
    }
    fs::write(&p, s).unwrap();
    let csv = dir.path().join("risk.csv");
    let o = ep_cde(&["risk", "--class", "bounded-spectrum", "3", "--n", "1000", "--design", "file", "--design-file", p.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    // int 1/(1/2 + x) = ln 3
    let text = fs::read_to_string(&csv).unwrap();
    let d: f64 = text.lines().nth(1).unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!((d - 3f64.ln()).abs() < 1e-4, "{d}");
}

fn small_config(dir: &Path, replicates: usize) -> String {
    let path = dir.join("study.cfg");
    fs::write(&path, format!("model = independent\nn = 40, 60\nreplicates = {replicates}\nseed = 3\ncompare = kernel\n")).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 4);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = ep_cde(&["simulate", "--config", &cfg, "--output", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let sa = fs::read(a.join("summary.csv")).unwrap();
    assert_eq!(sa, fs::read(b.join("summary.csv")).unwrap());
    assert_eq!(fs::read(a.join("replicates.csv")).unwrap(), fs::read(b.join("replicates.csv")).unwrap());
    let text = String::from_utf8(sa).unwrap();
    assert!(text.starts_with("n,replicates_ok,failures,med_ratio_super,med_ratio_sub"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn simulate_rejects_zero_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 0);
    let o = ep_cde(&["simulate", "--config", &cfg, "--output", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_config_parses() {
    let text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/null_study.cfg")).unwrap();
    let c: ep_cde::study::StudyConfig = text.parse().unwrap();
    assert_eq!(c.n_values, vec![50, 100, 150, 200, 300]);
    assert_eq!(c.replicates, 500);
}

fn design_column(o: &Output) -> Vec<(f64, f64)> {
    stdout(o)
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect()
}

#[test]
fn design_examples() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = dir.path().join("sigma.csv");
    fs::write(&sigma, "x,sigma\n0,2\n0.5,2\n1,2\n").unwrap();
    let o = ep_cde(&["design", "--target", "regression", "--sigma-file", sigma.to_str().unwrap(), "--grid", "51"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(design_column(&o).iter().all(|p| (p.1 - 1.0).abs() < 1e-9));

    let mass = dir.path().join("mass.csv");
    let mut s = String::from("x,mass\n");
    for i in 0..=400 {
        let x = i as f64 / 400.0;
        s += &format!("{x},{}\n", (1.0 + x) * (1.0 + x));
    }
    fs::write(&mass, s).unwrap();
    let o = ep_cde(&["design", "--target", "cdensity", "--mass-file", mass.to_str().unwrap(), "--grid", "201"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let col = design_column(&o);
    let total: f64 = col.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    assert!((total - 1.0).abs() < 1e-6);
    assert!(col.iter().all(|(x, p)| (p - (1.0 + x) / 1.5).abs() < 1e-3));

    fs::write(&sigma, "x,sigma\n0,2\n0.5,-1\n1,2\n").unwrap();
    let o = ep_cde(&["design", "--target", "regression", "--sigma-file", sigma.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
