use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bcmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcmf")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = bcmf(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small deterministic data set; values come from a fixed integer recurrence.
fn data_csv(n: usize) -> String {
    let mut state = 12345u64;
    let mut unif = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut out = String::from("y,a,m,x1,x2,grp\n");
    for i in 0..n {
        let a = i % 2;
        let x1 = 4.0 * unif() - 2.0;
        let x2 = 4.0 * unif() - 2.0;
        let m = 0.3 * x1 + 0.5 * a as f64 + unif() - 0.5;
        let y = x2 + 0.4 * a as f64 + 0.6 * m + unif() - 0.5;
        let grp = ["u", "v", "w"][i % 3];
        out.push_str(&format!("{y},{a},{m},{x1},{x2},{grp}\n"));
    }
    out
}

const CONFIG: &str = r#"
seed = 21

[data]
path = "data.csv"
outcome = "y"
treatment = "a"
mediator = "m"
kinds = { grp = "categorical" }

[model]
burn_in = 30
n_samples = 20
n_chains = 2
keep_forests = true
mu = { trees = 10, alpha = 0.95, beta = 2.0, k = 2.0 }
mu_m = { trees = 10, alpha = 0.95, beta = 2.0, k = 2.0 }
zeta = { trees = 5, alpha = 0.25, beta = 3.0, k = 2.0 }
d = { trees = 5, alpha = 0.25, beta = 3.0, k = 2.0 }
tau_m = { trees = 5, alpha = 0.25, beta = 3.0, k = 2.0 }

[model.clever]
burn_in = 20
n_samples = 20
thin = 1
forest = { trees = 10, alpha = 0.95, beta = 2.0, k = 2.0 }
"#;

fn workspace(n: usize) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("data.csv"), data_csv(n)).unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    (dir, cfg)
}

fn read_table(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

/// Linear interpolation between order statistics.
fn q7(v: &mut [f64], p: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[test]
fn fit_effects_summarize_pipeline() {
    let (dir, cfg) = workspace(50);
    let draws = dir.path().join("fit.bcmf");
    let eff = dir.path().join("eff");
    ok(&["fit", "--config", s(&cfg), "--out", s(&draws)]);
    ok(&["effects", "--draws", s(&draws), "--out", s(&eff)]);

    let (header, rows) = read_table(&eff.join("effects.csv"));
    assert_eq!(header, ["draw", "row", "zeta", "delta", "tau"]);
    assert_eq!(rows.len(), 40 * 50);

    // Per-row quantiles recomputed from the raw draws.
    let (rh, summary) = read_table(&eff.join("rows.csv"));
    assert_eq!(summary.len(), 50);
    let (di, ri) = (col(&header, "delta"), col(&header, "row"));
    for (i, srow) in summary.iter().enumerate() {
        let mut v: Vec<f64> = rows
            .iter()
            .filter(|r| r[ri].parse::<usize>().unwrap() == i)
            .map(|r| r[di].parse().unwrap())
            .collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let got = |name: &str| srow[col(&rh, name)].parse::<f64>().unwrap();
        assert!((got("delta_mean") - mean).abs() < 1e-12);
        assert!((got("delta_q025") - q7(&mut v, 0.025)).abs() < 1e-12);
        assert!((got("delta_q975") - q7(&mut v, 0.975)).abs() < 1e-12);
    }

    let (sh, avg) = read_table(&eff.join("summary.csv"));
    assert!(avg.iter().any(|r| r[col(&sh, "quantity")] == "delta_bar"));
    assert!(avg.iter().any(|r| r[col(&sh, "quantity")] == "zeta_bar"));

    let summ = dir.path().join("cart");
    ok(&["summarize", "--effects", s(&eff), "--method", "cart", "--out", s(&summ)]);
    assert!(fs::read_to_string(summ.join("summary.txt")).unwrap().len() > 0);
    let (_, r2) = read_table(&summ.join("r_squared.csv"));
    assert_eq!(r2.len(), 40);
    let gam = dir.path().join("gam");
    ok(&["summarize", "--effects", s(&eff), "--method", "gam", "--target", "zeta", "--out", s(&gam)]);
    assert!(gam.join("components.csv").exists());

    let fitsum: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fit.bcmf.summary.json")).unwrap()).unwrap();
    assert_eq!(fitsum["rows"], 50);
    assert_eq!(fitsum["draws"], 40);
}

#[test]
fn newdata_rows_get_their_own_effects() {
    let (dir, cfg) = workspace(50);
    let draws = dir.path().join("fit.bcmf");
    ok(&["fit", "--config", s(&cfg), "--out", s(&draws)]);
    let newdata = dir.path().join("new.csv");
    fs::write(&newdata, "x1,x2,grp=u,grp=v,grp=w\n0.5,0.1,1,0,0\n-1.0,1.2,0,0,1\n").unwrap();
    let eff = dir.path().join("eff");
    ok(&["effects", "--draws", s(&draws), "--out", s(&eff), "--newdata", s(&newdata)]);
    let (_, rows) = read_table(&eff.join("effects.csv"));
    assert_eq!(rows.len(), 40 * 2);
}

#[test]
fn same_seed_gives_identical_files() {
    let (dir, cfg) = workspace(50);
    let (a, b, c) = (dir.path().join("a.bcmf"), dir.path().join("b.bcmf"), dir.path().join("c.bcmf"));
    ok(&["fit", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["fit", "--config", s(&cfg), "--out", s(&b)]);
    ok(&["fit", "--config", s(&cfg), "--out", s(&c), "--seed", "22"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    let (ea, eb) = (dir.path().join("ea"), dir.path().join("eb"));
    ok(&["effects", "--draws", s(&a), "--out", s(&ea)]);
    ok(&["effects", "--draws", s(&b), "--out", s(&eb)]);
    for f in ["effects.csv", "averages.csv", "summary.csv"] {
        assert_eq!(fs::read(ea.join(f)).unwrap(), fs::read(eb.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn exit_codes_separate_usage_data_and_io() {
    let (dir, cfg) = workspace(50);
    let out = dir.path().join("fit.bcmf");

    assert_eq!(bcmf(&["fit"]).status.code(), Some(1));
    assert_eq!(bcmf(&["--help"]).status.code(), Some(0));

    let bad_cfg = dir.path().join("bad.toml");
    fs::write(&bad_cfg, "[model]\nburnin = 3\n").unwrap();
    assert_eq!(bcmf(&["fit", "--config", s(&bad_cfg), "--out", s(&out)]).status.code(), Some(1));

    let bad_data = dir.path().join("bad.csv");
    let mut lines: Vec<String> = data_csv(50).lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[7].split(',').map(String::from).collect();
    cells[1] = "2".into();
    lines[7] = cells.join(",");
    fs::write(&bad_data, lines.join("\n")).unwrap();
    let r = bcmf(&["fit", "--config", s(&cfg), "--data", s(&bad_data), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).contains("row"));
    assert!(!out.exists());

    let missing = dir.path().join("nope.bcmf");
    let r = bcmf(&["effects", "--draws", s(&missing), "--out", s(&dir.path().join("e"))]);
    assert_eq!(r.status.code(), Some(3));

    let junk = dir.path().join("junk.bcmf");
    fs::write(&junk, b"not a draws file").unwrap();
    let r = bcmf(&["effects", "--draws", s(&junk), "--out", s(&dir.path().join("e"))]);
    assert_ne!(r.status.code(), Some(0));
}

#[test]
fn simulate_writes_a_labelled_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    fs::write(
        &cfg,
        r#"
seed = 4

[study]
replications = 1
n_train = 200
n_test = 20
truths = ["lsem"]
bootstrap = 100
dynamic_subgroups = false

[study.bcmf]
burn_in = 20
n_samples = 20
n_chains = 1
mu = { trees = 5, alpha = 0.95, beta = 2.0, k = 2.0 }
mu_m = { trees = 5, alpha = 0.95, beta = 2.0, k = 2.0 }

[study.bcmf.clever]
burn_in = 10
n_samples = 10
thin = 1
forest = { trees = 5, alpha = 0.95, beta = 2.0, k = 2.0 }
"#,
    )
    .unwrap();
    let out = dir.path().join("sim");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["label"].as_str().unwrap().contains("desk-scale"));
    assert_eq!(report["failures"].as_array().unwrap().len(), 0);
    assert!(fs::read_to_string(out.join("records.csv")).unwrap().lines().count() > 1);
}
