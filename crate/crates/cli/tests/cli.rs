use std::path::Path;
use std::process::{Command, Output};

fn ghz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghzbayes")).args(args).output().expect("binary runs")
}

fn csv_body(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    rd.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn partitions_of_four_in_fixed_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let o = ghz(&["partitions", "--n", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_body(&out);
    let names: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(names, ["1x4", "2x2", "1x2+2x1", "4x1"]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# ghzbayes partitions"));
    assert!(text.contains("# n = 4"));
}

#[test]
fn bad_arguments_exit_two() {
    let o = ghz(&["partitions", "--n", "4", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ghz(&["partitions", "--n", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("partitions.n"));
    let o = ghz(&["oqi", "--n", "4", "--delta-phi", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("oqi.delta_phi"));
    let o = ghz(&["clock", "--tau", "1:10:geo3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("clock.tau"));
}

#[test]
fn truncated_enumeration_exits_three() {
    let o = ghz(&["partitions", "--n", "30", "--budget", "10", "--json"]);
    assert_eq!(o.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["budget_limited"], true);
    assert_eq!(v["tables"]["partitions"].as_array().unwrap().len(), 10);
}

#[test]
fn json_is_one_document() {
    let o = ghz(&["oqi", "--n", "6", "--delta-phi", "0.7", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["command"], "oqi");
    let b = v["results"]["bmse"].as_f64().unwrap();
    assert!(b > 0.0 && b < 0.49);
    let pops: f64 =
        v["tables"]["populations"].as_array().unwrap().iter().map(|r| r["population"].as_f64().unwrap()).sum();
    assert!((pops - 1.0).abs() < 1e-10);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let ini = dir.path().join("run.ini");
    std::fs::write(&ini, "[global]\nseed = 9\n[oqi]\nn = 5\ndelta_phi = 0.4\n").unwrap();
    let o = ghz(&["--config", ini.to_str().unwrap(), "oqi", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["params"]["n"], "5");
    assert_eq!(v["params"]["delta_phi"], "0.4");
    assert_eq!(v["seed"], 9);
    let o = ghz(&["--config", ini.to_str().unwrap(), "oqi", "--n", "7", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["params"]["n"], "7");

    std::fs::write(&ini, "[oqi]\nn = seven\n").unwrap();
    let o = ghz(&["--config", ini.to_str().unwrap(), "oqi"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("oqi.n"));
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = ghz(&["optimize", "--n", "7", "--restarts", "3", "--seed", "5", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn sweep_resumes_from_shards() {
    let dir = tempfile::tempdir().unwrap();
    let shards = dir.path().join("shards");
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let args = |out: &Path| {
        vec![
            "sweep-prior".to_string(),
            "--n".into(),
            "6".into(),
            "--delta-phi".into(),
            "0.2:1.2:log3".into(),
            "--restarts".into(),
            "1".into(),
            "--shard-dir".into(),
            shards.display().to_string(),
            "--out".into(),
            out.display().to_string(),
            "--json".into(),
        ]
    };
    let o = Command::new(env!("CARGO_BIN_EXE_ghzbayes")).args(args(&a)).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    std::fs::remove_file(shards.join("point-0001.json")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ghzbayes")).args(args(&b)).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["results"]["resumed"], 2);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(csv_body(&a).len(), 3);

    let o = ghz(&["sweep-prior", "--n", "7", "--restarts", "1", "--shard-dir", shards.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("shard_dir"));
}

#[test]
fn clock_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = ghz(&["clock", "--n", "20", "--protocols", "best-classical,oqc", "--tau", "1,10", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l == "tau,T_opt,sigma_y,protocol,N"));
    let rows = csv_body(&out);
    assert_eq!(rows.len(), 4);
    // Seventeen significant digits.
    assert_eq!(rows[0][0], "1.0000000000000000e0");
    assert_eq!(rows[3][3], "oqc");
    assert_eq!(rows[3][4], "20");
}

#[test]
fn rescale_example() {
    let o = ghz(&["unwind", "--rescale", "3x(1/8)+2x(1/4)+4x(1/2)+3x1+3x2+2x4", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["results"]["rescaled"], "2x32+3x16+3x8+4x4+2x2+3x1");
    assert_eq!(v["results"]["n_prime"], 159);
    assert_eq!(v["results"]["n_total"], 26);
    assert_eq!(v["results"]["scale_factor"], 64.0);
}

#[test]
fn thread_count_from_environment() {
    let run = |t: &str| {
        Command::new(env!("CARGO_BIN_EXE_ghzbayes"))
            .env("GHZBAYES_THREADS", t)
            .args(["partitions", "--n", "5"])
            .output()
            .unwrap()
    };
    assert!(run("1").status.success());
    let o = run("zero");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("GHZBAYES_THREADS"));
}

#[test]
fn plot_script_written_next_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pl.csv");
    let o = ghz(&["plateau", "--delta-phi", "0.5,1,2", "--out", out.to_str().unwrap(), "--plot"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gp = std::fs::read_to_string(dir.path().join("pl.gp")).unwrap();
    assert!(gp.contains("using 1:2") && gp.contains("using 1:3"));
}
