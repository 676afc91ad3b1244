use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn csbm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csbm"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const GEN: &str = r#"
out = "gen"

[generate]
n = 60
k = 2
seed = 11
mechanism = { type = "bernoulli", p_in = 0.4, p_out = 0.03 }
"#;

const FIT: &str = r#"
out = "fit"

[data]
kind = "undirected"
modality = "binary"
layers = ["gen/layer1.txt"]
n = 60
truth = "gen/truth.tsv"

[prior]
prior = "dirichlet_multinomial"
alpha = 1.0
k = 2

[sampler]
sweeps = 200
burn_in = 50
n_chains = 2

[select_k]
ks = [1, 2, 3]

[report]
labels = "fit/labels.csv"
degree_corrected = { a = 1.0, b = 1.0 }
"#;

#[test]
fn generate_fit_round_trip_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("gen.toml"), GEN).unwrap();
    fs::write(d.join("fit.toml"), FIT).unwrap();
    assert_eq!(code(&csbm(&["generate", "gen.toml"], d)), 0);
    assert!(d.join("gen/layer1.txt").exists());
    assert_eq!(manifest(&d.join("gen"))["data"]["n"], 60);

    let first = csbm(&["fit", "fit.toml"], d);
    assert_eq!(
        code(&first),
        0,
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let m1 = fs::read(d.join("fit/manifest.json")).unwrap();
    let labels1 = fs::read(d.join("fit/labels.csv")).unwrap();
    assert_eq!(code(&csbm(&["fit", "fit.toml"], d)), 0);
    assert_eq!(m1, fs::read(d.join("fit/manifest.json")).unwrap());
    assert_eq!(labels1, fs::read(d.join("fit/labels.csv")).unwrap());

    let m = manifest(&d.join("fit"));
    assert_eq!(m["command"], "fit");
    assert_eq!(m["result"]["ari"], 1.0);
    assert_eq!(m["result"]["chain_seeds"], serde_json::json!([1, 2]));
    for f in [
        "labels.csv",
        "trace.csv",
        "psm.csv",
        "psm_order.csv",
        "blocks.csv",
        "confusion.csv",
    ] {
        assert!(d.join("fit").join(f).exists(), "{f} missing");
    }
    let blocks = fs::read_to_string(d.join("fit/blocks.csv")).unwrap();
    assert!(blocks.starts_with("layer,r,s,block,family,dyads,stats,param,mean,lo,hi"));
}

#[test]
fn flags_override_and_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("gen.toml"), GEN).unwrap();
    fs::write(d.join("fit.toml"), FIT).unwrap();
    assert_eq!(
        code(&csbm(
            &["generate", "gen.toml", "--seed", "5", "--k", "3"],
            d
        )),
        0
    );
    let g = manifest(&d.join("gen"));
    assert_eq!(g["config"]["generate"]["seed"], 5);
    assert_eq!(g["result"]["truth_sizes"].as_array().unwrap().len(), 3);

    let out = d.join("elsewhere");
    let o = csbm(
        &[
            "fit",
            "fit.toml",
            "--seed",
            "9",
            "--sweeps",
            "80",
            "--k",
            "3",
            "--out",
            out.to_str().unwrap(),
        ],
        d,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["sampler"]["seed"], 9);
    assert_eq!(m["config"]["sampler"]["sweeps"], 80);
    assert_eq!(m["config"]["prior"]["k"], 3);
    assert_eq!(m["result"]["chain_seeds"], serde_json::json!([9, 10]));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 2 * 80);

    assert_eq!(
        code(&csbm(&["generate", "gen.toml", "--sweeps", "3"], d)),
        1
    );
    assert_eq!(code(&csbm(&["select-k", "fit.toml", "--k", "3"], d)), 1);
}

#[test]
fn select_k_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("gen.toml"), GEN).unwrap();
    fs::write(d.join("fit.toml"), FIT).unwrap();
    assert_eq!(code(&csbm(&["generate", "gen.toml"], d)), 0);
    assert_eq!(code(&csbm(&["fit", "fit.toml"], d)), 0);

    let sk = d.join("sk");
    assert_eq!(
        code(&csbm(
            &["select-k", "fit.toml", "--out", sk.to_str().unwrap()],
            d
        )),
        0
    );
    let m = manifest(&sk);
    assert_eq!(m["result"]["best_k"], 2);
    let csv = fs::read_to_string(sk.join("select_k.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let rep = d.join("rep");
    let o = csbm(&["report", "fit.toml", "--out", rep.to_str().unwrap()], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&rep);
    assert_eq!(m["result"]["ari"], 1.0);
    assert_eq!(m["result"]["blocks"], 3);
    assert!(rep.join("omega.csv").exists());
    assert_eq!(code(&csbm(&["report", "fit.toml", "--seed", "2"], d)), 1);
}

#[test]
fn bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases = [
        // unknown key
        "out = \"o\"\ntypo = 1\n",
        // unknown nested key
        "out = \"o\"\n[sampler]\nsweep = 10\n",
        // invalid hyperparameter
        "out = \"o\"\n[generate]\nn = 10\nk = 2\nseed = 1\nmechanism = { type = \"bernoulli\", p_in = 0.5, p_out = 0.1 }\n\
         [model]\ndiag = { family = \"beta_bernoulli\", a = -1.0, b = 1.0 }\noffdiag = { family = \"beta_bernoulli\", a = 1.0, b = 1.0 }\n",
        // missing data
        "out = \"o\"\n[prior]\nprior = \"crp\"\nalpha = 1.0\n",
        // missing edge file
        "out = \"o\"\n[data]\nkind = \"undirected\"\nmodality = \"binary\"\nlayers = [\"absent.txt\"]\n[prior]\nprior = \"crp\"\nalpha = 1.0\n",
    ];
    for (idx, text) in cases.iter().enumerate() {
        let p = d.join(format!("c{idx}.toml"));
        fs::write(&p, text).unwrap();
        let o = csbm(&["fit", p.to_str().unwrap()], d);
        assert_eq!(
            code(&o),
            1,
            "case {idx}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(code(&csbm(&["fit", "missing.toml"], d)), 1);
    assert_eq!(code(&csbm(&["fit"], d)), 1);
    assert_eq!(code(&csbm(&["--help"], d)), 0);
}

#[test]
fn numeric_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // squares overflow, so every candidate weight is NaN
    fs::write(d.join("e.txt"), "0 1 1e300\n1 2 -1e300\n2 3 1\n").unwrap();
    fs::write(
        d.join("c.toml"),
        "out = \"o\"\n[data]\nkind = \"undirected\"\nmodality = \"real\"\nlayers = [\"e.txt\"]\n\
         [prior]\nprior = \"dirichlet_multinomial\"\nalpha = 1.0\nk = 2\n[sampler]\nsweeps = 5\nburn_in = 1\n",
    )
    .unwrap();
    let o = csbm(&["fit", "c.toml"], d);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("numeric"));
}
