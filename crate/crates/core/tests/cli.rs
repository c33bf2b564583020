use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lubsim::io::{read_field_csv, HeatmapRange};
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_lubsim");

fn preset(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("cases").join(name);
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// A small network and short run so the training commands take a moment.
fn tiny(name: &str, epochs: usize) -> Value {
    let mut cfg = preset(name);
    cfg["network"] = json!({
        "sigmas": [1.0, 5.0], "freqs_per_sigma": 4, "hidden_layers": 2,
        "neurons": 8, "activation": "sigmoid"
    });
    cfg["training"]["epochs"] = json!(epochs);
    cfg["training"]["batch_size"] = json!(100);
    cfg["training"]["checkpoint_every"] = json!(2);
    cfg["grids"] = json!({"collocation_nx": 20, "collocation_ny": 20, "eval_nx": 21, "eval_ny": 21});
    cfg
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn lubsim(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("LUBSIM_SEED");
    if let Some(s) = env_seed {
        cmd.env("LUBSIM_SEED", s);
    }
    cmd.output().unwrap()
}

fn run(args: &[&str]) -> Output {
    lubsim(args, None)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["fem", "--out", "x"])), 2);
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&run(&["fem", "--config", s(&missing), "--out", s(dir.path())])), 2);

    let mut cfg = preset("case1_smooth.json");
    cfg["training"]["learning_rate"] = json!(0.1);
    let bad = write_config(dir.path(), "bad.json", &cfg);
    let o = run(&["fem", "--config", s(&bad), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rate"));

    let good = write_config(dir.path(), "good.json", &preset("case1_smooth.json"));
    let o = lubsim(&["surface", "--config", s(&good), "--out", s(&dir.path().join("h.csv"))], Some("abc"));
    assert_eq!(code(&o), 2);
}

#[test]
fn infeasible_surface_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("case3_texture.json");
    cfg["surface"]["amplitude"] = json!(5.0);
    let p = write_config(dir.path(), "c.json", &cfg);
    let o = run(&["surface", "--config", s(&p), "--out", s(&dir.path().join("h.csv"))]);
    assert_eq!(code(&o), 3);
    let o = run(&["fem", "--config", s(&p), "--out", s(&dir.path().join("f"))]);
    assert_eq!(code(&o), 3);
}

fn surface_rows(path: &Path) -> Vec<[f64; 3]> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,h"));
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect()
}

#[test]
fn surface_csv_matches_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let smooth = write_config(dir.path(), "s.json", &preset("case1_smooth.json"));
    let out = dir.path().join("nested/smooth.csv");
    ok(run(&["surface", "--config", s(&smooth), "--out", s(&out)]));
    let rows = surface_rows(&out);
    assert_eq!(rows.len(), 60 * 60);
    for [x, _, h] in rows {
        assert_eq!(h, 1.0 + 1.0 * (1.0 - x));
    }

    let texture = preset("case3_texture.json");
    let (a, lx, ly) = (
        texture["surface"]["amplitude"].as_f64().unwrap(),
        texture["surface"]["lambda_x"].as_f64().unwrap(),
        texture["surface"]["lambda_y"].as_f64().unwrap(),
    );
    let p = write_config(dir.path(), "t.json", &texture);
    let out = dir.path().join("texture.csv");
    ok(run(&["surface", "--config", s(&p), "--out", s(&out)]));
    for [x, y, h] in surface_rows(&out) {
        let want = 1.0 + (1.0 - x) + a * (x / lx).cos() * (y / ly).sin();
        assert!((h - want).abs() < 1e-14, "({x}, {y}): {h} vs {want}");
    }
}

#[test]
fn gaussian_surface_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "g.json", &preset("case4_gaussian.json"));
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(run(&["surface", "--config", s(&p), "--out", s(&a)]));
    ok(run(&["surface", "--config", s(&p), "--out", s(&b)]));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn fem_outputs_and_grid_study() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.json", &preset("case1_smooth.json"));
    let out = dir.path().join("missing/parent/fem60");
    ok(run(&["fem", "--config", s(&p), "--out", s(&out), "--ppm"]));
    let sum = summary(&out);
    let keys: Vec<&str> = sum.as_object().unwrap().keys().map(String::as_str).collect();
    let mut want = vec![
        "config_hash", "epochs_run", "final_loss", "load_capacity", "max_pressure", "mode", "seed", "wall_time_s",
    ];
    want.sort();
    let mut keys = keys;
    keys.sort();
    assert_eq!(keys, want);
    assert!(sum["final_loss"].is_null());
    assert_eq!(sum["config_hash"].as_str().unwrap().len(), 64);
    for f in ["field.csv", "field.ppm", "field.json", "timing.txt", "notes.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let field = read_field_csv(&out.join("field.csv")).unwrap();
    let range: HeatmapRange = serde_json::from_str(&fs::read_to_string(out.join("field.json")).unwrap()).unwrap();
    let max = field.values.iter().copied().fold(f64::MIN, f64::max);
    let min = field.values.iter().copied().fold(f64::MAX, f64::min);
    assert_eq!((range.min, range.max), (min, max));

    let mut coarse = preset("case1_smooth.json");
    coarse["grids"]["eval_nx"] = json!(30);
    coarse["grids"]["eval_ny"] = json!(30);
    let pc = write_config(dir.path(), "c30.json", &coarse);
    let out30 = dir.path().join("fem30");
    ok(run(&["fem", "--config", s(&pc), "--out", s(&out30)]));
    let (w60, w30) = (
        sum["load_capacity"].as_f64().unwrap(),
        summary(&out30)["load_capacity"].as_f64().unwrap(),
    );
    assert!(((w30 - w60) / w60).abs() < 0.02, "{w30} vs {w60}");
}

#[test]
fn compare_self_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.json", &preset("case3_texture.json"));
    let fem = dir.path().join("fem");
    ok(run(&["fem", "--config", s(&p), "--out", s(&fem)]));
    let cmp = dir.path().join("cmp");
    ok(run(&["compare", "--ref", s(&fem), "--cand", s(&fem.join("field.csv")), "--out", s(&cmp), "--ppm"]));
    let text = fs::read_to_string(cmp.join("comparison.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "metric,reference,candidate,rel_error_pct");
    assert_eq!(rows.len(), 3);
    for r in &rows[1..] {
        assert_eq!(r.rsplit(',').next().unwrap().parse::<f64>().unwrap(), 0.0);
    }
    let err = read_field_csv(&cmp.join("error.csv")).unwrap();
    assert!(err.values.iter().all(|&v| v == 0.0));
    let range: HeatmapRange = serde_json::from_str(&fs::read_to_string(cmp.join("error.json")).unwrap()).unwrap();
    assert_eq!(range, HeatmapRange { min: 0.0, max: 0.0 });

    let mut coarse = preset("case3_texture.json");
    coarse["grids"]["eval_nx"] = json!(30);
    let pc = write_config(dir.path(), "c30.json", &coarse);
    let fem30 = dir.path().join("fem30");
    ok(run(&["fem", "--config", s(&pc), "--out", s(&fem30)]));
    let o = run(&["compare", "--ref", s(&fem), "--cand", s(&fem30), "--out", s(&cmp)]);
    assert_eq!(code(&o), 2);
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "timing.txt")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.json", &tiny("case3_texture.json", 4));
    for cmd in ["fem", "train", "bench-freq"] {
        let (a, b) = (dir.path().join(format!("{cmd}_a")), dir.path().join(format!("{cmd}_b")));
        for out in [&a, &b] {
            ok(run(&[cmd, "--config", s(&p), "--out", s(out), "--deterministic", "--seed", "7", "--ppm"]));
        }
        let (fa, fb) = (files(&a), files(&b));
        assert!(fa.len() >= 2);
        assert_eq!(fa, fb, "{cmd} outputs differ");
    }
    let train = dir.path().join("train_a");
    assert_eq!(summary(&train)["wall_time_s"], json!(0.0));
    for f in ["model.json", "loss.csv", "field.csv", "ckpt_2.json", "ckpt_4.json"] {
        assert!(train.join(f).exists(), "{f}");
    }
    let eval = dir.path().join("eval");
    ok(run(&[
        "eval", "--config", s(&p), "--out", s(&eval), "--seed", "7", "--deterministic",
        "--model", s(&train.join("model.json")),
    ]));
    assert_eq!(fs::read(eval.join("field.csv")).unwrap(), fs::read(train.join("field.csv")).unwrap());
}

#[test]
fn seed_precedence_and_mode_flags() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.json", &tiny("case1_smooth.json", 1));
    let out = dir.path().join("a");
    ok(lubsim(&["train", "--config", s(&p), "--out", s(&out), "--fixed-freq", "--soft-bc"], Some("42")));
    let sum = summary(&out);
    assert_eq!(sum["seed"], json!(42));
    assert_eq!(sum["mode"]["frequency"], json!("fixed_freq"));
    assert_eq!(sum["mode"]["bc"], json!("soft"));
    assert_eq!(sum["epochs_run"], json!(1));
    assert!(sum["final_loss"].as_f64().unwrap().is_finite());

    ok(lubsim(&["train", "--config", s(&p), "--out", s(&out), "--seed", "3"], Some("42")));
    let sum = summary(&out);
    assert_eq!(sum["seed"], json!(3));
    assert_eq!(sum["mode"]["frequency"], json!("trainable_freq"));
    assert_eq!(sum["mode"]["bc"], json!("hard"));
}

#[test]
fn zero_epochs_emit_the_initial_network() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.json", &tiny("case1_smooth.json", 0));
    let out = dir.path().join("t");
    ok(run(&["train", "--config", s(&p), "--out", s(&out)]));
    let field = read_field_csv(&out.join("field.csv")).unwrap();
    assert!(field.is_finite());
    assert!(field.values.iter().any(|&v| v != 0.0));
    for j in 0..field.ny {
        for i in 0..field.nx {
            if i == 0 || j == 0 || i == field.nx - 1 || j == field.ny - 1 {
                assert_eq!(field.get(i, j), 0.0);
            }
        }
    }
    assert_eq!(fs::read_to_string(out.join("loss.csv")).unwrap().lines().count(), 1);
    assert_eq!(summary(&out)["epochs_run"], json!(0));
}

#[test]
fn divergence_exits_5_with_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny("case1_smooth.json", 50);
    cfg["training"]["lr0"] = json!(1e300);
    cfg["training"]["checkpoint_every"] = json!(0);
    let p = write_config(dir.path(), "c.json", &cfg);
    let out = dir.path().join("t");
    let o = run(&["train", "--config", s(&p), "--out", s(&out)]);
    assert_eq!(code(&o), 5, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let ckpts: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("ckpt_"))
        .collect();
    assert_eq!(ckpts.len(), 1);
}

#[test]
fn bench_freq_schema() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.json", &tiny("table5_ablation.json", 2));
    let out = dir.path().join("b");
    ok(run(&["bench-freq", "--config", s(&p), "--out", s(&out)]));
    let text = fs::read_to_string(out.join("bench_freq.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], vec!["metric", "fem", "mlnn", "mlnn_err", "ffn", "ffn_err"]);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][0], "max_pressure");
    assert_eq!(rows[2][0], "load_capacity");
    let timing = fs::read_to_string(out.join("timing.txt")).unwrap();
    for k in ["fem ", "mlnn ", "ffn "] {
        assert!(timing.contains(k), "{timing}");
    }
}
