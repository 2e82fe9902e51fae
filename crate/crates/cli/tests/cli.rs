use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use asa_cli::commands;
use asa_cli::config::RunConfig;
use asa_core::metrics::MetricsReport;

fn asa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asa")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small dataset plus a config that trains in well under a second.
fn tiny(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = dir.join("data");
    let o = asa(&["gen-data", "--seed", "3", "--out", p(&data), "--train-size", "32", "--target-size", "24"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut cfg = RunConfig::default();
    cfg.model.widths = [2, 4, 4, 4, 4];
    cfg.train.epochs = 2;
    cfg.eval.a_distance_epochs = 20;
    let path = dir.join("run.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    (data, path)
}

#[test]
fn help_lists_every_flag() {
    let expected: &[(&str, &[&str])] = &[
        ("gen-data", &["--seed", "--out", "--config", "--train-size", "--target-size"]),
        (
            "train",
            &["--config", "--data", "--out", "--seed", "--epochs", "--method", "--lambda", "--points", "--mode", "--checkpoint-every", "--wall-clock"],
        ),
        ("eval", &["--checkpoint", "--data", "--domains", "--out", "--config", "--seed", "--label"]),
        ("gradcheck", &["--scope", "--instances", "--seed", "--rtol"]),
        ("sweep", &["--grid", "--seeds", "--out", "--data", "--workers"]),
        ("adistance", &["--checkpoint", "--data", "--pairs", "--out", "--config", "--seed"]),
    ];
    let top = asa(&["--help"]);
    assert_eq!(code(&top), 0);
    for (cmd, flags) in expected {
        assert!(stdout(&top).contains(cmd), "{cmd} missing from top-level help");
        let o = asa(&[cmd, "--help"]);
        assert_eq!(code(&o), 0);
        let help = stdout(&o);
        for f in *flags {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
        // Nothing beyond the documented set, plus clap's own --help.
        let listed = help.lines().filter(|l| l.trim_start().starts_with('-')).count();
        assert_eq!(listed, flags.len() + 1, "{cmd}:\n{help}");
    }
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&asa(&["--version"])), 0);
    assert_eq!(code(&asa(&["train", "--bogus"])), 1);
    assert_eq!(code(&asa(&["frobnicate"])), 1);

    let missing = dir.path().join("nope");
    let o = asa(&["train", "--data", p(&missing), "--out", p(&dir.path().join("o"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--data"), "{}", stderr(&o));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[train]\nepochz = 1\n").unwrap();
    let o = asa(&["gen-data", "--config", p(&bad), "--out", p(&dir.path().join("d"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("epochz") && stderr(&o).contains("bad.toml"), "{}", stderr(&o));

    // A corrupt checkpoint is an input error that names the flag.
    let (data, _) = tiny(dir.path());
    let ckpt = dir.path().join("junk.advt");
    fs::write(&ckpt, b"not a checkpoint").unwrap();
    let o = asa(&["eval", "--checkpoint", p(&ckpt), "--data", p(&data), "--out", p(&dir.path().join("e"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--checkpoint"));

    // A failing check is a runtime failure.
    let o = asa(&["gradcheck", "--scope", "ops", "--instances", "1", "--rtol", "1e-30"]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    let o = asa(&["gradcheck", "--scope", "ops", "--instances", "1"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn gen_data_refuses_to_clobber_foreign_directories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stuff");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("precious.txt"), "keep").unwrap();
    let o = asa(&["gen-data", "--out", p(&out), "--train-size", "8", "--target-size", "8"]);
    assert_eq!(code(&o), 1);
    assert!(out.join("precious.txt").is_file());
    // An existing dataset is replaced in place.
    let data = dir.path().join("data");
    for size in ["8", "16"] {
        let o = asa(&["gen-data", "--out", p(&data), "--train-size", size, "--target-size", "8"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let bench = commands::load_data(&data).unwrap();
    assert_eq!(bench.train.len(), 16);
    let leftovers = fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with('.')).count();
    assert_eq!(leftovers, 0);
}

#[test]
fn repeated_commands_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (data, cfg) = tiny(dir.path());
    let again = dir.path().join("data2");
    asa(&["gen-data", "--seed", "3", "--out", p(&again), "--train-size", "32", "--target-size", "24"]);
    for f in fs::read_dir(&data).unwrap() {
        let name = f.unwrap().file_name();
        assert_eq!(fs::read(data.join(&name)).unwrap(), fs::read(again.join(&name)).unwrap(), "{name:?}");
    }
    let run = |tag: &str| {
        let out = dir.path().join(tag);
        let args = ["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&out), "--method", "advstyle", "--mode", "iterative"];
        let o = asa(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let o = asa(&["eval", "--checkpoint", p(&out.join("model.advt")), "--data", p(&data), "--out", p(&out.join("eval"))]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        ["model.advt", "run.jsonl", "config.toml", "eval/report.json", "eval/report.csv"].map(|f| fs::read(out.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (data, cfg) = tiny(dir.path());
    let out = dir.path().join("t");
    let o = asa(&[
        "train", "--config", p(&cfg), "--data", p(&data), "--out", p(&out), "--epochs", "1", "--seed", "9",
        "--method", "dsu", "--points", "conv1,block2", "--lambda", "0.5",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let resolved = RunConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(resolved.train.epochs, 1);
    assert_eq!(resolved.train.seed, 9);
    assert_eq!(resolved.method.lambda, 0.5);
    assert_eq!(resolved.method.points.len(), 2);
    // Untouched keys keep the file's values.
    assert_eq!(resolved.model.widths, [2, 4, 4, 4, 4]);
    assert_eq!(fs::read_to_string(out.join("run.jsonl")).unwrap().lines().count(), 2);
}

#[test]
fn periodic_checkpoints_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let (data, cfg) = tiny(dir.path());
    let out = dir.path().join("t");
    let o = asa(&["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&out), "--epochs", "4", "--checkpoint-every", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(out.join("checkpoints")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["epoch-0002.advt", "epoch-0004.advt"]);
    assert_eq!(fs::read(out.join("checkpoints/epoch-0004.advt")).unwrap(), fs::read(out.join("model.advt")).unwrap());
}

#[test]
fn untrained_model_scores_near_chance() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    asa(&["gen-data", "--out", p(&data), "--train-size", "64", "--target-size", "700"]);
    let bench = commands::load_data(&data).unwrap();
    for seed in 0..5 {
        let model = asa_core::nn::MiniNet::build(asa_core::nn::ModelSpec::default(), seed).unwrap();
        let ckpt = dir.path().join(format!("init{seed}.advt"));
        let mut bytes = Vec::new();
        model.save(&mut bytes).unwrap();
        fs::write(&ckpt, bytes).unwrap();
        let out = dir.path().join(format!("eval{seed}"));
        let o = asa(&["eval", "--checkpoint", p(&ckpt), "--data", p(&data), "--out", p(&out), "--seed", &seed.to_string()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let report = MetricsReport::from_json(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(report.accuracies.len(), bench.targets.len());
        for d in &report.accuracies {
            assert!((d.accuracy - 100.0 / 7.0).abs() <= 5.0, "seed {seed} {}: {}", d.domain, d.accuracy);
        }
    }
}

#[test]
fn eval_selects_domains_and_rejects_unknown_ones() {
    let dir = tempfile::tempdir().unwrap();
    let (data, cfg) = tiny(dir.path());
    let out = dir.path().join("t");
    asa(&["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&out)]);
    let ckpt = out.join("model.advt");
    let bench = commands::load_data(&data).unwrap();
    let (a, b) = (&bench.targets[0].name, &bench.targets[2].name);
    let o = asa(&["eval", "--checkpoint", p(&ckpt), "--data", p(&data), "--out", p(&dir.path().join("e")), "--domains", &format!("{b},{a}")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = MetricsReport::from_json(&fs::read_to_string(dir.path().join("e/report.json")).unwrap()).unwrap();
    let names: Vec<&str> = report.accuracies.iter().map(|d| d.domain.as_str()).collect();
    assert_eq!(names, [b.as_str(), a.as_str()]);
    let o = asa(&["eval", "--checkpoint", p(&ckpt), "--data", p(&data), "--out", p(&dir.path().join("e")), "--domains", "nowhere,elsewhere"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--domains"));
}

#[test]
fn adistance_writes_table_and_projection() {
    let dir = tempfile::tempdir().unwrap();
    let (data, cfg) = tiny(dir.path());
    let out = dir.path().join("t");
    asa(&["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&out)]);
    let bench = commands::load_data(&data).unwrap();
    let pair = format!("train:{}", bench.targets[1].name);
    let res = dir.path().join("ad");
    let o = asa(&["adistance", "--checkpoint", p(&out.join("model.advt")), "--data", p(&data), "--pairs", &pair, "--out", p(&res)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = fs::read_to_string(res.join("adistance.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.starts_with("source,target,distance\n"));
    let pca = fs::read_to_string(res.join("pca.csv")).unwrap();
    assert!(pca.starts_with("split,index,label,pc1,pc2\n"));
    assert_eq!(pca.lines().count(), 1 + 32 + 24);
    let o = asa(&["adistance", "--checkpoint", p(&out.join("model.advt")), "--data", p(&data), "--pairs", "train:mars", "--out", p(&res)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn lambda_sweep_emits_one_row_per_run_in_grid_order() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = tiny(dir.path());
    let grid = dir.path().join("grid.toml");
    fs::write(
        &grid,
        "[base.model]\nwidths = [2, 4, 4, 4, 4]\n[base.method]\nkind = \"advstyle\"\n[base.train]\nepochs = 1\n\
         [base.eval]\na_distance = false\n[axes]\nlambdas = [0.1, 0.5, 1.0, 5.0, 10.0, 20.0]\n",
    )
    .unwrap();
    let run = |tag: &str, workers: &str| {
        let out = dir.path().join(tag);
        let o = asa(&["sweep", "--grid", p(&grid), "--seeds", "0,1", "--data", p(&data), "--out", p(&out), "--workers", workers]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read_to_string(out.join("sweep.csv")).unwrap()
    };
    let csv = run("s1", "1");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], asa_core::metrics::CSV_COLUMNS.join(","));
    assert_eq!(lines.len(), 1 + 6 * 2);
    assert!(lines[1].starts_with("lambda=0.1 seed=0,"));
    assert!(lines[12].starts_with("lambda=20 seed=1,"));
    assert_eq!(run("s3", "3"), csv);
}
