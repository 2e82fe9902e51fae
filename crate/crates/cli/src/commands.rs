//! One function per subcommand. Each returns what it wrote so callers and
//! tests can inspect it without re-reading files.

use std::fs;
use std::path::{Path, PathBuf};

use asa_core::data::{make_benchmark_from, Benchmark, Split};
use asa_core::metrics::{a_distance, pca_project, MetricsReport, PairDistance};
use asa_core::nn::MiniNet;
use asa_core::tensor::GradCheckConfig;
use asa_core::train::{EpochRecord, Hooks, RunLog};
use asa_core::verify::{self, Scope, SuiteReport};
use asa_core::Tensor;

use crate::config::{DataConfig, EvalConfig, RunConfig};
use crate::error::{invalid, io_error, CliError, Result};
use crate::sweep::{self, Grid};
use crate::{experiment, fsio};

pub const MODEL_FILE: &str = "model.advt";
pub const LOG_FILE: &str = "run.jsonl";
pub const CONFIG_FILE: &str = "config.toml";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_JSON: &str = "sweep.json";
pub const ADISTANCE_CSV: &str = "adistance.csv";
pub const PCA_CSV: &str = "pca.csv";
pub const PCA_EXPLAINED_CSV: &str = "pca_explained.csv";
const MANIFEST_FILE: &str = "manifest.toml";

pub fn load_data(dir: &Path) -> Result<Benchmark> {
    fsio::require_dir(dir, "--data")?;
    if !dir.join(MANIFEST_FILE).is_file() {
        return Err(invalid("--data", format!("{} has no {MANIFEST_FILE}", dir.display())));
    }
    Ok(Benchmark::load(dir)?)
}

pub fn load_model(path: &Path) -> Result<MiniNet> {
    fsio::require_file(path, "--checkpoint")?;
    let file = fs::File::open(path).map_err(io_error(path))?;
    MiniNet::load(&mut std::io::BufReader::new(file)).map_err(|e| invalid("--checkpoint", format!("{}: {e}", path.display())))
}

fn model_bytes(model: &MiniNet) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    model.save(&mut bytes)?;
    Ok(bytes)
}

fn out_dir(dir: &Path) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        return Err(invalid("--out", format!("{} exists and is not a directory", dir.display())));
    }
    fs::create_dir_all(dir).map_err(io_error(dir))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Failed(format!("csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Failed(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Generates the benchmark and writes it to `out`. The dataset is built in
/// a sibling temp directory and renamed into place. An existing dataset at
/// `out` is replaced; any other non-empty directory is left alone.
pub fn gen_data(data: &DataConfig, out: &Path) -> Result<Benchmark> {
    let bench = make_benchmark_from(data.seed, data.domains.clone(), data.train_size, data.target_size)?;
    if out.exists() {
        fsio::require_dir(out, "--out")?;
        let empty = fs::read_dir(out).map_err(io_error(out))?.next().is_none();
        if !empty && !out.join(MANIFEST_FILE).is_file() {
            return Err(invalid(
                "--out",
                format!("{} is a non-empty directory without a dataset manifest", out.display()),
            ));
        }
    }
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(io_error(&parent))?;
    let tmp = tempfile::Builder::new()
        .prefix(".asa-data-")
        .tempdir_in(&parent)
        .map_err(io_error(&parent))?;
    bench.save(tmp.path())?;
    if out.exists() {
        fs::remove_dir_all(out).map_err(io_error(out))?;
    }
    fs::rename(tmp.path(), out).map_err(io_error(out))?;
    let _ = tmp.keep();
    Ok(bench)
}

pub struct TrainOptions {
    /// Write `checkpoints/epoch-NNNN.advt` every this many epochs.
    pub checkpoint_every: Option<usize>,
    pub wall_clock: bool,
}

/// Trains on the source split and writes the checkpoint, the run log and the
/// resolved config into `out`.
pub fn train(cfg: &RunConfig, data: &Path, out: &Path, opts: &TrainOptions) -> Result<RunLog> {
    if opts.checkpoint_every == Some(0) {
        return Err(invalid("--checkpoint-every", "must be ≥ 1"));
    }
    let bench = load_data(data)?;
    out_dir(out)?;
    let every = opts.checkpoint_every;
    let ckpt_dir = out.join("checkpoints");
    let mut hook = |r: &EpochRecord, m: &MiniNet| -> asa_core::Result<()> {
        if let Some(n) = every {
            if (r.epoch + 1) % n == 0 {
                let path = ckpt_dir.join(format!("epoch-{:04}.advt", r.epoch + 1));
                let mut bytes = Vec::new();
                m.save(&mut bytes)?;
                fsio::write_atomic(&path, &bytes).map_err(|e| std::io::Error::other(e.to_string()))?;
            }
        }
        Ok(())
    };
    let hooks = Hooks {
        wall_clock: opts.wall_clock,
        on_epoch: Some(&mut hook),
    };
    let (model, log) = experiment::train_model(cfg, &bench.train, hooks)?;
    fsio::write_atomic(&out.join(CONFIG_FILE), cfg.to_toml().as_bytes())?;
    fsio::write_atomic(&out.join(MODEL_FILE), &model_bytes(&model)?)?;
    fsio::write_atomic(&out.join(LOG_FILE), log.to_jsonl().as_bytes())?;
    Ok(log)
}

/// Scores a checkpoint on target splits. `cfg` supplies the eval settings
/// and the seed; its model sections are replaced by the checkpoint's so the
/// config hash describes what was evaluated.
pub fn eval(
    cfg: &RunConfig,
    checkpoint: &Path,
    data: &Path,
    domains: Option<&[String]>,
    out: &Path,
    label: &str,
) -> Result<MetricsReport> {
    let model = load_model(checkpoint)?;
    let bench = load_data(data)?;
    let targets = experiment::select_targets(&bench, domains)?;
    let mut cfg = cfg.clone();
    cfg.model = model.spec().backbone.clone();
    cfg.method = model.spec().method.clone();
    let result = experiment::score(&model, &bench.train, &targets, cfg.train.seed, &cfg.eval)?;
    let report = MetricsReport::new(label, cfg.hash(), vec![result])?;
    out_dir(out)?;
    fsio::write_atomic(&out.join(REPORT_JSON), report.to_json().as_bytes())?;
    fsio::write_atomic(&out.join(REPORT_CSV), MetricsReport::to_csv([&report])?.as_bytes())?;
    Ok(report)
}

/// Scopes to run; `None` runs all three.
pub fn gradcheck(scope: Option<Scope>, instances: usize, seed: u64, tol: f64) -> Result<Vec<SuiteReport>> {
    if instances == 0 {
        return Err(invalid("--instances", "must be ≥ 1"));
    }
    let scopes = scope.map_or(Scope::ALL.to_vec(), |s| vec![s]);
    let cfg = GradCheckConfig::new(1e-4, tol);
    scopes.into_iter().map(|s| Ok(verify::run_suite(s, instances, seed, cfg)?)).collect()
}

/// Largest gap between the reversed Σ gradient and −λ times the plain one.
pub fn reversal_gap(instances: usize, seed: u64) -> Result<f64> {
    Ok(verify::reversal_gap(instances, seed, &[0.5, 5.0, 20.0])?)
}

/// Runs the grid and writes one CSV row (and one JSON entry) per run.
pub fn sweep(grid: &Grid, data: Option<&Path>, seeds: &[u64], workers: usize, out: &Path) -> Result<Vec<MetricsReport>> {
    let bench = match data {
        Some(dir) => load_data(dir)?,
        None => {
            let d = &grid.base.data;
            make_benchmark_from(d.seed, d.domains.clone(), d.train_size, d.target_size)?
        }
    };
    let reports = sweep::run_grid(grid, &bench, seeds, workers)?;
    out_dir(out)?;
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n";
    fsio::write_atomic(&out.join(SWEEP_JSON), json.as_bytes())?;
    fsio::write_atomic(&out.join(SWEEP_CSV), MetricsReport::to_csv(&reports)?.as_bytes())?;
    Ok(reports)
}

/// Parses `a:b,c:d` into split-name pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    text.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| match p.split_once(':') {
            Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => Ok((a.trim().to_string(), b.trim().to_string())),
            _ => Err(invalid("--pairs", format!("{p:?} is not source:target"))),
        })
        .collect()
}

pub struct ADistanceOutput {
    pub distances: Vec<PairDistance>,
    pub explained: Vec<f64>,
}

/// 𝒜-distance per pair, plus a PCA projection of every split named in the
/// pairs, fitted on their pooled features. Default pairs: source to each
/// target.
pub fn adistance(
    checkpoint: &Path,
    data: &Path,
    pairs: Option<Vec<(String, String)>>,
    eval: &EvalConfig,
    seed: u64,
    out: &Path,
) -> Result<ADistanceOutput> {
    let model = load_model(checkpoint)?;
    let bench = load_data(data)?;
    let pairs = pairs.unwrap_or_else(|| {
        bench.targets.iter().map(|t| (bench.train.name.clone(), t.name.clone())).collect()
    });
    if pairs.is_empty() {
        return Err(invalid("--pairs", "no pairs given"));
    }
    let mut names: Vec<&str> = Vec::new();
    for (a, b) in &pairs {
        for n in [a, b] {
            if bench.split(n).is_none() {
                return Err(invalid("--pairs", format!("no split {n:?}")));
            }
            if !names.contains(&n.as_str()) {
                names.push(n);
            }
        }
    }
    let splits: Vec<&Split> = names.iter().map(|n| bench.split(n).expect("checked above")).collect();
    let feats: Vec<Tensor> = splits.iter().map(|s| experiment::features(&model, s, eval)).collect::<Result<_>>()?;
    let of = |n: &str| &feats[names.iter().position(|m| *m == n).expect("checked above")];
    let distances: Vec<PairDistance> = pairs
        .iter()
        .map(|(a, b)| {
            Ok(PairDistance {
                source: a.clone(),
                target: b.clone(),
                distance: a_distance(of(a), of(b), seed, eval.a_distance_config())?,
            })
        })
        .collect::<Result<_>>()?;

    let width = feats[0].shape()[1];
    let pooled: Vec<f64> = feats.iter().flat_map(|f| f.data().iter().copied()).collect();
    let rows = pooled.len() / width;
    let pca = pca_project(&Tensor::new(vec![rows, width], pooled).map_err(asa_core::Error::from)?, eval.pca_dim)?;

    out_dir(out)?;
    let dist_rows = distances
        .iter()
        .map(|d| vec![d.source.clone(), d.target.clone(), format!("{:.6}", d.distance)]);
    fsio::write_atomic(&out.join(ADISTANCE_CSV), csv_text(&["source", "target", "distance"], dist_rows)?.as_bytes())?;

    let dim = eval.pca_dim;
    let mut header = vec!["split".to_string(), "index".into(), "label".into()];
    header.extend((1..=dim).map(|i| format!("pc{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let coords = pca.coords.data();
    let mut row = 0;
    let mut point_rows = Vec::with_capacity(rows);
    for s in &splits {
        for (i, l) in s.labels.iter().enumerate() {
            let mut r = vec![s.name.clone(), i.to_string(), l.to_string()];
            r.extend(coords[row * dim..(row + 1) * dim].iter().map(|v| format!("{v:.6}")));
            point_rows.push(r);
            row += 1;
        }
    }
    fsio::write_atomic(&out.join(PCA_CSV), csv_text(&header, point_rows)?.as_bytes())?;
    let explained_rows = pca
        .explained
        .iter()
        .enumerate()
        .map(|(i, r)| vec![format!("pc{}", i + 1), format!("{r:.6}")]);
    fsio::write_atomic(&out.join(PCA_EXPLAINED_CSV), csv_text(&["component", "ratio"], explained_rows)?.as_bytes())?;
    Ok(ADistanceOutput {
        distances,
        explained: pca.explained,
    })
}
