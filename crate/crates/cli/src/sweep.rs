//! Grid sweeps: method × insertion set × λ (and optionally variant and
//! training mode), each cell run once per seed.

use std::path::Path;

use asa_core::data::Benchmark;
use asa_core::metrics::MetricsReport;
use asa_core::nn::{InsertionPoint, Method};
use asa_core::style::Variant;
use asa_core::train::AsaMode;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{invalid, CliError, Result};
use crate::{experiment, fsio};

/// Axes left out keep the base config's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Axes {
    pub methods: Option<Vec<Method>>,
    pub points: Option<Vec<Vec<InsertionPoint>>>,
    pub lambdas: Option<Vec<f64>>,
    pub variants: Option<Vec<Variant>>,
    pub modes: Option<Vec<AsaMode>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    pub base: RunConfig,
    pub axes: Axes,
}

/// One grid cell: the config it runs and the axis values that name it.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub config: RunConfig,
    pub tags: Vec<(String, String)>,
}

fn axis<T: Clone>(values: &Option<Vec<T>>, key: &str) -> Result<Option<Vec<T>>> {
    match values {
        Some(v) if v.is_empty() => Err(invalid(format!("axes.{key}"), "must not be empty")),
        other => Ok(other.clone()),
    }
}

impl Grid {
    pub fn from_toml(text: &str) -> Result<Self> {
        let grid: Self = toml::from_str(text).map_err(|e| invalid("grid", e.message()))?;
        grid.base.validate()?;
        grid.cells()?;
        Ok(grid)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fsio::read_text(path, "--grid")?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Invalid { key, msg } => invalid(format!("{}: {key}", path.display()), msg),
            other => other,
        })
    }

    /// Cells in row-major grid order: methods, then points, λ, variant, mode.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut cells = vec![Cell {
            config: self.base.clone(),
            tags: Vec::new(),
        }];
        fn expand<T: Clone>(
            cells: Vec<Cell>,
            values: Option<Vec<T>>,
            key: &str,
            show: impl Fn(&T) -> String,
            apply: impl Fn(&mut RunConfig, &T),
        ) -> Vec<Cell> {
            let Some(values) = values else { return cells };
            let (values, show, apply) = (&values, &show, &apply);
            cells
                .into_iter()
                .flat_map(move |c| {
                    values.iter().map(move |v| {
                        let mut c = c.clone();
                        apply(&mut c.config, v);
                        c.tags.push((key.to_string(), show(v)));
                        c
                    })
                })
                .collect::<Vec<_>>()
        }
        let a = &self.axes;
        cells = expand(cells, axis(&a.methods, "methods")?, "method", |m| m.name().into(), |c, m| c.method.kind = *m);
        cells = expand(
            cells,
            axis(&a.points, "points")?,
            "points",
            |p| p.iter().map(|p| p.name()).collect::<Vec<_>>().join("+"),
            |c, p| c.method.points = p.clone(),
        );
        cells = expand(cells, axis(&a.lambdas, "lambdas")?, "lambda", |l| l.to_string(), |c, l| c.method.lambda = *l);
        cells = expand(
            cells,
            axis(&a.variants, "variants")?,
            "variant",
            serde_name,
            |c, v| c.method.variant = *v,
        );
        cells = expand(
            cells,
            axis(&a.modes, "modes")?,
            "mode",
            serde_name,
            |c, m| c.train.asa_mode = *m,
        );
        for c in &cells {
            c.config.validate().map_err(|e| invalid(format!("grid cell {}", label(&c.tags, None)), e.to_string()))?;
        }
        Ok(cells)
    }
}

/// The name a unit enum carries in config files.
fn serde_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => unreachable!("axis values serialize as strings"),
    }
}

fn label(tags: &[(String, String)], seed: Option<u64>) -> String {
    let mut parts: Vec<String> = tags.iter().map(|(k, v)| format!("{k}={v}")).collect();
    if let Some(s) = seed {
        parts.push(format!("seed={s}"));
    }
    if parts.is_empty() {
        "base".into()
    } else {
        parts.join(" ")
    }
}

/// Runs every cell for every seed on `workers` threads. Rows come back in
/// grid order (cells outer, seeds inner) whatever the scheduling.
pub fn run_grid(grid: &Grid, bench: &Benchmark, seeds: &[u64], workers: usize) -> Result<Vec<MetricsReport>> {
    if seeds.is_empty() {
        return Err(invalid("--seeds", "need at least one seed"));
    }
    let jobs: Vec<(RunConfig, String)> = grid
        .cells()?
        .into_iter()
        .flat_map(|c| {
            seeds.iter().map(move |&s| {
                let mut cfg = c.config.clone();
                cfg.train.seed = s;
                (cfg, label(&c.tags, Some(s)))
            })
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid("--workers", e.to_string()))?;
    let rows: Vec<Result<MetricsReport>> = pool.install(|| {
        jobs.par_iter()
            .map(|(cfg, label)| experiment::run(cfg, bench, label).map(|o| o.report))
            .collect()
    });
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_axis_expands_in_order() {
        let grid = Grid::from_toml("[axes]\nlambdas = [0.1, 0.5, 1.0, 5.0, 10.0, 20.0]\n").unwrap();
        let cells = grid.cells().unwrap();
        let l: Vec<f64> = cells.iter().map(|c| c.config.method.lambda).collect();
        assert_eq!(l, [0.1, 0.5, 1.0, 5.0, 10.0, 20.0]);
        assert_eq!(label(&cells[0].tags, Some(3)), "lambda=0.1 seed=3");
    }

    #[test]
    fn axes_multiply() {
        let text = "[axes]\nmethods = [\"advstyle\", \"dsu\"]\npoints = [[\"conv1\"], [\"conv1\", \"pool1\"]]\nlambdas = [1.0, 5.0]\n";
        let cells = Grid::from_toml(text).unwrap().cells().unwrap();
        assert_eq!(cells.len(), 8);
        assert_eq!(label(&cells[3].tags, None), "method=advstyle points=conv1+pool1 lambda=5");
        assert_eq!(cells[4].config.method.kind, Method::Dsu);
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(Grid::from_toml("[axes]\nlambdas = []\n").is_err());
        assert!(Grid::from_toml("[axes]\nlambda = [1.0]\n").is_err());
        assert!(Grid::from_toml("[axes]\nlambdas = [-1.0]\n").is_err());
        assert!(Grid::from_toml("[axes]\npoints = [[\"conv1\", \"conv1\"]]\n").is_err());
    }

    #[test]
    fn missing_axes_give_one_cell() {
        let cells = Grid::default().cells().unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(label(&cells[0].tags, None), "base");
    }
}
