//! Runs every configured engine on one data series and persists the results.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use filterlab::diagnostics::{compare_means, OracleComparison};
use filterlab::gibbs::gibbs_chain;
use filterlab::io::{fmt_f64, write_table};
use filterlab::kalman::{filter_series, smooth_trace};
use filterlab::model::simulate_local_level;
use filterlab::particle::run_filter;
use filterlab::{LocalLevelParams, ObservationSeries};
use sha2::{Digest, Sha256};

use crate::config::{DataSource, Engine, EngineSpec, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("data: {0}")]
    Data(#[source] filterlab::Error),
    #[error("cannot write {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Provenance the caller knows about but the config does not carry.
#[derive(Clone, Debug, Default)]
pub struct RunContext {
    pub config_file_sha256: Option<String>,
    pub cli_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    /// Which exact reference the engine was compared to.
    pub oracle: &'static str,
    pub metrics: OracleComparison,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineReport {
    pub label: String,
    pub kind: &'static str,
    pub seed: Option<u64>,
    /// `None` on success, otherwise the error message.
    pub error: Option<String>,
    pub comparison: Option<Comparison>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub engines: Vec<EngineReport>,
    /// Output file name and SHA-256 of its contents, manifest excluded.
    pub files: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn all_succeeded(&self) -> bool {
        self.engines.iter().all(|e| e.error.is_none())
    }

    pub fn engine(&self, label: &str) -> Option<&EngineReport> {
        self.engines.iter().find(|e| e.label == label)
    }
}

struct EngineOutput {
    files: Vec<(String, Vec<u8>)>,
    /// Filtered means (Kalman, particle) or posterior means per coordinate (Gibbs).
    means: Vec<f64>,
    smoothed_means: Option<Vec<f64>>,
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> filterlab::Result<()>) -> filterlab::Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn run_engine(spec: &EngineSpec, params: &LocalLevelParams, ys: &ObservationSeries) -> filterlab::Result<EngineOutput> {
    let label = &spec.label;
    match &spec.engine {
        Engine::Kalman => {
            let trace = filter_series(params, ys)?;
            let smoothed = smooth_trace(&trace);
            let header: Vec<String> = ["t", "mean", "var"].iter().map(|s| s.to_string()).collect();
            let rows = smoothed
                .iter()
                .enumerate()
                .map(|(i, b)| vec![(i + 1).to_string(), fmt_f64(b.mean), fmt_f64(b.variance)]);
            let smoothed_csv = csv_bytes(|w| write_table(w, &header, rows))?;
            Ok(EngineOutput {
                files: vec![
                    (format!("{label}.csv"), csv_bytes(|w| trace.write_csv(w))?),
                    (format!("{label}_smoothed.csv"), smoothed_csv),
                ],
                means: trace.posterior_means(),
                smoothed_means: Some(smoothed.iter().map(|b| b.mean).collect()),
            })
        }
        Engine::Particle(config) => {
            let trace = run_filter(ys, params, config)?;
            let mut files = vec![(format!("{label}.csv"), csv_bytes(|w| trace.write_csv(w))?)];
            if config.keep_ensembles {
                files.push((format!("{label}_ensemble.csv"), csv_bytes(|w| trace.write_ensemble_csv(w))?));
            }
            Ok(EngineOutput {
                files,
                means: trace.filtered_means(),
                smoothed_means: None,
            })
        }
        Engine::Gibbs(config) => {
            let samples = gibbs_chain(ys, params, config)?;
            Ok(EngineOutput {
                files: vec![(format!("{label}.csv"), csv_bytes(|w| samples.write_csv(w))?)],
                means: samples.means(),
                smoothed_means: None,
            })
        }
    }
}

pub fn load_data(config: &ExperimentConfig) -> filterlab::Result<ObservationSeries> {
    match &config.data {
        DataSource::Simulate { horizon, seed } => simulate_local_level(&config.model, *horizon, *seed),
        DataSource::File(path) => ObservationSeries::read_csv(path),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<(String, String)>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| ExperimentError::Io { path, source })?;
        self.files.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }
}

/// Load or simulate the data once, run every engine concurrently on it, and
/// write traces, `summary.csv`, `manifest.txt` and optionally `plot.py`.
///
/// An engine error is recorded in its report and the manifest; the other
/// engines still run. Only data and file-system failures are returned as
/// errors.
pub fn run_experiment(config: &ExperimentConfig, context: &RunContext) -> Result<ExperimentReport, ExperimentError> {
    let ys = load_data(config).map_err(ExperimentError::Data)?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.clone(),
        source,
    })?;

    let outputs: Vec<Result<EngineOutput, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .engines
            .iter()
            .map(|spec| scope.spawn(|| run_engine(spec, &config.model, &ys).map_err(|e| e.to_string())))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err("engine panicked".to_string())))
            .collect()
    });

    let oracle = outputs.iter().zip(&config.engines).find_map(|(out, spec)| match (out, &spec.engine) {
        (Ok(o), Engine::Kalman) => Some(o),
        _ => None,
    });

    let mut writer = Writer {
        dir,
        files: Vec::new(),
    };
    let mut data_csv = Vec::new();
    ys.write_csv(&mut data_csv).map_err(ExperimentError::Data)?;
    writer.write("data.csv", &data_csv)?;

    let mut reports = Vec::new();
    for (spec, out) in config.engines.iter().zip(&outputs) {
        let mut report = EngineReport {
            label: spec.label.clone(),
            kind: spec.engine.kind(),
            seed: spec.engine.seed(),
            error: None,
            comparison: None,
        };
        match out {
            Ok(o) => {
                for (name, bytes) in &o.files {
                    writer.write(name, bytes)?;
                }
                report.comparison = oracle.and_then(|k| compare(spec, o, k));
            }
            Err(e) => report.error = Some(e.clone()),
        }
        reports.push(report);
    }

    writer.write("summary.csv", &summary_csv(&reports))?;
    if config.emit_plots {
        writer.write("plot.py", plot_script(config).as_bytes())?;
    }
    let manifest = manifest_text(config, context, &ys, &reports, &writer.files);
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest).map_err(|source| ExperimentError::Io { path, source })?;

    Ok(ExperimentReport {
        output_dir: dir.clone(),
        engines: reports,
        files: writer.files,
    })
}

fn compare(spec: &EngineSpec, out: &EngineOutput, kalman: &EngineOutput) -> Option<Comparison> {
    let (oracle, reference) = match spec.engine {
        Engine::Gibbs(_) => ("kalman_smoother", kalman.smoothed_means.as_ref()?),
        _ => ("kalman_filter", &kalman.means),
    };
    compare_means(&out.means, reference)
        .ok()
        .map(|metrics| Comparison { oracle, metrics })
}

fn summary_csv(reports: &[EngineReport]) -> Vec<u8> {
    let header: Vec<String> = ["engine", "kind", "status", "oracle", "rmse", "max_abs"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = reports.iter().map(|r| {
        let (oracle, rmse, max_abs) = match &r.comparison {
            Some(c) => (c.oracle.to_string(), fmt_f64(c.metrics.rmse), fmt_f64(c.metrics.max_abs)),
            None => Default::default(),
        };
        let status = if r.error.is_none() { "ok" } else { "error" };
        vec![r.label.clone(), r.kind.to_string(), status.to_string(), oracle, rmse, max_abs]
    });
    let mut buf = Vec::new();
    write_table(&mut buf, &header, rows).expect("writing to memory");
    buf
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

fn manifest_text(
    config: &ExperimentConfig,
    context: &RunContext,
    ys: &ObservationSeries,
    reports: &[EngineReport],
    files: &[(String, String)],
) -> String {
    let mut lines = vec![
        format!("version={}", env!("CARGO_PKG_VERSION")),
        // output_dir is left out: it does not affect any numeric output
        format!(
            "config_sha256={}",
            sha256_hex(format!("{:?}{:?}{:?}{}", config.model, config.data, config.engines, config.emit_plots).as_bytes())
        ),
    ];
    if let Some(h) = &context.config_file_sha256 {
        lines.push(format!("config_file_sha256={h}"));
    }
    if let Some(s) = context.cli_seed {
        lines.push(format!("cli_seed={s}"));
    }
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    lines.push(format!("created_unix={created}"));
    match &config.data {
        DataSource::Simulate { horizon, seed } => {
            lines.push("data.source=simulate".into());
            lines.push(format!("data.horizon={horizon}"));
            lines.push(format!("data.seed={seed}"));
        }
        DataSource::File(path) => {
            lines.push(format!("data.source=file:{}", path.display()));
            lines.push(format!("data.horizon={}", ys.len()));
        }
    }
    for r in reports {
        lines.push(format!("engine.{}.kind={}", r.label, r.kind));
        if let Some(seed) = r.seed {
            lines.push(format!("engine.{}.seed={seed}", r.label));
        }
        match &r.error {
            None => lines.push(format!("engine.{}.status=ok", r.label)),
            Some(e) => {
                lines.push(format!("engine.{}.status=error", r.label));
                lines.push(format!("engine.{}.error={}", r.label, one_line(e)));
            }
        }
    }
    for (name, hash) in files {
        lines.push(format!("file.{name}.sha256={hash}"));
    }
    lines.join("\n") + "\n"
}

fn plot_script(config: &ExperimentConfig) -> String {
    let mut engines = String::new();
    for spec in &config.engines {
        engines.push_str(&format!("    (\"{}\", \"{}\"),\n", spec.label, spec.engine.kind()));
    }
    format!(
        r#"# Plots the filtered means written next to this script. Needs matplotlib.
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
ENGINES = [
{engines}]


def read(name):
    path = os.path.join(HERE, name)
    if not os.path.exists(path):
        return None
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


data = read("data.csv")
fig, ax = plt.subplots(figsize=(9, 4))
ax.plot([int(r["t"]) for r in data], [float(r["y"]) for r in data], ".", color="grey", label="y")
if data and "theta" in data[0]:
    ax.plot([int(r["t"]) for r in data], [float(r["theta"]) for r in data], "--", color="black", label="theta")
for label, kind in ENGINES:
    rows = read(label + ".csv")
    if rows is None:
        continue
    if kind == "kalman":
        ax.plot([int(r["t"]) for r in rows], [float(r["post_mean"]) for r in rows], label=label)
    elif kind == "particle":
        rows = [r for r in rows if int(r["t"]) > 0]
        ax.plot([int(r["t"]) for r in rows], [float(r["mean"]) for r in rows], label=label)
    else:
        cols = [c for c in rows[0] if c.startswith("theta_")]
        means = [sum(float(r[c]) for r in rows) / len(rows) for c in cols]
        ax.plot(range(1, len(means) + 1), means, "o", label=label)
ax.set_xlabel("t")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(HERE, "means.png"), dpi=120)
"#
    )
}
