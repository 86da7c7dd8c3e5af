//! Experiment configuration, read from TOML.
//!
//! ```toml
//! output_dir = "results"      # relative to the config file
//! emit_plots = true
//!
//! [model]
//! obs_var = 1.0
//! state_var = 1.0
//! prior_mean = 0.0
//! prior_var = 1.0
//!
//! [data]
//! simulate = { horizon = 50, seed = 1234 }   # or: file = "series.csv"
//!
//! [[engine]]
//! label = "exact"
//! kind = "kalman"
//!
//! [[engine]]
//! label = "pf"
//! kind = "particle"
//! n_particles = 5000
//! protocol = "propagate_first"   # update_first | sis | apf
//! scheme = "systematic"          # multinomial | stratified | residual
//! trigger = { ess_below = 0.5 }  # or "always" / "never"
//! seed = 7
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use filterlab::gibbs::{GibbsConfig, GibbsMode};
use filterlab::particle::{
    Execution, PfConfig, Protocol, ResampleTrigger, ResamplingPolicy, ResamplingScheme,
};
use filterlab::LocalLevelParams;
use serde::Deserialize;

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Simulate { horizon: usize, seed: u64 },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Engine {
    Kalman,
    Particle(PfConfig),
    Gibbs(GibbsConfig),
}

impl Engine {
    pub fn kind(&self) -> &'static str {
        match self {
            Engine::Kalman => "kalman",
            Engine::Particle(_) => "particle",
            Engine::Gibbs(_) => "gibbs",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Engine::Kalman => None,
            Engine::Particle(c) => Some(c.seed),
            Engine::Gibbs(c) => Some(c.seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineSpec {
    pub label: String,
    pub engine: Engine,
}

impl EngineSpec {
    /// Files this engine writes into the output directory.
    pub fn output_files(&self) -> Vec<String> {
        let mut files = vec![format!("{}.csv", self.label)];
        match &self.engine {
            Engine::Kalman => files.push(format!("{}_smoothed.csv", self.label)),
            Engine::Particle(c) if c.keep_ensembles => files.push(format!("{}_ensemble.csv", self.label)),
            _ => {}
        }
        files
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: LocalLevelParams,
    pub data: DataSource,
    pub engines: Vec<EngineSpec>,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
}

pub const RESERVED_FILES: [&str; 4] = ["data.csv", "summary.csv", "manifest.txt", "plot.py"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Schema,
    Invariant,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ViolationKind::Schema => "schema",
            ViolationKind::Invariant => "invariant",
        };
        write!(f, "{kind} violation: {}", self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration:\n{}", list(.0))]
    Invalid(Vec<Violation>),
    #[error("cannot read {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn list(vs: &[Violation]) -> String {
    vs.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n")
}

impl ConfigError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParseOptions {
    /// Directory that relative paths are resolved against.
    pub base_dir: Option<PathBuf>,
    /// Seed for any stochastic component whose seed is omitted.
    pub fallback_seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    output_dir: Option<PathBuf>,
    #[serde(default)]
    emit_plots: bool,
    model: RawModel,
    data: RawData,
    #[serde(default, rename = "engine")]
    engines: Vec<RawEngine>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    obs_var: f64,
    state_var: f64,
    prior_mean: f64,
    prior_var: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    simulate: Option<RawSimulate>,
    file: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulate {
    horizon: usize,
    seed: Option<u64>,
}

#[derive(Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawKind {
    Kalman,
    Particle,
    Gibbs,
}

#[derive(Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawProtocol {
    PropagateFirst,
    UpdateFirst,
    Sis,
    Apf,
}

#[derive(Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawScheme {
    Multinomial,
    Systematic,
    Stratified,
    Residual,
}

#[derive(Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawNamedTrigger {
    Always,
    Never,
}

#[derive(Clone, Copy, Deserialize)]
#[serde(untagged)]
enum RawTrigger {
    Named(RawNamedTrigger),
    EssBelow { ess_below: f64 },
}

#[derive(Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawExecution {
    Serial,
    Parallel,
}

#[derive(Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawMode {
    SingleSite,
    Ffbs,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEngine {
    label: String,
    kind: RawKind,
    seed: Option<u64>,
    // particle
    n_particles: Option<usize>,
    protocol: Option<RawProtocol>,
    scheme: Option<RawScheme>,
    trigger: Option<RawTrigger>,
    execution: Option<RawExecution>,
    dump_ensemble: Option<bool>,
    // gibbs
    iterations: Option<usize>,
    burn_in: Option<usize>,
    mode: Option<RawMode>,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with(text, &ParseOptions::default())
}

/// Read a config file; relative paths inside it resolve against its directory.
pub fn load_config(path: &Path, fallback_seed: Option<u64>) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let options = ParseOptions {
        base_dir: Some(path.parent().unwrap_or(Path::new(".")).to_path_buf()),
        fallback_seed,
    };
    parse_config_with(&text, &options)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

pub fn parse_config_with(text: &str, options: &ParseOptions) -> Result<ExperimentConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ConfigError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let raw = RawConfig::deserialize(table).map_err(|e| {
        ConfigError::Invalid(vec![Violation {
            kind: ViolationKind::Schema,
            message: e.message().trim().to_string(),
        }])
    })?;
    Validator::new(options).build(raw)
}

struct Validator<'a> {
    options: &'a ParseOptions,
    violations: Vec<Violation>,
}

impl<'a> Validator<'a> {
    fn new(options: &'a ParseOptions) -> Self {
        Self {
            options,
            violations: Vec::new(),
        }
    }

    fn schema(&mut self, message: String) {
        self.violations.push(Violation {
            kind: ViolationKind::Schema,
            message,
        });
    }

    fn invariant(&mut self, message: String) {
        self.violations.push(Violation {
            kind: ViolationKind::Invariant,
            message,
        });
    }

    fn resolve(&self, path: PathBuf) -> PathBuf {
        match &self.options.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path,
        }
    }

    fn seed(&mut self, explicit: Option<u64>, what: &str) -> u64 {
        match explicit.or(self.options.fallback_seed) {
            Some(s) => s,
            None => {
                self.invariant(format!("{what}: seed is required (set it in the config or pass --seed)"));
                0
            }
        }
    }

    fn build(mut self, raw: RawConfig) -> Result<ExperimentConfig, ConfigError> {
        let m = raw.model;
        let model = LocalLevelParams {
            obs_var: m.obs_var,
            state_var: m.state_var,
            prior_mean: m.prior_mean,
            prior_var: m.prior_var,
        };
        for v in model.violations() {
            self.invariant(v);
        }

        let data = match (raw.data.simulate, raw.data.file) {
            (Some(sim), None) => DataSource::Simulate {
                horizon: sim.horizon,
                seed: self.seed(sim.seed, "data.simulate"),
            },
            (None, Some(file)) => {
                let path = self.resolve(file);
                if !path.is_file() {
                    self.invariant(format!("data.file {} does not exist", path.display()));
                }
                DataSource::File(path)
            }
            _ => {
                self.schema("data needs exactly one of `simulate` or `file`".into());
                DataSource::File(PathBuf::new())
            }
        };

        if raw.engines.is_empty() {
            self.invariant("at least one [[engine]] is required".into());
        }
        let mut labels = BTreeSet::new();
        let mut engines = Vec::new();
        for e in raw.engines {
            if !labels.insert(e.label.clone()) {
                self.schema(format!("duplicate engine label \"{}\"", e.label));
            }
            if e.label.is_empty() || !e.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                self.schema(format!(
                    "engine label \"{}\" must be non-empty and use only letters, digits, '_' or '-'",
                    e.label
                ));
            }
            let engine = self.engine(&e);
            engines.push(EngineSpec {
                label: e.label,
                engine,
            });
        }
        let mut files: BTreeSet<String> = RESERVED_FILES.iter().map(|s| s.to_string()).collect();
        let mut seen = BTreeSet::new();
        for spec in &engines {
            if !seen.insert(&spec.label) {
                continue;
            }
            for f in spec.output_files() {
                if !files.insert(f.clone()) {
                    self.schema(format!("engine \"{}\" would overwrite output file {f}", spec.label));
                }
            }
        }

        if !self.violations.is_empty() {
            return Err(ConfigError::Invalid(self.violations));
        }
        let output_dir = self.resolve(raw.output_dir.unwrap_or_else(|| PathBuf::from("results")));
        Ok(ExperimentConfig {
            model,
            data,
            engines,
            output_dir,
            emit_plots: raw.emit_plots,
        })
    }

    fn reject_fields(&mut self, e: &RawEngine, fields: &[(&str, bool)]) {
        for (name, present) in fields {
            if *present {
                self.schema(format!(
                    "engine \"{}\": field `{name}` does not apply to kind {}",
                    e.label,
                    kind_name(e.kind)
                ));
            }
        }
    }

    fn engine(&mut self, e: &RawEngine) -> Engine {
        let particle_fields = [
            ("n_particles", e.n_particles.is_some()),
            ("protocol", e.protocol.is_some()),
            ("scheme", e.scheme.is_some()),
            ("trigger", e.trigger.is_some()),
            ("execution", e.execution.is_some()),
            ("dump_ensemble", e.dump_ensemble.is_some()),
        ];
        let gibbs_fields = [
            ("iterations", e.iterations.is_some()),
            ("burn_in", e.burn_in.is_some()),
            ("mode", e.mode.is_some()),
        ];
        let what = format!("engine \"{}\"", e.label);
        match e.kind {
            RawKind::Kalman => {
                self.reject_fields(e, &particle_fields);
                self.reject_fields(e, &gibbs_fields);
                self.reject_fields(e, &[("seed", e.seed.is_some())]);
                Engine::Kalman
            }
            RawKind::Particle => {
                self.reject_fields(e, &gibbs_fields);
                let seed = self.seed(e.seed, &what);
                let Some(n) = e.n_particles else {
                    self.schema(format!("{what}: n_particles is required"));
                    return Engine::Kalman;
                };
                let protocol = match e.protocol.unwrap_or(RawProtocol::PropagateFirst) {
                    RawProtocol::PropagateFirst => Protocol::PropagateFirst,
                    RawProtocol::UpdateFirst => Protocol::UpdateFirst,
                    RawProtocol::Sis => Protocol::Sis,
                    RawProtocol::Apf => Protocol::Apf,
                };
                let scheme = match e.scheme.unwrap_or(RawScheme::Systematic) {
                    RawScheme::Multinomial => ResamplingScheme::Multinomial,
                    RawScheme::Systematic => ResamplingScheme::Systematic,
                    RawScheme::Stratified => ResamplingScheme::Stratified,
                    RawScheme::Residual => ResamplingScheme::Residual,
                };
                let trigger = match e.trigger {
                    None => ResampleTrigger::default(),
                    Some(RawTrigger::Named(RawNamedTrigger::Always)) => ResampleTrigger::Always,
                    Some(RawTrigger::Named(RawNamedTrigger::Never)) => ResampleTrigger::Never,
                    Some(RawTrigger::EssBelow { ess_below }) => ResampleTrigger::EssBelow(ess_below),
                };
                let mut config = PfConfig::new(n, protocol, seed)
                    .with_resampling(ResamplingPolicy::new(scheme, trigger))
                    .with_execution(match e.execution {
                        Some(RawExecution::Serial) => Execution::Serial,
                        _ => Execution::Parallel,
                    });
                config.keep_ensembles = e.dump_ensemble.unwrap_or(false);
                if config.n_particles == 0 {
                    self.invariant(format!("{what}: PfConfig: n_particles must be >= 1"));
                }
                if let Err(err) = config.resampling.validate() {
                    self.invariant(format!("{what}: {err}"));
                }
                Engine::Particle(config)
            }
            RawKind::Gibbs => {
                self.reject_fields(e, &particle_fields);
                let seed = self.seed(e.seed, &what);
                let Some(iterations) = e.iterations else {
                    self.schema(format!("{what}: iterations is required"));
                    return Engine::Kalman;
                };
                let mut config = GibbsConfig::new(iterations, seed).with_mode(match e.mode {
                    Some(RawMode::Ffbs) => GibbsMode::Ffbs,
                    _ => GibbsMode::SingleSite,
                });
                if let Some(b) = e.burn_in {
                    config = config.with_burn_in(b);
                }
                if let Err(err) = config.validate() {
                    self.invariant(format!("{what}: {err}"));
                }
                Engine::Gibbs(config)
            }
        }
    }
}

fn kind_name(kind: RawKind) -> &'static str {
    match kind {
        RawKind::Kalman => "kalman",
        RawKind::Particle => "particle",
        RawKind::Gibbs => "gibbs",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
obs_var = 1.0
state_var = 1.0
prior_mean = 0.0
prior_var = 1.0

[data]
simulate = { horizon = 10, seed = 1 }

[[engine]]
label = "exact"
kind = "kalman"
"#;

    #[test]
    fn minimal_config_is_valid() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.data, DataSource::Simulate { horizon: 10, seed: 1 });
        assert_eq!(c.engines.len(), 1);
        assert_eq!(c.engines[0].engine, Engine::Kalman);
        assert!(!c.emit_plots);
        assert_eq!(c.output_dir, PathBuf::from("results"));
    }

    fn with_engines(extra: &str) -> String {
        format!("{MINIMAL}\n{extra}")
    }

    #[test]
    fn duplicate_label_is_a_schema_violation_naming_it() {
        let err = parse_config(&with_engines("[[engine]]\nlabel = \"exact\"\nkind = \"kalman\"\n")).unwrap_err();
        let v = err.violations();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Schema);
        assert!(v[0].message.contains("\"exact\""));
    }

    #[test]
    fn negative_variance_cites_params_type() {
        let err = parse_config(&MINIMAL.replace("obs_var = 1.0", "obs_var = -1.0")).unwrap_err();
        let v = err.violations();
        assert_eq!(v[0].kind, ViolationKind::Invariant);
        assert!(v[0].message.contains("LocalLevelParams"), "{}", v[0].message);
    }

    #[test]
    fn every_violation_is_listed() {
        let text = MINIMAL
            .replace("obs_var = 1.0", "obs_var = -0.5")
            .replace("prior_var = 1.0", "prior_var = -2.0")
            .replace("horizon = 10, seed = 1", "horizon = 10")
            + "[[engine]]\nlabel = \"exact\"\nkind = \"kalman\"\n";
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.violations().len(), 4, "{err}");
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_config("[model]\nobs_var = = 1\n").unwrap_err();
        match err {
            ConfigError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 11)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_field_is_schema_violation() {
        let err = parse_config(&MINIMAL.replace("prior_var = 1.0", "prior_var = 1.0\nextra = 2")).unwrap_err();
        assert_eq!(err.violations()[0].kind, ViolationKind::Schema);
        assert!(err.to_string().contains("extra"));
    }

    #[test]
    fn particle_engine_fields() {
        let c = parse_config(&with_engines(
            "[[engine]]\nlabel = \"pf\"\nkind = \"particle\"\nn_particles = 100\nprotocol = \"apf\"\nscheme = \"residual\"\ntrigger = { ess_below = 0.3 }\nseed = 5\ndump_ensemble = true\n",
        ))
        .unwrap();
        let Engine::Particle(pf) = &c.engines[1].engine else {
            panic!()
        };
        assert_eq!(pf.n_particles, 100);
        assert_eq!(pf.protocol, Protocol::Apf);
        assert_eq!(
            pf.resampling,
            ResamplingPolicy::new(ResamplingScheme::Residual, ResampleTrigger::EssBelow(0.3))
        );
        assert!(pf.keep_ensembles);
        assert_eq!(c.engines[1].output_files(), vec!["pf.csv", "pf_ensemble.csv"]);

        let always = parse_config(&with_engines(
            "[[engine]]\nlabel = \"pf\"\nkind = \"particle\"\nn_particles = 10\ntrigger = \"always\"\nseed = 1\n",
        ))
        .unwrap();
        let Engine::Particle(pf) = &always.engines[1].engine else {
            panic!()
        };
        assert_eq!(pf.resampling.trigger, ResampleTrigger::Always);
    }

    #[test]
    fn missing_seed_needs_fallback() {
        let text = with_engines("[[engine]]\nlabel = \"g\"\nkind = \"gibbs\"\niterations = 100\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("seed is required"));
        let options = ParseOptions {
            fallback_seed: Some(9),
            ..ParseOptions::default()
        };
        let c = parse_config_with(&text, &options).unwrap();
        assert_eq!(c.engines[1].engine.seed(), Some(9));
    }

    #[test]
    fn misplaced_fields_and_bad_values() {
        let err = parse_config(&with_engines(
            "[[engine]]\nlabel = \"k\"\nkind = \"kalman\"\nn_particles = 3\n[[engine]]\nlabel = \"pf\"\nkind = \"particle\"\nn_particles = 0\nseed = 1\ntrigger = { ess_below = 1.5 }\n",
        ))
        .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("`n_particles` does not apply"), "{text}");
        assert!(text.contains("n_particles must be >= 1"), "{text}");
        assert_eq!(err.violations().len(), 3, "{text}");
    }

    #[test]
    fn missing_file_and_reserved_names() {
        let text = MINIMAL.replace("simulate = { horizon = 10, seed = 1 }", "file = \"/no/such/file.csv\"");
        assert!(parse_config(&text).unwrap_err().to_string().contains("does not exist"));
        let err = parse_config(&with_engines("[[engine]]\nlabel = \"summary\"\nkind = \"kalman\"\n")).unwrap_err();
        assert!(err.to_string().contains("overwrite"));
    }

    #[test]
    fn no_engines_is_invalid() {
        let text = MINIMAL.split("[[engine]]").next().unwrap();
        assert!(parse_config(text).unwrap_err().to_string().contains("at least one"));
    }
}
