//! Run configuration. TOML or JSON, chosen by file extension; both map to
//! the same schema and unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::Pooling;
use crate::metrics::metric_names;
use crate::stimgen::{GridDensity, TestId, DEFAULT_DURATION, DEFAULT_FPS, DEFAULT_SEED};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT_S: f64 = 300.0;
pub const DEFAULT_IN_FLIGHT: usize = 4;
pub const THREADS_ENV: &str = "PERCEPBENCH_THREADS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {msg}")]
    Read { path: PathBuf, msg: String },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplayConfig {
    #[serde(default = "default_peak")]
    pub peak_luminance: f64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Overrides the per-test viewing distance when set.
    #[serde(default)]
    pub ppd: Option<f64>,
}

fn default_peak() -> f64 {
    100.0
}
fn default_fps() -> f64 {
    DEFAULT_FPS
}
fn default_duration() -> f64 {
    DEFAULT_DURATION
}

impl Default for DisplayConfig {
    fn default() -> Self {
        Self { peak_luminance: default_peak(), fps: default_fps(), duration: default_duration(), ppd: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterConfig {
    pub name: String,
    pub command: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_in_flight")]
    pub in_flight: usize,
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_S
}
fn default_in_flight() -> usize {
    DEFAULT_IN_FLIGHT
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_pack() -> String {
    "builtin:castle".into()
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_tests() -> Vec<TestId> {
    TestId::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// A directory, or `builtin:castle` / `builtin:synthetic`.
    #[serde(default = "default_pack")]
    pub reference_pack: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tests")]
    pub tests: Vec<TestId>,
    #[serde(default)]
    pub metrics: Vec<String>,
    /// 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub pooling: Pooling,
    #[serde(default)]
    pub reproducible: bool,
    #[serde(default)]
    pub display: DisplayConfig,
    #[serde(default)]
    pub grid: BTreeMap<TestId, GridDensity>,
    #[serde(default)]
    pub adapters: Vec<AdapterConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            output: default_output(),
            reference_pack: default_pack(),
            seed: DEFAULT_SEED,
            tests: default_tests(),
            metrics: Vec::new(),
            threads: 0,
            pooling: Pooling::default(),
            reproducible: false,
            display: DisplayConfig::default(),
            grid: BTreeMap::new(),
            adapters: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn from_str(text: &str, json: bool) -> Result<Self, String> {
        if json {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        }
    }

    /// Loads and validates. Relative `output` and pack paths resolve against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.to_path_buf(), msg: e.to_string() })?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = Self::from_str(&text, json).map_err(|msg| ConfigError::Parse { path: path.to_path_buf(), msg })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        if !cfg.reference_pack.starts_with("builtin:") && Path::new(&cfg.reference_pack).is_relative() {
            cfg.reference_pack = base.join(&cfg.reference_pack).to_string_lossy().into_owned();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.tests.is_empty() {
            return bad("no tests selected".into());
        }
        for (i, t) in self.tests.iter().enumerate() {
            if self.tests[..i].contains(t) {
                return bad(format!("test {t} listed twice"));
            }
        }
        let known = metric_names();
        let mut names: Vec<&str> = Vec::new();
        for m in &self.metrics {
            if !known.contains(m) {
                return bad(format!("unknown metric '{m}' (known: {})", known.join(", ")));
            }
            names.push(m);
        }
        for a in &self.adapters {
            if a.name.is_empty() || !a.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return bad(format!("adapter name '{}' must be non-empty [A-Za-z0-9._-]", a.name));
            }
            if a.command.trim().is_empty() {
                return bad(format!("adapter '{}' has an empty command", a.name));
            }
            if !(a.timeout_s > 0.0 && a.timeout_s.is_finite()) {
                return bad(format!("adapter '{}': timeout_s must be positive", a.name));
            }
            if a.in_flight == 0 {
                return bad(format!("adapter '{}': in_flight must be at least 1", a.name));
            }
            names.push(&a.name);
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return bad(format!("metric name '{n}' used twice"));
            }
        }
        let d = &self.display;
        if !(d.peak_luminance > 0.0 && d.peak_luminance.is_finite()) {
            return bad(format!("display.peak_luminance must be positive, got {}", d.peak_luminance));
        }
        if !(d.fps > 0.0 && d.fps.is_finite()) {
            return bad(format!("display.fps must be positive, got {}", d.fps));
        }
        if !(d.duration > 0.0 && d.duration.is_finite()) {
            return bad(format!("display.duration must be positive, got {}", d.duration));
        }
        if let Some(p) = d.ppd {
            if !(p > 0.0 && p.is_finite()) {
                return bad(format!("display.ppd must be positive, got {p}"));
            }
        }
        for (t, g) in &self.grid {
            let min_axis = if *t == TestId::MatchingColor { 3 } else { 2 };
            if g.axis_points < min_axis || g.contrast_points < 2 {
                return bad(format!("grid.{t}: need at least {min_axis} axis and 2 contrast points"));
            }
        }
        if let Some(dir) = self.reference_pack.strip_prefix("builtin:") {
            if !matches!(dir, "castle" | "synthetic") {
                return bad(format!("unknown builtin pack '{dir}' (castle, synthetic)"));
            }
        }
        Ok(())
    }

    pub fn density(&self, t: TestId) -> GridDensity {
        self.grid.get(&t).copied().unwrap_or_else(|| GridDensity::default_for(t))
    }

    /// `PERCEPBENCH_THREADS` wins over the config value.
    pub fn thread_count(&self) -> usize {
        std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(self.threads)
    }

    pub fn suites_dir(&self) -> PathBuf {
        self.output.join("suites")
    }
    pub fn surfaces_dir(&self) -> PathBuf {
        self.output.join("surfaces")
    }
    pub fn scores_dir(&self) -> PathBuf {
        self.output.join("scores")
    }
    pub fn report_dir(&self) -> PathBuf {
        self.output.join("report")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
schema_version = 1
output = "results"
reference_pack = "builtin:synthetic"
seed = 7
tests = ["detection_sf_ach", "masking_coherent"]
metrics = ["psnr_y", "ssim"]
pooling = "per_axis_mean"

[display]
peak_luminance = 200.0

[grid.detection_sf_ach]
axis_points = 4
contrast_points = 5

[[adapters]]
name = "echo"
command = "sh echo.sh"
timeout_s = 10
"#;

    const JSON: &str = r#"{
  "schema_version": 1,
  "output": "results",
  "reference_pack": "builtin:synthetic",
  "seed": 7,
  "tests": ["detection_sf_ach", "masking_coherent"],
  "metrics": ["psnr_y", "ssim"],
  "pooling": "per_axis_mean",
  "display": {"peak_luminance": 200.0},
  "grid": {"detection_sf_ach": {"axis_points": 4, "contrast_points": 5}},
  "adapters": [{"name": "echo", "command": "sh echo.sh", "timeout_s": 10.0}]
}"#;

    #[test]
    fn toml_and_json_agree() {
        let a = RunConfig::from_str(TOML, false).unwrap();
        let b = RunConfig::from_str(JSON, true).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert_eq!(a.adapters[0].in_flight, DEFAULT_IN_FLIGHT);
        assert_eq!(a.density(TestId::DetectionSfAch), GridDensity { axis_points: 4, contrast_points: 5 });
        assert_eq!(a.density(TestId::MaskingCoherent), GridDensity::default_for(TestId::MaskingCoherent));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_str("colour = 1\n", false).is_err());
        assert!(RunConfig::from_str("[display]\ngamma = 2.2\n", false).is_err());
        assert!(RunConfig::from_str(r#"{"tests": ["detection_bogus"]}"#, true).is_err());
    }

    #[test]
    fn empty_is_default() {
        let c = RunConfig::from_str("", false).unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn validation() {
        let check = |t: &str| RunConfig::from_str(t, false).unwrap().validate().is_err();
        assert!(check("schema_version = 2"));
        assert!(check("metrics = [\"nope\"]"));
        assert!(check("metrics = [\"ssim\", \"ssim\"]"));
        assert!(check("tests = []"));
        assert!(check("reference_pack = \"builtin:other\""));
        assert!(check("[display]\nfps = 0"));
        assert!(check("[grid.matching_color]\naxis_points = 2\ncontrast_points = 5"));
        assert!(check("[[adapters]]\nname = \"a b\"\ncommand = \"x\""));
        assert!(check("[[adapters]]\nname = \"a\"\ncommand = \"x\"\nin_flight = 0"));
        assert!(check("metrics = [\"ssim\"]\n[[adapters]]\nname = \"ssim\"\ncommand = \"x\""));
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "output = \"o\"\nreference_pack = \"packs/x\"\n").unwrap();
        let c = RunConfig::load(&p).unwrap();
        assert_eq!(c.output, dir.path().join("o"));
        assert_eq!(Path::new(&c.reference_pack), dir.path().join("packs/x"));
    }
}
