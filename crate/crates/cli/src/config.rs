//! Experiment configuration read from a TOML file.

use std::path::{Path, PathBuf};

use direntropy_core::chaos::ProbeConfig;
use direntropy_core::entropy::PartitionSpec;
use direntropy_core::lattice::rational_str;
use direntropy_core::measures::MeasureModel;
use direntropy_core::{ConfigWindow, DirectionSpec, PatternWindow, Rational, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Measure section. `Haar` uses the configured system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum MeasureConfig {
    Bernoulli { p: Vec<f64> },
    Uniform,
    PointMass { symbol: u8 },
    RowMarkov { transition: Vec<Vec<f64>> },
    Haar,
    /// One rectangular pattern window per line.
    Empirical { samples_file: PathBuf },
}

/// Either a named preset or an explicit rational slope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectionConfig {
    Preset(PresetDirection),
    Explicit(DirectionSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetDirection {
    pub preset: Preset,
    pub horizon: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 987/1597, checked against the golden-ratio conjugate.
    Golden,
    /// Smallest Fibonacci convergent resolving the horizon.
    FibonacciConvergent,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Declarations {
    #[serde(default)]
    pub trivial_pinsker: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing)]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripSection {
    /// Defaults to `N_max`.
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkewSection {
    pub phases: usize,
    /// Phases of the exact sandwich check.
    pub sandwich_phases: usize,
}

impl Default for SkewSection {
    fn default() -> Self {
        SkewSection { phases: 8, sandwich_phases: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    /// Two independent samples.
    Independent,
    /// A sample and a copy changed on the centered box of radius `diff_radius`.
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosSection {
    /// Metric radius `R`.
    pub radius: u32,
    #[serde(rename = "N_ladder")]
    pub n_ladder: Vec<u64>,
    pub trials: u64,
    pub pairs: Vec<PairKind>,
    pub diff_radius: i64,
    /// Asymptotic test threshold and horizon.
    pub eps: f64,
    pub horizon: i64,
    /// Distance to the truncation floor still reported as near zero.
    pub floor_tol: f64,
    /// One tuple per line, each a JSON array of rectangular pattern windows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuples_file: Option<PathBuf>,
}

impl Default for ChaosSection {
    fn default() -> Self {
        ChaosSection {
            radius: 4,
            n_ladder: vec![16, 32, 64],
            trials: 4,
            pairs: vec![PairKind::Independent, PairKind::FiniteDifference],
            diff_radius: 2,
            eps: 0.125,
            horizon: 8,
            floor_tol: 1.0 / 65536.0,
            tuples_file: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuplesSection {
    /// Cylinder tuples to certify.
    pub cylinders: Vec<Vec<PatternWindow>>,
    #[serde(with = "rational_str")]
    pub b: Rational,
    #[serde(rename = "N_max")]
    pub n_max: u64,
    pub tol: f64,
    pub budget: u64,
    pub probe: ProbeSection,
}

impl Default for TuplesSection {
    fn default() -> Self {
        TuplesSection {
            cylinders: vec![
                vec![pattern(&[((0, 0), 0)]), pattern(&[((0, 0), 1)])],
                vec![pattern(&[((0, 0), 0)]), pattern(&[((0, 0), 0)])],
            ],
            b: Rational::from_integer(1),
            n_max: 16,
            tol: 1e-3,
            budget: 8,
            probe: ProbeSection::default(),
        }
    }
}

fn pattern(pairs: &[((i64, i64), u8)]) -> PatternWindow {
    PatternWindow::from_pairs(pairs).expect("static pattern")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub nbhd_radius: i64,
    pub radius: u32,
    pub eps: f64,
    pub verify_width: i64,
    #[serde(rename = "N_max")]
    pub n_max: u64,
    pub tol: f64,
    pub attempts: u32,
}

impl Default for ProbeSection {
    fn default() -> Self {
        let p = ProbeConfig::default();
        ProbeSection {
            nbhd_radius: p.nbhd_radius,
            radius: p.radius,
            eps: p.eps,
            verify_width: p.verify_width,
            n_max: p.n_max,
            tol: p.tol,
            attempts: p.attempts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(rename = "N_max")]
    pub n_max: u64,
    #[serde(with = "rational_str::vec")]
    pub b_ladder: Vec<Rational>,
    pub system: SystemSpec,
    pub measure: MeasureConfig,
    pub direction: DirectionConfig,
    #[serde(default = "PartitionSpec::zero_coordinate")]
    pub partition: PartitionSpec,
    #[serde(default)]
    pub declarations: Declarations,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub strip: StripSection,
    #[serde(default)]
    pub skew: SkewSection,
    #[serde(default)]
    pub chaos: ChaosSection,
    #[serde(default)]
    pub tuples: TuplesSection,
}

fn default_seed() -> u64 {
    7
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: default_seed(),
            n_max: 64,
            b_ladder: vec![Rational::new(1, 2), Rational::from_integer(1), Rational::from_integer(3)],
            system: SystemSpec::three_dot(),
            measure: MeasureConfig::Haar,
            direction: DirectionConfig::Preset(PresetDirection { preset: Preset::Golden, horizon: 1000 }),
            partition: PartitionSpec::zero_coordinate(),
            declarations: Declarations::default(),
            output: OutputConfig::default(),
            strip: StripSection::default(),
            skew: SkewSection::default(),
            chaos: ChaosSection::default(),
            tuples: TuplesSection::default(),
        }
    }
}

/// A validated configuration with its cross-references resolved.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub measure: MeasureModel,
    pub direction: DirectionSpec,
    /// Directory for relative input files.
    pub base_dir: PathBuf,
}

impl Resolved {
    pub fn probe_config(&self) -> ProbeConfig {
        let p = &self.config.tuples.probe;
        ProbeConfig {
            nbhd_radius: p.nbhd_radius,
            radius: p.radius,
            eps: p.eps,
            verify_width: p.verify_width,
            n_max: p.n_max,
            tol: p.tol,
            attempts: p.attempts,
            trivial_pinsker: self.config.declarations.trivial_pinsker,
        }
    }

    pub fn input_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

fn bad(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Parses one JSON value per non-blank line.
pub fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

/// A pattern whose shape fills its bounding rectangle.
pub fn to_window(p: &PatternWindow) -> Result<ConfigWindow, CliError> {
    let rect = p.shape().bounding_rect().ok_or_else(|| bad("empty pattern window"))?;
    if rect.area() != p.shape().len() {
        return Err(bad("pattern window is not a full rectangle"));
    }
    ConfigWindow::new(rect, p.values().to_vec()).map_err(bad)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(bad)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn resolve(self, base_dir: &Path) -> Result<Resolved, CliError> {
        self.system.check().map_err(bad)?;
        let q = self.system.alphabet_size();
        let direction = match &self.direction {
            DirectionConfig::Preset(PresetDirection { preset: Preset::Golden, horizon }) => DirectionSpec::golden(*horizon),
            DirectionConfig::Preset(PresetDirection { preset: Preset::FibonacciConvergent, horizon }) => {
                DirectionSpec::fibonacci_convergent(*horizon)
            }
            DirectionConfig::Explicit(d) => Ok(d.clone()),
        }
        .map_err(bad)?;
        if self.n_max == 0 || self.n_max > direction.horizon() {
            return Err(bad(format!("N_max = {} must lie in 1..={}", self.n_max, direction.horizon())));
        }
        if let Some(n) = self.strip.n {
            if n == 0 || n > direction.horizon() {
                return Err(bad(format!("strip N = {n} must lie in 1..={}", direction.horizon())));
            }
        }
        if self.b_ladder.is_empty() || self.b_ladder.iter().any(|b| *b <= Rational::from_integer(0)) {
            return Err(bad("b_ladder must be a nonempty list of positive rationals"));
        }
        self.partition.check(q).map_err(bad)?;
        let measure = match &self.measure {
            MeasureConfig::Bernoulli { p } => MeasureModel::bernoulli(p),
            MeasureConfig::Uniform => Ok(MeasureModel::uniform(q)),
            MeasureConfig::PointMass { symbol } => MeasureModel::point_mass(q, *symbol),
            MeasureConfig::RowMarkov { transition } => MeasureModel::row_markov(transition.clone()),
            MeasureConfig::Haar => MeasureModel::haar(self.system.clone()),
            MeasureConfig::Empirical { samples_file } => {
                let path = if samples_file.is_absolute() { samples_file.clone() } else { base_dir.join(samples_file) };
                let samples = read_lines::<PatternWindow>(&path)?.iter().map(to_window).collect::<Result<Vec<_>, _>>()?;
                MeasureModel::empirical(samples)
            }
        }
        .map_err(bad)?;
        if measure.alphabet_size().is_some_and(|a| a != q) {
            return Err(bad(format!("measure alphabet differs from the system alphabet {q}")));
        }
        measure.check_support(&self.system).map_err(bad)?;
        let c = &self.chaos;
        if c.n_ladder.iter().any(|&n| n == 0 || n > direction.horizon()) || c.eps <= 0.0 || c.diff_radius < 0 || c.horizon < 0 {
            return Err(bad("chaos section: N_ladder entries must lie in 1..=horizon, eps > 0, radii and horizon >= 0"));
        }
        let t = &self.tuples;
        if t.b <= Rational::from_integer(0) || t.n_max == 0 || t.n_max > direction.horizon() {
            return Err(bad("tuples section: b must be positive and N_max within the horizon"));
        }
        if self.skew.phases == 0 {
            return Err(bad("skew.phases must be at least 1"));
        }
        Ok(Resolved { config: self, measure, direction, base_dir: base_dir.to_path_buf() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 3
N_max = 32
b_ladder = ["1/2", "1", 3]

[system]
kind = "FullShift"
alphabet_size = 2

[measure]
kind = "Bernoulli"
p = [0.5, 0.5]

[direction]
preset = "golden"
horizon = 1000

[partition]
window = [[0, 0], [1, 0]]
labeling = { kind = "cylinders" }

[declarations]
trivial_pinsker = true
"#;

    #[test]
    fn parses_and_resolves() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.b_ladder[0], Rational::new(1, 2));
        assert_eq!(c.partition.window.len(), 2);
        let r = c.resolve(Path::new(".")).unwrap();
        assert_eq!(r.direction.beta_den(), 1597);
        assert!(r.measure.is_uniform_bernoulli());
    }

    #[test]
    fn explicit_direction() {
        let text = SAMPLE.replace("preset = \"golden\"\nhorizon = 1000", "beta_num = 5\nbeta_den = 8\nhorizon = 7");
        let r = ExperimentConfig::from_toml(&text).unwrap();
        assert!(matches!(r.clone().resolve(Path::new(".")), Err(CliError::Config(_))));
        let ok = text.replace("N_max = 32", "N_max = 7") + "\n[chaos]\nN_ladder = [4, 7]\n[tuples]\nN_max = 4\n";
        assert_eq!(ExperimentConfig::from_toml(&ok).unwrap().resolve(Path::new(".")).unwrap().direction.beta_den(), 8);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_support() {
        assert!(ExperimentConfig::from_toml(&format!("{SAMPLE}\nextra = 1\n")).is_err());
        let pm = SAMPLE.replace("[system]\nkind = \"FullShift\"\nalphabet_size = 2", "[system]\nkind = \"AlgebraicSubshift\"\nalphabet_size = 2\nconstraint = [{ site = [0, 0], coeff = 1 }, { site = [1, 0], coeff = 1 }, { site = [0, 1], coeff = 1 }]");
        let c = ExperimentConfig::from_toml(&pm).unwrap();
        assert!(matches!(c.resolve(Path::new(".")), Err(CliError::Config(_))));
    }

    #[test]
    fn empirical_lines() {
        let dir = tempfile::tempdir().unwrap();
        let line = r#"{"shape":[[0,0],[0,1],[1,0],[1,1]],"values":[0,1,1,0]}"#;
        std::fs::write(dir.path().join("s.ndjson"), format!("{line}\n\n{line}\n")).unwrap();
        let text = SAMPLE.replace("kind = \"Bernoulli\"\np = [0.5, 0.5]", "kind = \"Empirical\"\nsamples_file = \"s.ndjson\"");
        let r = ExperimentConfig::from_toml(&text).unwrap().resolve(dir.path()).unwrap();
        assert!(matches!(r.measure, MeasureModel::Empirical { .. }));
        std::fs::write(dir.path().join("s.ndjson"), r#"{"shape":[[0,0],[1,1]],"values":[0,1]}"#).unwrap();
        assert!(ExperimentConfig::from_toml(&text).unwrap().resolve(dir.path()).is_err());
    }

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }
}
