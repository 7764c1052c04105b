//! Synthetic two-class markets and the figure experiments run on them.
//!
//! Every scheme has two equally weighted classes. Qualities and appeals are
//! drawn from a ChaCha8 stream seeded with the scheme seed, in a fixed order:
//! the class-1 quality column, the class-2 column (or the class-2 noise), then
//! one appeal-noise column per class where the scheme needs it.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{monte_carlo, write_efficiency_csv, write_profile_csv, MonteCarloOptions, MonteCarloResult};
use crate::error::{MarketError, Result};
use crate::model::Market;
use crate::policies::PolicySpec;
use crate::MarketConfig;

/// Smallest appeal a generated item can have.
pub const MIN_APPEAL: f64 = 1e-9;

/// How the appeal-noise schemes perturb quality.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppealNoise {
    /// `a = q (0.8 + 0.4 U)`.
    #[default]
    Multiplicative,
    /// `a = 0.8 q + U(−0.4, 0.4)`.
    Additive,
}

/// Position visibilities of a generated market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VisibilityProfile {
    /// `v_j = (1/j)^exponent`.
    PowerLaw { exponent: f64 },
    Uniform,
    Explicit { values: Vec<f64> },
}

impl Default for VisibilityProfile {
    fn default() -> Self {
        VisibilityProfile::PowerLaw { exponent: 0.8 }
    }
}

impl VisibilityProfile {
    pub fn values(&self, num_items: usize) -> Result<Vec<f64>> {
        match self {
            VisibilityProfile::PowerLaw { exponent } => {
                if !exponent.is_finite() || *exponent < 0.0 {
                    return Err(MarketError::InvalidInstance(format!(
                        "visibility exponent {exponent} must be finite and non-negative"
                    )));
                }
                Ok((1..=num_items).map(|j| (1.0 / j as f64).powf(*exponent)).collect())
            }
            VisibilityProfile::Uniform => Ok(vec![1.0; num_items]),
            VisibilityProfile::Explicit { values } => {
                if values.len() != num_items {
                    return Err(MarketError::InvalidInstance(format!(
                        "{} visibilities given for {num_items} items",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Parameters of one generated market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub scheme: u8,
    pub num_items: usize,
    pub seed: u64,
    #[serde(default)]
    pub z: f64,
    #[serde(default)]
    pub visibility: VisibilityProfile,
    #[serde(default)]
    pub appeal_noise: AppealNoise,
}

impl SchemeSpec {
    /// Default visibility, `z = 0` and multiplicative appeal noise.
    pub fn new(scheme: u8, num_items: usize, seed: u64) -> Self {
        Self {
            scheme,
            num_items,
            seed,
            z: 0.0,
            visibility: VisibilityProfile::default(),
            appeal_noise: AppealNoise::default(),
        }
    }
}

fn uniform_column(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn noisy_appeals(rng: &mut ChaCha8Rng, quality: &[f64], noise: AppealNoise) -> Vec<f64> {
    quality
        .iter()
        .map(|&q| {
            let u: f64 = rng.random();
            let a = match noise {
                AppealNoise::Multiplicative => q * (0.8 + 0.4 * u),
                AppealNoise::Additive => 0.8 * q + (0.8 * u - 0.4),
            };
            a.max(MIN_APPEAL)
        })
        .collect()
}

fn complement_appeals(quality: &[f64]) -> Vec<f64> {
    quality.iter().map(|&q| (1.0 - q).max(MIN_APPEAL)).collect()
}

/// Builds the market of a scheme.
///
/// * 1: independent uniform qualities, `a = 1 − q`.
/// * 2: independent uniform qualities, noisy appeals around `q`.
/// * 3: `q_2 = 1 − q_1 + 0.01 U` clamped to `[0, 1]`, `a = 1 − q`.
/// * 4: scheme-3 qualities with scheme-2 appeals.
pub fn generate_scheme(spec: &SchemeSpec) -> Result<MarketConfig> {
    let n = spec.num_items;
    if n == 0 {
        return Err(MarketError::InvalidInstance("num_items must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let q1 = uniform_column(&mut rng, n);
    let q2 = match spec.scheme {
        1 | 2 => uniform_column(&mut rng, n),
        3 | 4 => q1
            .iter()
            .map(|&q| (1.0 - q + 0.01 * rng.random::<f64>()).clamp(0.0, 1.0))
            .collect(),
        s => return Err(MarketError::InvalidInstance(format!("unknown scheme {s}, expected 1 to 4"))),
    };
    let (a1, a2) = match spec.scheme {
        1 | 3 => (complement_appeals(&q1), complement_appeals(&q2)),
        _ => {
            let a1 = noisy_appeals(&mut rng, &q1, spec.appeal_noise);
            let a2 = noisy_appeals(&mut rng, &q2, spec.appeal_noise);
            (a1, a2)
        }
    };
    Market::new(
        vec![0.5, 0.5],
        (0..n).map(|i| vec![a1[i], a2[i]]).collect(),
        (0..n).map(|i| vec![q1[i], q2[i]]).collect(),
        spec.visibility.values(n)?,
        spec.z,
    )
}

/// The experiments behind the efficiency and profile figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// All four policies on one scheme.
    Efficiency { scheme: u8 },
    /// One policy on one scheme, for its purchase profile.
    Profile { scheme: u8, policy: PolicySpec },
}

impl Figure {
    /// Parses `me-scheme<s>` or `profiles-scheme<s>-<policy>`.
    pub fn parse(id: &str) -> Result<Self> {
        let unknown = || MarketError::UnknownFigure(id.to_string());
        let scheme_of = |s: &str| -> Result<u8> {
            match s.parse::<u8>() {
                Ok(s @ 1..=4) => Ok(s),
                _ => Err(unknown()),
            }
        };
        if let Some(rest) = id.strip_prefix("me-scheme") {
            return Ok(Figure::Efficiency { scheme: scheme_of(rest)? });
        }
        if let Some(rest) = id.strip_prefix("profiles-scheme") {
            let (s, policy) = rest.split_once('-').ok_or_else(unknown)?;
            let policy = PolicySpec::from_label(&policy.to_ascii_uppercase()).map_err(|_| unknown())?;
            if !PolicySpec::experiment_set().contains(&policy) {
                return Err(unknown());
            }
            return Ok(Figure::Profile {
                scheme: scheme_of(s)?,
                policy,
            });
        }
        Err(unknown())
    }

    pub fn id(&self) -> String {
        match self {
            Figure::Efficiency { scheme } => format!("me-scheme{scheme}"),
            Figure::Profile { scheme, policy } => {
                format!("profiles-scheme{scheme}-{}", policy.label().to_ascii_lowercase())
            }
        }
    }

    pub fn scheme(&self) -> u8 {
        match *self {
            Figure::Efficiency { scheme } | Figure::Profile { scheme, .. } => scheme,
        }
    }

    pub fn policies(&self) -> Vec<PolicySpec> {
        match self {
            Figure::Efficiency { .. } => PolicySpec::experiment_set().to_vec(),
            Figure::Profile { policy, .. } => vec![*policy],
        }
    }
}

fn default_items() -> usize {
    20
}
fn default_horizon() -> u64 {
    5_000
}
fn default_replications() -> usize {
    10_000
}

/// An experiment description file. Missing fields take the desk-scale
/// defaults; the figure defaults to the scheme's efficiency figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: u8,
    #[serde(default)]
    pub figure: Option<String>,
    #[serde(default = "default_items")]
    pub num_items: usize,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub z: f64,
    #[serde(default)]
    pub visibility_profile: VisibilityProfile,
    #[serde(default)]
    pub appeal_noise: AppealNoise,
}

impl ExperimentConfig {
    pub fn new(scheme: u8, seed: u64) -> Self {
        Self {
            scheme,
            figure: None,
            num_items: default_items(),
            horizon: default_horizon(),
            replications: default_replications(),
            seed,
            z: 0.0,
            visibility_profile: VisibilityProfile::default(),
            appeal_noise: AppealNoise::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text)?;
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Fills in the figure id and validates the scale.
    pub fn resolve(&mut self) -> Result<Figure> {
        if self.num_items == 0 || self.horizon == 0 || self.replications == 0 {
            return Err(MarketError::InvalidArgument(
                "num_items, horizon and replications must be at least 1".into(),
            ));
        }
        let figure = match &self.figure {
            Some(id) => Figure::parse(id)?,
            None => Figure::Efficiency { scheme: self.scheme },
        };
        if figure.scheme() != self.scheme {
            return Err(MarketError::InvalidArgument(format!(
                "figure {} belongs to scheme {}, not {}",
                figure.id(),
                figure.scheme(),
                self.scheme
            )));
        }
        self.figure = Some(figure.id());
        Ok(figure)
    }

    /// The scheme seed doubles as the Monte Carlo base seed.
    pub fn scheme_spec(&self) -> SchemeSpec {
        SchemeSpec {
            scheme: self.scheme,
            num_items: self.num_items,
            seed: self.seed,
            z: self.z,
            visibility: self.visibility_profile.clone(),
            appeal_noise: self.appeal_noise,
        }
    }
}

/// A figure experiment's market and aggregated results.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub figure: Figure,
    pub market: MarketConfig,
    pub options: MonteCarloOptions,
    pub result: MonteCarloResult,
}

pub fn run_figure_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentRun> {
    let mut config = config.clone();
    let figure = config.resolve()?;
    let market = generate_scheme(&config.scheme_spec())?;
    let mut options = MonteCarloOptions::new(config.horizon, config.replications, config.seed);
    options.threads = threads;
    let result = monte_carlo(&market, &figure.policies(), &options)?;
    Ok(ExperimentRun {
        config,
        figure,
        market,
        options,
        result,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub timestamp_unix: u64,
    pub seed: u64,
    pub experiment: ExperimentConfig,
    pub checkpoints: Vec<u64>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| MarketError::Io(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `<figure>-efficiency.csv`, `<figure>-profile.csv` and the
/// manifest into `dir`, creating it if needed.
pub fn write_experiment(run: &ExperimentRun, dir: &Path) -> Result<RunManifest> {
    fs::create_dir_all(dir).map_err(|e| MarketError::Io(format!("{}: {e}", dir.display())))?;
    let id = run.figure.id();
    let mut efficiency = Vec::new();
    write_efficiency_csv(&mut efficiency, &run.result.curves)?;
    let mut profile = Vec::new();
    write_profile_csv(&mut profile, &run.market, &run.result.profiles)?;

    let mut outputs = Vec::new();
    for (name, bytes) in [
        (format!("{id}-efficiency.csv"), efficiency),
        (format!("{id}-profile.csv"), profile),
    ] {
        let path: PathBuf = dir.join(&name);
        fs::write(&path, &bytes).map_err(|e| MarketError::Io(format!("{}: {e}", path.display())))?;
        outputs.push(OutputFile {
            path: name,
            sha256: sha256_hex(&bytes),
        });
    }

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        seed: run.config.seed,
        experiment: run.config.clone(),
        checkpoints: run.options.checkpoints.clone(),
        outputs,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .map_err(|e| MarketError::Io(format!("{}: {e}", path.display())))?;
    Ok(manifest)
}

/// Re-runs a manifest's experiment into `dir` and reports whether every
/// output checksum matches.
pub fn replay_manifest(manifest: &RunManifest, dir: &Path, threads: Option<usize>) -> Result<(RunManifest, bool)> {
    let run = run_figure_experiment(&manifest.experiment, threads)?;
    if run.options.checkpoints != manifest.checkpoints {
        return Err(MarketError::InvalidInstance("manifest checkpoints do not match the experiment".into()));
    }
    let fresh = write_experiment(&run, dir)?;
    let same = fresh.outputs == manifest.outputs;
    Ok((fresh, same))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn scheme1_sums_to_one() {
        let m = generate_scheme(&SchemeSpec::new(1, 50, 3)).unwrap();
        for i in 0..50 {
            for k in 0..2 {
                assert!((m.appeal(i, k) + m.quality(i, k) - 1.0).abs() < 1e-12 || m.appeal(i, k) == MIN_APPEAL);
            }
        }
        assert_eq!(m.class_weights(), &[0.5, 0.5]);
    }

    #[test]
    fn scheme2_ratio_range() {
        let m = generate_scheme(&SchemeSpec::new(2, 50, 4)).unwrap();
        for i in 0..50 {
            for k in 0..2 {
                let q = m.quality(i, k);
                if q > 1e-6 {
                    let r = m.appeal(i, k) / q;
                    assert!((0.8..=1.2).contains(&r), "{r}");
                }
            }
        }
        let mut spec = SchemeSpec::new(2, 50, 4);
        spec.appeal_noise = AppealNoise::Additive;
        let m = generate_scheme(&spec).unwrap();
        for i in 0..50 {
            let d = m.appeal(i, 0) - 0.8 * m.quality(i, 0);
            assert!(d <= 0.4 && (d >= -0.4 || m.appeal(i, 0) == MIN_APPEAL));
        }
    }

    #[test]
    fn opposite_tastes() {
        for scheme in [3, 4] {
            let m = generate_scheme(&SchemeSpec::new(scheme, 50, 5)).unwrap();
            let q1 = m.quality_column(0);
            let q2 = m.quality_column(1);
            for i in 0..50 {
                assert!((q1[i] + q2[i] - 1.0).abs() <= 0.01 + 1e-12);
            }
            assert!(pearson(&q1, &q2) <= -0.95);
        }
        let m3 = generate_scheme(&SchemeSpec::new(3, 30, 6)).unwrap();
        let m4 = generate_scheme(&SchemeSpec::new(4, 30, 6)).unwrap();
        assert_eq!(m3.quality_rows(), m4.quality_rows());
    }

    #[test]
    fn generation_is_seeded() {
        for s in 1..=4 {
            let a = generate_scheme(&SchemeSpec::new(s, 20, 9)).unwrap();
            let b = generate_scheme(&SchemeSpec::new(s, 20, 9)).unwrap();
            let c = generate_scheme(&SchemeSpec::new(s, 20, 10)).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
        assert!(generate_scheme(&SchemeSpec::new(5, 20, 1)).is_err());
        assert!(generate_scheme(&SchemeSpec::new(1, 0, 1)).is_err());
    }

    #[test]
    fn visibility_profiles() {
        let v = VisibilityProfile::default().values(3).unwrap();
        assert_eq!(v[0], 1.0);
        assert!((v[1] - 0.5f64.powf(0.8)).abs() < 1e-15);
        assert_eq!(VisibilityProfile::Uniform.values(2).unwrap(), vec![1.0, 1.0]);
        assert!(VisibilityProfile::Explicit { values: vec![1.0] }.values(2).is_err());
        let json = r#"{"kind":"power_law","exponent":1.0}"#;
        let p: VisibilityProfile = serde_json::from_str(json).unwrap();
        assert_eq!(p, VisibilityProfile::PowerLaw { exponent: 1.0 });
    }

    #[test]
    fn figure_ids() {
        assert_eq!(Figure::parse("me-scheme3").unwrap(), Figure::Efficiency { scheme: 3 });
        let f = Figure::parse("profiles-scheme1-sqssi").unwrap();
        assert_eq!(f.policies(), vec![PolicySpec::sqssi()]);
        assert_eq!(f.id(), "profiles-scheme1-sqssi");
        for bad in ["me-scheme5", "me-scheme", "fig4", "profiles-scheme1-popularity", "profiles-scheme2"] {
            assert!(matches!(Figure::parse(bad), Err(MarketError::UnknownFigure(_))), "{bad}");
        }
    }

    #[test]
    fn experiment_file_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"scheme":2,"seed":4}"#).unwrap();
        assert_eq!(cfg.figure.as_deref(), Some("me-scheme2"));
        assert_eq!((cfg.num_items, cfg.horizon, cfg.replications), (20, 5_000, 10_000));
        assert!(ExperimentConfig::from_json(r#"{"scheme":2,"figure":"me-scheme1"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"scheme":2,"horizon":0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"scheme":2,"bogus":1}"#).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(1, 7);
        cfg.num_items = 5;
        cfg.horizon = 200;
        cfg.replications = 8;
        let run = run_figure_experiment(&cfg, Some(2)).unwrap();
        let manifest = write_experiment(&run, dir.path()).unwrap();
        assert_eq!(manifest.outputs.len(), 2);
        let bytes = fs::read(dir.path().join(&manifest.outputs[0].path)).unwrap();
        assert_eq!(sha256_hex(&bytes), manifest.outputs[0].sha256);

        let loaded = RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(loaded, manifest);
        let other = tempfile::tempdir().unwrap();
        let (_, same) = replay_manifest(&loaded, other.path(), Some(1)).unwrap();
        assert!(same);
    }
}
