use std::path::{Path, PathBuf};

use isac_core::channel::SystemParams;
use isac_core::experiments::{PilotKind, PowerMode};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionBlock {
    pub n_points: usize,
    /// Pilot lengths to sweep; all admissible lengths when absent.
    pub lengths: Option<Vec<usize>>,
    pub power: PowerMode,
}

impl Default for RegionBlock {
    fn default() -> Self {
        Self {
            n_points: 25,
            lengths: None,
            power: PowerMode::Unlimited,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareBlock {
    /// Defaults to `min(8, T_c - 1)`.
    #[serde(rename = "L")]
    pub len: Option<usize>,
    pub kinds: Vec<PilotKind>,
    pub draws: usize,
    pub n_points: usize,
}

impl Default for CompareBlock {
    fn default() -> Self {
        Self {
            len: None,
            kinds: vec![PilotKind::Epa, PilotKind::Dft, PilotKind::Gaussian],
            draws: 200,
            n_points: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionBlock {
    #[serde(rename = "L")]
    pub len: usize,
    pub trials: usize,
    pub pfa_grid: Vec<f64>,
    pub s2_grid: Vec<f64>,
}

impl Default for DetectionBlock {
    fn default() -> Self {
        Self {
            len: 1,
            trials: 1_000_000,
            pfa_grid: vec![1e-1, 1e-2, 1e-3],
            s2_grid: vec![1.0, 5.0, 20.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationBlock {
    /// Defaults to `min(4, T_c - 1)`.
    #[serde(rename = "L")]
    pub len: Option<usize>,
    pub trials: usize,
}

impl Default for EstimationBlock {
    fn default() -> Self {
        Self {
            len: None,
            trials: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectEvalBlock {
    /// A design written by `design`; solved afresh when absent.
    pub design: Option<PathBuf>,
    pub pfa_grid: Vec<f64>,
    pub trials: usize,
}

impl Default for DetectEvalBlock {
    fn default() -> Self {
        Self {
            design: None,
            pfa_grid: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
            trials: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub params: SystemParams,
    pub region: RegionBlock,
    pub compare: CompareBlock,
    pub detection: DetectionBlock,
    pub estimation: EstimationBlock,
    pub detect_eval: DetectEvalBlock,
}

fn block<T: DeserializeOwned + Default>(map: &mut Map<String, Value>, key: &str) -> Result<T, ConfigError> {
    match map.remove(key) {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(v).map_err(|e| ConfigError(format!("in block `{key}`: {e}"))),
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError(what()))
    }
}

impl RunConfig {
    pub fn compare_len(&self) -> usize {
        self.compare.len.unwrap_or(8.min(self.params.t_coherence - 1))
    }

    pub fn estimation_len(&self) -> usize {
        self.estimation.len.unwrap_or(4.min(self.params.t_coherence - 1))
    }

    /// Top-level keys are the system parameters, all required; the command blocks are optional.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid JSON: {e}")))?;
        let Value::Object(mut map) = value else {
            return Err(ConfigError("config must be a JSON object".into()));
        };
        let region = block(&mut map, "region")?;
        let compare = block(&mut map, "compare")?;
        let detection = block(&mut map, "detection")?;
        let estimation = block(&mut map, "estimation")?;
        let detect_eval = block(&mut map, "detect_eval")?;
        let params: SystemParams =
            serde_json::from_value(Value::Object(map)).map_err(|e| ConfigError(e.to_string()))?;
        let cfg = Self {
            params,
            region,
            compare,
            detection,
            estimation,
            detect_eval,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate().map_err(|e| ConfigError(e.to_string()))?;
        let t_c = self.params.t_coherence;
        let len_ok = |l: usize| l >= 1 && l < t_c;
        check(self.region.n_points >= 2, || "region.n_points must be at least 2".into())?;
        if let Some(lens) = &self.region.lengths {
            check(!lens.is_empty(), || "region.lengths is empty".into())?;
            for &l in lens {
                check(len_ok(l), || format!("region.lengths entry {l} is outside [1, {}]", t_c - 1))?;
            }
        }
        let l = self.compare_len();
        check(len_ok(l), || format!("compare.L = {l} is outside [1, {}]", t_c - 1))?;
        check(self.compare.draws >= 1, || "compare.draws must be positive".into())?;
        check(self.compare.n_points >= 2, || "compare.n_points must be at least 2".into())?;
        check(len_ok(self.detection.len), || format!("detection.L = {} is outside [1, {}]", self.detection.len, t_c - 1))?;
        check(self.detection.trials >= 1, || "detection.trials must be positive".into())?;
        for &p in &self.detection.pfa_grid {
            check((1e-3..=1e-1).contains(&p), || format!("detection.pfa_grid entry {p} is outside [1e-3, 1e-1]"))?;
        }
        for &s in &self.detection.s2_grid {
            check(s >= 0.0 && s.is_finite(), || format!("detection.s2_grid entry {s} must be finite and nonnegative"))?;
        }
        let l = self.estimation_len();
        check(len_ok(l), || format!("estimation.L = {l} is outside [1, {}]", t_c - 1))?;
        check(self.estimation.trials >= 2, || "estimation.trials must be at least 2".into())?;
        for &p in &self.detect_eval.pfa_grid {
            check(p > 0.0 && p < 1.0, || format!("detect_eval.pfa_grid entry {p} is outside (0, 1)"))?;
        }
        check(self.detect_eval.trials >= 1, || "detect_eval.trials must be positive".into())?;
        Ok(())
    }
}
