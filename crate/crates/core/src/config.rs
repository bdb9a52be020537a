//! Run configuration: a flat `key = value` text file, validated on load.
//!
//! The format is deliberately plain so ablation sweeps can be produced by
//! editing or diffing config files by hand. Lines are `key = value`, `#`
//! starts a comment, blank lines are ignored.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::ActionBounds;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config not found: {0}")]
    NotFound(String),
    #[error("failed to read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("{0}")]
    Invariant(String),
}

/// Which future-frame predictor backs the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    /// Steps a cloned simulator: plays the role of a perfect learned model.
    Oracle,
    /// Kinematic sprite translation over a static background plate.
    Warp,
    /// Oracle output with Gaussian pixel noise, emulating model error.
    Noisy,
}

/// Which vision-language implementation answers the three queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VlmKind {
    /// Scripted ground-truth policy reading simulator state.
    Oracle,
    /// JSON-over-HTTP client against a chat-completions-style endpoint.
    Remote,
}

/// Ablation variants, selectable per run without code changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    /// The complete loop.
    Full,
    /// Random sampling: the sampling mean is forced to zero.
    Rs,
    /// Pixel-distance cost only (switch weight forced to 1).
    Pd,
    /// Box-level cost only (switch weight forced to 0).
    Vs,
}

macro_rules! impl_kind_str {
    ($ty:ty, $($variant:path => $text:literal),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($variant),)+
                    other => Err(format!(
                        "`{other}` is not one of {}",
                        [$($text),+].join("|")
                    )),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = match self { $($variant => $text),+ };
                f.write_str(s)
            }
        }
    };
}

impl_kind_str!(PredictorKind,
    PredictorKind::Oracle => "oracle",
    PredictorKind::Warp => "warp",
    PredictorKind::Noisy => "noisy",
);
impl_kind_str!(VlmKind,
    VlmKind::Oracle => "oracle",
    VlmKind::Remote => "remote",
);
impl_kind_str!(AblationMode,
    AblationMode::Full => "full",
    AblationMode::Rs => "rs",
    AblationMode::Pd => "pd",
    AblationMode::Vs => "vs",
);

/// Everything one run needs. `N`/`T` follow the usual MPC naming: number
/// of candidates and planning horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Candidate sequences per step (`N`).
    pub n_candidates: usize,
    /// Planning horizon in actions per sequence (`T`).
    pub horizon: usize,
    /// Scale from a direction hint to a translation mean, meters.
    pub w_m: f64,
    /// Scale from a direction hint to a rotation mean, radians.
    pub w_r: f64,
    /// Blend weight of the VLM-derived mean. Must sum to 1 with `w_sub`.
    pub w_vlm: f64,
    /// Blend weight of the history mean.
    pub w_sub: f64,
    /// Per-dimension sampling standard deviation.
    pub sigma: [f64; 7],
    /// Step budget per episode.
    pub t_max: usize,
    /// Master seed; every random stream derives from it.
    pub seed: u64,
    pub predictor_kind: PredictorKind,
    pub vlm_kind: VlmKind,
    pub task_name: String,
    pub ablation_mode: AblationMode,
    /// Per-axis translation clamp, meters.
    pub d_max: f64,
    /// Per-axis rotation clamp, radians.
    pub r_max: f64,
    /// Square observation size in pixels.
    pub frame_size: u32,
    /// Pixel noise std for the noisy predictor, in [0,1] intensity units.
    pub noise_std: f64,
    /// Direction oracle deadband, meters.
    pub deadband: f64,
    pub grasp_radius: f64,
    pub press_radius: f64,
    /// Tracker search window half-size, pixels.
    pub search_radius: u32,
    /// Tracker correlation floor below which a box coasts.
    pub min_correlation: f64,
    /// Remote VLM attempts before falling back.
    pub vlm_retries: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_candidates: 30,
            horizon: 10,
            w_m: 0.02,
            w_r: 0.1,
            w_vlm: 0.6,
            w_sub: 0.4,
            sigma: [0.025, 0.025, 0.025, 0.05, 0.05, 0.05, 0.22],
            t_max: 80,
            seed: 0,
            predictor_kind: PredictorKind::Oracle,
            vlm_kind: VlmKind::Oracle,
            task_name: "push_button".to_string(),
            ablation_mode: AblationMode::Full,
            d_max: 0.05,
            r_max: 0.2,
            frame_size: 64,
            noise_std: 5.0 / 255.0,
            deadband: 0.01,
            grasp_radius: 0.05,
            press_radius: 0.03,
            search_radius: 12,
            min_correlation: 0.6,
            vlm_retries: 3,
        }
    }
}

impl RunConfig {
    pub fn bounds(&self) -> ActionBounds {
        ActionBounds { d_max: self.d_max, r_max: self.r_max }
    }

    /// Checks every invariant, naming the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_candidates < 1 {
            return Err(ConfigError::Invariant("N must be >= 1".into()));
        }
        if self.horizon < 1 {
            return Err(ConfigError::Invariant("T must be >= 1".into()));
        }
        if (self.w_vlm + self.w_sub - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Invariant("w_VLM + w_sub must equal 1".into()));
        }
        if self.sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(ConfigError::Invariant("sigma must be > 0 in every dimension".into()));
        }
        if self.t_max < 1 {
            return Err(ConfigError::Invariant("T_max must be >= 1".into()));
        }
        if !(self.w_m > 0.0) || !(self.w_r > 0.0) {
            return Err(ConfigError::Invariant("w_m and w_r must be > 0".into()));
        }
        if !(self.d_max > 0.0) || !(self.r_max > 0.0) {
            return Err(ConfigError::Invariant("d_max and r_max must be > 0".into()));
        }
        if self.frame_size < 16 {
            return Err(ConfigError::Invariant("frame_size must be >= 16".into()));
        }
        if self.noise_std < 0.0 {
            return Err(ConfigError::Invariant("noise_std must be >= 0".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` override using the file-format key names.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value.trim().parse::<T>().map_err(|e| ConfigError::InvalidValue {
                key: key.to_string(),
                reason: e.to_string(),
            })
        }

        match key {
            "N" => self.n_candidates = num(key, value)?,
            "T" => self.horizon = num(key, value)?,
            "w_m" => self.w_m = num(key, value)?,
            "w_r" => self.w_r = num(key, value)?,
            "w_VLM" => self.w_vlm = num(key, value)?,
            "w_sub" => self.w_sub = num(key, value)?,
            "sigma" => {
                let parts: Result<Vec<f64>, _> =
                    value.split(',').map(|p| p.trim().parse::<f64>()).collect();
                let parts = parts.map_err(|e| ConfigError::InvalidValue {
                    key: key.to_string(),
                    reason: e.to_string(),
                })?;
                self.sigma = match parts.len() {
                    1 => [parts[0]; 7],
                    7 => {
                        let mut s = [0.0; 7];
                        s.copy_from_slice(&parts);
                        s
                    }
                    n => {
                        return Err(ConfigError::InvalidValue {
                            key: key.to_string(),
                            reason: format!("expected 1 or 7 comma-separated values, got {n}"),
                        })
                    }
                };
            }
            "T_max" => self.t_max = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "predictor" => {
                self.predictor_kind = value.trim().parse().map_err(|e| {
                    ConfigError::InvalidValue { key: key.to_string(), reason: e }
                })?
            }
            "vlm" => {
                self.vlm_kind = value.trim().parse().map_err(|e| ConfigError::InvalidValue {
                    key: key.to_string(),
                    reason: e,
                })?
            }
            "task" => self.task_name = value.trim().to_string(),
            "ablation" => {
                self.ablation_mode = value.trim().parse().map_err(|e| {
                    ConfigError::InvalidValue { key: key.to_string(), reason: e }
                })?
            }
            "d_max" => self.d_max = num(key, value)?,
            "r_max" => self.r_max = num(key, value)?,
            "frame_size" => self.frame_size = num(key, value)?,
            "noise_std" => self.noise_std = num(key, value)?,
            "deadband" => self.deadband = num(key, value)?,
            "grasp_radius" => self.grasp_radius = num(key, value)?,
            "press_radius" => self.press_radius = num(key, value)?,
            "search_radius" => self.search_radius = num(key, value)?,
            "min_correlation" => self.min_correlation = num(key, value)?,
            "vlm_retries" => self.vlm_retries = num(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Serializes back to the file format. `parse_config` of the result
    /// reproduces the config field-by-field.
    pub fn to_config_text(&self) -> String {
        let sigma = self.sigma.map(|s| format!("{s}")).join(",");
        format!(
            "N = {}\nT = {}\nw_m = {}\nw_r = {}\nw_VLM = {}\nw_sub = {}\nsigma = {}\n\
             T_max = {}\nseed = {}\npredictor = {}\nvlm = {}\ntask = {}\nablation = {}\n\
             d_max = {}\nr_max = {}\nframe_size = {}\nnoise_std = {}\ndeadband = {}\n\
             grasp_radius = {}\npress_radius = {}\nsearch_radius = {}\nmin_correlation = {}\n\
             vlm_retries = {}\n",
            self.n_candidates,
            self.horizon,
            self.w_m,
            self.w_r,
            self.w_vlm,
            self.w_sub,
            sigma,
            self.t_max,
            self.seed,
            self.predictor_kind,
            self.vlm_kind,
            self.task_name,
            self.ablation_mode,
            self.d_max,
            self.r_max,
            self.frame_size,
            self.noise_std,
            self.deadband,
            self.grasp_radius,
            self.press_radius,
            self.search_radius,
            self.min_correlation,
            self.vlm_retries,
        )
    }
}

/// Parses config text, starting from defaults, and validates.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Malformed { line: i + 1, text: raw.to_string() });
        };
        cfg.apply_override(key.trim(), value.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(ConfigError::NotFound(path.display().to_string()));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_basic_fields() {
        let cfg = parse_config("N = 30\nT = 10\nseed = 7\n").unwrap();
        assert_eq!(cfg.n_candidates, 30);
        assert_eq!(cfg.horizon, 10);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn weight_sum_invariant() {
        let err = parse_config("w_VLM = 0.7\nw_sub = 0.4\n").unwrap_err();
        assert!(err.to_string().contains("w_VLM + w_sub must equal 1"), "{err}");
    }

    #[test]
    fn missing_file_is_not_found() {
        let err = load_config("/nonexistent/config.txt").unwrap_err();
        assert!(err.to_string().contains("config not found"), "{err}");
    }

    #[test]
    fn unknown_key_named() {
        let err = parse_config("N = 3\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn sigma_scalar_broadcast_and_full_vector() {
        let cfg = parse_config("sigma = 0.5\n").unwrap();
        assert_eq!(cfg.sigma, [0.5; 7]);
        let cfg = parse_config("sigma = 1,2,3,4,5,6,7\n").unwrap();
        assert_eq!(cfg.sigma, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert!(parse_config("sigma = 1,2\n").is_err());
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let cfg = parse_config("# a comment\n\nN = 5 # trailing\n").unwrap();
        assert_eq!(cfg.n_candidates, 5);
    }

    #[test]
    fn text_round_trip_field_by_field() {
        let mut cfg = RunConfig::default();
        cfg.n_candidates = 17;
        cfg.sigma = [0.02, 0.01, 0.03, 0.04, 0.05, 0.06, 0.3];
        cfg.ablation_mode = AblationMode::Pd;
        cfg.task_name = "wipe".into();
        cfg.seed = 123456789;
        let back = parse_config(&cfg.to_config_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = parse_config("N = 3\nthis is not a pair\n").unwrap_err();
        match err {
            ConfigError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }
}
