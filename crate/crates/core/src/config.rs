//! Pipeline configuration, loadable from TOML. Every key is optional; missing
//! keys take the defaults below.
//!
//! ```toml
//! [scan]
//! k = 10            # or "inf"
//! tau_area = 50
//!
//! [refocus]
//! scale_s = 1.5
//!
//! [generation]
//! seed = 13
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::experts::GenerationSettings;
use crate::par::ExecPolicy;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Candidate budget for evidence judgment: `Some(k)` or unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TopK(pub Option<usize>);

impl TopK {
    pub const UNBOUNDED: TopK = TopK(None);

    pub fn limit(self, n: usize) -> usize {
        self.0.map_or(n, |k| k.min(n))
    }
}

impl fmt::Display for TopK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(k) => write!(f, "{k}"),
            None => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for TopK {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(TopK(None));
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(TopK(Some(k))),
            _ => Err(ConfigError::Invalid(format!("k must be a positive integer or \"inf\", got {s:?}"))),
        }
    }
}

impl Serialize for TopK {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(k) => s.serialize_u64(k as u64),
            None => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for TopK {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(k) if k >= 1 => Ok(TopK(Some(k as usize))),
            Raw::Int(k) => Err(serde::de::Error::custom(format!("k must be >= 1, got {k}"))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// How cues are explored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParadigm {
    /// Patch partition, per-patch cue exploration.
    #[default]
    Hierarchical,
    /// The whole image explored as a single patch.
    OneShot,
}

/// Point chosen to represent a cue.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyRule {
    /// argmax of normalized attention × normalized boundary distance.
    #[default]
    Combined,
    /// Rounded pixel centroid of the cue (may fall outside it).
    Centroid,
    /// argmax of boundary distance alone.
    ChebyshevCenter,
    /// argmax of attention alone.
    AttentionPeak,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Cues smaller than this many pixels are discarded.
    pub tau_area: u32,
    /// Candidates overlapping a kept one by more than this IoU are dropped.
    pub theta_iou: f64,
    /// Number of smallest candidates sent to the judge.
    pub k: TopK,
    pub patch_single: u32,
    pub patch_multi: u32,
    /// Side of the flat closing kernel.
    pub close_kernel: u32,
    /// Radius of the disk used to grow masks.
    pub dilate_radius: u32,
    /// Remainder tiles thinner than this merge into their neighbour.
    pub min_tile: u32,
    pub paradigm: ScanParadigm,
    pub proxy_rule: ProxyRule,
    /// Close and dilate masks before boxing; off uses the raw mask.
    pub post_process: bool,
    /// Judge candidates concurrently.
    pub concurrent_judges: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            tau_area: 50,
            theta_iou: 0.3,
            k: TopK(Some(10)),
            patch_single: 576,
            patch_multi: 768,
            close_kernel: 5,
            dilate_radius: 20,
            min_tile: 32,
            paradigm: ScanParadigm::Hierarchical,
            proxy_rule: ProxyRule::Combined,
            post_process: true,
            concurrent_judges: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefocusConfig {
    /// Zoom-out scale.
    pub scale_s: f64,
    /// Padding around the union of detections on zoom-in.
    pub detect_pad: u32,
    /// Score the candidate views concurrently.
    pub concurrent_judges: bool,
}

impl Default for RefocusConfig {
    fn default() -> Self {
        Self {
            scale_s: 1.5,
            detect_pad: 28,
            concurrent_judges: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub scan: ScanConfig,
    pub refocus: RefocusConfig,
    pub generation: GenerationSettings,
    /// Policy for patch-level cue exploration.
    pub exec: ExecPolicy,
    /// Record wall-clock stage timings in the run trace. Off by default so
    /// traces stay byte-reproducible.
    pub record_timings: bool,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scan;
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if s.tau_area == 0 {
            return bad("scan.tau_area must be positive".into());
        }
        if !(s.theta_iou > 0.0 && s.theta_iou < 1.0) {
            return bad(format!("scan.theta_iou must lie in (0, 1), got {}", s.theta_iou));
        }
        if s.patch_single == 0 || s.patch_multi == 0 || s.min_tile == 0 {
            return bad("scan patch sizes and min_tile must be positive".into());
        }
        if s.close_kernel == 0 || s.close_kernel % 2 == 0 {
            return bad(format!("scan.close_kernel must be odd, got {}", s.close_kernel));
        }
        if s.dilate_radius == 0 {
            return bad("scan.dilate_radius must be positive".into());
        }
        let r = &self.refocus;
        if !(r.scale_s.is_finite() && r.scale_s > 1.0) {
            return bad(format!("refocus.scale_s must be > 1, got {}", r.scale_s));
        }
        let g = &self.generation;
        if !(g.temperature.is_finite() && g.temperature >= 0.0) {
            return bad(format!("generation.temperature must be >= 0, got {}", g.temperature));
        }
        if g.short_max_tokens == 0 || g.answer_max_tokens == 0 {
            return bad("generation token budgets must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&text).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_toml_str("").unwrap(), cfg);
    }

    #[test]
    fn k_accepts_int_or_inf() {
        let c = PipelineConfig::from_toml_str("[scan]\nk = \"inf\"").unwrap();
        assert_eq!(c.scan.k, TopK::UNBOUNDED);
        let c = PipelineConfig::from_toml_str("[scan]\nk = 1").unwrap();
        assert_eq!(c.scan.k, TopK(Some(1)));
        assert!(PipelineConfig::from_toml_str("[scan]\nk = 0").is_err());
        assert_eq!("inf".parse::<TopK>().unwrap().limit(7), 7);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(PipelineConfig::from_toml_str("[scan]\nbogus = 1").is_err());
        assert!(PipelineConfig::from_toml_str("[scan]\ntheta_iou = 1.5").is_err());
        assert!(PipelineConfig::from_toml_str("[scan]\nclose_kernel = 4").is_err());
        assert!(PipelineConfig::from_toml_str("[refocus]\nscale_s = 1.0").is_err());
    }
}
