//! TOML configuration file. Every section is optional and falls back to the
//! library defaults; command-line flags override file values.
//!
//! ```toml
//! [rectify]
//! mu = 0.1
//! gamma = 0.5
//! clip_padding = 0.5
//!
//! [associate]
//! vis_keep = 0.3
//!
//! [sample]
//! batch_size = 16
//! balancing_ratio = 0.5
//! hard_rate = 0.75
//!
//! [zoom]
//! frames = 16
//!
//! [zoom_ranges]
//! final_scale = [0.3, 1.0]
//!
//! [effects]
//! enable_probability = 0.5
//!
//! [synth]
//! agents = 5
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use hvmine::associate::AssocConfig;
use hvmine::hallucinate::{EffectRanges, ZoomConfig, ZoomRanges};
use hvmine::rectify::RectifyConfig;
use hvmine::sampler::SampleConfig;
use hvmine::synth::SceneConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub rectify: RectifyConfig,
    pub associate: AssocConfig,
    pub sample: SampleConfig,
    pub zoom: ZoomConfig,
    pub zoom_ranges: ZoomRanges,
    pub effects: EffectRanges,
    pub synth: SceneConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: FileConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, FileConfig::default());
        assert_eq!(cfg.rectify.mu, 0.1);
        assert_eq!(cfg.rectify.gamma, 0.5);
    }

    #[test]
    fn partial_sections() {
        let cfg: FileConfig = toml::from_str("[rectify]\ngamma = 1.0\n[sample]\nhard_rate = 0.25\n").unwrap();
        assert_eq!(cfg.rectify.gamma, 1.0);
        assert_eq!(cfg.rectify.mu, 0.1);
        assert_eq!(cfg.sample.hard_rate, Some(0.25));
        assert_eq!(cfg.sample.batch_size, 16);
    }

    #[test]
    fn unknown_section_rejected() {
        assert!(toml::from_str::<FileConfig>("[rectfy]\nmu = 1\n").is_err());
    }
}
