//! TOML configuration file for the command-line tool.
//!
//! ```toml
//! backend_url = "http://127.0.0.1:8080"
//! concurrency_limit = 8
//!
//! [template]
//! because_delimiter = " because "
//!
//! [pipeline]
//! mode = "full"
//! threshold = 0.5
//!
//! [augmentation]
//! k = 3
//! ```
//!
//! Every key is optional. Command-line flags override file values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationConfig;
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;
use crate::template::TemplateConfig;

/// Backend URL meaning "use the in-process heuristic mock".
pub const MOCK_BACKEND: &str = "mock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// `http(s)://host:port`, `mock`, or `mock:<fixture.json>`.
    pub backend_url: String,
    pub concurrency_limit: usize,
    pub template: TemplateConfig,
    pub pipeline: PipelineConfig,
    pub augmentation: AugmentationConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            backend_url: MOCK_BACKEND.to_string(),
            concurrency_limit: 8,
            template: TemplateConfig::default(),
            pipeline: PipelineConfig::default(),
            augmentation: AugmentationConfig::default(),
        }
    }
}

impl CliConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<CliConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: CliConfig =
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {}", path.display(), e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.concurrency_limit == 0 {
            return Err(Error::InvalidConfig("concurrency_limit must be at least 1".into()));
        }
        if self.backend_url.trim().is_empty() {
            return Err(Error::InvalidConfig("backend_url is empty".into()));
        }
        self.template.validate()?;
        self.effective_pipeline().validate()
    }

    /// Pipeline settings with the shared template filled in.
    pub fn effective_pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            template: self.template.clone(),
            ..self.pipeline.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Mode;

    #[test]
    fn partial_file_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "backend_url = \"http://localhost:9000\"\n[pipeline]\nmode = \"no_hinted\"\n[template.class_tokens]\nentail = \"Yes\"\ncontradict = \"No\"\n",
        )
        .unwrap();
        let cfg = CliConfig::load(&path).unwrap();
        assert_eq!(cfg.backend_url, "http://localhost:9000");
        assert_eq!(cfg.pipeline.mode, Mode::NoHinted);
        assert_eq!(cfg.pipeline.threshold, 0.5);
        assert_eq!(cfg.concurrency_limit, 8);
        assert_eq!(cfg.augmentation.k, 3);
        assert_eq!(cfg.effective_pipeline().template.class_tokens.entail, "Yes");
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        for bad in ["concurrency_limit = 0", "unknown_key = 1", "[pipeline]\nthreshold = 1.5", "[template]\nbecause_delimiter = \"\""] {
            std::fs::write(&path, bad).unwrap();
            assert!(matches!(CliConfig::load(&path), Err(Error::InvalidConfig(_))), "{bad}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let cfg = CliConfig::default();
        let back: CliConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }
}
