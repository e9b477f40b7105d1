//! Model artifact: a versioned JSON dump of the architecture plus the flat
//! parameter vector. Floats serialize through serde_json's shortest
//! round-trip representation, so save/load is bit-exact and rerunning a
//! seeded command reproduces byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use unlearn_core::model::Classifier;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: u32,
    pub input_dim: usize,
    pub class_count: usize,
    pub hidden: Vec<usize>,
    pub activation: String,
    /// Flat parameters in the classifier's documented enumeration order.
    pub params: Vec<f64>,
    /// Master seed of the experiment that produced this model.
    pub master_seed: u64,
}

impl ModelArtifact {
    pub fn from_classifier(model: &Classifier, master_seed: u64) -> Self {
        Self {
            version: ARTIFACT_VERSION,
            input_dim: model.input_dim(),
            class_count: model.class_count(),
            hidden: model.hidden_dims(),
            activation: "tanh".to_string(),
            params: model.flatten(),
            master_seed,
        }
    }

    pub fn to_classifier(&self) -> anyhow::Result<Classifier> {
        if self.version != ARTIFACT_VERSION {
            anyhow::bail!(
                "unsupported artifact version {} (expected {ARTIFACT_VERSION})",
                self.version
            );
        }
        if self.activation != "tanh" {
            anyhow::bail!("unsupported activation `{}`", self.activation);
        }
        Ok(Classifier::from_flat(
            self.input_dim,
            &self.hidden,
            self.class_count,
            &self.params,
        )?)
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)
            .map_err(|e| anyhow::anyhow!("cannot write artifact {}: {e}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read artifact {}: {e}", path.display()))?;
        Ok(serde_json::from_str(&text)
            .map_err(|e| anyhow::anyhow!("cannot parse artifact {}: {e}", path.display()))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn artifact_roundtrip_is_exact() {
        let model = Classifier::new(5, &[4, 3], 7, 99).unwrap();
        let artifact = ModelArtifact::from_classifier(&model, 42);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        artifact.save(&path).unwrap();
        let loaded = ModelArtifact::load(&path).unwrap();
        assert_eq!(loaded, artifact);
        assert_eq!(loaded.to_classifier().unwrap(), model);
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        let model = Classifier::new(3, &[2], 4, 1).unwrap();
        let artifact = ModelArtifact::from_classifier(&model, 7);
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        artifact.save(&a).unwrap();
        artifact.save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let model = Classifier::new(3, &[2], 4, 1).unwrap();
        let mut artifact = ModelArtifact::from_classifier(&model, 7);
        artifact.version = 99;
        assert!(artifact.to_classifier().is_err());
    }
}
