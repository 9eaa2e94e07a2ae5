//! A directory holding one trained model per characteristic plus a
//! `bundle.json` manifest with SHA-256 hashes of every model file.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{ModelKind, TextClassifier, TrainedModel};
use crate::{sha256_hex, ByCharacteristic, Characteristic, Error, Result};

pub const MANIFEST: &str = "bundle.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleEntry {
    pub file: String,
    pub kind: ModelKind,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleManifest {
    pub version: u32,
    pub models: BTreeMap<Characteristic, BundleEntry>,
}

/// One classifier per characteristic.
#[derive(Clone)]
pub struct ModelBundle {
    models: ByCharacteristic<Arc<dyn TextClassifier>>,
}

impl std::fmt::Debug for ModelBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelBundle").field("fingerprints", &self.fingerprints()).finish()
    }
}

impl ModelBundle {
    pub fn new(models: ByCharacteristic<Arc<dyn TextClassifier>>) -> Result<Self> {
        for (c, m) in models.iter() {
            if m.task() != c {
                return Err(Error::Conflict(format!("model for {} registered under {c}", m.task())));
            }
        }
        Ok(ModelBundle { models })
    }

    /// Fails with [`Error::MissingModel`] for the first absent characteristic.
    pub fn from_partial(models: ByCharacteristic<Option<Arc<dyn TextClassifier>>>) -> Result<Self> {
        Self::new(models.try_map(|c, m| m.clone().ok_or(Error::MissingModel(c)))?)
    }

    pub fn get(&self, c: Characteristic) -> &dyn TextClassifier {
        self.models[c].as_ref()
    }

    pub fn fingerprints(&self) -> ByCharacteristic<String> {
        self.models.map(|_, m| m.fingerprint().to_string())
    }

    /// Writes `<task>.bin` files and the manifest into `dir`.
    pub fn save_dir(dir: impl AsRef<Path>, models: &ByCharacteristic<TrainedModel>) -> Result<BundleManifest> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut entries = BTreeMap::new();
        for (c, m) in models.iter() {
            if m.task != c {
                return Err(Error::Conflict(format!("model for {} registered under {c}", m.task)));
            }
            let bytes = m.to_bytes();
            let file = format!("{}.bin", c.key());
            std::fs::write(dir.join(&file), &bytes)?;
            entries.insert(
                c,
                BundleEntry {
                    file,
                    kind: m.kind(),
                    sha256: sha256_hex(&bytes),
                },
            );
        }
        let manifest = BundleManifest {
            version: 1,
            models: entries,
        };
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        std::fs::write(dir.join(MANIFEST), json)?;
        Ok(manifest)
    }

    /// Loads and verifies every model listed in the manifest.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: BundleManifest = serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST))?)?;
        if manifest.version != 1 {
            return Err(Error::Container(format!("unsupported bundle version {}", manifest.version)));
        }
        let models = ByCharacteristic::from_fn(|c| manifest.models.get(&c).cloned()).try_map(|c, entry| {
            let entry = entry.as_ref().ok_or(Error::MissingModel(c))?;
            if entry.file.contains(['/', '\\']) || entry.file.starts_with('.') {
                return Err(Error::Container(format!("model file {:?} must be a plain name", entry.file)));
            }
            let bytes = std::fs::read(dir.join(&entry.file))?;
            let actual = sha256_hex(&bytes);
            if actual != entry.sha256 {
                return Err(Error::Fingerprint {
                    what: entry.file.clone(),
                    expected: entry.sha256.clone(),
                    actual,
                });
            }
            let model = TrainedModel::from_bytes(&bytes)?;
            if model.kind() != entry.kind {
                return Err(Error::Conflict(format!(
                    "{} holds a {} model, manifest says {}",
                    entry.file,
                    model.kind(),
                    entry.kind
                )));
            }
            Ok(Arc::new(model) as Arc<dyn TextClassifier>)
        })?;
        Self::new(models)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{derive_gold, generate_synthetic, GoldPolicy};
    use crate::model::{train_model, ModelConfig};

    fn trained() -> ByCharacteristic<TrainedModel> {
        let gold = derive_gold(&generate_synthetic(4, 120, 1.0).unwrap(), GoldPolicy::PerfectOnly).unwrap();
        ByCharacteristic::from_fn(|c| {
            let data: Vec<_> = gold.iter().filter_map(|g| g.labeled(c)).collect();
            train_model(ModelKind::NgSvm, c, &data, &ModelConfig::default()).unwrap()
        })
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let models = trained();
        let manifest = ModelBundle::save_dir(dir.path(), &models).unwrap();
        assert_eq!(manifest.models.len(), 5);
        let bundle = ModelBundle::load_dir(dir.path()).unwrap();
        assert_eq!(bundle.fingerprints(), models.map(|_, m| m.fingerprint().to_string()));
        let text = "Why does my order keep failing?";
        for (c, m) in models.iter() {
            assert_eq!(bundle.get(c).prob_yes(text).unwrap(), m.prob_yes(text).unwrap());
        }
    }

    #[test]
    fn tampered_file_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        ModelBundle::save_dir(dir.path(), &trained()).unwrap();
        let path = dir.path().join("self_revealing.bin");
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(ModelBundle::load_dir(dir.path()), Err(Error::Fingerprint { .. })));
    }

    #[test]
    fn missing_entry_names_the_characteristic() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = ModelBundle::save_dir(dir.path(), &trained()).unwrap();
        manifest.models.remove(&Characteristic::ActionSeeking);
        std::fs::write(dir.path().join(MANIFEST), serde_json::to_string(&manifest).unwrap()).unwrap();
        assert!(matches!(
            ModelBundle::load_dir(dir.path()),
            Err(Error::MissingModel(Characteristic::ActionSeeking))
        ));
    }

    #[test]
    fn path_like_file_names_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = ModelBundle::save_dir(dir.path(), &trained()).unwrap();
        manifest.models.get_mut(&Characteristic::Emotionality).unwrap().file = "../x.bin".into();
        std::fs::write(dir.path().join(MANIFEST), serde_json::to_string(&manifest).unwrap()).unwrap();
        assert!(matches!(ModelBundle::load_dir(dir.path()), Err(Error::Container(_))));
    }
}
