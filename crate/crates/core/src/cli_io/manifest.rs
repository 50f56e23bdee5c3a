//! Run manifests: a TOML record of exactly what was run.
//!
//! The embedded config is the normalized form with every default written
//! out, so `resume <manifest>` replays the identical experiment even if
//! defaults change in a later version. Only `created_unix` varies between
//! re-emissions of the same run.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use super::config::RawConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestMeta {
    pub tool: String,
    pub version: String,
    pub created_unix: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub manifest: ManifestMeta,
    pub config: RawConfig,
}

impl std::str::FromStr for Manifest {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }
}

impl Manifest {
    pub fn new(config: RawConfig) -> Self {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Manifest {
            manifest: ManifestMeta {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                created_unix,
            },
            config,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serialization cannot fail")
    }
}

/// Writes `manifest.toml` into `out_dir`.
pub fn write_manifest(out_dir: &Path, config: &RawConfig) -> Result<PathBuf> {
    let path = out_dir.join("manifest.toml");
    std::fs::write(&path, Manifest::new(config.clone()).to_toml_string())?;
    Ok(path)
}

/// Reads a manifest back from disk.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    std::fs::read_to_string(path)?.parse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn sample_config() -> RawConfig {
        let text = r#"
            [target]
            kind = "f2"
            dimension = 1

            [network]
            depth = 2
            width = 12
            activation = "elu"

            [training]
            schedule = [50, 100]
        "#;
        let loaded = super::super::config::parse_config_str(text, Path::new(".")).unwrap();
        loaded.normalized
    }

    #[test]
    fn manifest_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest(dir.path(), &sample_config()).unwrap();
        assert_eq!(path.file_name().unwrap(), "manifest.toml");
        let back = read_manifest(&path).unwrap();
        assert_eq!(back.manifest.tool, "christoffel");
        assert!(!back.manifest.version.is_empty());
        let resolved = back.config.resolve(dir.path()).unwrap();
        assert_eq!(resolved.config.schedule, vec![50, 100]);
        assert_eq!(resolved.config.network.width, 12);
    }

    #[test]
    fn manifest_config_resolves_to_the_original_experiment() {
        let normalized = sample_config();
        let manifest: Manifest = Manifest::new(normalized.clone())
            .to_toml_string()
            .parse()
            .unwrap();
        let a = normalized.resolve(Path::new(".")).unwrap();
        let b = manifest.config.resolve(Path::new(".")).unwrap();
        assert_eq!(a.config.base_seed, b.config.base_seed);
        assert_eq!(a.config.grid_size, b.config.grid_size);
        assert_eq!(
            super::super::config::to_toml_string(&a.normalized),
            super::super::config::to_toml_string(&b.normalized)
        );
    }

    #[test]
    fn unknown_manifest_keys_are_rejected() {
        let mut text = Manifest::new(sample_config()).to_toml_string();
        text.push_str("\n[extra]\nkey = 1\n");
        assert!(text.parse::<Manifest>().is_err());
    }
}
