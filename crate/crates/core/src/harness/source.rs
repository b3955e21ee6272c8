//! Where the experts come from: `oracle:<path>`, `remote:<url>` or
//! `replay:<dir>`.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use crate::experts::remote::RemoteExperts;
use crate::experts::replay::ReplayExperts;
use crate::experts::{ExpertBundle, ExpertError};
use crate::synth::{OracleExperts, SceneSpec};

/// Overrides the URL of a `remote:` source when set.
pub const EXPERT_URL_ENV: &str = "DEEPSCAN_EXPERT_URL";
pub const REMOTE_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExpertsSpec {
    /// A scene spec JSON file, a path that becomes one with `.json`
    /// appended, or a directory holding `<image stem>.json` files.
    Oracle(PathBuf),
    Remote(String),
    Replay(PathBuf),
}

impl FromStr for ExpertsSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("expected oracle:<path>, remote:<url> or replay:<dir>, got {s:?}"))?;
        if rest.is_empty() {
            return Err(format!("{kind}: needs a value"));
        }
        match kind {
            "oracle" => Ok(Self::Oracle(rest.into())),
            "remote" => Ok(Self::Remote(rest.into())),
            "replay" => Ok(Self::Replay(rest.into())),
            _ => Err(format!("unknown expert source {kind:?}")),
        }
    }
}

pub fn load_spec(path: &Path) -> Result<SceneSpec, ExpertError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ExpertError::InvalidInput(format!("scene spec {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ExpertError::InvalidInput(format!("scene spec {}: {e}", path.display())))
}

/// A resolved source. Remote and replay backends are shared across items;
/// oracles are built per image from its scene spec.
#[derive(Clone)]
pub enum ExpertsSource {
    Oracle(PathBuf),
    Shared(ExpertBundle),
}

impl ExpertsSource {
    pub fn open(spec: &ExpertsSpec) -> Result<Self, ExpertError> {
        Ok(match spec {
            ExpertsSpec::Oracle(p) => Self::Oracle(p.clone()),
            ExpertsSpec::Remote(url) => {
                let url = std::env::var(EXPERT_URL_ENV).unwrap_or_else(|_| url.clone());
                Self::Shared(ExpertBundle::from_shared(Arc::new(RemoteExperts::new(&url, REMOTE_TIMEOUT))))
            }
            ExpertsSpec::Replay(dir) => Self::Shared(ExpertBundle::from_shared(Arc::new(ReplayExperts::open(dir)?))),
        })
    }

    /// Spec file an oracle source uses for `image`.
    pub fn oracle_spec_path(root: &Path, image: &Path) -> PathBuf {
        if root.is_dir() {
            let stem = image.file_stem().unwrap_or_default();
            root.join(stem).with_extension("json")
        } else if root.extension().is_some_and(|e| e == "json") {
            root.to_path_buf()
        } else {
            let mut s = root.as_os_str().to_owned();
            s.push(".json");
            s.into()
        }
    }

    pub fn bundle_for(&self, image: &Path) -> Result<ExpertBundle, ExpertError> {
        match self {
            Self::Oracle(root) => Ok(OracleExperts::bundle(load_spec(&Self::oracle_spec_path(root, image))?)),
            Self::Shared(b) => Ok(b.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sources() {
        assert_eq!("oracle:scenes/0001".parse(), Ok(ExpertsSpec::Oracle("scenes/0001".into())));
        assert_eq!(
            "remote:http://h:8000".parse(),
            Ok(ExpertsSpec::Remote("http://h:8000".into()))
        );
        assert!("replay:".parse::<ExpertsSpec>().is_err());
        assert!("model:x".parse::<ExpertsSpec>().is_err());
        assert!("oracle".parse::<ExpertsSpec>().is_err());
    }

    #[test]
    fn oracle_paths() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(
            ExpertsSource::oracle_spec_path(dir.path(), Path::new("/x/scene_0003.png")),
            dir.path().join("scene_0003.json")
        );
        assert_eq!(
            ExpertsSource::oracle_spec_path(Path::new("s/a.json"), Path::new("b.png")),
            PathBuf::from("s/a.json")
        );
        assert_eq!(
            ExpertsSource::oracle_spec_path(Path::new("scenes/0001"), Path::new("b.png")),
            PathBuf::from("scenes/0001.json")
        );
    }
}
