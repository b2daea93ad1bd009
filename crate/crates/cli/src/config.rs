//! Optional JSON run configuration. Every key mirrors a command-line flag;
//! flags given on the command line win.

use hausstraight::fixtures::FixtureSpec;
use hausstraight::pde::scheme::SchemeConfig;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub s: Option<f64>,
    pub delta: Option<f64>,
    pub convention: Option<String>,
    pub rmin: Option<f64>,
    pub epsilon: Option<f64>,
    pub budget: Option<u64>,
    pub mode: Option<String>,
    pub floor: Option<f64>,
    pub pitch: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    pub epsilons: Option<Vec<f64>>,
    pub r0: Option<f64>,
    pub eps0: Option<f64>,
    pub profile: Option<PathBuf>,
    pub spec: Option<FixtureSpec>,
    pub n: Option<usize>,
    pub h: Option<f64>,
    pub bounds: Option<Vec<f64>>,
    pub scheme: Option<SchemeConfig<f64>>,
    pub tests: Option<Vec<String>>,
    pub csv: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub suite: Option<String>,
    pub seed: Option<u64>,
    pub plot_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| format!("{}: at {}: {}", path.display(), e.path(), e.inner()))
    }
}
