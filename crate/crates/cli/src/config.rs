use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use geml_core::eval::Regime;
use geml_core::meta::MetaConfig;
use geml_core::model::ModelConfig;
use serde::Deserialize;

use crate::UsageError;

/// Input and output locations of a run. Relative paths are resolved against
/// the directory of the config file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub source: Option<PathBuf>,
    pub target_adapt: Option<PathBuf>,
    pub target_test: Option<PathBuf>,
    pub commonsense: Option<PathBuf>,
    /// Checkpoint read by `adapt`, `eval` and `chat`.
    pub checkpoint: Option<PathBuf>,
    /// Graph JSON paired with `checkpoint`.
    pub graph: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_regime")]
    pub regime: Regime,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub meta: MetaConfig,
}

fn default_regime() -> Regime {
    Regime::Geml
}

/// Flag overrides; flags win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub regime: Option<Regime>,
}

impl RunConfig {
    pub fn load(path: &Path, o: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("config not found: {}: {e}", path.display())))?;
        let mut c: RunConfig =
            serde_json::from_str(&text).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                *x = base.join(&*x);
            }
        };
        resolve(&mut c.paths.source);
        resolve(&mut c.paths.target_adapt);
        resolve(&mut c.paths.target_test);
        resolve(&mut c.paths.commonsense);
        resolve(&mut c.paths.checkpoint);
        resolve(&mut c.paths.graph);
        c.paths.out_dir = match &o.out {
            Some(out) => out.clone(),
            None => base.join(&c.paths.out_dir),
        };
        if let Some(s) = o.seed {
            c.seed = s;
        }
        if let Some(r) = o.regime {
            c.regime = r;
        }
        c.meta.seed = c.seed;
        c.model.validate().map_err(|e| UsageError(e.to_string()))?;
        c.meta.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(c)
    }

    /// A required input path.
    pub fn need<'a>(&self, p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        match p {
            Some(p) => Ok(p),
            None => Err(UsageError(format!("config needs paths.{what} for this command")).into()),
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        let d = &self.paths.out_dir;
        std::fs::create_dir_all(d).with_context(|| format!("cannot create output directory {}", d.display()))?;
        if d.metadata()?.permissions().readonly() {
            bail!(UsageError(format!("output directory {} is not writable", d.display())));
        }
        Ok(d)
    }
}

/// `dir/name.ckpt` paired with `dir/name_graph.json`.
pub fn graph_path_for(checkpoint: &Path) -> PathBuf {
    let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    checkpoint.with_file_name(format!("{stem}_graph.json"))
}
