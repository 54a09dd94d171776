//! On-disk cache of level graphs and their spectra, keyed by
//! (schema, model, level). Unreadable or mismatched entries are rebuilt.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use que_core::forms::assemble;
use que_core::fractal::{build_level, LevelGraphDoc};
use que_core::{FractalModel, LevelGraph};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const CACHE_SCHEMA: &str = "que-cache/1";
pub const CACHE_ENV: &str = "QUE_CACHE_DIR";

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Entry {
    schema: String,
    model: String,
    level: usize,
    graph: LevelGraphDoc,
    eigenvalues: Option<Vec<f64>>,
}

pub struct Cache {
    dir: PathBuf,
}

pub struct Cached {
    pub graph: LevelGraph,
    pub eigenvalues: Option<Vec<f64>>,
    /// Whether the entry was read from disk.
    pub hit: bool,
}

impl Cache {
    /// `QUE_CACHE_DIR`, then the configured directory, then `<out>/.que-cache`.
    pub fn locate(cfg: &RunConfig) -> Self {
        let dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .or_else(|| cfg.cache_dir.clone())
            .unwrap_or_else(|| cfg.out.join(".que-cache"));
        Cache { dir }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, model: &FractalModel, level: usize) -> PathBuf {
        let schema = CACHE_SCHEMA.replace('/', "-");
        self.dir.join(format!("{schema}-{}-{level}.json", model.name()))
    }

    fn read(&self, model: &FractalModel, level: usize) -> Option<Cached> {
        let path = self.path(model, level);
        if !path.exists() {
            return None;
        }
        let parsed = fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|text| serde_json::from_str::<Entry>(&text).map_err(|e| e.to_string()))
            .and_then(|entry| {
                if entry.schema != CACHE_SCHEMA || entry.model != model.name() || entry.level != level {
                    return Err("entry key does not match its file name".to_string());
                }
                let text = serde_json::to_string(&entry.graph).map_err(|e| e.to_string())?;
                let graph = LevelGraph::from_json(&text).map_err(|e| e.to_string())?;
                if let Some(ev) = &entry.eigenvalues {
                    if ev.len() != graph.len() {
                        return Err(format!("{} eigenvalues for {} vertices", ev.len(), graph.len()));
                    }
                }
                Ok(Cached {
                    graph,
                    eigenvalues: entry.eigenvalues,
                    hit: true,
                })
            });
        match parsed {
            Ok(c) => Some(c),
            Err(reason) => {
                warn!("cache entry {} is corrupt ({reason}); rebuilding", path.display());
                None
            }
        }
    }

    fn write(&self, model: &FractalModel, level: usize, graph: &LevelGraph, eigenvalues: Option<&[f64]>) -> CliResult<()> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let entry = Entry {
            schema: CACHE_SCHEMA.to_string(),
            model: model.name().to_string(),
            level,
            graph: graph.to_document(),
            eigenvalues: eigenvalues.map(<[f64]>::to_vec),
        };
        let path = self.path(model, level);
        // write-then-rename keeps concurrent readers from seeing a partial file
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec(&entry)?).map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))
    }

    /// The level graph, from disk when possible.
    pub fn level(&self, model: &FractalModel, level: usize) -> CliResult<Cached> {
        if let Some(c) = self.read(model, level) {
            return Ok(c);
        }
        let graph = build_level(model, level)?;
        self.write(model, level, &graph, None)?;
        Ok(Cached {
            graph,
            eigenvalues: None,
            hit: false,
        })
    }

    /// The level graph with its full spectrum, computing and storing the
    /// spectrum on a miss.
    pub fn spectrum(&self, model: &FractalModel, level: usize) -> CliResult<Cached> {
        let mut c = self.level(model, level)?;
        if c.eigenvalues.is_none() {
            let pencil = assemble(&c.graph);
            let values = pencil.decomposition()?.eigenvalues.clone();
            self.write(model, level, &c.graph, Some(&values))?;
            c.eigenvalues = Some(values);
            c.hit = false;
        }
        Ok(c)
    }
}
