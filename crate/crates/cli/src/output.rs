//! Artifact writers. Every file carries the output schema, the config hash and
//! the seed: JSON in an envelope, CSV in leading `#` lines, SVG in `<metadata>`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const OUTPUT_SCHEMA: &str = "que-out/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub schema: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Meta {
    pub fn new(cfg: &RunConfig) -> Self {
        Meta {
            schema: OUTPUT_SCHEMA.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
        }
    }
}

/// One measured-versus-bound comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(deserialize_with = "nullable")]
    pub measured: f64,
    #[serde(deserialize_with = "nullable")]
    pub bound: f64,
    pub ok: bool,
}

// serde_json writes non-finite floats as null
fn nullable<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            bound,
            ok: measured <= bound,
        }
    }

    pub fn within(name: impl Into<String>, measured: f64, lo: f64, hi: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            bound: hi,
            ok: (lo..=hi).contains(&measured),
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            measured: if ok { 0.0 } else { 1.0 },
            bound: 0.0,
            ok,
        }
    }
}

/// The JSON envelope.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Artifact {
    #[serde(flatten)]
    pub meta: Meta,
    pub kind: String,
    pub checks: Vec<Check>,
    pub data: Value,
}

/// Formats a float with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Writer {
    pub dir: PathBuf,
    pub meta: Meta,
    written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(cfg: &RunConfig) -> CliResult<Self> {
        fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
        Ok(Writer {
            dir: cfg.out.clone(),
            meta: Meta::new(cfg),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn json(&mut self, name: &str, kind: &str, checks: &[Check], data: impl Serialize) -> CliResult<PathBuf> {
        let artifact = Artifact {
            meta: self.meta.clone(),
            kind: kind.to_string(),
            checks: checks.to_vec(),
            data: serde_json::to_value(data)?,
        };
        let mut text = serde_json::to_string_pretty(&artifact)?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
        let mut out = format!(
            "# schema: {}\n# config_hash: {}\n# seed: {}\n",
            self.meta.schema, self.meta.config_hash, self.meta.seed
        )
        .into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(header)?;
            for row in rows {
                w.write_record(row)?;
            }
            w.flush().map_err(|e| CliError::Encoding(e.to_string()))?;
        }
        self.put(name, &out)
    }

    pub fn text(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        self.put(name, text.as_bytes())
    }
}

/// Reads an artifact back; `None` for JSON files that are not artifacts.
pub fn read_artifact(path: &Path) -> CliResult<Option<Artifact>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match serde_json::from_str::<Artifact>(&text) {
        Ok(a) if a.meta.schema == OUTPUT_SCHEMA => Ok(Some(a)),
        _ => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        let x = std::f64::consts::PI;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
        assert_eq!(num(0.0), "0.0000000000000000e0");
    }

    #[test]
    fn files_embed_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            out: dir.path().to_path_buf(),
            seed: 11,
            ..Default::default()
        };
        let mut w = Writer::new(&cfg).unwrap();
        let c = w.csv("t.csv", &["a", "b"], &[vec![num(1.0), "x".into()]]).unwrap();
        let text = fs::read_to_string(c).unwrap();
        assert!(text.starts_with("# schema: que-out/1\n"));
        assert!(text.contains(&format!("# config_hash: {}", cfg.hash())));
        assert!(text.contains("# seed: 11\n"));
        assert!(text.ends_with("a,b\n1.0000000000000000e0,x\n"));

        let j = w.json("t.json", "test", &[Check::at_most("x", 1.0, 2.0)], [1, 2]).unwrap();
        let a = read_artifact(&j).unwrap().unwrap();
        assert_eq!(a.meta, Meta::new(&cfg));
        assert_eq!(a.kind, "test");
        assert!(a.checks[0].ok);
    }
}
