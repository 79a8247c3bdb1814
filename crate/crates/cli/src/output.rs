use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use confnodal::nodal::{NodalSet, Provenance};
use confnodal::{AlphaOrder, Error};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Output directory; files are written in a fixed order with fixed formatting.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// CSV with a leading `# <title> schema_version=1` comment line.
    pub fn csv(&self, name: &str, title: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.path(name);
        let mut file = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(file, "# {title} schema_version={SCHEMA_VERSION}")?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn text(&self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Shortest round-trip representation; stable across runs.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Serialize, Deserialize)]
struct NodesFile {
    schema_version: u32,
    alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
    entries: Vec<NodesEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodesEntry {
    n: i64,
    nodes: Vec<f64>,
}

pub fn write_nodes(out: &OutDir, name: &str, set: &NodalSet) -> Result<()> {
    let file = NodesFile {
        schema_version: SCHEMA_VERSION,
        alpha: set.alpha,
        provenance: Some(set.provenance),
        entries: set
            .entries
            .iter()
            .map(|(&n, v)| NodesEntry { n, nodes: v.clone() })
            .collect(),
    };
    out.json(name, &file)
}

#[derive(Debug, Deserialize)]
struct NodeRow {
    n: i64,
    #[allow(dead_code)]
    j: i64,
    x: f64,
}

/// Reads the JSON interchange format, or CSV with columns `n,j,x`.
pub fn read_nodes(path: &Path, alpha: AlphaOrder) -> Result<NodalSet> {
    let data_err = |msg: String| anyhow::Error::from(Error::Data(msg));
    let mut set = NodalSet::new(alpha, Provenance::Numeric);
    if path.extension().is_some_and(|e| e == "csv") {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        for row in rdr.deserialize::<NodeRow>() {
            let row = row.map_err(|e| data_err(format!("{}: {e}", path.display())))?;
            set.entries.entry(row.n).or_default().push(row.x);
        }
    } else {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: NodesFile =
            serde_json::from_str(&text).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(data_err(format!(
                "{}: unsupported schema_version {} (expected {SCHEMA_VERSION})",
                path.display(),
                file.schema_version
            )));
        }
        if (file.alpha - alpha.get()).abs() > 1e-12 {
            return Err(Error::Constraint(format!(
                "nodes file {} has alpha = {}, but the configuration has alpha = {}",
                path.display(),
                file.alpha,
                alpha.get()
            ))
            .into());
        }
        if let Some(p) = file.provenance {
            set.provenance = p;
        }
        for e in file.entries {
            if set.entries.insert(e.n, e.nodes).is_some() {
                return Err(data_err(format!("duplicate entry for n = {}", e.n)));
            }
        }
    }
    set.validate()?;
    Ok(set)
}
