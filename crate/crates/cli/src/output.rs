//! Result persistence. Every artifact is written from an in-memory string
//! in one call so outputs are byte-stable for a given record.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// `base` with the given extension appended; `out/run` becomes
/// `out/run.json`.
pub fn artifact_path(base: &Path, extension: &str) -> PathBuf {
    let mut p = base.as_os_str().to_os_string();
    p.push(".");
    p.push(extension);
    PathBuf::from(p)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Pretty-printed JSON with a trailing newline. Field order follows the
/// struct declaration, so identical records serialize identically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// One evaluated grid point of a two-dimensional density comparison.
#[derive(Debug, Clone, Copy)]
pub struct DensityRow {
    pub x: f64,
    pub y: f64,
    pub density_true: f64,
    pub density_kde: f64,
    pub density_rkde: f64,
}

/// Grid-point table backing the density CSV artifact.
#[derive(Debug, Clone, Default)]
pub struct DensityTable {
    pub rows: Vec<DensityRow>,
}

impl DensityTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,density_true,density_kde,density_rkde\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.x, r.y, r.density_true, r.density_kde, r.density_rkde
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        write_text(path, &self.to_csv())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn artifact_paths_append_extensions() {
        assert_eq!(artifact_path(Path::new("out/run"), "json"), PathBuf::from("out/run.json"));
        assert_eq!(artifact_path(Path::new("run"), "csv"), PathBuf::from("run.csv"));
    }

    #[test]
    fn csv_layout_is_stable() {
        let table = DensityTable {
            rows: vec![
                DensityRow { x: -6.0, y: 0.5, density_true: 0.25, density_kde: 0.3, density_rkde: 0.275 },
                DensityRow { x: -6.0, y: 0.75, density_true: 0.1, density_kde: 0.0, density_rkde: 0.0001 },
            ],
        };
        let csv = table.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x,y,density_true,density_kde,density_rkde"));
        assert_eq!(lines.next(), Some("-6,0.5,0.25,0.3,0.275"));
        assert_eq!(lines.next(), Some("-6,0.75,0.1,0,0.0001"));
        assert_eq!(lines.next(), None);
    }
}
