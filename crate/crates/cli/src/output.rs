//! Output directory handling: lock file, atomic writes and fixed-schema CSV.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub const SHELLS_HEADER: &[&str] = &[
    "shell_id",
    "representative_x",
    "representative_y",
    "representative_z",
    "distance_nm",
    "multiplicity",
    "direction_class",
    "orbit_id",
];

pub const PROBE_HEADER: &[&str] = &[
    "site_x",
    "site_y",
    "site_z",
    "field_x_MV_per_m",
    "field_y_MV_per_m",
    "field_z_MV_per_m",
    "beta_kHz",
    "B_xx",
    "B_yy",
    "B_zz",
    "B_xy",
    "B_xz",
    "B_yz",
    "calibration_scale",
    "flags",
];

pub const TABLE_HEADER: &[&str] = &[
    "site_x",
    "site_y",
    "site_z",
    "component",
    "alpha0_kHz",
    "eta2_e-3_m2_per_MV2",
    "eta1_e-3_m_per_MV",
    "rms_residual",
    "merged_group_id",
];

pub const FIG2_HEADER: &[&str] = &["orbit_id", "component", "E_MV_per_m", "rel_change", "uncertainty"];

pub const INTERFACE_HEADER: &[&str] = &[
    "E_MV_per_m",
    "ground_eV",
    "excited_eV",
    "centroid_nm",
    "donor_density",
    "converged",
];

/// Held while a run owns its output directory.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<RunLock> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        let path = dir.join(".lock");
        let mut f = match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                let owner = fs::read_to_string(&path).unwrap_or_default();
                return Err(io::Error::new(
                    io::ErrorKind::AlreadyExists,
                    format!(
                        "{} is locked by another run ({}); remove the lock file if that run is gone",
                        dir.display(),
                        owner.trim()
                    ),
                ))
                .context("acquiring the output lock");
            }
            Err(e) => return Err(e).with_context(|| format!("creating {}", path.display())),
        };
        writeln!(f, "pid {}", std::process::id())?;
        Ok(RunLock { path })
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Shortest round-trip rendering; identical values give identical bytes.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x}")
    }
}

/// CSV text with a fixed header. Every row must match the header width and
/// every cell of a numeric column must parse as a number (or be empty).
pub struct Table {
    header: &'static [&'static str],
    text: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    /// `text` lists the columns holding labels rather than numbers.
    pub fn new(header: &'static [&'static str], text: &[&'static str]) -> Table {
        Table {
            header,
            text: text.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            bail!("row has {} cells, schema has {}", row.len(), self.header.len());
        }
        for (cell, col) in row.iter().zip(self.header) {
            if !self.text.contains(col) && !cell.is_empty() && cell.parse::<f64>().is_err() {
                bail!("column {col} expects a number, got `{cell}`");
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let d = tempfile::tempdir().unwrap();
        let a = RunLock::acquire(d.path()).unwrap();
        let e = RunLock::acquire(d.path()).unwrap_err();
        assert!(e.chain().any(|c| c.downcast_ref::<io::Error>().is_some()));
        drop(a);
        RunLock::acquire(d.path()).unwrap();
    }

    #[test]
    fn atomic_write_replaces() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(d.path()).unwrap().count(), 1);
    }

    #[test]
    fn table_checks_schema() {
        let mut t = Table::new(FIG2_HEADER, &["component"]);
        t.push(vec!["0".into(), "beta".into(), num(0.5), num(-1e-3), "".into()]).unwrap();
        assert!(t.push(vec!["0".into(), "beta".into()]).is_err());
        assert!(t.push(vec!["x".into(), "beta".into(), "1".into(), "1".into(), "1".into()]).is_err());
        let s = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert_eq!(s, "orbit_id,component,E_MV_per_m,rel_change,uncertainty\n0,beta,0.5,-0.001,\n");
        assert_eq!(num(-0.0), "0");
    }
}
