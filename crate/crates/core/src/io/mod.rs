//! File formats: data ingestion, run configuration, the draws container and
//! the delimited output tables.

mod config;
mod draws_file;
mod ingest;
mod tables;

use std::io::{BufWriter, Write};
use std::path::Path;

pub use config::RunConfig;
pub use draws_file::{read_draws, read_header, write_draws, DrawsHeader, FORMAT_VERSION, MAGIC};
pub use ingest::{export_csv, ingest, read_covariates, write_covariates, DataSpec};
pub use tables::{
    average_summaries, read_effect_draws, render_surrogate, write_average_draws, write_components,
    write_effect_draws, write_r_squared, write_row_summaries, write_summaries, EffectRow, SummaryRow,
};

use crate::error::Result;

/// Writes `path` through a temporary file in the same directory that is
/// renamed into place only after `body` succeeds, so a failed write never
/// leaves a partial file behind.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<&mut std::fs::File>) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn save_draws(fit: &crate::mediation::MediationFit, path: &Path) -> Result<()> {
    write_atomic(path, |w| write_draws(fit, w))
}

pub fn load_draws(path: &Path) -> Result<crate::mediation::MediationFit> {
    let f = std::fs::File::open(path)?;
    read_draws(std::io::BufReader::new(f))
}
