//! On-disk formats: binary traces, CSV spectra and TOML configuration.

mod config_file;
mod psd_file;
mod trace_file;

pub use config_file::{load_band_plan, AnalysisSection, ConfigFile, CONFIG_SCHEMA_VERSION};
pub use psd_file::{read_psd, read_psd_from, write_psd, write_psd_to, PSD_SCHEMA_VERSION};
pub use trace_file::{read_trace, read_trace_from, write_trace, write_trace_to, TRACE_MAGIC, TRACE_SCHEMA_VERSION};

use std::path::Path;

use crate::error::CoshError;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CoshError + '_ {
    move |source| CoshError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn format_err(path: &Path, message: impl Into<String>) -> CoshError {
    CoshError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}
