//! File formats: Middlebury `.flo` flow fields, 16-bit PGM images, corrector
//! parameter records, TOML run configuration and CSV reports.

mod config;
mod csv;
mod flo;
mod params;
mod pgm;

pub use self::csv::{read_metric_report, write_metric_report, write_table, METRIC_HEADER};
pub use config::{CorrectorSection, DatasetSection, PredictorSection, RunConfig, SimulationSection};
pub use flo::{decode_flow, encode_flow, read_flow, validate_flow, write_flow, FLO_MAGIC};
pub use params::{decode_params, encode_params, read_params, write_params, PARAMS_MAGIC, PARAMS_VERSION};
pub use pgm::{decode_image, encode_image, read_image, write_image, PGM_MAXVAL};

use crate::error::{Error, Result};
use std::path::Path;

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Cursor over a byte buffer that reports offsets in its errors.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Self { bytes, pos: 0, path }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn format_error(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    /// Fails with a truncation error unless `total` bytes are available.
    pub(crate) fn require(&self, total: usize) -> Result<()> {
        if self.bytes.len() < total {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                expected: total as u64,
                actual: self.bytes.len() as u64,
            });
        }
        Ok(())
    }

    /// Fails unless the buffer ends exactly at `total`.
    pub(crate) fn expect_len(&self, total: usize) -> Result<()> {
        self.require(total)?;
        if self.bytes.len() > total {
            return Err(self.format_error(total, format!("{} unexpected trailing bytes", self.bytes.len() - total)));
        }
        Ok(())
    }

    pub(crate) fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        self.require(self.pos + N)?;
        let out = self.bytes[self.pos..self.pos + N].try_into().expect("length checked");
        self.pos += N;
        Ok(out)
    }

    pub(crate) fn u32_le(&mut self) -> Result<u32> {
        self.take().map(u32::from_le_bytes)
    }

    pub(crate) fn i32_le(&mut self) -> Result<i32> {
        self.take().map(i32::from_le_bytes)
    }

    pub(crate) fn f32_le(&mut self) -> Result<f32> {
        self.take().map(f32::from_le_bytes)
    }

    pub(crate) fn f64_le(&mut self) -> Result<f64> {
        self.take().map(f64::from_le_bytes)
    }

    pub(crate) fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }

    pub(crate) fn advance(&mut self, n: usize) {
        self.pos += n;
    }
}
