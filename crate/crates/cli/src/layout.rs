//! File naming inside pipeline directories.

use std::fs;
use std::path::{Path, PathBuf};

use fluidest::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Flow,
    Image,
    Tracer,
}

impl Kind {
    fn prefix(self) -> &'static str {
        match self {
            Kind::Flow => "flow_",
            Kind::Image => "img_",
            Kind::Tracer => "tracer_",
        }
    }

    fn extension(self) -> &'static str {
        match self {
            Kind::Flow => ".flo",
            Kind::Image | Kind::Tracer => ".pgm",
        }
    }
}

pub fn frame_name(kind: Kind, t: usize) -> String {
    format!("{}{t:04}{}", kind.prefix(), kind.extension())
}

/// Frame files of one kind in `dir`, ordered by frame number. Numbers must
/// run from 0 without gaps.
pub fn list_frames(dir: &Path, kind: Kind) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut frames = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let number = name
            .strip_prefix(kind.prefix())
            .and_then(|s| s.strip_suffix(kind.extension()))
            .and_then(|s| s.parse::<usize>().ok());
        if let Some(n) = number {
            frames.push((n, entry.path()));
        }
    }
    frames.sort();
    if let Some(pos) = frames.iter().enumerate().position(|(i, (n, _))| i != *n) {
        return Err(Error::Format {
            path: dir.to_path_buf(),
            offset: 0,
            message: format!("frame {pos} of the {} sequence is missing", kind.prefix().trim_end_matches('_')),
        });
    }
    if frames.is_empty() {
        return Err(Error::Format {
            path: dir.to_path_buf(),
            offset: 0,
            message: format!("no {}NNNN{} files", kind.prefix(), kind.extension()),
        });
    }
    Ok(frames.into_iter().map(|(_, p)| p).collect())
}
