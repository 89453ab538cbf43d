//! HTTP facade and file-backed persistence for lifelog review.

pub mod api;
pub mod store;

use std::fs;
use std::path::{Path, PathBuf};

use footprint_core::ingest::{parse_image_manifest, IngestManifest};
use footprint_core::pipeline::{process_day, ChannelTexts, GpsFormat, PipelineError, PipelineParams};

pub use api::{router, serve, AppState};
pub use store::{IngestSummary, MediaFile, Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("manifest {0} names no channel file")]
    NoChannels(PathBuf),
}

/// A manifest with every referenced file read into memory.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub manifest: IngestManifest,
    pub texts: ChannelTexts,
    pub media: Vec<MediaFile>,
    pub warnings: Vec<String>,
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })
}

/// Reads a manifest and its channel files, resolving paths against the
/// manifest's directory. Image files named by the image manifest are loaded
/// when present; missing ones only produce a warning.
pub fn load_manifest(path: &Path) -> Result<LoadedManifest, LoadError> {
    let text = read(path)?;
    let manifest: IngestManifest =
        serde_json::from_str(&text).map_err(|e| LoadError::Manifest { path: path.to_path_buf(), reason: e.to_string() })?;
    if !manifest.has_channel() {
        return Err(LoadError::NoChannels(path.to_path_buf()));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let load = |rel: &Option<String>| rel.as_ref().map(|r| read(&base.join(r))).transpose();

    let texts = ChannelTexts {
        gps: load(&manifest.gps_path)?,
        gps_format: manifest.gps_path.as_deref().map(GpsFormat::from_path).unwrap_or_default(),
        context: load(&manifest.context_path)?,
        images: load(&manifest.images_path)?,
        coverage: load(&manifest.coverage_path)?,
    };

    let mut media = Vec::new();
    let mut warnings = Vec::new();
    if let (Some(images_rel), Some(images_text)) = (&manifest.images_path, &texts.images) {
        let image_dir = base.join(images_rel).parent().map(Path::to_path_buf).unwrap_or_else(|| base.to_path_buf());
        // a malformed manifest is reported by the pipeline, not here
        let images = parse_image_manifest(images_text, manifest.date).unwrap_or_default();
        for img in images {
            match fs::read(image_dir.join(&img.path)) {
                Ok(bytes) => media.push(MediaFile { path: img.path, bytes }),
                Err(_) => warnings.push(format!("image file {} not found; metadata only", img.path)),
            }
        }
    }
    Ok(LoadedManifest { manifest, texts, media, warnings })
}

#[derive(Debug, thiserror::Error)]
pub enum IngestFailure {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Runs the full pipeline for a loaded manifest and persists the result.
pub fn ingest_loaded(
    store: &Store,
    loaded: &LoadedManifest,
    params: &PipelineParams,
    force: bool,
) -> Result<IngestSummary, IngestFailure> {
    if store.has_day(loaded.manifest.date) && !force {
        return Err(StoreError::AlreadyIngested(loaded.manifest.date).into());
    }
    let mut artifacts = process_day(loaded.manifest.window(), &loaded.texts, params)?;
    artifacts.warnings.extend(loaded.warnings.iter().cloned());
    Ok(store.write_day(&artifacts, &loaded.media, force)?)
}
