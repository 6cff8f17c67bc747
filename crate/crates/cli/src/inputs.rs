use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use stabilikit::io::{load_take, read_model, MANIFEST_SUFFIX};
use stabilikit::stability::ImageCom;
use stabilikit::take::Take;
use stabilikit::{Error, Result};

use crate::{ImageComArgs, ImageComSource};

/// Manifest files named on the command line, with directories expanded
/// to their `*.take.json` entries in name order.
pub fn manifests(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::Io { path: p.clone(), source: e })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(MANIFEST_SUFFIX)))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig(format!("no take manifests found in {inputs:?}")));
    }
    Ok(out)
}

pub struct Loaded {
    pub takes: Vec<Take>,
    /// (take id, reason)
    pub excluded: Vec<(String, String)>,
}

/// Loads every take; excluded takes are set aside with their reason.
pub fn load_all(inputs: &[PathBuf]) -> Result<Loaded> {
    let mut takes = Vec::new();
    let mut excluded = Vec::new();
    for m in manifests(inputs)? {
        match load_take(&m) {
            Ok(t) => takes.push(t),
            Err(Error::Excluded { take, reason }) => excluded.push((take, reason)),
            Err(e) => return Err(e),
        }
    }
    if takes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Loaded { takes, excluded })
}

pub fn model_path(dir: &Path, subject: &str) -> PathBuf {
    dir.join(format!("com_{subject}.stbk"))
}

pub fn image_com(args: &ImageComArgs) -> Result<ImageCom> {
    match args.image_com {
        ImageComSource::Provided => Ok(ImageCom::Provided),
        ImageComSource::Dempster => Ok(ImageCom::Dempster),
        ImageComSource::Comnet => {
            let path = args
                .models
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("--image-com comnet needs --models".into()))?;
            load_models(path)
        }
    }
}

/// A single model file, or a directory of per-subject models.
pub fn load_models(path: &Path) -> Result<ImageCom> {
    if !path.is_dir() {
        return Ok(ImageCom::ComNet(Arc::new(read_model(path)?)));
    }
    let mut models = BTreeMap::new();
    let entries = fs::read_dir(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    for e in entries.filter_map(|e| e.ok()) {
        let name = e.file_name().to_string_lossy().into_owned();
        if let Some(subject) = name.strip_prefix("com_").and_then(|n| n.strip_suffix(".stbk")) {
            models.insert(subject.to_string(), read_model(&e.path())?);
        }
    }
    if models.is_empty() {
        return Err(Error::InvalidConfig(format!("no com_<subject>.stbk models in {}", path.display())));
    }
    Ok(ImageCom::ComNetBySubject(Arc::new(models)))
}
