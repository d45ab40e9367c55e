use std::fs;
use std::path::Path;

use xpct_core::stack::{load_stack, save_stack};
use xpct_core::{ContentKind, RealImage, RegionMask, ScanGeometry, StackHeader, Volume};

use crate::error::{CliError, CliResult};

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn save(images: &[RealImage], geometry: &ScanGeometry, kind: ContentKind, path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    Ok(save_stack(images, geometry, kind, path)?)
}

/// Loads a stack and checks its content kind.
pub fn load(path: &Path, expected: &[ContentKind]) -> CliResult<(StackHeader, Vec<RealImage>)> {
    let (header, images) = load_stack(path)?;
    if !expected.contains(&header.kind) {
        let names: Vec<&str> = expected.iter().map(|k| k.as_str()).collect();
        return Err(CliError::validation(format!(
            "{}: stack holds {}, expected {}",
            path.display(),
            header.kind.as_str(),
            names.join(" or ")
        )));
    }
    Ok((header, images))
}

pub fn load_volume(path: &Path) -> CliResult<Volume> {
    let (header, slices) = load(path, &[ContentKind::DeltaVolume])?;
    Ok(Volume::from_slices(&slices, header.pixel_width_m)?)
}

pub fn load_mask(path: &Path, shape: &[usize]) -> CliResult<RegionMask> {
    let (_, slices) = load(path, &[ContentKind::Mask])?;
    let found = vec![slices.len(), slices[0].rows(), slices[0].cols()];
    if found != shape {
        return Err(CliError::validation(format!(
            "{}: mask shape {found:?} does not match volume shape {shape:?}",
            path.display()
        )));
    }
    let samples: Vec<f64> = slices.iter().flat_map(|s| s.as_slice().iter().copied()).collect();
    let label = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Ok(RegionMask::from_samples(found, &samples, label)?)
}

/// Splits a 3D mask into per-slice images for storage.
pub fn mask_slices(mask: &RegionMask) -> Vec<RealImage> {
    let shape = mask.shape();
    let (rows, cols) = (shape[1], shape[2]);
    mask.to_samples()
        .chunks(rows * cols)
        .map(|c| RealImage::new(rows, cols, c.to_vec()).expect("chunk matches slice size"))
        .collect()
}
