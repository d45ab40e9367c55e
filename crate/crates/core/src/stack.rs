//! On-disk image stacks.
//!
//! A stack is a pair of files: a UTF-8 TOML header (`name.toml`) and a raw
//! payload (`name.f32`) of little-endian `f32` samples, view-major then
//! row-major. The payload path is always the header path with its extension
//! replaced by `f32`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ScanGeometry;
use crate::image::RealImage;

pub const STACK_VERSION: u32 = 1;
pub const DTYPE_F32LE: &str = "f32le";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContentKind {
    Intensity,
    SqrtNormalized,
    Phase,
    Absorption,
    ZField,
    /// 0/1 region masks.
    Mask,
    /// Axial slices of a reconstructed or ground-truth `delta` volume.
    DeltaVolume,
}

impl ContentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ContentKind::Intensity => "intensity",
            ContentKind::SqrtNormalized => "sqrt-normalized",
            ContentKind::Phase => "phase",
            ContentKind::Absorption => "absorption",
            ContentKind::ZField => "z-field",
            ContentKind::Mask => "mask",
            ContentKind::DeltaVolume => "delta-volume",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackHeader {
    pub version: u32,
    pub kind: ContentKind,
    pub n_views: usize,
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub wavelength_m: f64,
    pub pixel_width_m: f64,
    pub distances_m: Vec<f64>,
    pub view_angles_rad: Vec<f64>,
}

impl StackHeader {
    /// Scan geometry recorded in the header.
    ///
    /// For volume and mask stacks the image dimensions describe slices, not
    /// the detector, so the detector shape is taken from the stored angles
    /// and distances only.
    pub fn geometry(&self) -> Result<ScanGeometry> {
        ScanGeometry::new(
            self.wavelength_m,
            self.pixel_width_m,
            self.distances_m.clone(),
            self.rows,
            self.cols,
            self.view_angles_rad.clone(),
        )
    }

    pub fn payload_len(&self) -> usize {
        4 * self.n_views * self.rows * self.cols
    }
}

pub fn payload_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("f32")
}

/// Writes `images` as one stack. All images must share dimensions.
pub fn save_stack(
    images: &[RealImage],
    geometry: &ScanGeometry,
    kind: ContentKind,
    path: &Path,
) -> Result<()> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidParameter("cannot save an empty stack".into()))?;
    let (rows, cols) = first.dims();
    if let Some((i, img)) = images.iter().enumerate().find(|(_, im)| im.dims() != (rows, cols)) {
        return Err(Error::DimensionMismatch(format!(
            "view {i} is {:?}, view 0 is {:?}",
            img.dims(),
            (rows, cols)
        )));
    }
    let header = StackHeader {
        version: STACK_VERSION,
        kind,
        n_views: images.len(),
        rows,
        cols,
        dtype: DTYPE_F32LE.into(),
        wavelength_m: geometry.wavelength_m,
        pixel_width_m: geometry.pixel_width_m,
        distances_m: geometry.distances_m.clone(),
        view_angles_rad: geometry.view_angles_rad.clone(),
    };
    let text = toml::to_string(&header).map_err(|e| Error::Header {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;

    let mut payload = Vec::with_capacity(header.payload_len());
    for img in images {
        for &v in img.as_slice() {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    let data_path = payload_path(path);
    fs::write(&data_path, payload).map_err(|e| Error::io(data_path, e))?;
    Ok(())
}

pub fn load_stack(path: &Path) -> Result<(StackHeader, Vec<RealImage>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: StackHeader = toml::from_str(&text).map_err(|e| Error::Header {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let malformed = |message: String| Error::Header {
        path: path.to_path_buf(),
        message,
    };
    if header.version != STACK_VERSION {
        return Err(malformed(format!("unsupported version {}", header.version)));
    }
    if header.dtype != DTYPE_F32LE {
        return Err(malformed(format!("unsupported dtype {:?}", header.dtype)));
    }
    if header.n_views == 0 || header.rows == 0 || header.cols == 0 {
        return Err(malformed("stack dimensions must be positive".into()));
    }

    let data_path = payload_path(path);
    let payload = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    if payload.len() != header.payload_len() {
        return Err(Error::DimensionMismatch(format!(
            "{}: header declares {} views of {}x{} ({} bytes), payload has {} bytes",
            data_path.display(),
            header.n_views,
            header.rows,
            header.cols,
            header.payload_len(),
            payload.len()
        )));
    }

    let per_view = header.rows * header.cols;
    let mut images = Vec::with_capacity(header.n_views);
    for (view, chunk) in payload.chunks_exact(4 * per_view).enumerate() {
        let mut samples = Vec::with_capacity(per_view);
        for (i, bytes) in chunk.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    index: view * per_view + i,
                });
            }
            samples.push(v as f64);
        }
        images.push(RealImage::from_raw(header.rows, header.cols, samples));
    }
    Ok((header, images))
}
