//! Digit datasets: IDX loading, subsetting, pooling and synthetic clusters.
//!
//! Pixels are normalized to `[0, 1]` by division by 255 so they live in the
//! same box as the SOM weight vectors.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seeds::Rng;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// A labelled sample set. Vectors are stored flattened row-major;
/// `shape` is the image geometry when the data came from (or still is)
/// a raster, and is required for pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    shape: Option<(usize, usize)>,
    values: Vec<f64>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(
        dim: usize,
        shape: Option<(usize, usize)>,
        values: Vec<f64>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dataset dimension must be positive"));
        }
        if let Some((r, c)) = shape {
            if r * c != dim {
                return Err(Error::invalid(format!(
                    "shape {r}x{c} does not match dimension {dim}"
                )));
            }
        }
        if values.len() != labels.len() * dim {
            return Err(Error::invalid(format!(
                "{} values do not make {} samples of dimension {dim}",
                values.len(),
                labels.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("sample values must lie in [0, 1]"));
        }
        if labels.iter().any(|&l| l > 9) {
            return Err(Error::invalid("class ids must lie in 0..=9"));
        }
        Ok(Dataset {
            dim,
            shape,
            values,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        self.shape
    }

    #[inline]
    pub fn vector(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], u8)> {
        (0..self.len()).map(|i| (self.vector(i), self.label(i)))
    }

    /// Uniform sample of `n` items without replacement.
    pub fn subset(&self, n: usize, rng: &mut Rng) -> Result<Dataset> {
        if n > self.len() {
            return Err(Error::invalid(format!(
                "cannot take {n} of {} samples",
                self.len()
            )));
        }
        let picks = rand::seq::index::sample(rng, self.len(), n);
        let mut values = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        for i in picks {
            values.extend_from_slice(self.vector(i));
            labels.push(self.label(i));
        }
        Ok(Dataset {
            dim: self.dim,
            shape: self.shape,
            values,
            labels,
        })
    }

    /// Block-average pooling by `factor` along both image axes.
    pub fn downsample(&self, factor: usize) -> Result<Dataset> {
        if factor == 0 {
            return Err(Error::invalid("pooling factor must be positive"));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let (rows, cols) = self.shape.ok_or_else(|| {
            Error::invalid("cannot pool a dataset without image geometry")
        })?;
        if rows % factor != 0 || cols % factor != 0 {
            return Err(Error::invalid(format!(
                "image {rows}x{cols} not divisible by pooling factor {factor}"
            )));
        }
        let (new_rows, new_cols) = (rows / factor, cols / factor);
        let new_dim = new_rows * new_cols;
        let block = (factor * factor) as f64;
        let mut values = Vec::with_capacity(self.len() * new_dim);
        for i in 0..self.len() {
            let img = self.vector(i);
            for br in 0..new_rows {
                for bc in 0..new_cols {
                    let mut acc = 0.0;
                    for dr in 0..factor {
                        for dc in 0..factor {
                            acc += img[(br * factor + dr) * cols + (bc * factor + dc)];
                        }
                    }
                    values.push(acc / block);
                }
            }
        }
        Ok(Dataset {
            dim: new_dim,
            shape: Some((new_rows, new_cols)),
            values,
            labels: self.labels.clone(),
        })
    }
}

/// Load an IDX image/label pair. Either file may be gzip-compressed
/// (detected from content, not extension).
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let image_bytes = read_maybe_gz(images_path)?;
    let label_bytes = read_maybe_gz(labels_path)?;

    let (count, rows, cols, pixels) = parse_idx_images(images_path, &image_bytes)?;
    let labels = parse_idx_labels(labels_path, &label_bytes)?;
    if labels.len() != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: labels.len(),
        });
    }
    for (i, &l) in labels.iter().enumerate() {
        if l > 9 {
            return Err(Error::invalid(format!(
                "label byte {l} at index {i} outside 0..=9"
            )));
        }
    }

    let values = pixels.iter().map(|&b| b as f64 / 255.0).collect();
    Dataset::new(rows * cols, Some((rows, cols)), values, labels.to_vec())
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn parse_idx_images<'a>(path: &Path, bytes: &'a [u8]) -> Result<(usize, usize, usize, &'a [u8])> {
    let magic = read_be_u32(path, bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = read_be_u32(path, bytes, 4)? as usize;
    let rows = read_be_u32(path, bytes, 8)? as usize;
    let cols = read_be_u32(path, bytes, 12)? as usize;
    let needed = 16 + count * rows * cols;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            needed,
            available: bytes.len(),
        });
    }
    Ok((count, rows, cols, &bytes[16..needed]))
}

fn parse_idx_labels<'a>(path: &Path, bytes: &'a [u8]) -> Result<&'a [u8]> {
    let magic = read_be_u32(path, bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let count = read_be_u32(path, bytes, 4)? as usize;
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            needed,
            available: bytes.len(),
        });
    }
    Ok(&bytes[8..needed])
}

fn read_be_u32(path: &Path, bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            needed: end,
            available: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Serialize back to IDX bytes (images file, labels file). Inverse of
/// [`load_idx`] up to gzip wrapping: pixel bytes are recovered exactly.
pub fn to_idx_bytes(ds: &Dataset) -> Result<(Vec<u8>, Vec<u8>)> {
    let (rows, cols) = ds
        .shape()
        .ok_or_else(|| Error::invalid("dataset has no image geometry to serialize"))?;
    let mut images = Vec::with_capacity(16 + ds.len() * ds.dim());
    images.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    images.extend_from_slice(&(rows as u32).to_be_bytes());
    images.extend_from_slice(&(cols as u32).to_be_bytes());
    for i in 0..ds.len() {
        for &v in ds.vector(i) {
            images.push((v * 255.0).round() as u8);
        }
    }
    let mut labels = Vec::with_capacity(8 + ds.len());
    labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    labels.extend_from_slice(ds.labels());
    Ok((images, labels))
}

/// Synthetic test data: `k` Gaussian blobs centred on well-separated
/// corners of the unit hypercube, clipped back into the box.
///
/// Corner placement is deterministic: for small `dim` a greedy max-min
/// sweep over all corners, for large `dim` one axis block per class.
pub fn synthetic_clusters(
    k: usize,
    dim: usize,
    per_class: usize,
    spread: f64,
    rng: &mut Rng,
) -> Result<Dataset> {
    if k == 0 || k > 10 {
        return Err(Error::invalid(format!("class count {k} not in 1..=10")));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if spread <= 0.0 {
        return Err(Error::invalid("spread must be positive"));
    }
    if (1usize << dim.min(20)) < k && dim < k {
        return Err(Error::invalid(format!(
            "cannot place {k} separated corners in dimension {dim}"
        )));
    }
    let centroids = cluster_corners(k, dim);
    let noise = Normal::new(0.0, spread).expect("spread checked positive");
    let mut values = Vec::with_capacity(k * per_class * dim);
    let mut labels = Vec::with_capacity(k * per_class);
    for (class, centroid) in centroids.iter().enumerate() {
        for _ in 0..per_class {
            for &c in centroid {
                let v: f64 = c + noise.sample(rng);
                values.push(v.clamp(0.0, 1.0));
            }
            labels.push(class as u8);
        }
    }
    Dataset::new(dim, None, values, labels)
}

fn cluster_corners(k: usize, dim: usize) -> Vec<Vec<f64>> {
    if dim <= 16 {
        greedy_corners(k, dim)
    } else {
        // One coordinate block of ones per class; all pairs equidistant.
        let block = dim / k;
        (0..k)
            .map(|class| {
                let mut c = vec![0.0; dim];
                let end = if class == k - 1 { dim } else { (class + 1) * block };
                for slot in &mut c[class * block..end] {
                    *slot = 1.0;
                }
                c
            })
            .collect()
    }
}

/// Greedy max-min corner selection over all 2^dim hypercube corners,
/// starting from the origin. Ties break to the lowest corner index.
fn greedy_corners(k: usize, dim: usize) -> Vec<Vec<f64>> {
    let total = 1usize << dim;
    let corner = |mask: usize| -> Vec<f64> {
        (0..dim)
            .map(|b| if mask >> b & 1 == 1 { 1.0 } else { 0.0 })
            .collect()
    };
    let hamming = |a: usize, b: usize| (a ^ b).count_ones();
    let mut chosen = vec![0usize];
    while chosen.len() < k {
        let mut best = None;
        let mut best_score = 0;
        for mask in 0..total {
            if chosen.contains(&mask) {
                continue;
            }
            let score = chosen.iter().map(|&c| hamming(mask, c)).min().unwrap();
            if score > best_score {
                best_score = score;
                best = Some(mask);
            }
        }
        chosen.push(best.expect("k <= 2^dim corners available"));
    }
    chosen.into_iter().map(corner).collect()
}
