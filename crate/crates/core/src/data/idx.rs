//! MNIST's IDX container: big-endian `u32` magic, big-endian `u32` extents,
//! then unsigned bytes.

use std::path::Path;

use super::{DataError, Dataset, Result, Targets};
use crate::engine::Tensor;

/// `0x00000803`: unsigned bytes, three dimensions.
pub const IDX_IMAGES_MAGIC: u32 = 2051;
/// `0x00000801`: unsigned bytes, one dimension.
pub const IDX_LABELS_MAGIC: u32 = 2049;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DataError::Truncated {
            expected: at + 4,
            found: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let found = be_u32(bytes, 0)?;
    if found != expected {
        return Err(DataError::BadMagic { expected, found });
    }
    Ok(())
}

fn payload(bytes: &[u8], header: usize, len: usize) -> Result<&[u8]> {
    let expected = header + len;
    if bytes.len() != expected {
        return Err(DataError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    Ok(&bytes[header..])
}

/// Returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    check_magic(bytes, IDX_IMAGES_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let pixels = payload(bytes, 16, n * rows * cols)?;
    Ok((n, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    check_magic(bytes, IDX_LABELS_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    payload(bytes, 8, n)
}

/// Loads an image/label file pair. Pixels are scaled to `[0, 1]` and each
/// image is flattened row-major to `rows * cols` features.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img_bytes = read(images_path)?;
    let lbl_bytes = read(labels_path)?;
    let (n, rows, cols, pixels) = parse_idx_images(&img_bytes)?;
    let labels = parse_idx_labels(&lbl_bytes)?;
    if labels.len() != n {
        return Err(DataError::CountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    let features = Tensor::new(
        vec![n, rows * cols],
        pixels.iter().map(|&p| p as f64 / 255.0).collect(),
    )
    .expect("length checked by parser");
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1).max(10);
    Dataset::new(features, Targets::Classes { labels, classes })
}

/// Writes `[n, rows * cols]` features in `[0, 1]` as an IDX image file.
/// Values are mapped back with `round(x * 255)`.
pub fn write_idx_images(path: &Path, ds: &Dataset, rows: usize, cols: usize) -> Result<()> {
    let (n, d) = ds
        .features
        .dims2()
        .map_err(|e| DataError::InvalidArgument(e.to_string()))?;
    if d != rows * cols {
        return Err(DataError::InvalidArgument(format!("{d} features is not {rows}x{cols}")));
    }
    let mut out = Vec::with_capacity(16 + n * d);
    for v in [IDX_IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for &x in ds.features.data() {
        if !(0.0..=1.0).contains(&x) {
            return Err(DataError::InvalidArgument(format!("pixel {x} outside [0, 1]")));
        }
        out.push((x * 255.0).round() as u8);
    }
    write(path, &out)
}

pub fn write_idx_labels(path: &Path, ds: &Dataset) -> Result<()> {
    let labels = ds
        .labels()
        .ok_or_else(|| DataError::InvalidArgument("dataset has no class labels".into()))?;
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        let b = u8::try_from(l).map_err(|_| DataError::InvalidArgument(format!("label {l} > 255")))?;
        out.push(b);
    }
    write(path, &out)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_file(n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        for x in [IDX_IMAGES_MAGIC, n, rows, cols] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend_from_slice(pixels);
        v
    }

    fn label_file(labels: &[u8]) -> Vec<u8> {
        let mut v = IDX_LABELS_MAGIC.to_be_bytes().to_vec();
        v.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        v.extend_from_slice(labels);
        v
    }

    #[test]
    fn magic_constants_match_hex_form() {
        assert_eq!(IDX_IMAGES_MAGIC, 0x0000_0803);
        assert_eq!(IDX_LABELS_MAGIC, 0x0000_0801);
    }

    #[test]
    fn single_white_image() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        std::fs::write(&ip, image_file(1, 28, 28, &[255; 784])).unwrap();
        std::fs::write(&lp, label_file(&[7])).unwrap();
        let ds = load_mnist_idx(&ip, &lp).unwrap();
        assert_eq!(ds.features.shape(), &[1, 784]);
        assert!(ds.features.data().iter().all(|&x| x == 1.0));
        assert_eq!(ds.labels().unwrap(), &[7]);
    }

    #[test]
    fn wrong_magic_for_labels() {
        let mut bytes = label_file(&[1, 2]);
        bytes[..4].copy_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        assert_eq!(
            parse_idx_labels(&bytes).unwrap_err(),
            DataError::BadMagic {
                expected: 2049,
                found: 2051
            }
        );
    }

    #[test]
    fn truncated_and_mismatched() {
        let bytes = image_file(2, 2, 2, &[0; 7]);
        assert!(matches!(parse_idx_images(&bytes), Err(DataError::Truncated { .. })));
        assert!(matches!(parse_idx_images(&bytes[..6]), Err(DataError::Truncated { .. })));

        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        std::fs::write(&ip, image_file(2, 1, 1, &[0, 1])).unwrap();
        std::fs::write(&lp, label_file(&[1])).unwrap();
        assert_eq!(
            load_mnist_idx(&ip, &lp).unwrap_err(),
            DataError::CountMismatch { images: 2, labels: 1 }
        );
    }
}
