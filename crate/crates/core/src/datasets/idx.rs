use std::path::Path;

use crate::ndtensor::Tensor;

use super::{Dataset, DatasetError};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, what: &'static str) -> Result<u32, DatasetError> {
    let word = bytes.get(at..at + 4).ok_or(DatasetError::Truncated { what, expected: at + 4, actual: bytes.len() })?;
    Ok(u32::from_be_bytes(word.try_into().expect("four bytes")))
}

fn check_magic(bytes: &[u8], expected: u32, what: &'static str) -> Result<(), DatasetError> {
    let found = be_u32(bytes, 0, what)?;
    if found != expected {
        return Err(DatasetError::BadMagic { what, expected, found });
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], header: usize, len: usize, what: &'static str) -> Result<&'a [u8], DatasetError> {
    let expected = header + len;
    if bytes.len() < expected {
        return Err(DatasetError::Truncated { what, expected, actual: bytes.len() });
    }
    Ok(&bytes[header..expected])
}

/// `(N, 1, rows, cols)` pixels scaled by 1/255.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Tensor<f32>, DatasetError> {
    const WHAT: &str = "IDX images";
    check_magic(bytes, IDX_IMAGES_MAGIC, WHAT)?;
    let n = be_u32(bytes, 4, WHAT)? as usize;
    let rows = be_u32(bytes, 8, WHAT)? as usize;
    let cols = be_u32(bytes, 12, WHAT)? as usize;
    let pixels = payload(bytes, 16, n * rows * cols, WHAT)?;
    let data = pixels.iter().map(|&p| p as f32 / 255.0).collect();
    Ok(Tensor::new([n, 1, rows, cols], data).expect("extents from header"))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>, DatasetError> {
    const WHAT: &str = "IDX labels";
    check_magic(bytes, IDX_LABELS_MAGIC, WHAT)?;
    let n = be_u32(bytes, 4, WHAT)? as usize;
    Ok(payload(bytes, 8, n, WHAT)?.iter().map(|&l| l as usize).collect())
}

/// Loads an MNIST split; the split name is taken from the file name
/// (`t10k-*` is the test split).
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<Dataset, DatasetError> {
    let read = |p: &Path| std::fs::read(p).map_err(|e| DatasetError::io(p, e));
    let images = parse_idx_images(&read(images_path)?)?;
    let labels = parse_idx_labels(&read(labels_path)?)?;
    let file = images_path.file_name().and_then(|f| f.to_str()).unwrap_or("");
    let split = if file.starts_with("t10k") { "test" } else { "train" };
    Dataset::new("mnist", split, images, labels, 10)
}
