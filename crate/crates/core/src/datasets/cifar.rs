use std::path::Path;

use crate::ndtensor::Tensor;

use super::{Dataset, DatasetError};

pub const CIFAR_IMAGE_BYTES: usize = 3 * 32 * 32;
/// Coarse label, fine label, then channel-major RGB pixels.
pub const CIFAR_RECORD_BYTES: usize = 2 + CIFAR_IMAGE_BYTES;
const FINE_CLASSES: usize = 100;

/// Parses CIFAR-100 binary records using the fine label. With a subset,
/// only those classes are kept and relabelled by their position in the
/// list.
pub fn parse_cifar100(bytes: &[u8], subset: Option<&[usize]>) -> Result<(Tensor<f32>, Vec<usize>, usize), DatasetError> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_BYTES) {
        return Err(DatasetError::RecordSize { size: bytes.len(), record: CIFAR_RECORD_BYTES });
    }
    let mut remap = vec![None; FINE_CLASSES];
    let classes = match subset {
        None => {
            for (c, slot) in remap.iter_mut().enumerate() {
                *slot = Some(c);
            }
            FINE_CLASSES
        }
        Some([]) => return Err(DatasetError::EmptySubset),
        Some(list) => {
            for (dense, &c) in list.iter().enumerate() {
                if c >= FINE_CLASSES {
                    return Err(DatasetError::BadSubset(format!("class {c} outside [0, {FINE_CLASSES})")));
                }
                if remap[c].replace(dense).is_some() {
                    return Err(DatasetError::BadSubset(format!("class {c} listed twice")));
                }
            }
            list.len()
        }
    };
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in bytes.chunks_exact(CIFAR_RECORD_BYTES) {
        let fine = record[1] as usize;
        if fine >= FINE_CLASSES {
            return Err(DatasetError::LabelOutOfRange { label: fine, classes: FINE_CLASSES });
        }
        if let Some(dense) = remap[fine] {
            labels.push(dense);
            data.extend(record[2..].iter().map(|&p| p as f32 / 255.0));
        }
    }
    let images = Tensor::new([labels.len(), 3, 32, 32], data).expect("whole records");
    Ok((images, labels, classes))
}

pub fn load_cifar100(path: &Path, subset: Option<&[usize]>) -> Result<Dataset, DatasetError> {
    let bytes = std::fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    let (images, labels, classes) = parse_cifar100(&bytes, subset)?;
    let split = path.file_stem().and_then(|s| s.to_str()).unwrap_or("train").to_owned();
    Dataset::new("cifar100", split, images, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(fine: u8, fill: u8) -> Vec<u8> {
        let mut r = vec![fine / 5, fine];
        r.extend(std::iter::repeat_n(fill, CIFAR_IMAGE_BYTES));
        r
    }

    #[test]
    fn parses_records_channel_major() {
        let mut bytes = record(7, 0);
        bytes[2 + 1024] = 255; // first green pixel
        bytes.extend(record(42, 51));
        let (t, labels, classes) = parse_cifar100(&bytes, None).unwrap();
        assert_eq!(t.shape(), [2, 3, 32, 32]);
        assert_eq!(labels, vec![7, 42]);
        assert_eq!(classes, 100);
        assert_eq!(t.at([0, 1, 0, 0]), 1.0);
        assert_eq!(t.at([0, 0, 0, 0]), 0.0);
        assert_eq!(t.at([1, 2, 31, 31]), 0.2);
    }

    #[test]
    fn subset_reindexes_densely() {
        let bytes: Vec<u8> = [5u8, 9, 5, 3, 9, 1].iter().flat_map(|&c| record(c, c)).collect();
        let (t, labels, classes) = parse_cifar100(&bytes, Some(&[9, 5])).unwrap();
        assert_eq!(classes, 2);
        assert_eq!(labels, vec![1, 0, 1, 0]);
        assert_eq!(t.batch(), 4);
        assert_eq!(t.at([1, 0, 0, 0]), 9.0 / 255.0);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let bytes = record(1, 0);
        assert!(matches!(parse_cifar100(&bytes, Some(&[])), Err(DatasetError::EmptySubset)));
        assert!(matches!(parse_cifar100(&bytes, Some(&[1, 1])), Err(DatasetError::BadSubset(_))));
        assert!(matches!(parse_cifar100(&bytes, Some(&[100])), Err(DatasetError::BadSubset(_))));
        assert!(matches!(
            parse_cifar100(&bytes[..100], None),
            Err(DatasetError::RecordSize { size: 100, record: CIFAR_RECORD_BYTES })
        ));
        assert!(matches!(parse_cifar100(&record(100, 0), None), Err(DatasetError::LabelOutOfRange { .. })));
    }
}
