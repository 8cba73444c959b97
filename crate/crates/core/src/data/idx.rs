use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IdxError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_SIDE: usize = 28;
const IMAGE_LEN: usize = IMAGE_SIDE * IMAGE_SIDE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    /// Standard MNIST file names `(images, labels)`.
    pub fn file_names(self) -> (&'static str, &'static str) {
        match self {
            Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
            Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
        }
    }
}

/// 28x28 grayscale images in `[0, 1]` with digit labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageDataset {
    pixels: Vec<f64>,
    labels: Vec<u8>,
    split: Option<Split>,
}

impl ImageDataset {
    /// `pixels` holds the images back to back, row-major.
    pub fn new(pixels: Vec<f64>, labels: Vec<u8>, split: Option<Split>) -> Result<Self> {
        if pixels.len() != labels.len() * IMAGE_LEN {
            return Err(Error::shape("dataset pixels", labels.len() * IMAGE_LEN, pixels.len()));
        }
        if let Some(i) = labels.iter().position(|&l| l > 9) {
            return Err(Error::Argument(format!("label {} at index {i} is not a digit", labels[i])));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Argument("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self { pixels, labels, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn split(&self) -> Option<Split> {
        self.split
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn image(&self, i: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((IMAGE_SIDE, IMAGE_SIDE), &self.pixels[i * IMAGE_LEN..(i + 1) * IMAGE_LEN])
            .expect("image slice has 28x28 entries")
    }

    /// The first `n` items (or all of them).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            pixels: self.pixels[..n * IMAGE_LEN].to_vec(),
            labels: self.labels[..n].to_vec(),
            split: self.split,
        }
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * IMAGE_LEN);
        for &i in indices {
            pixels.extend_from_slice(&self.pixels[i * IMAGE_LEN..(i + 1) * IMAGE_LEN]);
        }
        Self {
            pixels,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split: self.split,
        }
    }

    pub fn from_images(images: &[Array2<f64>], labels: Vec<u8>) -> Result<Self> {
        let mut pixels = Vec::with_capacity(images.len() * IMAGE_LEN);
        for img in images {
            if img.dim() != (IMAGE_SIDE, IMAGE_SIDE) {
                return Err(Error::shape("image side", IMAGE_SIDE, img.nrows()));
            }
            pixels.extend(img.iter().copied());
        }
        Self::new(pixels, labels, None)
    }
}

struct Reader<'a> {
    file: String,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u32(&mut self, field: &'static str) -> Result<u32, IdxError> {
        let end = self.pos + 4;
        let b = self.bytes.get(self.pos..end).ok_or_else(|| IdxError::Truncated {
            file: self.file.clone(),
            field,
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn body(&self, len: usize, field: &'static str) -> Result<&'a [u8], IdxError> {
        self.bytes
            .get(self.pos..self.pos + len)
            .ok_or_else(|| IdxError::Truncated {
                file: self.file.clone(),
                field,
            })
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn check_magic(r: &mut Reader<'_>, expected: u32) -> Result<(), IdxError> {
    let found = r.u32("magic")?;
    if found != expected {
        return Err(IdxError::Magic {
            file: r.file.clone(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Parses an IDX image file into `[0, 1]` pixels.
pub fn parse_images(file: &str, bytes: &[u8]) -> Result<(usize, Vec<f64>), IdxError> {
    let mut r = Reader {
        file: file.to_string(),
        bytes,
        pos: 0,
    };
    check_magic(&mut r, IMAGE_MAGIC)?;
    let count = r.u32("image count")? as usize;
    for field in ["rows", "cols"] {
        let n = r.u32(field)? as usize;
        if n != IMAGE_SIDE {
            return Err(IdxError::Dimension {
                file: r.file.clone(),
                field,
                expected: IMAGE_SIDE as u32,
                found: n as u32,
            });
        }
    }
    let body = r.body(count * IMAGE_LEN, "pixels")?;
    Ok((count, body.iter().map(|&b| f64::from(b) / 255.0).collect()))
}

pub fn parse_labels(file: &str, bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    let mut r = Reader {
        file: file.to_string(),
        bytes,
        pos: 0,
    };
    check_magic(&mut r, LABEL_MAGIC)?;
    let count = r.u32("label count")? as usize;
    let body = r.body(count, "labels")?;
    if let Some(index) = body.iter().position(|&l| l > 9) {
        return Err(IdxError::Label {
            file: r.file.clone(),
            index,
            value: body[index],
        });
    }
    Ok(body.to_vec())
}

/// Loads an IDX image file and its label file.
pub fn load_mnist(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<ImageDataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let (count, pixels) = parse_images(&ip.display().to_string(), &read(ip)?)?;
    let labels = parse_labels(&lp.display().to_string(), &read(lp)?)?;
    if labels.len() != count {
        return Err(IdxError::CountMismatch {
            images: count,
            labels: labels.len(),
        }
        .into());
    }
    Ok(ImageDataset {
        pixels,
        labels,
        split: None,
    })
}

/// Loads one split from a directory holding the standard MNIST file names.
pub fn load_mnist_split(dir: impl AsRef<Path>, split: Split) -> Result<ImageDataset> {
    let (images, labels) = split.file_names();
    let dir = dir.as_ref();
    let mut ds = load_mnist(dir.join(images), dir.join(labels))?;
    ds.split = Some(split);
    Ok(ds)
}

/// Paths of all four standard files under `dir`.
pub fn mnist_paths(dir: impl AsRef<Path>) -> Vec<PathBuf> {
    [Split::Train, Split::Test]
        .iter()
        .flat_map(|s| {
            let (i, l) = s.file_names();
            [dir.as_ref().join(i), dir.as_ref().join(l)]
        })
        .collect()
}
