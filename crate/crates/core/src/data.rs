//! Fashion-MNIST in IDX format: loading, normalization, batching.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::diffcore::Matrix;
use crate::error::{Error, Result};
use crate::rng;

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;
pub const DATA_DIR_ENV: &str = "WPNN_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "data/fashion-mnist";
pub const CLASSES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Images as `n × (rows·cols)` row-major pixels, one image per row.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageDataset {
    pub images: Vec<f32>,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
    pub split: Split,
    /// Set once a normalizer has been applied.
    pub normalized: Option<Normalizer>,
}

impl ImageDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[f32] {
        &self.images[i * self.dim()..(i + 1) * self.dim()]
    }

    /// The first `n` items (or all of them).
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self { images: self.images[..n * self.dim()].to_vec(), labels: self.labels[..n].to_vec(), ..self.clone() }
    }

    /// Selected images as a `dim × B` matrix with one sample per column.
    pub fn batch(&self, idx: &[usize]) -> (Matrix, Vec<usize>) {
        let d = self.dim();
        let b = idx.len();
        let mut m = Matrix::zeros(d, b);
        let data = m.as_mut_slice();
        for (j, &i) in idx.iter().enumerate() {
            for (p, &v) in self.image(i).iter().enumerate() {
                data[p * b + j] = v as f64;
            }
        }
        (m, idx.iter().map(|&i| self.labels[i] as usize).collect())
    }
}

fn read_u32(buf: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([buf[at], buf[at + 1], buf[at + 2], buf[at + 3]])
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out).map_err(|e| Error::Parse { path: path.into(), field: "gzip stream", msg: e.to_string() })?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Reads an image file and its label file. Accepts raw or gzip-compressed
/// files; pixels are scaled to `[0, 1]`.
pub fn load_idx(path_images: &Path, path_labels: &Path, split: Split) -> Result<ImageDataset> {
    let img = read_all(path_images)?;
    let lab = read_all(path_labels)?;
    let perr = |path: &Path, field: &'static str, msg: String| Error::Parse { path: path.into(), field, msg };

    if img.len() < 16 {
        return Err(perr(path_images, "header", format!("{} bytes, need 16", img.len())));
    }
    if read_u32(&img, 0) != IMAGE_MAGIC {
        return Err(perr(path_images, "magic", format!("expected {IMAGE_MAGIC}, found {}", read_u32(&img, 0))));
    }
    let (n, rows, cols) = (read_u32(&img, 4) as usize, read_u32(&img, 8) as usize, read_u32(&img, 12) as usize);
    let need = 16 + n * rows * cols;
    if img.len() < need {
        return Err(perr(path_images, "pixel data", format!("truncated: {} of {need} bytes", img.len())));
    }

    if lab.len() < 8 {
        return Err(perr(path_labels, "header", format!("{} bytes, need 8", lab.len())));
    }
    if read_u32(&lab, 0) != LABEL_MAGIC {
        return Err(perr(path_labels, "magic", format!("expected {LABEL_MAGIC}, found {}", read_u32(&lab, 0))));
    }
    let n_labels = read_u32(&lab, 4) as usize;
    if n_labels != n {
        return Err(perr(path_labels, "item count", format!("{n_labels} labels for {n} images")));
    }
    if lab.len() < 8 + n {
        return Err(perr(path_labels, "label data", format!("truncated: {} of {} bytes", lab.len(), 8 + n)));
    }
    let labels = lab[8..8 + n].to_vec();
    if let Some(bad) = labels.iter().find(|&&l| l as usize >= CLASSES) {
        return Err(perr(path_labels, "label value", format!("{bad} outside 0..{CLASSES}")));
    }
    let images = img[16..need].iter().map(|&p| p as f32 / 255.0).collect();
    Ok(ImageDataset { images, labels, rows, cols, split, normalized: None })
}

/// Writes pixels (`0..=255`) and labels as raw IDX files.
pub fn write_idx(path_images: &Path, path_labels: &Path, pixels: &[u8], labels: &[u8], rows: usize, cols: usize) -> Result<()> {
    if pixels.len() != labels.len() * rows * cols {
        return Err(Error::Shape(format!("{} pixels for {} images of {rows}×{cols}", pixels.len(), labels.len())));
    }
    let mut f = File::create(path_images)?;
    for v in [IMAGE_MAGIC, labels.len() as u32, rows as u32, cols as u32] {
        f.write_all(&v.to_be_bytes())?;
    }
    f.write_all(pixels)?;
    let mut f = File::create(path_labels)?;
    for v in [LABEL_MAGIC, labels.len() as u32] {
        f.write_all(&v.to_be_bytes())?;
    }
    f.write_all(labels)?;
    Ok(())
}

/// Resolves the dataset directory: explicit flag, then `WPNN_DATA_DIR`,
/// then `data/fashion-mnist`.
pub fn data_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
}

fn find(dir: &Path, stem: &str) -> Option<PathBuf> {
    [stem.to_string(), format!("{stem}.gz")].into_iter().map(|n| dir.join(n)).find(|p| p.is_file())
}

/// Loads one split of Fashion-MNIST from the canonical file names.
pub fn load_fashion_mnist(dir: &Path, split: Split) -> Result<ImageDataset> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let img = find(dir, &format!("{prefix}-images-idx3-ubyte"));
    let lab = find(dir, &format!("{prefix}-labels-idx1-ubyte"));
    match (img, lab) {
        (Some(i), Some(l)) => load_idx(&i, &l, split),
        _ => Err(Error::MissingData { dir: dir.into(), msg: format!("{prefix}-images-idx3-ubyte / {prefix}-labels-idx1-ubyte not found") }),
    }
}

/// Train and test splits, optionally truncating the training split.
pub fn load_splits(dir: &Path, train_limit: Option<usize>) -> Result<(ImageDataset, ImageDataset)> {
    let mut train = load_fashion_mnist(dir, Split::Train)?;
    if let Some(n) = train_limit {
        train = train.take(n);
    }
    Ok((train, load_fashion_mnist(dir, Split::Test)?))
}

/// Size of the training subset used by quick runs.
pub const SUBSET_TRAIN: usize = 20_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Global scale giving unit average power per pixel.
    #[default]
    UnitPower,
    /// Global mean removal and unit variance.
    Zscore,
}

/// Global normalization fitted on one split and applied to any other.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalizer {
    pub mode: NormMode,
    pub mean: f64,
    pub scale: f64,
}

impl Normalizer {
    pub fn fit(train: &ImageDataset, mode: NormMode) -> Self {
        let n = train.images.len().max(1) as f64;
        let mean = train.images.iter().map(|&v| v as f64).sum::<f64>() / n;
        let (center, power) = match mode {
            NormMode::UnitPower => (0.0, train.images.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / n),
            NormMode::Zscore => (mean, train.images.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n),
        };
        // degenerate data is left as is
        let scale = if power < 1e-12 { 1.0 } else { 1.0 / power.sqrt() };
        Self { mode, mean: center, scale }
    }

    /// Applies the normalization; a dataset already normalized by this
    /// normalizer is returned unchanged.
    pub fn apply(&self, ds: &ImageDataset) -> ImageDataset {
        if ds.normalized == Some(*self) {
            return ds.clone();
        }
        let images = ds.images.iter().map(|&v| ((v as f64 - self.mean) * self.scale) as f32).collect();
        ImageDataset { images, normalized: Some(*self), ..ds.clone() }
    }
}

/// Mean power per pixel.
pub fn mean_power(ds: &ImageDataset) -> f64 {
    ds.images.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / ds.images.len().max(1) as f64
}

/// Index batches for one epoch: a seeded permutation (or the original order
/// when `shuffle_seed` is `None`), cut into `batch_size` pieces with the
/// last short batch kept.
pub fn batch_iter(n: usize, batch_size: usize, shuffle_seed: Option<u64>, epoch: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Contract("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut rng::substream(seed, "shuffle", epoch));
    }
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
        let (i, l) = (dir.join("img"), dir.join("lab"));
        let pixels: Vec<u8> = (0..8).map(|v| v * 30).collect();
        write_idx(&i, &l, &pixels, &[3, 9], 2, 2).unwrap();
        (i, l)
    }

    #[test]
    fn fixture_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (i, l) = fixture(dir.path());
        let ds = load_idx(&i, &l, Split::Train).unwrap();
        assert_eq!((ds.len(), ds.rows, ds.cols), (2, 2, 2));
        assert_eq!(ds.labels, vec![3, 9]);
        assert_eq!(ds.image(1)[3], 210.0 / 255.0);
        assert_eq!(load_idx(&i, &l, Split::Train).unwrap(), ds);
    }

    #[test]
    fn gzip_files_load() {
        let dir = tempfile::tempdir().unwrap();
        let (i, l) = fixture(dir.path());
        let gz = dir.path().join("img.gz");
        let mut enc = flate2::write::GzEncoder::new(File::create(&gz).unwrap(), flate2::Compression::default());
        enc.write_all(&std::fs::read(&i).unwrap()).unwrap();
        enc.finish().unwrap();
        assert_eq!(load_idx(&gz, &l, Split::Test).unwrap().images, load_idx(&i, &l, Split::Test).unwrap().images);
    }

    #[test]
    fn parse_errors_name_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let (i, l) = fixture(dir.path());
        let mut bytes = std::fs::read(&l).unwrap();
        bytes[7] = 3;
        bytes.push(1);
        let bad = dir.path().join("lab3");
        std::fs::write(&bad, &bytes).unwrap();
        assert!(matches!(load_idx(&i, &bad, Split::Train), Err(Error::Parse { field: "item count", .. })));

        let mut bytes = std::fs::read(&i).unwrap();
        bytes[3] = 1;
        std::fs::write(&i, &bytes).unwrap();
        assert!(matches!(load_idx(&i, &l, Split::Train), Err(Error::Parse { field: "magic", .. })));

        let short = dir.path().join("short");
        let mut bytes = std::fs::read(&i).unwrap();
        bytes[3] = 3;
        bytes.truncate(20);
        std::fs::write(&short, &bytes).unwrap();
        assert!(matches!(load_idx(&short, &l, Split::Train), Err(Error::Parse { field: "pixel data", .. })));
    }

    #[test]
    fn missing_data_mentions_fetch_script() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_fashion_mnist(dir.path(), Split::Train).unwrap_err();
        assert!(err.to_string().contains("fetch_fashion_mnist.sh"), "{err}");
    }

    fn synthetic(values: Vec<f32>, split: Split) -> ImageDataset {
        let n = values.len() / 4;
        ImageDataset { images: values, labels: vec![0; n], rows: 2, cols: 2, split, normalized: None }
    }

    #[test]
    fn normalization_cases() {
        let zero = synthetic(vec![0.0; 8], Split::Train);
        let nz = Normalizer::fit(&zero, NormMode::UnitPower);
        assert_eq!(nz.apply(&zero).images, zero.images);

        let train = synthetic((0..40).map(|v| (v % 7) as f32 / 7.0).collect(), Split::Train);
        let norm = Normalizer::fit(&train, NormMode::UnitPower);
        let once = norm.apply(&train);
        assert!((mean_power(&once) - 1.0).abs() <= 1e-6);
        assert_eq!(norm.apply(&once), once);

        // statistics come from the training split only
        let poisoned = synthetic(vec![1e6; 8], Split::Test);
        let fitted_again = Normalizer::fit(&train, NormMode::UnitPower);
        assert_eq!(fitted_again, norm);
        assert_eq!(norm.apply(&poisoned).images[0], (1e6 * norm.scale) as f32);
    }

    #[test]
    fn batching() {
        let all = batch_iter(10, 10, None, 0).unwrap();
        assert_eq!(all, vec![(0..10).collect::<Vec<_>>()]);
        let a = batch_iter(10, 3, Some(4), 1).unwrap();
        assert_eq!(a, batch_iter(10, 3, Some(4), 1).unwrap());
        assert_eq!(a.len(), 4);
        assert_eq!(a[3].len(), 1);
        let mut flat: Vec<usize> = a.concat();
        flat.sort();
        assert_eq!(flat, (0..10).collect::<Vec<_>>());
        assert!(batch_iter(10, 0, None, 0).is_err());
    }
}
