//! IDX files: big-endian, magic `0x00000803` for `u8` images
//! (count, rows, cols, pixels) and `0x00000801` for `u8` labels (count, labels).

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use super::sample::{FeatureShape, Sample};
use super::task::{Task, TaskStream};
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` pixels.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            offset: offset as u64,
            message: format!("truncated header: need 4 bytes, file has {}", bytes.len()),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = read_u32(bytes, 0)?;
    if magic != expected {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic number {magic:#010x}, expected {expected:#010x}"),
        });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::Format {
            offset: (16 + body.len()) as u64,
            message: format!(
                "truncated image data: expected {need} pixel bytes, found {}",
                body.len()
            ),
        });
    }
    Ok(IdxImages {
        rows,
        cols,
        pixels: body[..need].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Format {
            offset: (8 + body.len()) as u64,
            message: format!("truncated label data: expected {count} labels, found {}", body.len()),
        });
    }
    Ok(body[..count].to_vec())
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.count() as u32).to_be_bytes());
    out.extend_from_slice(&(images.rows as u32).to_be_bytes());
    out.extend_from_slice(&(images.cols as u32).to_be_bytes());
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

type Record = (Vec<f64>, usize);

/// Records from an image/label file pair, pixels scaled to `[0, 1]`.
fn load_records(images_path: &Path, labels_path: &Path) -> Result<(FeatureShape, Vec<Record>)> {
    let images = parse_idx_images(&read_file(images_path)?)?;
    let labels = parse_idx_labels(&read_file(labels_path)?)?;
    if images.count() != labels.len() {
        return Err(Error::Format {
            offset: 4,
            message: format!("{} images but {} labels", images.count(), labels.len()),
        });
    }
    let shape = FeatureShape::Image {
        rows: images.rows,
        cols: images.cols,
    };
    let px = images.rows * images.cols;
    let records = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let features = images.pixels[i * px..(i + 1) * px]
                .iter()
                .map(|&p| p as f64 / 255.0)
                .collect();
            (features, y as usize)
        })
        .collect();
    Ok((shape, records))
}

/// Splits the sorted class list into `num_tasks` contiguous groups; when the
/// count does not divide evenly the leading groups get one extra class.
pub fn partition_classes(classes: &BTreeSet<usize>, num_tasks: usize) -> Result<Vec<BTreeSet<usize>>> {
    if num_tasks == 0 || num_tasks > classes.len() {
        return Err(Error::precondition(format!(
            "cannot split {} classes into {num_tasks} tasks",
            classes.len()
        )));
    }
    let sorted: Vec<usize> = classes.iter().copied().collect();
    let base = sorted.len() / num_tasks;
    let extra = sorted.len() % num_tasks;
    let mut groups = Vec::with_capacity(num_tasks);
    let mut start = 0;
    for g in 0..num_tasks {
        let len = base + usize::from(g < extra);
        groups.push(sorted[start..start + len].iter().copied().collect());
        start += len;
    }
    Ok(groups)
}

/// Class-incremental stream from an IDX training pair. Test sets are empty.
pub fn load_idx_stream(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    num_tasks: usize,
    batch_size: usize,
    seed: u64,
) -> Result<TaskStream> {
    build_idx_stream(
        images_path.as_ref(),
        labels_path.as_ref(),
        None,
        num_tasks,
        batch_size,
        seed,
    )
}

/// As [`load_idx_stream`], with held-out test records split by the same class partition.
pub fn load_idx_stream_with_test(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    test_images_path: impl AsRef<Path>,
    test_labels_path: impl AsRef<Path>,
    num_tasks: usize,
    batch_size: usize,
    seed: u64,
) -> Result<TaskStream> {
    build_idx_stream(
        images_path.as_ref(),
        labels_path.as_ref(),
        Some((test_images_path.as_ref(), test_labels_path.as_ref())),
        num_tasks,
        batch_size,
        seed,
    )
}

fn build_idx_stream(
    images_path: &Path,
    labels_path: &Path,
    test: Option<(&Path, &Path)>,
    num_tasks: usize,
    batch_size: usize,
    seed: u64,
) -> Result<TaskStream> {
    let (shape, train) = load_records(images_path, labels_path)?;
    let test = match test {
        Some((i, l)) => {
            let (test_shape, recs) = load_records(i, l)?;
            if test_shape != shape {
                return Err(Error::contract(format!(
                    "test images {test_shape:?} differ from training images {shape:?}"
                )));
            }
            recs
        }
        None => Vec::new(),
    };
    let classes: BTreeSet<usize> = train.iter().map(|r| r.1).collect();
    let groups = partition_classes(&classes, num_tasks)?;
    let task_of = |label: usize| groups.iter().position(|g| g.contains(&label));

    let mut tasks: Vec<Task> = groups
        .iter()
        .enumerate()
        .map(|(id, g)| Task {
            id,
            train: Vec::new(),
            test: Vec::new(),
            classes: g.clone(),
        })
        .collect();
    let n_train = train.len();
    for (i, (features, label)) in train.into_iter().enumerate() {
        let t = task_of(label).expect("every training label belongs to a group");
        tasks[t].train.push(Sample::new(i, features, shape, label, t));
    }
    for (i, (features, label)) in test.into_iter().enumerate() {
        let t = task_of(label)
            .ok_or_else(|| Error::contract(format!("test label {label} does not occur in the training file")))?;
        tasks[t].test.push(Sample::new(n_train + i, features, shape, label, t));
    }
    TaskStream::new(tasks, batch_size, seed)
}
