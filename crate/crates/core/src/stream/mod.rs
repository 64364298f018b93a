//! Class-incremental task streams consumed in a single pass.

mod idx;
mod sample;
mod synthetic;
mod task;

pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx_stream, load_idx_stream_with_test, parse_idx_images,
    parse_idx_labels, partition_classes, IdxImages, IMAGES_MAGIC, LABELS_MAGIC,
};
pub use sample::{to_batch, to_distillation_batch, FeatureShape, Sample};
pub use synthetic::{make_synthetic_stream, SyntheticSpec};
pub use task::{lambda_ratio, Cursor, IncomingBatch, Task, TaskStream};
