//! Dataset loading, preprocessing, augmentation, splitting and batching.

mod dataset;
mod grade;
mod manifest;
mod preprocess;
mod sample;
mod split;
pub mod synthetic;

pub use dataset::{batch_plan, Batch, Dataset, SHUFFLE_STREAM};
pub use grade::DiagnosisGrade;
pub use manifest::{find_image, parse_manifest, read_manifest, DatasetManifest, ManifestEntry, IMAGE_EXTENSIONS, MANIFEST_HEADER};
pub use preprocess::{decode_rgb, load_image, preprocess, resize_bilinear, LUMA_WEIGHTS};
pub use sample::{hflip_augment, Sample, FLIP_SUFFIX};
pub use split::{split, SplitSpec, SPLIT_STREAM};
