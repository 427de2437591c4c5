//! Datasets, preprocessing, the synthetic benchmark and on-disk formats.

mod binary;
mod checkpoint;
mod dataset;
mod pgm;
mod preprocess;
mod synth;
mod tensor_file;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use dataset::{index_path, load_scanpath_dataset, write_scanpath_dataset, Dataset, ImageInfo, Split};
pub use pgm::{read_pgm, write_pgm, GrayImage};
pub use preprocess::{fit_length, preprocess, PreparedImage, MIN_SCANPATH_LEN};
pub use synth::{synth_dataset, SynthConfig};
pub use tensor_file::{decode_tensor, encode_tensor, read_tensor, write_tensor, TENSOR_MAGIC};

use crate::error::Result;
use crate::model::{resample_to_grid, RawImages};
use crate::types::GridSpec;

/// Grid-resolution grayscale inputs for every image that carries pixels.
pub fn raw_images(d: &Dataset, grid: GridSpec) -> Result<RawImages> {
    let mut out = RawImages::default();
    for img in &d.images {
        if let Some(px) = &img.pixels {
            out.images
                .insert(img.id.clone(), resample_to_grid(px, img.width, img.height, grid)?);
        }
    }
    Ok(out)
}
