use rayon::prelude::*;

use super::{hflip_augment, load_image, DatasetManifest, Sample};
use crate::error::{shape_err, Error, Result};
use crate::tensor::{Rng, Tensor};

/// First RNG stream used for per-epoch shuffles; epoch `e` uses `SHUFFLE_STREAM + e`.
pub const SHUFFLE_STREAM: u64 = 1 << 32;

/// In-memory preprocessed samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
}

#[derive(Clone, Debug)]
pub struct Batch<T> {
    /// `[b, h, w, 1]`
    pub images: Tensor<T>,
    pub labels: Vec<usize>,
    /// Positions of the batch members within the dataset.
    pub indices: Vec<usize>,
}

impl Dataset {
    pub fn from_samples(samples: Vec<Sample>) -> Result<Self> {
        if let Some(first) = samples.first() {
            if let Some(bad) = samples.iter().find(|s| s.pixels.dims() != first.pixels.dims()) {
                return Err(shape_err!("sample {} is {}, expected {}", bad.id, bad.pixels.shape(), first.pixels.shape()));
            }
        }
        Ok(Self { samples })
    }

    /// Decodes and preprocesses the listed manifest ids to `size x size`.
    /// Decoding runs in parallel; sample order follows `ids`.
    pub fn load(manifest: &DatasetManifest, ids: &[String], size: usize) -> Result<Self> {
        let samples = ids
            .par_iter()
            .map(|id| {
                let entry = manifest
                    .entry(id)
                    .ok_or_else(|| Error::Data(format!("id {id} is not in the manifest")))?;
                let path = entry.image.as_ref().ok_or_else(|| Error::Image {
                    path: manifest.image_dir.join(id),
                    message: "no .png/.jpg/.jpeg file for this id".into(),
                })?;
                Sample::new(id.clone(), load_image(path, size)?, entry.grade)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_samples(samples)
    }

    /// Appends a horizontally flipped copy of every sample, after all originals.
    pub fn with_hflips(mut self) -> Self {
        let flips: Vec<Sample> = self.samples.iter().map(hflip_augment).collect();
        self.samples.extend(flips);
        self
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.grade.index()).collect()
    }

    pub fn image_dims(&self) -> Option<&[usize]> {
        self.samples.first().map(|s| s.pixels.dims())
    }

    /// Stacks the given samples into one batch.
    pub fn assemble<T: crate::Scalar>(&self, indices: &[usize]) -> Result<Batch<T>> {
        let parts: Vec<&Tensor<f32>> = indices.iter().map(|&i| &self.samples[i].pixels).collect();
        let images = Tensor::stack_batch(&parts)?;
        Ok(Batch {
            images: images.cast(),
            labels: indices.iter().map(|&i| self.samples[i].grade.index()).collect(),
            indices: indices.to_vec(),
        })
    }

    /// Batches in dataset order, for evaluation.
    pub fn sequential_batches<T: crate::Scalar>(&self, batch_size: usize) -> Result<impl Iterator<Item = Result<Batch<T>>> + '_> {
        let plan = chunk((0..self.len()).collect(), batch_size)?;
        Ok(plan.into_iter().map(move |idx| self.assemble(&idx)))
    }

    /// Batches in the seeded order of `epoch`.
    pub fn shuffled_batches<T: crate::Scalar>(
        &self,
        batch_size: usize,
        seed: u64,
        epoch: u64,
    ) -> Result<impl Iterator<Item = Result<Batch<T>>> + '_> {
        let plan = batch_plan(self.len(), batch_size, seed, epoch)?;
        Ok(plan.into_iter().map(move |idx| self.assemble(&idx)))
    }
}

/// Epoch-specific permutation of `0..n` cut into batches; the last batch
/// may be short.
pub fn batch_plan(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>> {
    let mut order: Vec<usize> = (0..n).collect();
    Rng::with_stream(seed, SHUFFLE_STREAM + epoch).shuffle(&mut order);
    chunk(order, batch_size)
}

fn chunk(order: Vec<usize>, batch_size: usize) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    if order.is_empty() {
        return Err(Error::Data("cannot batch an empty sample list".into()));
    }
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
