//! Synthetic two-blob embeddings for smoke tests and demos.
//!
//! Bona fide rows are drawn from `N(-s/2 * 1, I)` and attack rows from
//! `N(+s/2 * 1, I)`: on every axis the class means are `s` standard deviations
//! apart.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embedding::{Dataset, EmbeddingSet, SampleMeta};
use crate::manifest::{Label, Manifest, PaiSpecies, Partition, SampleRecord};

/// Attack species assigned round-robin to synthetic attack samples.
pub const SYNTH_SPECIES: [PaiSpecies; 3] = [
    PaiSpecies::Printed,
    PaiSpecies::ContactLensTextured,
    PaiSpecies::Cadaver,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub dim: usize,
    pub per_class: usize,
    /// Per-axis distance between class means, in standard deviations.
    pub separation: f64,
}

impl BlobSpec {
    pub fn new(dim: usize, per_class: usize, separation: f64) -> Self {
        BlobSpec {
            dim,
            per_class,
            separation,
        }
    }
}

fn draw_row(rng: &mut ChaCha8Rng, dim: usize, offset: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z + offset
        })
        .collect()
}

/// Per-axis mean of the attack class (bona fide uses the negation).
pub fn axis_offset(spec: &BlobSpec) -> f64 {
    spec.separation / 2.0
}

/// `per_class` bona fide rows followed by `per_class` attack rows.
pub fn blobs(spec: &BlobSpec, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = axis_offset(spec);
    let mut samples = Vec::with_capacity(2 * spec.per_class);
    let mut clean = Vec::with_capacity(2 * spec.per_class * spec.dim);
    for label in [Label::BonaFide, Label::Attack] {
        let sign = if label == Label::Attack { 1.0 } else { -1.0 };
        for i in 0..spec.per_class {
            let pai_species = match label {
                Label::BonaFide => PaiSpecies::None,
                Label::Attack => SYNTH_SPECIES[i % SYNTH_SPECIES.len()].clone(),
            };
            samples.push(SampleMeta {
                sample_id: format!("{}-{i:05}", if sign > 0.0 { "at" } else { "bf" }),
                label,
                pai_species,
            });
            clean.extend(draw_row(&mut rng, spec.dim, sign * offset));
        }
    }
    Dataset::from_rows(spec.dim, samples, clean)
}

/// A manifest plus embedding file holding train/val/test blob partitions with
/// the given per-class counts.
pub fn blob_fixture(
    dim: usize,
    per_class: [usize; 3],
    separation: f64,
    seed: u64,
) -> (Manifest, EmbeddingSet) {
    let mut records = Vec::new();
    let mut sample_ids = Vec::new();
    let mut vectors = Vec::new();
    for (k, (partition, n)) in Partition::ALL.iter().zip(per_class).enumerate() {
        let data = blobs(
            &BlobSpec::new(dim, n, separation),
            seed.wrapping_add(k as u64),
        );
        for (i, meta) in data.samples.iter().enumerate() {
            let id = format!("{}-{}", partition.as_str(), meta.sample_id);
            records.push(SampleRecord {
                sample_id: id.clone(),
                label: meta.label,
                pai_species: meta.pai_species.clone(),
                partition: *partition,
                sensor: "synthetic".into(),
                source_path: format!("synthetic/{id}.png"),
            });
            sample_ids.push(id);
            vectors.extend(data.clean_row(i).iter().map(|&v| v as f32));
        }
    }
    let manifest = Manifest::new(records).expect("generated ids are unique");
    let set = EmbeddingSet {
        backbone_id: "synthetic-blobs".into(),
        dim,
        sample_ids,
        vectors,
        augmented_replicas: 0,
    };
    (manifest, set)
}
