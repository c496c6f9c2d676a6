use padkit::embedding::{expected_dim, EmbeddingError, KNOWN_BACKBONES};
use padkit::manifest::{Label, PaiSpecies, Partition, SampleRecord};
use padkit::{join, read_embeddings, write_embeddings, EmbeddingSet, Manifest};
use proptest::prelude::*;

fn finite_f32() -> impl Strategy<Value = f32> {
    any::<u32>()
        .prop_map(f32::from_bits)
        .prop_filter("finite", |v| v.is_finite())
}

fn embedding_set() -> impl Strategy<Value = EmbeddingSet> {
    (1usize..24, 0usize..12, 0usize..4, "[a-z0-9-]{0,20}").prop_flat_map(|(dim, n, r, tag)| {
        let ids = prop::collection::vec("\\PC{0,10}", n);
        let vectors = prop::collection::vec(finite_f32(), n * (1 + r) * dim);
        (ids, vectors).prop_map(move |(ids, vectors)| EmbeddingSet {
            backbone_id: format!("custom-{tag}"),
            dim,
            sample_ids: ids
                .into_iter()
                .enumerate()
                .map(|(i, s)| format!("{i}{s}"))
                .collect(),
            vectors,
            augmented_replicas: r,
        })
    })
}

proptest! {
    #[test]
    fn bytes_round_trip(set in embedding_set()) {
        let bytes = set.to_bytes().unwrap();
        let back = EmbeddingSet::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back.sample_ids, &set.sample_ids);
        prop_assert_eq!(back.dim, set.dim);
        prop_assert_eq!(back.augmented_replicas, set.augmented_replicas);
        let bits = |s: &EmbeddingSet| s.vectors.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&set));
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn every_proper_prefix_is_rejected(set in embedding_set(), cut in 0.0f64..1.0) {
        let bytes = set.to_bytes().unwrap();
        let len = (bytes.len() as f64 * cut) as usize;
        let is_truncated = matches!(
            EmbeddingSet::from_bytes(&bytes[..len]),
            Err(EmbeddingError::TruncatedPayload { .. })
        );
        prop_assert!(is_truncated);
    }
}

#[test]
fn known_backbone_dims() {
    let want = [384, 768, 1024, 512, 512, 768];
    for ((name, dim), w) in KNOWN_BACKBONES.iter().zip(want) {
        assert_eq!(*dim, w);
        assert_eq!(expected_dim(name), Some(w));
    }
    assert_eq!(expected_dim("clip-vit-l14-laion400m_e32"), Some(768));
    assert_eq!(expected_dim("CLIP-ViT-B32"), Some(512));
    assert_eq!(expected_dim("dinov2-vitb14x"), None);
    assert_eq!(expected_dim("resnet50"), None);
}

#[test]
fn writer_refuses_invalid_sets() {
    let good = EmbeddingSet {
        backbone_id: "dinov2-vitb14".into(),
        dim: 768,
        sample_ids: vec!["a".into()],
        vectors: vec![0.0; 768],
        augmented_replicas: 0,
    };
    good.validate().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.bin");

    let wrong_dim = EmbeddingSet {
        dim: 16,
        vectors: vec![0.0; 16],
        ..good.clone()
    };
    assert!(matches!(
        write_embeddings(&wrong_dim, &path),
        Err(EmbeddingError::DimMismatch {
            expected: 768,
            found: 16,
            ..
        })
    ));
    let short = EmbeddingSet {
        vectors: vec![0.0; 767],
        ..good.clone()
    };
    assert!(matches!(
        short.validate(),
        Err(EmbeddingError::InvariantViolation(_))
    ));
    let dup = EmbeddingSet {
        sample_ids: vec!["a".into(), "a".into()],
        vectors: vec![0.0; 2 * 768],
        ..good.clone()
    };
    assert!(matches!(
        dup.validate(),
        Err(EmbeddingError::InvariantViolation(_))
    ));
    assert!(!path.exists());

    write_embeddings(&good, &path).unwrap();
    assert_eq!(read_embeddings(&path).unwrap(), good);
    assert!(matches!(
        read_embeddings(dir.path().join("missing.bin")),
        Err(EmbeddingError::Io(_))
    ));
}

fn record(id: &str, label: Label, partition: Partition) -> SampleRecord {
    SampleRecord {
        sample_id: id.into(),
        label,
        pai_species: match label {
            Label::Attack => PaiSpecies::Printed,
            Label::BonaFide => PaiSpecies::None,
        },
        partition,
        sensor: "s".into(),
        source_path: format!("{id}.png"),
    }
}

#[test]
fn join_follows_manifest_order_and_keeps_replicas() {
    let manifest = Manifest::new(vec![
        record("b", Label::Attack, Partition::Train),
        record("x", Label::BonaFide, Partition::Test),
        record("a", Label::BonaFide, Partition::Train),
    ])
    .unwrap();
    // Rows per sample: clean then one replica, values encode (sample, replica).
    let set = EmbeddingSet {
        backbone_id: "custom".into(),
        dim: 2,
        sample_ids: vec!["a".into(), "b".into(), "x".into()],
        vectors: vec![0.0, 0.0, 0.1, 0.1, 1.0, 1.0, 1.1, 1.1, 2.0, 2.0, 2.1, 2.1],
        augmented_replicas: 1,
    };
    let train = join(&manifest, &set, Partition::Train).unwrap();
    assert_eq!(train.len(), 2);
    assert_eq!(train.samples[0].sample_id, "b");
    assert_eq!(train.clean_row(0), &[1.0, 1.0]);
    assert_eq!(train.clean_row(1), &[0.0, 0.0]);
    assert_eq!(train.target(0), 1.0);
    assert_eq!(train.n_training_rows(), 4);
    let (row, y) = train.training_row(2);
    assert_eq!((row[0] as f32, y), (1.1, 1.0));
    let (row, y) = train.training_row(3);
    assert_eq!((row[0] as f32, y), (0.1, 0.0));
    assert_eq!(join(&manifest, &set, Partition::Val).unwrap().len(), 0);
}

#[test]
fn join_reports_missing_embeddings() {
    let manifest = Manifest::new(vec![record("ghost", Label::BonaFide, Partition::Val)]).unwrap();
    let set = EmbeddingSet {
        backbone_id: "custom".into(),
        dim: 1,
        sample_ids: vec!["a".into()],
        vectors: vec![0.5],
        augmented_replicas: 0,
    };
    assert!(matches!(
        join(&manifest, &set, Partition::Val),
        Err(EmbeddingError::MissingEmbedding(id)) if id == "ghost"
    ));
}
