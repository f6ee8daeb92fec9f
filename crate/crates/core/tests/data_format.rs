use eyedas_core::data::{load_dataset, save_dataset, split_by_tag_with_floor, synthetic_pair, SplitFloor};
use eyedas_core::experts::score_blurring;
use eyedas_core::imaging::rotate;
use eyedas_core::{augment_to_parity, split_by_tag, Label, LabeledDataset, SyntheticConfig, TagAxis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(n_3d: usize, n_2d: usize, seed: u64) -> LabeledDataset {
    SyntheticConfig {
        size: 24,
        frames: 3,
        margin_px: 4,
        ..SyntheticConfig::new(n_3d, n_2d, seed)
    }
    .generate()
    .unwrap()
}

#[test]
fn augmented_clones_are_rotated_originals() {
    let data = small(12, 5, 1);
    let seed = 77;
    let augmented = augment_to_parity(&data, seed).unwrap();
    assert_eq!(augmented.count(Label::ThreeD), 12);
    assert_eq!(augmented.count(Label::TwoD), 12);
    assert_eq!(&augmented.instances[..data.len()], &data.instances[..]);

    // Replay the documented draws: a source index, then an angle, per clone.
    let sources: Vec<_> = data.instances.iter().filter(|i| i.label == Label::TwoD).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for clone in &augmented.instances[data.len()..] {
        let src = sources[rng.gen_range(0..sources.len())];
        let angle: f64 = rng.gen_range(90.0..=180.0);
        assert!(clone.augmented);
        assert_eq!(clone.label, Label::TwoD);
        assert!(clone.id.starts_with(&src.id));
        assert_eq!((&clone.city, clone.object_class), (&src.city, src.object_class));
        for (got, orig) in clone.sequence.frames().iter().zip(src.sequence.frames()) {
            assert_eq!(got, &rotate(orig, angle).unwrap());
        }
    }
}

#[test]
fn augmentation_rejects_impossible_requests() {
    assert!(augment_to_parity(&small(3, 5, 2), 0).is_err());
    let only_3d = LabeledDataset::new(small(3, 1, 2).instances[..3].to_vec(), "x").unwrap();
    assert!(augment_to_parity(&only_3d, 0).is_err());
}

#[test]
fn city_split_recounts() {
    let data = small(24, 12, 3);
    let train_tags = vec!["NY".to_string(), "GT".to_string()];
    let test_tags: Vec<String> = data
        .tags(TagAxis::City)
        .into_iter()
        .filter(|t| !train_tags.contains(t))
        .collect();
    let floor = SplitFloor { min_2d: 1, min_3d: 1 };
    let (train, test) = split_by_tag_with_floor(&data, TagAxis::City, &train_tags, &test_tags, floor).unwrap();
    let in_train = |c: &str| c == "NY" || c == "GT";
    for label in [Label::ThreeD, Label::TwoD] {
        let expected = data
            .instances
            .iter()
            .filter(|i| i.label == label && in_train(&i.city))
            .count();
        assert_eq!(train.count(label), expected);
        let rest = data
            .instances
            .iter()
            .filter(|i| i.label == label && !in_train(&i.city))
            .count();
        assert_eq!(test.count(label), rest);
    }
    assert!(train.instances.iter().all(|i| in_train(&i.city)));
    assert!(test.instances.iter().all(|i| !in_train(&i.city)));
}

#[test]
fn split_floor_and_overlap_are_enforced() {
    let data = small(24, 12, 4);
    let ny = vec!["NY".to_string()];
    let sf = vec!["SF".to_string()];
    assert!(split_by_tag(&data, TagAxis::City, &ny, &sf).is_err());
    let floor = SplitFloor { min_2d: 1, min_3d: 1 };
    assert!(split_by_tag_with_floor(&data, TagAxis::City, &ny, &ny, floor).is_err());
    assert!(split_by_tag_with_floor(&data, TagAxis::City, &ny, &[], floor).is_err());
}

#[test]
fn dataset_survives_a_disk_round_trip() {
    let data = small(3, 2, 5);
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&data, dir.path()).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back.len(), data.len());
    for a in &data.instances {
        let b = back.instances.iter().find(|b| b.id == a.id).unwrap();
        assert_eq!(
            (&a.id, a.label, &a.city, a.object_class),
            (&b.id, b.label, &b.city, b.object_class)
        );
        for (fa, fb) in a.sequence.frames().iter().zip(b.sequence.frames()) {
            // PNG stores 8 bits per channel.
            assert!(fa
                .data()
                .iter()
                .zip(fb.data())
                .all(|(x, y)| (x - y).abs() <= 0.5 / 255.0 + 1e-12));
        }
    }
}

#[test]
fn generation_is_deterministic_and_seed_dependent() {
    let a = small(2, 2, 6);
    assert_eq!(a, small(2, 2, 6));
    assert_ne!(a.instances[0].sequence, small(2, 2, 7).instances[0].sequence);
}

#[test]
fn paired_3d_instance_blurs_more_than_its_flat_copy() {
    let wins = (0..100u64)
        .filter(|&seed| {
            let (three, two) = synthetic_pair(seed).unwrap();
            score_blurring(&three.sequence).unwrap() > score_blurring(&two.sequence).unwrap()
        })
        .count();
    assert!(wins >= 90, "3D won {wins} of 100 pairs");
}
