use std::path::PathBuf;

use fastkan::data::{
    load_idx_images, load_idx_labels, load_mnist, read_idx, subset, write_idx, MnistSplit, IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
};
use proptest::prelude::*;

fn mnist_dir() -> PathBuf {
    std::env::var_os("FASTKAN_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn idx_round_trip(n in 1usize..6, h in 1usize..5, w in 1usize..5, gz in any::<bool>(), seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let name = if gz { "img.idx.gz" } else { "img.idx" };
        let path = dir.path().join(name);
        let payload: Vec<u8> = (0..n * h * w).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 13) as u8).collect();
        write_idx(&path, &[n, h, w], &payload).unwrap();
        let arr = read_idx(&path, IDX_IMAGES_MAGIC).unwrap();
        prop_assert_eq!(&arr.dims, &vec![n, h, w]);
        prop_assert_eq!(&arr.data, &payload);
        let m = load_idx_images(&path).unwrap();
        prop_assert_eq!(m.shape(), (n, h * w));
        prop_assert!(m.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn labels_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.idx");
    write_idx(&path, &[5], &[3, 1, 4, 1, 5]).unwrap();
    assert_eq!(read_idx(&path, IDX_LABELS_MAGIC).unwrap().data, vec![3, 1, 4, 1, 5]);
    assert_eq!(load_idx_labels(&path).unwrap(), vec![3, 1, 4, 1, 5]);
}

#[test]
fn official_mnist_has_standard_sizes() {
    let dir = mnist_dir();
    let Ok(train) = load_mnist(&dir, MnistSplit::Train) else {
        eprintln!("MNIST not found in {}, skipping", dir.display());
        return;
    };
    assert_eq!(train.inputs().shape(), (60_000, 784));
    assert!(train.inputs().as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    let test = load_mnist(&dir, MnistSplit::Test).unwrap();
    assert_eq!(test.inputs().shape(), (10_000, 784));

    let sub = subset(&train, 1000, 0).unwrap();
    for (class, count) in sub.class_counts().unwrap().into_iter().enumerate() {
        assert!((98..=102).contains(&count), "class {class}: {count}");
    }
    assert_eq!(subset(&train, 1000, 0).unwrap().labels(), sub.labels());
}
