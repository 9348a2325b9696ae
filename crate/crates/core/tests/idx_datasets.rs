use fedcref::data::catalog::{data_dir_from_env, DatasetEntry, EMNIST_DIGITS, KMNIST49};

fn check(entry: DatasetEntry) {
    let Some(dir) = data_dir_from_env().filter(|d| entry.locate(d).is_some()) else {
        eprintln!("skipped: {} data not found", entry.name);
        return;
    };
    let ds = entry.load(&dir).unwrap();
    assert_eq!(ds.class_set().len(), entry.expected_classes);
    assert_eq!(ds.dim(), 784);
    assert!(ds.samples().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn emnist_digits_keeps_ten_classes() {
    check(EMNIST_DIGITS);
}

#[test]
fn kmnist49_floor_keeps_thirty_one_classes() {
    check(KMNIST49);
}
