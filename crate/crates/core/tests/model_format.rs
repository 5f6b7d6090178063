use fastkan::network::{from_bytes, load, save, to_bytes, MODEL_MAGIC};
use fastkan::{Family, KanError, Matrix, Network, NetworkSpec};

fn le32(v: u32) -> [u8; 4] {
    v.to_le_bytes()
}

/// Header with no embedded spec, followed by `layers` layer records.
fn header(layers: u32) -> Vec<u8> {
    let mut b = MODEL_MAGIC.to_vec();
    b.extend(le32(1));
    b.extend(le32(0));
    b.extend(le32(layers));
    b
}

fn rbf_kan_record(in_dim: u32, out_dim: u32, centers: u32) -> Vec<u8> {
    let mut b = vec![0u8, 1u8];
    b.extend(le32(in_dim));
    b.extend(le32(out_dim));
    b.extend((-2.0f64).to_le_bytes());
    b.extend(2.0f64.to_le_bytes());
    b.extend(le32(centers));
    b.extend(le32(3));
    b.extend((4.0f64 / (centers as f64 - 1.0)).to_le_bytes());
    for i in 0..in_dim * out_dim * centers {
        b.extend((i as f64 * 0.01).to_le_bytes());
    }
    b
}

#[test]
fn hand_built_file_loads() {
    let mut bytes = header(1);
    bytes.extend(rbf_kan_record(2, 3, 8));
    let net = from_bytes(&bytes).unwrap();
    assert_eq!((net.in_dim(), net.out_dim()), (2, 3));
    assert_eq!(net.layers()[0].kind(), "rbf_kan");
}

#[test]
fn mismatched_declared_shape_names_the_layer() {
    // Layer 0 outputs 3 values; layer 1 claims to take 4.
    let mut bytes = header(2);
    bytes.extend(rbf_kan_record(2, 3, 8));
    bytes.extend(rbf_kan_record(4, 1, 8));
    let err = from_bytes(&bytes).unwrap_err();
    assert!(err.contains("layer 1"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.kanf");
    std::fs::write(&path, &bytes).unwrap();
    match load(&path) {
        Err(KanError::Format { message, .. }) => assert!(message.contains("layer 1"), "{message}"),
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn weight_block_shorter_than_declared_is_a_format_error() {
    let mut bytes = header(1);
    let mut rec = rbf_kan_record(2, 3, 8);
    rec.truncate(rec.len() - 8);
    bytes.extend(rec);
    let err = from_bytes(&bytes).unwrap_err();
    assert!(err.contains("layer 0"), "{err}");
}

#[test]
fn every_truncation_is_rejected_without_panicking() {
    let net = Network::build(&NetworkSpec::new(&[3, 2, 2], Family::Rbf).with_seed(5)).unwrap();
    let bytes = to_bytes(&net);
    for cut in 0..bytes.len() {
        assert!(from_bytes(&bytes[..cut]).is_err(), "prefix of {cut} bytes accepted");
    }
}

#[test]
fn file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for family in [Family::Spline, Family::Rbf] {
        let net = Network::build(&NetworkSpec::new(&[5, 4, 3], family).with_seed(9)).unwrap();
        let path = dir.path().join(format!("{family}.kanf"));
        save(&net, &path).unwrap();
        let back = load(&path).unwrap();
        let x = Matrix::from_fn(6, 5, |r, c| ((r * 5 + c) as f64 * 0.37).sin() * 2.5);
        assert_eq!(net.predict(&x).unwrap(), back.predict(&x).unwrap());
        assert_eq!(back.spec(), net.spec());
    }
}
