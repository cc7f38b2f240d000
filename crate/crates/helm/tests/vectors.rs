mod common;

use common::repo_path;
use helm::vectors::{from_hex, to_hex, vectors_json, Vector};
use helm_core::protocol::{decode, encode, Message};

fn load() -> Vec<Vector> {
    serde_json::from_str(&std::fs::read_to_string(repo_path("testdata/protocol_vectors.json")).unwrap()).unwrap()
}

fn crc_bitwise(bytes: &[u8]) -> u16 {
    let mut c: u16 = 0xFFFF;
    for &b in bytes {
        c ^= (b as u16) << 8;
        for _ in 0..8 {
            c = if c & 0x8000 != 0 { (c << 1) ^ 0x1021 } else { c << 1 };
        }
    }
    c
}

#[test]
fn file_is_current() {
    let on_disk = std::fs::read_to_string(repo_path("testdata/protocol_vectors.json")).unwrap();
    assert_eq!(on_disk, vectors_json(), "regenerate with `helm vectors > testdata/protocol_vectors.json`");
}

#[test]
fn every_vector_decodes_to_its_message() {
    let vectors = load();
    assert!(vectors.len() >= 12);
    for v in &vectors {
        let bytes = from_hex(&v.hex).unwrap();
        let frame = decode(&bytes).unwrap_or_else(|e| panic!("{}: {e}", v.hex));
        assert_eq!(frame.seq, v.seq);
        assert_eq!(frame.message, v.message);
        assert_eq!(to_hex(&encode(&v.message, v.seq).unwrap()), v.hex);
    }
}

#[test]
fn framing_by_hand() {
    for v in load() {
        let b = from_hex(&v.hex).unwrap();
        assert_eq!(b[0], 0xFA);
        assert_eq!(b[1] as usize, b.len() - 6);
        assert_eq!(b[2], v.seq);
        assert_eq!(b[3], v.message.id());
        let n = b.len();
        assert_eq!(u16::from_le_bytes([b[n - 2], b[n - 1]]), crc_bitwise(&b[1..n - 2]));
    }
    let mut set_mode = vec![0xFA, 0x01, 0x32, 0x13, 0x02];
    let crc = crc_bitwise(&set_mode[1..]);
    set_mode.extend(crc.to_le_bytes());
    let v = load().into_iter().find(|v| v.message == Message::SetMode { mode: 2 }).unwrap();
    assert_eq!(to_hex(&set_mode), v.hex);
}

#[test]
fn hex_helpers() {
    assert_eq!(to_hex(&[0x00, 0xAB, 0x0F]), "00ab0f");
    assert_eq!(from_hex("00ab0f"), Some(vec![0x00, 0xAB, 0x0F]));
    assert_eq!(from_hex("0"), None);
    assert_eq!(from_hex("zz"), None);
}
