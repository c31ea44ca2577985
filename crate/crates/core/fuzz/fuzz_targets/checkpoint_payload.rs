#![no_main]
//! Wraps the input in a valid header and checksum so mutations reach the
//! payload decoder instead of dying at the checksum.
use libfuzzer_sys::fuzz_target;
use wxgen::model::{WeatherNet, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fuzz_target!(|payload: &[u8]| {
    let mut bytes = Vec::with_capacity(payload.len() + 28);
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    bytes.extend_from_slice(payload);
    let sum = fnv1a(&bytes);
    bytes.extend_from_slice(&sum.to_le_bytes());
    if let Ok(net) = WeatherNet::from_bytes(&bytes) {
        assert_eq!(net.to_bytes(), bytes);
    }
});
