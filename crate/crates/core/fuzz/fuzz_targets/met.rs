#![no_main]
use libfuzzer_sys::fuzz_target;
use wxgen::met::{emit_met, parse_met};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(met) = parse_met(text) else { return };
    // Emitting rounds to two decimals; after that the text must be a fixed point.
    let mut first = Vec::new();
    emit_met(&met.series, &mut first).unwrap();
    let reparsed = parse_met(std::str::from_utf8(&first).unwrap()).expect("emitted met parses");
    let mut second = Vec::new();
    emit_met(&reparsed.series, &mut second).unwrap();
    assert_eq!(first, second);
});
