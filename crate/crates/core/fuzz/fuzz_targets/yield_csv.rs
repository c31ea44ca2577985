#![no_main]
use libfuzzer_sys::fuzz_target;
use wxgen::evaluate::{parse_yield_csv, yield_error_stats};

fuzz_target!(|data: &[u8]| {
    let Ok(samples) = parse_yield_csv(data) else { return };
    for ys in samples.values() {
        yield_error_stats(ys, 0.0).expect("parsed groups are non-empty");
    }
});
