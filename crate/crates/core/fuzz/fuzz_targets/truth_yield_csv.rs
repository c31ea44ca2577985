#![no_main]
use libfuzzer_sys::fuzz_target;
use wxgen::evaluate::parse_truth_yield_csv;

fuzz_target!(|data: &[u8]| {
    let _ = parse_truth_yield_csv(data);
});
