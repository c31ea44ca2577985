#![no_main]
use libfuzzer_sys::fuzz_target;
use wxgen::sampler::parse_ensemble_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(ens) = parse_ensemble_csv(text) else { return };
    let mut out = Vec::new();
    ens.write_csv(&mut out).unwrap();
    let again = parse_ensemble_csv(std::str::from_utf8(&out).unwrap()).expect("written ensemble parses");
    assert_eq!(again.members(), ens.members());
});
