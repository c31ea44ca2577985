#![no_main]
use libfuzzer_sys::fuzz_target;
use wxgen::data::{parse_weather_csv, write_weather_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(series) = parse_weather_csv(data) else { return };
    let mut out = Vec::new();
    write_weather_csv(&series, &mut out).unwrap();
    let again = parse_weather_csv(&out).expect("written csv parses");
    assert_eq!(again.records(), series.records());
});
