#![no_main]
use libfuzzer_sys::fuzz_target;
use wxgen::model::WeatherNet;

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = WeatherNet::from_bytes(data) {
        assert_eq!(net.to_bytes(), data);
    }
});
