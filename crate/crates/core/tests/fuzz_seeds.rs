//! Runs the fuzz-target bodies on stable: every checked-in corpus seed,
//! then random mutations of those seeds.

use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use wxgen::config::RunConfig;
use wxgen::data::{parse_weather_csv, write_weather_csv};
use wxgen::evaluate::{parse_truth_yield_csv, parse_yield_csv, yield_error_stats};
use wxgen::met::{emit_met, parse_met};
use wxgen::model::{WeatherNet, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
use wxgen::sampler::parse_ensemble_csv;

fn weather_csv(data: &[u8]) {
    let Ok(series) = parse_weather_csv(data) else { return };
    let mut out = Vec::new();
    write_weather_csv(&series, &mut out).unwrap();
    let again = parse_weather_csv(&out).expect("written csv parses");
    assert_eq!(again.records(), series.records());
}

fn met(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(met) = parse_met(text) else { return };
    let mut first = Vec::new();
    emit_met(&met.series, &mut first).unwrap();
    let reparsed = parse_met(std::str::from_utf8(&first).unwrap()).expect("emitted met parses");
    let mut second = Vec::new();
    emit_met(&reparsed.series, &mut second).unwrap();
    assert_eq!(first, second);
}

fn checkpoint(data: &[u8]) {
    if let Ok(net) = WeatherNet::from_bytes(data) {
        assert_eq!(net.to_bytes(), data);
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn seal(payload: &[u8]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(payload.len() + 28);
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    bytes.extend_from_slice(payload);
    let sum = fnv1a(&bytes);
    bytes.extend_from_slice(&sum.to_le_bytes());
    bytes
}

fn checkpoint_payload(payload: &[u8]) {
    checkpoint(&seal(payload));
}

fn config(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::parse(text) {
        let _ = cfg.architecture.spec();
    }
}

fn yield_csv(data: &[u8]) {
    let Ok(samples) = parse_yield_csv(data) else { return };
    for ys in samples.values() {
        yield_error_stats(ys, 0.0).expect("parsed groups are non-empty");
    }
}

fn truth_yield_csv(data: &[u8]) {
    let _ = parse_truth_yield_csv(data);
}

fn ensemble_csv(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(ens) = parse_ensemble_csv(text) else { return };
    let mut out = Vec::new();
    ens.write_csv(&mut out).unwrap();
    let again = parse_ensemble_csv(std::str::from_utf8(&out).unwrap()).expect("written ensemble parses");
    assert_eq!(again.members(), ens.members());
}

type Target = (&'static str, fn(&[u8]));

const TARGETS: [Target; 8] = [
    ("weather_csv", weather_csv),
    ("met", met),
    ("checkpoint", checkpoint),
    ("checkpoint_payload", checkpoint_payload),
    ("config", config),
    ("yield_csv", yield_csv),
    ("truth_yield_csv", truth_yield_csv),
    ("ensemble_csv", ensemble_csv),
];

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("seed_"))
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    out
}

#[test]
fn every_target_has_seeds_that_run_clean() {
    for (name, run) in TARGETS {
        let seeds = seeds(name);
        assert!(!seeds.is_empty(), "no seeds for {name}");
        for (_, bytes) in &seeds {
            run(bytes);
        }
    }
}

#[test]
fn valid_seeds_still_parse() {
    let first = |t: &str| seeds(t).into_iter().next().unwrap().1;
    assert!(parse_weather_csv(&first("weather_csv")).is_ok());
    assert!(parse_met(std::str::from_utf8(&first("met")).unwrap()).is_ok());
    assert!(WeatherNet::from_bytes(&first("checkpoint")).is_ok());
    assert!(WeatherNet::from_bytes(&seal(&first("checkpoint_payload"))).is_ok());
    assert!(RunConfig::parse(std::str::from_utf8(&first("config")).unwrap()).is_ok());
    assert!(parse_yield_csv(&first("yield_csv")).is_ok());
    assert!(parse_truth_yield_csv(&first("truth_yield_csv")).is_ok());
    assert!(parse_ensemble_csv(std::str::from_utf8(&first("ensemble_csv")).unwrap()).is_ok());
}

#[derive(Clone, Debug)]
enum Edit {
    Set(usize, u8),
    Insert(usize, Vec<u8>),
    Remove(usize, usize),
    Truncate(usize),
}

fn apply(mut bytes: Vec<u8>, edits: &[Edit]) -> Vec<u8> {
    for e in edits {
        let n = bytes.len().max(1);
        match e {
            Edit::Set(i, b) => {
                if !bytes.is_empty() {
                    bytes[i % n] = *b;
                }
            }
            Edit::Insert(i, s) => {
                let at = i % (bytes.len() + 1);
                bytes.splice(at..at, s.iter().copied());
            }
            Edit::Remove(i, len) => {
                let at = i % n;
                let end = (at + len).min(bytes.len());
                if at < end {
                    bytes.drain(at..end);
                }
            }
            Edit::Truncate(i) => bytes.truncate(i % n),
        }
    }
    bytes
}

fn edit() -> impl Strategy<Value = Edit> {
    // Favour bytes that are structural in the text formats.
    let byte = prop_oneof![any::<u8>(), prop::sample::select(b",\n=#!()[]-.0129eE ".to_vec()),];
    prop_oneof![
        (any::<usize>(), byte.clone()).prop_map(|(i, b)| Edit::Set(i, b)),
        (any::<usize>(), prop::collection::vec(byte, 1..8)).prop_map(|(i, s)| Edit::Insert(i, s)),
        (any::<usize>(), 1usize..16).prop_map(|(i, n)| Edit::Remove(i, n)),
        any::<usize>().prop_map(Edit::Truncate),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn mutated_seeds_never_panic(
        target in 0..TARGETS.len(),
        pick in any::<usize>(),
        edits in prop::collection::vec(edit(), 1..6),
    ) {
        let (name, run) = TARGETS[target];
        let seeds = seeds(name);
        let (_, bytes) = &seeds[pick % seeds.len()];
        run(&apply(bytes.clone(), &edits));
    }

    #[test]
    fn arbitrary_bytes_never_panic(target in 0..TARGETS.len(), data in prop::collection::vec(any::<u8>(), 0..256)) {
        (TARGETS[target].1)(&data);
    }
}
