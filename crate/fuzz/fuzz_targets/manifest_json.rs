//! The corpus-manifest parser must never panic, and anything it accepts must
//! survive a serialize/re-parse round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(manifest) = gaitloop::ingest::parse_manifest(data) {
        let bytes = serde_json::to_vec(&manifest).expect("accepted manifest re-serializes");
        let again = gaitloop::ingest::parse_manifest(&bytes)
            .expect("re-serialized manifest parses back");
        assert_eq!(again.subjects.len(), manifest.subjects.len());
        assert_eq!(again.format_version, manifest.format_version);
    }
});
