//! The binary model loader must never panic on corrupt, truncated, or
//! hostile files, and anything it accepts must round-trip.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = gaitloop::neural::parse_model_bytes(data) {
        let bytes =
            gaitloop::neural::model_to_bytes(&model).expect("accepted model re-serializes");
        let again = gaitloop::neural::parse_model_bytes(&bytes)
            .expect("re-serialized model parses back");
        assert_eq!(again.meta.n, model.meta.n);
        assert_eq!(again.meta.s, model.meta.s);
        assert_eq!(again.meta.subject_id, model.meta.subject_id);
    }
});
