//! The trial CSV parser must never panic: any byte stream yields either a
//! parsed trial or a descriptive error.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(parsed) = gaitloop::ingest::parse_trial_csv(data, "fuzz") {
        // Accepted input must be internally consistent.
        assert_eq!(parsed.imu.nrows(), parsed.len());
        assert_eq!(parsed.plantar.nrows(), parsed.len());
        assert_eq!(parsed.imu.ncols() % 6, 0);
        assert_eq!(parsed.plantar.ncols(), 6);
        if let Some(phase) = &parsed.phase {
            assert_eq!(phase.len(), parsed.len());
        }
    }
});
