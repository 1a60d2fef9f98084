//! The key=value delay-config parser must never panic, and accepted configs
//! must hold finite, non-negative delays.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = gaitloop::control::parse_delay_config(text) {
            for v in [cfg.t_dm_s, cfg.t_dc_s, cfg.t_dr_s] {
                assert!(v.is_finite() && v >= 0.0);
            }
        }
    }
});
