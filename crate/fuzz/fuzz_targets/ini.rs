#![no_main]

use libfuzzer_sys::fuzz_target;
use sis_perturb::config::Ini;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(ini) = Ini::parse(s) {
            let again = Ini::parse(&ini.to_string()).expect("serialized document must parse");
            assert_eq!(ini, again);
        }
    }
});
