#![no_main]

use causat::scm::Scm;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = Scm::from_json(text) {
        let json = m.to_json();
        let back = Scm::from_json(&json).expect("serialized model loads");
        assert_eq!(back.to_json(), json);
    }
});
