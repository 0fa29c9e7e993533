#![no_main]

use causat::solver::parse_solver_response;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_solver_response(text);
    }
});
