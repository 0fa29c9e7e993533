#![no_main]

use causat::lang::{parse_document, parse_formula, print_formula};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok((sig, formulas)) = parse_document(text) else { return };
    // printed formulas parse back to themselves
    for phi in formulas {
        let printed = print_formula(&sig, &phi);
        let again = parse_formula(&printed, &sig).expect("printed formula parses");
        assert_eq!(again, phi, "{printed}");
    }
});
